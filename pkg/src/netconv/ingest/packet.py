"""Header offsets, canonical flow keys and address anonymization."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from netconv.ingest.pcap import LinkType, RawPacket

ETH_HEADER = 14
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_IPV6 = 0x86DD
_VLAN_TYPES = {0x8100, 0x88A8, 0x9100}
PROTO_TCP = 6
PROTO_UDP = 17
_IPV6_EXT = {0, 43, 60}
_IPV6_FRAGMENT = 44
_IPV6_AH = 51


@dataclass(frozen=True)
class Layers:
    """Byte offsets of the headers found in one frame (None when absent)."""

    has_ethernet: bool
    ip_offset: Optional[int] = None
    ip_version: int = 0
    protocol: int = 0
    l4_offset: Optional[int] = None

    @property
    def addr_slices(self) -> tuple[slice, slice]:
        o = self.ip_offset
        if self.ip_version == 4:
            return slice(o + 12, o + 16), slice(o + 16, o + 20)
        return slice(o + 8, o + 24), slice(o + 24, o + 40)


def parse_layers(packet: RawPacket) -> Layers:
    data = packet.data
    ip_off = 0
    has_eth = packet.link_type is LinkType.ETHERNET
    if has_eth:
        if len(data) < ETH_HEADER:
            return Layers(has_eth)
        off = 12
        ethertype = int.from_bytes(data[off:off + 2], "big")
        while ethertype in _VLAN_TYPES and off + 6 <= len(data):
            off += 4
            ethertype = int.from_bytes(data[off:off + 2], "big")
        ip_off = off + 2
        if ethertype == ETHERTYPE_IPV4:
            version = 4
        elif ethertype == ETHERTYPE_IPV6:
            version = 6
        else:
            return Layers(has_eth)
    else:
        version = data[0] >> 4
        if version not in (4, 6):
            return Layers(has_eth)

    if version == 4:
        if len(data) < ip_off + 20 or data[ip_off] >> 4 != 4:
            return Layers(has_eth)
        ihl = (data[ip_off] & 0x0F) * 4
        proto = data[ip_off + 9]
        frag = int.from_bytes(data[ip_off + 6:ip_off + 8], "big") & 0x1FFF
        l4 = ip_off + ihl if frag == 0 and ihl >= 20 else None
    else:
        if len(data) < ip_off + 40:
            return Layers(has_eth)
        proto = data[ip_off + 6]
        l4 = ip_off + 40
        while l4 is not None and proto in _IPV6_EXT | {_IPV6_FRAGMENT, _IPV6_AH}:
            if l4 + 8 > len(data):
                l4 = None
                break
            nxt = data[l4]
            if proto == _IPV6_FRAGMENT:
                if int.from_bytes(data[l4 + 2:l4 + 4], "big") >> 3:
                    l4 = None
                    proto = nxt
                    break
                size = 8
            elif proto == _IPV6_AH:
                size = (data[l4 + 1] + 2) * 4
            else:
                size = (data[l4 + 1] + 1) * 8
            proto = nxt
            l4 += size
    if proto not in (PROTO_TCP, PROTO_UDP) or (l4 is not None and l4 + 4 > len(data)):
        l4 = None
    return Layers(has_eth, ip_off, version, proto, l4)


class Endpoint(NamedTuple):
    ip: ipaddress.IPv4Address | ipaddress.IPv6Address
    port: int

    def sort_key(self):
        return (self.ip.version, int(self.ip), self.port)


@dataclass(frozen=True)
class FlowKey:
    """Direction-independent conversation key; ``endpoint_lo`` sorts first."""

    endpoint_lo: Endpoint
    endpoint_hi: Endpoint
    protocol: int

    @property
    def protocol_name(self) -> str:
        return {PROTO_TCP: "TCP", PROTO_UDP: "UDP"}.get(self.protocol, f"other({self.protocol})")

    def sort_key(self):
        return (self.endpoint_lo.sort_key(), self.endpoint_hi.sort_key(), self.protocol)

    def __str__(self):
        lo, hi = self.endpoint_lo, self.endpoint_hi
        return f"{self.protocol_name} {lo.ip}:{lo.port} <-> {hi.ip}:{hi.port}"


def flow_key_of(packet: RawPacket) -> Optional[FlowKey]:
    """Canonical flow key, or None for frames without an IP layer."""
    layers = parse_layers(packet)
    if layers.ip_offset is None:
        return None
    src_sl, dst_sl = layers.addr_slices
    data = packet.data
    src = ipaddress.ip_address(bytes(data[src_sl]))
    dst = ipaddress.ip_address(bytes(data[dst_sl]))
    sport = dport = 0
    if layers.l4_offset is not None:
        o = layers.l4_offset
        sport = int.from_bytes(data[o:o + 2], "big")
        dport = int.from_bytes(data[o + 2:o + 4], "big")
    a, b = Endpoint(src, sport), Endpoint(dst, dport)
    if b.sort_key() < a.sort_key():
        a, b = b, a
    return FlowKey(a, b, layers.protocol)


def anonymize(packet: RawPacket) -> RawPacket:
    """Zero MAC addresses, IP addresses and L4 ports; everything else is kept."""
    layers = parse_layers(packet)
    buf = bytearray(packet.data)
    n = len(buf)

    def zero(sl: slice):
        lo, hi = min(sl.start, n), min(sl.stop, n)
        buf[lo:hi] = bytes(hi - lo)

    if layers.has_ethernet:
        zero(slice(0, 12))
    if layers.ip_offset is not None:
        for sl in layers.addr_slices:
            zero(sl)
        if layers.l4_offset is not None:
            zero(slice(layers.l4_offset, layers.l4_offset + 4))
    return replace(packet, data=bytes(buf))
