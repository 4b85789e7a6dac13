"""Hand-built Ethernet/IP/TCP/UDP frames for capture fixtures."""

import ipaddress
import struct

from netconv.ingest import LinkType, RawPacket

MAC_A = bytes.fromhex("020000000001")
MAC_B = bytes.fromhex("020000000002")


def ipv4(src, dst, proto, payload, ttl=64):
    total = 20 + len(payload)
    hdr = struct.pack(">BBHHHBBH4s4s", 0x45, 0, total, 0x1234, 0x4000, ttl, proto, 0,
                      ipaddress.ip_address(src).packed, ipaddress.ip_address(dst).packed)
    return hdr + payload


def ipv6(src, dst, proto, payload):
    hdr = struct.pack(">IHBB16s16s", 6 << 28, len(payload), proto, 64,
                      ipaddress.ip_address(src).packed, ipaddress.ip_address(dst).packed)
    return hdr + payload


def tcp(sport, dport, payload=b"", flags=0x18, seq=1):
    return struct.pack(">HHIIBBHHH", sport, dport, seq, 0, 5 << 4, flags, 65535, 0, 0) + payload


def udp(sport, dport, payload=b""):
    return struct.pack(">HHHH", sport, dport, 8 + len(payload), 0) + payload


def ether(ip_packet, src=MAC_A, dst=MAC_B, ethertype=0x0800):
    return dst + src + struct.pack(">H", ethertype) + ip_packet


def arp_frame():
    body = struct.pack(">HHBBH", 1, 0x0800, 6, 4, 1) + MAC_A + bytes(4) + bytes(6) + bytes(4)
    return ether(body, ethertype=0x0806)


def eth_tcp(ts, src, sport, dst, dport, payload=b"", **kw):
    return RawPacket(ts, LinkType.ETHERNET, ether(ipv4(src, dst, 6, tcp(sport, dport, payload, **kw))))


def eth_udp(ts, src, sport, dst, dport, payload=b""):
    return RawPacket(ts, LinkType.ETHERNET, ether(ipv4(src, dst, 17, udp(sport, dport, payload))))


def two_flow_capture():
    """A 3-packet TCP conversation and a 6-packet UDP exchange, interleaved."""
    pkts = [
        eth_tcp(1_000_000, "10.0.0.1", 80, "10.0.0.2", 4431, b"", flags=0x12),
        eth_udp(1_000_100, "8.8.8.8", 53, "10.0.0.9", 5353, b"\x01" * 30),
        eth_tcp(1_000_200, "10.0.0.2", 4431, "10.0.0.1", 80, b"hello"),
        eth_udp(1_000_300, "10.0.0.9", 5353, "8.8.8.8", 53, b"\x02" * 30),
        eth_udp(1_000_400, "8.8.8.8", 53, "10.0.0.9", 5353, b"\x03" * 200),
        eth_tcp(1_000_500, "10.0.0.1", 80, "10.0.0.2", 4431, b"world!"),
        eth_udp(1_000_600, "10.0.0.9", 5353, "8.8.8.8", 53, b"\x04" * 10),
        eth_udp(1_000_700, "8.8.8.8", 53, "10.0.0.9", 5353, b"\x05" * 10),
        eth_udp(1_000_800, "10.0.0.9", 5353, "8.8.8.8", 53, b"\x06" * 10),
    ]
    return pkts
