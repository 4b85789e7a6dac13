"""Reading and writing capture files (classic pcap and simple pcapng)."""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

PCAP_MAGIC_US = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D
PCAPNG_SHB = 0x0A0D0D0A
PCAPNG_BOM = 0x1A2B3C4D

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
_RAW_IP_LINKTYPES = {12, 14, LINKTYPE_RAW, 228, 229}

# pcapng blocks that carry nothing we need but are harmless to skip
_SKIPPABLE_BLOCKS = {0x00000004, 0x00000005, 0x0000000A}
_BLOCK_IDB, _BLOCK_SPB, _BLOCK_EPB = 0x00000001, 0x00000003, 0x00000006


class CaptureError(ValueError):
    pass


class LinkType(enum.Enum):
    ETHERNET = "ethernet"
    RAW_IP = "raw-ip"


@dataclass(frozen=True)
class RawPacket:
    timestamp_us: int
    link_type: LinkType
    data: bytes

    def __post_init__(self):
        if not self.data:
            raise ValueError("empty packet")


def link_type_of(code: int) -> LinkType:
    if code == LINKTYPE_ETHERNET:
        return LinkType.ETHERNET
    if code in _RAW_IP_LINKTYPES:
        return LinkType.RAW_IP
    raise CaptureError(f"unsupported link type {code}")


class CaptureReader:
    """Iterates packets of one capture file; counts skipped truncated records in ``warnings``."""

    def __init__(self, path):
        self.path = Path(path)
        self.warnings = 0
        with open(self.path, "rb") as fh:
            head = fh.read(4)
        if len(head) < 4:
            raise CaptureError(f"{self.path}: unsupported capture format (file too short)")
        be, le = struct.unpack(">I", head)[0], struct.unpack("<I", head)[0]
        if PCAP_MAGIC_US in (be, le) or PCAP_MAGIC_NS in (be, le):
            self.format = "pcap"
        elif le == PCAPNG_SHB:
            self.format = "pcapng"
        else:
            raise CaptureError(f"{self.path}: unsupported capture format (magic {head.hex()})")

    def __iter__(self) -> Iterator[RawPacket]:
        with open(self.path, "rb") as fh:
            data = fh.read()
        if self.format == "pcap":
            yield from self._iter_pcap(data)
        else:
            yield from self._iter_pcapng(data)

    def _truncated(self, what: str):
        self.warnings += 1
        log.warning("%s: skipping truncated %s", self.path, what)

    def _iter_pcap(self, data: bytes) -> Iterator[RawPacket]:
        if len(data) < 24:
            raise CaptureError(f"{self.path}: malformed pcap header")
        (magic,) = struct.unpack("<I", data[:4])
        if magic in (PCAP_MAGIC_US, PCAP_MAGIC_NS):
            endian = "<"
        else:
            endian = ">"
            (magic,) = struct.unpack(">I", data[:4])
        nano = magic == PCAP_MAGIC_NS
        _, _, _, _, _, network = struct.unpack(endian + "HHiIII", data[4:24])
        link = link_type_of(network & 0x0FFFFFFF)
        off = 24
        while off < len(data):
            if off + 16 > len(data):
                self._truncated("record header")
                return
            sec, frac, caplen, _ = struct.unpack(endian + "IIII", data[off:off + 16])
            off += 16
            if off + caplen > len(data):
                self._truncated("record")
                return
            frame = data[off:off + caplen]
            off += caplen
            if not frame:
                continue
            ts = sec * 1_000_000 + (frac // 1000 if nano else frac)
            yield RawPacket(ts, link, frame)

    def _iter_pcapng(self, data: bytes) -> Iterator[RawPacket]:
        off = 0
        endian = "<"
        interfaces: list[tuple[LinkType, int]] = []
        while off < len(data):
            if off + 12 > len(data):
                self._truncated("block header")
                return
            (btype,) = struct.unpack("<I", data[off:off + 4])
            if btype == PCAPNG_SHB:
                (bom,) = struct.unpack("<I", data[off + 8:off + 12])
                if bom == PCAPNG_BOM:
                    endian = "<"
                elif bom == 0x4D3C2B1A:
                    endian = ">"
                else:
                    raise CaptureError(f"{self.path}: malformed pcapng section header")
                interfaces = []
            btype, blen = struct.unpack(endian + "II", data[off:off + 8])
            if blen < 12 or blen % 4:
                raise CaptureError(f"{self.path}: malformed pcapng block length {blen}")
            if off + blen > len(data):
                self._truncated("block")
                return
            body = data[off + 8:off + blen - 4]
            off += blen
            if btype == PCAPNG_SHB or btype in _SKIPPABLE_BLOCKS:
                continue
            if btype == _BLOCK_IDB:
                linktype, _, _snaplen = struct.unpack(endian + "HHI", body[:8])
                interfaces.append((link_type_of(linktype), _tsresol(body[8:], endian)))
            elif btype == _BLOCK_EPB:
                iface, hi, lo, caplen, _ = struct.unpack(endian + "IIIII", body[:20])
                if iface >= len(interfaces):
                    raise CaptureError(f"{self.path}: packet references unknown interface {iface}")
                link, units_per_s = interfaces[iface]
                frame = body[20:20 + caplen]
                if len(frame) < caplen:
                    self._truncated("packet block")
                    continue
                ticks = (hi << 32) | lo
                yield RawPacket(ticks * 1_000_000 // units_per_s, link, frame)
            elif btype == _BLOCK_SPB:
                if not interfaces:
                    raise CaptureError(f"{self.path}: simple packet block before any interface")
                (origlen,) = struct.unpack(endian + "I", body[:4])
                frame = body[4:4 + origlen]
                if frame:
                    yield RawPacket(0, interfaces[0][0], frame)
            else:
                raise CaptureError(f"{self.path}: unsupported pcapng block type 0x{btype:08x}")


def _tsresol(options: bytes, endian: str) -> int:
    off = 0
    while off + 4 <= len(options):
        code, length = struct.unpack(endian + "HH", options[off:off + 4])
        if code == 0:
            break
        if code == 9 and length >= 1:
            v = options[off + 4]
            return 2 ** (v & 0x7F) if v & 0x80 else 10 ** v
        off += 4 + ((length + 3) & ~3)
    return 1_000_000


def parse_capture(path) -> CaptureReader:
    """Open a capture; iterate the result for packets (in file order)."""
    return CaptureReader(path)


def write_pcap(path, packets: Iterable[RawPacket], nanosecond: bool = False) -> None:
    """Write a little-endian classic pcap; all packets must share one link type."""
    packets = list(packets)
    links = {p.link_type for p in packets}
    if len(links) > 1:
        raise ValueError("mixed link types in one pcap")
    link = links.pop() if links else LinkType.ETHERNET
    code = LINKTYPE_ETHERNET if link is LinkType.ETHERNET else LINKTYPE_RAW
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", PCAP_MAGIC_NS if nanosecond else PCAP_MAGIC_US, 2, 4, 0, 0, 65535, code))
        for p in packets:
            sec, us = divmod(p.timestamp_us, 1_000_000)
            fh.write(struct.pack("<IIII", sec, us * 1000 if nanosecond else us, len(p.data), len(p.data)))
            fh.write(p.data)
