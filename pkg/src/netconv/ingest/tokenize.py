from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from netconv.ingest.flows import Flow
from netconv.ingest.pcap import RawPacket
from netconv.vocab import PAD_ID

BYTES_PER_PACKET = 128
PACKETS_PER_FLOW = 5
TOKEN_DTYPE = np.uint32


@dataclass(eq=False)
class TokenSequence:
    tokens: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=TOKEN_DTYPE)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.tokens, other.tokens)


def bytes_to_tokens(data: bytes, bytes_per_packet: int = BYTES_PER_PACKET) -> np.ndarray:
    """First ``bytes_per_packet`` bytes, zero-padded, paired big-endian into token ids."""
    if bytes_per_packet % 2:
        raise ValueError("bytes_per_packet must be even")
    buf = np.zeros(bytes_per_packet, dtype=TOKEN_DTYPE)
    head = np.frombuffer(bytes(data[:bytes_per_packet]), dtype=np.uint8)
    buf[: len(head)] = head
    return buf[0::2] * 256 + buf[1::2]


def packet_to_tokens(packet: RawPacket, bytes_per_packet: int = BYTES_PER_PACKET) -> np.ndarray:
    return bytes_to_tokens(packet.data, bytes_per_packet)


def flow_to_record(flow: Flow, packets_per_flow: int = PACKETS_PER_FLOW,
                   bytes_per_packet: int = BYTES_PER_PACKET) -> TokenSequence:
    """Concatenate the first packets' tokens; missing packets become PAD blocks."""
    if not flow.packets:
        raise ValueError("empty flow")
    per = bytes_per_packet // 2
    out = np.full(packets_per_flow * per, PAD_ID, dtype=TOKEN_DTYPE)
    for i, pkt in enumerate(flow.packets[:packets_per_flow]):
        out[i * per:(i + 1) * per] = packet_to_tokens(pkt, bytes_per_packet)
    return TokenSequence(out, flow.label)
