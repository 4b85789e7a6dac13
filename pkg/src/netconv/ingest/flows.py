from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from netconv.ingest.packet import FlowKey, flow_key_of
from netconv.ingest.pcap import RawPacket

DEFAULT_IDLE_TIMEOUT = 64.0


@dataclass
class Flow:
    key: FlowKey
    packets: list[RawPacket] = field(default_factory=list)
    label: Optional[int] = None

    @property
    def first_timestamp(self) -> int:
        return self.packets[0].timestamp_us


def assemble_flows(packets: Iterable[RawPacket], idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> list[Flow]:
    """Group packets by canonical key; an idle gap longer than ``idle_timeout`` seconds splits a flow.

    Packets without an IP layer are dropped. Flows come back ordered by
    (first timestamp, key).
    """
    limit_us = idle_timeout * 1_000_000
    open_flows: dict[FlowKey, Flow] = {}
    done: list[Flow] = []
    for pkt in packets:
        key = flow_key_of(pkt)
        if key is None:
            continue
        flow = open_flows.get(key)
        if flow is not None and pkt.timestamp_us - flow.packets[-1].timestamp_us > limit_us:
            done.append(flow)
            flow = None
        if flow is None:
            flow = open_flows[key] = Flow(key)
        flow.packets.append(pkt)
    done.extend(open_flows.values())
    done.sort(key=lambda f: (f.first_timestamp, f.key.sort_key()))
    return done
