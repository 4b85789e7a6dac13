from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from netconv.ingest.corpus import Corpus
from netconv.ingest.flows import DEFAULT_IDLE_TIMEOUT, assemble_flows
from netconv.ingest.packet import anonymize
from netconv.ingest.pcap import parse_capture
from netconv.ingest.tokenize import BYTES_PER_PACKET, PACKETS_PER_FLOW, TokenSequence, flow_to_record

log = logging.getLogger(__name__)


@dataclass
class IngestOptions:
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT
    packets_per_flow: int = PACKETS_PER_FLOW
    bytes_per_packet: int = BYTES_PER_PACKET
    threads: int = 1


@dataclass
class IngestStats:
    files: int = 0
    packets: int = 0
    flows: int = 0
    truncated_records: int = 0


def _ingest_one(path: Path, label: Optional[int], opts: IngestOptions):
    reader = parse_capture(path)
    packets = sorted(reader, key=lambda p: p.timestamp_us)
    flows = assemble_flows(packets, opts.idle_timeout)
    rows = []
    for flow in flows:
        flow.label = label
        flow.packets = [anonymize(p) for p in flow.packets[: opts.packets_per_flow]]
        rows.append(((path.name, flow.first_timestamp, flow.key.sort_key()),
                     flow_to_record(flow, opts.packets_per_flow, opts.bytes_per_packet)))
    return rows, len(packets), reader.warnings


def ingest_captures(paths: Sequence, labels: Optional[Sequence[Optional[int]]] = None,
                    opts: IngestOptions | None = None) -> tuple[Corpus, IngestStats]:
    """Parse, split, anonymize and tokenize captures.

    Files are processed concurrently when ``opts.threads > 1``; records are
    ordered by (file name, first-packet timestamp, flow key) either way.
    """
    opts = opts or IngestOptions()
    paths = [Path(p) for p in paths]
    labels = list(labels) if labels is not None else [None] * len(paths)
    if len(labels) != len(paths):
        raise ValueError("one label per capture file required")
    jobs = list(zip(paths, labels))
    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as ex:
            results = list(ex.map(lambda j: _ingest_one(j[0], j[1], opts), jobs))
    else:
        results = [_ingest_one(p, lab, opts) for p, lab in jobs]
    stats = IngestStats(files=len(paths))
    rows: list[tuple] = []
    for r, npk, warn in results:
        rows.extend(r)
        stats.packets += npk
        stats.truncated_records += warn
    rows.sort(key=lambda kr: kr[0])
    records: list[TokenSequence] = [rec for _, rec in rows]
    stats.flows = len(records)
    width = opts.packets_per_flow * opts.bytes_per_packet // 2
    log.info("ingested %d files, %d packets, %d flows", stats.files, stats.packets, stats.flows)
    return Corpus.from_records(records, tokens_per_record=width), stats
