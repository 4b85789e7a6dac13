from netconv.ingest.corpus import Corpus, CorpusError, read_corpus, write_corpus
from netconv.ingest.flows import Flow, assemble_flows
from netconv.ingest.packet import Endpoint, FlowKey, Layers, anonymize, flow_key_of, parse_layers
from netconv.ingest.pcap import CaptureError, CaptureReader, LinkType, RawPacket, parse_capture, write_pcap
from netconv.ingest.pipeline import IngestOptions, IngestStats, ingest_captures
from netconv.ingest.synth import ClassTemplate, Field, SynthSpec, field_mask, synthesize_corpus
from netconv.ingest.tokenize import TokenSequence, bytes_to_tokens, flow_to_record, packet_to_tokens

__all__ = [
    "CaptureError",
    "CaptureReader",
    "ClassTemplate",
    "Corpus",
    "CorpusError",
    "Endpoint",
    "Field",
    "Flow",
    "FlowKey",
    "IngestOptions",
    "IngestStats",
    "Layers",
    "LinkType",
    "RawPacket",
    "SynthSpec",
    "TokenSequence",
    "anonymize",
    "assemble_flows",
    "bytes_to_tokens",
    "field_mask",
    "flow_key_of",
    "flow_to_record",
    "ingest_captures",
    "packet_to_tokens",
    "parse_capture",
    "parse_layers",
    "read_corpus",
    "synthesize_corpus",
    "write_corpus",
    "write_pcap",
]
