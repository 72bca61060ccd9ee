"""Doubletree cooperative topology discovery, simulated.

Addresses are dotted-quad strings throughout.
"""

from ._doubletree import (
    DecodeError,
    Topology,
    choose_h,
    classic_oracle,
    decode_stopset,
    encode_message,
    encode_stopset,
    generate_topology,
    load_topology,
    run_cli,
    simulate,
)

__all__ = [
    "DecodeError",
    "Topology",
    "choose_h",
    "classic_oracle",
    "decode_stopset",
    "encode_message",
    "encode_stopset",
    "generate_topology",
    "load_topology",
    "run_cli",
    "simulate",
]
