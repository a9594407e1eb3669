"""Capacity-achieving T-private information retrieval over a prime field."""

from .field import LUFactors, PrimeField
from .locator import LocatorMatrix, make_E, make_locator
from .mds import MdsCode, make_mds
from .params import SchemeParams, capacity, derive_params, per_server_counts
from .plan import AnswerPlan, AnswerSlot, assign_blocks, build_plan, enumerate_types
from .protocol import Answer, ClientState, Query, RecordSet, client_query, reconstruct, run_round, server_answer
from .wire import decode_message, encode_message

__all__ = [
    "Answer", "AnswerPlan", "AnswerSlot", "ClientState", "LUFactors", "LocatorMatrix", "MdsCode",
    "PrimeField", "Query", "RecordSet", "SchemeParams", "assign_blocks", "build_plan", "capacity",
    "client_query", "decode_message", "derive_params", "encode_message", "enumerate_types", "make_E",
    "make_locator", "make_mds", "per_server_counts", "reconstruct", "run_round", "server_answer",
]
