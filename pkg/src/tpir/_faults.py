"""Deliberate defects for checking that the audits can fail.

Only tests construct these; the CLI has no path to them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

LEAKS = ("identity", "order")


@dataclass(frozen=True)
class Faults:
    # (size class, row, column), 1-based: bit of that locator matrix to invert
    flip_locator_bit: Optional[tuple[int, int, int]] = None
    # add 1 to the first value answered by server 1
    tamper_answer: bool = False
    # "identity": the client skips mixing (every secret is the identity)
    # "order": slots are emitted in construction order, which depends on theta
    leak: Optional[str] = None

    def __post_init__(self):
        if self.leak is not None and self.leak not in LEAKS:
            raise ValueError(f"unknown leak {self.leak!r}, expected one of {LEAKS}")
