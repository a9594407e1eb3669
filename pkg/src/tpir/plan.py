"""The retrieval blueprint: which entries of which mixed records every
server sums into each answer, for a given desired index theta.

The plan is a pure function of (M, N, T, theta); it carries no randomness
and no record contents.  Records, servers and rows are 1-based here.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Optional

from .locator import LocatorMatrix, make_locator
from .params import ConsistencyError, ParameterError, SchemeParams, per_server_counts

TypeSet = tuple[int, ...]


class PlanError(RuntimeError):
    pass


def enumerate_types(M: int, theta: int, k: int) -> list[TypeSet]:
    """All subsets of [M] - {theta} containing k, by cardinality then lexicographically."""
    if not (1 <= theta <= M and 1 <= k <= M) or k == theta:
        raise ParameterError(f"need distinct theta, k in [1, {M}], got theta={theta}, k={k}")
    others = [x for x in range(1, M + 1) if x not in (theta, k)]
    out = []
    for size in range(0, len(others) + 1):
        for extra in combinations(others, size):
            out.append(tuple(sorted((k,) + extra)))
    out.sort(key=lambda s: (len(s), s))
    return out


def interference_types(M: int, theta: int) -> list[TypeSet]:
    others = [x for x in range(1, M + 1) if x != theta]
    return [c for size in range(1, M) for c in combinations(others, size)]


def assign_blocks(p: SchemeParams, theta: int) -> dict[tuple[int, TypeSet], int]:
    """First row of the block each interference record devotes to each of its types."""
    if not 1 <= theta <= p.M:
        raise ParameterError(f"theta={theta} outside [1, {p.M}]")
    starts = {}
    for k in range(1, p.M + 1):
        if k == theta:
            continue
        row = 1
        for lam in enumerate_types(p.M, theta, k):
            starts[(k, lam)] = row
            row += p.rows_per_type(len(lam))
        if row - 1 != p.Ltilde:
            raise PlanError(f"blocks of record {k} cover {row - 1} rows, expected L~={p.Ltilde}")
    return starts


@dataclass(frozen=True)
class AnswerSlot:
    """One answered sum.

    ``contributions`` lists ``(record, row)`` for the interference records of
    the sum; ``desired_row`` is set iff theta is part of ``full_type``.
    ``group`` is ``(Lambda, r)`` for sums built from a locator row.
    """

    server: int
    full_type: TypeSet
    contributions: tuple[tuple[int, int], ...]
    desired_row: Optional[int]
    group: Optional[tuple[TypeSet, int]]

    @property
    def kind(self) -> str:
        if self.desired_row is None:
            return "interference"
        return "singleton" if not self.contributions else "mixed"

    def sort_key(self):
        local = self.group[1] if self.group else self.desired_row
        return (len(self.full_type), self.full_type, local)


@dataclass(frozen=True, eq=False)
class AnswerPlan:
    params: SchemeParams
    theta: int
    slots: tuple[tuple[AnswerSlot, ...], ...]
    desired_usage: tuple[int, ...]
    blocks: Mapping[tuple[int, TypeSet], int]
    locators: Mapping[int, LocatorMatrix]

    def server_slots(self, j: int) -> tuple[AnswerSlot, ...]:
        return self.slots[j - 1]

    @property
    def download(self) -> int:
        return sum(len(s) for s in self.slots)


def build_plan(
    p: SchemeParams,
    theta: int,
    locators: Optional[Mapping[int, LocatorMatrix]] = None,
    *,
    canonical_order: bool = True,
) -> AnswerPlan:
    """Lay out every answer slot for retrieving record ``theta``.

    ``locators`` overrides the constructed locator matrices and
    ``canonical_order=False`` keeps construction order; both exist for
    fault-injection in audits.
    """
    if not 1 <= theta <= p.M:
        raise ParameterError(f"theta={theta} outside [1, {p.M}]")
    if locators is None:
        locators = {i: make_locator(i, p) for i in range(1, p.M)}
    blocks = assign_blocks(p, theta)
    next_row = [1] * p.N
    slots: list[list[AnswerSlot]] = [[] for _ in range(p.N)]

    def take_desired(j: int) -> int:
        row = next_row[j - 1]
        if row > p.Ltilde:
            raise PlanError(f"server {j} ran out of desired rows (L~={p.Ltilde})")
        next_row[j - 1] += 1
        return row

    for j in range(1, p.N + 1):
        for _ in range(p.server_group_count(j, 1)):
            slots[j - 1].append(AnswerSlot(j, (theta,), (), take_desired(j), None))

    for lam in interference_types(p.M, theta):
        bits = locators[len(lam)].bits
        full = tuple(sorted(lam + (theta,)))
        for r in range(1, bits.shape[0] + 1):
            contrib = tuple((k, blocks[(k, lam)] + r - 1) for k in lam)
            for j in range(1, p.N + 1):
                if bits[r - 1, j - 1]:
                    slots[j - 1].append(AnswerSlot(j, lam, contrib, None, (lam, r)))
                else:
                    slots[j - 1].append(AnswerSlot(j, full, contrib, take_desired(j), (lam, r)))

    usage = tuple(r - 1 for r in next_row)
    if any(u != p.Ltilde for u in usage):
        raise PlanError(f"desired rows consumed per server {usage}, expected {p.Ltilde} each")
    if canonical_order:
        slots = [sorted(s, key=AnswerSlot.sort_key) for s in slots]
    return AnswerPlan(p, theta, tuple(tuple(s) for s in slots), usage, blocks, dict(locators))


def plan_violations(plan: AnswerPlan) -> list[str]:
    """Recount the plan from its slots and name every broken invariant."""
    p, theta = plan.params, plan.theta
    out = []
    first, rest = per_server_counts(p)
    for j in range(1, p.N + 1):
        slots = plan.server_slots(j)
        want = first if j <= p.T else rest
        if len(slots) != want:
            out.append(f"server {j} answers {len(slots)} sums, expected {want}")
        by_type = Counter(s.full_type for s in slots)
        for size in range(1, p.M + 1):
            expect = p.server_group_count(j, size)
            for ty in combinations(range(1, p.M + 1), size):
                if by_type.get(ty, 0) != expect:
                    out.append(f"server {j} has {by_type.get(ty, 0)} sums of type {ty}, expected {expect}")
        desired = sorted(s.desired_row for s in slots if s.desired_row is not None)
        if desired != list(range(1, p.Ltilde + 1)):
            out.append(f"server {j} does not consume desired rows 1..{p.Ltilde} exactly once")
        for k in range(1, p.M + 1):
            if k == theta:
                continue
            rows = sorted(r for s in slots for rec, r in s.contributions if rec == k)
            if rows != list(range(1, p.Ltilde + 1)):
                out.append(f"server {j} does not cover rows of record {k} exactly once")
        for s in slots:
            members = {rec for rec, _ in s.contributions} | ({theta} if s.desired_row else set())
            if s.server != j or tuple(sorted(members)) != s.full_type:
                out.append(f"slot {s} inconsistent with its server/type")
    groups: dict = {}
    for j in range(1, p.N + 1):
        for s in plan.server_slots(j):
            if s.group is not None:
                groups.setdefault(s.group, []).append(s)
    for key, members in groups.items():
        servers = [s.server for s in members]
        n_int = sum(1 for s in members if s.kind == "interference")
        if sorted(servers) != list(range(1, p.N + 1)) or n_int != p.T:
            out.append(f"group {key} has {n_int} interference sums over servers {sorted(servers)}")
    return out


def render_plan(plan: AnswerPlan) -> str:
    """Text answer table; records 1, 2, 3, ... print as a, b, c, ...

    Debug aid only, format not stable.
    """
    letters = "abcdefghijklmnopqrstuvwxyz"

    def sym(rec: int, row: int, j: int) -> str:
        return f"{letters[(rec - 1) % 26]}{row}{j}"

    lines = []
    for j in range(1, plan.params.N + 1):
        terms = []
        for s in plan.server_slots(j):
            parts = [(rec, row) for rec, row in s.contributions]
            if s.desired_row is not None:
                parts.append((plan.theta, s.desired_row))
            terms.append("+".join(sym(rec, row, j) for rec, row in sorted(parts)))
        lines.append(f"Serv({j}): " + ", ".join(terms))
    return "\n".join(lines)
