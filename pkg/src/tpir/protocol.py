"""One retrieval round: client queries, server answers, client reconstruction.

A query to server j is an explicit coefficient matrix with one row per
answer slot and ``M*L`` columns; the server returns the inner product of
every row with the concatenated records.  Record k enters a slot through
one row of its coefficient-row matrix ``R_k`` (``N*L~ x L``), row
``(i-1)*N + j - 1`` belonging to entry (i, j):

* ``R_theta = S_theta^T``;
* ``R_k = (I kron G^T) S_k[:, :T*L~]^T`` for k != theta.

Secrets are drawn directly in this transposed form, which has the same law.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .field import DimensionError, LUFactors, PrimeField, interference_rows
from .mds import MdsCode
from .params import ParameterError, SchemeParams
from .plan import AnswerPlan, build_plan


class ProtocolError(ValueError):
    pass


class MissingSlotError(ProtocolError):
    pass


@dataclass(frozen=True)
class RecordSet:
    """M replicated records of L symbols each, as an ``M x L`` int64 array."""

    q: int
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise DimensionError(f"records must be an M x L array, got shape {d.shape}")
        if d.size and (d.min() < 0 or d.max() >= self.q):
            raise ProtocolError(f"record values must lie in [0, {self.q})")
        object.__setattr__(self, "data", d.astype(np.int64))

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def L(self) -> int:
        return self.data.shape[1]

    def record(self, k: int) -> np.ndarray:
        """Record k, 1-based."""
        return self.data[k - 1]

    @classmethod
    def random(cls, M: int, L: int, q: int, rng: np.random.Generator) -> "RecordSet":
        return cls(q, rng.integers(0, q, size=(M, L), dtype=np.int64))


@dataclass(frozen=True, eq=False)
class Query:
    """The coefficient matrix sent to one server: one row per answer slot, M*L columns.

    The client builds it in compact form: ``rows[k]`` holds the coefficient
    rows of record k+1 for this server's column, and ``picks[s, k]`` names
    the row that slot s takes from it (-1 when record k+1 is absent).
    ``coeffs`` is the explicit matrix, expanded on first use.
    """

    server: int
    q: int
    M: int
    L: int
    dense: Optional[np.ndarray] = None
    rows: Optional[tuple] = None
    picks: Optional[np.ndarray] = None

    def __post_init__(self):
        if (self.dense is None) == (self.picks is None):
            raise ProtocolError("a query holds either an explicit matrix or rows plus picks")
        if self.picks is not None:
            if self.rows is None or len(self.rows) != self.M or self.picks.shape[1:] != (self.M,):
                raise DimensionError(f"compact query needs {self.M} row blocks and a (slots, {self.M}) pick table")
            for k, block in enumerate(self.rows):
                used = self.picks[:, k]
                if block.shape[1] != self.L or (used.size and used.max() >= block.shape[0]):
                    raise DimensionError(f"row block {k + 1} of shape {block.shape} does not cover its picks")

    @property
    def coeffs(self) -> np.ndarray:
        if self.dense is None:
            out = np.zeros((self.picks.shape[0], self.M * self.L), dtype=np.int64)
            for k, block in enumerate(self.rows):
                sel = self.picks[:, k] >= 0
                out[sel, k * self.L : (k + 1) * self.L] = block[self.picks[sel, k]]
            object.__setattr__(self, "dense", out)
        return self.dense

    @property
    def slot_count(self) -> int:
        return self.picks.shape[0] if self.picks is not None else self.dense.shape[0]

    @property
    def width(self) -> int:
        return self.M * self.L if self.picks is not None else self.dense.shape[-1]


@dataclass(frozen=True)
class Answer:
    server: int
    values: np.ndarray


class ClientState:
    """Everything the client keeps between sending queries and decoding.

    Holds a factorisation of ``S_theta^T``, never the secrets of other
    records.  The explicit inverse of S_theta is only formed on request.
    """

    def __init__(self, params: SchemeParams, theta: int, plan: AnswerPlan, lu_t: LUFactors, s_theta_t: np.ndarray, rng):
        self.params = params
        self.theta = theta
        self.plan = plan
        self._lu_t = lu_t
        self._inverse: Optional[np.ndarray] = None
        # Freivalds-style check that the factors invert S_theta^T
        f = lu_t.field
        probe = f.random_matrix(params.L, rng)
        if not np.array_equal(f.matmul(s_theta_t, lu_t.solve(probe)), probe):
            raise ProtocolError("factorisation of S_theta failed its consistency check")

    @property
    def s_theta_inverse(self) -> np.ndarray:
        if self._inverse is None:
            self._inverse = np.ascontiguousarray(self._lu_t.inverse().T)
        return self._inverse

    def unmix(self, u_vec: np.ndarray) -> np.ndarray:
        """W_theta from ``W_theta S_theta``."""
        return self._lu_t.solve(u_vec)


@lru_cache(maxsize=256)
def cached_plan(p: SchemeParams, theta: int) -> AnswerPlan:
    return build_plan(p, theta)


@dataclass(frozen=True)
class _Layout:
    # per server: list of (record index 0-based, slot indices, R_k row indices)
    gathers: tuple
    # per server: (slot idx, row idx) for desired symbols read directly
    singles: tuple
    # groups keyed by 1-position tuple: (answer refs of interference sums, mixed refs)
    groups: tuple
    # per server: (slots, M) row of the server's column block each slot takes, -1 if absent
    picks: tuple


@lru_cache(maxsize=256)
def _layout(plan: AnswerPlan) -> _Layout:
    p, theta = plan.params, plan.theta
    gathers, singles = [], []
    group_members: dict = {}
    for j in range(1, p.N + 1):
        per_rec: dict[int, tuple[list, list]] = {}
        single_slots, single_rows = [], []
        for idx, slot in enumerate(plan.server_slots(j)):
            parts = list(slot.contributions)
            if slot.desired_row is not None:
                parts.append((theta, slot.desired_row))
            for k, row in parts:
                s_list, c_list = per_rec.setdefault(k - 1, ([], []))
                s_list.append(idx)
                c_list.append((row - 1) * p.N + (j - 1))
            if slot.kind == "singleton":
                single_slots.append(idx)
                single_rows.append(slot.desired_row - 1)
            elif slot.group is not None:
                group_members.setdefault(slot.group, []).append((j, idx, slot.desired_row))
        gathers.append(tuple((k, np.array(s), np.array(c)) for k, (s, c) in sorted(per_rec.items())))
        singles.append((np.array(single_slots, dtype=np.int64), np.array(single_rows, dtype=np.int64)))

    by_positions: dict = {}
    for key, members in group_members.items():
        ones = tuple(sorted(j for j, _, d in members if d is None))
        by_positions.setdefault(ones, []).append(members)
    groups = []
    for ones, glist in sorted(by_positions.items()):
        known_server = np.array([[j - 1 for j, _, d in sorted(g) if d is None] for g in glist])
        known_slot = np.array([[i for j, i, d in sorted(g) if d is None] for g in glist])
        mixed = [(gi, j, i, d) for gi, g in enumerate(glist) for j, i, d in g if d is not None]
        groups.append(
            (
                ones,
                known_server,
                known_slot,
                np.array([m[0] for m in mixed], dtype=np.int64),
                np.array([m[1] - 1 for m in mixed], dtype=np.int64),
                np.array([m[2] for m in mixed], dtype=np.int64),
                np.array([m[3] - 1 for m in mixed], dtype=np.int64),
            )
        )
    picks = []
    for j, per_server in enumerate(gathers):
        table = np.full((len(plan.slots[j]), p.M), -1, dtype=np.int64)
        for k, slot_idx, row_idx in per_server:
            table[slot_idx, k] = (row_idx - j) // p.N
        table.flags.writeable = False
        picks.append(table)
    return _Layout(tuple(gathers), tuple(singles), tuple(groups), tuple(picks))


def _draw_secrets(p: SchemeParams, theta: int, field: PrimeField, rng: np.random.Generator):
    """``S_theta^T`` with its factorisation, and ``S_k[:, :T*L~]^T`` for k != theta."""
    heads: dict[int, np.ndarray] = {}
    s_t = lu = None
    for k in range(1, p.M + 1):
        if k == theta:
            s_t, lu = field.random_invertible_lu(p.L, rng)
        else:
            heads[k] = field.random_full_row_rank(p.T * p.Ltilde, p.L, rng)
    return s_t, lu, heads


def coefficient_rows(p: SchemeParams, theta: int, code: MdsCode, s_theta_t, heads_t) -> list[np.ndarray]:
    """``R_k`` for k = 1..M (list index k-1); inputs may share one leading batch axis."""
    out = []
    for k in range(1, p.M + 1):
        if k == theta:
            out.append(np.asarray(s_theta_t, dtype=np.int64))
        else:
            out.append(interference_rows(code.field, heads_t[k], p.Ltilde, code.g))
    return out


def assemble_queries(plan: AnswerPlan, rows: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Per-server coefficient matrices built from the ``R_k`` (batch axis allowed)."""
    p = plan.params
    lay = _layout(plan)
    batch = rows[0].shape[:-2]
    out = []
    for j in range(p.N):
        q = np.zeros(batch + (len(plan.slots[j]), p.M * p.L), dtype=np.int64)
        for k, slot_idx, idx in lay.gathers[j]:
            q[..., slot_idx, k * p.L : (k + 1) * p.L] = rows[k][..., idx, :]
        out.append(q)
    return out


def client_query(
    p: SchemeParams,
    theta: int,
    code: MdsCode,
    rng: np.random.Generator,
    *,
    secrets: Optional[Sequence[np.ndarray]] = None,
    plan: Optional[AnswerPlan] = None,
) -> tuple[ClientState, list[Query]]:
    """Draw fresh mixing secrets and build the N queries for record ``theta``.

    ``secrets`` (one ``L x L`` matrix per record) replaces the random draw;
    ``plan`` replaces the canonical plan.  Both exist for audits.
    """
    if not 1 <= theta <= p.M:
        raise ParameterError(f"theta={theta} outside [1, {p.M}]")
    if code.n != p.N or code.t != p.T or code.field.q != p.q:
        raise ParameterError("MDS code does not match the scheme parameters")
    field = code.field
    if plan is None:
        plan = cached_plan(p, theta)
    if secrets is None:
        s_t, lu, heads = _draw_secrets(p, theta, field, rng)
    else:
        if len(secrets) != p.M:
            raise DimensionError(f"need {p.M} secret matrices, got {len(secrets)}")
        mats = [field.array(x) for x in secrets]
        if any(x.shape != (p.L, p.L) for x in mats):
            raise DimensionError(f"secret matrices must be {p.L} x {p.L}")
        s_t = np.ascontiguousarray(mats[theta - 1].T)
        lu = field.lu(s_t)
        heads = {k: mats[k - 1][:, : p.T * p.Ltilde].T for k in range(1, p.M + 1) if k != theta}
    state = ClientState(p, theta, plan, lu, s_t, rng)
    rows = coefficient_rows(p, theta, code, s_t, heads)
    picks = _layout(plan).picks
    queries = []
    for j in range(p.N):
        # rows (i-1)*N + j of every R_k: exactly the entries in column j
        blocks = tuple(_frozen(r[j :: p.N]) for r in rows)
        queries.append(Query(j + 1, p.q, p.M, p.L, rows=blocks, picks=picks[j]))
    return state, queries


def _frozen(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


def server_answer(query: Query, records: RecordSet) -> Answer:
    """Inner product of every query row with the concatenated records."""
    if query.q != records.q:
        raise DimensionError(f"query over F_{query.q} but records over F_{records.q}")
    if query.M != records.M or query.L != records.L or query.width != records.M * records.L:
        raise DimensionError(
            f"query width {query.width} (M={query.M}, L={query.L}) does not match records {records.data.shape}"
        )
    f = PrimeField(records.q)
    if query.picks is None:
        return Answer(query.server, f.matmul(query.coeffs, records.data.reshape(-1)))
    # same inner products, evaluated once per distinct coefficient row
    longest = max(b.shape[0] for b in query.rows)
    partial = np.zeros((query.M, longest + 1), dtype=np.int64)
    for k, block in enumerate(query.rows):
        partial[k, : block.shape[0]] = f.matmul(block, records.data[k])
    # pick -1 lands on the zero column at the end
    values = partial[np.arange(query.M), query.picks].sum(axis=1) % records.q
    return Answer(query.server, values)


def reconstruct(state: ClientState, answers: Sequence[Answer], code: MdsCode) -> np.ndarray:
    """Decode W_theta from all N answers."""
    p, plan = state.params, state.plan
    if len(answers) != p.N:
        raise MissingSlotError(f"expected {p.N} answers, got {len(answers)}")
    vals = []
    for j, ans in enumerate(sorted(answers, key=lambda a: a.server)):
        if ans.server != j + 1:
            raise MissingSlotError(f"answers do not cover servers 1..{p.N}")
        v = np.asarray(ans.values, dtype=np.int64)
        if v.size and (v.min() < 0 or v.max() >= p.q):
            raise ProtocolError(f"server {j + 1} answered values outside [0, {p.q})")
        if v.shape != (len(plan.slots[j]),):
            raise MissingSlotError(f"server {j + 1} answered {v.shape} values, plan has {len(plan.slots[j])} slots")
        vals.append(v)

    lay = _layout(plan)
    q = p.q
    u = np.full((p.Ltilde, p.N), -1, dtype=np.int64)
    for j, (slots, rows) in enumerate(lay.singles):
        u[rows, j] = vals[j][slots]
    for ones, known_server, known_slot, g_idx, m_server, m_slot, m_row in lay.groups:
        known = np.empty(known_slot.shape, dtype=np.int64)
        for c in range(known_slot.shape[1]):
            for sv in np.unique(known_server[:, c]):
                sel = known_server[:, c] == sv
                known[sel, c] = vals[sv][known_slot[sel, c]]
        words = code.recover_batch(ones, known)
        for sv in np.unique(m_server):
            sel = m_server == sv
            u[m_row[sel], sv] = (vals[sv][m_slot[sel]] - words[g_idx[sel], sv]) % q
    if (u < 0).any():
        raise MissingSlotError("some desired symbols were never answered")
    return state.unmix(u.reshape(-1))


def run_round(
    p: SchemeParams,
    theta: int,
    code: MdsCode,
    records: RecordSet,
    rng: np.random.Generator,
    **query_kw,
) -> tuple[np.ndarray, list[Query], list[Answer]]:
    """In-process round; returns (decoded record, queries, answers)."""
    state, queries = client_query(p, theta, code, rng, **query_kw)
    answers = [server_answer(qj, records) for qj in queries]
    return reconstruct(state, answers, code), queries, answers
