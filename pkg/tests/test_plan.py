from collections import Counter

import pytest

from tpir.params import ParameterError, derive_params
from tpir.plan import assign_blocks, build_plan, enumerate_types, plan_violations, render_plan

GRID = [(M, N, T) for M in range(2, 6) for N in range(2, 7) for T in range(1, N)]

TABLE = """\
Serv(1): a11, b11, c11, a21+b21, a31+c21, b31+c31
Serv(2): a12, b22, c22, a22+b12, a32+c12, b32+c32
Serv(3): a13, a23, b13, b23, c13, c23, a33+b33+c33"""


def test_enumerate_types_examples():
    assert enumerate_types(3, 1, 2) == [(2,), (2, 3)]
    assert enumerate_types(3, 1, 3) == [(3,), (2, 3)]
    assert enumerate_types(2, 1, 2) == [(2,)]
    assert len(enumerate_types(5, 2, 4)) == 2**3
    with pytest.raises(ParameterError):
        enumerate_types(3, 1, 1)


def test_assign_blocks_examples():
    blocks = assign_blocks(derive_params(3, 3, 2), 1)
    assert blocks[(2, (2,))] == 1 and blocks[(2, (2, 3))] == 3
    assert blocks[(3, (3,))] == 1 and blocks[(3, (2, 3))] == 3
    assert assign_blocks(derive_params(2, 2, 1), 1) == {(2, (2,)): 1}


def test_table_answers():
    plan = build_plan(derive_params(3, 3, 2), 1)
    assert render_plan(plan) == TABLE
    last = plan.server_slots(3)[-1]
    assert last.full_type == (1, 2, 3) and last.desired_row == 3
    assert sorted(last.contributions) == [(2, 3), (3, 3)]
    assert Counter(s.full_type for s in plan.server_slots(1)) == Counter(
        [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]
    )
    assert [len(plan.server_slots(j)) for j in (1, 2, 3)] == [6, 6, 7]


def test_smallest_plan():
    plan = build_plan(derive_params(2, 2, 1), 1)
    assert [s.full_type for s in plan.server_slots(1)] == [(1,), (2,)]
    assert [s.full_type for s in plan.server_slots(2)] == [(1, 2)]


def test_theta_range():
    with pytest.raises(ParameterError):
        build_plan(derive_params(2, 2, 1), 3)


@pytest.mark.parametrize("M,N,T", GRID)
def test_plan_invariants_on_grid(M, N, T):
    p = derive_params(M, N, T)
    shapes = set()
    for theta in range(1, M + 1):
        plan = build_plan(p, theta)
        assert plan_violations(plan) == []
        assert plan.download == p.D
        # slot order by cardinality and group position is theta-invariant
        shapes.add(tuple(tuple(len(s.full_type) for s in plan.server_slots(j)) for j in range(1, N + 1)))
    assert len(shapes) == 1


def test_plan_is_deterministic():
    p = derive_params(3, 4, 2)
    assert render_plan(build_plan(p, 2)) == render_plan(build_plan(p, 2))
