import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from svp.anchor_schedule import balanced_plan
from svp.cost_model import attention_cost, idealized_cost, plan_cost, tokens_with_extras


def test_attention_cost_values():
    assert attention_cost(1, 1) == 1
    assert attention_cost(10, 100) == 1e6
    assert attention_cost(20, 100) == 4 * attention_cost(10, 100)


def test_single_group_close_to_baseline():
    for n in (1, 10, 500):
        r = plan_cost(balanced_plan(n, 1), 32)
        assert r.partitioned_ops == attention_cost(n, 32)
        assert r.baseline_ops - r.partitioned_ops == 0
        assert r.overhead_ops == n * n
        assert r.speedup >= 0.999


def test_512_frames_eight_groups():
    # anchor's home subscene has 64 frames, the other seven carry it as a 65th
    expected = 512**2 / (64**2 + 7 * 65**2 + 512**2 / 1000**2)
    r = plan_cost(balanced_plan(512, 8), 1000)
    assert [len(s) for s in balanced_plan(512, 8).subscenes] == [64] + [65] * 7
    assert r.speedup == pytest.approx(expected, rel=1e-12)
    assert r.speedup == pytest.approx(7.7854, abs=1e-4)
    assert r.overhead_ops / r.partitioned_ops < 1e-3


def test_idealized_speedup_is_k():
    for k in (1, 2, 4, 8, 16):
        assert idealized_cost(512, k, 1000).speedup == pytest.approx(k, rel=1e-12)


def test_patch_tokens_plus_extras():
    assert tokens_with_extras(1369) == 1374


@given(st.integers(1, 40), st.integers(1, 8).map(lambda x: 2**x))
def test_equal_groups_speedup_monotone_and_bounded(g, t):
    # N = g*K for several K with K <= sqrt(N)
    n = 64 * g
    prev = 0.0
    for k in range(1, int(math.isqrt(n)) + 1):
        if n % k:
            continue
        r = plan_cost(balanced_plan(n, k), t)
        assert r.speedup <= k
        assert r.speedup > prev
        prev = r.speedup


@given(st.integers(1, 300), st.integers(1, 8), st.integers(100, 2000))
def test_overhead_negligible(n, k, t):
    k = min(k, n)
    r = plan_cost(balanced_plan(n, k), t)
    assert r.overhead_ops / r.partitioned_ops < 1e-3
    assert r.speedup == pytest.approx(r.baseline_ops / (r.partitioned_ops + r.overhead_ops))
    assert all(x > 0 for x in (r.baseline_ops, r.partitioned_ops, r.overhead_ops, r.speedup))
