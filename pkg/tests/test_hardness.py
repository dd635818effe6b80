"""Volume recovery through two-atom transport. Oracles: closed-form volumes
in one and two dimensions, analytic integrals of the one-dimensional costs,
and a Monte Carlo cross-check of the exact-volume helper."""

import numpy as np
import pytest

from sdot.hardness import (
    KnapsackInstance,
    QuadratureSpec,
    binary_search_min,
    exact_knapsack_volume,
    knapsack_volume_via_ot,
    wc_two_point,
)


def test_instance_validation():
    with pytest.raises(ValueError):
        KnapsackInstance(np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        KnapsackInstance(np.array([1.0, -0.5]), 1.0)
    with pytest.raises(ValueError):
        KnapsackInstance(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        KnapsackInstance(np.array([1.0]), 1.0, p=0.5)


def test_instance_atoms():
    inst = KnapsackInstance(np.array([1.0, 1.0]), 1.0)
    assert np.allclose(inst.y1, [0.0, 0.0])
    assert np.allclose(inst.y2, [1.0, 1.0])
    inst2 = KnapsackInstance(np.array([2.0, 1.0]), 1.0)
    assert np.allclose(inst2.y2, [0.8, 0.4])


def test_quadrature_validation():
    with pytest.raises(ValueError):
        QuadratureSpec("grid", m=0)
    with pytest.raises(ValueError):
        QuadratureSpec("monte-carlo", n=0)
    with pytest.raises(ValueError):
        QuadratureSpec("no-such")
    # grid quadrature is only supported up to three axes
    inst = KnapsackInstance(np.ones(4), 2.0)
    with pytest.raises(ValueError):
        wc_two_point(inst, 0.5, QuadratureSpec("grid", m=5))


# --------------------------------------------------------- binary search

def expected_calls(delta):
    return 2 * (int(np.ceil(np.log2(1.0 / delta))) + 1)


def test_binary_search_known_quadratic():
    calls = []
    t_hat = binary_search_min(lambda t: (calls.append(t) or (t - 0.3) ** 2), 1e-3)
    assert abs(t_hat - 0.3) <= 1e-3
    assert len(calls) == expected_calls(1e-3)


def test_binary_search_call_counts():
    for delta in (0.5, 0.07, 1e-2, 1e-4):
        calls = []
        binary_search_min(lambda t: (calls.append(t) or (t - 0.41) ** 2), delta)
        assert len(calls) == expected_calls(delta)


def test_binary_search_edge_minimizers():
    assert binary_search_min(lambda t: t * t, 1e-3) <= 1e-3
    assert abs(binary_search_min(lambda t: (t - 1.0) ** 2, 1e-3) - 1.0) <= 1e-3


def test_binary_search_nonsmooth_convex():
    g = lambda t: abs(t - 0.37) + (t - 0.37) ** 2
    assert abs(binary_search_min(g, 1e-4) - 0.37) <= 1e-4


def test_binary_search_inexact_oracle():
    rng = np.random.default_rng(70)
    noise = {}

    def g(t):
        if t not in noise:
            noise[t] = rng.uniform(-1e-9, 1e-9)
        return (t - 0.3) ** 2 + noise[t]

    assert abs(binary_search_min(g, 1e-3, oracle_error=1e-9) - 0.3) <= 2e-3


def test_binary_search_delta_domain():
    with pytest.raises(ValueError):
        binary_search_min(lambda t: t, 0.0)
    with pytest.raises(ValueError):
        binary_search_min(lambda t: t, 1.5)


# ----------------------------------------------------------- wc_two_point

D1 = KnapsackInstance(np.array([1.0]), 0.3)
GRID1 = QuadratureSpec("grid", m=2000)


def test_wc_endpoint_t1_single_destination():
    # all mass to the origin atom: integral of x^2 on [0,1] is 1/3
    val = wc_two_point(D1, 1.0, GRID1)
    assert val == pytest.approx(1.0 / 3.0, abs=1e-5)


def test_wc_endpoint_t0_single_destination():
    # all mass to y2 = 0.6: integral of (x - 0.6)^2 = 0.6^3/3 + 0.4^3/3
    val = wc_two_point(D1, 0.0, GRID1)
    assert val == pytest.approx((0.6 ** 3 + 0.4 ** 3) / 3.0, abs=1e-5)


def test_wc_balanced_t_gives_min_integral():
    # at t equal to the winning fraction the optimal shift is zero
    nodes = (np.arange(2000) + 0.5) / 2000
    c1 = nodes ** 2
    c2 = (nodes - 0.6) ** 2
    t_star = float(np.mean(c1 - c2 <= 0.0))
    val = wc_two_point(D1, t_star, GRID1)
    assert val == pytest.approx(float(np.minimum(c1, c2).mean()), abs=1e-9)
    analytic = 0.3 ** 3 / 3.0 + (0.4 ** 3 + 0.3 ** 3) / 3.0
    assert val == pytest.approx(analytic, abs=1e-4)


def test_wc_convex_in_t():
    inst = KnapsackInstance(np.array([2.0, 1.0]), 1.0)
    quad = QuadratureSpec("grid", m=60)
    grid = np.linspace(0.0, 1.0, 11)
    vals = [wc_two_point(inst, t, quad) for t in grid]
    for i in range(1, 10):
        assert vals[i] <= 0.5 * (vals[i - 1] + vals[i + 1]) + 1e-9


def test_wc_monte_carlo_close_to_grid():
    inst = KnapsackInstance(np.array([1.0, 1.0]), 1.0)
    g = wc_two_point(inst, 0.4, QuadratureSpec("grid", m=250))
    m = wc_two_point(inst, 0.4, QuadratureSpec("monte-carlo", n=40000, seed=3))
    assert abs(g - m) <= 0.01
    m2 = wc_two_point(inst, 0.4, QuadratureSpec("monte-carlo", n=40000, seed=3))
    assert m == m2


def test_wc_t_domain():
    with pytest.raises(ValueError):
        wc_two_point(D1, -0.1, GRID1)
    with pytest.raises(ValueError):
        wc_two_point(D1, 1.1, GRID1)


def test_halfspace_boundary_identity():
    # the closer-to-origin region is exactly the knapsack half-space
    for p in (2.0, 3.0):
        inst = KnapsackInstance(np.array([2.0, 1.0]), 1.0, p=p)
        ax = (np.arange(37) + 0.5) / 37
        X = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
        c1 = np.linalg.norm(X - inst.y1, axis=1) ** p
        c2 = np.linalg.norm(X - inst.y2, axis=1) ** p
        lhs = c1 <= c2
        rhs = X @ inst.w <= inst.b
        assert np.array_equal(lhs, rhs)


# --------------------------------------------------------------- volumes

def test_exact_volume_closed_forms():
    assert exact_knapsack_volume(KnapsackInstance(np.array([1.0]), 0.3)) \
        == pytest.approx(0.3)
    assert exact_knapsack_volume(KnapsackInstance(np.array([0.5]), 2.0)) \
        == pytest.approx(1.0)
    assert exact_knapsack_volume(KnapsackInstance(np.array([1.0, 1.0]), 1.0)) \
        == pytest.approx(0.5)
    assert exact_knapsack_volume(KnapsackInstance(np.array([2.0, 1.0]), 1.0)) \
        == pytest.approx(0.25)
    assert exact_knapsack_volume(KnapsackInstance(np.array([1.0, 1.0]), 2.5)) \
        == pytest.approx(1.0)
    assert exact_knapsack_volume(KnapsackInstance(np.array([1.0, 0.0]), 0.4)) \
        == pytest.approx(0.4)
    assert exact_knapsack_volume(KnapsackInstance(np.ones(3), 1.0)) is None


def test_exact_volume_matches_monte_carlo():
    rng = np.random.default_rng(71)
    for _ in range(5):
        w = rng.uniform(0.2, 2.0, 2)
        b = rng.uniform(0.2, 1.5)
        inst = KnapsackInstance(w, b)
        X = rng.random((200_000, 2))
        mc = float(np.mean(X @ w <= b))
        assert exact_knapsack_volume(inst) == pytest.approx(mc, abs=5e-3)


def test_volume_via_ot_d1():
    inst = KnapsackInstance(np.array([1.0]), 0.3)
    t_hat = knapsack_volume_via_ot(inst, 4e-3, QuadratureSpec("grid", m=800))
    assert abs(t_hat - 0.3) <= 1e-2


def test_volume_via_ot_d2():
    inst = KnapsackInstance(np.array([1.0, 1.0]), 1.0)
    t_hat = knapsack_volume_via_ot(inst, 4e-3, QuadratureSpec("grid", m=120))
    assert abs(t_hat - 0.5) <= 1e-2


def test_volume_rescale_invariance():
    quad = QuadratureSpec("grid", m=80)
    a = knapsack_volume_via_ot(KnapsackInstance(np.array([2.0, 1.0]), 1.0), 1e-2, quad)
    b = knapsack_volume_via_ot(KnapsackInstance(np.array([6.0, 3.0]), 3.0), 1e-2, quad)
    assert a == b
