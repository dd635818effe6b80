"""Ground types: costs, discrete measures, samplers, and the plain c-transform."""

import json

import numpy as np
import pytest

from sdot.core import (
    CostSpec,
    DiscreteMeasure,
    Potential,
    SamplerSpec,
    cost_matrix,
    derive_seed,
    discrete_c_transform,
    draw,
    eval_cost,
    make_sampler,
    subgradient_indicator,
)

SUP = CostSpec("sup-norm")
SQ = CostSpec("p-norm-power", p=2.0)


def random_measure(rng, n, d):
    atoms = rng.uniform(-1.0, 1.0, size=(n, d))
    w = rng.uniform(0.1, 1.0, size=n)
    w /= w.sum()
    return DiscreteMeasure(atoms, w)


# ---------------------------------------------------------------- eval_cost

def test_eval_cost_sup_norm_coordinate_max():
    assert eval_cost((0.0, 0.0), (1.0, -2.0), SUP) == 2.0


def test_eval_cost_zero_at_identity():
    for spec in (SUP, SQ, CostSpec("p-norm-power", p=1.0)):
        assert eval_cost((0.3, -0.7), (0.3, -0.7), spec) == 0.0


def test_eval_cost_scalar_square():
    assert eval_cost((0.0,), (3.0,), SQ) == 9.0


def test_eval_cost_euclidean_power():
    # |(3,4)| = 5, cubed
    assert eval_cost((0.0, 0.0), (3.0, 4.0), CostSpec("p-norm-power", p=3.0)) == pytest.approx(125.0)


def test_eval_cost_symmetry_and_nonnegativity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, y = rng.normal(size=2), rng.normal(size=2)
        for spec in (SUP, SQ):
            assert eval_cost(x, y, spec) == eval_cost(y, x, spec) >= 0.0


def test_eval_cost_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_cost((0.0, 0.0), (1.0,), SUP)


def test_cost_spec_validates_exponent():
    with pytest.raises(ValueError):
        CostSpec("p-norm-power", p=0.5)
    with pytest.raises(ValueError):
        CostSpec("no-such-kind")


def test_cost_matrix_matches_pointwise():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(7, 3))
    Y = rng.normal(size=(4, 3))
    for spec in (SUP, SQ, CostSpec("p-norm-power", p=1.5)):
        C = cost_matrix(X, Y, spec)
        for j in range(7):
            for i in range(4):
                assert C[j, i] == pytest.approx(eval_cost(X[j], Y[i], spec), abs=1e-14)


# ------------------------------------------------------- discrete c-transform

def test_c_transform_single_atom():
    nu = DiscreteMeasure(np.array([[1.0]]), np.array([1.0]))
    val, win = discrete_c_transform(np.array([3.0]), np.array([0.0]), nu, SQ)
    assert val == pytest.approx(2.0)
    assert win == 0


def test_c_transform_tie_breaks_to_min_index():
    nu = DiscreteMeasure(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.5, 0.5]))
    val, win = discrete_c_transform(np.zeros(2), np.zeros(2), nu, SUP)
    assert val == pytest.approx(-1.0)
    assert win == 0


def test_c_transform_matches_bruteforce():
    rng = np.random.default_rng(7)
    for _ in range(50):
        nu = random_measure(rng, 6, 2)
        phi = rng.normal(size=6)
        x = rng.normal(size=2)
        best_v, best_i = -np.inf, None
        for i in range(6):
            v = phi[i] - eval_cost(x, nu.atoms[i], SUP)
            if v > best_v:
                best_v, best_i = v, i
        val, win = discrete_c_transform(phi, x, nu, SUP)
        assert val == pytest.approx(best_v)
        assert win == best_i


def test_c_transform_convex_in_phi():
    rng = np.random.default_rng(17)
    nu = random_measure(rng, 5, 2)
    x = rng.normal(size=2)
    for _ in range(40):
        a, b = rng.normal(size=5), rng.normal(size=5)
        t = rng.uniform()
        va, _ = discrete_c_transform(a, x, nu, SQ)
        vb, _ = discrete_c_transform(b, x, nu, SQ)
        vm, _ = discrete_c_transform(t * a + (1 - t) * b, x, nu, SQ)
        assert vm <= t * va + (1 - t) * vb + 1e-12


def test_c_transform_shift_covariance():
    rng = np.random.default_rng(19)
    nu = random_measure(rng, 4, 3)
    phi = rng.normal(size=4)
    x = rng.normal(size=3)
    v0, w0 = discrete_c_transform(phi, x, nu, SUP)
    for k in (-2.5, 0.3, 10.0):
        v1, w1 = discrete_c_transform(phi + k, x, nu, SUP)
        assert v1 == pytest.approx(v0 + k)
        assert w1 == w0


def test_subgradient_is_one_hot_at_winner():
    rng = np.random.default_rng(23)
    nu = random_measure(rng, 5, 2)
    phi = rng.normal(size=5)
    x = rng.normal(size=2)
    _, win = discrete_c_transform(phi, x, nu, SQ)
    p = subgradient_indicator(phi, x, nu, SQ)
    expect = np.zeros(5)
    expect[win] = 1.0
    assert np.array_equal(p, expect)


def test_subgradient_tie_min_index():
    nu = DiscreteMeasure(np.array([[1.0], [-1.0], [1.0]]), np.full(3, 1 / 3))
    p = subgradient_indicator(np.zeros(3), np.zeros(1), nu, SUP)
    assert np.array_equal(p, np.array([1.0, 0.0, 0.0]))


def test_subgradient_inequality():
    # psi(phi') >= psi(phi) + <p, phi' - phi>
    rng = np.random.default_rng(29)
    nu = random_measure(rng, 6, 2)
    x = rng.normal(size=2)
    for _ in range(40):
        phi, other = rng.normal(size=6), rng.normal(size=6)
        v, _ = discrete_c_transform(phi, x, nu, SUP)
        v2, _ = discrete_c_transform(other, x, nu, SUP)
        p = subgradient_indicator(phi, x, nu, SUP)
        assert v2 >= v + p @ (other - phi) - 1e-12


# ------------------------------------------------------------------ sampling

def test_draw_same_seed_same_stream():
    spec = SamplerSpec("gaussian-standard", d=2, seed=42)
    assert np.array_equal(draw(spec, 50), draw(spec, 50))


def test_draw_append_equals_longer_stream():
    specs = [
        SamplerSpec("gaussian-standard", d=2, seed=5),
        SamplerSpec("hypercube-uniform", d=3, seed=5),
        SamplerSpec(
            "empirical",
            seed=5,
            points=np.array([[0.0], [1.0], [2.0]]),
            weights=np.array([0.2, 0.5, 0.3]),
        ),
    ]
    for spec in specs:
        s = make_sampler(spec)
        two_part = np.concatenate([s.draw(13), s.draw(29)])
        assert np.array_equal(two_part, draw(spec, 42))


def test_hypercube_support():
    pts = draw(SamplerSpec("hypercube-uniform", d=3, seed=1), 2000)
    assert pts.shape == (2000, 3)
    assert np.all(pts >= 0.0) and np.all(pts <= 1.0)


def test_gaussian_sample_mean_near_zero():
    pts = draw(SamplerSpec("gaussian-standard", d=2, seed=99), 100_000)
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)


def test_empirical_sampler_respects_weights():
    pts = np.array([[0.0], [1.0], [2.0]])
    w = np.array([0.2, 0.5, 0.3])
    spec = SamplerSpec("empirical", seed=8, points=pts, weights=w)
    out = draw(spec, 40_000)
    assert set(np.unique(out)) <= {0.0, 1.0, 2.0}
    freq = np.array([(out == v).mean() for v in (0.0, 1.0, 2.0)])
    assert np.all(np.abs(freq - w) < 0.02)


def test_sampler_dim_and_validation():
    with pytest.raises(ValueError):
        SamplerSpec("gaussian-standard", d=0, seed=1)
    with pytest.raises(ValueError):
        SamplerSpec("no-such", d=2, seed=1)
    with pytest.raises(ValueError):
        SamplerSpec("empirical", seed=1, points=np.zeros((2, 1)), weights=np.array([0.7, 0.7]))


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert derive_seed(7) != derive_seed(8)


# ---------------------------------------------------------------- validation

def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 1)), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 1)), np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((0, 1)), np.zeros(0))


def test_measure_is_immutable():
    nu = DiscreteMeasure(np.zeros((2, 2)), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        nu.weights[0] = 1.0


def test_potential_validation():
    Potential(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        Potential(np.array([1.0, np.nan]))
    nu = DiscreteMeasure(np.zeros((3, 1)), np.full(3, 1 / 3))
    with pytest.raises(ValueError):
        discrete_c_transform(np.zeros(2), np.zeros(1), nu, SUP)


# --------------------------------------------------------------------- JSON

def test_measure_json_round_trip():
    nu = DiscreteMeasure(np.array([[0.0, 1.0], [2.0, 3.0]]), np.array([0.25, 0.75]))
    blob = json.dumps(nu.to_json())
    back = DiscreteMeasure.from_json(json.loads(blob))
    assert np.array_equal(back.atoms, nu.atoms)
    assert np.array_equal(back.weights, nu.weights)


def test_cost_and_sampler_json_round_trip():
    for spec in (SUP, SQ):
        assert CostSpec.from_json(spec.to_json()) == spec
    s = SamplerSpec("gaussian-standard", d=2, seed=3)
    s2 = SamplerSpec.from_json(s.to_json())
    assert s2 == s
    e = SamplerSpec("empirical", seed=3, points=np.array([[1.0, 2.0]]), weights=np.array([1.0]))
    e2 = SamplerSpec.from_json(e.to_json())
    assert np.array_equal(e2.points, e.points) and e2.seed == 3
