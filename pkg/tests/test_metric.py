import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.checks import random_metric_space
from reslab.metric import (EmbeddedPair, FiniteMetricSpace, MeasuredFiniteMetricSpace,
                           PartialFunction, bl_distance, bl_norm, dump_space,
                           ghp_embedded_distance, hausdorff_distance, load_space,
                           local_hausdorff_distance, mcshane_extend, open_ball_mass,
                           rooted_bl_distance)


def two_points(d=1.0):
    return FiniteMetricSpace(["p", "q"], [[0, d], [d, 0]])


def random_space(seed, n=8):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    return FiniteMetricSpace(range(n), np.linalg.norm(pts[:, None] - pts[None], axis=-1)), rng


# --- construction -----------------------------------------------------------

@pytest.mark.parametrize("dist, msg", [
    ([[0, 1], [2, 0]], "symmetric"),
    ([[1, 1], [1, 0]], "diagonal"),
    ([[0, 0], [0, 0]], "positive"),
    ([[0, 1, 5], [1, 0, 1], [5, 1, 0]], "triangle"),
])
def test_space_validation(dist, msg):
    with pytest.raises(ValueError, match=msg):
        FiniteMetricSpace(range(len(dist)), dist)


def test_negative_mass_rejected():
    with pytest.raises(ValueError):
        MeasuredFiniteMetricSpace(two_points(), [1.0, -0.1])


def test_embedded_pair_checks_roots():
    with pytest.raises(ValueError):
        EmbeddedPair(two_points(), (0,), (1,), rootA=1)
    with pytest.raises(ValueError):
        EmbeddedPair(two_points(), (), (1,))


# --- BL norm and McShane ----------------------------------------------------

def test_bl_norm_constant():
    space, _ = random_space(0, 5)
    assert bl_norm(space, PartialFunction.full([-2.5] * 5)) == (2.5, 0.0, 2.5)


def test_bl_norm_two_points():
    assert bl_norm(two_points(), PartialFunction.full([0.0, 1.0])) == (1.0, 1.0, 2.0)


def test_bl_norm_singleton_has_zero_holder_constant():
    assert bl_norm(two_points(), PartialFunction([1], [3.0]))[1] == 0.0


def test_bl_norm_against_exhaustive_pairs():
    space, rng = random_space(1, 5)
    f = rng.normal(size=5)
    hc = max(abs(f[i] - f[j]) / space.dist[i, j] ** 0.5
             for i, j in itertools.permutations(range(5), 2))
    got = bl_norm(space, PartialFunction.full(f), 0.5)
    assert got[1] == pytest.approx(hc, abs=1e-12)
    assert got[0] == pytest.approx(np.abs(f).max(), abs=1e-12)


def test_empty_domain_rejected():
    with pytest.raises(ValueError):
        PartialFunction([], [])


def test_mcshane_identity_on_full_domain():
    space, rng = random_space(2)
    f = rng.normal(size=8)
    assert np.array_equal(mcshane_extend(space, PartialFunction.full(f)), f)


def test_mcshane_singleton():
    space, _ = random_space(3)
    assert np.all(mcshane_extend(space, PartialFunction([4], [3.0])) == 3.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.3, 0.5, 1.0]))
def test_mcshane_preserves_norms(seed, kappa):
    space, rng = random_space(seed)
    dom = sorted(rng.choice(8, size=int(rng.integers(1, 8)), replace=False).tolist())
    f = PartialFunction(dom, rng.uniform(-1, 1, len(dom)))
    ext = mcshane_extend(space, f, kappa)
    a = bl_norm(space, f, kappa)
    b = bl_norm(space, PartialFunction.full(ext), kappa)
    assert b[0] == pytest.approx(a[0], abs=1e-12)
    assert b[1] == pytest.approx(a[1], abs=1e-12)
    assert np.allclose(ext[dom], f.values, atol=0)


def test_mcshane_of_restricted_bl_function_stays_bl():
    space, rng = random_space(4)
    g = rng.uniform(-1, 1, 8)
    g = g / bl_norm(space, PartialFunction.full(g))[2]
    ext = mcshane_extend(space, PartialFunction([0, 2, 5], g[[0, 2, 5]]))
    assert bl_norm(space, PartialFunction.full(ext))[2] <= 1 + 1e-12


# --- BL distance ------------------------------------------------------------

def test_bl_identical_measures():
    space, rng = random_space(5)
    mu = rng.random(8)
    assert bl_distance(space, mu, mu) == 0.0


def test_bl_against_zero_measure():
    space, _ = random_space(6)
    mu = np.zeros(8)
    mu[3] = 0.7
    assert bl_distance(space, mu, np.zeros(8)) == pytest.approx(0.7, abs=1e-12)


def test_bl_delta_pair():
    # a grid search over f = (a, b) at step 1e-3 gives 0.666
    val, f, s, l = bl_distance(two_points(), [1, 0], [0, 1], return_witness=True)
    assert val == pytest.approx(2 / 3, abs=1e-12)
    assert s == pytest.approx(1 / 3, abs=1e-12)
    assert l == pytest.approx(2 / 3, abs=1e-12)


def test_bl_dimension_mismatch():
    with pytest.raises(ValueError):
        bl_distance(two_points(), [1, 0, 0], [0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bl_is_a_metric(seed):
    space, rng = random_space(seed, 7)
    a, b, c = (rng.random(7) for _ in range(3))
    ab = bl_distance(space, a, b)
    assert ab == pytest.approx(bl_distance(space, b, a), abs=1e-12)
    assert ab <= bl_distance(space, a, c) + bl_distance(space, c, b) + 1e-9
    assert ab > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bl_crude_bounds_and_weight_continuity(seed):
    space, rng = random_space(seed, 7)
    mu, nu = rng.random(7), rng.random(7)
    d = bl_distance(space, mu, nu)
    assert d <= np.abs(mu - nu).sum() + 1e-12
    assert d >= abs(mu.sum() - nu.sum()) - 1e-12
    eps = 1e-3
    bumped = mu.copy()
    bumped[int(rng.integers(7))] += eps
    assert abs(bl_distance(space, bumped, nu) - d) <= eps + 1e-9


def test_bl_relabeling_invariance():
    space, rng = random_space(7)
    mu, nu = rng.random(8), rng.random(8)
    perm = rng.permutation(8)
    moved = FiniteMetricSpace(range(8), space.dist[np.ix_(perm, perm)])
    assert bl_distance(moved, mu[perm], nu[perm]) == pytest.approx(bl_distance(space, mu, nu), abs=1e-12)


def test_bl_methods_agree():
    space, rng = random_space(8, 30)
    mu, nu = rng.random(30), rng.random(30)
    assert bl_distance(space, mu, nu, 0.7, method="simplex") == pytest.approx(
        bl_distance(space, mu, nu, 0.7, method="highs"), abs=1e-9)


# --- Hausdorff, rooted and local variants -----------------------------------

def test_hausdorff_examples():
    space, _ = random_space(9)
    assert hausdorff_distance(EmbeddedPair(space, (1, 2, 3), (1, 2, 3))) == 0.0
    assert hausdorff_distance(EmbeddedPair(two_points(), (0,), (1,))) == 1.0


def test_hausdorff_brute_force():
    space, rng = random_space(10, 14)
    A = rng.choice(14, 6, replace=False)
    B = rng.choice(14, 8, replace=False)
    d = space.dist
    want = max(max(min(d[a, b] for b in B) for a in A), max(min(d[a, b] for a in A) for b in B))
    assert hausdorff_distance(EmbeddedPair(space, A, B)) == pytest.approx(want, abs=1e-12)


def _quadrature(fn, step=1e-4, upto=40.0):
    r = np.arange(0, upto, step) + step / 2
    return float(np.sum(np.exp(-r) * np.array([fn(x) for x in r])) * step)


def test_rooted_bl_identical():
    space, rng = random_space(11)
    m = rng.random(4)
    pair = EmbeddedPair(space, (0, 1, 2, 3), (0, 1, 2, 3), m, m, 0, 0)
    assert rooted_bl_distance(pair) == 0.0


def test_rooted_bl_single_point_vs_empty():
    # point at distance a from the root with mass m against an empty copy
    a, m = 0.8, 0.6
    space = two_points(a)
    pair = EmbeddedPair(space, (0, 1), (0,), [0.0, m], [0.0], 0, 0)
    assert rooted_bl_distance(pair) == pytest.approx(min(1, m) * math.exp(-a), abs=1e-12)


def test_rooted_bl_matches_quadrature():
    space, rng = random_space(12, 6)
    mu, nu = rng.random(6), rng.random(6)
    pair = EmbeddedPair(space, range(6), range(6), mu, nu, 0, 0)
    d0 = space.dist[0]

    def integrand(r):
        keep = d0 <= r
        return min(1.0, bl_distance(space, np.where(keep, mu, 0), np.where(keep, nu, 0)))
    assert rooted_bl_distance(pair) == pytest.approx(_quadrature(integrand, step=2e-3), abs=1e-3)


def test_rooted_requires_common_root():
    space, _ = random_space(13)
    pair = EmbeddedPair(space, (0, 1), (2, 3), [1, 1], [1, 1], 0, 2)
    with pytest.raises(ValueError):
        rooted_bl_distance(pair)


def test_local_hausdorff_examples():
    space, _ = random_space(14)
    assert local_hausdorff_distance(EmbeddedPair(space, (0, 3), (0, 3), rootA=0, rootB=0)) == 0.0
    assert local_hausdorff_distance(EmbeddedPair(space, (0,), (0,), rootA=0, rootB=0)) == 0.0


def test_local_hausdorff_matches_quadrature():
    space, rng = random_space(15, 9)
    A = (0, 2, 4, 5)
    B = (0, 1, 7)
    pair = EmbeddedPair(space, A, B, rootA=0, rootB=0)
    d = space.dist

    def integrand(r):
        a = [i for i in A if d[0, i] <= r]
        b = [j for j in B if d[0, j] <= r]
        if not a and not b:
            return 0.0
        if not a or not b:
            return 1.0
        sub = d[np.ix_(a, b)]
        return min(1.0, max(sub.min(1).max(), sub.min(0).max()))
    assert local_hausdorff_distance(pair) == pytest.approx(_quadrature(integrand), abs=1e-3)


def test_ghp_examples():
    space, rng = random_space(16)
    m = rng.random(3)
    assert ghp_embedded_distance(EmbeddedPair(space, (1, 4, 6), (1, 4, 6), m, m)) == 0.0
    assert ghp_embedded_distance(EmbeddedPair(two_points(), (0,), (1,), [1.0], [1.0])) == pytest.approx(1.0)


def test_ball_inequality_sample():
    space, rng = random_space(17)
    mu, nu = rng.random(8), rng.random(8)
    d = bl_distance(space, mu, nu)
    for x in range(8):
        for r, rho in ((0.2, 0.1), (0.5, 0.3), (0.05, 0.7)):
            assert open_ball_mass(space, nu, x, r) <= open_ball_mass(space, mu, x, r + rho) + (1 + 1 / rho) * d


def test_space_json_round_trip():
    space, rng = random_space(18, 4)
    ms = MeasuredFiniteMetricSpace(space, rng.random(4), root=2)
    back = load_space(dump_space(ms))
    assert np.array_equal(back.space.dist, space.dist)
    assert np.array_equal(back.mass, ms.mass)
    assert back.root == 2


def test_space_json_rejects_unknown_keys():
    doc = {"points": [0, 1], "dist": [[0, 1], [1, 0]], "mass": [1, 1], "colour": "red"}
    with pytest.raises(ValueError, match="unknown"):
        load_space(json.dumps(doc))


def test_resistance_spaces_are_metric():
    rng = np.random.default_rng(3)
    for _ in range(10):
        space, _ = random_metric_space(rng)
        space.validate()
