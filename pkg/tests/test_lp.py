import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.lp import LPError, bl_lp_dense, bl_lp_highs, bl_lp_line, simplex_max


def test_textbook_program():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    val, x = simplex_max([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert val == pytest.approx(36.0, abs=1e-12)
    assert x == pytest.approx([2.0, 6.0], abs=1e-12)


def test_unbounded_raises():
    with pytest.raises(LPError):
        simplex_max([1, 1], [[1, -1]], [1])


def test_negative_rhs_rejected():
    with pytest.raises(ValueError):
        simplex_max([1], [[1]], [-1])


def test_degenerate_program_terminates():
    # many redundant constraints through the optimum vertex
    A = np.array([[1, 1]] * 30 + [[1, 0], [0, 1]], dtype=float)
    b = np.array([1.0] * 30 + [1.0, 1.0])
    val, _ = simplex_max([1, 1], A, b)
    assert val == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1), st.sampled_from([0.5, 0.75, 1.0]))
def test_dense_and_highs_agree(n, seed, kappa):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    dk = np.linalg.norm(pts[:, None] - pts[None], axis=-1) ** kappa
    w = rng.normal(size=n)
    a = bl_lp_dense(w, dk)[0]
    b = bl_lp_highs(w, dk)[0]
    assert a == pytest.approx(b, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_line_reduction_matches_full_program(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, n)
    w = rng.normal(size=n)
    full = bl_lp_highs(w, np.abs(x[:, None] - x[None, :]))[0]
    assert bl_lp_line(w, x)[0] == pytest.approx(full, abs=1e-7)


def test_line_reduction_refuses_kappa_below_one():
    with pytest.raises(ValueError):
        bl_lp_line([1.0, -1.0], [0.0, 1.0], kappa=0.5)


def test_dense_witness_is_feasible(rng):
    pts = rng.random((12, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    w = rng.normal(size=12)
    val, f, s, l = bl_lp_dense(w, d)
    assert s + l <= 1 + 1e-9
    assert np.abs(f).max() <= s + 1e-9
    off = ~np.eye(12, dtype=bool)
    assert (np.abs(f[:, None] - f[None]) - l * d)[off].max() <= 1e-9
    assert val == pytest.approx(float(f @ w), abs=1e-9)
