import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rel_err
from fracbubble.core import (
    AdmissibilityError,
    Bubble,
    ProblemParams,
    TowerConfig,
    TowerSymmetry,
    admissible_s_window,
    bubble_constant,
    bubble_value,
    direction_weight,
    tower_centers,
    tower_gradient,
    tower_value,
    z_derivative,
)


def test_admissible_window_values():
    lo5, hi5 = admissible_s_window(5)
    assert hi5 == 1.0
    assert lo5 == pytest.approx(0.275255, abs=1e-6)
    lo4, _ = admissible_s_window(4)
    assert lo4 == pytest.approx((3 - math.sqrt(5)) / 2, rel=1e-12)
    assert lo4 == pytest.approx(0.381966, abs=1e-6)
    # first branch dominates for N=5, second for N=4
    assert (5 + 1 - math.sqrt(25 - 10 + 9)) / 4 == pytest.approx(lo5, rel=1e-12)


@pytest.mark.parametrize("N", range(4, 17))
def test_admissible_window_nonempty(N):
    lo, hi = admissible_s_window(N)
    assert 0.0 < lo < hi == 1.0


def test_admissible_window_rejects_low_dimension():
    with pytest.raises(ValueError):
        admissible_s_window(3)


def test_tau_between_zero_and_2s_on_admissible_grid():
    for N in range(4, 17):
        lo, _ = admissible_s_window(N)
        for s in np.linspace(lo + 1e-3, 1 - 1e-3, 25):
            p = ProblemParams(N, float(s))
            assert 0.0 < p.tau < 2.0 * p.s
            assert 2.0 / (N - 2 * s) > 2.0 / N


def test_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(3, 0.5)
    with pytest.raises(ValueError):
        ProblemParams(5, 1.2)
    with pytest.raises(ValueError):
        ProblemParams(5, 0.5, eps=-1e-3)
    with pytest.raises(ValueError):
        ProblemParams(5, 0.5, exponent_sign=0)
    with pytest.raises(AdmissibilityError):
        ProblemParams(5, 0.1).require_admissible()


def test_bubble_constant_half_integer_values():
    # gamma recurrence forces Gamma(3)/Gamma(2) = 2 and Gamma(5/2)/Gamma(3/2) = 3/2
    assert bubble_constant(5, 0.5) == pytest.approx(16.0, rel=1e-12)
    assert bubble_constant(4, 0.5) == pytest.approx(3.0 ** 1.5, rel=1e-12)


def test_bubble_constant_against_mpmath():
    N, s = 6, 0.75
    g = mpmath.gamma((N + 2 * s) / 2) / mpmath.gamma((N - 2 * s) / 2)
    expected = float((4 ** s * g) ** mpmath.mpf((N - 2 * s) / (4 * s)))
    assert bubble_constant(N, s) == pytest.approx(expected, rel=1e-12)


def test_bubble_peak_symmetry_and_decay(params59):
    p = params59
    b = Bubble(np.zeros(5), 1.0)
    C = bubble_constant(5, 0.9)
    assert bubble_value(p, b, np.zeros(5)) == pytest.approx(C, rel=1e-14)
    y = np.array([0.3, -0.2, 0.1, 0.0, 0.7])
    assert bubble_value(p, b, y) == pytest.approx(bubble_value(p, b, -y), rel=1e-14)
    # far-field asymptotics: U ~ C |y|^{-(N-2s)} within 1% at |y| = 1e3
    far = np.zeros(5)
    far[0] = 1e3
    asym = C * 1e3 ** -(p.N - 2 * p.s)
    assert rel_err(bubble_value(p, b, far), asym) < 1e-2


def test_bubble_radial_monotone(params59):
    b = Bubble(np.zeros(5), 2.0)
    radii = np.linspace(0, 5, 50)
    pts = np.zeros((50, 5))
    pts[:, 0] = radii
    vals = bubble_value(params59, b, pts)
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals > 0)


def test_tower_centers_square_and_single():
    cfg = TowerConfig(m=4, rbar=1.0, ybar=np.zeros(3), lam=1.0)
    xs = tower_centers(cfg)
    expect = np.zeros((4, 5))
    expect[0, 0] = 1.0
    expect[1, 1] = 1.0
    expect[2, 0] = -1.0
    expect[3, 1] = -1.0
    assert np.allclose(xs, expect, atol=1e-15)

    cfg1 = TowerConfig(m=1, rbar=0.7, ybar=np.array([1.0, 2.0, 3.0]), lam=1.0)
    assert np.allclose(tower_centers(cfg1), [[0.7, 0.0, 1.0, 2.0, 3.0]])


def test_tower_min_spacing_brute_force():
    cfg = TowerConfig(m=8, rbar=2.0, ybar=np.zeros(3), lam=1.0)
    xs = tower_centers(cfg)
    dmin = min(
        np.linalg.norm(xs[i] - xs[j]) for i in range(8) for j in range(i + 1, 8)
    )
    assert dmin == pytest.approx(4 * math.sin(math.pi / 8), rel=1e-12)
    assert cfg.min_spacing() == pytest.approx(dmin, rel=1e-12)


def test_tower_reduces_to_bubble(params59):
    cfg = TowerConfig(m=1, rbar=1.0, ybar=np.zeros(3), lam=2.5)
    b = Bubble(tower_centers(cfg)[0], 2.5)
    pts = np.random.default_rng(0).normal(size=(20, 5))
    assert np.allclose(tower_value(params59, cfg, pts), bubble_value(params59, b, pts), rtol=1e-14)


def test_zderivative_peak_formula(params59):
    p = params59
    lam = 3.0
    cfg = TowerConfig(m=4, rbar=1.0, ybar=np.zeros(3), lam=lam)
    xs = tower_centers(cfg)
    C = bubble_constant(p.N, p.s)
    nu = (p.N - 2 * p.s) / 2
    for j in range(1, 5):
        got = z_derivative(p, cfg, j, 1, xs[j - 1])
        assert got == pytest.approx(C * nu * lam ** (nu - 1), rel=1e-12)


def _fd_tower(p, cfg, l, y, h):
    """Central difference of the tower in parameter direction l."""
    if l == 1:
        up = TowerConfig(cfg.m, cfg.rbar, cfg.ybar, cfg.lam + h)
        dn = TowerConfig(cfg.m, cfg.rbar, cfg.ybar, cfg.lam - h)
    elif l == 2:
        up = TowerConfig(cfg.m, cfg.rbar + h, cfg.ybar, cfg.lam)
        dn = TowerConfig(cfg.m, cfg.rbar - h, cfg.ybar, cfg.lam)
    else:
        e = np.zeros_like(cfg.ybar)
        e[l - 3] = h
        up = TowerConfig(cfg.m, cfg.rbar, cfg.ybar + e, cfg.lam)
        dn = TowerConfig(cfg.m, cfg.rbar, cfg.ybar - e, cfg.lam)
    return (tower_value(p, cfg=up, y=y) - tower_value(p, cfg=dn, y=y)) / (2 * h)


def test_zderivatives_match_finite_differences(params59, rng):
    p = params59
    cfg = TowerConfig(m=5, rbar=1.0, ybar=np.array([0.1, -0.2, 0.3]), lam=4.0)
    pts = rng.normal(scale=1.5, size=(100, 5)) + np.array([1.0, 0, 0.1, -0.2, 0.3])
    for l in range(1, 6):
        h = 1e-5 * cfg.lam if l == 1 else 1e-5 / cfg.lam
        fd = _fd_tower(p, cfg, l, pts, h)
        analytic = sum(z_derivative(p, cfg, j, l, pts) for j in range(1, cfg.m + 1))
        # guard against cancellation: compare on a scale set by the tower itself
        scale = np.maximum(np.abs(analytic), 1e-9 * np.max(np.abs(analytic)))
        assert np.max(np.abs(fd - analytic) / scale) < 1e-6


def test_tower_gradient_matches_finite_differences(params59, rng):
    p = params59
    cfg = TowerConfig(m=3, rbar=1.0, ybar=np.zeros(3), lam=2.0)
    pts = rng.normal(scale=1.2, size=(30, 5))
    g = tower_gradient(p, cfg, pts)
    h = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd = (tower_value(p, cfg, pts + e) - tower_value(p, cfg, pts - e)) / (2 * h)
        scale = np.maximum(np.abs(g[:, i]), 1e-8 * np.max(np.abs(g)))
        assert np.max(np.abs(fd - g[:, i]) / scale) < 1e-5


def test_index_errors(params59, tower59):
    with pytest.raises(IndexError):
        z_derivative(params59, tower59, 0, 1, np.zeros(5))
    with pytest.raises(IndexError):
        z_derivative(params59, tower59, 5, 1, np.zeros(5))
    with pytest.raises(IndexError):
        z_derivative(params59, tower59, 1, 6, np.zeros(5))
    with pytest.raises(ValueError):
        TowerConfig(m=0, rbar=1.0, ybar=np.zeros(3), lam=1.0)


def test_direction_weights():
    assert direction_weight(1) == -1
    assert all(direction_weight(l) == 1 for l in range(2, 8))


@settings(max_examples=25, deadline=None)
@given(
    m=st.integers(min_value=2, max_value=7),
    seed=st.integers(min_value=0, max_value=2 ** 31),
)
def test_tower_symmetry_invariance(m, seed):
    p = ProblemParams(5, 0.8)
    cfg = TowerConfig(m=m, rbar=1.3, ybar=np.array([0.2, 0.0, -0.1]), lam=2.0)
    sym = TowerSymmetry(m)
    y = np.random.default_rng(seed).normal(size=5)
    v = tower_value(p, cfg, y)
    assert tower_value(p, cfg, sym.rotate(y)) == pytest.approx(v, rel=1e-12)
    assert tower_value(p, cfg, sym.reflect(y)) == pytest.approx(v, rel=1e-12)
