import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulsegame.diffusion import table1_config
from impulsegame.values import (DegenerateThresholds, EquilibriumValues, InvalidThresholds, Player,
                                Thresholds, closed_form_corner_values, corner_values,
                                nondegeneracy_margins, transition_weights)

from conftest import fd


def _oracle_corners(cfg, th, n_iter=5000):
    """Fixed-point (value) iteration on the two corner values; independent of the 2x2 solve."""
    out = []
    for p in (Player.FIRM, Player.GOVERNMENT):
        pair, G = cfg.pair(p), cfg.G(p)
        A12, B12 = transition_weights(pair, th, th.b12)
        A21, B21 = transition_weights(pair, th, th.b21)
        u = w = 0.0  # value at b12, value at b21
        for _ in range(n_iter):
            if p is Player.FIRM:
                low = u - cfg.K1 - cfg.firm_slope * (th.b12 - th.b11)
                high = w
            else:
                low = u
                high = w + cfg.K2 + cfg.kappa2 * (th.b22 - th.b21)
            gl, gh = G(th.b11), G(th.b22)
            u_new = A12 * (low - gl) + B12 * (high - gh) + G(th.b12)
            w_new = A21 * (low - gl) + B21 * (high - gh) + G(th.b21)
            if abs(u_new - u) + abs(w_new - w) < 1e-15:
                break
            u, w = u_new, w_new
        out.append((u, w))
    return out


def test_benchmark_corner_values(th):
    c = corner_values(table1_config(), th)
    assert c.w1_b12 == pytest.approx(5.382320013, abs=1e-8)
    assert c.w1_b21 == pytest.approx(4.978561902, abs=1e-8)
    assert c.w2_b12 == pytest.approx(1.584163060, abs=1e-8)
    assert c.w2_b21 == pytest.approx(1.244147372, abs=1e-8)


@pytest.mark.parametrize("quad", [
    (0.1558984470, 0.3825673799, 0.2359455020, 0.5746537199),
    (0.1, 0.3, 0.3, 0.6),       # coincident targets
    (0.2, 0.25, 0.45, 0.5),
])
def test_corner_values_match_value_iteration(quad):
    cfg = table1_config()
    th = Thresholds(*quad)
    c = corner_values(cfg, th)
    (u1, w1), (u2, w2) = _oracle_corners(cfg, th)
    assert c.w1_b12 == pytest.approx(u1, abs=1e-10)
    assert c.w1_b21 == pytest.approx(w1, abs=1e-10)
    assert c.w2_b12 == pytest.approx(u2, abs=1e-10)
    assert c.w2_b21 == pytest.approx(w2, abs=1e-10)


def test_closed_form_cross_check(th):
    cfg = table1_config()
    a, b = corner_values(cfg, th), closed_form_corner_values(cfg, th)
    np.testing.assert_allclose(np.array(a), np.array(b), rtol=1e-10)


def test_weights_at_endpoints(th):
    pair = table1_config().pair("firm")
    assert transition_weights(pair, th, th.b11) == (1.0, 0.0)
    assert transition_weights(pair, th, th.b22) == (0.0, 1.0)
    A, B = transition_weights(pair, th, np.linspace(th.b11, th.b22, 101)[1:-1])
    assert np.all((A > 0) & (B > 0) & (A + B < 1))
    with pytest.raises(ValueError):
        transition_weights(pair, th, th.b22 * 1.01)


def test_weights_solve_homogeneous_ode(th):
    cfg = table1_config()
    gbm, r = cfg.gbm, cfg.r1
    pair = cfg.pair("firm")
    for x in (0.2, 0.3, 0.5):
        for k in range(2):
            f = lambda y: transition_weights(pair, th, y)[k]
            lhs = gbm.generator(x, f(x), fd(f, x), fd(f, x, h=1e-4, order=2))
            assert lhs == pytest.approx(r * f(x), abs=1e-6)


def test_value_matching_and_constancy(th):
    cfg = table1_config()
    ev = EquilibriumValues.build(cfg, th)
    eps = 1e-12
    for p in Player:
        assert ev.value(p, th.b11) == pytest.approx(ev.interior(p, th.b11), abs=1e-12)
        assert ev.value(p, th.b22 - eps) == pytest.approx(ev.value(p, th.b22), abs=1e-9)
    x = np.array([th.b22, 1.0, 10.0])
    np.testing.assert_array_equal(ev.value("firm", x), ev.corners.w1_b21)
    x = np.array([1e-4, 0.05, th.b11])
    np.testing.assert_array_equal(ev.value("government", x), ev.corners.w2_b12)


def test_derivative_matches_finite_difference(th):
    ev = EquilibriumValues.build(table1_config(), th)
    for p in Player:
        for x in (0.05, 0.2, 0.3, 0.45, 0.9):
            assert ev.derivative(p, x) == pytest.approx(fd(lambda y: ev.value(p, y), x, h=1e-7), abs=1e-5)


def test_interior_ode_identity(th):
    cfg = table1_config()
    ev = EquilibriumValues.build(cfg, th)
    for p, flow, r in ((Player.FIRM, cfg.pi, cfg.r1), (Player.GOVERNMENT, cfg.cost_flow, cfg.r2)):
        x = np.linspace(th.b11, th.b22, 50)
        u, du, d2u = (ev.interior(p, x, k) for k in range(3))
        res = cfg.gbm.generator(x, u, du, d2u) - r * u + flow(x)
        assert np.max(np.abs(res)) < 1e-10


def test_derivative_at_kink_needs_side(th):
    ev = EquilibriumValues.build(table1_config(), th)
    with pytest.raises(ValueError):
        ev.derivative("firm", th.b11)
    assert ev.derivative("firm", th.b11, side="left") == pytest.approx(0.8)
    assert ev.derivative("government", th.b22, side="right") == pytest.approx(0.3)


@pytest.mark.parametrize("quad", [(0.3, 0.2, 0.25, 0.6), (0.1, 0.4, 0.25, 0.35), (-0.1, 0.2, 0.3, 0.4)])
def test_invalid_orderings(quad):
    with pytest.raises(InvalidThresholds):
        Thresholds(*quad)


def test_degeneracy_threshold_enforced(th):
    cfg = table1_config()
    m = min(nondegeneracy_margins(cfg, th))
    assert m > 0
    with pytest.raises(DegenerateThresholds):
        corner_values(cfg, th, eps=2 * max(nondegeneracy_margins(cfg, th)))


@st.composite
def quadruples(draw):
    pts = sorted(draw(st.lists(st.floats(0.02, 2.0), min_size=4, max_size=4, unique=True)))
    b11, m1, m2, b22 = pts
    if (b22 - b11) < 1e-3 or min(np.diff(pts)) < 1e-4:
        pts = [0.1, 0.2, 0.3, 0.5]
        b11, m1, m2, b22 = pts
    swap = draw(st.booleans())
    return Thresholds(b11, m2, m1, b22) if swap else Thresholds(b11, m1, m2, b22)


@settings(max_examples=60, deadline=None)
@given(quadruples())
def test_continuity_on_random_quadruples(q):
    cfg = table1_config()
    ev = EquilibriumValues.build(cfg, q)
    for p in Player:
        for b in (q.b11, q.b22):
            lo, hi = ev.lower if b == q.b11 else ev.interior, ev.interior if b == q.b11 else ev.upper
            assert float(lo(p, b)) == pytest.approx(float(hi(p, b)), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(quadruples(), st.floats(0.0, 1.0))
def test_weights_bounded_on_random_quadruples(q, s):
    x = q.b11 + s * (q.b22 - q.b11)
    for p in Player:
        A, B = transition_weights(table1_config().pair(p), q, x)
        assert -1e-12 <= A <= 1 + 1e-12 and -1e-12 <= B <= 1 + 1e-12
        assert A + B <= 1 + 1e-12
