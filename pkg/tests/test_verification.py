import json
from dataclasses import replace

import numpy as np
import pytest

from impulsegame.diffusion import table1_config
from impulsegame.values import EquilibriumValues, Player, Thresholds, corner_values
from impulsegame.verification import (intervention_operator, make_grid, qvi_check, theta,
                                      theta_derivative, verify, xhat)

REF = Thresholds(0.1558984470, 0.3825673799, 0.2359455020, 0.5746537199)


def test_xhat_closed_forms():
    cfg = table1_config()
    assert xhat(cfg, "firm") == pytest.approx(61.03515625, rel=1e-14)
    assert xhat(cfg, "government") == pytest.approx(0.012, rel=1e-14)


def test_xhat_is_one_when_base_is_one():
    cfg = table1_config()
    for a in (0.3, 0.5, 0.7):
        # kappa1 (r1 - mu) / (a alpha) = 1
        c = cfg.with_param("a", a).with_param("kappa1", a / (cfg.r1 - cfg.gbm.mu))
        assert xhat(c, "firm") == pytest.approx(1.0, rel=1e-14)


def test_xhat_needs_rate_above_drift():
    with pytest.raises(ValueError):
        xhat(table1_config().with_param("mu", 0.1), "firm")


def test_theta_values():
    cfg = table1_config()
    assert theta(cfg, "firm", 1.0) == pytest.approx(0.936, abs=1e-15)
    assert theta_derivative(cfg, "government", xhat(cfg, "government")) == pytest.approx(0.0, abs=1e-15)
    x = np.geomspace(1e-4, 0.999 * xhat(cfg, "firm"), 400)
    assert np.all(np.diff(theta(cfg, "firm", x)) > 0)


def test_reference_quadruple_passes():
    rep = verify(table1_config(), REF)
    assert rep.passed, rep.failed()
    assert rep.cond_boundary_firm.value == pytest.approx(-0.0727643376, abs=1e-6)
    assert rep.cond_boundary_gov.value == pytest.approx(0.1390988361, abs=1e-6)
    json.dumps(rep.to_dict())


def test_solver_output_passes(solved):
    rep = verify(table1_config(), solved)
    assert rep.passed and rep.qvi.passed


def test_rough_quadruple_fails_with_names():
    rep = verify(table1_config(), Thresholds(0.1, 0.4, 0.25, 0.6))
    assert not rep.passed
    assert "cond_derivative_firm_lo" in rep.failed()


def test_target_perturbation_fails():
    rep = verify(table1_config(), replace(REF, b12=REF.b12 * 1.05))
    bad = [getattr(rep, k) for k in rep.failed() if k.startswith("cond_derivative")]
    assert bad
    assert all(REF.b11 < c.worst_x <= REF.b22 and c.margin < 0 for c in bad)


def test_trigger_below_xhat_fails():
    rep = verify(table1_config(), Thresholds(0.001, 0.005, 0.004, 0.01))
    assert not rep.cond_xhat_gov.passed
    assert rep.cond_xhat_gov.value - rep.cond_xhat_gov.reference < 0


def test_grid_refinement_does_not_flip():
    cfg = table1_config()
    for quad in (REF, Thresholds(0.1, 0.4, 0.25, 0.6)):
        a, b = verify(cfg, quad, n_points=1000, with_qvi=False), verify(cfg, quad, n_points=2000, with_qvi=False)
        for name in ("cond_derivative_firm_lo", "cond_derivative_firm_hi",
                     "cond_derivative_gov_lo", "cond_derivative_gov_hi"):
            ca, cb = getattr(a, name), getattr(b, name)
            assert cb.margin <= ca.margin + 1e-9
            if ca.passed and not cb.passed:
                assert ca.margin - cb.margin <= 1e-9


def test_make_grid_endpoints():
    g = make_grid(1.0, 2.0, 10)
    assert g[0] > 1.0 and g[-1] < 2.0 and len(g) == 10
    g = make_grid(1.0, 2.0, 10, "log", include_lo=True, include_hi=True)
    assert g[0] == 1.0 and g[-1] == 2.0


def test_intervention_operator_branches():
    cfg = table1_config()
    w = corner_values(cfg, REF)
    ev = EquilibriumValues(cfg, REF, w)
    x = np.linspace(0.01, REF.b11, 20)
    np.testing.assert_allclose(intervention_operator(cfg, REF, w, Player.FIRM, x), ev.value("firm", x),
                               atol=1e-12)
    x = np.linspace(REF.b12 + 1e-3, 2.0, 20)
    np.testing.assert_allclose(intervention_operator(cfg, REF, w, Player.FIRM, x),
                               ev.value("firm", x) - cfg.K1, atol=1e-14)
    x = np.linspace(REF.b22, 3.0, 20)
    np.testing.assert_allclose(intervention_operator(cfg, REF, w, Player.GOVERNMENT, x),
                               ev.value("government", x), atol=1e-12)
    x = np.linspace(0.01, REF.b21 - 1e-3, 20)
    np.testing.assert_allclose(intervention_operator(cfg, REF, w, Player.GOVERNMENT, x),
                               ev.value("government", x) + cfg.K2, atol=1e-14)


def test_qvi_details():
    q = qvi_check(table1_config(), REF)
    assert q.passed
    assert q.firm_obstacle.margin >= -1e-9 and q.gov_obstacle.margin >= -1e-9
    assert -q.firm_pde_inaction.margin < 1e-5 and -q.gov_pde_inaction.margin < 1e-5
    assert q.firm_constancy.margin == 0.0 and q.gov_constancy.margin == 0.0
    assert q.x_max == pytest.approx(4 * REF.b22)
