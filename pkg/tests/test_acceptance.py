"""Acceptance criteria 1-11.  Each test records one PASS/FAIL line, printed at the end of the run.

Criterion 7 is the long one (20,000 paths x 3e6 steps, roughly a quarter of an hour on one core).
"""
import io
import json
import math
import time

import numpy as np
import pytest

from impulsegame import (EquilibriumValues, Player, SolverOptions, Thresholds, multistart_solve,
                         residuals, solve, table1_config, verify, xhat)
from impulsegame.baselines import solve_firm_alone, solve_government_alone
from impulsegame.cli import main
from impulsegame.montecarlo import SimOptions, estimate_payoffs_many, estimate_transition_weights
from impulsegame.reporting import SweepSpec, run_sweep
from impulsegame.solver import default_multistart_grid
from impulsegame.values import transition_weights
from impulsegame.verification import qvi_check

REF = (0.1558984470, 0.3825673799, 0.2359455020, 0.5746537199)
EPS = np.finfo(float).eps

RESULTS: dict = {}


def record(n: int, ok: bool, detail: str):
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def cfg():
    return table1_config()


@pytest.fixture(scope="module")
def root(cfg):
    return solve(cfg, Thresholds(0.1, 0.4, 0.25, 0.6)).thresholds


def test_c01_threshold_reproduction(capsys):
    t0 = time.perf_counter()
    code = main(["solve", "table1"])
    dt = time.perf_counter() - t0
    rep = json.loads(capsys.readouterr().out)
    got = np.array([rep["thresholds"][k] for k in ("b11", "b12", "b21", "b22")])
    err = float(np.max(np.abs(got - REF)))
    record(1, code == 0 and err <= 1e-6 and dt < 1.0,
           f"max |b - ref| = {err:.2e} (tol 1e-6), exit {code}, {dt:.3f} s (limit 1 s)")


def test_c02_resolvent_coefficients(cfg):
    g1, g2 = cfg.G("firm").coefficient, cfg.G("government").coefficient
    e1, e2 = abs(g1 - 1000 / 95) / (1000 / 95), abs(g2 - 50) / 50
    record(2, e1 <= 4 * EPS and e2 <= 4 * EPS,
           f"G1 coef {g1!r} (rel err {e1:.1e}), G2 coef {g2!r} (rel err {e2:.1e}); tol 4 ulp")


def test_c03_stationary_points(cfg):
    x1, x2 = xhat(cfg, "firm"), xhat(cfg, "government")
    record(3, x1 == 61.03515625 and x2 == 0.012, f"xhat1 = {x1!r}, xhat2 = {x2!r}")


def test_c04_boundary_checks(cfg, root):
    rep = verify(cfg, root)
    f, g = rep.cond_boundary_firm.value, rep.cond_boundary_gov.value
    ef, eg = abs(f + 0.0727643376), abs(g - 0.1390988361)
    record(4, ef <= 1e-6 and eg <= 1e-6 and rep.cond_boundary_firm.passed and rep.cond_boundary_gov.passed,
           f"firm {f:.10f} (err {ef:.1e}), government {g:.10f} (err {eg:.1e}); tol 1e-6")


def test_c05_verification_suite(cfg, root):
    rep = verify(cfg, root, n_points=10_000)
    ev = EquilibriumValues.build(cfg, root)
    k1, k2 = cfg.firm_slope, cfg.kappa2
    b11, b12, b21, b22 = root.as_tuple()

    def mid(lo, hi):
        return np.linspace(lo, hi, 1002)[1:-1]

    pattern = (np.all(ev.derivative("firm", mid(b11, b12)) > k1)
               and np.all(ev.derivative("firm", mid(b12, b22)) < k1)
               and np.all(ev.derivative("government", mid(b11, b21)) < k2)
               and np.all(ev.derivative("government", mid(b21, b22)) > k2))
    record(5, rep.passed and pattern,
           f"failed conditions: {rep.failed() or 'none'}; derivative sign pattern {'ok' if pattern else 'wrong'}")


def test_c06_residual_contract(cfg):
    opts = SolverOptions()
    norms = []
    for start in [(0.1, 0.4, 0.25, 0.6), REF, (0.05, 0.3, 0.15, 0.8), (0.2, 0.45, 0.3, 0.5)]:
        res = solve(cfg, Thresholds(*start), opts)
        norms.append(residuals(cfg, res.thresholds).sup_norm())
    for r in multistart_solve(cfg, SolverOptions(multistart_grid=default_multistart_grid())):
        norms.append(residuals(cfg, r.thresholds).sup_norm())
    for row in run_sweep(cfg, SweepSpec("sigma", 0.19, 0.22, 5), n_points=500):
        norms.append(residuals(cfg.with_param("sigma", row.value), row.thresholds).sup_norm())
    worst = max(norms)
    record(6, worst <= 1e-10, f"worst sup-norm over {len(norms)} returned roots = {worst:.2e} (tol 1e-10)")


def test_c07_monte_carlo_agreement(cfg, root):
    x0s = (0.2, 0.3, 0.5)
    opts = SimOptions(dt=1e-4, horizon=300.0, n_paths=20_000, seed=0, antithetic=True)
    t0 = time.perf_counter()
    ests = estimate_payoffs_many(cfg, root, x0s, opts)
    secs = time.perf_counter() - t0
    ev = EquilibriumValues.build(cfg, root)
    ok, parts = True, []
    scale = max(abs(ev.value(p, x)) for p in Player for x in x0s)
    for x0, (f, g) in zip(x0s, ests):
        z1 = (f.mean - ev.value(Player.FIRM, x0)) / f.std_error
        z2 = (g.mean - ev.value(Player.GOVERNMENT, x0)) / g.std_error
        trunc = max(f.truncation_bound, g.truncation_bound)
        ok &= abs(z1) <= 3 and abs(z2) <= 3 and trunc < 1e-10 * scale
        parts.append(f"x0={x0}: z1={z1:+.2f} z2={z2:+.2f}")
    record(7, ok, "; ".join(parts) + f"; {opts.n_paths} paths, {secs:.0f} s")


def test_c08_transition_weights(cfg, root):
    opts = SimOptions(dt=1e-4, horizon=300.0, n_paths=10_000, seed=1, antithetic=True)
    est = estimate_transition_weights(cfg, root, 0.3, cfg.r1, opts)
    w = transition_weights(cfg.pair("firm"), root, 0.3)
    zA, zB = (est.A - w.A) / est.A_se, (est.B - w.B) / est.B_se
    record(8, abs(zA) <= 3 and abs(zB) <= 3,
           f"A1={w.A:.5f} vs {est.A:.5f} (z={zA:+.2f}); B1={w.B:.5f} vs {est.B:.5f} (z={zB:+.2f})")


def _cols(rows):
    arr = np.array([r.as_list()[1:7] for r in rows], dtype=float)
    return {k: arr[:, i] for i, k in enumerate(("b11", "b12", "b21", "b22", "firm", "gov"))}


def test_c09_comparative_statics(cfg):
    inc = lambda v: bool(np.all(np.diff(v) > 0))
    dec = lambda v: bool(np.all(np.diff(v) < 0))
    checks = {}
    rows = run_sweep(cfg, SweepSpec("sigma", 0.19, 0.22, 13))
    c = _cols(rows)
    checks["sigma"] = (all(r.verified for r in rows) and inc(c["b22"]) and dec(c["b11"])
                       and inc(c["firm"]) and inc(c["gov"]))
    rows = run_sweep(cfg, SweepSpec("mu", 0.01, 0.025, 13))
    c = _cols(rows)
    checks["mu"] = (all(r.verified for r in rows) and dec(c["b11"]) and dec(c["b22"])
                    and dec(c["firm"]) and dec(c["gov"]))
    rows = run_sweep(cfg, SweepSpec("K1", 0.5, 1.0, 11))
    c = _cols(rows)
    checks["K1"] = (all(r.verified for r in rows) and all(dec(c[k]) for k in ("b11", "b12", "b21", "b22"))
                    and dec(c["firm"]) and dec(c["gov"]))
    record(9, all(checks.values()), ", ".join(f"{k}: {'ok' if v else 'wrong'}" for k, v in checks.items()))


def test_c10_qvi(cfg, root):
    q = qvi_check(cfg, root)
    pde = max(-q.firm_pde_inaction.margin, -q.gov_pde_inaction.margin)
    obst = min(q.firm_obstacle.margin, q.gov_obstacle.margin)
    const = max(-q.firm_constancy.margin, -q.gov_constancy.margin)
    ok = q.passed and pde < 1e-5 and obst >= -1e-9 and const == 0.0
    record(10, ok, f"PDE residual {pde:.1e} (tol 1e-5), obstacle min {obst:.2e} (>= -1e-9), "
                   f"constancy error {const:.1e}")


def test_c11_baselines(cfg, root):
    firm, gov = solve_firm_alone(cfg), solve_government_alone(cfg)
    res = max(map(abs, firm.residuals + gov.residuals))
    xf = np.geomspace(firm.trigger, 50 * firm.target, 5000)
    xg = np.geomspace(gov.trigger * 1e-4, gov.trigger, 5000)
    mono = bool(np.all(np.diff(firm.value(xf)) >= 0) and np.all(np.diff(gov.value(xg)) >= 0))
    ev = EquilibriumValues.build(cfg, root)
    x = np.linspace(root.b11, root.b22, 2001)
    changes = [int(np.sum(np.diff(np.sign(np.diff(ev.value(p, x)))) != 0)) for p in Player]
    ok = res < 1e-8 and mono and all(n > 0 for n in changes)
    record(11, ok, f"baseline residuals {res:.1e} (tol 1e-8), monotone {mono}, "
                   f"strategic slope sign changes v1={changes[0]} v2={changes[1]}")
