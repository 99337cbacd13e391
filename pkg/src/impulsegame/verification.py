"""Sufficient conditions for a threshold quadruple to be an equilibrium.

Every inequality is checked on a dense grid using the analytic branch
derivatives; the worst point and its signed margin (positive means satisfied)
are recorded.  Only the QVI second derivatives use finite differences.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diffusion import GameConfig
from .values import (CornerValues, EquilibriumValues, Player, Thresholds,
                     nondegeneracy_margins)

# slack for non-strict inequalities and required gap for strict ones
WEAK_SLACK = 1e-9
STRICT_GAP = 1e-12
# The weak derivative conditions hold with equality at b12 / b21, where the
# margin equals a target-optimality residual; thresholds rounded to 10 digits
# leave residuals of a few 1e-9 there.
DERIV_SLACK = 1e-8
PDE_TOL = 1e-5


def theta(config: GameConfig, player, x):
    """``pi(x) + (k1/alpha)(mu(x) - r1 x)`` for the firm, ``C(beta x) + k2(mu(x) - r2 x)`` otherwise."""
    p = Player.parse(player)
    x = np.asarray(x, dtype=float)
    drift = config.gbm.drift(x)
    if p is Player.FIRM:
        out = config.pi(x) + config.firm_slope * (drift - config.r1 * x)
    else:
        out = config.cost_flow(x) + config.kappa2 * (drift - config.r2 * x)
    return float(out) if out.ndim == 0 else out


def theta_derivative(config: GameConfig, player, x):
    p = Player.parse(player)
    x = np.asarray(x, dtype=float)
    if p is Player.FIRM:
        return config.pi.derivative(x) + config.firm_slope * (config.gbm.mu - config.r1)
    return config.cost_flow.derivative(x) + config.kappa2 * (config.gbm.mu - config.r2)


def xhat(config: GameConfig, player) -> float:
    """Stationary point of ``theta`` (local max for the firm, local min for the government)."""
    p = Player.parse(player)
    mu = config.gbm.mu
    if p is Player.FIRM:
        if not config.r1 > mu:
            raise ValueError("r1 must exceed mu for an interior stationary point")
        a, s = config.pi.exponent, config.pi.scale
        base = config.kappa1 * (config.r1 - mu) / (a * config.alpha * s ** a)
        return base ** (1.0 / (a - 1.0))
    if not config.r2 > mu:
        raise ValueError("r2 must exceed mu for an interior stationary point")
    b, beta = config.cost_flow.exponent, config.cost_flow.scale
    base = config.kappa2 * (config.r2 - mu) / (b * beta ** b)
    return base ** (1.0 / (b - 1.0))


@dataclass
class ConditionResult:
    passed: bool
    worst_x: float
    margin: float


@dataclass
class ScalarCheck:
    passed: bool
    value: float
    reference: float | None = None


@dataclass
class QviReport:
    firm_pde_inaction: ConditionResult    # |(L - r1) v1 + pi| on (b11, b22)
    firm_pde_action: ConditionResult      # (L - r1) v1 + pi <= 0 on (0, b11)
    firm_max_relation: ConditionResult    # |max{PDE, M1 v1 - v1}| on (0, b22)
    firm_obstacle: ConditionResult        # v1 - M1 v1 >= 0 everywhere
    firm_constancy: ConditionResult       # v1 = v1(b21) on [b22, inf)
    gov_pde_inaction: ConditionResult
    gov_pde_action: ConditionResult       # (L - r2) v2 + C >= 0 on (b22, inf)
    gov_min_relation: ConditionResult     # |min{PDE, M2 v2 - v2}| on (b11, inf)
    gov_obstacle: ConditionResult         # M2 v2 - v2 >= 0 everywhere
    gov_constancy: ConditionResult        # v2 = v2(b12) on (0, b11]
    x_min: float
    x_max: float

    @property
    def passed(self) -> bool:
        return all(getattr(self, f).passed for f in self.__dataclass_fields__
                   if isinstance(getattr(self, f), ConditionResult))


@dataclass
class VerificationReport:
    thresholds: Thresholds
    cond_derivative_firm_lo: ConditionResult   # v1' >= k1/alpha on (b11, b12]
    cond_derivative_firm_hi: ConditionResult   # v1' <  k1/alpha on (b12, b22]
    cond_derivative_gov_lo: ConditionResult    # v2' <  k2 on (b11, b21)
    cond_derivative_gov_hi: ConditionResult    # v2' >= k2 on [b21, b22)
    cond_xhat_firm: ScalarCheck                # b11 <= xhat1
    cond_xhat_gov: ScalarCheck                 # b22 >= xhat2
    cond_boundary_firm: ScalarCheck            # pi(b11) + (k1/alpha) mu(b11) - r1 v1(b11) <= 0
    cond_boundary_gov: ScalarCheck             # C(beta b22) + k2 mu(b22) - r2 v2(b22) >= 0
    nondegeneracy: dict
    assumption_theta: dict
    qvi: QviReport | None = None
    notes: list = field(default_factory=list)

    def conditions(self) -> dict:
        out = {
            "cond_derivative_firm_lo": self.cond_derivative_firm_lo.passed,
            "cond_derivative_firm_hi": self.cond_derivative_firm_hi.passed,
            "cond_derivative_gov_lo": self.cond_derivative_gov_lo.passed,
            "cond_derivative_gov_hi": self.cond_derivative_gov_hi.passed,
            "cond_xhat_firm": self.cond_xhat_firm.passed,
            "cond_xhat_gov": self.cond_xhat_gov.passed,
            "cond_boundary_firm": self.cond_boundary_firm.passed,
            "cond_boundary_gov": self.cond_boundary_gov.passed,
            "nondegeneracy": self.nondegeneracy["passed"],
            "assumption_theta": self.assumption_theta["passed"],
        }
        if self.qvi is not None:
            out["qvi"] = self.qvi.passed
        return out

    @property
    def passed(self) -> bool:
        return all(self.conditions().values())

    def failed(self) -> list:
        return [k for k, v in self.conditions().items() if not v]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = dict(zip(("b11", "b12", "b21", "b22"), self.thresholds.as_tuple()))
        d["passed"] = self.passed
        return d


def make_grid(lo: float, hi: float, n: int, spacing: str = "linear",
              include_lo: bool = False, include_hi: bool = False) -> np.ndarray:
    """``n`` points strictly inside ``(lo, hi)`` plus optional endpoints."""
    if spacing == "linear":
        pts = np.linspace(lo, hi, n + 2)
    elif spacing == "log":
        pts = np.geomspace(lo, hi, n + 2)
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    pts = pts[1:-1]
    if include_lo:
        pts = np.concatenate([[lo], pts])
    if include_hi:
        pts = np.concatenate([pts, [hi]])
    return pts


def _worst(x, margin, need) -> ConditionResult:
    i = int(np.argmin(margin))
    return ConditionResult(bool(margin[i] >= need), float(x[i]), float(margin[i]))


def intervention_operator(config: GameConfig, thresholds: Thresholds, corners: CornerValues,
                          player, x):
    """Best value reachable by an immediate impulse, net of its cost.

    Uses the optimal targets: the firm jumps to ``b12`` from below and pays
    only the fixed cost above it; the government mirrors this around ``b21``.
    """
    p = Player.parse(player)
    ev = EquilibriumValues(config, thresholds, corners)
    x = np.asarray(x, dtype=float)
    th, w = thresholds, corners
    if p is Player.FIRM:
        out = np.where(x <= th.b12,
                       w.w1_b12 - config.K1 - config.firm_slope * (th.b12 - x),
                       ev.value(p, np.maximum(x, th.b12)) - config.K1)
    else:
        out = np.where(x >= th.b21,
                       w.w2_b21 + config.K2 + config.kappa2 * (x - th.b21),
                       ev.value(p, np.minimum(x, th.b21)) + config.K2)
    return float(out) if out.ndim == 0 else out


def _pde_residual(ev: EquilibriumValues, player: Player, branch: str, x):
    """``(L - r) v + flow`` on one analytic branch; ``v''`` by central differences."""
    cfg = ev.config
    f = getattr(ev, branch)
    h = 1e-4 * x
    v = f(player, x)
    dv = f(player, x, 1)
    d2v = (f(player, x + h) - 2.0 * v + f(player, x - h)) / (h * h)
    flow = cfg.flow(player)(x)
    return cfg.gbm.generator(x, v, dv, d2v) - cfg.rate(player) * v + flow


def qvi_check(config: GameConfig, thresholds: Thresholds, n_points: int = 2000,
              spacing: str = "linear", x_min: float | None = None,
              x_max: float | None = None, corners: CornerValues | None = None) -> QviReport:
    """Check the QVI system on grids over ``(x_min, b22)`` and ``(b11, x_max)``.

    ``x_max`` defaults to ``4 * b22`` and ``x_min`` to ``b11 / 100``.
    """
    ev = EquilibriumValues(config, thresholds, corners)
    th, w = thresholds, ev.corners
    x_min = th.b11 / 100.0 if x_min is None else x_min
    x_max = 4.0 * th.b22 if x_max is None else x_max
    F, Gv = Player.FIRM, Player.GOVERNMENT

    inner = make_grid(th.b11, th.b22, n_points, spacing)
    below = make_grid(x_min, th.b11, n_points, spacing)
    above = make_grid(th.b22, x_max, n_points, spacing)
    everywhere = np.unique(np.concatenate([below, [th.b11], inner, [th.b22], above]))

    # firm: max{PDE, M1 v1 - v1} = 0 on (0, b22)
    pde_in = _pde_residual(ev, F, "interior", inner)
    pde_lo = _pde_residual(ev, F, "lower", below)
    firm_inner = _worst(inner, -np.abs(pde_in), -PDE_TOL)
    firm_action = _worst(below, -pde_lo, -WEAK_SLACK)
    left = np.concatenate([below, inner])
    gap1 = intervention_operator(config, th, w, F, left) - ev.value(F, left)
    rel1 = np.maximum(np.concatenate([pde_lo, pde_in]), gap1)
    firm_rel = _worst(left, -np.abs(rel1), -PDE_TOL)
    obst1 = ev.value(F, everywhere) - intervention_operator(config, th, w, F, everywhere)
    firm_obst = _worst(everywhere, obst1, -WEAK_SLACK)
    up_pts = np.concatenate([[th.b22], above])
    const1 = -np.abs(ev.value(F, up_pts) - w.w1_b21)
    firm_const = _worst(up_pts, const1, 0.0)

    # government: min{PDE, M2 v2 - v2} = 0 on (b11, inf)
    pde_in2 = _pde_residual(ev, Gv, "interior", inner)
    pde_up2 = _pde_residual(ev, Gv, "upper", above)
    gov_inner = _worst(inner, -np.abs(pde_in2), -PDE_TOL)
    gov_action = _worst(above, pde_up2, -WEAK_SLACK)
    right = np.concatenate([inner, above])
    gap2 = intervention_operator(config, th, w, Gv, right) - ev.value(Gv, right)
    rel2 = np.minimum(np.concatenate([pde_in2, pde_up2]), gap2)
    gov_rel = _worst(right, -np.abs(rel2), -PDE_TOL)
    obst2 = intervention_operator(config, th, w, Gv, everywhere) - ev.value(Gv, everywhere)
    gov_obst = _worst(everywhere, obst2, -WEAK_SLACK)
    lo_pts = np.concatenate([below, [th.b11]])
    const2 = -np.abs(ev.value(Gv, lo_pts) - w.w2_b12)
    gov_const = _worst(lo_pts, const2, 0.0)

    return QviReport(firm_inner, firm_action, firm_rel, firm_obst, firm_const,
                     gov_inner, gov_action, gov_rel, gov_obst, gov_const, x_min, x_max)


def _theta_assumption(config: GameConfig, n: int = 2000) -> dict:
    """Sampled monotonicity of theta around its stationary points (not a proof)."""
    try:
        x1, x2 = xhat(config, Player.FIRM), xhat(config, Player.GOVERNMENT)
    except ValueError as exc:
        return {"passed": False, "xhat_firm": None, "xhat_gov": None, "note": str(exc)}
    g1 = np.geomspace(x1 * 1e-8, x1, n)
    g2 = np.geomspace(x2, x2 * 1e8, n)
    inc1 = bool(np.all(np.diff(theta(config, Player.FIRM, g1)) > 0))
    inc2 = bool(np.all(np.diff(theta(config, Player.GOVERNMENT, g2)) > 0))
    return {"passed": inc1 and inc2, "xhat_firm": x1, "xhat_gov": x2,
            "theta_firm_increasing_below_xhat": inc1,
            "theta_gov_increasing_above_xhat": inc2,
            "note": "sampled, not proven"}


def verify(config: GameConfig, thresholds: Thresholds, n_points: int = 10_000,
           spacing: str = "linear", with_qvi: bool = True) -> VerificationReport:
    """Evaluate every sufficient condition at ``thresholds``.

    The derivative conditions use ``n_points`` grid points per interval.
    """
    th = thresholds
    F, Gv = Player.FIRM, Player.GOVERNMENT
    nd = nondegeneracy_margins(config, th)
    nondeg = {"passed": bool(min(abs(nd[0]), abs(nd[1])) > 1e-10),
              "margin_firm": nd[0], "margin_gov": nd[1]}
    ev = EquilibriumValues.build(config, th)
    k1, k2 = config.firm_slope, config.kappa2

    g = make_grid(th.b11, th.b12, n_points, spacing, include_hi=True)
    c12 = _worst(g, ev.derivative(F, g) - k1, -DERIV_SLACK)
    g = make_grid(th.b12, th.b22, n_points, spacing)
    d = np.concatenate([k1 - ev.derivative(F, g), [k1 - ev.derivative(F, th.b22, side="left")]])
    c13 = _worst(np.concatenate([g, [th.b22]]), d, STRICT_GAP)
    g = make_grid(th.b11, th.b21, n_points, spacing)
    c14 = _worst(g, k2 - ev.derivative(Gv, g), STRICT_GAP)
    g = make_grid(th.b21, th.b22, n_points, spacing, include_lo=True)
    c15 = _worst(g, ev.derivative(Gv, g) - k2, -DERIV_SLACK)

    theta_info = _theta_assumption(config)
    notes = [theta_info["note"]]
    x1, x2 = theta_info["xhat_firm"], theta_info["xhat_gov"]
    cx1 = ScalarCheck(bool(x1 is not None and th.b11 <= x1), th.b11, x1)
    cx2 = ScalarCheck(bool(x2 is not None and th.b22 >= x2), th.b22, x2)

    bnd1 = float(config.pi(th.b11) + k1 * config.gbm.drift(th.b11) - config.r1 * ev.value(F, th.b11))
    bnd2 = float(config.cost_flow(th.b22) + k2 * config.gbm.drift(th.b22)
                 - config.r2 * ev.value(Gv, th.b22))
    cb1 = ScalarCheck(bnd1 <= 0.0, bnd1)
    cb2 = ScalarCheck(bnd2 >= 0.0, bnd2)

    qvi = qvi_check(config, th, n_points=min(n_points, 2000), spacing=spacing,
                    corners=ev.corners) if with_qvi else None
    if not math.isfinite(bnd1) or not math.isfinite(bnd2):
        notes.append("non-finite boundary check")
    return VerificationReport(th, c12, c13, c14, c15, cx1, cx2, cb1, cb2, nondeg, theta_info, qvi, notes)
