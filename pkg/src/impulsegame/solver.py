"""Smooth-fit / optimal-target residuals and a damped Newton solver for them."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .diffusion import GameConfig, IntegrabilityError, check_integrability
from .values import (DegenerateThresholds, EquilibriumValues, InvalidThresholds, Player,
                     Thresholds)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class MaxIterExceeded(SolverError):
    def __init__(self, msg, best: Thresholds | None = None, best_norm: float = np.inf, trace=None):
        super().__init__(msg)
        self.best = best
        self.best_norm = best_norm
        self.trace = trace or []


class NonFiniteResidual(SolverError):
    pass


@dataclass(frozen=True)
class ResidualVector:
    r_smooth_firm: float
    r_smooth_gov: float
    r_target_firm: float
    r_target_gov: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r_smooth_firm, self.r_smooth_gov,
                         self.r_target_firm, self.r_target_gov])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.as_array())))


def residuals(config: GameConfig, thresholds: Thresholds) -> ResidualVector:
    """``v1'(b11+) - k1/alpha``, ``v2'(b22-) - k2``, ``v1'(b12) - k1/alpha``, ``v2'(b21) - k2``."""
    ev = EquilibriumValues.build(config, thresholds)
    th = thresholds
    k1, k2 = config.firm_slope, config.kappa2
    return ResidualVector(
        ev.interior(Player.FIRM, th.b11, 1) - k1,
        ev.interior(Player.GOVERNMENT, th.b22, 1) - k2,
        ev.interior(Player.FIRM, th.b12, 1) - k1,
        ev.interior(Player.GOVERNMENT, th.b21, 1) - k2,
    )


def _residual_array(config, b) -> np.ndarray:
    return residuals(config, Thresholds.from_array(b)).as_array()


def jacobian(config: GameConfig, thresholds: Thresholds, step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian w.r.t. ``(b11, b12, b21, b22)``.

    ``step`` is relative to each coordinate; it is halved until both probes
    stay admissible.
    """
    b = thresholds.as_array()
    J = np.empty((4, 4))
    for j in range(4):
        h = step * abs(b[j])
        for _ in range(40):
            up, dn = b.copy(), b.copy()
            up[j] += h
            dn[j] -= h
            if Thresholds.is_admissible(up) and Thresholds.is_admissible(dn):
                break
            h *= 0.5
        else:
            raise DegenerateThresholds(f"no admissible difference step for coordinate {j}")
        J[:, j] = (_residual_array(config, up) - _residual_array(config, dn)) / (2.0 * h)
    return J


@dataclass
class SolverOptions:
    max_iter: int = 100
    tol: float = 1e-10
    damping: float = 1.0
    jacobian_step: float = 1e-7
    max_backtracks: int = 30
    multistart_grid: list = field(default_factory=list)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class SolveResult:
    thresholds: Thresholds
    residual_norm: float
    iterations: int
    trace: list  # (iteration, (b11, b12, b21, b22), sup-norm, step length)


def project(b, prev) -> np.ndarray:
    """Pull a raw Newton iterate back into the ordered admissible set.

    Each coordinate that breaks an ordering constraint is replaced by the
    midpoint of its neighbours (``b11`` uses 0 as its lower neighbour; ``b22``
    uses the previous iterate's ``b22`` or twice its lower neighbour as upper).
    """
    b = np.array(b, dtype=float)
    prev = np.asarray(prev, dtype=float)
    b11, b12, b21, b22 = b
    top = max(b12, b21)
    if not b22 > top:
        upper = prev[3] if prev[3] > top else 2.0 * top
        b22 = 0.5 * (top + upper)
    if not 0 < b11 < min(b12, b21):
        b11 = 0.5 * min(b12, b21)
    if not b11 < b12 < b22:
        b12 = 0.5 * (b11 + b22)
    if not b11 < b21 < b22:
        b21 = 0.5 * (b11 + b22)
    return np.array([b11, b12, b21, b22])


def _safe_norm(config, b):
    if not Thresholds.is_admissible(b):
        return np.inf
    try:
        r = _residual_array(config, b)
    except (DegenerateThresholds, InvalidThresholds):
        return np.inf
    n = float(np.max(np.abs(r)))
    return n if np.isfinite(n) else np.inf


def solve(config: GameConfig, initial: Thresholds, opts: SolverOptions | None = None) -> SolveResult:
    """Damped Newton on the four residuals with backtracking on the sup-norm."""
    opts = opts or SolverOptions()
    ok = check_integrability(config)
    if not ok.ok:
        raise IntegrabilityError(f"integrability fails (margins {ok.firm_margin:.4g}, {ok.gov_margin:.4g})")
    b = initial.as_array()
    F = _residual_array(config, b)
    if not np.all(np.isfinite(F)):
        raise NonFiniteResidual(f"non-finite residual at initial guess {initial.as_tuple()}")
    norm = float(np.max(np.abs(F)))
    trace = [(0, tuple(b), norm, 0.0)]
    best_b, best_norm = b, norm
    for it in range(1, opts.max_iter + 1):
        if norm <= opts.tol:
            break
        J = jacobian(config, Thresholds.from_array(b), opts.jacobian_step)
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(J, -F, rcond=None)[0]
        lam = opts.damping
        new_b, new_norm = None, np.inf
        for _ in range(opts.max_backtracks):
            cand = project(b + lam * delta, b)
            cand_norm = _safe_norm(config, cand)
            if cand_norm < norm:
                new_b, new_norm = cand, cand_norm
                break
            lam *= 0.5
        if new_b is None:
            raise MaxIterExceeded(
                f"line search failed at iteration {it} (sup-norm {norm:.3e})",
                best=Thresholds.from_array(best_b), best_norm=best_norm, trace=trace)
        b, norm = new_b, new_norm
        F = _residual_array(config, b)
        trace.append((it, tuple(b), norm, lam))
        log.debug("newton it=%d norm=%.3e lam=%.3g", it, norm, lam)
        if norm < best_norm:
            best_b, best_norm = b, norm
    if norm > opts.tol:
        raise MaxIterExceeded(
            f"no convergence in {opts.max_iter} iterations (sup-norm {norm:.3e})",
            best=Thresholds.from_array(best_b), best_norm=best_norm, trace=trace)
    return SolveResult(Thresholds.from_array(b), norm, len(trace) - 1, trace)


def default_multistart_grid(n: int = 3) -> list:
    """Tensor grid over typical ranges of the four thresholds (inadmissible points dropped)."""
    axes = [np.linspace(0.05, 0.3, n), np.linspace(0.3, 0.5, n),
            np.linspace(0.15, 0.35, n), np.linspace(0.4, 0.8, n)]
    grid = []
    for pt in itertools.product(*axes):
        if Thresholds.is_admissible(pt):
            grid.append(Thresholds.from_array(pt))
    return grid


@dataclass
class Root:
    thresholds: Thresholds
    residual_norm: float
    n_starts: int


def multistart_solve(config: GameConfig, opts: SolverOptions) -> list[Root]:
    """Run :func:`solve` from every start in ``opts.multistart_grid``; merge roots within 1e-5."""
    ok = check_integrability(config)
    if not ok.ok:
        raise IntegrabilityError(f"integrability fails (margins {ok.firm_margin:.4g}, {ok.gov_margin:.4g})")
    if not opts.multistart_grid:
        raise ValueError("multistart_grid is empty")
    roots: list[Root] = []
    for start in opts.multistart_grid:
        try:
            res = solve(config, start, opts)
        except (SolverError, DegenerateThresholds, InvalidThresholds) as exc:
            log.debug("start %s failed: %s", start.as_tuple(), exc)
            continue
        b = res.thresholds.as_array()
        for root in roots:
            if np.max(np.abs(root.thresholds.as_array() - b)) <= 1e-5:
                root.n_starts += 1
                break
        else:
            roots.append(Root(res.thresholds, res.residual_norm, 1))
    roots.sort(key=lambda r: r.thresholds.as_tuple())
    return roots
