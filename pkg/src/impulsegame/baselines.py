"""Single-agent (non-strategic) impulse problems used as a comparison.

Firm alone: no government, so the value above the firm's trigger is
``G1(x) + c * phi1(x)`` (the decreasing solution, since only the lower
trigger can be hit).  Government alone mirrors this with ``psi2`` below its
trigger.  In both cases ``c`` follows from value matching at the jump and the
two thresholds from smooth fit at the trigger plus optimality of the target.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diffusion import GameConfig, IntegrabilityError
from .solver import SolverError
from .values import Player


class BaselineError(SolverError):
    def __init__(self, msg, best=None, residuals=None):
        super().__init__(msg)
        self.best = best
        self.residuals = residuals


@dataclass
class SingleAgentSolution:
    player: Player
    trigger: float
    target: float
    coefficient: float
    residuals: tuple
    value: Callable
    derivative: Callable

    @property
    def inaction_region(self) -> tuple:
        if self.player is Player.FIRM:
            return (self.trigger, np.inf)
        return (0.0, self.trigger)


def _newton_log(fun, z0, tol=1e-12, max_iter=100, h=1e-7):
    """Damped Newton in log-coordinates for a 2-d system (keeps iterates positive)."""
    u = np.log(np.asarray(z0, dtype=float))

    def F(u):
        try:
            r = np.asarray(fun(np.exp(u)), dtype=float)
        except (ValueError, ZeroDivisionError, FloatingPointError):
            return None
        return r if np.all(np.isfinite(r)) else None

    r = F(u)
    if r is None:
        return None, None
    for _ in range(max_iter):
        norm = np.max(np.abs(r))
        if norm <= tol:
            break
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            rp, rm = F(u + e), F(u - e)
            if rp is None or rm is None:
                return None, None
            J[:, j] = (rp - rm) / (2 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None, None
        lam = 1.0
        for _ in range(40):
            cand = u + lam * step
            rc = F(cand)
            if rc is not None and np.max(np.abs(rc)) < norm:
                u, r = cand, rc
                break
            lam *= 0.5
        else:
            break
    return np.exp(u), r


def _firm_system(config: GameConfig):
    pair = config.pair(Player.FIRM)
    G = config.G(Player.FIRM)
    k = config.firm_slope

    def coef(t, T):
        return (G(t) - G(T) + config.K1 + k * (T - t)) / (pair.phi(T) - pair.phi(t))

    def res(z):
        t, T = z
        if not T > t:
            raise ValueError("target must exceed trigger")
        c = coef(t, T)
        return [G.derivative(t) + c * pair.dphi(t) - k, G.derivative(T) + c * pair.dphi(T) - k]

    return res, coef


def _gov_system(config: GameConfig):
    pair = config.pair(Player.GOVERNMENT)
    G = config.G(Player.GOVERNMENT)
    k = config.kappa2

    def coef(T, t):
        return (G(T) - G(t) + config.K2 + k * (t - T)) / (pair.psi(t) - pair.psi(T))

    def res(z):
        T, t = z
        if not t > T:
            raise ValueError("trigger must exceed target")
        c = coef(T, t)
        return [G.derivative(t) + c * pair.dpsi(t) - k, G.derivative(T) + c * pair.dpsi(T) - k]

    return res, coef


def _starts(center: float):
    for lo in (0.3, 0.1, 0.03, 0.6, 0.01):
        for ratio in (2.0, 1.3, 5.0, 20.0):
            yield lo * center, lo * center * ratio


def solve_firm_alone(config: GameConfig, tol: float = 1e-12) -> SingleAgentSolution:
    """Firm optimising without the government."""
    gbm = config.gbm
    if not gbm.resolvent_denominator(config.r1, config.a) > 0:
        raise IntegrabilityError("firm running profit is not integrable")
    res, coef = _firm_system(config)
    from .verification import xhat
    try:
        center = xhat(config, Player.FIRM)
    except ValueError:
        center = 1.0
    best = None
    for z0 in _starts(center):
        z, r = _newton_log(res, z0, tol=tol)
        if z is None:
            continue
        if best is None or np.max(np.abs(r)) < np.max(np.abs(best[1])):
            best = (z, r)
        if np.max(np.abs(r)) <= 1e-8:
            break
    if best is None or np.max(np.abs(best[1])) > 1e-8:
        raise BaselineError("firm-alone thresholds not found",
                            best=None if best is None else best[0],
                            residuals=None if best is None else best[1])
    (t, T), r = best
    c = float(coef(t, T))
    pair, G, k = config.pair(Player.FIRM), config.G(Player.FIRM), config.firm_slope
    v_target = float(G(T) + c * pair.phi(T))

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= t, v_target - config.K1 - k * (T - x), G(x) + c * pair.phi(x))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= t, k, G.derivative(x) + c * pair.dphi(x))

    return SingleAgentSolution(Player.FIRM, float(t), float(T), c, tuple(float(v) for v in r),
                               value, derivative)


def solve_government_alone(config: GameConfig, tol: float = 1e-12) -> SingleAgentSolution:
    """Government optimising without the firm."""
    gbm = config.gbm
    if not gbm.resolvent_denominator(config.r2, config.b) > 0:
        raise IntegrabilityError("government running cost is not integrable")
    res, coef = _gov_system(config)
    from .verification import xhat
    try:
        center = xhat(config, Player.GOVERNMENT)
    except ValueError:
        center = 1.0
    best = None
    # the trigger sits well above the stationary point of theta2
    for T0, t0 in _starts(30.0 * center):
        z, r = _newton_log(res, (T0 / 10.0, t0), tol=tol)
        if z is None:
            continue
        if best is None or np.max(np.abs(r)) < np.max(np.abs(best[1])):
            best = (z, r)
        if np.max(np.abs(r)) <= 1e-8:
            break
    if best is None or np.max(np.abs(best[1])) > 1e-8:
        raise BaselineError("government-alone thresholds not found",
                            best=None if best is None else best[0],
                            residuals=None if best is None else best[1])
    (T, t), r = best
    c = float(coef(T, t))
    pair, G, k = config.pair(Player.GOVERNMENT), config.G(Player.GOVERNMENT), config.kappa2
    v_target = float(G(T) + c * pair.psi(T))

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= t, v_target + config.K2 + k * (x - T), G(x) + c * pair.psi(x))

    def derivative(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= t, k, G.derivative(x) + c * pair.dpsi(x))

    return SingleAgentSolution(Player.GOVERNMENT, float(t), float(T), c, tuple(float(v) for v in r),
                               value, derivative)
