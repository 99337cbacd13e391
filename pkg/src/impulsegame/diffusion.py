"""Uncontrolled diffusion, fundamental solutions and resolvent payoffs.

The built-in model is geometric Brownian motion with power-type running
flows, for which every object below has a closed form.  Downstream code only
touches the small interface exposed by :class:`Diffusion`
(``drift``, ``volatility``, ``fundamental_pair`` and ``resolvent``), so another
diffusion can be plugged in by subclassing it.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np


class InvalidParameterError(ValueError):
    """A model parameter is outside its admissible range."""


class IntegrabilityError(ValueError):
    """The discounted running flow of the uncontrolled process is not finite."""


class Diffusion(abc.ABC):
    """Time-homogeneous one-dimensional diffusion on (0, inf)."""

    @abc.abstractmethod
    def drift(self, x):
        ...

    @abc.abstractmethod
    def volatility(self, x):
        ...

    @abc.abstractmethod
    def fundamental_pair(self, r: float):
        """Increasing/decreasing solutions of ``L u = r u``."""

    @abc.abstractmethod
    def resolvent(self, r: float, flow: "PowerFlow"):
        """Expected discounted integral of ``flow`` along the uncontrolled path."""

    def generator(self, x, u, du, d2u):
        """Apply the infinitesimal generator given ``u`` and its derivatives at ``x``."""
        sig = self.volatility(x)
        return 0.5 * sig * sig * d2u + self.drift(x) * du


@dataclass(frozen=True)
class PowerFlow:
    """Running flow ``f(x) = (scale * x) ** exponent``."""

    exponent: float
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidParameterError(f"flow scale must be positive, got {self.scale}")

    def __call__(self, x):
        return (self.scale * np.asarray(x, dtype=float)) ** self.exponent

    def derivative(self, x):
        p = self.exponent
        x = np.asarray(x, dtype=float)
        return p * self.scale ** p * x ** (p - 1.0)


@dataclass(frozen=True)
class FundamentalPair:
    """Power solutions ``psi(x) = x**m_plus`` and ``phi(x) = x**m_minus``.

    Normalised so that ``psi(1) = phi(1) = 1``.
    """

    rate: float
    m_plus: float
    m_minus: float

    def psi(self, x):
        return np.asarray(x, dtype=float) ** self.m_plus

    def phi(self, x):
        return np.asarray(x, dtype=float) ** self.m_minus

    def dpsi(self, x):
        x = np.asarray(x, dtype=float)
        return self.m_plus * x ** (self.m_plus - 1.0)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        return self.m_minus * x ** (self.m_minus - 1.0)

    def d2psi(self, x):
        m = self.m_plus
        return m * (m - 1.0) * np.asarray(x, dtype=float) ** (m - 2.0)

    def d2phi(self, x):
        m = self.m_minus
        return m * (m - 1.0) * np.asarray(x, dtype=float) ** (m - 2.0)

    def F(self, x):
        """Strictly decreasing ratio ``phi / psi``."""
        return np.asarray(x, dtype=float) ** (self.m_minus - self.m_plus)


@dataclass(frozen=True)
class PowerResolvent:
    """``G(x) = coefficient * x**exponent`` for a power flow under GBM."""

    coefficient: float
    exponent: float

    def __call__(self, x):
        return self.coefficient * np.asarray(x, dtype=float) ** self.exponent

    def derivative(self, x):
        p = self.exponent
        return self.coefficient * p * np.asarray(x, dtype=float) ** (p - 1.0)

    def second_derivative(self, x):
        p = self.exponent
        return self.coefficient * p * (p - 1.0) * np.asarray(x, dtype=float) ** (p - 2.0)


@dataclass(frozen=True)
class GbmParams(Diffusion):
    """``dX = mu X dt + sigma X dW``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidParameterError("mu and sigma must be finite")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")

    def drift(self, x):
        return self.mu * np.asarray(x, dtype=float)

    def volatility(self, x):
        return self.sigma * np.asarray(x, dtype=float)

    def fundamental_pair(self, r: float) -> FundamentalPair:
        return fundamental_solutions(self, r)

    def resolvent(self, r: float, flow: PowerFlow) -> PowerResolvent:
        return resolvent(self, r, flow)

    def resolvent_denominator(self, r: float, p: float) -> float:
        return r - self.mu * p - 0.5 * self.sigma ** 2 * p * (p - 1.0)


def fundamental_solutions(gbm: GbmParams, r: float) -> FundamentalPair:
    """Roots of ``(sigma^2/2) m^2 + (mu - sigma^2/2) m - r = 0``."""
    if not r > 0:
        raise InvalidParameterError(f"discount rate must be positive, got {r}")
    if not gbm.sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {gbm.sigma}")
    half_var = 0.5 * gbm.sigma ** 2
    lin = gbm.mu - half_var
    disc = math.sqrt(lin * lin + 4.0 * half_var * r)
    # stable pair: avoid cancellation in the root that has the small modulus
    if lin >= 0:
        m_minus = (-lin - disc) / (2.0 * half_var)
        m_plus = -r / (half_var * m_minus)
    else:
        m_plus = (-lin + disc) / (2.0 * half_var)
        m_minus = -r / (half_var * m_plus)
    return FundamentalPair(rate=r, m_plus=m_plus, m_minus=m_minus)


def resolvent(gbm: GbmParams, r: float, flow: PowerFlow) -> PowerResolvent:
    """Closed-form expected discounted flow for GBM and a power flow."""
    p = flow.exponent
    denom = gbm.resolvent_denominator(r, p)
    if not denom > 0:
        raise IntegrabilityError(
            f"r - mu*p - (sigma^2/2) p (p-1) = {denom:.6g} <= 0 for p={p}, r={r}"
        )
    return PowerResolvent(coefficient=flow.scale ** p / denom, exponent=p)


@dataclass(frozen=True)
class GameConfig:
    """Full problem instance.

    ``pi`` is the firm's operating profit flow, ``cost_flow`` the social cost
    of emissions (its ``scale`` is the emission factor beta).
    """

    gbm: GbmParams
    pi: PowerFlow
    cost_flow: PowerFlow
    r1: float
    r2: float
    alpha: float
    K1: float
    kappa1: float
    K2: float
    kappa2: float

    def __post_init__(self):
        for name in ("r1", "r2", "alpha", "K1", "kappa1", "K2", "kappa2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidParameterError(f"{name} must be positive and finite, got {val}")

    @property
    def beta(self) -> float:
        return self.cost_flow.scale

    @property
    def a(self) -> float:
        return self.pi.exponent

    @property
    def b(self) -> float:
        return self.cost_flow.exponent

    @property
    def firm_slope(self) -> float:
        """Marginal intervention cost of the firm in output units, ``kappa1/alpha``."""
        return self.kappa1 / self.alpha

    def rate(self, player) -> float:
        return self.r1 if _player_index(player) == 0 else self.r2

    def flow(self, player) -> PowerFlow:
        return self.pi if _player_index(player) == 0 else self.cost_flow

    def pair(self, player) -> FundamentalPair:
        return self.gbm.fundamental_pair(self.rate(player))

    def G(self, player) -> PowerResolvent:
        return self.gbm.resolvent(self.rate(player), self.flow(player))

    def to_dict(self) -> dict:
        """Flat key/value view with the standard key names."""
        return {
            "mu": self.gbm.mu, "sigma": self.gbm.sigma, "r1": self.r1, "r2": self.r2,
            "alpha": self.alpha, "beta": self.beta, "K1": self.K1, "kappa1": self.kappa1,
            "K2": self.K2, "kappa2": self.kappa2, "a": self.a, "b": self.b,
            "pi_scale": self.pi.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        return cls(
            gbm=GbmParams(mu=float(d["mu"]), sigma=float(d["sigma"])),
            pi=PowerFlow(exponent=float(d["a"]), scale=float(d.get("pi_scale", 1.0))),
            cost_flow=PowerFlow(exponent=float(d["b"]), scale=float(d["beta"])),
            r1=float(d["r1"]), r2=float(d["r2"]), alpha=float(d["alpha"]),
            K1=float(d["K1"]), kappa1=float(d["kappa1"]),
            K2=float(d["K2"]), kappa2=float(d["kappa2"]),
        )

    def with_param(self, name: str, value: float) -> "GameConfig":
        """Copy with one parameter replaced."""
        d = self.to_dict()
        if name not in d:
            raise KeyError(f"unknown parameter {name!r}")
        d[name] = value
        return GameConfig.from_dict(d)

    def scaled(self, c: float) -> "GameConfig":
        """Multiply every cost parameter and both running flows by ``c``."""
        return replace(
            self,
            pi=PowerFlow(self.pi.exponent, self.pi.scale * c ** (1.0 / self.pi.exponent)),
            cost_flow=PowerFlow(
                self.cost_flow.exponent, self.cost_flow.scale * c ** (1.0 / self.cost_flow.exponent)
            ),
            K1=self.K1 * c, kappa1=self.kappa1 * c, K2=self.K2 * c, kappa2=self.kappa2 * c,
        )


TABLE1 = {
    "mu": 0.02, "sigma": 0.20, "r1": 0.10, "r2": 0.10, "alpha": 1.0, "beta": 1.0,
    "K1": 0.5, "kappa1": 0.8, "K2": 0.6, "kappa2": 0.3, "a": 0.5, "b": 2.0,
}


def table1_config() -> GameConfig:
    return GameConfig.from_dict(TABLE1)


class IntegrabilityCheck(NamedTuple):
    ok: bool
    firm_margin: float
    gov_margin: float


def check_integrability(config: GameConfig) -> IntegrabilityCheck:
    """Finite no-intervention payoffs for GBM with power flows.

    Margins are ``r1 - max(0, mu a - (sigma^2/2) a (1-a))`` and
    ``r2 - max(0, mu b + (sigma^2/2) b (b-1))``; both must be positive.
    """
    mu, s2 = config.gbm.mu, 0.5 * config.gbm.sigma ** 2
    a, b = config.a, config.b
    firm = config.r1 - max(0.0, mu * a - s2 * a * (1.0 - a))
    gov = config.r2 - max(0.0, mu * b + s2 * b * (b - 1.0))
    return IntegrabilityCheck(firm > 0 and gov > 0, firm, gov)


def _player_index(player) -> int:
    # avoid a circular import with values.Player; accept enum, str or int
    key = getattr(player, "value", player)
    if key in (0, "firm"):
        return 0
    if key in (1, "government", "gov"):
        return 1
    raise ValueError(f"unknown player {player!r}")
