"""Candidate equilibrium values for a given threshold quadruple.

Between the two triggers neither player acts and each value is
``C * A(x) + D * B(x) + G(x)`` where ``A``/``B`` are the discounted
probabilities of leaving through the lower/upper trigger first.  The four
"corner" constants ``w_i(b12)``, ``w_i(b21)`` solve one 2x2 linear system per
player obtained by evaluating that representation at the two targets.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .diffusion import FundamentalPair, GameConfig


class Player(str, enum.Enum):
    FIRM = "firm"
    GOVERNMENT = "government"

    @classmethod
    def parse(cls, p) -> "Player":
        if isinstance(p, cls):
            return p
        if p in (0, "firm"):
            return cls.FIRM
        if p in (1, "government", "gov"):
            return cls.GOVERNMENT
        raise ValueError(f"unknown player {p!r}")


class DegenerateThresholds(ValueError):
    """The corner-value linear system of one player is (numerically) singular."""

    def __init__(self, msg, player=None):
        super().__init__(msg)
        self.player = player


class InvalidThresholds(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    """Firm trigger/target ``b11 < b12`` and government target/trigger ``b21 < b22``."""

    b11: float
    b12: float
    b21: float
    b22: float

    def __post_init__(self):
        if not self.is_admissible(self.as_array()):
            raise InvalidThresholds(
                f"need 0 < b11 < b12 < b22 and b11 < b21 < b22, got {self.as_tuple()}"
            )

    @staticmethod
    def is_admissible(b) -> bool:
        b11, b12, b21, b22 = (float(v) for v in b)
        if not np.all(np.isfinite([b11, b12, b21, b22])):
            return False
        return 0 < b11 < b12 < b22 and b11 < b21 < b22

    def as_tuple(self):
        return (self.b11, self.b12, self.b21, self.b22)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_array(cls, b) -> "Thresholds":
        return cls(*(float(v) for v in b))

    @property
    def firm_size(self) -> float:
        return self.b12 - self.b11

    @property
    def gov_size(self) -> float:
        return self.b22 - self.b21


REFERENCE_THRESHOLDS = Thresholds(0.1558984470, 0.3825673799, 0.2359455020, 0.5746537199)


class TransitionWeights(NamedTuple):
    A: np.ndarray
    B: np.ndarray


class CornerValues(NamedTuple):
    w1_b12: float
    w1_b21: float
    w2_b12: float
    w2_b21: float


def _weights(pair: FundamentalPair, th: Thresholds, x, deriv: int = 0):
    """A, B (or their derivatives) without the domain check.

    ``A = (psi F(b22) - phi) / (psi(b11) F(b22) - phi(b11))``, and similarly
    for ``B``; both are combinations of ``psi`` and ``phi``.
    """
    lo, hi = th.b11, th.b22
    f_lo, f_hi = pair.F(lo), pair.F(hi)
    den_a = pair.psi(lo) * (f_hi - f_lo)
    den_b = pair.psi(hi) * (f_hi - f_lo)
    if deriv == 0:
        psi, phi = pair.psi(x), pair.phi(x)
    elif deriv == 1:
        psi, phi = pair.dpsi(x), pair.dphi(x)
    else:
        psi, phi = pair.d2psi(x), pair.d2phi(x)
    return (psi * f_hi - phi) / den_a, (phi - psi * f_lo) / den_b


def transition_weights(pair: FundamentalPair, thresholds: Thresholds, x) -> TransitionWeights:
    """Discounted first-exit indicators of ``(b11, b22)`` started at ``x``.

    ``A(x) = E_x[exp(-r tau_lo) 1{tau_lo < tau_hi}]`` and ``B`` is the
    mirror image for the upper trigger.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < thresholds.b11) or np.any(xa > thresholds.b22):
        raise ValueError(f"x must lie in [b11, b22] = [{thresholds.b11}, {thresholds.b22}]")
    A, B = _weights(pair, thresholds, xa)
    # pin the endpoints exactly
    A = np.where(xa == thresholds.b11, 1.0, np.where(xa == thresholds.b22, 0.0, A))
    B = np.where(xa == thresholds.b11, 0.0, np.where(xa == thresholds.b22, 1.0, B))
    if A.ndim == 0:
        return TransitionWeights(float(A), float(B))
    return TransitionWeights(A, B)


DEGENERACY_EPS = 1e-10


def _corner_system(config: GameConfig, th: Thresholds, player: Player):
    """Matrix and right-hand side for ``(w(b12), w(b21))`` of one player."""
    pair = config.pair(player)
    G = config.G(player)
    A, B = _weights(pair, th, np.array([th.b12, th.b21]))
    M = np.array([[1.0 - A[0], -B[0]], [-A[1], 1.0 - B[1]]])
    g_in = G(np.array([th.b12, th.b21]))
    if player is Player.FIRM:
        # interior: (w(b12) - c) A + (w(b21) - G(b22)) B + G,  c = K1 + k(b12-b11) + G(b11)
        c = config.K1 + config.firm_slope * (th.b12 - th.b11) + G(th.b11)
        rhs = -c * A - G(th.b22) * B + g_in
    else:
        # interior: (w(b21) + e) B + (w(b12) - G(b11)) A + G,  e = K2 + k2(b22-b21) - G(b22)
        e = config.K2 + config.kappa2 * (th.b22 - th.b21) - G(th.b22)
        rhs = e * B - G(th.b11) * A + g_in
    return M, rhs, A, B


def nondegeneracy_margins(config: GameConfig, thresholds: Thresholds) -> tuple[float, float]:
    """``(1 - A(b12))(1 - B(b21)) - B(b12) A(b21)`` for each player."""
    out = []
    for p in Player:
        M, _, _, _ = _corner_system(config, thresholds, p)
        out.append(float(np.linalg.det(M)))
    return out[0], out[1]


def corner_values(config: GameConfig, thresholds: Thresholds, eps: float = DEGENERACY_EPS,
                  cross_check: bool = True) -> CornerValues:
    """Solve both players' 2x2 systems for the corner constants."""
    sol = {}
    for p in Player:
        M, rhs, A, B = _corner_system(config, thresholds, p)
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if not np.isfinite(det) or abs(det) < eps:
            raise DegenerateThresholds(
                f"{p.value} corner system is degenerate (determinant {det:.3e})", player=p
            )
        if not abs(1.0 - B[1]) > eps:
            raise DegenerateThresholds(f"{p.value}: B(b21) is 1", player=p)
        sol[p] = np.linalg.solve(M, rhs)
    out = CornerValues(float(sol[Player.FIRM][0]), float(sol[Player.FIRM][1]),
                       float(sol[Player.GOVERNMENT][0]), float(sol[Player.GOVERNMENT][1]))
    if cross_check:
        ref = closed_form_corner_values(config, thresholds)
        scale = 1.0 + max(abs(v) for v in out)
        worst = max(abs(u - v) for u, v in zip(out, ref))
        # nested closed forms lose digits when the system is close to singular
        if not worst <= 1e-7 * scale:
            raise DegenerateThresholds(
                f"corner values disagree with closed forms by {worst:.3e}; system ill-conditioned"
            )
    return out


def closed_form_corner_values(config: GameConfig, th: Thresholds) -> CornerValues:
    """The explicit nested formulas for the four corner constants.

    Kept only as an independent cross-check of :func:`corner_values`.
    """
    k1 = config.firm_slope
    G1 = config.G(Player.FIRM)
    A1, B1 = _weights(config.pair(Player.FIRM), th, np.array([th.b12, th.b21]))
    a12, a21, bb12, bb21 = A1[0], A1[1], B1[0], B1[1]
    c1 = config.K1 + k1 * (th.b12 - th.b11) + G1(th.b11)
    q = bb12 / (1.0 - bb21)
    w1_b12 = (G1(th.b21) * q + G1(th.b12) - c1 * (a21 * q + a12)
              - G1(th.b22) * (bb21 * q + bb12)) / (1.0 - a12 - a21 * q)
    w1_b21 = ((w1_b12 - c1) * a21 - G1(th.b22) * bb21 + G1(th.b21)) / (1.0 - bb21)

    k2 = config.kappa2
    G2 = config.G(Player.GOVERNMENT)
    A2, B2 = _weights(config.pair(Player.GOVERNMENT), th, np.array([th.b12, th.b21]))
    a12, a21, bb12, bb21 = A2[0], A2[1], B2[0], B2[1]
    e = config.K2 + k2 * (th.b22 - th.b21)
    s = (1.0 - bb21) / bb12
    w2_b12 = (G2(th.b12) * s + G2(th.b21) + e - G2(th.b22) - G2(th.b11) * (a12 * s + a21)) / (
        (1.0 - a12) * s - a21)
    w2_b21 = ((e - G2(th.b22)) * bb21 + (w2_b12 - G2(th.b11)) * a21 + G2(th.b21)) / (1.0 - bb21)
    return CornerValues(float(w1_b12), float(w1_b21), float(w2_b12), float(w2_b21))


class EquilibriumValues:
    """Piecewise values ``v1`` (firm) and ``v2`` (government) for fixed thresholds.

    All evaluation methods accept scalars or arrays.
    """

    def __init__(self, config: GameConfig, thresholds: Thresholds, corners: CornerValues | None = None):
        self.config = config
        self.thresholds = thresholds
        self.corners = corners if corners is not None else corner_values(config, thresholds)
        th, w = thresholds, self.corners
        self._pairs = {p: config.pair(p) for p in Player}
        self._G = {p: config.G(p) for p in Player}
        G1, G2 = self._G[Player.FIRM], self._G[Player.GOVERNMENT]
        # interior coefficients on A and B
        self._coef = {
            Player.FIRM: (
                w.w1_b12 - config.K1 - config.firm_slope * (th.b12 - th.b11) - G1(th.b11),
                w.w1_b21 - G1(th.b22),
            ),
            Player.GOVERNMENT: (
                w.w2_b12 - G2(th.b11),
                w.w2_b21 + config.K2 + config.kappa2 * (th.b22 - th.b21) - G2(th.b22),
            ),
        }

    @classmethod
    def build(cls, config: GameConfig, thresholds: Thresholds, **kw) -> "EquilibriumValues":
        return cls(config, thresholds, corner_values(config, thresholds, **kw))

    # -- branches, valid for any x > 0 ---------------------------------------
    def interior(self, player, x, deriv: int = 0):
        p = Player.parse(player)
        cA, cB = self._coef[p]
        A, B = _weights(self._pairs[p], self.thresholds, x, deriv)
        G = self._G[p]
        g = G(x) if deriv == 0 else G.derivative(x) if deriv == 1 else G.second_derivative(x)
        return cA * A + cB * B + g

    def lower(self, player, x, deriv: int = 0):
        """Branch on ``x <= b11``."""
        p = Player.parse(player)
        x = np.asarray(x, dtype=float)
        th, w, cfg = self.thresholds, self.corners, self.config
        if p is Player.FIRM:
            k = cfg.firm_slope
            if deriv == 0:
                return w.w1_b12 - cfg.K1 - k * (th.b12 - x)
            return np.full_like(x, k if deriv == 1 else 0.0)
        return np.full_like(x, w.w2_b12 if deriv == 0 else 0.0)

    def upper(self, player, x, deriv: int = 0):
        """Branch on ``x >= b22``."""
        p = Player.parse(player)
        x = np.asarray(x, dtype=float)
        th, w, cfg = self.thresholds, self.corners, self.config
        if p is Player.FIRM:
            return np.full_like(x, w.w1_b21 if deriv == 0 else 0.0)
        if deriv == 0:
            return w.w2_b21 + cfg.K2 + cfg.kappa2 * (x - th.b21)
        return np.full_like(x, cfg.kappa2 if deriv == 1 else 0.0)

    # -- piecewise evaluation -------------------------------------------------
    def value(self, player, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa <= 0):
            raise ValueError("value is defined for x > 0 only")
        th = self.thresholds
        out = np.where(
            xa <= th.b11, self.lower(player, xa),
            np.where(xa >= th.b22, self.upper(player, xa), self.interior(player, xa)),
        )
        return float(out) if out.ndim == 0 else out

    def derivative(self, player, x, side: str | None = None):
        """First derivative of the active branch.

        At the kinks ``b11`` and ``b22`` a ``side`` of ``"left"`` or
        ``"right"`` selects the one-sided limit.
        """
        xa = np.asarray(x, dtype=float)
        if np.any(xa <= 0):
            raise ValueError("derivative is defined for x > 0 only")
        th = self.thresholds
        at_kink = (xa == th.b11) | (xa == th.b22)
        if np.any(at_kink) and side not in ("left", "right"):
            raise ValueError("x is a kink (b11 or b22); pass side='left' or side='right'")
        if side == "left":
            use_lower, use_upper = xa <= th.b11, xa > th.b22
        else:
            use_lower, use_upper = xa < th.b11, xa >= th.b22
        out = np.where(use_lower, self.lower(player, xa, 1),
                       np.where(use_upper, self.upper(player, xa, 1), self.interior(player, xa, 1)))
        return float(out) if out.ndim == 0 else out

    def __call__(self, player, x):
        return self.value(player, x)


def value(config: GameConfig, thresholds: Thresholds, corners: CornerValues, player, x):
    return EquilibriumValues(config, thresholds, corners).value(player, x)


def value_derivative(config: GameConfig, thresholds: Thresholds, corners: CornerValues, player, x,
                     side: str | None = None):
    return EquilibriumValues(config, thresholds, corners).derivative(player, x, side=side)
