"""Monte-Carlo simulation of the impulse-controlled production process.

Between checks the state moves by exact GBM increments
``X <- X exp((mu - sigma^2/2) dt + sigma sqrt(dt) Z)``, so ``dt`` only sets how
often the triggers are inspected.  At each check the government acts first
(``X >= b22`` -> jump to ``b21``), otherwise the firm (``X <= b11`` -> jump
to ``b12``).  Running flows use left-point quadrature.

Every path (or antithetic pair) draws from its own SFC64 stream spawned from
``SeedSequence(seed)``, so results do not depend on evaluation order.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .diffusion import GameConfig
from .values import Thresholds

EV_STEP, EV_FIRM, EV_GOV = 0, 1, 2
EVENT_NAMES = {EV_STEP: "step", EV_FIRM: "firm_impulse", EV_GOV: "gov_impulse"}

# accumulator columns
_FLOW1, _COST1, _FLOW2, _COST2, _N1, _N2, _XMIN, _XMAX = range(8)


class SimulationError(RuntimeError):
    pass


@dataclass
class SimOptions:
    dt: float = 1e-4
    horizon: float = 300.0
    n_paths: int = 1000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.antithetic and self.n_paths < 2:
            raise ValueError("antithetic sampling needs n_paths >= 2")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_groups(self) -> int:
        return self.n_paths // 2 if self.antithetic else self.n_paths


@dataclass
class PathRecord:
    x0: float
    jump_times_firm: np.ndarray
    jump_times_gov: np.ndarray
    xi: np.ndarray                 # firm impulses, capacity units
    eta: np.ndarray                # government impulses
    discounted_costs_firm: np.ndarray
    discounted_costs_gov: np.ndarray
    discounted_profit: float       # firm payoff: flow minus intervention costs
    discounted_cost: float         # government payoff: flow plus intervention costs
    truncated: bool
    min_state: float               # over pre-intervention states after t = 0
    max_state: float
    events: np.ndarray = field(default=None, repr=False)  # (time, type, pre, post) rows


class PayoffEstimate(NamedTuple):
    mean: float
    std_error: float
    n: int
    truncation_bound: float


class TransitionEstimate(NamedTuple):
    A: float
    A_se: float
    B: float
    B_se: float
    n: int


@numba.njit(cache=True)
def _flow(x, scale, p, fast):
    # fast: 1 -> sqrt, 2 -> square
    y = scale * x
    if fast == 1:
        return math.sqrt(y)
    if fast == 2:
        return y * y
    return y ** p


@numba.njit(cache=True)
def _controlled_kernel(gen, n_steps, k0, dt, x, signs, drift, vol,
                       b11, b12, b21, b22, alpha, K1, kappa1, K2, kappa2,
                       disc1, disc2, d1_0, d2_0,
                       a_scale, a_exp, a_fast, b_scale, b_exp, b_fast,
                       acc, record, every, track, ev, buf, buf2):
    """Advance ``m`` states (sharing one normal draw per step) by ``n_steps``.

    Increments are drawn ``len(buf)`` at a time and replayed for every state.
    ``acc`` (m x 8) collects flow sums (not yet multiplied by dt), discounted
    intervention costs, counts and (if ``track``) pre-intervention min/max.  When ``record``
    is set, events of state 0 go to ``ev`` (rows: t, type, pre, post) and the
    number of rows is returned; a negative return flags an invalid state.
    """
    m = x.shape[0]
    n_ev = 0
    back = math.exp(2.0 * drift)
    size = buf.shape[0]
    done = 0
    d1_c = d1_0
    d2_c = d2_0
    while done < n_steps:
        n = min(size, n_steps - done)
        for k in range(n):
            buf[k] = math.exp(drift + vol * gen.standard_normal())
            buf2[k] = back / buf[k]
        for j in range(m):
            xj = x[j]
            flow1 = 0.0
            flow2 = 0.0
            cost1 = acc[j, 1]
            cost2 = acc[j, 3]
            n1 = acc[j, 4]
            n2 = acc[j, 5]
            lo = acc[j, 6]
            hi = acc[j, 7]
            d1 = d1_c
            d2 = d2_c
            up = signs[j] > 0
            for k in range(n):
                kk = k0 + done + k
                if track and kk > 0:
                    if xj < lo:
                        lo = xj
                    if xj > hi:
                        hi = xj
                if xj >= b22:
                    cost2 += d2 * (K2 + kappa2 * (xj - b21))
                    n2 += 1.0
                    if record:
                        ev[n_ev, 0] = kk * dt
                        ev[n_ev, 1] = 2.0
                        ev[n_ev, 2] = xj
                        ev[n_ev, 3] = b21
                        n_ev += 1
                    xj = b21
                elif xj <= b11:
                    cost1 += d1 * (K1 + kappa1 * (b12 - xj) / alpha)
                    n1 += 1.0
                    if record:
                        ev[n_ev, 0] = kk * dt
                        ev[n_ev, 1] = 1.0
                        ev[n_ev, 2] = xj
                        ev[n_ev, 3] = b12
                        n_ev += 1
                    xj = b12
                if record and every > 0 and kk % every == 0:
                    ev[n_ev, 0] = kk * dt
                    ev[n_ev, 1] = 0.0
                    ev[n_ev, 2] = xj
                    ev[n_ev, 3] = xj
                    n_ev += 1
                flow1 += d1 * _flow(xj, a_scale, a_exp, a_fast)
                flow2 += d2 * _flow(xj, b_scale, b_exp, b_fast)
                xj *= buf[k] if up else buf2[k]
                d1 *= disc1
                d2 *= disc2
            if not (xj > 0.0 and xj < 1e300):
                return -1 - j
            x[j] = xj
            acc[j, 0] += flow1
            acc[j, 1] = cost1
            acc[j, 2] += flow2
            acc[j, 3] = cost2
            acc[j, 4] = n1
            acc[j, 5] = n2
            acc[j, 6] = lo
            acc[j, 7] = hi
        # restart the discount chain from the exact value at each chunk
        done += n
        d1_c = d1_0 * disc1 ** done
        d2_c = d2_0 * disc2 ** done
    return n_ev


@numba.njit(cache=True)
def _hitting_kernel(gen, n_steps, dt, x, signs, drift, vol, lo, hi, rate, out):
    """First exit of ``(lo, hi)`` for the uncontrolled process.

    ``out[j] = (discounted lower-exit indicator, discounted upper-exit indicator)``.
    """
    m = x.shape[0]
    done = np.zeros(m, dtype=np.bool_)
    n_done = 0
    back = math.exp(2.0 * drift)
    for k in range(n_steps + 1):
        t = k * dt
        for j in range(m):
            if done[j]:
                continue
            if x[j] <= lo:
                out[j, 0] = math.exp(-rate * t)
                done[j] = True
                n_done += 1
            elif x[j] >= hi:
                out[j, 1] = math.exp(-rate * t)
                done[j] = True
                n_done += 1
        if n_done == m:
            break
        z = gen.standard_normal()
        f = math.exp(drift + vol * z)
        g = back / f
        for j in range(m):
            x[j] *= f if signs[j] > 0 else g
    return n_done


def _fast_code(p: float) -> int:
    return 1 if p == 0.5 else 2 if p == 2.0 else 0


def _streams(seed: int, n: int):
    return [np.random.Generator(np.random.SFC64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def _kernel_args(config: GameConfig, th: Thresholds, dt: float):
    mu, sig = config.gbm.mu, config.gbm.sigma
    return dict(
        dt=dt, drift=(mu - 0.5 * sig * sig) * dt, vol=sig * math.sqrt(dt),
        b11=th.b11, b12=th.b12, b21=th.b21, b22=th.b22, alpha=config.alpha,
        K1=config.K1, kappa1=config.kappa1, K2=config.K2, kappa2=config.kappa2,
        disc1=math.exp(-config.r1 * dt), disc2=math.exp(-config.r2 * dt),
        a_scale=config.pi.scale, a_exp=config.pi.exponent, a_fast=_fast_code(config.pi.exponent),
        b_scale=config.cost_flow.scale, b_exp=config.cost_flow.exponent,
        b_fast=_fast_code(config.cost_flow.exponent),
    )


def _new_acc(m: int) -> np.ndarray:
    acc = np.zeros((m, 8))
    acc[:, _XMIN] = np.inf
    acc[:, _XMAX] = -np.inf
    return acc


def _run(gen, config, th, x0s, signs, opts, record=False, every=0, chunk=200_000):
    x = np.array(x0s, dtype=float)
    if np.any(x <= 0):
        raise ValueError("initial states must be positive")
    signs = np.asarray(signs, dtype=np.int64)
    acc = _new_acc(len(x))
    kw = _kernel_args(config, th, opts.dt)
    n_steps = opts.n_steps
    events = []
    step = chunk if record else n_steps
    ev = np.empty((2 * step + 2, 4)) if record else np.empty((1, 4))
    buf = np.empty(min(n_steps, 1 << 16))
    buf2 = np.empty_like(buf)
    k0 = 0
    while k0 < n_steps:
        n = min(step, n_steps - k0)
        d1 = math.exp(-config.r1 * k0 * opts.dt)
        d2 = math.exp(-config.r2 * k0 * opts.dt)
        n_ev = _controlled_kernel(gen, n, k0, opts.dt, x, signs, kw["drift"], kw["vol"],
                                  kw["b11"], kw["b12"], kw["b21"], kw["b22"], kw["alpha"],
                                  kw["K1"], kw["kappa1"], kw["K2"], kw["kappa2"],
                                  kw["disc1"], kw["disc2"], d1, d2,
                                  kw["a_scale"], kw["a_exp"], kw["a_fast"],
                                  kw["b_scale"], kw["b_exp"], kw["b_fast"],
                                  acc, record, every, record, ev, buf, buf2)
        if n_ev < 0:
            j = -1 - n_ev
            raise SimulationError(f"state {j} became invalid ({x[j]!r}) near t={k0 * opts.dt:.4g}")
        if record:
            events.append(ev[:n_ev].copy())
        k0 += n
    acc[:, _FLOW1] *= opts.dt
    acc[:, _FLOW2] *= opts.dt
    return acc, (np.concatenate(events) if record else None)


def simulate_path(config: GameConfig, thresholds: Thresholds, x0: float, opts: SimOptions,
                  rng_stream: np.random.Generator | None = None, record_every: int = 0) -> PathRecord:
    """One controlled path with its full intervention history.

    ``record_every > 0`` additionally logs the state every that many steps.
    """
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    gen = rng_stream if rng_stream is not None else _streams(opts.seed, 1)[0]
    acc, ev = _run(gen, config, thresholds, [x0], [1], opts, record=True, every=record_every)
    firm = ev[ev[:, 1] == EV_FIRM]
    gov = ev[ev[:, 1] == EV_GOV]
    xi = (firm[:, 3] - firm[:, 2]) / config.alpha
    eta = gov[:, 2] - gov[:, 3]
    c1 = np.exp(-config.r1 * firm[:, 0]) * (config.K1 + config.kappa1 * xi)
    c2 = np.exp(-config.r2 * gov[:, 0]) * (config.K2 + config.kappa2 * eta)
    a = acc[0]
    return PathRecord(
        x0=float(x0), jump_times_firm=firm[:, 0], jump_times_gov=gov[:, 0], xi=xi, eta=eta,
        discounted_costs_firm=c1, discounted_costs_gov=c2,
        discounted_profit=float(a[_FLOW1] - a[_COST1]),
        discounted_cost=float(a[_FLOW2] + a[_COST2]),
        truncated=True, min_state=float(a[_XMIN]), max_state=float(a[_XMAX]), events=ev,
    )


def truncation_bounds(config: GameConfig, thresholds: Thresholds, horizon: float):
    """Tail bounds ``exp(-r H) * sup_{[b11, b22]} flow / r`` for firm and government."""
    hi = thresholds.b22
    t1 = math.exp(-config.r1 * horizon) * float(config.pi(hi)) / config.r1
    t2 = math.exp(-config.r2 * horizon) * float(config.cost_flow(hi)) / config.r2
    return t1, t2


def _summarise(samples: np.ndarray, n: int, bound: float) -> PayoffEstimate:
    k = samples.shape[0]
    se = float(samples.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    return PayoffEstimate(float(samples.mean()), se, n, bound)


def estimate_payoffs_many(config: GameConfig, thresholds: Thresholds, x0s: Sequence[float],
                          opts: SimOptions, progress=None) -> list:
    """Payoff estimates for several starting points driven by common random numbers.

    Returns one ``(firm, government)`` pair of :class:`PayoffEstimate` per
    starting point.  Each starting point on its own is an ordinary Monte-Carlo
    estimate; only the cross-correlation between them is affected.
    """
    x0s = [float(v) for v in x0s]
    if any(v <= 0 for v in x0s):
        raise ValueError("initial states must be positive")
    n_sign = 2 if opts.antithetic else 1
    states = np.repeat(x0s, n_sign)
    signs = np.tile([1, -1][:n_sign], len(x0s))
    n_groups = opts.n_groups
    firm = np.empty((n_groups, len(x0s)))
    gov = np.empty((n_groups, len(x0s)))
    for g, gen in enumerate(_streams(opts.seed, n_groups)):
        acc, _ = _run(gen, config, thresholds, states, signs, opts)
        f = (acc[:, _FLOW1] - acc[:, _COST1]).reshape(len(x0s), n_sign).mean(axis=1)
        c = (acc[:, _FLOW2] + acc[:, _COST2]).reshape(len(x0s), n_sign).mean(axis=1)
        firm[g], gov[g] = f, c
        if progress is not None:
            progress(g + 1, n_groups)
    t1, t2 = truncation_bounds(config, thresholds, opts.horizon)
    n = n_groups * n_sign
    return [(_summarise(firm[:, i], n, t1), _summarise(gov[:, i], n, t2)) for i in range(len(x0s))]


def estimate_payoffs(config: GameConfig, thresholds: Thresholds, x0: float, opts: SimOptions):
    """Sample means and standard errors of both players' discounted payoffs from ``x0``."""
    return estimate_payoffs_many(config, thresholds, [x0], opts)[0]


def estimate_transition_weights(config: GameConfig, thresholds: Thresholds, x0: float, rate: float,
                                opts: SimOptions) -> TransitionEstimate:
    """Monte-Carlo ``E[exp(-r tau_lo) 1{tau_lo < tau_hi}]`` and its mirror, uncontrolled process.

    Paths that have not left ``(b11, b22)`` by the horizon contribute zero.
    """
    if not thresholds.b11 < x0 < thresholds.b22:
        raise ValueError("x0 must lie strictly between b11 and b22")
    mu, sig = config.gbm.mu, config.gbm.sigma
    drift, vol = (mu - 0.5 * sig * sig) * opts.dt, sig * math.sqrt(opts.dt)
    n_sign = 2 if opts.antithetic else 1
    signs = np.array([1, -1][:n_sign], dtype=np.int64)
    samples = np.empty((opts.n_groups, 2))
    for g, gen in enumerate(_streams(opts.seed, opts.n_groups)):
        x = np.full(n_sign, float(x0))
        out = np.zeros((n_sign, 2))
        _hitting_kernel(gen, opts.n_steps, opts.dt, x, signs, drift, vol,
                        thresholds.b11, thresholds.b22, rate, out)
        samples[g] = out.mean(axis=0)
    k = samples.shape[0]
    se = samples.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(2)
    m = samples.mean(axis=0)
    return TransitionEstimate(float(m[0]), float(se[0]), float(m[1]), float(se[1]), k * n_sign)


def admissibility_stats(records: Sequence[PathRecord]) -> dict:
    """Empirical witnesses for admissibility over a finite horizon."""
    if not records:
        raise ValueError("need at least one path record")
    n1 = np.array([len(r.jump_times_firm) for r in records])
    n2 = np.array([len(r.jump_times_gov) for r in records])
    increasing = all(np.all(np.diff(r.jump_times_firm) > 0) and np.all(np.diff(r.jump_times_gov) > 0)
                     for r in records)
    return {
        "n_paths": len(records),
        "interventions_firm": n1,
        "interventions_gov": n2,
        "min_state": min(r.min_state for r in records),
        "max_state": max(r.max_state for r in records),
        "jump_times_increasing": bool(increasing),
        "partial_sums_firm": [np.cumsum(r.discounted_costs_firm) for r in records],
        "partial_sums_gov": [np.cumsum(r.discounted_costs_gov) for r in records],
        "total_discounted_cost_firm": float(sum(r.discounted_costs_firm.sum() for r in records)),
        "total_discounted_cost_gov": float(sum(r.discounted_costs_gov.sum() for r in records)),
        "note": "finite-horizon surrogate for the infinite-horizon requirements",
    }


def write_path_events(record: PathRecord, fh) -> None:
    """Delimited dump: ``time,type,state_pre,state_post``, one row per event."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time", "type", "state_pre", "state_post"])
    for t, typ, pre, post in record.events:
        w.writerow([repr(float(t)), EVENT_NAMES[int(typ)], repr(float(pre)), repr(float(post))])
