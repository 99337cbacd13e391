"""Run reports (JSON) and comparative-statics sweeps (delimited tables)."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from .diffusion import GameConfig, IntegrabilityError, InvalidParameterError, check_integrability
from .solver import (SolveResult, SolverError, SolverOptions, default_multistart_grid,
                     multistart_solve, solve)
from .values import (REFERENCE_THRESHOLDS, DegenerateThresholds, InvalidThresholds, Thresholds,
                     corner_values)
from .verification import VerificationReport, verify

log = logging.getLogger(__name__)

REPORT_VERSION = 1
SWEEP_PARAMETERS = ("sigma", "mu", "K1", "kappa1", "K2", "kappa2", "r1", "r2", "a", "b", "alpha", "beta")
# Ranges over which the benchmark root is a good starting point.
_WARM_RANGES = {"sigma": (0.19, 0.22), "mu": (0.01, 0.025), "K1": (0.5, 1.0)}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _thr_dict(th: Thresholds) -> dict:
    return dict(zip(("b11", "b12", "b21", "b22"), th.as_tuple()))


@dataclass
class RunReport:
    """Everything needed to rerun and audit one solve.  JSON-only payload."""
    config: dict
    thresholds: dict | None
    corners: dict | None
    verification: dict | None
    solver: dict
    status: str
    exit_code: int
    started: str
    finished: str
    monte_carlo: dict | None = None
    messages: list = field(default_factory=list)
    version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def game_config(self) -> GameConfig:
        return GameConfig.from_dict(self.config)

    def solved_thresholds(self) -> Thresholds | None:
        if self.thresholds is None:
            return None
        return Thresholds(**self.thresholds)


def _trace_summary(res: SolveResult) -> dict:
    return {
        "iterations": res.iterations,
        "residual_norm": res.residual_norm,
        "norms": [t[2] for t in res.trace],
        "steps": [t[3] for t in res.trace],
        "initial": list(res.trace[0][1]),
    }


def solve_and_verify(config: GameConfig, initial: Thresholds | None = None,
                     opts: SolverOptions | None = None, n_points: int = 10_000,
                     multistart: bool = False) -> tuple[RunReport, SolveResult | None, VerificationReport | None]:
    """Solve, verify and package.  Exit code: 0 verified, 2 unverified root, 3 failure."""
    opts = opts or SolverOptions()
    started = _now()
    t0 = time.perf_counter()
    messages = []
    res = vr = None
    try:
        start = None if multistart else (initial or REFERENCE_THRESHOLDS)
        res, status = _solve_point(config, start, opts)
        if status != "ok":
            messages.append(status)
    except (SolverError, IntegrabilityError, DegenerateThresholds, InvalidThresholds) as exc:
        messages.append(f"{type(exc).__name__}: {exc}")
        solver = {"error": str(exc), "seconds": time.perf_counter() - t0}
        best = getattr(exc, "best", None)
        if best is not None:
            solver["best"] = _thr_dict(best)
            solver["best_norm"] = getattr(exc, "best_norm", None)
        rep = RunReport(config.to_dict(), None, None, None, solver, "failed", 3, started, _now(),
                        messages=messages)
        return rep, None, None
    solver = {**_trace_summary(res), "seconds": time.perf_counter() - t0, "tol": opts.tol}
    th = res.thresholds
    corners = corner_values(config, th)
    vr = verify(config, th, n_points=n_points)
    code = 0 if vr.passed else 2
    if not vr.passed:
        messages.append("failed conditions: " + ", ".join(vr.failed()))
    rep = RunReport(config.to_dict(), _thr_dict(th), corners._asdict(), vr.to_dict(), solver,
                    "verified" if vr.passed else "unverified", code, started, _now(),
                    messages=messages)
    return rep, res, vr


def monte_carlo_block(config: GameConfig, th: Thresholds, x0s=(0.2, 0.3, 0.5), n_paths: int = 20_000,
                      dt: float = 1e-4, horizon: float = 300.0, seed: int = 0, antithetic: bool = True,
                      progress=None) -> dict:
    """Compare analytic values with Monte-Carlo estimates at several starting points."""
    from .montecarlo import SimOptions, estimate_payoffs_many
    from .values import EquilibriumValues, Player

    opts = SimOptions(dt=dt, horizon=horizon, n_paths=n_paths, seed=seed, antithetic=antithetic)
    ev = EquilibriumValues.build(config, th)
    t0 = time.perf_counter()
    ests = estimate_payoffs_many(config, th, x0s, opts, progress=progress)
    rows = []
    for x0, (f, g) in zip(x0s, ests):
        v1, v2 = float(ev.value(Player.FIRM, x0)), float(ev.value(Player.GOVERNMENT, x0))
        z1, z2 = (f.mean - v1) / f.std_error, (g.mean - v2) / g.std_error
        rows.append({
            "x0": float(x0), "v1": v1, "v1_mc": f.mean, "v1_se": f.std_error, "v1_z": z1,
            "v2": v2, "v2_mc": g.mean, "v2_se": g.std_error, "v2_z": z2,
            "truncation_firm": f.truncation_bound, "truncation_gov": g.truncation_bound,
            "agree": bool(abs(z1) <= 3 and abs(z2) <= 3),
        })
    return {"options": asdict(opts), "rows": rows, "agree": all(r["agree"] for r in rows),
            "seconds": time.perf_counter() - t0}


# --- sweeps -------------------------------------------------------------------

SWEEP_COLUMNS = ("b11", "b12", "b21", "b22", "firm_size", "gov_size", "verified", "status")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    lo: float
    hi: float
    steps: int
    warm_start: bool = True

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"cannot sweep {self.parameter!r}; choose from {', '.join(SWEEP_PARAMETERS)}")
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.steps < 2:
            raise ValueError("need steps >= 2")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


@dataclass
class SweepRow:
    value: float
    thresholds: Thresholds | None
    verified: bool
    status: str
    iterations: int = 0

    def as_list(self) -> list:
        if self.thresholds is None:
            nums = [math.nan] * 6
        else:
            th = self.thresholds
            nums = [*th.as_tuple(), th.firm_size, th.gov_size]
        return [self.value, *nums, int(self.verified), self.status]


def _default_start(spec: SweepSpec) -> Thresholds | None:
    rng = _WARM_RANGES.get(spec.parameter)
    if rng is not None and rng[0] - 1e-12 <= spec.lo and spec.hi <= rng[1] + 1e-12:
        return REFERENCE_THRESHOLDS
    return None


def _solve_point(cfg, start, opts) -> tuple[SolveResult, str]:
    """Newton from ``start``; on failure (or with no start) fall back to multistart."""
    if start is not None:
        try:
            return solve(cfg, start, opts), "ok"
        except (SolverError, DegenerateThresholds, InvalidThresholds) as exc:
            log.debug("start %s failed (%s); trying multistart", start.as_tuple(), exc)
    grid = opts.multistart_grid or default_multistart_grid()
    roots = multistart_solve(cfg, replace(opts, multistart_grid=grid))
    if not roots:
        raise SolverError("no root from multistart")
    if start is not None:
        roots.sort(key=lambda r: float(np.max(np.abs(r.thresholds.as_array() - start.as_array()))))
    status = "ok" if len(roots) == 1 else f"ok ({len(roots)} roots)"
    return solve(cfg, roots[0].thresholds, opts), status


def run_sweep(config: GameConfig, spec: SweepSpec, opts: SolverOptions | None = None,
              n_points: int = 2000, initial: Thresholds | None = None) -> list[SweepRow]:
    """One solve + verification per parameter value; failures are recorded, not raised."""
    opts = opts or SolverOptions()
    first = initial if initial is not None else _default_start(spec)
    prev = None
    rows = []
    for val in spec.values():
        val = float(val)
        try:
            cfg = config.with_param(spec.parameter, val)
        except InvalidParameterError as exc:
            rows.append(SweepRow(val, None, False, f"invalid: {exc}"))
            continue
        chk = check_integrability(cfg)
        if not chk.ok:
            rows.append(SweepRow(val, None, False, "integrability"))
            continue
        start = prev if (spec.warm_start and prev is not None) else first
        try:
            res, status = _solve_point(cfg, start, opts)
        except (SolverError, IntegrabilityError, DegenerateThresholds, InvalidThresholds) as exc:
            rows.append(SweepRow(val, None, False, f"failed: {exc}"))
            continue
        ok = verify(cfg, res.thresholds, n_points=n_points).passed
        rows.append(SweepRow(val, res.thresholds, ok, status if ok else "unverified", res.iterations))
        prev = res.thresholds
    return rows


def write_sweep(rows, parameter: str, fh, delimiter: str = ",") -> None:
    w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    w.writerow([parameter, *SWEEP_COLUMNS])
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row.as_list()])


def read_sweep(fh, delimiter: str = ",") -> tuple[str, dict]:
    """Parse a sweep table back into ``(parameter, {column: list})``."""
    r = csv.reader(fh, delimiter=delimiter)
    header = next(r)
    cols: dict[str, list] = {h: [] for h in header}
    for line in r:
        for h, v in zip(header, line):
            if h == "status":
                cols[h].append(v)
            elif h == "verified":
                cols[h].append(bool(int(v)))
            else:
                cols[h].append(float(v))
    return header[0], cols
