"""Droop gain tuning: Hooke-Jeeves pattern search on F(r) or G(r).

Infeasible gain vectors (negative gains, unstable or purely imaginary
modes, poorly damped oscillations) evaluate to ``inf``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .bounds import MajorantProfile, estimate_G
from .nadir import DEFAULT_EPS, nadir_of_trajectory
from .netmodel import NetworkModel
from .spectral import DefectiveMatrixError, oscillation_ratio, stability_margin
from .trajectory import DEFAULT_HORIZON, Analysis, analyze

log = logging.getLogger(__name__)

OBJECTIVES = ("F", "G")


class InfeasibleStartError(ValueError):
    pass


@dataclass(frozen=True)
class TuningConfig:
    objective: str = "G"
    xi: float = 0.01
    horizon: float = DEFAULT_HORIZON
    initial_step: float | None = None  # None: 0.25 * max(r0_l, 1) per coordinate
    shrink: float = 0.5
    min_step: float = 1e-3
    stability_tol: float = 1e-9
    eps: float = DEFAULT_EPS
    budget: int = 5000
    oscillation_aggregate: str = "min"
    improvement_tol: float = 1e-12

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        for name in ("xi", "horizon", "min_step", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.stability_tol < 0 or self.improvement_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.initial_step is not None and self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.oscillation_aggregate not in ("min", "max"):
            raise ValueError("oscillation_aggregate must be 'min' or 'max'")

    def with_objective(self, objective: str) -> "TuningConfig":
        return replace(self, objective=objective)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str | None = None
    margin: float = math.nan
    ratio: float = math.nan

    def __bool__(self) -> bool:
        return self.feasible


def _check(model: NetworkModel, r, config: TuningConfig) -> tuple[Feasibility, Analysis | None]:
    r = np.asarray(r, dtype=float)
    if r.shape != (model.n,):
        raise ValueError(f"gain vector has shape {r.shape}, expected ({model.n},)")
    negative = np.flatnonzero(r < 0)
    if negative.size:
        return Feasibility(False, f"negative gain at bus {negative[0] + 1}"), None
    try:
        an = analyze(model, r, config.horizon)
    except DefectiveMatrixError as exc:
        return Feasibility(False, f"defective system matrix: {exc}"), None
    return spectral_feasibility(an.spectrum.eigenvalues, an.spectrum.zero_threshold, config), an


def spectral_feasibility(eigenvalues, zero_threshold: float, config: TuningConfig = TuningConfig()) -> Feasibility:
    """Stability, no purely imaginary modes, and the oscillation-decay ratio."""
    lam = np.asarray(eigenvalues, dtype=complex)
    margin = stability_margin(lam, zero_threshold)
    ratio = oscillation_ratio(lam, config.oscillation_aggregate, zero_threshold)
    if margin > config.stability_tol:
        return Feasibility(False, f"stability violated: max Re lambda = {margin:.6g}", margin, ratio)
    imaginary = (np.abs(lam.real) <= config.stability_tol) & (np.abs(lam.imag) > zero_threshold)
    if imaginary.any():
        return Feasibility(False, "purely imaginary eigenvalue", margin, ratio)
    if ratio < config.xi:
        return Feasibility(False, f"oscillation ratio {ratio:.6g} below xi = {config.xi:g}", margin, ratio)
    return Feasibility(True, None, margin, ratio)


def feasibility(model: NetworkModel, r, config: TuningConfig = TuningConfig()) -> Feasibility:
    return _check(model, r, config)[0]


def evaluate_objective(model: NetworkModel, r, config: TuningConfig = TuningConfig()) -> float:
    """F(r) or G(r) per ``config.objective``; ``inf`` when infeasible."""
    feas, an = _check(model, r, config)
    if not feas:
        log.debug("r = %s infeasible: %s", np.asarray(r).tolist(), feas.reason)
        return math.inf
    if config.objective == "F":
        return nadir_of_trajectory(an.trajectory, config.eps).value
    return estimate_G(MajorantProfile.from_trajectory(an.trajectory)).value


@dataclass
class TuningResult:
    r_best: np.ndarray
    best_value: float
    trace: list[tuple[int, tuple[float, ...], float]]
    evaluations: int
    wall_time: float
    eval_times: list[float] = field(default_factory=list)
    budget_exhausted: bool = False
    diagnostics: Feasibility | None = None

    def best_so_far(self) -> list[float]:
        out, best = [], math.inf
        for _, _, value in self.trace:
            best = min(best, value)
            out.append(best)
        return out


class _Recorder:
    """Memoized objective that logs every distinct evaluation."""

    def __init__(self, objective: Callable[[np.ndarray], float], budget: int):
        self.objective = objective
        self.budget = budget
        self.cache: dict[tuple[float, ...], float] = {}
        self.trace: list[tuple[int, tuple[float, ...], float]] = []
        self.times: list[float] = []

    @property
    def exhausted(self) -> bool:
        return len(self.trace) >= self.budget

    def __call__(self, x: np.ndarray) -> float:
        key = tuple(float(v) for v in x)
        if key in self.cache:
            return self.cache[key]
        if self.exhausted:
            return math.inf
        start = time.perf_counter()
        value = float(self.objective(np.array(key)))
        self.times.append(time.perf_counter() - start)
        self.cache[key] = value
        self.trace.append((len(self.trace), key, value))
        return value


def hooke_jeeves(
    objective: Callable[[np.ndarray], float],
    r0,
    config: TuningConfig = TuningConfig(),
) -> TuningResult:
    """Minimize ``objective`` from ``r0`` by exploratory and pattern moves."""
    start = time.perf_counter()
    r0 = np.asarray(r0, dtype=float)
    f = _Recorder(objective, config.budget)
    tol = config.improvement_tol
    if config.initial_step is None:
        step = 0.25 * np.maximum(np.abs(r0), 1.0)
    else:
        step = np.full(r0.shape, float(config.initial_step))

    base = r0.copy()
    f_base = f(base)
    if not math.isfinite(f_base):
        raise InfeasibleStartError("objective is infinite at the starting point")

    def explore(x, fx):
        x = x.copy()
        for i in range(x.size):
            for direction in (1.0, -1.0):
                trial = x.copy()
                trial[i] += direction * step[i]
                ft = f(trial)
                if ft < fx - tol:
                    x, fx = trial, ft
                    break
        return x, fx

    while not f.exhausted:
        x, fx = explore(base, f_base)
        if fx < f_base - tol:
            # pattern moves while they keep paying off
            while not f.exhausted:
                pattern = x + (x - base)
                base, f_base = x, fx
                xp, fp = explore(pattern, f(pattern))
                if fp < f_base - tol:
                    x, fx = xp, fp
                else:
                    break
            continue
        step = step * config.shrink
        if np.all(step < config.min_step):
            break

    finite = [(v, i) for i, (_, _, v) in enumerate(f.trace) if math.isfinite(v)]
    best_value, best_index = min(finite)
    return TuningResult(
        r_best=np.array(f.trace[best_index][1]),
        best_value=best_value,
        trace=f.trace,
        evaluations=len(f.trace),
        wall_time=time.perf_counter() - start,
        eval_times=f.times,
        budget_exhausted=f.exhausted,
    )


def minimize_nadir(model: NetworkModel, config: TuningConfig = TuningConfig(), r0=None) -> TuningResult:
    """Tune droop gains starting from the model's default gains (or ``r0``)."""
    r0 = model.default_gains() if r0 is None else np.asarray(r0, dtype=float)
    start_feas = feasibility(model, r0, config)
    if not start_feas:
        raise InfeasibleStartError(f"starting gains are infeasible: {start_feas.reason}")
    result = hooke_jeeves(lambda r: evaluate_objective(model, r, config), r0, config)
    result.diagnostics = feasibility(model, result.r_best, config)
    if result.budget_exhausted:
        log.warning("evaluation budget of %d exhausted", config.budget)
    return result
