"""Exact nadir F(r) by d.c. branch and bound on each bus trajectory.

``omega_l = h_l - q_l`` with ``q_l = k_l t^2 / 2`` and ``h_l`` convex because
``|omega_l''| <= k_l``. On ``[a, b]`` the chord of ``h_l`` minus ``q_l`` is a
concave overestimator of ``omega_l``; the same construction applied to
``-omega_l`` bounds the other sign.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .netmodel import NetworkModel
from .spectral import DefectiveMatrixError, stability_margin
from .trajectory import (
    DEFAULT_HORIZON,
    STABILITY_TOL,
    AnalyticTrajectory,
    analyze,
    curvature_bounds,
)

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-4
MAX_NODES = 10**6


@dataclass(frozen=True)
class DcSplit:
    traj: AnalyticTrajectory
    k: np.ndarray

    @classmethod
    def from_trajectory(cls, traj: AnalyticTrajectory) -> "DcSplit":
        return cls(traj, curvature_bounds(traj))

    def omega(self, l: int, t) -> np.ndarray:
        return self.traj.bus(l, t)

    def q(self, l: int, t) -> np.ndarray:
        return 0.5 * self.k[l] * np.asarray(t, dtype=float) ** 2

    def h(self, l: int, t) -> np.ndarray:
        return self.omega(l, t) + self.q(l, t)


def _chord_bound(fa, fb, a, b, k):
    """Max over [a, b] of chord(h) - q given endpoint values of omega (vectorized)."""
    w = b - a
    slope = (fb - fa) / w
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(k > 0, 0.5 * w + slope / np.where(k > 0, k, 1.0), np.where(fb > fa, w, 0.0))
    s = np.clip(s, 0.0, w)
    return fa + slope * s + 0.5 * k * s * (w - s)


def _node_bound(fa, fb, a, b, k):
    return np.maximum(_chord_bound(fa, fb, a, b, k), _chord_bound(-fa, -fb, a, b, k))


def interval_upper_bound(split: DcSplit, l: int, a: float, b: float) -> float:
    """Sound upper bound on ``max_{[a, b]} |omega_l|``."""
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    fa, fb = split.omega(l, np.array([a, b]))
    return float(_node_bound(fa, fb, a, b, split.k[l]))


@dataclass
class BusMaximum:
    value: float
    time: float
    nodes: int
    gap: float
    converged: bool
    explored: list = field(default_factory=list, repr=False)
    incumbents: list = field(default_factory=list, repr=False)


def global_max_abs(
    split: DcSplit,
    l: int,
    eps: float = DEFAULT_EPS,
    horizon: float | None = None,
    max_nodes: int = MAX_NODES,
    record: bool = False,
) -> BusMaximum:
    """``max_{t in [0, T]} |omega_l(t)|`` to absolute accuracy ``eps``.

    All nodes whose bound exceeds ``incumbent + eps`` are bisected together
    each round, which keeps the work vectorized; pruning is identical to a
    best-first search that runs to completion.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    T = split.traj.horizon if horizon is None else horizon
    k = split.k[l]
    a = np.array([0.0])
    b = np.array([T])
    fa, fb = split.omega(l, np.array([0.0, T]))
    fa, fb = np.array([fa]), np.array([fb])
    if abs(fa[0]) >= abs(fb[0]):
        best, best_t = abs(fa[0]), 0.0
    else:
        best, best_t = abs(fb[0]), T
    nodes = 1
    explored, incumbents = [], [best]
    gap = 0.0
    while a.size:
        ub = _node_bound(fa, fb, a, b, k)
        if record:
            explored.extend(zip(a.tolist(), b.tolist(), ub.tolist()))
        keep = ub > best + eps
        a, b, fa, fb, ub = a[keep], b[keep], fa[keep], fb[keep], ub[keep]
        if not a.size:
            break
        if nodes + 2 * a.size > max_nodes:
            gap = float(ub.max() - best)
            log.warning("bus %d: node cap %d reached, gap %.3g", l + 1, max_nodes, gap)
            return BusMaximum(best, best_t, nodes, gap, False, explored, incumbents)
        mid = 0.5 * (a + b)
        fm = split.omega(l, mid)
        i = int(np.argmax(np.abs(fm)))
        if abs(fm[i]) > best:
            best, best_t = float(abs(fm[i])), float(mid[i])
        if record:
            incumbents.append(best)
        nodes += 2 * a.size
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
    return BusMaximum(float(best), float(best_t), nodes, gap, True, explored, incumbents)


@dataclass(frozen=True)
class NadirResult:
    value: float
    per_bus: tuple[float, ...] = ()
    times: tuple[float, ...] = ()
    nodes: tuple[int, ...] = ()
    converged: bool = True

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.value)


INFEASIBLE = NadirResult(math.inf, converged=False)


def nadir_of_trajectory(traj: AnalyticTrajectory, eps: float = DEFAULT_EPS) -> NadirResult:
    split = DcSplit.from_trajectory(traj)
    results = [global_max_abs(split, l, eps) for l in range(traj.n)]
    return NadirResult(
        value=max(r.value for r in results),
        per_bus=tuple(r.value for r in results),
        times=tuple(r.time for r in results),
        nodes=tuple(r.nodes for r in results),
        converged=all(r.converged for r in results),
    )


def nadir_F(
    model: NetworkModel,
    r,
    eps: float = DEFAULT_EPS,
    horizon: float = DEFAULT_HORIZON,
) -> NadirResult:
    """Largest absolute frequency deviation over buses and ``[0, horizon]``.

    Unstable spectra and non-diagonalizable systems give ``inf``.
    """
    try:
        an = analyze(model, r, horizon)
    except DefectiveMatrixError as exc:
        log.info("nadir: %s", exc)
        return INFEASIBLE
    if stability_margin(an.spectrum) > STABILITY_TOL:
        return INFEASIBLE
    return nadir_of_trajectory(an.trajectory, eps)
