"""Analytic majorants of |omega_l(t)| and the nadir estimate G(r).

Writing ``lam = a + ib`` and ``f(t) = exp(a t) cos(b t) - 1`` per mode:

* ``m1``: ``sum_j |y_lj| exp(a_j t) + |omega_star_l|``
* ``m2``: ``sum_j |Im y_lj| exp(a_j t) min(|b_j| t, 1)
          + sum_j |Re y_lj| min(|f_j'(t1_j)| t, |f_j(t0_j) - 1|)``

where ``t0_j`` maximizes ``|f_j - 1|`` and ``t1_j`` maximizes ``|f_j'|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajectory import STABILITY_TOL, AnalyticTrajectory

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# decay horizon used as the finite stand-in for t -> inf on real modes
_REAL_MODE_DECAYS = 40.0
_SWEEP_POINTS = 257


@dataclass(frozen=True)
class ModeCriticalTimes:
    t0: float
    t1: float
    f_shift_max: float  # |f(t0) - 1|
    df_max: float  # |f'(t1)|


def mode_f(lam: complex, t):
    return np.exp(lam.real * np.asarray(t)) * np.cos(lam.imag * np.asarray(t)) - 1.0


def mode_df(lam: complex, t):
    a, b = lam.real, lam.imag
    t = np.asarray(t)
    return np.exp(a * t) * (a * np.cos(b * t) - b * np.sin(b * t))


def critical_times(lam: complex) -> ModeCriticalTimes:
    """Maximizers of ``|f - 1|`` and ``|f'|`` for one mode (``Re lam <= 0``)."""
    t0, t1, f_shift_max, df_max = critical_times_array(np.array([complex(lam)]))
    return ModeCriticalTimes(float(t0[0]), float(t1[0]), float(f_shift_max[0]), float(df_max[0]))


def critical_times_array(lam) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`critical_times`; returns ``(t0, t1, |f(t0) - 1|, |f'(t1)|)``."""
    lam = np.asarray(lam, dtype=complex)
    if np.any(lam.real > STABILITY_TOL):
        raise ValueError("critical times need Re lam <= 0")
    a = np.minimum(lam.real, 0.0)
    b = np.abs(lam.imag)  # f is even in Im lam
    real = b == 0.0
    bs = np.where(real, 1.0, b)

    # near-real modes push times towards infinity; results are patched below
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # deepest trough of exp(a t) cos(b t) is the first one; cos(b t0) = -cos(theta)
        theta = np.arctan(-a / bs)
        t0 = (np.pi - theta) / bs
        f_shift_max = 2.0 + np.exp(np.where(a == 0, 0.0, a * t0)) * np.cos(theta)
        # real modes: |exp(a t) - 2| -> 2 as t -> inf (exactly 1 when lam = 0)
        t0 = np.where(real, np.where(a < 0, _REAL_MODE_DECAYS / -a, 0.0), t0)
        f_shift_max = np.where(real, np.where(a < 0, 2.0, 1.0), f_shift_max)

        # f'' = 0 where b t + psi = pi/2 + k pi; with a decaying envelope the
        # first two roots and t = 0 are the only candidates; the arctan-form
        # roots and a one-period sweep are added as a safeguard
        psi = np.arctan2(2 * a * b, a * a - b * b)
        root = np.mod((np.pi / 2 - psi), np.pi) / bs
        alt = np.arctan((a * a - b * b) / (2 * a * bs)) / bs
        alt = np.where(np.isfinite(alt), alt, 0.0)
        sweep = np.multiply.outer(2 * np.pi / bs, np.linspace(0.0, 1.0, _SWEEP_POINTS))
        candidates = np.column_stack(
            [np.zeros_like(a), root, root + np.pi / bs, np.abs(alt), np.abs(alt) + np.pi / bs, sweep]
        )
        candidates = np.where(real[:, None], 0.0, candidates)
        values = np.abs(
            np.exp(a[:, None] * candidates)
            * (a[:, None] * np.cos(b[:, None] * candidates) - b[:, None] * np.sin(b[:, None] * candidates))
        )
    # nearly real modes overflow the sweep; |f'| <= |lam| is always sound
    broken = ~np.all(np.isfinite(values), axis=1)
    values[broken] = 0.0
    values[broken, 0] = np.abs(lam[broken])
    candidates[broken] = 0.0
    best = np.argmax(values, axis=1)
    rows = np.arange(lam.size)
    return t0, candidates[rows, best], f_shift_max, values[rows, best]


@dataclass(frozen=True)
class MajorantProfile:
    abs_y: np.ndarray
    abs_re_y: np.ndarray
    abs_im_y: np.ndarray
    re_lam: np.ndarray
    abs_im_lam: np.ndarray
    f_shift_max: np.ndarray
    df_max: np.ndarray
    abs_omega_star: np.ndarray
    horizon: float

    @classmethod
    def from_trajectory(cls, traj: AnalyticTrajectory) -> "MajorantProfile":
        _, _, f_shift_max, df_max = critical_times_array(traj.exponents)
        y = traj.coeffs
        return cls(
            abs_y=np.abs(y),
            abs_re_y=np.abs(y.real),
            abs_im_y=np.abs(y.imag),
            re_lam=np.minimum(traj.exponents.real, 0.0),
            abs_im_lam=np.abs(traj.exponents.imag),
            f_shift_max=f_shift_max,
            df_max=df_max,
            abs_omega_star=np.abs(traj.offset),
            horizon=traj.horizon,
        )

    @property
    def n(self) -> int:
        return self.abs_y.shape[0]


def majorant1(profile: MajorantProfile, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    decay = np.exp(np.multiply.outer(profile.re_lam, t))
    star = profile.abs_omega_star.reshape((-1,) + (1,) * t.ndim)
    return np.tensordot(profile.abs_y, decay, axes=(1, 0)) + star


def _majorant2_rows(profile: MajorantProfile, rows, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    decay = np.exp(np.multiply.outer(profile.re_lam, t))
    sine = decay * np.minimum(np.multiply.outer(profile.abs_im_lam, t), 1.0)
    cosine = np.minimum(np.multiply.outer(profile.df_max, t), profile.f_shift_max.reshape((-1,) + (1,) * t.ndim))
    return np.tensordot(profile.abs_im_y[rows], sine, axes=(-1, 0)) + np.tensordot(
        profile.abs_re_y[rows], cosine, axes=(-1, 0)
    )


def majorant2(profile: MajorantProfile, l: int, t):
    """Second majorant for bus ``l`` (0-based)."""
    value = _majorant2_rows(profile, l, t)
    return float(value) if np.ndim(value) == 0 else value


def majorant2_all(profile: MajorantProfile, t) -> np.ndarray:
    return _majorant2_rows(profile, slice(None), t)


def majorant(profile: MajorantProfile, t) -> np.ndarray:
    return np.minimum(majorant1(profile, t), majorant2_all(profile, t))


def golden_section_max(f, a, b, tol: float):
    """Maximize unimodal ``f`` on ``[a, b]``; returns ``(t, f(t))``.

    ``a`` and ``b`` may be arrays of brackets searched in lockstep, in which
    case ``f`` maps an array of times to the matching array of values.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = np.asarray(f(c), dtype=float), np.asarray(f(d), dtype=float)
    while np.max(b - a) > tol:
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, b - INV_PHI * (b - a), d)
        d_new = np.where(left, c, a + INV_PHI * (b - a))
        probe = np.where(left, c_new, d_new)
        fp = np.asarray(f(probe), dtype=float)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_new, d_new
    t = np.where(fc >= fd, c, d)
    v = np.maximum(fc, fd)
    if t.ndim == 0:
        return float(t), float(v)
    return t, v


def bus_majorant(profile: MajorantProfile, t) -> np.ndarray:
    """``M_l`` evaluated row-wise: ``t`` has shape ``(n, ...)`` and row ``l`` is bus ``l``."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(t[..., None] * profile.re_lam)
    extra = t.ndim - 1
    star = profile.abs_omega_star.reshape((-1,) + (1,) * extra)
    m1 = np.einsum("lk,l...k->l...", profile.abs_y, decay) + star
    sine = decay * np.minimum(t[..., None] * profile.abs_im_lam, 1.0)
    cosine = np.minimum(t[..., None] * profile.df_max, profile.f_shift_max)
    m2 = np.einsum("lk,l...k->l...", profile.abs_im_y, sine) + np.einsum(
        "lk,l...k->l...", profile.abs_re_y, cosine
    )
    return np.minimum(m1, m2)


def maximize_rows(f, rows: int, horizon: float, scan_points: int = 64, rel_tol: float = 1e-4):
    """Maximize ``rows`` functions of time on ``[0, horizon]`` at once.

    ``f`` takes times of shape ``(rows, k)`` and returns values of the same
    shape. Each row is scanned on ``scan_points`` samples, then the bracket
    around its best sample is refined by golden section. Returns
    ``(values, times)``; values are never below the best scan sample.
    """
    grid = np.linspace(0.0, horizon, scan_points)
    coarse = np.asarray(f(np.broadcast_to(grid, (rows, scan_points))), dtype=float)
    k = np.argmax(coarse, axis=1)
    scan_best = coarse[np.arange(rows), k]
    lo = grid[np.maximum(k - 1, 0)]
    hi = grid[np.minimum(k + 1, scan_points - 1)]
    t_ref, v_ref = golden_section_max(lambda t: f(t[:, None])[:, 0], lo, hi, rel_tol * horizon)
    refined = v_ref > scan_best
    return np.where(refined, v_ref, scan_best), np.where(refined, t_ref, grid[k])


@dataclass(frozen=True)
class Estimate:
    value: float
    bus: int
    time: float
    per_bus: np.ndarray
    per_bus_time: np.ndarray


def estimate_G(profile: MajorantProfile, scan_points: int = 64, rel_tol: float = 1e-4) -> Estimate:
    """``max_l max_{t in [0, T]} M_l(t)`` via coarse scan plus golden-section refinement."""
    if profile.horizon <= 0:
        raise ValueError("horizon must be positive")
    values, times = maximize_rows(
        lambda t: bus_majorant(profile, t), profile.n, profile.horizon, scan_points, rel_tol
    )
    l_best = int(np.argmax(values))
    return Estimate(float(values[l_best]), l_best, float(times[l_best]), values, times)
