"""Analytic frequency trajectory, its curvature bound and an RK4 reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netmodel import NetworkModel, SystemRealization, assemble_system
from .spectral import RegularizedSpectrum, SpectralData, eigendecompose, regularize

DEFAULT_HORIZON = 100.0
STABILITY_TOL = 1e-9


class UnstableSpectrumError(ArithmeticError):
    pass


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class AnalyticTrajectory:
    """``omega_l(t) = Re(sum_j coeffs[l, j] exp(exponents[j] t)) - offset[l]``."""

    coeffs: np.ndarray
    exponents: np.ndarray
    offset: np.ndarray
    horizon: float = DEFAULT_HORIZON

    @classmethod
    def from_spectrum(cls, reg: RegularizedSpectrum, horizon: float = DEFAULT_HORIZON):
        return cls(reg.Y_N.copy(), reg.lam_bar.copy(), reg.omega_star.copy(), float(horizon))

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def scale(self) -> float:
        return max(1.0, float(np.abs(self.coeffs).sum(axis=1).max(initial=0.0)))

    def modal_sum(self, t) -> np.ndarray:
        """Complex modal sum, shape ``(n,) + shape(t)``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(np.multiply.outer(self.exponents, t))
        return np.tensordot(self.coeffs, phase, axes=(1, 0))

    def bus(self, l: int, t) -> np.ndarray:
        """Real frequency deviation of bus ``l`` (0-based), vectorized over ``t``."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(np.multiply.outer(t, self.exponents))
        return (phase @ self.coeffs[l]).real - self.offset[l]


@dataclass(frozen=True)
class Analysis:
    """Everything derived from one gain vector."""

    model: NetworkModel
    r: np.ndarray
    system: SystemRealization
    spectrum: SpectralData
    regularized: RegularizedSpectrum
    trajectory: AnalyticTrajectory


def analyze(model: NetworkModel, r, horizon: float = DEFAULT_HORIZON) -> Analysis:
    r = np.asarray(r, dtype=float)
    system = assemble_system(model, r)
    spectrum = eigendecompose(system)
    reg = regularize(spectrum, system)
    return Analysis(model, r, system, spectrum, reg, AnalyticTrajectory.from_spectrum(reg, horizon))


def omega_at(traj: AnalyticTrajectory, t, check_real: bool = True) -> np.ndarray:
    """Frequency deviations at time(s) ``t``; shape ``(n,)`` or ``(n, len(t))``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    total = traj.modal_sum(t)
    if check_real:
        # conjugate modes must cancel; a residue means a pairing bug
        decay = np.exp(np.multiply.outer(traj.exponents.real, np.asarray(t, dtype=float)))
        envelope = np.tensordot(np.abs(traj.coeffs), decay, axes=(1, 0))
        excess = np.abs(total.imag) - 1e-9 * np.maximum(envelope, 1.0)
        if np.any(excess > 0):
            raise ArithmeticError(f"modal sum has imaginary residue {np.abs(total.imag).max():.3g}")
    offset = traj.offset.reshape((-1,) + (1,) * np.ndim(t))
    return total.real - offset


def omega_second_derivative(traj: AnalyticTrajectory, l: int, t) -> np.ndarray | float:
    """Exact second time derivative of ``omega_l`` (``l`` is 0-based)."""
    t = np.asarray(t, dtype=float)
    lam = traj.exponents
    phase = np.exp(np.multiply.outer(t, lam))
    value = (phase @ (traj.coeffs[l] * lam**2)).real
    return float(value) if value.ndim == 0 else value


def curvature_bound(traj: AnalyticTrajectory, l: int) -> float:
    """Horizon-free bound ``k_l >= |omega_l''(t)|`` for all ``t >= 0``."""
    a, b = traj.exponents.real, traj.exponents.imag
    if a.max(initial=-math.inf) > STABILITY_TOL:
        raise UnstableSpectrumError(f"mode with real part {a.max():.3g} > 0")
    y = traj.coeffs[l]
    cos_part = a**2 * y.real - 2 * a * b * y.imag - b**2 * y.real
    sin_part = b**2 * y.imag - 2 * a * b * y.real - a**2 * y.imag
    return float(np.sum(np.hypot(cos_part, sin_part)))


def curvature_bounds(traj: AnalyticTrajectory) -> np.ndarray:
    return np.array([curvature_bound(traj, l) for l in range(traj.n)])


def _rk4_propagators(A: np.ndarray, P: np.ndarray, h: float):
    # one classical RK4 step on x' = A x + P is exactly x -> Phi x + psi
    I = np.eye(A.shape[0])
    hA = h * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = I + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    psi = h * (I + hA / 2 + hA2 / 6 + hA3 / 24) @ P
    return Phi, psi


def integrate_reference(sys: SystemRealization, t_grid, max_step: float | None = None) -> np.ndarray:
    """Fixed-step RK4 from ``x(0) = 0``; returns states of shape ``(len(t_grid), dim)``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0:
        raise ValueError("t_grid must be a 1-D grid starting at 0")
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be non-decreasing")
    A, P = np.asarray(sys.A), np.asarray(sys.P)
    norm = np.linalg.norm(A, np.inf)
    h_max = min(1e-3, 0.1 / norm) if norm > 0 else 1e-3
    if max_step is not None:
        h_max = min(h_max, max_step)

    out = np.empty((t_grid.size, A.shape[0]))
    x = np.zeros(A.shape[0])
    out[0] = x
    cache = {}
    for k in range(1, t_grid.size):
        span = t_grid[k] - t_grid[k - 1]
        if span > 0:
            steps = max(1, math.ceil(span / h_max - 1e-9))
            h = span / steps
            key = round(h, 15)
            if key not in cache:
                cache[key] = _rk4_propagators(A, P, h)
            Phi, psi = cache[key]
            with np.errstate(over="ignore", invalid="ignore"):
                for _ in range(steps):
                    x = Phi @ x + psi
            if not np.all(np.isfinite(x)):
                raise IntegrationError(f"state diverged before t = {t_grid[k]:g}")
        out[k] = x
    return out
