"""Eigen-decomposition of A(r) and the modal form of the frequency response.

With the zero eigenvalues of A replaced by -1 (which leaves the frequency
block of the solution unchanged) the response to a step disturbance is

    omega(t) = Re(Y_N exp(lam_bar t)) - omega_star,
    Y = S diag(1 / lam_bar) diag(S^-1 P),  omega_star = Y_N @ 1.

Note the sign convention: ``omega_star`` is the subtracted offset, so the
settled frequency deviation is ``-omega_star``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodel import NetworkModel, SystemRealization

ZERO_REL_TOL = 1e-7
RECONSTRUCTION_REL_TOL = 1e-8
MAX_CONDITION = 1e10


class DefectiveMatrixError(ArithmeticError):
    """A is (numerically) not diagonalizable."""


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    S: np.ndarray
    S_inv: np.ndarray
    condition: float
    residual: float
    zero_threshold: float


@dataclass(frozen=True)
class RegularizedSpectrum:
    lam_bar: np.ndarray
    zero_modes: np.ndarray
    Y: np.ndarray
    omega_star: np.ndarray
    n: int

    @property
    def Y_N(self) -> np.ndarray:
        return self.Y[: self.n]


def _sorted_eig(A: np.ndarray):
    lam, S = np.linalg.eig(A)
    order = np.lexsort((lam.imag, lam.real))
    return lam[order], S[:, order]


def decompose_matrix(A, zero_rel_tol: float = ZERO_REL_TOL) -> SpectralData:
    """Diagonalize a real square matrix, rejecting near-defective inputs."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    norm = np.linalg.norm(A, np.inf)
    lam, S = _sorted_eig(A)
    condition = float(np.linalg.cond(S))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise DefectiveMatrixError(f"eigenvector matrix condition {condition:.3g} exceeds {MAX_CONDITION:.0e}")
    S_inv = np.linalg.inv(S)
    residual = float(np.linalg.norm(S @ np.diag(lam) @ S_inv - A, np.inf))
    if residual > RECONSTRUCTION_REL_TOL * max(norm, 1e-300):
        raise DefectiveMatrixError(f"reconstruction residual {residual:.3g} too large")
    scale = max(norm, 1.0)
    # real input: spectrum must be closed under conjugation
    gap = np.abs(lam[:, None] - lam.conj()[None, :]).min(axis=1)
    if gap.max(initial=0.0) > 1e-6 * scale:
        raise DefectiveMatrixError("eigenvalues are not closed under conjugation")
    return SpectralData(
        eigenvalues=lam,
        S=S,
        S_inv=S_inv,
        condition=condition,
        residual=residual,
        zero_threshold=zero_rel_tol * norm,
    )


def eigendecompose(sys: SystemRealization) -> SpectralData:
    return decompose_matrix(sys.A)


def regularize(spec: SpectralData, sys: SystemRealization) -> RegularizedSpectrum:
    lam = spec.eigenvalues
    zero = np.abs(lam) <= spec.zero_threshold
    lam_bar = np.where(zero, -1.0 + 0j, lam)
    modal_load = spec.S_inv @ sys.P
    Y = spec.S * (modal_load / lam_bar)[None, :]
    # kernel vectors live in the line-flow block; drop their rounding noise
    Y[: sys.n, zero] = 0.0
    omega_star = Y[: sys.n].sum(axis=1).real
    return RegularizedSpectrum(
        lam_bar=lam_bar,
        zero_modes=np.flatnonzero(zero),
        Y=Y,
        omega_star=omega_star,
        n=sys.n,
    )


def equilibrium_frequency(model: NetworkModel, r) -> float:
    """Closed-form offset ``omega_star = -sum(pd) / sum(d + r)`` (uniform over buses)."""
    total = float(np.sum(model.d) + np.sum(r))
    if total <= 0:
        raise ValueError("sum of damping and gains must be positive")
    return -float(np.sum(model.pd)) / total


def _eigenvalues(spec) -> np.ndarray:
    if isinstance(spec, SpectralData):
        return spec.eigenvalues
    return np.asarray(spec, dtype=complex)


def _zero_threshold(spec, zero_threshold):
    if zero_threshold is not None:
        return zero_threshold
    return spec.zero_threshold if isinstance(spec, SpectralData) else 1e-12


def stability_margin(spec, zero_threshold: float | None = None) -> float:
    """Largest real part over the non-zero modes.

    Zero eigenvalues (line-flow circulation around meshes) are structural and
    never reach the frequencies, so they are excluded.
    """
    lam = _eigenvalues(spec)
    lam = lam[np.abs(lam) > _zero_threshold(spec, zero_threshold)]
    return float(np.max(lam.real, initial=-np.inf))


def oscillation_ratio(spec, aggregate: str = "min", zero_threshold: float | None = None) -> float:
    """Aggregate of ``|Re lam / Im lam|`` over the oscillatory modes.

    ``aggregate="min"`` constrains the least damped mode; ``"max"`` is the
    literal form of the decay constraint. Returns ``inf`` when no mode has
    a non-zero imaginary part.
    """
    lam = _eigenvalues(spec)
    osc = lam[np.abs(lam.imag) > _zero_threshold(spec, zero_threshold)]
    if osc.size == 0:
        return float("inf")
    ratios = np.abs(osc.real / osc.imag)
    if aggregate == "min":
        return float(ratios.min())
    if aggregate == "max":
        return float(ratios.max())
    raise ValueError(f"unknown aggregate {aggregate!r}")
