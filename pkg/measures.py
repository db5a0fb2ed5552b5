"""Imaginarity quantifiers: trace distance, relative entropy and the geometric measure."""

from __future__ import annotations

from enum import Enum

import numpy as np

import settings
from errors import InvalidFidelity
from matfun import hs_norm, psd_eig, trace_norm
from states import DensityMatrix, decompose, root_fidelity


class MeasureKind(str, Enum):
    TRACE_DISTANCE = 'tr'
    RELATIVE_ENTROPY = 'rel'
    GEOMETRIC = 'geom'


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(ρ) = −tr ρ ln ρ in nats, with 0·ln 0 = 0."""
    lam = psd_eig(rho.matrix).eigenvalues
    lam = lam[lam > settings.SUPPORT_TOL]
    entropy = float(-np.sum(lam * np.log(lam)))
    return min(max(entropy, 0.0), float(np.log(rho.dim)))


def is_real(rho: DensityMatrix) -> bool:
    """True when ‖Im ρ‖_HS is within REAL_TOL of zero."""
    return hs_norm(np.imag(rho.matrix)) <= settings.REAL_TOL


def m_tr(rho: DensityMatrix) -> float:
    """Trace-distance imaginarity ‖Im ρ‖₁."""
    if is_real(rho):
        return 0.0
    return trace_norm(decompose(rho).im)


def m_r(rho: DensityMatrix) -> float:
    """Relative entropy of imaginarity S(Re ρ) − S(ρ)."""
    if is_real(rho):
        return 0.0
    gap = von_neumann_entropy(decompose(rho).re) - von_neumann_entropy(rho)
    return max(gap, 0.0)


def m_g(rho: DensityMatrix) -> float:
    """Geometric imaginarity (1 − √F(ρ, ρᵀ))/2."""
    if is_real(rho):
        return 0.0
    return (1.0 - root_fidelity(rho, rho.transpose())) / 2


def imaginarity_angle(rho: DensityMatrix) -> float:
    """Bures angle to the nearest real state, arccos √(1 − M_g(ρ)) ∈ [0, π/4]."""
    return float(np.arccos(np.sqrt(1.0 - m_g(rho))))


def measure(rho: DensityMatrix, kind: MeasureKind) -> float:
    kind = MeasureKind(kind)
    if kind is MeasureKind.TRACE_DISTANCE:
        return m_tr(rho)
    if kind is MeasureKind.RELATIVE_ENTROPY:
        return m_r(rho)
    return m_g(rho)


def check_fidelity_target(f: float) -> float:
    if not 0.0 <= f <= 1.0:
        raise InvalidFidelity(f"fidelity target must lie in [0, 1], got {f!r}")
    return float(f)


def min_geometric_within_fidelity(rho: DensityMatrix, f: float) -> float:
    """
    Smallest geometric imaginarity reachable from ρ by any state σ with F(ρ, σ) ≥ f.

    Args:
        rho: Starting state
        f: Fidelity target in [0, 1]

    Returns:
        float: sin²(max{arcsin √M_g(ρ) − arccos √f, 0})

    Raises:
        InvalidFidelity: If f is outside [0, 1]
    """
    f = check_fidelity_target(f)
    gap = np.arcsin(np.sqrt(m_g(rho))) - np.arccos(np.sqrt(f))
    return float(np.sin(max(gap, 0.0)) ** 2)
