"""Dense complex linear-algebra kernels and spectral matrix functions.

Every function here is pure: inputs are copied into fresh arrays and never mutated,
so the kernels can be called from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import logfire
import numpy as np
import numpy.typing as npt

import settings
from errors import MatrixShapeError, NotHermitian, NotPSD

ComplexMatrix = npt.NDArray[np.complex128]
RealVector = npt.NDArray[np.float64]

_PHASE_PIVOT = 1e-12


@dataclass(frozen=True, eq=False)
class HermitianEig:
    """Eigenvalues ascending, eigenvectors as the columns of a unitary matrix."""

    eigenvalues: RealVector
    eigenvectors: ComplexMatrix

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    def apply(self, fn: Callable[[RealVector], RealVector]) -> ComplexMatrix:
        """Spectral calculus: V diag(fn(λ)) V†."""
        v = self.eigenvectors
        return (v * fn(self.eigenvalues)) @ v.conj().T

    def reconstruct(self) -> ComplexMatrix:
        return self.apply(lambda lam: lam)


@dataclass(frozen=True, eq=False)
class SqrtDerivative:
    """Solution X of √ρ·X + X·√ρ = dρ/dt restricted to the support of √ρ."""

    matrix: ComplexMatrix
    kernel_hit: bool

    def trace_square(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


def as_matrix(a) -> ComplexMatrix:
    """Copy `a` into a finite square complex128 array."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise MatrixShapeError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MatrixShapeError("matrix has non-finite entries")
    return m


def dagger(a: ComplexMatrix) -> ComplexMatrix:
    return a.conj().T


def hs_norm(a) -> float:
    """Hilbert-Schmidt (Frobenius) norm √tr(A†A)."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.complex128), 'fro'))


def trace_norm(a) -> float:
    """Sum of singular values, tr√(A†A)."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.complex128), 'nuc'))


def hermitian_residual(a: ComplexMatrix) -> float:
    return hs_norm(a - dagger(a))


def _fix_phases(vectors: ComplexMatrix) -> ComplexMatrix:
    # first component above the pivot threshold of each column becomes real positive
    mags = np.abs(vectors)
    rows = np.argmax(mags > _PHASE_PIVOT, axis=0)
    pivots = vectors[rows, np.arange(vectors.shape[1])]
    return vectors * (np.abs(pivots) / pivots)[np.newaxis, :]


def eig_hermitian(a, tol: float = settings.HERMITIAN_TOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix with deterministic eigenvector phases.

    Raises:
        NotHermitian: if ‖A − A†‖_HS exceeds `tol`
    """
    m = as_matrix(a)
    residual = hermitian_residual(m)
    if residual > tol:
        raise NotHermitian(f"matrix is not Hermitian: ‖A − A†‖_HS = {residual:.3e}", residual=residual)
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return HermitianEig(eigenvalues=w, eigenvectors=_fix_phases(v))


def psd_eig(a, tol: float = settings.PSD_TOL) -> HermitianEig:
    """Eigendecomposition of a PSD matrix with roundoff-level eigenvalues snapped to zero.

    Raises:
        NotPSD: if any eigenvalue is below −tol
    """
    eig = eig_hermitian(a)
    lam = eig.eigenvalues
    if lam[0] < -tol:
        raise NotPSD(f"matrix is not positive semidefinite: smallest eigenvalue {lam[0]:.3e}",
                     residual=float(-lam[0]))
    noise = settings.EIG_NOISE * max(1.0, abs(float(lam[-1])))
    return HermitianEig(eigenvalues=np.where(lam <= noise, 0.0, lam), eigenvectors=eig.eigenvectors)


def mat_sqrt_psd(a) -> ComplexMatrix:
    """Principal square root of a PSD matrix."""
    return psd_eig(a).apply(np.sqrt)


def mat_ln_on_support(a, tol: float = settings.SUPPORT_TOL) -> ComplexMatrix:
    """Matrix logarithm applied to eigenvalues above `tol`; the kernel maps to zero."""
    eig = psd_eig(a)
    lam = eig.eigenvalues
    on_support = lam > tol
    return eig.apply(lambda x: np.where(on_support, np.log(np.where(on_support, x, 1.0)), 0.0))


def support_rank(a, tol: float = settings.SUPPORT_TOL) -> int:
    """Number of eigenvalues above `tol`."""
    return int(np.count_nonzero(psd_eig(a).eigenvalues > tol))


def dsqrt_dt(sqrt_rho, drho, tol: float = settings.SUPPORT_TOL) -> SqrtDerivative:
    """Time derivative of √ρ from the Sylvester identity √ρ·X + X·√ρ = dρ/dt.

    In the eigenbasis of √ρ the solution is X_ij = (dρ)_ij / (s_i + s_j). Blocks with
    s_i + s_j ≤ tol are set to zero; `kernel_hit` reports whether any of them carried
    a derivative component larger than tol.
    """
    eig = eig_hermitian(sqrt_rho)
    d_rho = as_matrix(drho)
    if d_rho.shape != (eig.dim, eig.dim):
        raise MatrixShapeError(f"derivative has shape {d_rho.shape}, expected {(eig.dim, eig.dim)}")
    s = np.clip(eig.eigenvalues, 0.0, None)
    v = eig.eigenvectors
    d = dagger(v) @ d_rho @ v
    denom = s[:, np.newaxis] + s[np.newaxis, :]
    on_support = denom > tol
    kernel_hit = bool(np.any(~on_support & (np.abs(d) > tol)))
    x_eigenbasis = np.where(on_support, d / np.where(on_support, denom, 1.0), 0.0)
    x = v @ x_eigenbasis @ dagger(v)
    if kernel_hit:
        logfire.debug('sqrt derivative touched the kernel of sqrt(rho)',
                      kernel_weight=float(np.max(np.abs(np.where(on_support, 0.0, d)))))
    return SqrtDerivative(matrix=(x + dagger(x)) / 2, kernel_hit=kernel_hit)
