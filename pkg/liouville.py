"""Liouville-space machinery: column-stacking vectorization, superoperators and the
Liouvillian fluctuation that sets the speed in the Liouville-space bound.

Convention: vec(X) stacks columns, so vec(A X B) = (Bᵀ ⊗ A) vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dynamics import Generator
from errors import DegenerateState, DimensionMismatch
from matfun import ComplexMatrix, dagger, eig_hermitian
from states import DensityMatrix

ComplexVector = np.ndarray


@dataclass(frozen=True, eq=False)
class VectorizedState:
    dim: int
    vector: ComplexVector
    norm: float

    def normalized(self) -> ComplexVector:
        """|ρ̃) = |ρ) / √tr ρ²."""
        if self.norm ** 2 <= 1e-14:
            raise DegenerateState(f"state has vanishing purity {self.norm ** 2:.3e}", residual=self.norm ** 2)
        return self.vector / self.norm


@dataclass(frozen=True, eq=False)
class SuperOperator:
    dim: int
    matrix: ComplexMatrix

    def __call__(self, rho: ComplexMatrix) -> ComplexMatrix:
        return devectorize(self.matrix @ np.asarray(rho).reshape(-1, order='F'), self.dim)

    def adjoint(self) -> SuperOperator:
        return SuperOperator(self.dim, dagger(self.matrix))


def vectorize(rho) -> VectorizedState:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)
    vec = m.reshape(-1, order='F')
    return VectorizedState(dim=int(m.shape[0]), vector=vec, norm=float(np.linalg.norm(vec)))


def devectorize(vector, dim: int) -> ComplexMatrix:
    vec = np.asarray(vector, dtype=np.complex128)
    if vec.shape != (dim * dim,):
        raise DimensionMismatch(f"vector of length {vec.size} does not hold a {dim}×{dim} operator")
    return vec.reshape((dim, dim), order='F')


def hs_inner(x, y) -> complex:
    """(X|Y) = tr(X†Y)."""
    return complex(np.vdot(np.asarray(x), np.asarray(y)))


def superoperator_matrix(g: Generator, t: float) -> SuperOperator:
    """Matrix L with L·vec(ρ) = vec(𝓛_t(ρ)).

    Raises:
        UnsupportedGenerator: for generators without a Lindblad form
    """
    d = g.dim
    eye = np.eye(d, dtype=np.complex128)
    h = g.hamiltonian(t)
    lmat = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in g.jumps(t):
        decay = dagger(op) @ op
        lmat += rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, decay) - 0.5 * np.kron(decay.T, eye))
    return SuperOperator(d, lmat)


def liouvillian_fluctuation(g: Generator, t: float, rho) -> float:
    """
    Δ𝓛_t on the normalized state, where (Δ𝓛_t)² = (ρ̃|L†L|ρ̃) − |(ρ̃|L|ρ̃)|².

    Raises:
        DegenerateState: if tr ρ² ≤ 1e-14
        DimensionMismatch: if ρ does not match the generator
    """
    state = vectorize(rho)
    if state.dim != g.dim:
        raise DimensionMismatch(f"state has dimension {state.dim}, generator acts on {g.dim}")
    v = state.normalized()
    lv = superoperator_matrix(g, t).matrix @ v
    second = float(np.real(np.vdot(lv, lv)))
    first = np.vdot(v, lv)
    variance = second - float(np.abs(first) ** 2)
    return float(np.sqrt(max(variance, 0.0)))


def superop_norm(g: Generator, t: float = 0.0) -> float:
    """Largest singular value of the superoperator, from the spectrum of L†L."""
    lmat = superoperator_matrix(g, t).matrix
    gram = dagger(lmat) @ lmat
    top = eig_hermitian((gram + dagger(gram)) / 2).eigenvalues[-1]
    return float(np.sqrt(max(top, 0.0)))


def liouville_overlap(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(ρ̃|σ̃) = tr(ρσ) / √(tr ρ² tr σ²)."""
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"states have dimensions {rho.dim} and {sigma.dim}")
    overlap = np.real(hs_inner(rho.matrix, sigma.matrix)) / np.sqrt(rho.purity() * sigma.purity())
    return float(np.clip(overlap, -1.0, 1.0))


def liouville_angle(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Θ_L(ρ, σ) = arccos (ρ̃|σ̃), in [0, π]."""
    return float(np.arccos(liouville_overlap(rho, sigma)))
