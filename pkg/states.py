"""Validated density matrices, their real/imaginary split, fidelity and Bures geometry.

The reference basis is always the computational basis of the stored matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import logfire
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, PositiveInt, ValidationError

import settings
from errors import (
    ConfigError,
    ConsistencyError,
    DegenerateState,
    DimensionMismatch,
    InputError,
    MatrixShapeError,
    NotHermitian,
    NotPSD,
    TraceNotOne,
)
from matfun import ComplexMatrix, as_matrix, hermitian_residual, mat_sqrt_psd

RealMatrix = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix. Build it with `validate`."""

    matrix: ComplexMatrix

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def transpose(self) -> DensityMatrix:
        return DensityMatrix(np.array(self.matrix.T))


@dataclass(frozen=True, eq=False)
class RealImDecomposition:
    re: DensityMatrix
    im: RealMatrix


def validate(matrix, psd_tol: float = settings.PSD_TOL) -> DensityMatrix:
    """
    Check a raw matrix against the density-matrix invariants.

    Args:
        matrix: Anything numpy can turn into a square complex array
        psd_tol: Most negative eigenvalue tolerated as roundoff

    Returns:
        DensityMatrix: The Hermitian part of the input

    Raises:
        NotHermitian, TraceNotOne, NotPSD: naming the violated invariant and its residual
    """
    m = as_matrix(matrix)
    residual = hermitian_residual(m)
    if residual > settings.HERMITIAN_TOL:
        raise NotHermitian(f"state is not Hermitian: ‖ρ − ρ†‖_HS = {residual:.3e}", residual=residual)
    m = (m + m.conj().T) / 2
    trace_error = abs(float(np.real(np.trace(m))) - 1.0)
    if trace_error > settings.TRACE_TOL:
        raise TraceNotOne(f"state trace differs from 1 by {trace_error:.3e}", residual=trace_error)
    smallest = float(np.linalg.eigvalsh(m)[0])
    if smallest < -psd_tol:
        raise NotPSD(f"state has negative eigenvalue {smallest:.3e}", residual=-smallest)
    return DensityMatrix(m)


def decompose(rho: DensityMatrix) -> RealImDecomposition:
    """Split ρ = Re ρ + i Im ρ with Re ρ = (ρ + ρᵀ)/2 and Im ρ = (ρ − ρᵀ)/(2i)."""
    # for Hermitian ρ, ρᵀ = conj(ρ), so both parts are the entrywise real and imaginary parts
    re = np.real(rho.matrix).astype(np.complex128)
    im = np.array(np.imag(rho.matrix), dtype=np.float64)
    return RealImDecomposition(re=DensityMatrix(re), im=im)


def pure_state(psi) -> DensityMatrix:
    """Projector onto the normalized vector ψ."""
    vec = np.array(psi, dtype=np.complex128).reshape(-1)
    norm = float(np.linalg.norm(vec))
    if vec.size == 0 or norm <= settings.SUPPORT_TOL:
        raise DegenerateState("cannot build a pure state from a zero vector")
    vec = vec / norm
    return DensityMatrix(np.outer(vec, vec.conj()))


def theta_state(theta: float) -> DensityMatrix:
    """The qubit state cos(θ/2)|0⟩ + i sin(θ/2)|1⟩."""
    if not 0.0 <= theta <= np.pi:
        raise InputError(f"theta must lie in [0, π], got {theta!r}")
    return pure_state([np.cos(theta / 2), 1j * np.sin(theta / 2)])


def mis_state() -> DensityMatrix:
    """Maximally imaginary qubit state (|0⟩ + i|1⟩)/√2."""
    return DensityMatrix(0.5 * np.array([[1.0, -1.0j], [1.0j, 1.0]]))


def basis_state(k: int, dim: int = 2) -> DensityMatrix:
    if not 0 <= k < dim:
        raise InputError(f"basis index {k} outside a {dim}-dimensional space")
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[k, k] = 1.0
    return DensityMatrix(m)


def maximally_mixed(dim: int = 2) -> DensityMatrix:
    return DensityMatrix(np.eye(dim, dtype=np.complex128) / dim)


def random_pure_state(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Haar-random pure state from a normalized complex Gaussian vector."""
    return pure_state(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    """Ginibre ensemble state G G† / tr(G G†) with G of shape dim × rank (full rank by default)."""
    k = dim if rank is None else rank
    if not 1 <= k <= dim:
        raise InputError(f"rank must lie in [1, {dim}], got {k}")
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.real(np.trace(m)))


def _check_dims(rho: DensityMatrix, sigma: DensityMatrix):
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"states have dimensions {rho.dim} and {sigma.dim}")


def _clamp_unit(value: float, quantity: str) -> float:
    if value < -settings.CLAMP_TOL or value > 1.0 + settings.CLAMP_TOL:
        raise ConsistencyError(f"{quantity} = {value!r} left [0, 1]", residual=max(-value, value - 1.0))
    return min(max(value, 0.0), 1.0)


def root_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """√F(ρ, σ) = tr√(√ρ σ √ρ), clamped to [0, 1]."""
    _check_dims(rho, sigma)
    sqrt_rho = mat_sqrt_psd(rho.matrix)
    inner = sqrt_rho @ sigma.matrix @ sqrt_rho
    inner = (inner + inner.conj().T) / 2
    value = float(np.real(np.trace(mat_sqrt_psd(inner))))
    return _clamp_unit(value, 'root fidelity')


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    return root_fidelity(rho, sigma) ** 2


def bures_angle(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Θ_B(ρ, σ) = arccos √F(ρ, σ), in [0, π/2]."""
    return float(np.arccos(root_fidelity(rho, sigma)))


class StateFile(BaseModel):
    """JSON state format: real and imaginary parts of ρ as row-major real matrices."""

    model_config = ConfigDict(extra='forbid')

    dim: PositiveInt
    re: List[List[float]]
    im: List[List[float]]

    def to_matrix(self) -> ComplexMatrix:
        re = np.array(self.re, dtype=np.float64)
        im = np.array(self.im, dtype=np.float64)
        expected = (self.dim, self.dim)
        if re.shape != expected or im.shape != expected:
            raise MatrixShapeError(
                f"state file declares dim {self.dim} but re has shape {re.shape} and im has shape {im.shape}"
            )
        return re + 1j * im

    @classmethod
    def from_state(cls, rho: DensityMatrix) -> StateFile:
        return cls(dim=rho.dim, re=np.real(rho.matrix).tolist(), im=np.imag(rho.matrix).tolist())


def parse_state(text: Union[str, bytes]) -> DensityMatrix:
    try:
        payload = StateFile.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"malformed state JSON: {e.errors()[0]['msg']}") from e
    return validate(payload.to_matrix())


def load_state(path: Union[str, Path]) -> DensityMatrix:
    """
    Read and validate a state file.

    Raises:
        ConfigError: If the file is not valid state JSON
        MatrixShapeError: If re/im do not match the declared dimension
        NotHermitian, TraceNotOne, NotPSD: If the matrix is not a density matrix
    """
    with logfire.span('load state {path}', path=str(path)):
        return parse_state(Path(path).read_text())


def dump_state(rho: DensityMatrix, path: Union[str, Path]):
    Path(path).write_text(StateFile.from_state(rho).model_dump_json(indent=2) + '\n')
