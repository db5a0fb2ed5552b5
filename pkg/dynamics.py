"""Generators of open-system dynamics, RK4 propagation and closed-form trajectories.

All generators are written in Lindblad form

    dρ/dt = −i[H, ρ] + Σ_k r_k(t) (L_k ρ L_k† − ½{L_k† L_k, ρ})

with σ₋ = |1⟩⟨0|, so the dissipative model relaxes to |1⟩⟨1|.
"""

from __future__ import annotations

import io
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TextIO, Tuple, Union

import logfire
import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

import settings
from errors import (
    CorrectionBudgetExceeded,
    DimensionMismatch,
    InputError,
    InvalidRate,
    NotHermitian,
    StepTooLarge,
    UnsupportedGenerator,
)
from matfun import ComplexMatrix, RealVector, as_matrix, dagger, hermitian_residual, hs_norm
from states import DensityMatrix, decompose


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


SIGMA_X = _frozen([[0, 1], [1, 0]])
SIGMA_Y = _frozen([[0, -1j], [1j, 0]])
SIGMA_Z = _frozen([[1, 0], [0, -1]])
SIGMA_MINUS = _frozen([[0, 0], [1, 0]])


@dataclass(frozen=True, eq=False)
class RateFunction:
    """A decay rate γ(t): either a constant or a table interpolated linearly and clamped at its ends."""

    value: Optional[float] = None
    times: Optional[RealVector] = None
    values: Optional[RealVector] = None
    allow_negative: bool = False

    def __post_init__(self):
        if self.value is not None:
            if self.times is not None or self.values is not None:
                raise InvalidRate("a rate is either constant or tabulated, not both")
            if not np.isfinite(self.value):
                raise InvalidRate(f"rate must be finite, got {self.value!r}")
            if self.value < 0:
                raise InvalidRate(f"constant rate must be non-negative, got {self.value!r}; "
                                  "negative rates need a table with allow_negative")
            object.__setattr__(self, 'value', float(self.value))
            return
        if self.times is None or self.values is None:
            raise InvalidRate("tabulated rate needs both times and values")
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if times.size == 0 or times.shape != values.shape:
            raise InvalidRate(f"rate table has {times.size} times and {values.size} values")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise InvalidRate("rate table has non-finite entries")
        if np.any(np.diff(times) <= 0):
            raise InvalidRate("rate table times must be strictly increasing")
        if not self.allow_negative and np.any(values < 0):
            raise InvalidRate(f"rate table has negative entries (min {values.min():.3e}) "
                              "but allow_negative is not set", residual=float(-values.min()))
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, gamma: float) -> RateFunction:
        return cls(value=gamma)

    @classmethod
    def table(cls, times: Sequence[float], values: Sequence[float], allow_negative: bool = False) -> RateFunction:
        return cls(times=times, values=values, allow_negative=allow_negative)

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def __call__(self, t: float) -> float:
        if self.value is not None:
            return self.value
        return float(np.interp(t, self.times, self.values))

    def integral(self, t: float) -> float:
        """∫₀ᵗ γ(s) ds, exact for the piecewise-linear table."""
        if t < 0:
            raise InputError(f"rate integral needs t >= 0, got {t!r}")
        if self.value is not None:
            return self.value * t
        inner = self.times[(self.times > 0) & (self.times < t)]
        knots = np.unique(np.concatenate(([0.0, t], inner)))
        return float(trapezoid(np.interp(knots, self.times, self.values), knots))


Rate = Union[RateFunction, float]


def as_rate(gamma: Rate) -> RateFunction:
    if isinstance(gamma, RateFunction):
        return gamma
    return RateFunction.constant(float(gamma))


class Generator(ABC):
    """The right-hand side 𝓛_t of dρ/dt = 𝓛_t(ρ)."""

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @property
    @abstractmethod
    def time_independent(self) -> bool:
        ...

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()

    @abstractmethod
    def hamiltonian(self, t: float) -> ComplexMatrix:
        ...

    @abstractmethod
    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        """Jump operators with their rates at time t."""

    def apply(self, t: float, rho: ComplexMatrix) -> ComplexMatrix:
        h = self.hamiltonian(t)
        out = -1j * (h @ rho - rho @ h)
        for op, rate in self.jumps(t):
            if rate == 0.0:
                continue
            op_dag = dagger(op)
            decay = op_dag @ op
            out = out + rate * (op @ rho @ op_dag - 0.5 * (decay @ rho + rho @ decay))
        return out


@dataclass(frozen=True, eq=False)
class Unitary(Generator):
    matrix: ComplexMatrix

    def __post_init__(self):
        h = as_matrix(self.matrix)
        residual = hermitian_residual(h)
        if residual > settings.HERMITIAN_TOL:
            raise NotHermitian(f"Hamiltonian is not Hermitian: ‖H − H†‖_HS = {residual:.3e}", residual=residual)
        h.setflags(write=False)
        object.__setattr__(self, 'matrix', h)

    @classmethod
    def x_rotation(cls, omega: float) -> Unitary:
        """H = ω σ_x."""
        return cls(omega * SIGMA_X)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def time_independent(self) -> bool:
        return True

    def hamiltonian(self, t: float) -> ComplexMatrix:
        return self.matrix

    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        return []


@dataclass(frozen=True, eq=False)
class Dephasing(Generator):
    """Qubit dephasing: H₀ = ω₀σ_z/2 and a σ_z jump at rate γ_t/2."""

    gamma: RateFunction
    omega0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'gamma', as_rate(self.gamma))

    @property
    def dim(self) -> int:
        return 2

    @property
    def time_independent(self) -> bool:
        return self.gamma.is_constant

    def hamiltonian(self, t: float) -> ComplexMatrix:
        return 0.5 * self.omega0 * SIGMA_Z

    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        return [(SIGMA_Z, 0.5 * self.gamma(t))]


@dataclass(frozen=True, eq=False)
class Dissipative(Generator):
    """Qubit amplitude damping: a σ₋ jump at rate γ_t/2."""

    gamma: RateFunction

    def __post_init__(self):
        object.__setattr__(self, 'gamma', as_rate(self.gamma))

    @property
    def dim(self) -> int:
        return 2

    @property
    def time_independent(self) -> bool:
        return self.gamma.is_constant

    def hamiltonian(self, t: float) -> ComplexMatrix:
        return np.zeros((2, 2), dtype=np.complex128)

    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        return [(SIGMA_MINUS, 0.5 * self.gamma(t))]


@dataclass(frozen=True, eq=False)
class CustomLindblad(Generator):
    matrix: ComplexMatrix
    operators: Tuple[Tuple[ComplexMatrix, RateFunction], ...] = ()

    def __post_init__(self):
        h = Unitary(self.matrix).matrix
        ops = []
        for op, rate in self.operators:
            op = as_matrix(op)
            if op.shape != h.shape:
                raise DimensionMismatch(f"jump operator has shape {op.shape}, Hamiltonian has {h.shape}")
            op.setflags(write=False)
            ops.append((op, as_rate(rate)))
        object.__setattr__(self, 'matrix', h)
        object.__setattr__(self, 'operators', tuple(ops))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def time_independent(self) -> bool:
        return all(rate.is_constant for _, rate in self.operators)

    def hamiltonian(self, t: float) -> ComplexMatrix:
        return self.matrix

    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        return [(op, rate(t)) for op, rate in self.operators]


@dataclass(frozen=True, eq=False)
class GeodesicDephasing(Generator):
    """Straight-line removal of Im ρ₀ at fixed real part: ρ(t) = Re ρ₀ + i(1 − r t) Im ρ₀.

    The flow is affine and does not depend on the current state, so it has no Lindblad form.
    """

    initial: DensityMatrix
    rate: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise InvalidRate(f"geodesic rate must be positive, got {self.rate!r}")

    @property
    def dim(self) -> int:
        return self.initial.dim

    @property
    def time_independent(self) -> bool:
        return True

    @property
    def duration(self) -> float:
        return 1.0 / self.rate

    def hamiltonian(self, t: float) -> ComplexMatrix:
        raise UnsupportedGenerator("geodesic dephasing has no Hamiltonian")

    def jumps(self, t: float) -> List[Tuple[ComplexMatrix, float]]:
        raise UnsupportedGenerator("geodesic dephasing has no jump operators")

    def apply(self, t: float, rho: ComplexMatrix) -> ComplexMatrix:
        return -1j * self.rate * decompose(self.initial).im


def _as_raw(rho) -> ComplexMatrix:
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    return as_matrix(rho)


def apply_generator(g: Generator, t: float, rho) -> ComplexMatrix:
    """
    Evaluate dρ/dt = 𝓛_t(ρ).

    Args:
        g: The generator
        t: Time at which rates are evaluated
        rho: DensityMatrix or raw matrix of matching dimension

    Returns:
        The Hermitian part of 𝓛_t(ρ)

    Raises:
        DimensionMismatch: If ρ and the generator act on different spaces
    """
    m = _as_raw(rho)
    if m.shape != (g.dim, g.dim):
        raise DimensionMismatch(f"state has shape {m.shape}, generator acts on dimension {g.dim}")
    out = g.apply(t, m)
    return (out + dagger(out)) / 2


def rk4_step(g: Generator, t: float, rho: ComplexMatrix, h: float) -> ComplexMatrix:
    """One classical fourth-order Runge-Kutta step of size h."""
    k1 = g.apply(t, rho)
    k2 = g.apply(t + h / 2, rho + (h / 2) * k1)
    k3 = g.apply(t + h / 2, rho + (h / 2) * k2)
    k4 = g.apply(t + h, rho + h * k3)
    return rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True, eq=False)
class PropagationLog:
    """Per-step corrections applied by `propagate`, before each was removed."""

    trace_errors: RealVector
    hermitian_drifts: RealVector
    psd_clamps: RealVector

    @property
    def total(self) -> float:
        return float(np.sum(self.trace_errors) + np.sum(self.hermitian_drifts) + np.sum(self.psd_clamps))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: RealVector
    states: Tuple[DensityMatrix, ...]
    generator: Generator
    log: Optional[PropagationLog] = field(default=None)

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        if times.size == 0 or times.size != len(self.states):
            raise InputError(f"trajectory has {times.size} times and {len(self.states)} states")
        if times[0] != 0.0:
            raise InputError(f"trajectory must start at t = 0, starts at {times[0]!r}")
        if np.any(np.diff(times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'states', tuple(self.states))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def initial(self) -> DensityMatrix:
        return self.states[0]

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]

    def matrices(self) -> np.ndarray:
        return np.stack([s.matrix for s in self.states])

    def is_uniform(self) -> bool:
        steps = np.diff(self.times)
        return steps.size == 0 or bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))

    def truncate(self, horizon: float) -> Trajectory:
        """Prefix of the trajectory with all samples at times ≤ horizon."""
        k = int(np.searchsorted(self.times, horizon * (1 + 1e-12), side='right'))
        if k == 0:
            raise InputError(f"horizon {horizon!r} precedes the first sample")
        return Trajectory(self.times[:k], self.states[:k], self.generator)


def _project_psd(m: ComplexMatrix) -> Tuple[ComplexMatrix, float]:
    w, v = np.linalg.eigh(m)
    smallest = float(w[0])
    if smallest >= -settings.PSD_TOL:
        return m, 0.0
    if smallest < -settings.STEP_PSD_TOL:
        raise StepTooLarge(f"RK4 step left the state cone (eigenvalue {smallest:.3e}); use a smaller dt",
                           residual=-smallest)
    w = np.clip(w, 0.0, None)
    m = (v * (w / w.sum())) @ dagger(v)
    logfire.warn('clamped negative eigenvalue after RK4 step', eigenvalue=smallest)
    return m, -smallest


def propagate(g: Generator, rho0: DensityMatrix, T: float, dt: float) -> Trajectory:
    """
    Integrate dρ/dt = 𝓛_t(ρ) with fixed-step RK4 on a uniform grid ending exactly at T.

    Each stored state is re-symmetrized and trace-renormalized; the removed drift is kept in
    the trajectory log and its running total may not exceed CORRECTION_BUDGET.

    Raises:
        InputError: If T or dt is not positive or dt > T
        DimensionMismatch: If ρ₀ does not match the generator
        StepTooLarge: If a step leaves the positive cone by more than STEP_PSD_TOL
        CorrectionBudgetExceeded: If the cumulative correction exceeds CORRECTION_BUDGET
    """
    if not (np.isfinite(T) and T > 0):
        raise InputError(f"propagation horizon must be positive, got {T!r}")
    if not (np.isfinite(dt) and 0 < dt <= T * (1 + 1e-12)):
        raise InputError(f"time step must lie in (0, T], got dt={dt!r} for T={T!r}")
    if rho0.dim != g.dim:
        raise DimensionMismatch(f"initial state has dimension {rho0.dim}, generator acts on {g.dim}")

    n = max(1, int(np.ceil(T / dt - 1e-9)))
    times = np.linspace(0.0, T, n + 1)
    trace_errors = np.zeros(n)
    drifts = np.zeros(n)
    clamps = np.zeros(n)
    states = [rho0]
    m = rho0.matrix
    cumulative = 0.0

    with logfire.span('propagate {kind}', kind=g.kind, T=T, steps=n):
        for k in range(n):
            h = times[k + 1] - times[k]
            m = rk4_step(g, times[k], m, h)
            if not np.all(np.isfinite(m)):
                raise StepTooLarge(f"RK4 produced non-finite entries at t={times[k + 1]:.6g}")
            drifts[k] = hs_norm(m - dagger(m)) / 2
            m = (m + dagger(m)) / 2
            trace = float(np.real(np.trace(m)))
            trace_errors[k] = abs(trace - 1.0)
            m = m / trace
            m, clamps[k] = _project_psd(m)
            cumulative += drifts[k] + trace_errors[k] + clamps[k]
            if cumulative > settings.CORRECTION_BUDGET:
                raise CorrectionBudgetExceeded(
                    f"cumulative state correction {cumulative:.3e} exceeds {settings.CORRECTION_BUDGET:.0e}",
                    residual=cumulative,
                )
            states.append(DensityMatrix(m.copy()))
        logfire.debug('propagation corrections', max_trace_error=float(trace_errors.max()),
                      max_hermitian_drift=float(drifts.max()), total=cumulative)

    return Trajectory(times, tuple(states), g, PropagationLog(trace_errors, drifts, clamps))


def sample_trajectory(g: Generator, times: Sequence[float], solution: Callable[[float], DensityMatrix]) -> Trajectory:
    """Trajectory built from a closed-form solution evaluated on the given grid."""
    return Trajectory(np.asarray(times, dtype=np.float64), tuple(solution(float(t)) for t in times), g)


def uniform_grid(T: float, dt: float) -> RealVector:
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    return np.linspace(0.0, T, n + 1)


def dephasing_analytic(theta: float, gamma: Rate, omega0: float, t: float) -> DensityMatrix:
    """Dephased θ-state: populations fixed, coherence scaled by e^{−∫γ} e^{∓iω₀t}."""
    if t < 0:
        raise InputError(f"time must be non-negative, got {t!r}")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    coherence = c * s * np.exp(-as_rate(gamma).integral(t)) * np.exp(1j * omega0 * t)
    return DensityMatrix(np.array([[c * c, -1j * np.conj(coherence)], [1j * coherence, s * s]]))


def dissipative_analytic(theta: float, gamma: Rate, t: float) -> DensityMatrix:
    """Amplitude-damped θ-state: ρ₀₀ decays as e^{−∫γ/2}, the coherence as e^{−∫γ/4}."""
    if t < 0:
        raise InputError(f"time must be non-negative, got {t!r}")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    big_gamma = as_rate(gamma).integral(t)
    population = np.exp(-big_gamma / 2) * c * c
    coherence = np.exp(-big_gamma / 4) * c * s
    return DensityMatrix(np.array([[population, -1j * coherence], [1j * coherence, 1.0 - population]]))


def x_rotation_analytic(omega: float, t: float) -> DensityMatrix:
    """e^{−iωtσ_x}|0⟩⟨0|e^{iωtσ_x}."""
    if t < 0:
        raise InputError(f"time must be non-negative, got {t!r}")
    c, s = np.cos(omega * t), np.sin(omega * t)
    return DensityMatrix(np.array([[c * c, 1j * c * s], [-1j * c * s, s * s]]))


def geodesic_dephasing_analytic(rho0: DensityMatrix, rate: float, t: float) -> DensityMatrix:
    parts = decompose(rho0)
    return DensityMatrix(parts.re.matrix + 1j * (1.0 - rate * t) * parts.im)


def _column_names(dim: int) -> List[str]:
    names = ['t']
    for i in range(dim):
        for j in range(dim):
            names += [f're_{i}{j}', f'im_{i}{j}']
    return names


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """One row per sample: t then (re, im) of each entry in row-major order."""
    d = traj.initial.dim
    flat = traj.matrices().reshape(len(traj), d * d)
    data = np.empty((len(traj), 1 + 2 * d * d))
    data[:, 0] = traj.times
    data[:, 1::2] = flat.real
    data[:, 2::2] = flat.imag
    return pd.DataFrame(data, columns=_column_names(d))


def write_csv(frame: pd.DataFrame, target: Union[str, Path, TextIO], comment: str):
    """Deterministic CSV: a '#' comment line, then 17-significant-digit rows with '\\n' endings."""
    buffer = io.StringIO()
    buffer.write(f"# {comment}\n")
    frame.to_csv(buffer, index=False, float_format='%.17g', lineterminator='\n')
    text = buffer.getvalue()
    if isinstance(target, (str, Path)):
        with open(target, 'w', newline='') as f:
            f.write(text)
    else:
        target.write(text)


def write_trajectory_csv(traj: Trajectory, target: Union[str, Path, TextIO], time_unit: str = '1/gamma'):
    write_csv(trajectory_frame(traj), target, f"time in units of {time_unit}; generator={traj.generator.kind}")


def read_rate_table(path: Union[str, Path], allow_negative: bool = False) -> RateFunction:
    """
    Load a tabulated rate from a CSV with columns t,gamma.

    Raises:
        InvalidRate: If the columns are missing or the table violates the RateFunction invariants
    """
    frame = pd.read_csv(path, comment='#')
    missing = {'t', 'gamma'} - set(frame.columns)
    if missing:
        raise InvalidRate(f"rate table {path} is missing columns: {', '.join(sorted(missing))}")
    return RateFunction.table(frame['t'].to_numpy(float), frame['gamma'].to_numpy(float),
                              allow_negative=allow_negative)
