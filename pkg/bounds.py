"""Imaginarity speed-limit bounds evaluated on sampled trajectories.

Every evaluator splits into two stages: per-sample integrands are computed once for the whole
trajectory, then a report is assembled for a horizon index. `sweep` reuses the first stage for
many horizons, which is how the figure datasets are produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import trapezoid

import settings
from dynamics import Generator, Trajectory, apply_generator, rk4_step, uniform_grid
from errors import DegenerateBound, InputError, TimeDependentGenerator
from liouville import liouville_angle, liouvillian_fluctuation, superop_norm
from matfun import dsqrt_dt, mat_sqrt_psd, psd_eig, hs_norm, trace_norm
from measures import (
    MeasureKind,
    check_fidelity_target,
    imaginarity_angle,
    is_real,
    m_g,
    m_r,
    m_tr,
    measure,
    min_geometric_within_fidelity,
)
from states import DensityMatrix, decompose

# Riemann zeta at 1/2 and −1/2, for the endpoint corrections of τ^(∓1/2) integrands
ZETA_HALF = -1.4603545088095868
ZETA_MINUS_HALF = -0.20788622497735457

_ZERO_CHANGE = 1e-14


class Theorem(str, Enum):
    RELATIVE_ENTROPY = 'T1'
    TRACE = 'T2'
    GEOMETRIC = 'T3'
    LIOUVILLE = 'T4'
    LIOUVILLE_STATIC = 'Cor1'
    STOCHASTIC_APPROX = 'StochApprox'
    GENERATION = 'Generation'
    DEGRADATION = 'Degradation'


class BoundReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    theorem: Theorem
    delta_I: float
    lambda_: float = Field(alias='lambda')
    t_isl: float
    t_actual: Optional[float] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.t_actual is None or self.t_isl <= self.t_actual + settings.VALIDITY_TOL

    @property
    def vacuous(self) -> bool:
        return bool(self.diagnostics.get('vacuous', False))

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


def make_report(theorem: Theorem, delta: float, speed: float, t_actual: Optional[float],
                diagnostics: Dict[str, Any]) -> BoundReport:
    """
    Turn a change in imaginarity and an averaged speed into a bound.

    Raises:
        DegenerateBound: If the imaginarity changed but the averaged speed vanished
    """
    diagnostics = dict(diagnostics)
    vacuous = False
    if abs(delta) <= _ZERO_CHANGE:
        t_isl = 0.0
        vacuous = speed <= 0.0
    elif speed <= 0.0 or not np.isfinite(speed):
        raise DegenerateBound(f"{theorem.value}: imaginarity changed by {delta:.3e} at zero speed",
                              residual=abs(delta))
    else:
        t_isl = abs(delta) / speed
    valid = t_actual is None or t_isl <= t_actual + settings.VALIDITY_TOL
    diagnostics['vacuous'] = vacuous
    diagnostics['valid'] = valid
    if not valid:
        logfire.warn('{theorem} bound exceeds the actual time', theorem=theorem.value,
                     t_isl=t_isl, t_actual=t_actual)
    return BoundReport(theorem=theorem, delta_I=delta, lambda_=speed, t_isl=t_isl,
                       t_actual=t_actual, diagnostics=diagnostics)


# quadrature ---------------------------------------------------------------------------------


def time_average(times: np.ndarray, values: np.ndarray) -> float:
    """(1/T) ∫ f dt by composite trapezoid."""
    return float(trapezoid(values, times) / (times[-1] - times[0]))


def _is_uniform(times: np.ndarray) -> bool:
    steps = np.diff(times)
    return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))


def integrate_sqrt_singular(times: np.ndarray, values: np.ndarray) -> float:
    """
    ∫ f dt for f(τ) = c τ^(−1/2) + d τ^(1/2) + smooth, τ = t − t₀; the t₀ sample is ignored.

    On uniform grids this is the trapezoid rule with the generalized Euler-Maclaurin
    corrections at both ends; otherwise the first panel is integrated in closed form.
    """
    tau = times - times[0]
    n = tau.size - 1
    if n < 2:
        raise InputError("singular quadrature needs at least three samples")
    s1, s2 = values[1] * np.sqrt(tau[1]), values[2] * np.sqrt(tau[2])
    d = (s2 - s1) / (tau[2] - tau[1])
    c = s1 - d * tau[1]
    if n >= 3 and _is_uniform(times):
        h = tau[1]
        raw = h * (np.sum(values[1:-1]) + values[-1] / 2)
        slope_end = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * h)
        return float(raw - ZETA_HALF * c * np.sqrt(h) - ZETA_MINUS_HALF * d * h ** 1.5
                     - h * h / 12 * slope_end)
    first_panel = 2 * c * np.sqrt(tau[1]) + (2.0 / 3.0) * d * tau[1] ** 1.5
    return float(first_panel + trapezoid(values[1:], tau[1:]))


def _log_start_integral(tau: np.ndarray, values: np.ndarray) -> float:
    # model A ln²τ + B ln τ + C through samples 1..3, integrated in closed form
    u = np.log(tau[1:4])
    coeffs = np.linalg.solve(np.column_stack((u * u, u, np.ones(3))), values[1:4])
    a, b, c = coeffs
    x = tau[-1]
    lx = np.log(x)
    model_integral = a * x * (lx * lx - 2 * lx + 2) + b * x * (lx - 1) + c * x
    lt = np.log(tau[1:])
    remainder = np.concatenate(([0.0], values[1:] - (a * lt * lt + b * lt + c)))
    return float(model_integral + trapezoid(remainder, tau))


def integrate_log_singular(times: np.ndarray, values: np.ndarray, start: bool, end: bool) -> float:
    """∫ f dt for f with ln² singularities at the flagged ends; composite trapezoid elsewhere."""
    n = times.size - 1
    if start and end and n >= 6:
        mid = n // 2
        return (integrate_log_singular(times[:mid + 1], values[:mid + 1], True, False)
                + integrate_log_singular(times[mid:], values[mid:], False, True))
    if start and not end and n >= 3:
        return _log_start_integral(times - times[0], values)
    if end and not start and n >= 3:
        return _log_start_integral(times[-1] - times[::-1], values[::-1])
    return float(trapezoid(values, times))


# per-sample integrands ----------------------------------------------------------------------


def _log_norm_sq(rho: np.ndarray):
    lam = psd_eig(rho).eigenvalues
    support = lam[lam > settings.SUPPORT_TOL]
    return float(np.sum(np.log(support) ** 2)), int(support.size)


@dataclass(frozen=True, eq=False)
class _Samples:
    traj: Trajectory
    arrays: Dict[str, np.ndarray]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]


def _require_samples(traj: Trajectory, index: int):
    if index < 2:
        raise InputError(f"bound evaluation needs at least 3 samples, got {index + 1}")


def _relative_entropy_samples(traj: Trajectory) -> _Samples:
    n = len(traj)
    out = {k: np.zeros(n) for k in ('log_rho', 'log_re', 'speed', 'speed_re', 'rank_rho', 'rank_re')}
    g = traj.generator
    for k, (t, rho) in enumerate(zip(traj.times, traj.states)):
        re = decompose(rho).re
        out['log_rho'][k], out['rank_rho'][k] = _log_norm_sq(rho.matrix)
        out['log_re'][k], out['rank_re'][k] = _log_norm_sq(re.matrix)
        out['speed'][k] = hs_norm(apply_generator(g, t, rho)) ** 2
        out['speed_re'][k] = hs_norm(apply_generator(g, t, re)) ** 2
    return _Samples(traj, out)


def _trace_samples(traj: Trajectory) -> _Samples:
    speed = np.zeros(len(traj))
    for k, (t, rho) in enumerate(zip(traj.times, traj.states)):
        drho = apply_generator(traj.generator, t, rho)
        speed[k] = trace_norm(drho - drho.T) / 2
    return _Samples(traj, {'speed': speed})


def _geometric_samples(traj: Trajectory) -> _Samples:
    speed = np.zeros(len(traj))
    kernel = np.zeros(len(traj))
    for k, (t, rho) in enumerate(zip(traj.times, traj.states)):
        x = dsqrt_dt(mat_sqrt_psd(rho.matrix), apply_generator(traj.generator, t, rho))
        speed[k] = np.sqrt(max(x.trace_square(), 0.0))
        kernel[k] = x.kernel_hit
    return _Samples(traj, {'speed': speed, 'kernel': kernel})


def _liouville_samples(traj: Trajectory) -> _Samples:
    speed = np.array([liouvillian_fluctuation(traj.generator, t, rho)
                      for t, rho in zip(traj.times, traj.states)])
    return _Samples(traj, {'speed': speed})


def _geometric_speed(samples: _Samples, index: int) -> float:
    times = samples.traj.times[:index + 1]
    speed = samples['speed'][:index + 1]
    if samples['kernel'][0]:
        return integrate_sqrt_singular(times, speed) / times[-1]
    return time_average(times, speed)


# reports at a horizon index ---------------------------------------------------------------


def _relative_entropy_report(samples: _Samples, index: int, epsilon: Optional[float] = None) -> BoundReport:
    _require_samples(samples.traj, index)
    traj = samples.traj
    times = traj.times[:index + 1]
    horizon = float(times[-1])

    def rms(key: str, rank_key: Optional[str] = None) -> float:
        values = samples[key][:index + 1]
        if rank_key is None:
            integral = trapezoid(values, times)
        else:
            ranks = samples[rank_key][:index + 1]
            integral = integrate_log_singular(times, values, ranks[0] < ranks[1], ranks[-1] < ranks[-2])
        return float(np.sqrt(max(integral, 0.0) / horizon))

    lambda_t, lambda_re = rms('speed'), rms('speed_re')
    log_rho, log_re = rms('log_rho', 'rank_rho'), rms('log_re', 'rank_re')
    start = m_r(traj.initial)
    if epsilon is None:
        delta = abs(m_r(traj.states[index]) - start)
    else:
        delta = max(start - epsilon, 0.0)
    return make_report(Theorem.RELATIVE_ENTROPY, delta, lambda_t * log_rho + lambda_re * log_re, horizon, {
        'lambda_T': lambda_t,
        'lambda_T_re': lambda_re,
        'rms_log_rho': log_rho,
        'rms_log_re_rho': log_re,
        'epsilon': epsilon,
        'samples': index + 1,
    })


def _trace_report(samples: _Samples, index: int) -> BoundReport:
    _require_samples(samples.traj, index)
    traj = samples.traj
    times = traj.times[:index + 1]
    delta = m_tr(traj.states[index]) - m_tr(traj.initial)
    speed = time_average(times, samples['speed'][:index + 1])
    return make_report(Theorem.TRACE, delta, speed, float(times[-1]), {'lambda_tr': speed, 'samples': index + 1})


def _angle_change(traj: Trajectory, index: int) -> float:
    return abs(imaginarity_angle(traj.states[index]) - imaginarity_angle(traj.initial))


def _geometric_report(samples: _Samples, index: int) -> BoundReport:
    _require_samples(samples.traj, index)
    traj = samples.traj
    speed = _geometric_speed(samples, index)
    kernel = samples['kernel'][:index + 1]
    return make_report(Theorem.GEOMETRIC, _angle_change(traj, index), speed, float(traj.times[index]), {
        'lambda_g': speed,
        'singular_start': bool(kernel[0]),
        'kernel_hits': int(np.count_nonzero(kernel)),
        'samples': index + 1,
    })


def _liouville_report(samples: _Samples, index: int) -> BoundReport:
    _require_samples(samples.traj, index)
    traj = samples.traj
    times = traj.times[:index + 1]
    speed = time_average(times, samples['speed'][:index + 1])
    # Θ_L / Λ is the Liouville-space bound itself; the imaginarity form can exceed T for mixed ρ_T
    theta_l = liouville_angle(traj.initial, traj.states[index])
    return make_report(Theorem.LIOUVILLE, _angle_change(traj, index), speed, float(times[-1]), {
        'lambda_dL': speed,
        'liouville_angle': theta_l,
        't_liouville_angle': theta_l / speed if speed > 0 else 0.0,
        'samples': index + 1,
    })


# public evaluators ----------------------------------------------------------------------------


def isl_relative_entropy(traj: Trajectory, epsilon: Optional[float] = None) -> BoundReport:
    """
    Relative-entropy bound T ≥ |ΔM_r| / (Λ_T ‖ln ρ‖_rms + Λ_T^Re ‖ln Re ρ‖_rms).

    Args:
        traj: Trajectory with at least three samples
        epsilon: When given, the change is M_r(ρ₀) − ε, the cost of reaching the ε threshold

    Returns:
        BoundReport: With Λ_T, Λ_T^Re and both RMS log-norms in the diagnostics
    """
    with logfire.span('evaluate T1 bound', samples=len(traj)):
        return _relative_entropy_report(_relative_entropy_samples(traj), len(traj) - 1, epsilon)


def isl_trace(traj: Trajectory) -> BoundReport:
    """Trace-distance bound T ≥ |ΔM_tr| / Λ_tr with Λ_tr the plain time average of ½‖ρ̇ − ρ̇ᵀ‖₁."""
    with logfire.span('evaluate T2 bound', samples=len(traj)):
        return _trace_report(_trace_samples(traj), len(traj) - 1)


def isl_geometric(traj: Trajectory) -> BoundReport:
    """Geometric bound T ≥ |Δ arccos√(1 − M_g)| / Λ_g with Λ_g the average of √tr(d√ρ/dt)²."""
    with logfire.span('evaluate T3 bound', samples=len(traj)):
        return _geometric_report(_geometric_samples(traj), len(traj) - 1)


def isl_liouville(traj: Trajectory) -> BoundReport:
    """Liouville-space bound with the time-averaged Liouvillian fluctuation as the speed.

    The diagnostics also carry Θ_L(ρ₀, ρ_T) and Θ_L / Λ_ΔL, which never exceeds the horizon.
    """
    with logfire.span('evaluate T4 bound', samples=len(traj)):
        return _liouville_report(_liouville_samples(traj), len(traj) - 1)


def isl_liouville_static(rho0: DensityMatrix, rho_t: DensityMatrix, g: Generator,
                         t_actual: Optional[float] = None) -> BoundReport:
    """
    Trajectory-free bound T ≥ |Δ_I| / ‖𝓛‖ for a time-independent generator.

    Raises:
        TimeDependentGenerator: If the generator has time-dependent rates
    """
    if not g.time_independent:
        raise TimeDependentGenerator(f"{g.kind} generator has time-dependent rates")
    delta = abs(imaginarity_angle(rho_t) - imaginarity_angle(rho0))
    norm = superop_norm(g)
    return make_report(Theorem.LIOUVILLE_STATIC, delta, norm, t_actual, {'superop_norm': norm})


def stochastic_approx_bound(traj: Trajectory, f: float) -> BoundReport:
    """
    Time needed to reach any state with fidelity at least f to the initial one: arccos√f / Λ_g.

    Raises:
        InvalidFidelity: If f is outside [0, 1]
    """
    f = check_fidelity_target(f)
    _require_samples(traj, len(traj) - 1)
    samples = _geometric_samples(traj)
    speed = _geometric_speed(samples, len(traj) - 1)
    return make_report(Theorem.STOCHASTIC_APPROX, float(np.arccos(np.sqrt(f))), speed, traj.horizon, {
        'lambda_g': speed,
        'fidelity': f,
        'min_geometric_imaginarity': min_geometric_within_fidelity(traj.initial, f),
    })


def generation_bound(traj: Trajectory) -> BoundReport:
    """T ≥ M_g(ρ_T) / Λ_g for dynamics that start from a real state."""
    if not is_real(traj.initial):
        raise InputError("generation bound needs a real initial state")
    samples = _geometric_samples(traj)
    speed = _geometric_speed(samples, len(traj) - 1)
    return make_report(Theorem.GENERATION, m_g(traj.final), speed, traj.horizon, {'lambda_g': speed})


def degradation_bound(traj: Trajectory) -> BoundReport:
    """T ≥ M_g(ρ₀) / Λ_g for dynamics that end in a real state."""
    if not is_real(traj.final):
        raise InputError("degradation bound needs a real final state")
    samples = _geometric_samples(traj)
    speed = _geometric_speed(samples, len(traj) - 1)
    return make_report(Theorem.DEGRADATION, m_g(traj.initial), speed, traj.horizon, {'lambda_g': speed})


_SWEEPABLE = {
    Theorem.RELATIVE_ENTROPY: (_relative_entropy_samples, _relative_entropy_report),
    Theorem.TRACE: (_trace_samples, _trace_report),
    Theorem.GEOMETRIC: (_geometric_samples, _geometric_report),
    Theorem.LIOUVILLE: (_liouville_samples, _liouville_report),
}


def sweep(traj: Trajectory, theorem: Theorem, horizons: Sequence[float]) -> List[BoundReport]:
    """
    Evaluate one trajectory-based bound at several horizons that lie on the trajectory grid.

    Raises:
        InputError: If the theorem needs no trajectory or a horizon is off the grid
    """
    theorem = Theorem(theorem)
    if theorem not in _SWEEPABLE:
        raise InputError(f"{theorem.value} cannot be swept over horizons")
    sampler, reporter = _SWEEPABLE[theorem]
    indices = []
    for horizon in horizons:
        k = int(np.argmin(np.abs(traj.times - horizon)))
        if abs(traj.times[k] - horizon) > 1e-9 * max(1.0, abs(horizon)):
            raise InputError(f"horizon {horizon!r} is not a trajectory grid point")
        indices.append(k)
    with logfire.span('sweep {theorem}', theorem=theorem.value, horizons=len(indices)):
        samples = sampler(traj)
        return [reporter(samples, k) for k in indices]


def _renormalized(m: np.ndarray) -> DensityMatrix:
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.real(np.trace(m)))


def t_epsilon(g: Generator, rho0: DensityMatrix, kind: MeasureKind, epsilon: float,
              t_max: float, dt: float) -> Optional[float]:
    """
    First time the measure drops to ε along the RK4 trajectory, or None if it stays above ε on [0, t_max].

    The bracketing grid interval is refined by bisection over single RK4 steps from its left end.
    """
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise InputError(f"epsilon must be positive, got {epsilon!r}")
    if not (t_max > 0 and dt > 0):
        raise InputError(f"t_max and dt must be positive, got t_max={t_max!r}, dt={dt!r}")
    kind = MeasureKind(kind)
    if measure(rho0, kind) <= epsilon:
        return 0.0
    times = uniform_grid(t_max, min(dt, t_max))
    m = rho0.matrix
    with logfire.span('threshold time for {kind}', kind=kind.value, epsilon=epsilon):
        for k in range(times.size - 1):
            t, h = times[k], times[k + 1] - times[k]
            m_next = _renormalized(rk4_step(g, t, m, h)).matrix
            if measure(DensityMatrix(m_next), kind) <= epsilon:
                lo, hi = 0.0, h
                while hi - lo > settings.BISECTION_TOL:
                    mid = (lo + hi) / 2
                    if measure(_renormalized(rk4_step(g, t, m, mid)), kind) <= epsilon:
                        hi = mid
                    else:
                        lo = mid
                return float(t + hi)
            m = m_next
    logfire.info('threshold not reached', kind=kind.value, epsilon=epsilon, t_max=t_max)
    return None
