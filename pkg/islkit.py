"""Command-line entry point: imaginarity measures, evolution, speed-limit bounds and figure datasets.

    python islkit.py measure state.json --kind rel
    python islkit.py --config run.json evolve
    python islkit.py --config run.json --format json bound
    python islkit.py figure 4 --outdir data/
    python islkit.py --config run.json teps
"""

from __future__ import annotations

import asyncio
import functools
import io
import json
import os
import sys
from pathlib import Path
from typing import List, Literal, Optional, Union

import click
import logfire
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

import settings
from bounds import (
    BoundReport,
    Theorem,
    isl_geometric,
    isl_liouville,
    isl_liouville_static,
    isl_relative_entropy,
    isl_trace,
    stochastic_approx_bound,
    sweep,
    t_epsilon,
)
from dynamics import (
    CustomLindblad,
    Dephasing,
    Dissipative,
    Generator,
    GeodesicDephasing,
    RateFunction,
    Trajectory,
    Unitary,
    propagate,
    read_rate_table,
    trajectory_frame,
    write_csv,
)
from errors import ConfigError, ConsistencyError, IslError, NumericalError
from measures import MeasureKind, imaginarity_angle, measure
from states import DensityMatrix, StateFile, load_state, theta_state

# Figure datasets: theorem and model per figure, T_k = k·(π/3)/60
FIGURES = {
    2: (Theorem.RELATIVE_ENTROPY, 'dephasing'),
    3: (Theorem.RELATIVE_ENTROPY, 'dissipative'),
    4: (Theorem.GEOMETRIC, 'dephasing'),
    5: (Theorem.GEOMETRIC, 'dissipative'),
}
FIGURE_THETAS = [(np.pi / 2, 'pi2'), (np.pi / 3, 'pi3'), (np.pi / 4, 'pi4')]
FIGURE_HORIZON = np.pi / 3
FIGURE_POINTS = 60
FIGURE_GAMMA = 2.0
# the θ = π/2 geometric column saturates t_isl = T, so coarser steps break validity
FIGURE_MAX_DT = 1e-3


class MatrixSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    re: List[List[float]]
    im: Optional[List[List[float]]] = None

    def to_matrix(self) -> np.ndarray:
        re = np.array(self.re, dtype=np.float64)
        im = np.zeros_like(re) if self.im is None else np.array(self.im, dtype=np.float64)
        if re.shape != im.shape:
            raise ConfigError(f"matrix re has shape {re.shape} but im has shape {im.shape}")
        return re + 1j * im


class JumpSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    operator: MatrixSpec
    rate: Union[float, str]


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')

    kind: Literal['unitary', 'dephasing', 'dissipative', 'lindblad', 'geodesic']
    hamiltonian: Optional[MatrixSpec] = None
    omega: Optional[float] = None
    jumps: List[JumpSpec] = Field(default_factory=list)
    rate: PositiveFloat = 1.0


class RunConfig(BaseModel):
    """A JSON run configuration; unknown keys are rejected."""

    model_config = ConfigDict(extra='forbid', protected_namespaces=())

    model: ModelSpec
    theta: float = np.pi / 2
    initial_state: Optional[str] = None
    gamma: Union[float, str] = FIGURE_GAMMA
    allow_negative_rates: bool = False
    omega0: float = 0.0
    T: PositiveFloat = 1.0
    dt: Optional[PositiveFloat] = None
    theorems: List[Theorem] = Field(default_factory=lambda: [Theorem.RELATIVE_ENTROPY])
    fidelity: Optional[float] = None
    measure: MeasureKind = MeasureKind.TRACE_DISTANCE
    epsilon: Optional[float] = None
    t_max: PositiveFloat = 10.0
    output: Optional[str] = None
    format: Optional[Literal['csv', 'json']] = None


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Parse a run configuration file.

    Raises:
        ConfigError: If the file is missing or not valid JSON
        ValidationError: If the JSON does not match the schema
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return RunConfig.model_validate_json(path.read_text())


def _resolve(base: Optional[Path], name: str) -> Path:
    p = Path(name)
    if base is not None and not p.is_absolute():
        p = base / p
    return p


def build_rate(config: RunConfig, value: Union[float, str], base: Optional[Path]) -> RateFunction:
    if isinstance(value, str):
        return read_rate_table(_resolve(base, value), allow_negative=config.allow_negative_rates)
    return RateFunction.constant(value)


def build_initial_state(config: RunConfig, base: Optional[Path] = None) -> DensityMatrix:
    if config.initial_state is not None:
        return load_state(_resolve(base, config.initial_state))
    return theta_state(config.theta)


def build_generator(config: RunConfig, rho0: DensityMatrix, base: Optional[Path] = None) -> Generator:
    spec = config.model
    if spec.kind == 'unitary':
        if spec.hamiltonian is not None:
            return Unitary(spec.hamiltonian.to_matrix())
        if spec.omega is None:
            raise ConfigError("unitary model needs either hamiltonian or omega")
        return Unitary.x_rotation(spec.omega)
    if spec.kind == 'dephasing':
        return Dephasing(build_rate(config, config.gamma, base), config.omega0)
    if spec.kind == 'dissipative':
        return Dissipative(build_rate(config, config.gamma, base))
    if spec.kind == 'geodesic':
        return GeodesicDephasing(rho0, spec.rate)
    if spec.hamiltonian is None:
        raise ConfigError("lindblad model needs a hamiltonian")
    jumps = tuple((j.operator.to_matrix(), build_rate(config, j.rate, base)) for j in spec.jumps)
    return CustomLindblad(spec.hamiltonian.to_matrix(), jumps)


def step_size(config: RunConfig, horizon: float) -> float:
    dt = config.dt if config.dt is not None else settings.get_default_dt()
    return min(dt, horizon)


def evaluate_theorem(theorem: Theorem, traj: Trajectory, config: RunConfig) -> BoundReport:
    if theorem is Theorem.RELATIVE_ENTROPY:
        return isl_relative_entropy(traj, config.epsilon)
    if theorem is Theorem.TRACE:
        return isl_trace(traj)
    if theorem is Theorem.GEOMETRIC:
        return isl_geometric(traj)
    if theorem is Theorem.LIOUVILLE:
        return isl_liouville(traj)
    if theorem is Theorem.LIOUVILLE_STATIC:
        return isl_liouville_static(traj.initial, traj.final, traj.generator, traj.horizon)
    if theorem is Theorem.STOCHASTIC_APPROX:
        if config.fidelity is None:
            raise ConfigError("StochApprox needs a fidelity target in the config")
        return stochastic_approx_bound(traj, config.fidelity)
    raise ConfigError(f"theorem {theorem.value} is not available from the command line")


def figure_dt(dt: float) -> float:
    """Largest step ≤ min(dt, FIGURE_MAX_DT) that puts every figure horizon on the RK4 grid."""
    spacing = FIGURE_HORIZON / FIGURE_POINTS
    return spacing / int(np.ceil(spacing / min(dt, FIGURE_MAX_DT) - 1e-9))


def _figure_column(figure_id: int, theta: float, dt: float) -> List[float]:
    theorem, model = FIGURES[figure_id]
    gen = Dephasing(FIGURE_GAMMA) if model == 'dephasing' else Dissipative(FIGURE_GAMMA)
    with logfire.span('figure {figure_id} column', figure_id=figure_id, theta=theta):
        traj = propagate(gen, theta_state(theta), FIGURE_HORIZON, dt)
        return [r.t_isl for r in sweep(traj, theorem, figure_horizons())]


def figure_horizons() -> np.ndarray:
    return np.arange(1, FIGURE_POINTS + 1) * (FIGURE_HORIZON / FIGURE_POINTS)


async def _figure_columns(figure_id: int, dt: float) -> List[List[float]]:
    semaphore = asyncio.Semaphore(settings.get_max_workers())

    async def column(theta: float) -> List[float]:
        async with semaphore:
            return await asyncio.to_thread(_figure_column, figure_id, theta, dt)

    return await asyncio.gather(*[column(theta) for theta, _ in FIGURE_THETAS])


def figure_dataset(figure_id: int, dt: Optional[float] = None) -> pd.DataFrame:
    """
    Speed-limit times for the three initial states over the figure grid.

    Raises:
        ConfigError: If the figure id is unknown
        ConsistencyError: If any bound exceeds its horizon

    Rows where a smaller θ gives a larger bound are kept; their horizons are listed in
    `frame.attrs['theta_inversions']` and logged as a warning.
    """
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure {figure_id}; choose one of {sorted(FIGURES)}")
    step = figure_dt(dt if dt is not None else settings.get_default_dt())
    columns = asyncio.run(_figure_columns(figure_id, step))
    frame = pd.DataFrame({'T': figure_horizons()})
    for (_, label), values in zip(FIGURE_THETAS, columns):
        frame[f't_isl_theta_{label}'] = values

    values = frame.to_numpy()
    tol = settings.VALIDITY_TOL
    if np.any(values[:, 1:] > values[:, :1] + tol):
        raise ConsistencyError(f"figure {figure_id}: a bound exceeds the actual time")
    inverted = np.any(np.diff(values[:, 1:], axis=1) > tol, axis=1)
    frame.attrs['theta_inversions'] = [float(t) for t in values[inverted, 0]]
    if np.any(inverted):
        logfire.warn('figure {figure_id}: bound times not ordered by theta', figure_id=figure_id,
                     horizons=frame.attrs['theta_inversions'])
    return frame


def _emit(text: str, out: Optional[str]):
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, 'w', newline='') as f:
            f.write(text)


def exit_codes(func):
    """0 on success, 2 for input or configuration errors, 3 for numerical failures."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except NumericalError as e:
            click.echo(f"error: {e.name}: {e}", err=True)
            sys.exit(3)
        except (ValueError, OSError) as e:
            name = e.name if isinstance(e, IslError) else type(e).__name__
            click.echo(f"error: {name}: {e}", err=True)
            sys.exit(2)

    return wrapper


class CliOptions(BaseModel):
    config: Optional[str] = None
    out: Optional[str] = None
    format: Optional[Literal['csv', 'json']] = None

    def run_config(self) -> RunConfig:
        if self.config is None:
            raise ConfigError("this command needs --config PATH")
        return load_config(self.config)

    def base_dir(self) -> Optional[Path]:
        return None if self.config is None else Path(self.config).resolve().parent

    def output(self, config: Optional[RunConfig] = None) -> Optional[str]:
        if self.out is not None:
            return self.out
        if config is not None and config.output is not None:
            return str(_resolve(self.base_dir(), config.output))
        return None

    def output_format(self, config: Optional[RunConfig], default: str) -> str:
        if self.format is not None:
            return self.format
        if config is not None and config.format is not None:
            return config.format
        return default


@click.group()
@click.option('--config', 'config', type=click.Path(dir_okay=False), default=None, help='JSON run configuration.')
@click.option('--out', 'out', type=click.Path(), default=None, help='Write results here instead of stdout.')
@click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default=None, help='Output format.')
@click.pass_context
@exit_codes
def cli(ctx, config, out, fmt):
    """Imaginarity measures and imaginarity speed limits."""
    settings.get_log_level()
    ctx.obj = CliOptions(config=config, out=out, format=fmt)


@cli.command('measure')
@click.argument('state_file', type=click.Path(dir_okay=False))
@click.option('-k', '--kind', type=click.Choice(['tr', 'rel', 'geom', 'angle']), default='rel',
              help='Which imaginarity quantifier to print.')
@exit_codes
def cmd_measure(state_file, kind):
    """Print an imaginarity measure of a JSON state with 12 significant digits."""
    rho = load_state(state_file)
    value = imaginarity_angle(rho) if kind == 'angle' else measure(rho, MeasureKind(kind))
    click.echo(f"{value:.12g}")


@cli.command('evolve')
@click.pass_obj
@exit_codes
def cmd_evolve(options: CliOptions):
    """Propagate the configured model and write the trajectory."""
    config = options.run_config()
    base = options.base_dir()
    rho0 = build_initial_state(config, base)
    gen = build_generator(config, rho0, base)
    traj = propagate(gen, rho0, config.T, step_size(config, config.T))

    if options.output_format(config, 'csv') == 'json':
        payload = {
            'generator': gen.kind,
            'times': traj.times.tolist(),
            'states': [StateFile.from_state(s).model_dump() for s in traj.states],
        }
        text = json.dumps(payload) + '\n'
    else:
        buffer = io.StringIO()
        write_csv(trajectory_frame(traj), buffer, f"time in units of 1/gamma; generator={gen.kind}")
        text = buffer.getvalue()
    _emit(text, options.output(config))


@cli.command('bound')
@click.pass_obj
@exit_codes
def cmd_bound(options: CliOptions):
    """Evaluate every configured speed-limit theorem on the propagated trajectory."""
    config = options.run_config()
    base = options.base_dir()
    rho0 = build_initial_state(config, base)
    gen = build_generator(config, rho0, base)
    traj = propagate(gen, rho0, config.T, step_size(config, config.T))
    reports = [evaluate_theorem(theorem, traj, config) for theorem in config.theorems]

    if options.output_format(config, 'json') == 'csv':
        frame = pd.DataFrame([{
            'theorem': r.theorem.value,
            'delta_I': r.delta_I,
            'lambda': r.lambda_,
            't_isl': r.t_isl,
            't_actual': r.t_actual,
            'valid': r.valid,
            'vacuous': r.vacuous,
        } for r in reports])
        buffer = io.StringIO()
        write_csv(frame, buffer, 'time in units of 1/gamma')
        text = buffer.getvalue()
    else:
        text = json.dumps([r.model_dump(mode='json', by_alias=True) for r in reports], indent=2) + '\n'
    _emit(text, options.output(config))


@cli.command('figure')
@click.argument('figure_id', type=click.IntRange(2, 5))
@click.option('-o', '--outdir', type=click.Path(file_okay=False), default=None,
              help='Directory for figure_<id>.csv (defaults to --out or the working directory).')
@click.pass_obj
@exit_codes
def cmd_figure(options: CliOptions, figure_id, outdir):
    """Write the speed-limit dataset behind one figure as figure_<id>.csv."""
    theorem, model = FIGURES[figure_id]
    frame = figure_dataset(figure_id)
    target_dir = Path(outdir or options.out or '.')
    os.makedirs(target_dir, exist_ok=True)
    target = target_dir / f"figure_{figure_id}.csv"
    comment = f"time in units of 1/gamma; gamma={FIGURE_GAMMA:g}, omega0=0, theorem={theorem.value}, model={model}"
    inversions = frame.attrs.get('theta_inversions', [])
    if inversions:
        comment += '; theta order inverted at T=' + ' '.join(f"{t:.6g}" for t in inversions)
    write_csv(frame, target, comment)
    click.echo(str(target))


@cli.command('teps')
@click.pass_obj
@exit_codes
def cmd_teps(options: CliOptions):
    """Print the first time the configured measure drops to epsilon, or not-reached."""
    config = options.run_config()
    if config.epsilon is None:
        raise ConfigError("teps needs epsilon in the config")
    base = options.base_dir()
    rho0 = build_initial_state(config, base)
    gen = build_generator(config, rho0, base)
    value = t_epsilon(gen, rho0, config.measure, config.epsilon, config.t_max, step_size(config, config.t_max))
    click.echo('not-reached' if value is None else f"{value:.10g}")


if __name__ == '__main__':
    cli()
