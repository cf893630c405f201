"""
Parameter Sweeps and Experiment Recipes
=======================================

Evaluates a set of link metrics over a 1-D or 2-D grid of configuration
values and writes plot-ready tables.

A sweep is described by a SweepSpec: a base SimulationConfig, one or two
axes addressed by dotted setting names in file units (e.g.
'geometry.tilt_x_deg'), the metric names to evaluate and the Monte Carlo
trial count and seed. The special axis 'budget.snr_db' sets N_0 = P_t / SNR
at each point instead of editing the config.

Grid points are independent. Each draws its random numbers from
SeedSequence([seed, point_index]) so the table does not depend on the
number of workers. A point whose geometry is infeasible is kept with the
reason in the 'skipped' column.

Usage:
    from src.harness import recipe, run_sweep, write_result
    result = run_sweep(recipe('fig4b'))
    write_result(result, 'fig4b.csv')
"""

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from . import __version__, config
from .channel import ChannelMatrix, channel_from_geometry, circulant_residual, reduce_channel
from .errors import ConfigError, OamNfcError
from .metrics import (
    ber_ls,
    ber_oam_analytic,
    capacity_bounds,
    capacity_ls,
    capacity_mimo_for,
    capacity_oam,
    capacity_oam_simplified,
    capacity_siso,
    half_power_point,
)
from .results import SweepResult
from .settings import SimulationConfig, snapshot_digest
from .txrx import LinkBudget, estimate_channel_ls, run_ber

SNR_AXIS = 'budget.snr_db'
DIAGNOSTIC_COLUMNS = ('condition_number', 'skipped', 'notes')


# ==============================================================================
# SWEEP TYPES
# ==============================================================================

def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (tuple, list)):
        return tuple(_plain(v) for v in value)
    return value


@dataclass(frozen=True)
class Axis:
    """
    One swept parameter.

    Each value is applied to every target. A value that is a tuple is
    spread over the targets instead, one component each, e.g.
    Axis('rings', ((2, 2), (4, 8)), targets=('geometry.n_tx', 'geometry.n_rx')).
    """
    name: str
    values: Tuple[Any, ...]
    targets: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(_plain(v) for v in self.values))
        object.__setattr__(self, 'targets', tuple(self.targets) or (self.name,))
        if not self.values:
            raise ConfigError(f"axis {self.name!r} has no values", key=self.name)

    @classmethod
    def span(cls, name: str, start: float, stop: float, step: Optional[float] = None,
             points: Optional[int] = None, targets: Sequence[str] = ()) -> 'Axis':
        """Inclusive range given either a step or a point count."""
        if (step is None) == (points is None):
            raise ConfigError("give exactly one of step or points", key=name)
        if step is not None:
            if step <= 0 or stop < start:
                raise ConfigError(f"empty range {start}..{stop} step {step}", key=name)
            count = int(round((stop - start) / step)) + 1
            values = start + step * np.arange(count)
        else:
            if points < 1:
                raise ConfigError(f"points must be >= 1, got {points}", key=name)
            values = np.linspace(start, stop, points)
        return cls(name, tuple(np.round(values, 10).tolist()), tuple(targets))

    def assignments(self, value: Any) -> List[Tuple[str, Any]]:
        if isinstance(value, tuple):
            if len(value) != len(self.targets):
                raise ConfigError(
                    f"axis {self.name!r}: value {value} does not match targets {self.targets}",
                    key=self.name,
                )
            return list(zip(self.targets, value))
        return [(target, value) for target in self.targets]


@dataclass(frozen=True)
class Metric:
    name: str
    columns: Tuple[str, ...]
    evaluate: Callable[['PointContext'], Dict[str, float]]


@dataclass(frozen=True)
class SweepSpec:
    name: str
    base: SimulationConfig
    axes: Tuple[Axis, ...]
    metrics: Tuple[str, ...]
    trials: int = config.BER_TRIALS
    seed: int = config.RANDOM_SEED
    description: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'axes', tuple(self.axes))
        object.__setattr__(self, 'metrics', tuple(self.metrics))

    def validate(self) -> 'SweepSpec':
        """
        Raises:
            ConfigError: no metrics, unknown metric, wrong number of axes,
                unknown target or a value the target's type rejects
        """
        if not self.metrics:
            raise ConfigError("a sweep needs at least one metric", key='metrics')
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ConfigError(f"unknown metric(s) {unknown}; known: {sorted(METRICS)}",
                              key='metrics')
        if not 1 <= len(self.axes) <= 2:
            raise ConfigError(f"a sweep takes 1 or 2 axes, got {len(self.axes)}", key='axes')
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}", key='run.trials')
        columns = [t for axis in self.axes for t in axis.targets]
        if len(set(columns)) != len(columns):
            raise ConfigError(f"axes share a target: {columns}", key='axes')
        for axis in self.axes:
            for value in axis.values:
                for target, component in axis.assignments(value):
                    if target == SNR_AXIS:
                        if isinstance(component, bool) or not isinstance(component, (int, float)):
                            raise ConfigError(f"SNR value {component!r} is not a number", key=target)
                        continue
                    self.base.replace(target, component)
        return self

    @property
    def axis_columns(self) -> List[str]:
        return [t for axis in self.axes for t in axis.targets]

    @property
    def metric_columns(self) -> List[str]:
        columns = [c for m in self.metrics for c in METRICS[m].columns]
        return list(dict.fromkeys(columns))

    def grid(self) -> List[Tuple[Any, ...]]:
        """Grid points in row-major order (last axis fastest)."""
        if len(self.axes) == 1:
            return [(v,) for v in self.axes[0].values]
        return [(a, b) for a in self.axes[0].values for b in self.axes[1].values]

    def snapshot(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'config': self.base.snapshot(),
            'axes': [{'name': a.name, 'targets': list(a.targets),
                      'values': [list(v) if isinstance(v, tuple) else v for v in a.values]}
                     for a in self.axes],
            'metrics': list(self.metrics),
            'trials': self.trials,
            'seed': self.seed,
        }

    def digest(self) -> str:
        return snapshot_digest(self.snapshot())


# ==============================================================================
# POINT EVALUATION
# ==============================================================================

class PointContext:
    """Lazily built link objects for one grid point; each is built at most once."""

    def __init__(self, cfg: SimulationConfig, snr_db: Optional[float],
                 rng: np.random.Generator, trials: int):
        self.config = cfg
        self.snr_db = snr_db
        self.rng = rng
        self.trials = trials

    @cached_property
    def geometry(self):
        return self.config.link_geometry()

    @cached_property
    def electrical(self):
        return self.config.coil_electrical(self.geometry)

    @cached_property
    def budget(self) -> LinkBudget:
        budget = self.config.link_budget()
        return budget if self.snr_db is None else budget.at_snr(self.snr_db)

    @cached_property
    def pilot(self):
        return self.config.pilot_config()

    @property
    def convention(self):
        return self.config.convention

    @cached_property
    def channel(self) -> ChannelMatrix:
        return channel_from_geometry(self.geometry, self.electrical,
                                     crosstalk=self.config.flags.crosstalk,
                                     convention=self.convention)

    @cached_property
    def h_est(self) -> np.ndarray:
        return estimate_channel_ls(self.channel, self.pilot, self.rng)

    @cached_property
    def ls_bits(self) -> float:
        return capacity_ls(self.channel, self.h_est, self.budget).total_bits

    def mimo_bits(self, waterfill: bool) -> float:
        return capacity_mimo_for(self.channel, self.budget, self.config.flags.correlation,
                                 waterfill_power=waterfill, convention=self.convention)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.channel.h))


def _bounds(ctx: PointContext) -> Dict[str, float]:
    b = capacity_bounds(ctx.geometry, ctx.electrical, ctx.budget, ctx.convention)
    return {'bounds_lower': b.lower, 'bounds_upper': b.upper,
            'bounds_jensen_upper': b.jensen_upper, 'bounds_dominance_lower': b.dominance_lower}


def _ber_mc(ctx: PointContext) -> Dict[str, float]:
    curve = run_ber(ctx.channel, ctx.budget, detector=ctx.config.flags.detector,
                    trials=ctx.trials, rng=ctx.rng, snr_grid=[], pilot=ctx.pilot)
    return {'ber_mc': float(curve.ber[0]), 'ber_mc_low': float(curve.ci_low[0]),
            'ber_mc_high': float(curve.ci_high[0]), 'ber_mc_errors': int(curve.errors[0])}


def _gap(ctx: PointContext) -> Dict[str, float]:
    c_mimo = ctx.mimo_bits(ctx.config.flags.waterfill)
    return {'capacity_ls': ctx.ls_bits, 'capacity_mimo': c_mimo,
            'capacity_gap': ctx.ls_bits - c_mimo}


_METRIC_LIST = [
    Metric('capacity_oam', ('capacity_oam',),
           lambda ctx: {'capacity_oam': capacity_oam(ctx.channel, ctx.budget).total_bits}),
    Metric('capacity_oam_simplified', ('capacity_oam_simplified',),
           lambda ctx: {'capacity_oam_simplified': capacity_oam_simplified(
               ctx.geometry, ctx.electrical, ctx.budget, ctx.convention).total_bits}),
    Metric('capacity_ls', ('capacity_ls',), lambda ctx: {'capacity_ls': ctx.ls_bits}),
    Metric('capacity_siso', ('capacity_siso',),
           lambda ctx: {'capacity_siso': capacity_siso(ctx.geometry, ctx.electrical,
                                                       ctx.budget, ctx.convention)}),
    Metric('capacity_mimo', ('capacity_mimo',),
           lambda ctx: {'capacity_mimo': ctx.mimo_bits(False)}),
    Metric('capacity_mimo_wf', ('capacity_mimo_wf',),
           lambda ctx: {'capacity_mimo_wf': ctx.mimo_bits(True)}),
    Metric('capacity_gap', ('capacity_ls', 'capacity_mimo', 'capacity_gap'), _gap),
    Metric('ber_analytic', ('ber_analytic',),
           lambda ctx: {'ber_analytic': ber_oam_analytic(ctx.channel, ctx.budget)}),
    Metric('ber_ls', ('ber_ls',),
           lambda ctx: {'ber_ls': ber_ls(ctx.channel, ctx.h_est, ctx.budget)}),
    Metric('ber_mc', ('ber_mc', 'ber_mc_low', 'ber_mc_high', 'ber_mc_errors'), _ber_mc),
    Metric('bounds', ('bounds_lower', 'bounds_upper', 'bounds_jensen_upper',
                      'bounds_dominance_lower'), _bounds),
    Metric('circulant_residual', ('circulant_residual',),
           lambda ctx: {'circulant_residual': circulant_residual(reduce_channel(ctx.channel))}),
]
METRICS: Dict[str, Metric] = {m.name: m for m in _METRIC_LIST}


def _reason(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _evaluate_point(spec: SweepSpec, index: int, point: Tuple[Any, ...]) -> Dict[str, Any]:
    assigned = [pair for axis, value in zip(spec.axes, point) for pair in axis.assignments(value)]
    row: Dict[str, Any] = dict(assigned)
    for column in spec.metric_columns:
        row.setdefault(column, np.nan)
    row.update(condition_number=np.nan, skipped='', notes='')

    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    snr_db = None
    try:
        cfg = spec.base
        for target, value in assigned:
            if target == SNR_AXIS:
                snr_db = float(value)
            else:
                cfg = cfg.replace(target, value)
        ctx = PointContext(cfg, snr_db, rng, spec.trials)
        ctx.geometry
        ctx.electrical
    except OamNfcError as exc:
        row['skipped'] = _reason(exc)
        return row

    notes = []
    failed = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        for name in spec.metrics:
            try:
                row.update(METRICS[name].evaluate(ctx))
            except OamNfcError as exc:
                failed += 1
                notes.append(f"{name}: {_reason(exc)}")
        if 'channel' in vars(ctx):
            row['condition_number'] = ctx.condition
    notes.extend(f"warning: {w.message}" for w in caught)

    if failed == len(spec.metrics):
        row['skipped'] = '; '.join(notes)
    else:
        row['notes'] = '; '.join(notes)
    return row


def run_sweep(spec: SweepSpec, n_jobs: Optional[int] = None, progress: bool = True) -> SweepResult:
    """
    Evaluate every metric of the spec at every grid point.

    Args:
        spec: Sweep description (validated here)
        n_jobs: Worker processes; config.N_JOBS when omitted, 1 runs inline
        progress: Show a tqdm bar

    Returns:
        SweepResult with one row per grid point

    Raises:
        ConfigError: invalid spec
    """
    spec.validate()
    n_jobs = config.N_JOBS if n_jobs is None else n_jobs
    points = spec.grid()
    bar = tqdm(list(enumerate(points)), desc=spec.name, disable=not progress,
               dynamic_ncols=True, leave=False)
    if n_jobs == 1:
        rows = [_evaluate_point(spec, i, p) for i, p in bar]
    else:
        rows = Parallel(n_jobs=n_jobs)(delayed(_evaluate_point)(spec, i, p) for i, p in bar)

    columns = spec.axis_columns + spec.metric_columns + list(DIAGNOSTIC_COLUMNS)
    table = pd.DataFrame(rows, columns=columns)
    if 'ber_mc_errors' in table:
        table['ber_mc_errors'] = table['ber_mc_errors'].astype('Int64')
    skipped = int((table['skipped'] != '').sum())
    if skipped:
        warnings.warn(f"{spec.name}: {skipped} of {len(table)} grid points skipped",
                      RuntimeWarning, stacklevel=2)
    return SweepResult(name=spec.name, axes=spec.axis_columns, metrics=spec.metric_columns,
                       table=table, seed=spec.seed, snapshot=spec.snapshot(), version=__version__)


# ==============================================================================
# RECIPES
# ==============================================================================

def _with(cfg: SimulationConfig, **settings) -> SimulationConfig:
    """Apply 'section__key=value' overrides."""
    for key, value in settings.items():
        cfg = cfg.replace(key.replace('__', '.'), value)
    return cfg


def analytic_baseline() -> SimulationConfig:
    """
    Reference link of the capacity study: N = 8, R = 25 mm, r = 5 mm,
    D = 25 mm, one turn, P_t = 8 W, N_0 = 0.08 W, coils tuned to the carrier.
    """
    return _with(SimulationConfig(), electrical__resonance_mhz=config.FREQUENCY_HZ / 1e6)


def solver_baseline() -> SimulationConfig:
    """Five-turn coil model of the scheme comparison, also tuned to the carrier."""
    return _with(analytic_baseline(),
                 geometry__turns_tx=config.SOLVER_MODEL_TURNS,
                 geometry__turns_rx=config.SOLVER_MODEL_TURNS)


def _snr_axis(stop: float, step: float = 1.0) -> Axis:
    return Axis.span(SNR_AXIS, 0.0, stop, step=step)


def misalignment_baseline() -> SimulationConfig:
    """
    Link of the offset x tilt surfaces: the reference link with the
    closed-form kernel's own elliptic integrals (upper limit pi).
    """
    return _with(analytic_baseline(), flags__convention='doubled')


def _misalignment_axes() -> Tuple[Axis, Axis]:
    return (Axis.span('geometry.offset_x_mm', 0.0, 25.0, step=1.0),
            Axis.span('geometry.tilt_x_deg', -60.0, 60.0, step=4.0))


def _fig3a() -> dict:
    return dict(base=misalignment_baseline(), axes=_misalignment_axes(), metrics=('capacity_oam',),
                description='blind-detection capacity over lateral offset and tilt')


def _fig3b() -> dict:
    return dict(base=_with(misalignment_baseline(), pilot__snr_db=math.inf),
                axes=_misalignment_axes(), metrics=('capacity_ls',),
                description='LS-detection capacity (perfect CSI) over lateral offset and tilt')


def _ring_count_axes() -> Tuple[Axis, Axis]:
    return (Axis.span('geometry.n_tx', 1, 20, step=1),
            Axis.span('geometry.n_rx', 1, 20, step=1))


def _wide_rings(cfg: SimulationConfig) -> SimulationConfig:
    return _with(cfg, geometry__ring_radius_tx_mm=50.0, geometry__ring_radius_rx_mm=50.0,
                 pilot__length=23, pilot__snr_db=math.inf)


def _fig4a() -> dict:
    return dict(base=_wide_rings(analytic_baseline()), axes=_ring_count_axes(),
                metrics=('capacity_ls',),
                description='capacity against the number of transmit and receive coils (R = 50 mm)')


def _fig4b() -> dict:
    return dict(base=analytic_baseline(),
                axes=(Axis.span('geometry.axial_distance_mm', 0.0, 50.0,
                                points=config.GRID_POINTS_1D),),
                metrics=('capacity_oam_simplified', 'bounds'),
                description='aligned capacity and its limits against transceiver distance')


def _fig4c() -> dict:
    return dict(base=analytic_baseline(),
                axes=(Axis.span('geometry.ring_radius_tx_mm', 20.0, 100.0,
                                points=config.GRID_POINTS_2D),
                      Axis.span('geometry.ring_radius_rx_mm', 20.0, 100.0,
                                points=config.GRID_POINTS_2D)),
                metrics=('capacity_oam_simplified',),
                description='aligned capacity against transmit and receive ring radii')


def _fig4d() -> dict:
    base = _with(analytic_baseline(), geometry__ring_radius_tx_mm=15.0,
                 geometry__ring_radius_rx_mm=15.0)
    return dict(base=base,
                axes=(Axis.span('geometry.coil_radius_tx_mm', 0.0, 15.0,
                                points=config.GRID_POINTS_2D),
                      Axis.span('geometry.coil_radius_rx_mm', 0.0, 15.0,
                                points=config.GRID_POINTS_2D)),
                metrics=('capacity_oam_simplified',),
                description='aligned capacity against transmit and receive coil radii (R = 15 mm)')


def _fig10() -> dict:
    return dict(base=_wide_rings(analytic_baseline()), axes=_ring_count_axes(),
                metrics=('capacity_gap',),
                description='LS OAM capacity minus correlated MIMO capacity (R = 50 mm)')


def _fig9() -> dict:
    return dict(base=solver_baseline(), axes=(_snr_axis(25.0),),
                metrics=('capacity_oam', 'capacity_ls', 'capacity_siso', 'capacity_mimo',
                         'capacity_mimo_wf'),
                description='OAM against SISO and MIMO over SNR')


def _ber_curves() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('flags.detector', ('blind', 'ls')), _snr_axis(30.0)),
                metrics=('ber_analytic', 'ber_ls', 'ber_mc'),
                description='analytic and Monte Carlo BER for both detectors')


def _ber_frequency() -> dict:
    base = _with(solver_baseline(), electrical__resonance_mhz=config.RESONANCE_HZ / 1e6)
    return dict(base=base,
                axes=(Axis('electrical.frequency_mhz', (13.56, 5800.0)), _snr_axis(30.0)),
                metrics=('ber_analytic',),
                description='analytic BER at 13.56 MHz and 5.8 GHz, coils resonant at 13.35 MHz')


def _fig11a() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('geometry.tilt_x_deg', (0.0, 5.0, 10.0, 20.0)), _snr_axis(50.0, 2.0)),
                metrics=('capacity_oam', 'capacity_ls'),
                description='capacity over SNR for several receive-ring tilts')


def _fig11b() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('geometry.offset_x_mm', (0.0, 5.0, 10.0, 20.0)), _snr_axis(50.0, 2.0)),
                metrics=('capacity_oam', 'capacity_ls'),
                description='capacity over SNR for several lateral offsets')


def _sweep_misalign() -> dict:
    cases = ((0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (20.0, 0.0),
             (0.0, 5.0), (0.0, 10.0), (0.0, 20.0))
    return dict(base=solver_baseline(),
                axes=(Axis('misalignment', cases,
                           targets=('geometry.offset_x_mm', 'geometry.tilt_x_deg')),
                      _snr_axis(50.0, 2.0)),
                metrics=('capacity_ls',),
                description='estimated-channel capacity under offset or tilt')


def _sweep_n() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('rings', ((2, 2), (4, 4), (4, 8), (8, 8)),
                           targets=('geometry.n_tx', 'geometry.n_rx')),
                      _snr_axis(25.0)),
                metrics=('capacity_ls',),
                description='estimated-channel capacity for several coil counts')


def _sweep_d() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('geometry.axial_distance_mm', (10.0, 25.0, 40.0)), _snr_axis(50.0, 2.0)),
                metrics=('capacity_ls',),
                description='estimated-channel capacity for several distances')


def _sweep_ring_radius() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('ring_radius_mm', (25.0, 40.0, 55.0),
                           targets=('geometry.ring_radius_tx_mm', 'geometry.ring_radius_rx_mm')),
                      _snr_axis(50.0, 2.0)),
                metrics=('capacity_ls',),
                description='estimated-channel capacity for several ring radii')


def _sweep_coil_radius() -> dict:
    return dict(base=solver_baseline(),
                axes=(Axis('coil_radius_mm', (1.0, 5.0, 9.0),
                           targets=('geometry.coil_radius_tx_mm', 'geometry.coil_radius_rx_mm')),
                      _snr_axis(50.0, 2.0)),
                metrics=('capacity_ls',),
                description='estimated-channel capacity for several coil radii')


RECIPES: Dict[str, Callable[[], dict]] = {
    'fig3a': _fig3a,
    'fig3b': _fig3b,
    'fig4a': _fig4a,
    'fig4b': _fig4b,
    'fig4c': _fig4c,
    'fig4d': _fig4d,
    'fig9': _fig9,
    'fig10': _fig10,
    'fig11a': _fig11a,
    'fig11b': _fig11b,
    'ber_curves': _ber_curves,
    'ber_frequency': _ber_frequency,
    'sweep_misalign': _sweep_misalign,
    'sweep_N': _sweep_n,
    'sweep_D': _sweep_d,
    'sweep_R': _sweep_ring_radius,
    'sweep_r': _sweep_coil_radius,
}


def recipe(name: str, seed: int = config.RANDOM_SEED, trials: Optional[int] = None) -> SweepSpec:
    """
    Fully populated SweepSpec of a named experiment.

    Raises:
        ConfigError: unknown recipe name
    """
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; known: {', '.join(RECIPES)}", key='recipe')
    fields_ = RECIPES[name]()
    return SweepSpec(name=name, trials=trials or config.BER_TRIALS, seed=seed, **fields_).validate()


# ==============================================================================
# OUTPUT
# ==============================================================================

def result_header(result: SweepResult) -> List[str]:
    return [
        f"sweep: {result.name}",
        f"config_digest: {snapshot_digest(result.snapshot)}",
        f"seed: {result.seed}",
        f"version: {result.version}",
        f"axes: {', '.join(result.axes)}",
        f"metrics: {', '.join(result.metrics)}",
    ]


def write_result(result: SweepResult, path: Union[str, Path], json_mirror: bool = False) -> Path:
    """
    CSV with '#' metadata lines, fixed float format; optional JSON mirror next to it.

    Returns:
        Path of the CSV
    """
    path = Path(path)
    with open(path, 'w') as f:
        for line in result_header(result):
            f.write(f"# {line}\n")
        result.table.to_csv(f, index=False, float_format=config.CSV_FLOAT_FORMAT,
                            lineterminator='\n')
    if json_mirror:
        payload = {
            'name': result.name,
            'seed': result.seed,
            'version': result.version,
            'config_digest': snapshot_digest(result.snapshot),
            'snapshot': result.snapshot,
            'axes': result.axes,
            'metrics': result.metrics,
            'rows': json.loads(result.table.to_json(orient='records', double_precision=12)),
        }
        path.with_suffix('.json').write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n')
    return path


def summarize_half_power(result: SweepResult, metric: Optional[str] = None) -> Dict[str, Any]:
    """
    3 dB points of a lateral-offset x tilt capacity surface.

    The tilt point is read along the zero-offset row and the offset point
    along the zero-tilt column, both relative to the aligned capacity.
    """
    offset, tilt = 'geometry.offset_x_mm', 'geometry.tilt_x_deg'
    if offset not in result.axes or tilt not in result.axes:
        raise ConfigError(f"{result.name} is not an offset x tilt surface", key='axes')
    metric = metric or next(m for m in result.metrics if m.startswith('capacity'))
    table = result.table
    aligned = table[(table[offset] == 0) & (table[tilt] == 0)]
    if aligned.empty or aligned[metric].isna().all():
        raise ConfigError(f"{result.name} has no aligned point for {metric}", key='axes')
    reference = float(aligned[metric].iloc[0])
    along_tilt = table[table[offset] == 0].sort_values(tilt)
    along_offset = table[table[tilt] == 0].sort_values(offset)
    return {
        'metric': metric,
        'aligned': reference,
        'tilt_deg': half_power_point(along_tilt[tilt], along_tilt[metric], reference),
        'offset_mm': half_power_point(along_offset[offset], along_offset[metric], reference),
    }


def _fmt(value: Any) -> str:
    if value is None:
        return 'not reached'
    if isinstance(value, float):
        return f"{value:{config.TABLE_FLOAT_FORMAT}}"
    return str(value)


def write_finding(result: SweepResult, path: Union[str, Path],
                  summary: Optional[Dict[str, Any]] = None, notes: Sequence[str] = ()) -> Path:
    """Short Markdown summary of a sweep: metric ranges, skipped points, optional extras."""
    table = result.evaluated
    L = []
    L.append(f"# {result.name} -- sweep summary\n")
    L.append(f"_seed {result.seed}, version {result.version}, "
             f"config digest `{snapshot_digest(result.snapshot)[:16]}`_\n")
    L.append(f"Grid: {len(result.table)} points over {', '.join(result.axes)}; "
             f"{len(result.skipped)} skipped.\n")

    L.append("## Metric ranges\n")
    L.append("| metric | min | max | mean |")
    L.append("|---|---|---|---|")
    for metric in result.metrics:
        values = pd.to_numeric(table[metric], errors='coerce').dropna() if metric in table else []
        if len(values) == 0:
            L.append(f"| {metric} | - | - | - |")
            continue
        L.append(f"| {metric} | {_fmt(float(values.min()))} | {_fmt(float(values.max()))} | "
                 f"{_fmt(float(values.mean()))} |")
    L.append("")

    if summary:
        L.append("## Highlights\n")
        for key, value in summary.items():
            L.append(f"- {key}: {_fmt(value)}")
        L.append("")

    if len(result.skipped):
        L.append("## Skipped points\n")
        reasons = result.skipped['skipped'].str.split(':').str[0].value_counts()
        for reason, count in reasons.items():
            L.append(f"- {reason}: {count}")
        L.append("")

    if notes:
        L.append("## Notes\n")
        L.extend(f"- {n}" for n in notes)
        L.append("")

    path = Path(path)
    path.write_text('\n'.join(L) + '\n')
    return path
