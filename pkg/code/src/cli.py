"""
Command-line entry point.

Run from code/:

    python -m src.cli channel  --config configs/baseline.toml --out outputs/channel.csv
    python -m src.cli evaluate --config configs/baseline.toml --bounds --per-mode
    python -m src.cli sweep fig4b --seed 42 --jobs 4
    python -m src.cli sweep --axis geometry.axial_distance_mm=0:50:1 --metrics capacity_oam
    python -m src.cli import-s fixture.csv --config configs/baseline.toml
    python -m src.cli recipes

Exit codes: 0 success, 2 configuration / input error, 3 numerical failure.
Output files are staged in a temporary directory and moved into place only
after the command succeeds.
"""

import argparse
import contextlib
import math
import os
import shutil
import sys
import tempfile
import time
import warnings
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from termcolor import colored

from . import __version__, config
from .channel import (
    ChannelMatrix,
    channel_from_geometry,
    circulant_residual,
    crosstalk_ratio,
    import_s_parameters,
    matrix_frame,
    oam_matrix,
    read_s_parameters,
    reduce_channel,
    write_matrix_csv,
)
from .errors import ConfigError, NumericalError, OamNfcError
from .harness import RECIPES, Axis, SweepSpec, recipe, run_sweep, summarize_half_power, write_result
from .metrics import (
    ber_ls,
    ber_oam_analytic,
    capacity_ls,
    capacity_mimo_for,
    capacity_oam,
    capacity_oam_simplified,
    capacity_siso,
    per_mode_report,
)
from .settings import SimulationConfig, load_config
from .txrx import LinkBudget, estimate_channel_ls

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ==============================================================================
# HELPERS
# ==============================================================================

def _say(message: str):
    print(message, flush=True)


def _notice(message: str):
    print(colored(f"note: {message}", 'yellow'), file=sys.stderr, flush=True)


def _error(message: str):
    print(colored(f"error: {message}", 'red'), file=sys.stderr, flush=True)


def _trials(text: str) -> int:
    """Accept 1e6 as well as 1000000."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"trials must be a positive integer, got {text!r}")
    return int(value)


def _load(args) -> SimulationConfig:
    cfg = load_config(args.config) if args.config else SimulationConfig()
    if getattr(args, 'seed', None) is not None:
        cfg = cfg.replace('run.seed', args.seed)
    if getattr(args, 'trials', None) is not None:
        cfg = cfg.replace('run.trials', args.trials)
    return cfg.validate()


@contextlib.contextmanager
def _staged(out: Path) -> Iterator[Path]:
    """Yield a scratch path for `out`; everything written next to it is moved on success."""
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix='.staging-', dir=out.parent))
    try:
        yield scratch / out.name
        for item in scratch.iterdir():
            os.replace(item, out.parent / item.name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _budgets(cfg: SimulationConfig) -> List[LinkBudget]:
    budget = cfg.link_budget()
    if not budget.snr_grid:
        return [budget]
    return [budget.at_snr(s) for s in budget.snr_grid]


def _print_table(df: pd.DataFrame):
    fmt = config.TABLE_FLOAT_FORMAT
    _say(df.to_string(index=False, float_format=lambda v: f"{v:{fmt}}"))


# ==============================================================================
# COMMANDS
# ==============================================================================

def cmd_channel(args) -> int:
    cfg = _load(args)
    geom = cfg.link_geometry()
    elec = cfg.coil_electrical(geom)
    t0 = time.time()
    ch = channel_from_geometry(geom, elec, crosstalk=cfg.flags.crosstalk,
                               convention=cfg.convention)
    _say(f"H: {ch.n_rx} x {ch.n_tx} at {ch.frequency / 1e6:.4g} MHz ({time.time()-t0:.2f}s)")

    frames = [matrix_frame('H', ch.h), matrix_frame('M', ch.mutual.tx_rx),
              matrix_frame('Mt', ch.mutual.tx_tx)]
    if ch.fold is None:
        _notice(f"N_r = {ch.n_rx} is not a multiple of N_t = {ch.n_tx}; reduction skipped")
    else:
        rc = reduce_channel(ch)
        frames += [matrix_frame('H_hat', rc.h_hat), matrix_frame('h_oam', np.diag(oam_matrix(rc)))]
        _say(f"circulant residual: {circulant_residual(rc):.3e}")
    singular = np.linalg.svd(ch.h, compute_uv=False)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else math.inf
    _say(f"condition number:   {condition:.3e}")
    _say(f"crosstalk ratio:    {crosstalk_ratio(ch.mutual, elec):.3e}")

    out = Path(args.out or config.OUTPUTS_DIR / 'channel.csv')
    header = [f"config_digest: {cfg.digest()}", f"seed: {cfg.run.seed}", f"version: {__version__}"]
    with _staged(out) as scratch:
        write_matrix_csv(pd.concat(frames, ignore_index=True), scratch, header)
    _say(f"Saved: {out}")
    return EXIT_OK


def _evaluate_point(ch: ChannelMatrix, cfg: SimulationConfig, budget: LinkBudget,
                    h_est: np.ndarray, bounds: bool) -> dict:
    row = {'snr_db': budget.snr_db}
    # blind detection divides by the aligned mode gains, which need the geometry
    if ch.fold is not None and ch.geometry is not None:
        row['capacity_oam'] = capacity_oam(ch, budget).total_bits
        row['ber_analytic'] = ber_oam_analytic(ch, budget)
    row['capacity_ls'] = capacity_ls(ch, h_est, budget).total_bits
    row['ber_ls'] = ber_ls(ch, h_est, budget)
    row['capacity_mimo'] = capacity_mimo_for(ch, budget, cfg.flags.correlation,
                                             waterfill_power=cfg.flags.waterfill,
                                             convention=cfg.convention)
    if ch.geometry is not None:
        row['capacity_siso'] = capacity_siso(ch.geometry, ch.electrical, budget, cfg.convention)
        if bounds:
            report = capacity_oam_simplified(ch.geometry, ch.electrical, budget,
                                             cfg.convention, with_bounds=True)
            row.update(bounds_lower=report.bounds.lower,
                       capacity_oam_simplified=report.total_bits,
                       bounds_upper=report.bounds.upper)
    return row


def _report(ch: ChannelMatrix, cfg: SimulationConfig, args, bounds: bool = False) -> pd.DataFrame:
    rng = np.random.default_rng(cfg.run.seed)
    h_est = estimate_channel_ls(ch, cfg.pilot_config(), rng)
    budgets = _budgets(cfg)
    table = pd.DataFrame([_evaluate_point(ch, cfg, b, h_est, bounds) for b in budgets])
    _print_table(table)
    if getattr(args, 'per_mode', False):
        _say(f"\nPer-mode report at {budgets[0].snr_db:.2f} dB:")
        _print_table(per_mode_report(ch, budgets[0], h_est))
    if args.out:
        out = Path(args.out)
        with _staged(out) as scratch:
            with open(scratch, 'w') as f:
                f.write(f"# config_digest: {cfg.digest()}\n# seed: {cfg.run.seed}\n"
                        f"# version: {__version__}\n")
                table.to_csv(f, index=False, float_format=config.CSV_FLOAT_FORMAT,
                             lineterminator='\n')
        _say(f"Saved: {out}")
    return table


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    geom = cfg.link_geometry()
    elec = cfg.coil_electrical(geom)
    ch = channel_from_geometry(geom, elec, crosstalk=cfg.flags.crosstalk, convention=cfg.convention)
    if ch.fold is None:
        _notice("blind OAM metrics need N_r = I N_t; only the LS path is reported")
    if args.bounds and not geom.is_aligned:
        raise ConfigError("--bounds needs an aligned geometry (no offset, no tilt)", key='geometry')
    _report(ch, cfg, args, bounds=args.bounds)
    return EXIT_OK


def _parse_axis(text: str) -> Axis:
    """'name=start:stop:step' or 'name=v1,v2,...'."""
    name, sep, body = text.partition('=')
    if not sep or not body:
        raise ConfigError(f"axis must look like name=start:stop:step or name=v1,v2, got {text!r}",
                          key='axes')
    try:
        if ':' in body:
            start, stop, step = (float(v) for v in body.split(':'))
            return Axis.span(name.strip(), start, stop, step=step)
        values = []
        for item in body.split(','):
            item = item.strip()
            try:
                values.append(float(item))
            except ValueError:
                values.append(item)
        return Axis(name.strip(), tuple(values))
    except ValueError as exc:
        raise ConfigError(f"cannot parse axis {text!r}: {exc}", key='axes') from exc


def cmd_sweep(args) -> int:
    if args.recipe:
        if args.axis:
            raise ConfigError("give either a recipe name or --axis, not both", key='axes')
        spec = recipe(args.recipe, seed=args.seed if args.seed is not None else config.RANDOM_SEED,
                      trials=args.trials)
    else:
        if not args.axis:
            raise ConfigError("give a recipe name or at least one --axis", key='axes')
        cfg = _load(args)
        metrics = tuple(m.strip() for m in (args.metrics or '').split(',') if m.strip())
        spec = SweepSpec(name=args.name, base=cfg, axes=tuple(_parse_axis(a) for a in args.axis),
                         metrics=metrics, trials=cfg.run.trials, seed=cfg.run.seed)
    spec.validate()

    out = Path(args.out or config.OUTPUTS_DIR / f"{spec.name}.csv")
    t0 = time.time()
    _say(f"Sweep {spec.name}: {len(spec.grid())} points, metrics {', '.join(spec.metrics)}, "
         f"seed {spec.seed}")
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        result = run_sweep(spec, n_jobs=args.jobs, progress=not args.quiet)
    with _staged(out) as scratch:
        write_result(result, scratch, json_mirror=args.json)
    _say(f"  {len(result.evaluated)} evaluated, {len(result.skipped)} skipped "
         f"({time.time()-t0:.1f}s)")
    if {'geometry.offset_x_mm', 'geometry.tilt_x_deg'} <= set(result.axes):
        summary = summarize_half_power(result)
        _say(f"  3 dB points: tilt {summary['tilt_deg']} deg, offset {summary['offset_mm']} mm")
    _say(f"Saved: {out}")
    return EXIT_OK


def cmd_import_s(args) -> int:
    cfg = _load(args)
    doc = read_s_parameters(args.sparams)
    n_tx = args.n_tx or doc.n_tx
    if n_tx != doc.n_tx:
        raise ConfigError(f"--n-tx {n_tx} does not match the document's {doc.n_tx} transmit ports",
                          key='n_tx')
    ch = import_s_parameters(doc)
    _say(f"Imported H: {ch.n_rx} x {ch.n_tx} at {ch.frequency / 1e6:.4g} MHz")
    _notice("blind OAM metrics need the analytic geometry; reporting the LS path")
    _report(ch, cfg, args)
    return EXIT_OK


def cmd_recipes(args) -> int:
    for name, build in RECIPES.items():
        _say(f"{name:16s} {build()['description']}")
    return EXIT_OK


# ==============================================================================
# PARSER
# ==============================================================================

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog='oam-nfc', description='OAM near-field link simulator')
    ap.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest='command', required=True)

    def common(p, out_help: str):
        p.add_argument('--config', help='TOML configuration file')
        p.add_argument('--seed', type=int, default=None)
        p.add_argument('--trials', type=_trials, default=None)
        p.add_argument('--out', help=out_help)

    p = sub.add_parser('channel', help='dump H, M, Mt, H_hat and h_OAM')
    common(p, 'matrix dump CSV (default outputs/channel.csv)')
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser('evaluate', help='capacity and BER over the configured SNR grid')
    common(p, 'optional CSV of the report')
    p.add_argument('--bounds', action='store_true', help='add the aligned capacity limits')
    p.add_argument('--per-mode', action='store_true', help='print the per-mode SINR table')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('sweep', help='run a named recipe or an inline sweep')
    common(p, 'result CSV (default outputs/<name>.csv)')
    p.add_argument('recipe', nargs='?', help=f"one of: {', '.join(RECIPES)}")
    p.add_argument('--axis', action='append', default=[],
                   help='inline axis name=start:stop:step or name=v1,v2 (repeat for 2-D)')
    p.add_argument('--metrics', help='comma-separated metric names for an inline sweep')
    p.add_argument('--name', default='custom', help='name of an inline sweep')
    p.add_argument('--jobs', type=int, default=None, help='worker processes (env OAMNFC_N_JOBS)')
    p.add_argument('--json', action='store_true', help='also write a JSON mirror')
    p.add_argument('--quiet', action='store_true', help='no progress bar')
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser('import-s', help='evaluate a channel taken from an S-parameter CSV')
    common(p, 'optional CSV of the report')
    p.add_argument('sparams', help='S-parameter CSV document')
    p.add_argument('--n-tx', type=int, default=None, help='expected number of transmit ports')
    p.set_defaults(func=cmd_import_s)

    p = sub.add_parser('recipes', help='list the sweep recipes')
    p.set_defaults(func=cmd_recipes)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        _error(str(exc))
        return EXIT_NUMERICAL
    except OamNfcError as exc:
        _error(str(exc))
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
