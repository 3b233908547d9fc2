#!/usr/bin/env python3
"""Spectral feature scaling tools: command-line entry point.

Subcommands:
  generate  write the linked-rings synthetic dataset as CSV
  run       cross-validated supervised dimensionality reduction + classification
  scale     learn the feature scaling factors from a whole dataset

Usage:
    python sfs_tools.py generate --noise-variance 25 --out rings.csv
    python sfs_tools.py run --csv rings.csv --integration rms --out result.json
    python sfs_tools.py run --noise-variance 1 --emit-plots plots/ --xlsx run.xlsx
    python sfs_tools.py run --variance-sweep 1:25:1 --out sweep.json
    python sfs_tools.py scale --csv data.csv --label-column class

Every failure prints one line "ERROR: <type>: <message>" on stderr.
Exit codes: 0 complete, 1 error, 3 report written with aborted folds.
"""
import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys

_root = os.path.dirname(os.path.abspath(__file__))
if _root not in sys.path:
    sys.path.insert(0, _root)

from threadpoolctl import threadpool_limits

from _version import __version__
from postprocessing.exports import (export_to_excel, write_embedding_csv,
                                    write_json, write_knn_sweep_csv,
                                    write_scaling_csv,
                                    write_variance_sweep_csv)
from postprocessing.pipeline import (SCHEMA_VERSION, PipelineConfig,
                                     fit_scaling, run_pipeline)
from preprocessing.data import (RingConfig, generate_rings, load_csv,
                                write_csv)

log = logging.getLogger('sfs_tools')

EXIT_OK, EXIT_ERROR, EXIT_ABORTED = 0, 1, 3


# --------------------------------------------------------- Configuration

def parse_range(text, integer=False):
    """'a:b[:step]' (inclusive) or 'x,y,z' -> list of numbers."""
    conv = int if integer else float
    text = str(text).strip()
    if ':' in text:
        parts = text.split(':')
        if len(parts) not in (2, 3):
            raise ValueError(f"range must be a:b or a:b:step, got '{text}'")
        a, b = conv(parts[0]), conv(parts[1])
        step = conv(parts[2]) if len(parts) == 3 else conv(1)
        if not step > 0 or b < a:
            raise ValueError(f"empty range '{text}'")
        count = int(round((b - a) / step)) + 1
        return [conv(a + i * step) for i in range(count)]
    values = [conv(x) for x in text.split(',') if x.strip()]
    if not values:
        raise ValueError(f"empty list '{text}'")
    return values


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Dataset source, method settings and output locations of one invocation."""
    csv: str = None
    label_column: str = 'label'
    rings: RingConfig = dataclasses.field(default_factory=RingConfig)
    pipeline: PipelineConfig = dataclasses.field(default_factory=PipelineConfig)
    out: str = None
    emit_plots: str = None
    variance_sweep: str = None
    xlsx: str = None
    threads: int = None

    def __post_init__(self):
        if self.variance_sweep is not None:
            if self.csv is not None:
                raise ValueError("--variance-sweep needs the synthetic dataset, not --csv")
            parse_range(self.variance_sweep)
        if self.threads is not None and self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        if 'rings' in d:
            d['rings'] = RingConfig(**d['rings'])
        if 'pipeline' in d:
            d['pipeline'] = PipelineConfig(**d['pipeline'])
        return cls(**d)


def load_config_file(path):
    """JSON config, or a previous report (its config_echo is used)."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, encoding='utf-8') as f:
        data = json.load(f)
    if 'config_echo' in data:
        data = data['config_echo']
    return data


# flag dest -> (section, field); section None means a top-level field
_OVERRIDES = {
    'csv': (None, 'csv'),
    'label_column': (None, 'label_column'),
    'out': (None, 'out'),
    'emit_plots': (None, 'emit_plots'),
    'variance_sweep': (None, 'variance_sweep'),
    'xlsx': (None, 'xlsx'),
    'threads': (None, 'threads'),
    'samples': ('rings', 'samples_per_class'),
    'classes': ('rings', 'num_classes'),
    'features': ('rings', 'num_features'),
    'noise_variance': ('rings', 'noise_variance'),
    'data_seed': ('rings', 'seed'),
    'split_mode': ('pipeline', 'split_mode'),
    'integration': ('pipeline', 'integration'),
    'scaling': ('pipeline', 'scaling'),
    'solve_mode': ('pipeline', 'solve_mode'),
    'balance': ('pipeline', 'balance'),
    'search_orientation': ('pipeline', 'search_orientation'),
    'standardize': ('pipeline', 'standardize'),
    'k_local': ('pipeline', 'k_local'),
    'sparsify_k': ('pipeline', 'sparsify_k'),
    'ell': ('pipeline', 'ell'),
    'ell_grid': ('pipeline', 'ell_grid'),
    'outer_folds': ('pipeline', 'outer_folds'),
    'inner_folds': ('pipeline', 'inner_folds'),
    'classifier': ('pipeline', 'classifier'),
    'knn_k': ('pipeline', 'knn_k'),
    'knn_sweep': ('pipeline', 'knn_sweep'),
    'seed': ('pipeline', 'seed'),
    'grid_points': ('pipeline', 'solver_grid_points'),
    'accept_rtol': ('pipeline', 'solver_accept_rtol'),
}


def build_config(args):
    """Defaults <- --config file <- command-line flags."""
    merged = dataclasses.asdict(RunConfig())
    if getattr(args, 'config', None):
        loaded = load_config_file(args.config)
        for key, value in loaded.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
    for dest, (section, name) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if dest == 'knn_sweep':
            value = parse_range(value, integer=True)
        elif dest == 'ell_grid':
            value = parse_range(value, integer=True)
        elif dest == 'balance' and value != 'auto':
            value = float(value)
        if section is None:
            merged[name] = value
        else:
            merged[section][name] = value
    return RunConfig.from_dict(merged)


# --------------------------------------------------------- Dataset

def load_dataset(cfg):
    if cfg.csv:
        return load_csv(cfg.csv, cfg.label_column)
    return generate_rings(cfg.rings)


# --------------------------------------------------------- Printing

def print_table(report):
    """Print per-fold results and the cross-validated summary to stdout."""
    hdr = (f"{'Fold':>4s} {'Status':>8s} {'OA':>7s} {'AA':>7s} {'NMI':>7s} "
           f"{'ell':>4s} {'Flips':>8s} {'Sec':>7s}")
    print(hdr)
    print("-" * len(hdr))
    for f in report.folds:
        flips = ','.join(str(p + 1) for p in f.flips) or '-'
        ell = f"{f.ell:4d}" if f.ell is not None else f"{'-':>4s}"
        print(f"{f.fold:4d} {f.status:>8s} {f.oa:7.2f} {f.aa:7.2f} {f.nmi:7.2f} "
              f"{ell} {flips:>8s} {f.seconds:7.1f}")
    print("-" * len(hdr))
    for metric in ('oa', 'aa', 'nmi'):
        mean, std = report.summary(metric)
        print(f"{metric.upper():>4s}  {mean:6.2f} +- {std:5.2f}")
    for f in report.aborted:
        print(f"fold {f.fold} aborted: {f.diagnostic}")


def print_scaling(fit, feature_names):
    hdr = f"{'#':>4s} {'Feature':<16s} {'|s^1/2|':>10s}"
    print(hdr)
    print("-" * len(hdr))
    for j, (name, x) in enumerate(zip(feature_names, fit.scaling.integrated), 1):
        print(f"{j:4d} {name:<16.16s} {abs(x):10.4f}")
    for p, sol in enumerate(fit.solutions, 1):
        print(f"pencil {p}: mu = {sol.mu:.6f}  residual = {sol.residual:.2e}")


# --------------------------------------------------------- Subcommands

def cmd_generate(cfg):
    out = cfg.out or 'rings.csv'
    ds = generate_rings(cfg.rings)
    write_csv(ds, out, cfg.label_column)
    print(f"Wrote {ds.n} samples x {ds.m} features ({ds.K} classes) to {out}")
    return EXIT_OK


def _emit_plots(report, ds, plot_dir):
    os.makedirs(plot_dir, exist_ok=True)
    write_embedding_csv(report, ds, os.path.join(plot_dir, 'embedding.csv'))
    write_scaling_csv(report, ds.feature_names,
                      os.path.join(plot_dir, 'scaling_factors.csv'))


def _plot_dir(cfg, out):
    return cfg.emit_plots or os.path.dirname(os.path.abspath(out))


def cmd_run(cfg):
    out = cfg.out or 'sfs_result.json'
    echo = dataclasses.asdict(cfg)

    if cfg.variance_sweep is not None:
        sweep = []
        for v in parse_range(cfg.variance_sweep):
            rings = dataclasses.replace(cfg.rings, noise_variance=v)
            report = run_pipeline(generate_rings(rings), cfg.pipeline, echo)
            mean, std = report.summary('oa')
            print(f"variance {v:g}: OA {mean:.2f} +- {std:.2f}")
            sweep.append((v, report))
        write_json({'schema_version': SCHEMA_VERSION, 'version': __version__,
                    'variance_sweep': [dict(report.to_dict(), variance=v)
                                       for v, report in sweep],
                    'config_echo': echo}, out)
        write_variance_sweep_csv(sweep, os.path.join(_plot_dir(cfg, out),
                                                     'variance_sweep.csv'))
        aborted = any(report.aborted for _, report in sweep)
        return EXIT_ABORTED if aborted else EXIT_OK

    ds = load_dataset(cfg)
    report = run_pipeline(ds, cfg.pipeline, echo)
    print_table(report)
    write_json(report.to_dict(), out)
    print(f"Report written to: {out}")
    if cfg.emit_plots:
        _emit_plots(report, ds, cfg.emit_plots)
    if cfg.pipeline.knn_sweep:
        write_knn_sweep_csv(report, os.path.join(_plot_dir(cfg, out),
                                                 'knn_sweep.csv'))
    if cfg.xlsx:
        export_to_excel(report, cfg.xlsx, list(ds.feature_names))
    return EXIT_ABORTED if report.aborted else EXIT_OK


def cmd_scale(cfg):
    out = cfg.out or 'sfs_scaling.json'
    ds = load_dataset(cfg)
    fit = fit_scaling(ds.X, ds.labels, ds.K, cfg.pipeline)
    if not fit.converged:
        raise RuntimeError(f"scaling did not converge: {fit.diagnostic}")
    print_scaling(fit, ds.feature_names)
    data = {'schema_version': SCHEMA_VERSION, 'version': __version__,
            'dataset': {'n': ds.n, 'm': ds.m, 'K': ds.K,
                        'feature_names': list(ds.feature_names)}}
    data.update(fit.to_dict())
    data['eigenvalues'] = [sol.mu for sol in fit.solutions]
    data['residuals'] = [sol.residual for sol in fit.solutions]
    data['config_echo'] = dataclasses.asdict(cfg)
    write_json(data, out)
    print(f"Scaling factors written to: {out}")
    return EXIT_OK


# --------------------------------------------------------- Argument parsing

def _add_data_args(p):
    p.add_argument('--config', help='JSON config file (or a previous report)')
    p.add_argument('--csv', help='Labelled CSV dataset (default: synthetic rings)')
    p.add_argument('--label-column', help="Label column name (default: 'label')")
    p.add_argument('--samples', type=int, help='Rings: samples per class (default: 200)')
    p.add_argument('--classes', type=int, help='Rings: number of classes (default: 3)')
    p.add_argument('--features', type=int, help='Rings: total features (default: 10)')
    p.add_argument('--noise-variance', type=float,
                   help='Rings: variance of the noise features (default: 1)')
    p.add_argument('--data-seed', type=int, help='Rings: generator seed (default: 0)')
    p.add_argument('--out', '-o', help='Output file')
    p.add_argument('--threads', type=int, help='Bound on BLAS threads')
    p.add_argument('--verbose', '-v', action='store_true', help='INFO logging')


def _add_method_args(p):
    p.add_argument('--split-mode', choices=['one_per_class', 'binary_code'])
    p.add_argument('--integration',
                   choices=['pca', 'arithmetic', 'geometric', 'rms', 'harmonic'])
    p.add_argument('--scaling', choices=['sfs', 'identity'],
                   help="'identity' skips learning (plain spectral clustering)")
    p.add_argument('--solve-mode', choices=['per_split', 'stacked'])
    p.add_argument('--balance', help="Fixed b > 0 (default: 1) or 'auto' (degree ratio)")
    p.add_argument('--no-orientation-search', dest='search_orientation',
                   action='store_const', const=False, default=None)
    p.add_argument('--standardize', action='store_const', const=True, default=None,
                   help='z-score features with training statistics')
    p.add_argument('--k-local', type=int, help='Neighbour rank of the local scale (default: 7)')
    p.add_argument('--sparsify-k', type=int, help='k of the embedding kNN graph (default: 7)')
    p.add_argument('--accept-rtol', type=float,
                   help='Eigenvalue acceptance threshold, relative (default: 1.0)')
    p.add_argument('--grid-points', type=int, help='Eigenvalue search grid size (default: 400)')
    p.add_argument('--seed', type=int, help='Cross-validation seed (default: 0)')


class _Parser(argparse.ArgumentParser):
    """Usage errors become one 'ERROR: UsageError: ...' line and exit code 1."""

    def error(self, message):
        print(f"ERROR: UsageError: {message}", file=sys.stderr)
        sys.exit(EXIT_ERROR)


def make_parser():
    parser = _Parser(
        description='Supervised dimensionality reduction with spectral feature scaling.')
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('generate', help='Write the synthetic rings dataset')
    _add_data_args(p)
    p.add_argument('--seed', dest='data_seed', type=int, help='Same as --data-seed')

    p = sub.add_parser('run', help='Cross-validated evaluation')
    _add_data_args(p)
    _add_method_args(p)
    p.add_argument('--ell', type=int, help='Fixed embedding dimension (skips the ell search)')
    p.add_argument('--ell-grid', help="Searched ell values, e.g. '1,2,3,5,8'")
    p.add_argument('--outer-folds', type=int)
    p.add_argument('--inner-folds', type=int)
    p.add_argument('--classifier', choices=['knn', 'logistic'])
    p.add_argument('--knn-k', type=int, help='k of the kNN classifier (default: 1)')
    p.add_argument('--knn-sweep', help="Extra kNN OA curve, e.g. '1:50'")
    p.add_argument('--emit-plots', metavar='DIR', help='Write plot-data CSVs to DIR')
    p.add_argument('--variance-sweep', metavar='A:B:STEP',
                   help='Rerun on rings for each noise variance')
    p.add_argument('--xlsx', '-x', help='Export to Excel (.xlsx) file')

    p = sub.add_parser('scale', help='Learn scaling factors from all samples')
    _add_data_args(p)
    _add_method_args(p)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    commands = {'generate': cmd_generate, 'run': cmd_run, 'scale': cmd_scale}
    try:
        cfg = build_config(args)
        limits = (threadpool_limits(limits=cfg.threads) if cfg.threads
                  else contextlib.nullcontext())
        with limits:
            return commands[args.command](cfg)
    except Exception as exc:
        print(f"ERROR: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
