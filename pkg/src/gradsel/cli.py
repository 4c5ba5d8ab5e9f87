"""Command line entry point: ``gradsel <subcommand> ...``.

Exit codes: 0 on success, 1 when ``check`` finds a failing diagnostic,
2 for bad arguments, unreadable inputs or invalid configurations.
"""

import argparse
import csv
import sys

import numpy as np

from .exceptions import GradselError

LABEL_COLUMNS = {"label", "labels", "y_label", "class", "cluster"}


class UsageError(Exception):
    """Raised for problems the user can fix on the command line (exit 2)."""


def read_table(path):
    """Read a delimited text file with a header row; returns ``(names, array)``."""
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read data file {path!r}: {exc.strerror or exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise UsageError(f"{path}: need a header row and at least one data row")
    try:
        dialect = csv.Sniffer().sniff(lines[0], delimiters=",;\t ")
    except csv.Error:
        dialect = csv.excel
    rows = list(csv.reader(lines, dialect))
    names = [c.strip() for c in rows[0] if c.strip()]
    try:
        data = np.array([[float(v) for v in r if v.strip()] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(names):
        raise UsageError(f"{path}: every row must have {len(names)} fields")
    return names, data


def _fmt_h(h):
    return "(" + ", ".join(f"{v:.6g}" for v in h) + ")"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_cluster_select(args, out):
    from .grids import build_net, spatial_grid
    from .kernels import make_kernel, make_noise
    from .noisy_kmeans import AffineMap, KMeansBandwidthSelection, NoisySample, clustering_error

    names, data = read_table(args.data)
    labels = None
    if names[-1].lower() in LABEL_COLUMNS:
        labels, data = data[:, -1].astype(int), data[:, :-1]
    d = data.shape[1]
    scale = args.noise_scale if args.noise_scale else [1.0]
    if len(scale) not in (1, d):
        raise UsageError(f"--noise-scale needs 1 or {d} values")
    noise = make_noise(args.noise, scale if len(scale) == d else scale * d, d, args.beta)
    sample = NoisySample(data, labels, None, noise, AffineMap.to_unit_box(data, args.margin))
    net = build_net(args.h_minus, args.h_plus, args.ratio, d)
    sel = KMeansBandwidthSelection(sample.unit(), make_kernel(args.kernel, d), sample.unit_noise(),
                                   net, args.k, spatial_grid(d, args.grid or 128), args.seed)
    for c in args.const or [1.0]:
        report, fit = sel.select(c)
        centers = sample.affine.inverse(fit.centroids)
        msg = f"const={c:g} bandwidth={_fmt_h(report.selected)} centroids={np.round(centers, 6).tolist()}"
        if labels is not None:
            msg += f" error={clustering_error(centers, sample, use_latent=False):.4f}"
        print(msg, file=out)
    return 0


def _regression_sample(path):
    from .robust_regression import RegressionSample
    names, data = read_table(path)
    if data.shape[1] < 2:
        raise UsageError(f"{path}: need at least one covariate column and a response column")
    return RegressionSample(data[:, :-1], data[:, -1])


def cmd_regress_point(args, out):
    from .grids import build_net
    from .robust_regression import select_pointwise
    s = _regression_sample(args.data)
    x0 = np.asarray(args.x0, float)
    if x0.size != s.d:
        raise UsageError(f"--x0 needs {s.d} coordinates")
    net = build_net(args.h_minus, args.h_plus, args.ratio, s.d)
    for c in args.const or [0.5]:
        fit = select_pointwise(x0, s, net, args.kernel, args.gamma, args.bound, c)
        print(f"const={c:g} bandwidth={_fmt_h(fit.h)} estimate={fit.estimate:.10g}", file=out)
    return 0


def cmd_regress_global(args, out):
    from .grids import build_net
    from .robust_regression import interior_grid, select_global
    s = _regression_sample(args.data)
    net = build_net(args.h_minus, args.h_plus, args.ratio, s.d)
    xg = interior_grid(s.d, args.grid or (64 if s.d == 1 else 16), args.h_plus)
    for c in args.const or [0.005]:
        fit = select_global(s, net, args.kernel, args.gamma, args.bound, args.q, 1, xg, c)
        print(f"const={c:g} bandwidth={_fmt_h(fit.h)} grid_nodes={xg.size}", file=out)
        if args.out:
            fit.to_csv(args.out)
    return 0


def _config_from_args(args):
    from .experiments import ExperimentConfig
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config file {args.config!r}: {exc.strerror}") from None
        cfg = ExperimentConfig.from_text(text)
    else:
        cfg = ExperimentConfig(experiment="figure1" if args.which == "figure1" else "rates")
    overrides = {"experiment": "figure1" if args.which == "figure1" else
                 (cfg.experiment if cfg.experiment != "figure1" else "rates")}
    if args.n is not None:
        overrides["n"] = args.n
    if args.reps is not None:
        overrides["replicates"] = args.reps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.const:
        overrides["constants"] = tuple(args.const)
    if args.grid is not None:
        overrides["grid"] = args.grid
    if args.jobs is not None:
        overrides["n_jobs"] = args.jobs
    if args.u:
        overrides["u_values"] = tuple(args.u)
    if args.out:
        overrides["out"] = args.out
    values = {**cfg.__dict__, **overrides}
    return ExperimentConfig(**values)


def cmd_experiment(args, out):
    from .experiments import run_experiment
    cfg = _config_from_args(args)
    table = run_experiment(cfg)
    if not cfg.out:
        out.write(table.to_csv())
    elif not args.quiet:
        print(f"wrote {len(table.rows)} rows to {cfg.out}", file=out)
    return 0


def cmd_check(args, out):
    from .diagnostics import run_diagnostics
    results = run_diagnostics()
    for r in results:
        if not args.quiet or not r.passed:
            print(r.line(), file=out)
    ok = all(r.passed for r in results)
    if not args.quiet:
        print("all checks passed" if ok else "some checks FAILED", file=out)
    return 0 if ok else 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _net_options(p, h_minus, h_plus):
    p.add_argument("--h-minus", type=float, default=h_minus, help="finest bandwidth (unit box)")
    p.add_argument("--h-plus", type=float, default=h_plus, help="coarsest bandwidth (unit box)")
    p.add_argument("--ratio", type=float, default=0.7, help="geometric ladder ratio in (0, 1)")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="only print failures and results")
    common.add_argument("--const", type=float, action="append",
                        help="majorant constant (repeatable)")
    common.add_argument("--grid", type=int, help="grid nodes per axis")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--seed", type=int, help="base random seed")

    parser = argparse.ArgumentParser(prog="gradsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster-select", parents=[common],
                       help="noisy k-means with a data-driven bandwidth")
    p.add_argument("data", help="delimited text file; optional last column 'label'")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--kernel", default="sinc")
    p.add_argument("--noise", default="gaussian", choices=["gaussian", "laplace", "none"])
    p.add_argument("--noise-scale", type=float, nargs="+", help="noise scale per axis")
    p.add_argument("--beta", type=float, default=None, help="decay exponent used by the majorant")
    p.add_argument("--margin", type=float, default=0.25)
    _net_options(p, 0.05, 0.15)
    p.set_defaults(func=cmd_cluster_select)

    for name, func, helptext in (("regress-point", cmd_regress_point, "pointwise Huber fit"),
                                 ("regress-global", cmd_regress_global, "global Huber fit")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("data", help="delimited text file; last column is the response")
        p.add_argument("--kernel", default="epanechnikov")
        p.add_argument("--gamma", type=float, default=None, help="Huber threshold")
        p.add_argument("--bound", type=float, default=None, help="estimate range B")
        _net_options(p, 0.02, 0.25)
        if name == "regress-point":
            p.add_argument("--x0", type=float, nargs="+", required=True)
        else:
            p.add_argument("--q", type=float, default=2.0)
        p.set_defaults(func=func)

    p = sub.add_parser("experiment", parents=[common], help="run a simulation study")
    p.add_argument("which", choices=["figure1", "rates"])
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--u", type=float, action="append", help="noise level (repeatable)")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("check", parents=[common], help="run the numerical self-checks")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"gradsel: error: {exc}", file=sys.stderr)
        return 2
    except (GradselError, ValueError) as exc:
        print(f"gradsel: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
