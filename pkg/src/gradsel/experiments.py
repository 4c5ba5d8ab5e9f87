"""Data generators, the seeded replication harness and the simulation studies.

Every replicate draws its random numbers from streams keyed by integers
(``SeedSequence`` entropy), so results do not depend on scheduling or on
the number of workers.  Within a two-cluster replicate the clean points,
labels and standardised noise depend only on ``(seed, replicate)``; the
noise level ``u`` rescales that same noise.  The u-curves therefore use
common random numbers.
"""

import configparser
import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .exceptions import EmptyWindow, GradselError
from .grids import build_net, spatial_grid
from .kernels import make_kernel, make_noise
from .noisy_kmeans import (AffineMap, KMeansBandwidthSelection, NoisySample,
                           clustering_error, lloyd_kmeans_baseline, weighted_lloyd)
from .robust_regression import (RegressionNoise, RegressionSample, default_gamma, interior_grid,
                                local_estimate, local_estimates, select_global, select_pointwise)

EXPERIMENTS = ("figure1", "regression-pointwise", "regression-global", "clustering-rates",
               "rates", "diagnostics")

# last entry of the per-method seed streams; ERC and the gradient rule share
# one set of fitted codebooks, hence one stream
_METHOD_CODE = {"kmeans": 0, "gradient": 1, "erc": 1}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text):
    return tuple(int(float(v)) for v in str(text).replace(";", ",").split(",") if v.strip())


@dataclass
class ExperimentConfig:
    """Settings for one simulation study.

    Files use flat ``key = value`` lines (an optional ``[experiment]`` header
    is accepted); list values are comma separated.  Bandwidth windows are in
    the unit-box coordinates used by the estimators.
    """

    experiment: str = "figure1"
    n: int = 200
    replicates: int = 100
    seed: int = 2024
    u_values: tuple = tuple(range(1, 11))
    constants: tuple = (0.1, 1.0, 10.0)
    k: int = 2
    kernel: str = "sinc"
    noise: str = "gaussian"
    noise_beta: float = 1.0
    h_minus: float = 0.05
    h_plus: float = 0.15
    net_ratio: float = 0.7
    net_cap: int = 0
    grid: int = 128
    margin: float = 0.25
    n_restarts: int = 5
    max_iter: int = 50
    # rates studies
    n_values: tuple = (250, 500, 1000, 2000, 4000)
    rate_u: float = 1.0
    rate_noise: str = "laplace"
    rate_noise_scale: float = 0.5
    rate_constant: float = 1e-8
    rate_h_minus: float = 0.012
    rate_h_plus: float = 0.1
    reg_kernel: str = "epanechnikov"
    reg_h_minus: float = 0.02
    reg_h_plus: float = 0.25
    f_star: str = "sin"
    reg_noise: str = "t3"
    reg_noise_scale: float = 0.5
    d: int = 1
    q: float = 2.0
    x0: tuple = (0.3,)
    C0: float = 0.5
    Cq: float = 0.005
    x_grid: int = 50
    out: str = ""
    n_jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if not self.constants or any(c <= 0 for c in self.constants):
            raise ValueError("constants must all be > 0")
        if any(u < 0 for u in self.u_values):
            raise ValueError("u values must be >= 0")
        if any(v < 10 for v in self.n_values):
            raise ValueError("every n in n_values must be >= 10")
        if self.grid < 8:
            raise ValueError("grid must have at least 8 nodes per axis")
        return self

    def net(self):
        """Bandwidth net of the two-cluster study."""
        cap = self.net_cap or None
        return build_net(self.h_minus, self.h_plus, self.net_ratio, 2, cap)

    def rate_net(self):
        """Bandwidth net of the clustering rate study."""
        cap = self.net_cap or None
        return build_net(self.rate_h_minus, self.rate_h_plus, self.net_ratio, 2, cap)

    _PARSERS = {
        "u_values": _floats, "constants": _floats, "n_values": _ints, "x0": _floats,
    }

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            name = key.strip().replace("-", "_")
            if name == "u":
                name = "u_values"
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            default = known[name].default
            if name in cls._PARSERS:
                value = cls._PARSERS[name](raw)
            elif isinstance(default, bool):
                value = str(raw).strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                value = int(float(raw))
            elif isinstance(default, float):
                value = float(raw)
            else:
                value = str(raw).strip()
            kwargs[name] = value
        if "u_values" in kwargs and all(float(u).is_integer() for u in kwargs["u_values"]):
            kwargs["u_values"] = tuple(int(u) for u in kwargs["u_values"])
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                           interpolation=None)
        parser.optionxform = str
        body = text if text.lstrip().startswith("[") else "[experiment]\n" + text
        parser.read_string(body)
        mapping = {}
        for section in parser.sections():
            mapping.update(parser[section])
        return cls.from_mapping(mapping)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def to_text(self):
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def _rng(*entropy):
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def _seed_entropy(seed):
    return tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)


def gen_mixture(n, u, seed, margin=0.25):
    """Two-component Gaussian mixture observed through anisotropic Gaussian noise.

    ``Y`` is uniform on {1, 2}; ``X ~ N(0, I)`` or ``N((5, 0), I)``; the noise is
    ``N(0, diag(1, u))``.  The clean points, labels and standardised noise
    depend only on ``seed``, so samples for different ``u`` share them.
    """
    if u < 0:
        raise ValueError("u must be >= 0")
    rng = _rng(*_seed_entropy(seed))
    labels = rng.integers(1, 3, size=n)
    X = rng.standard_normal((n, 2))
    X[labels == 2, 0] += 5.0
    base = rng.standard_normal((n, 2))
    eps = base * np.array([1.0, math.sqrt(u)])
    Z = X + eps
    noise = make_noise("gaussian", (1.0, math.sqrt(u)) if u > 0 else (1.0, 1e-12), 2, 1.0)
    return NoisySample(Z, labels, X, noise, AffineMap.to_unit_box(Z, margin))


F_STAR = {
    "sin": lambda W: np.sin(2 * np.pi * W[:, 0]),
    "bump": lambda W: np.exp(-20.0 * ((W - 0.5) ** 2).sum(axis=1)),
    "linear": lambda W: W.sum(axis=1) / W.shape[1],
    "step": lambda W: np.where(W[:, 0] < 0.5, -0.5, 0.5),
}


def gen_regression(n, f_star="sin", noise="t3", seed=0, d=1, noise_scale=0.5):
    """Uniform design on ``[0, 1]^d`` with ``Y = f*(W) + xi`` for symmetric noise."""
    f = F_STAR[f_star] if isinstance(f_star, str) else f_star
    law = RegressionNoise(noise, noise_scale)
    rng = _rng(*_seed_entropy(seed))
    W = rng.random((n, int(d)))
    Y = f(W) + law.sample(rng, n)
    return RegressionSample(W, Y, f, law)


# --------------------------------------------------------------------------
# result table
# --------------------------------------------------------------------------

COLUMNS = ("experiment", "method", "constant", "u", "n", "replicate", "metric", "value",
           "bandwidth", "status", "aggregate", "se", "count")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (tuple, list)):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


@dataclass
class ResultTable:
    """Raw rows, one per (method, constant, u or n, replicate, metric), plus
    aggregate rows holding the mean and standard error of each cell."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **row):
        base = {c: None for c in COLUMNS}
        base.update(row)
        base["aggregate"] = False
        self.rows.append(base)

    def raw(self):
        return [r for r in self.rows if not r["aggregate"]]

    def aggregates(self):
        return [r for r in self.rows if r["aggregate"]]

    def aggregate(self):
        """Append (or recompute) one mean/SE row per cell, skipping missing values."""
        self.rows = self.raw()
        cells = {}
        for r in self.rows:
            key = (r["experiment"], r["method"], r["constant"], r["u"], r["n"], r["metric"])
            cells.setdefault(key, []).append(r["value"])
        for key, values in cells.items():
            vals = np.array([v for v in values if v is not None], float)
            count = len(vals)
            mean = float(vals.mean()) if count else None
            se = float(vals.std(ddof=1) / math.sqrt(count)) if count > 1 else None
            exp, method, const, u, n, metric = key
            self.rows.append({c: None for c in COLUMNS} | {
                "experiment": exp, "method": method, "constant": const, "u": u, "n": n,
                "metric": metric, "value": mean, "status": "ok" if count else "missing",
                "aggregate": True, "se": se, "count": count,
            })
        return self

    def mean(self, method, metric, constant=None, u=None, n=None):
        for r in self.aggregates():
            if (r["method"], r["metric"]) == (method, metric) and r["constant"] == constant \
                    and r["u"] == u and r["n"] == n:
                return r["value"]
        raise KeyError((method, metric, constant, u, n))

    def values(self, method, metric, constant=None, u=None, n=None):
        return [r["value"] for r in self.raw()
                if (r["method"], r["metric"]) == (method, metric) and r["constant"] == constant
                and r["u"] == u and r["n"] == n]

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([_fmt(r[c]) for c in COLUMNS])
        text = buf.getvalue()
        if path:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text):
        text = path_or_text
        if "\n" not in path_or_text:
            with open(path_or_text) as fh:
                text = fh.read()
        table = cls()
        for rec in csv.DictReader(io.StringIO(text)):
            row = {}
            for c in COLUMNS:
                v = rec[c]
                if c in ("value", "se", "constant"):
                    row[c] = float(v) if v else None
                elif c in ("replicate", "n", "count"):
                    row[c] = int(v) if v else None
                elif c == "u":
                    row[c] = (int(float(v)) if float(v).is_integer() else float(v)) if v else None
                elif c == "aggregate":
                    row[c] = v == "true"
                else:
                    row[c] = v or None
            table.rows.append(row)
        return table


def _run_tasks(func, tasks, n_jobs):
    """Evaluate tasks with one BLAS thread each; output order follows ``tasks``."""
    def call(task):
        with threadpool_limits(1):
            return func(*task)
    if n_jobs == 1:
        return [call(t) for t in tasks]
    return Parallel(n_jobs=n_jobs, prefer="processes")(delayed(call)(t) for t in tasks)


# --------------------------------------------------------------------------
# two-cluster study (`experiment figure1`)
# --------------------------------------------------------------------------

def _figure1_replicate(cfg, u, rep):
    """All method rows for one (u, replicate)."""
    sample = gen_mixture(cfg.n, u, (cfg.seed, rep), cfg.margin)
    rows = []
    affine = sample.affine
    try:
        km = lloyd_kmeans_baseline(sample, cfg.k,
                                   seed=(cfg.seed, _code(u), rep, _METHOD_CODE["kmeans"]))
        rows.append(("kmeans", None, clustering_error(km.centroids, sample), None, "ok"))
    except GradselError as exc:
        rows.append(("kmeans", None, None, None, f"failed:{type(exc).__name__}"))
    try:
        K = make_kernel(cfg.kernel, 2)
        g = sample.unit_noise()
        g = type(g)(g.id, g.scale, cfg.noise_beta, g.na_rho)
        sel = KMeansBandwidthSelection(sample.unit(), K, g, cfg.net(), cfg.k,
                                       spatial_grid(2, cfg.grid),
                                       (cfg.seed, _code(u), rep, _METHOD_CODE["gradient"]),
                                       max_iter=cfg.max_iter, n_restarts=cfg.n_restarts)
        for c in cfg.constants:
            h, fit, _ = sel.erc_select(c)
            rows.append(("erc", c, clustering_error(affine.inverse(fit.centroids), sample), h, "ok"))
        for c in cfg.constants:
            report, fit = sel.select(c)
            rows.append(("gradient", c, clustering_error(affine.inverse(fit.centroids), sample),
                         report.selected, "ok"))
    except GradselError as exc:
        status = f"failed:{type(exc).__name__}"
        for method in ("erc", "gradient"):
            rows += [(method, c, None, None, status) for c in cfg.constants]
    order = {"kmeans": 0, "erc": 1, "gradient": 2}
    return sorted(rows, key=lambda r: (order[r[0]], -1 if r[1] is None else r[1]))


def _code(u):
    """Integer stream key for a noise level (u may be fractional)."""
    return int(round(float(u) * 1000))


def run_figure1(config, progress=None):
    """Clustering error of Lloyd k-means, ERC and the gradient rule across ``u``.

    Returns a :class:`ResultTable` with ``|u| * replicates * (1 + 2 |constants|)``
    raw rows plus aggregate rows; writes the CSV when ``config.out`` is set.
    """
    cfg = config.validate()
    tasks = [(cfg, u, rep) for u in cfg.u_values for rep in range(cfg.replicates)]
    start = time.perf_counter()
    results = _run_tasks(_figure1_replicate, tasks, cfg.n_jobs)
    table = ResultTable(meta={"elapsed": time.perf_counter() - start})
    for (_, u, rep), rows in zip(tasks, results):
        for method, const, value, h, status in rows:
            table.add(experiment="figure1", method=method, constant=const, u=u, n=cfg.n,
                      replicate=rep, metric="clustering_error", value=value,
                      bandwidth=h, status=status)
        if progress:
            progress(u, rep)
    table.aggregate()
    if cfg.out:
        table.to_csv(cfg.out)
    return table


# --------------------------------------------------------------------------
# rates: regression
# --------------------------------------------------------------------------

def _reg_net(cfg):
    return build_net(cfg.reg_h_minus, cfg.reg_h_plus, cfg.net_ratio, cfg.d, cfg.net_cap or None)


def _regression_replicate(cfg, rep, rules):
    """Errors at every n (nested prefixes of one sample) for the selected
    bandwidth and for every net member (the latter feed the oracle-in-net)."""
    n_max = max(cfg.n_values)
    full = gen_regression(n_max, cfg.f_star, cfg.reg_noise, (cfg.seed, rep), cfg.d,
                          cfg.reg_noise_scale)
    K = make_kernel(cfg.reg_kernel, cfg.d)
    net = _reg_net(cfg)
    x0 = np.asarray(cfg.x0, float)[: cfg.d]
    truth0 = float(full.f_star(x0[None, :])[0])
    reach = float(np.max(net.array()))
    xg = interior_grid(cfg.d, cfg.x_grid, reach)
    truth_grid = full.f_star(xg.points())
    out = []
    for n in cfg.n_values:
        s = RegressionSample(full.W[:n], full.Y[:n], full.f_star, full.noise)
        B = float(max(1.0, math.ceil(np.max(np.abs(s.Y)))))
        gamma = default_gamma(s)
        if "pointwise" in rules:
            per_h = [_or_inf(lambda: abs(local_estimate(x0, h, s, K, gamma, B) - truth0))
                     for h in net]
            try:
                fit = select_pointwise(x0, s, net, K, gamma, B, cfg.C0)
                out.append(("pointwise", n, abs(fit.estimate - truth0), fit.h, per_h, "ok"))
            except GradselError as exc:
                out.append(("pointwise", n, None, None, per_h, f"failed:{type(exc).__name__}"))
        if "global" in rules:
            per_h = [_or_inf(lambda: _lq(local_estimates(xg.points(), h, s, K, gamma, B)
                                         - truth_grid, xg, cfg.q)) for h in net]
            try:
                gf = select_global(s, net, K, gamma, B, cfg.q, 1, xg, cfg.Cq)
                err = _lq(gf.function.flat() - truth_grid, xg, cfg.q)
                out.append(("global", n, err, gf.h, per_h, "ok"))
            except GradselError as exc:
                out.append(("global", n, None, None, per_h, f"failed:{type(exc).__name__}"))
    return out


def _or_inf(compute):
    """Error of a fixed bandwidth, or infinity when it leaves a query point
    without data (such a bandwidth can never be the best in the net)."""
    try:
        return compute()
    except EmptyWindow:
        return math.inf


def _lq(diff, grid, q):
    return float((np.abs(diff) ** q).sum() * grid.cell_volume) ** (1.0 / q)


def run_regression_experiment(config, rules=("pointwise", "global")):
    """Selected-versus-oracle errors of both regression rules over a sweep of n.

    Metrics per replicate: ``error`` (selected bandwidth) and, per cell,
    aggregate rows for ``error`` plus ``oracle_error`` (best fixed net member
    for that cell: median criterion for the pointwise rule, mean for the
    global rule) and ``ratio`` (selected over oracle, same statistic).
    """
    cfg = config.validate()
    tasks = [(cfg, rep, tuple(rules)) for rep in range(cfg.replicates)]
    results = _run_tasks(_regression_replicate, tasks, cfg.n_jobs)
    table = ResultTable()
    per_h = {}
    for (_, rep, _), rows in zip(tasks, results):
        for method, n, err, h, errs, status in rows:
            table.add(experiment="rates", method=method, constant=cfg.C0 if method == "pointwise"
                      else cfg.Cq, n=n, replicate=rep, metric="error", value=err, bandwidth=h,
                      status=status)
            per_h.setdefault((method, n), []).append(errs)
    table.aggregate()
    for (method, n), errs in per_h.items():
        errs = np.array(errs)
        stat = np.median if method == "pointwise" else np.mean
        oracle_idx = int(np.argmin(stat(errs, axis=0)))
        oracle = float(stat(errs[:, oracle_idx]))
        # a failed selection counts as an unbounded error
        selected = float(stat([math.inf if v is None else v for v in table.values(
            method, "error", cfg.C0 if method == "pointwise" else cfg.Cq, None, n)]))
        const = cfg.C0 if method == "pointwise" else cfg.Cq
        for metric, value in (("median_error" if method == "pointwise" else "mean_error", selected),
                              ("oracle_error", oracle), ("ratio", selected / oracle)):
            table.rows.append({c: None for c in COLUMNS} | {
                "experiment": "rates", "method": method, "constant": const, "n": n,
                "metric": metric, "value": value, "status": "ok", "aggregate": True,
                "count": len(errs), "bandwidth": _reg_net(cfg)[oracle_idx]
                if metric == "oracle_error" else None,
            })
    if cfg.out:
        table.to_csv(cfg.out)
    return table


# --------------------------------------------------------------------------
# rates: clustering
# --------------------------------------------------------------------------

_POPULATION = {}


def population_codebook(u_seed=12345, size=200_000, k=2):
    """Large clean sample from the mixture and its Lloyd codebook (reference optimum)."""
    key = (u_seed, size, k)
    if key not in _POPULATION:
        big = gen_mixture(size, 0.0, (u_seed,))
        X = big.latent
        init = np.array([[0.0, 0.0], [5.0, 0.0]])[:k] if k == 2 else X[:k]
        c_star, _, _ = weighted_lloyd(X, np.ones(len(X)), init, 500, 1e-12, record=False)
        _POPULATION[key] = (X, c_star)
    return _POPULATION[key]


def population_distortion(c, X):
    c = np.atleast_2d(c)
    d2 = ((X[:, None, :] - c[None]) ** 2).sum(axis=-1)
    return float(d2.min(axis=1).mean())


def _clustering_rate_replicate(cfg, rep):
    X_pop, c_star = population_codebook(k=cfg.k)
    r_star = population_distortion(c_star, X_pop)
    n_max = max(cfg.n_values)
    rng = _rng(cfg.seed, rep)
    labels = rng.integers(1, 3, size=n_max)
    X = rng.standard_normal((n_max, 2))
    X[labels == 2, 0] += 5.0
    scale = np.array([1.0, math.sqrt(cfg.rate_u)]) * cfg.rate_noise_scale
    if cfg.rate_noise == "laplace":
        eps = rng.laplace(0.0, 1.0, (n_max, 2)) * scale
    else:
        eps = rng.standard_normal((n_max, 2)) * scale
    Z_full = X + eps
    # one fixed similarity map for every prefix keeps the geometry comparable across n
    affine = AffineMap.to_unit_box(Z_full, cfg.margin)
    out = []
    K = make_kernel(cfg.kernel, 2)
    net = cfg.rate_net()
    for n in cfg.n_values:
        noise = make_noise(cfg.rate_noise, tuple(scale), 2)
        s = NoisySample(Z_full[:n], labels[:n], X[:n], noise, affine)
        sel = KMeansBandwidthSelection(s.unit(), K, s.unit_noise(), net, cfg.k,
                                       spatial_grid(2, cfg.grid), (cfg.seed, n, rep, 1),
                                       max_iter=cfg.max_iter, n_restarts=cfg.n_restarts)
        report, fit = sel.select(cfg.rate_constant)
        excess = [population_distortion(affine.inverse(f.centroids), X_pop) - r_star
                  for f in sel.fits]
        out.append((n, excess[report.selected_index], report.selected, excess))
    return out


def run_clustering_rates(config):
    """Excess distortion of the selected codebook versus the best fixed net member, over n."""
    cfg = config.validate()
    tasks = [(cfg, rep) for rep in range(cfg.replicates)]
    results = _run_tasks(_clustering_rate_replicate, tasks, cfg.n_jobs)
    table = ResultTable()
    per_h = {}
    for (_, rep), rows in zip(tasks, results):
        for n, exc, h, all_exc in rows:
            table.add(experiment="rates", method="clustering", constant=cfg.rate_constant,
                      u=cfg.rate_u, n=n, replicate=rep, metric="excess_distortion", value=exc,
                      bandwidth=h, status="ok")
            per_h.setdefault(n, []).append(all_exc)
    table.aggregate()
    net = cfg.rate_net()
    for n, errs in per_h.items():
        errs = np.array(errs)
        mean_h = errs.mean(axis=0)
        oracle_idx = int(np.argmin(mean_h))
        vals = np.array(table.values("clustering", "excess_distortion", cfg.rate_constant,
                                     cfg.rate_u, n))
        rows = (("median_excess", float(np.median(vals)), None),
                ("oracle_excess", float(mean_h[oracle_idx]), net[oracle_idx]),
                ("ratio", float(vals.mean() / mean_h[oracle_idx]), None))
        for metric, value, h in rows:
            table.rows.append({c: None for c in COLUMNS} | {
                "experiment": "rates", "method": "clustering", "constant": cfg.rate_constant,
                "u": cfg.rate_u, "n": n, "metric": metric, "value": value, "status": "ok",
                "aggregate": True, "count": len(errs), "bandwidth": h,
            })
    if cfg.out:
        table.to_csv(cfg.out)
    return table


def run_rates(config):
    """Regression and clustering rate studies in one table."""
    cfg = config.validate()
    out = cfg.out
    cfg.out = ""
    try:
        reg = run_regression_experiment(cfg)
        clu = run_clustering_rates(cfg)
    finally:
        cfg.out = out
    table = ResultTable(rows=reg.rows + clu.rows)
    if out:
        table.to_csv(out)
    return table


def run_experiment(config):
    """Dispatch on ``config.experiment``."""
    exp = config.experiment
    if exp == "figure1":
        return run_figure1(config)
    if exp == "regression-pointwise":
        return run_regression_experiment(config, ("pointwise",))
    if exp == "regression-global":
        return run_regression_experiment(config, ("global",))
    if exp == "clustering-rates":
        return run_clustering_rates(config)
    if exp == "rates":
        return run_rates(config)
    from .diagnostics import run_diagnostics
    return run_diagnostics()
