"""Numerical self-checks shipped with the library (``gradsel check``).

Each check returns a :class:`CheckResult`; :func:`run_diagnostics` runs the
whole battery and is what the CLI reports on.
"""

import time
from dataclasses import dataclass

import numpy as np

from .grids import build_net, offset_grid, spatial_grid
from .kernels import DeconvolutionKernel, deconv_kernel_on_grid, make_kernel, make_noise
from .noisy_kmeans import distortion, fit_codebook, gradient_distortion, pollard_hessian
from .robust_regression import RegressionNoise, RegressionSample, check_local_margin
from .selector import check_gradient_link, fd_jacobian


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, func):
    start = time.perf_counter()
    passed, detail = func()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start)


# -- densities used by several checks ---------------------------------------

def mixture_density(grid, centers=((0.3, 0.5), (0.7, 0.5)), sd=0.08):
    """Equal-weight isotropic Gaussian mixture evaluated on a 2-d grid."""
    axis = grid.axis()
    total = np.zeros((grid.m, grid.m))
    for cx, cy in centers:
        fx = np.exp(-0.5 * ((axis - cx) / sd) ** 2)
        fy = np.exp(-0.5 * ((axis - cy) / sd) ** 2)
        total += np.outer(fx, fy)
    total /= total.sum() * grid.cell_volume
    return total.ravel()


def _density_fn(grid, values):
    from .grids import GridFunction
    return GridFunction(grid, values)


# -- individual checks ------------------------------------------------------

def gradient_fd_errors(n_codebooks=50, seed=0, m=96, step=1e-6):
    """Relative error of the analytic distortion gradient against central
    differences, at random codebooks whose Voronoi faces avoid grid nodes."""
    grid = spatial_grid(2, m)
    fhat = _density_fn(grid, mixture_density(grid))
    rng = np.random.default_rng(seed)
    errors = []
    while len(errors) < n_codebooks:
        k = int(rng.integers(1, 4))
        c = rng.uniform(0.15, 0.85, size=(k, 2))
        if k > 1 and min(np.linalg.norm(c[i] - c[j]) for i in range(k) for j in range(i)) < 0.1:
            continue
        g = gradient_distortion(c, fhat)
        fd = np.empty(c.size)
        for a in range(c.size):
            e = np.zeros(c.size)
            e[a] = step
            fd[a] = (distortion((c.ravel() + e).reshape(c.shape), fhat)
                     - distortion((c.ravel() - e).reshape(c.shape), fhat)) / (2 * step)
        errors.append(float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12)))
    return np.array(errors)


def check_gradient_fd(tol=1e-5):
    errs = gradient_fd_errors()
    return errs.max() <= tol, f"max relative error {errs.max():.2e} over {errs.size} codebooks"


def hessian_fd_error(c=((0.3, 0.5), (0.7, 0.5)), m=256, step=2e-2):
    """Relative Frobenius gap between the face-integral Hessian and a
    finite-difference Jacobian of the gradient, on a smooth mixture density.

    The step spans several grid cells: below the grid spacing the discrete
    gradient only moves when a node changes cell, which the difference
    quotient then over- or under-counts.
    """
    grid = spatial_grid(2, m)
    fhat = _density_fn(grid, mixture_density(grid, sd=0.1))
    c = np.asarray(c, float)
    H, lam = pollard_hessian(c, fhat)
    J = fd_jacobian(lambda x: gradient_distortion(np.reshape(x, c.shape), fhat), c.ravel(), step)
    J = (J + J.T) / 2
    return float(np.linalg.norm(H - J) / np.linalg.norm(J)), lam


def check_pollard(tol=0.05):
    worst = 0.0
    for c in (((0.3, 0.5), (0.7, 0.5)), ((0.28, 0.45), (0.72, 0.55)), ((0.35, 0.5), (0.65, 0.5))):
        err, _ = hessian_fd_error(c)
        worst = max(worst, err)
    return worst <= tol, f"worst relative gap {worst:.3%}"


def check_quadratic_link():
    A = np.diag([1.0, 4.0])
    rep = check_gradient_link(lambda th: 0.5 * th @ A @ th, lambda th: A @ th, np.zeros(2), 1.0,
                              n_samples=200, seed=1)
    return rep.passed, f"max ratio {rep.max_ratio:.4f} <= bound {rep.bound:.4f}"


def check_clustering_link(seed=0):
    grid = spatial_grid(2, 128)
    fhat = _density_fn(grid, mixture_density(grid, sd=0.1))
    fit = fit_codebook(fhat, 2, seed=seed)
    c0 = fit.centroids

    def R(th):
        return distortion(np.reshape(th, c0.shape), fhat)

    def G(th):
        return gradient_distortion(np.reshape(th, c0.shape), fhat)

    rep = check_gradient_link(R, G, c0.ravel(), 0.03, n_samples=40, seed=seed, step=2e-3)
    return rep.passed, f"max ratio {rep.max_ratio:.4f} <= bound {rep.bound:.4f}"


def margin_reports(n_reps=20, n=400, seed=0):
    """Local margin diagnostic on synthetic regression replicates."""
    K = make_kernel("epanechnikov", 1)
    net = build_net(0.05, 0.3, 0.7, 1)
    noise = RegressionNoise("gaussian", 0.3)
    f = lambda W: np.sin(2 * np.pi * W[:, 0])  # noqa: E731
    reports = []
    for rep in range(n_reps):
        rng = np.random.default_rng([seed, rep])
        W = rng.random((n, 1))
        Y = f(W) + noise.sample(rng, n)
        s = RegressionSample(W, Y, f, noise)
        reports.append(check_local_margin(np.array([0.4]), s, net, K, 1.0, 2.0))
    return reports


def check_margin():
    reports = margin_reports()
    active = sum(r.precondition for r in reports)
    ok = all(r.passed for r in reports)
    return ok, f"{active} of {len(reports)} replicates meet the precondition; all of those hold: {ok}"


def deconvolution_identity_errors(h=0.1, scale=0.05):
    """(Fourier identity gap, |mass - 1|, noiseless gap) for the sinc kernel in 1-d."""
    K = make_kernel("sinc", 1)
    g = make_noise("laplace", (scale,), 1)
    dk = DeconvolutionKernel(K, (h,), g)
    t = np.linspace(-1.0 / h, 1.0 / h, 2001)[:, None]
    ident = float(np.max(np.abs(dk.fourier(t) * g.fourier(t) - K.fourier(t * h))))
    grid = offset_grid(1, 8001, h / 4)
    vals = deconv_kernel_on_grid(K, (h,), g, grid)
    mass = float(vals.riemann_sum())
    plain = DeconvolutionKernel(K, (h,), make_noise("none", (0.0,), 1))
    x = grid.points()
    direct = K(x / h) / h
    noiseless = float(np.max(np.abs(plain(x) - direct)))
    return ident, abs(mass - 1.0), noiseless


def check_deconvolution():
    ident, mass, plain = deconvolution_identity_errors()
    ok = ident <= 1e-10 and mass <= 1e-3 and plain <= 1e-8
    return ok, f"Fourier gap {ident:.1e}, mass error {mass:.1e}, noiseless gap {plain:.1e}"


CHECKS = (
    ("gradient vs finite differences", check_gradient_fd),
    ("face-integral Hessian vs finite differences", check_pollard),
    ("gradient link on a quadratic risk", check_quadratic_link),
    ("gradient link on the clustering distortion", check_clustering_link),
    ("local margin on synthetic regressions", check_margin),
    ("deconvolution identities", check_deconvolution),
)


def run_diagnostics(names=None):
    """Run every check (or those whose names are listed); returns results."""
    return [_timed(name, func) for name, func in CHECKS if names is None or name in names]
