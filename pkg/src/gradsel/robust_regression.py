"""Local-constant Huber regression with gradient-based bandwidth selection.

The local estimate at ``x0`` minimises ``t -> (1/n) sum rho_gamma(Y_i - t) K_h(W_i - x0)``
over ``[-B, B]``.  Its score in ``t`` is monotone for nonnegative kernels,
so the estimate is a bracketed root.  Two rules pick the bandwidth: a
pointwise rule comparing scores at one point (sup over a ``t``-grid), and a
global rule comparing them in ``L_q`` over a grid of points.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.neighbors import NearestNeighbors
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import check_bandwidth, check_points, check_positive
from .exceptions import EmptyWindow, InvalidQ
from .grids import BandwidthNet, GridFunction, GridSpec, build_net, regression_bounds
from .kernels import ConvolvedKernel, KernelSpec, dilated_axis, kernel_norm, make_kernel
from .selector import select_from_tables

N_T_POINTS = 201


# --------------------------------------------------------------------------
# Huber loss
# --------------------------------------------------------------------------

def huber(z, gamma):
    """``z^2/2`` for ``|z| <= gamma`` and ``gamma (|z| - gamma/2)`` beyond."""
    z = np.asarray(z, float)
    a = np.abs(z)
    out = np.where(a <= gamma, z * z / 2, gamma * (a - gamma / 2))
    return out if out.ndim else float(out)


def huber_prime(z, gamma):
    """Score ``clip(z, -gamma, gamma)``."""
    out = np.clip(np.asarray(z, float), -gamma, gamma)
    return out if out.ndim else float(out)


def huber_second(z, gamma):
    """Indicator of the quadratic branch, ``1{|z| <= gamma}``."""
    out = (np.abs(np.asarray(z, float)) <= gamma).astype(float)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionNoise:
    """Symmetric additive noise: ``gaussian``, ``t3`` (Student t, 3 dof),
    ``cauchy`` or ``none``, with a scale parameter."""

    id: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        nid = {"normal": "gaussian", "student-t3": "t3", "student_t3": "t3"}.get(self.id, self.id)
        if nid not in ("gaussian", "t3", "cauchy", "none"):
            raise ValueError(f"unknown regression noise {self.id!r}")
        object.__setattr__(self, "id", nid)
        if nid != "none" and not self.scale > 0:
            raise ValueError("noise scale must be positive")

    @property
    def dist(self):
        if self.id == "gaussian":
            return stats.norm(scale=self.scale)
        if self.id == "t3":
            return stats.t(3, scale=self.scale)
        if self.id == "cauchy":
            return stats.cauchy(scale=self.scale)
        return None

    def sample(self, rng, n):
        if self.id == "none":
            return np.zeros(n)
        if self.id == "gaussian":
            return self.scale * rng.standard_normal(n)
        if self.id == "t3":
            return self.scale * rng.standard_t(3, size=n)
        return self.scale * rng.standard_cauchy(n)

    def mean_score(self, a, gamma):
        """``E clip(xi + a, -gamma, gamma)``."""
        if self.id == "none":
            return float(np.clip(a, -gamma, gamma))
        dist = self.dist
        lo, hi = -gamma - a, gamma - a
        inner = integrate.quad(lambda x: (x + a) * dist.pdf(x), lo, hi,
                               epsabs=1e-13, epsrel=1e-12)[0]
        return float(gamma * dist.sf(hi) - gamma * dist.cdf(lo) + inner)

    def curvature(self, gamma):
        """``E rho''_gamma(xi) = P(|xi| <= gamma)``."""
        if self.id == "none":
            return 1.0
        return float(self.dist.cdf(gamma) - self.dist.cdf(-gamma))


@dataclass
class RegressionSample:
    """Design points ``W`` in ``[0, 1]^d`` with responses ``Y``."""

    W: np.ndarray
    Y: np.ndarray
    f_star: object = None
    noise: RegressionNoise = None

    def __post_init__(self):
        self.W = check_points(self.W, name="W")
        self.Y = np.asarray(self.Y, float).ravel()
        if len(self.Y) != len(self.W) or len(self.Y) < 1:
            raise ValueError("W and Y need the same positive number of rows")
        if np.any(self.W < 0) or np.any(self.W > 1):
            raise ValueError("design points must lie in [0, 1]^d")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("Y contains non-finite values")

    @property
    def n(self):
        return len(self.Y)

    @property
    def d(self):
        return self.W.shape[1]


@dataclass
class LocalFit:
    """Pointwise fit at ``x0`` with the selected bandwidth."""

    x0: np.ndarray
    h: tuple
    estimate: float
    B: float
    gamma: float
    report: object = None
    vhat: float = None


@dataclass
class GlobalFit:
    """Global rule outcome: the bandwidth and the fitted function on the x-grid."""

    h: tuple
    function: GridFunction
    report: object = None
    gamma: float = None
    B: float = None

    def to_csv(self, path=None):
        lines = [",".join([f"x{j + 1}" for j in range(self.function.grid.d)] + ["fit"])]
        for row in self.function.to_rows():
            lines.append(",".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


# --------------------------------------------------------------------------
# defaults
# --------------------------------------------------------------------------

def default_bound(Y):
    """``B = ceil(max |Y|)``, at least 1."""
    return float(max(1.0, math.ceil(float(np.max(np.abs(Y))))))


def default_gamma(sample, n_neighbors=None):
    """``1.345 * MAD / 0.6745`` of residuals from a nearest-neighbour median pilot."""
    n = sample.n
    k = n_neighbors or int(min(n, max(5, round(math.sqrt(n)))))
    idx = NearestNeighbors(n_neighbors=k).fit(sample.W).kneighbors(sample.W, return_distance=False)
    resid = sample.Y - np.median(sample.Y[idx], axis=1)
    mad = float(np.median(np.abs(resid - np.median(resid))))
    if mad <= 0:
        return 1.0
    return 1.345 * mad / 0.6745


# --------------------------------------------------------------------------
# kernel weights and scores
# --------------------------------------------------------------------------

def _require_nonnegative(K):
    if not K.nonnegative:
        raise ValueError("local Huber fits need a nonnegative kernel (epanechnikov or gaussian)")


def kernel_weights(sample, x0, K, h, eta=None):
    """``K_h(W_i - x0)`` for each design point, or ``(K_h * K_eta)(W_i - x0)``.

    ``x0`` may be a single point ``(d,)`` or a batch ``(m, d)``; the result has
    shape ``(n,)`` or ``(m, n)``.
    """
    h = check_bandwidth(h, K.d)
    x0 = np.asarray(x0, float)
    single = x0.ndim == 1
    X0 = np.atleast_2d(x0)
    diff = sample.W[None, :, :] - X0[:, None, :]
    if eta is None:
        out = np.ones(diff.shape[:2])
        for j in range(K.d):
            out *= dilated_axis(K, h[j], diff[..., j])
    else:
        out = ConvolvedKernel(K, h, eta)(diff)
    return out[0] if single else out


def _scores(Y, t, gamma):
    """``rho'(Y_i - t)`` on a t-grid, shape ``(len(t), n)``."""
    return np.clip(Y[None, :] - np.asarray(t, float)[:, None], -gamma, gamma)


def g_emp_loc(t, x0, h, sample, K, gamma, aux_eta=None):
    """``-(1/n) sum rho'_gamma(Y_i - t) K_h(W_i - x0)``; the auxiliary version
    uses ``K_h * K_eta``.  Vectorised over ``t``."""
    w = kernel_weights(sample, x0, K, h, aux_eta)
    t_arr = np.atleast_1d(np.asarray(t, float))
    out = -(_scores(sample.Y, t_arr, gamma) @ w) / sample.n
    return out if np.ndim(t) else float(out[0])


def _solve_roots(weights, Y, gamma, B, tol=1e-10):
    """Roots in ``[-B, B]`` of ``t -> -sum_i w_i clip(Y_i - t)`` for each row of weights.

    The function is nondecreasing, so bisection brackets the root; a final
    secant step on the bracket is exact where the function is affine.
    """
    W = np.atleast_2d(weights)
    m = W.shape[0]

    def G(t):
        return -np.einsum("mn,mn->m", np.clip(Y[None, :] - t[:, None], -gamma, gamma), W)

    lo = np.full(m, -B)
    hi = np.full(m, B)
    g_lo, g_hi = G(lo), G(hi)
    out = np.empty(m)
    at_lo = g_lo >= 0
    at_hi = (g_hi <= 0) & ~at_lo
    inner = ~(at_lo | at_hi)
    out[at_lo] = -B
    out[at_hi] = B
    if inner.any():
        a, b = lo[inner], hi[inner]
        ga, gb = g_lo[inner], g_hi[inner]
        Wi = W[inner]

        def Gi(t):
            return -np.einsum("mn,mn->m", np.clip(Y[None, :] - t[:, None], -gamma, gamma), Wi)

        while np.max(b - a) > tol:
            mid = 0.5 * (a + b)
            gm = Gi(mid)
            left = gm >= 0
            b = np.where(left, mid, b)
            gb = np.where(left, gm, gb)
            a = np.where(left, a, mid)
            ga = np.where(left, ga, gm)
        denom = gb - ga
        safe = denom > 0
        sec = np.where(safe, a - ga * (b - a) / np.where(safe, denom, 1.0), 0.5 * (a + b))
        out[inner] = np.clip(sec, a, b)
    return out


def local_estimate(x0, h, sample, K, gamma, B, tol=1e-10):
    """Huber local-constant estimate at ``x0`` with bandwidth ``h``."""
    _require_nonnegative(K)
    w = kernel_weights(sample, np.asarray(x0, float), K, h)
    if not np.any(w > 0):
        raise EmptyWindow(f"no design point in the kernel window at {x0}")
    return float(_solve_roots(w[None, :], sample.Y, gamma, B, tol)[0])


def local_estimates(X0, h, sample, K, gamma, B, tol=1e-10):
    """:func:`local_estimate` at every row of ``X0`` (vectorised)."""
    _require_nonnegative(K)
    X0 = check_points(X0, sample.d, "x0")
    w = kernel_weights(sample, X0, K, h)
    if np.any(~np.any(w > 0, axis=1)):
        raise EmptyWindow("a query point has no design point in its kernel window")
    return _solve_roots(w, sample.Y, gamma, B, tol)


# --------------------------------------------------------------------------
# majorants
# --------------------------------------------------------------------------

def majorant_loc(h, eta, n, l, K, vhat, C0=1.0):
    """``C0 ||K||_2 sqrt(vhat) (sqrt(l log n / (n prod(h v eta))) + sqrt(l log n / (n prod eta)))``.

    ``K`` is a :class:`KernelSpec` or directly the value of ``||K||_2``.
    """
    if vhat < 0:
        raise ValueError("vhat must be >= 0")
    h = np.atleast_1d(np.asarray(h, float))
    eta = np.atleast_1d(np.asarray(eta, float))
    k2 = kernel_norm(K, 2) if isinstance(K, KernelSpec) else float(K)
    c = l * math.log(n) / n
    return float(C0 * k2 * math.sqrt(vhat)
                 * (math.sqrt(c / np.prod(np.maximum(h, eta))) + math.sqrt(c / np.prod(eta))))


def gamma_lq(h, q, l, n, K, gamma, Cq=1.0):
    """Global fluctuation bound ``Gamma_{l,q}(h)``.

    ``q in [1, 2)``: ``Cq gamma sqrt(1+l) 4 ||K||_q (n prod h)^{-(q-1)/q}``;
    ``q >= 2``: ``Cq gamma sqrt(1+l) (30 q / log q) max(||K||_2, ||K||_q) (n prod h)^{-1/2}``.
    ``K`` is a :class:`KernelSpec` or a number used for every kernel norm.
    """
    q = float(q)
    if not q >= 1:
        raise InvalidQ(f"q must be >= 1, got {q}")

    def norm(p):
        return kernel_norm(K, p) if isinstance(K, KernelSpec) else float(K)

    nh = n * float(np.prod(np.atleast_1d(np.asarray(h, float))))
    base = Cq * gamma * math.sqrt(1.0 + l)
    if q < 2:
        return float(base * 4.0 * norm(q) * nh ** (-(q - 1.0) / q))
    return float(base * (30.0 * q / math.log(q)) * max(norm(2), norm(q)) * nh ** -0.5)


# --------------------------------------------------------------------------
# score tables
# --------------------------------------------------------------------------

def _pair_key(h, eta):
    return tuple(sorted(pair) for pair in zip(h, eta)).__repr__()


class _ScoreBank:
    """Scores ``G_h(t, x)`` and ``G_{h,eta}(t, x)`` on a t-grid for fixed query points."""

    def __init__(self, sample, X0, K, gamma, t_grid, loss_scale=1.0):
        self.sample = sample
        self.X0 = np.atleast_2d(X0)
        self.K = K
        self.S = _scores(sample.Y, t_grid, gamma) * loss_scale  # (T, n)
        self._cache = {}

    def get(self, h, eta=None):
        key = ("plain", tuple(h)) if eta is None else ("aux", _pair_key(h, eta))
        if key not in self._cache:
            w = kernel_weights(self.sample, self.X0, self.K, h, eta)  # (m, n)
            self._cache[key] = -(self.S @ w.T) / self.sample.n     # (T, m)
        return self._cache[key]


def _t_grid(B, t_points):
    return np.linspace(-B, B, int(t_points))


def _pilot_vhat(sample, net, K, gamma, B, max_points=400):
    """Mean squared score of residuals from a pilot fit at the net's median bandwidth."""
    arr = np.array(list(net))
    h_pilot = np.median(arr, axis=0)
    idx = np.arange(min(sample.n, max_points))
    theta = local_estimates(sample.W[idx], h_pilot, sample, K, gamma, B)
    return float(np.mean(huber_prime(sample.Y[idx] - theta, gamma) ** 2))


def _as_net(net):
    if isinstance(net, BandwidthNet):
        return net
    return BandwidthNet.from_members(list(net))


def pointwise_tables(x0, sample, net, K, gamma, B, t_points=N_T_POINTS, loss_scale=1.0):
    """Comparison table ``T[i, j] = max_t |G_{h_i, h_j}(t) - G_{h_j}(t)|`` at ``x0``."""
    net = _as_net(net)
    bank = _ScoreBank(sample, np.asarray(x0, float)[None, :], K, gamma, _t_grid(B, t_points),
                      loss_scale)
    members = list(net)
    m = len(members)
    table = np.empty((m, m))
    for j, eta in enumerate(members):
        plain = bank.get(eta)
        for i, h in enumerate(members):
            table[i, j] = np.max(np.abs(bank.get(h, eta) - plain))
    return table


def select_pointwise(x0, sample, net, K, gamma=None, B=None, C0=1.0, l=1,
                     t_points=N_T_POINTS, loss_scale=1.0, vhat=None, positive_part=False):
    """Pointwise bandwidth rule at ``x0``; returns a :class:`LocalFit`.

    ``loss_scale`` multiplies the loss (hence the scores and ``sqrt(vhat)``),
    which leaves the selected bandwidth unchanged.
    """
    K = make_kernel(K, sample.d)
    _require_nonnegative(K)
    net = _as_net(net)
    x0 = np.asarray(x0, float).ravel()
    gamma = default_gamma(sample) if gamma is None else check_positive(gamma, "gamma")
    B = default_bound(sample.Y) if B is None else check_positive(B, "B")
    if vhat is None:
        vhat = _pilot_vhat(sample, net, K, gamma, B)
    vhat_scaled = vhat * loss_scale ** 2
    table = pointwise_tables(x0, sample, net, K, gamma, B, t_points, loss_scale)
    members = list(net)
    majorants = np.array([[majorant_loc(h, eta, sample.n, l, K, vhat_scaled, C0)
                           for eta in members] for h in members])
    report = select_from_tables(net, table, majorants, int(t_points), positive_part,
                                notes={"rule": "pointwise", "vhat": vhat, "gamma": gamma, "B": B})
    est = local_estimate(x0, report.selected, sample, K, gamma, B)
    return LocalFit(x0, report.selected, est, B, gamma, report, vhat)


def interior_grid(d, m, margin):
    """Midpoint grid on ``[margin, 1 - margin]^d``."""
    if not 0 <= margin < 0.5:
        raise ValueError("margin must lie in [0, 1/2)")
    return GridSpec(int(d), int(m), float(margin), float(1.0 - margin))


def global_tables(sample, net, K, gamma, B, q, x_grid, t_points=N_T_POINTS, loss_scale=1.0):
    """``T[i, j] = max_t ||G_{h_i, h_j}(t, .) - G_{h_j}(t, .)||_q`` over the x-grid."""
    net = _as_net(net)
    bank = _ScoreBank(sample, x_grid.points(), K, gamma, _t_grid(B, t_points), loss_scale)
    vol = x_grid.cell_volume
    members = list(net)
    m = len(members)
    table = np.empty((m, m))
    for j, eta in enumerate(members):
        plain = bank.get(eta)
        for i, h in enumerate(members):
            diff = np.abs(bank.get(h, eta) - plain)
            table[i, j] = np.max((diff ** q).sum(axis=1) * vol) ** (1.0 / q)
    return table


def select_global(sample, net, K, gamma=None, B=None, q=2.0, l=1, x_grid=None, Cq=1.0,
                  t_points=N_T_POINTS, loss_scale=1.0, positive_part=False):
    """Global ``L_q`` bandwidth rule; returns a :class:`GlobalFit`.

    The x-grid must stay at least ``max h_plus`` away from the boundary of
    ``[0, 1]^d``.  The default uses 64 nodes per axis on that interior box.
    """
    K = make_kernel(K, sample.d)
    _require_nonnegative(K)
    net = _as_net(net)
    q = float(q)
    if not q >= 1:
        raise InvalidQ(f"q must be >= 1, got {q}")
    gamma = default_gamma(sample) if gamma is None else check_positive(gamma, "gamma")
    B = default_bound(sample.Y) if B is None else check_positive(B, "B")
    reach = float(np.max(net.array()))
    if x_grid is None:
        x_grid = interior_grid(sample.d, 64 if sample.d == 1 else 16, reach)
    if x_grid.lo < reach - 1e-12 or x_grid.hi > 1 - reach + 1e-12:
        raise ValueError(f"x-grid must stay {reach:g} away from the boundary")
    table = global_tables(sample, net, K, gamma, B, q, x_grid, t_points, loss_scale)
    members = list(net)
    g_scaled = gamma * loss_scale
    big_gamma = {h: gamma_lq(h, q, l, sample.n, K, g_scaled, Cq) for h in members}
    join = lambda a, b: tuple(np.maximum(a, b))
    majorants = np.array([[gamma_lq(join(h, eta), q, l, sample.n, K, g_scaled, Cq) + big_gamma[eta]
                           for eta in members] for h in members])
    sup = np.array([2.0 * big_gamma[h] for h in members])
    report = select_from_tables(net, table, majorants, int(t_points), positive_part, sup,
                                notes={"rule": "global", "q": q, "gamma": gamma, "B": B})
    values = local_estimates(x_grid.points(), report.selected, sample, K, gamma, B)
    return GlobalFit(report.selected, GridFunction(x_grid, values), report, gamma, B)


# --------------------------------------------------------------------------
# local margin diagnostic
# --------------------------------------------------------------------------

@dataclass
class MarginReport:
    """Both sides of the local margin inequality for each bandwidth."""

    bandwidths: list
    lhs: np.ndarray
    rhs: np.ndarray
    curvature: float
    precondition: bool
    holds: np.ndarray = field(default=None)

    @property
    def passed(self):
        """True unless the precondition holds and some inequality fails."""
        return (not self.precondition) or bool(np.all(self.holds))


def population_score(t, a, noise, gamma):
    """``G(t) = -E rho'_gamma(a + xi - t)`` for the known noise law."""
    return -noise.mean_score(a - t, gamma)


def check_local_margin(x0, sample, net, K, gamma, B, f_star_x0=None, noise=None, slack=1e-12):
    """Check ``|theta_h - f*(x0)| <= (2 / E rho'') |G(theta_h) - G(f*(x0))|`` over the net.

    The precondition ``max_h |theta_h - f*(x0)| <= E rho'' / 4`` is reported
    alongside; the check passes when the precondition fails or every
    inequality holds.
    """
    K = make_kernel(K, sample.d)
    noise = noise if noise is not None else sample.noise
    if noise is None:
        raise ValueError("the noise law is needed to evaluate the population score")
    if f_star_x0 is None:
        if sample.f_star is None:
            raise ValueError("f_star(x0) is needed")
        f_star_x0 = float(np.asarray(sample.f_star(np.atleast_2d(x0))).ravel()[0])
    curv = noise.curvature(gamma)
    members = list(_as_net(net))
    theta = np.array([local_estimate(x0, h, sample, K, gamma, B) for h in members])
    lhs = np.abs(theta - f_star_x0)
    g_star = population_score(f_star_x0, f_star_x0, noise, gamma)
    rhs = np.array([2.0 / curv * abs(population_score(t, f_star_x0, noise, gamma) - g_star)
                    for t in theta])
    pre = bool(lhs.max() <= curv / 4.0)
    return MarginReport(members, lhs, rhs, curv, pre, lhs <= rhs + slack)


# --------------------------------------------------------------------------
# estimator
# --------------------------------------------------------------------------

class HuberLocalRegressor(RegressorMixin, BaseEstimator):
    """Local-constant Huber regression with data-driven anisotropic bandwidths.

    ``rule="pointwise"`` selects a bandwidth separately at each query point;
    ``rule="global"`` selects one bandwidth by the ``L_q`` rule during ``fit``.
    Inputs must lie in ``[0, 1]^d``.
    """

    def __init__(self, kernel="epanechnikov", rule="pointwise", gamma=None, B=None, C0=1.0,
                 Cq=1.0, q=2.0, l=1, h_bounds=None, net_ratio=0.7, net_cap=None,
                 t_points=N_T_POINTS, x_grid_size=None):
        self.kernel = kernel
        self.rule = rule
        self.gamma = gamma
        self.B = B
        self.C0 = C0
        self.Cq = Cq
        self.q = q
        self.l = l
        self.h_bounds = h_bounds
        self.net_ratio = net_ratio
        self.net_cap = net_cap
        self.t_points = t_points
        self.x_grid_size = x_grid_size

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.rule not in ("pointwise", "global"):
            raise ValueError("rule must be 'pointwise' or 'global'")
        sample = RegressionSample(X, y)
        d = sample.d
        self.kernel_ = make_kernel(self.kernel, d)
        _require_nonnegative(self.kernel_)
        if self.h_bounds is None:
            h_minus, h_plus, _ = regression_bounds(sample.n, d)
        else:
            h_minus, h_plus = self.h_bounds
        cap = self.net_cap if self.net_cap is not None else sample.n
        self.net_ = build_net(h_minus, h_plus, self.net_ratio, d, cap)
        self.gamma_ = default_gamma(sample) if self.gamma is None else float(self.gamma)
        self.B_ = default_bound(y) if self.B is None else float(self.B)
        self.sample_ = sample
        if self.rule == "global":
            grid = None
            if self.x_grid_size is not None:
                grid = interior_grid(d, self.x_grid_size, float(np.max(self.net_.array())))
            self.global_fit_ = select_global(sample, self.net_, self.kernel_, self.gamma_,
                                             self.B_, self.q, self.l, grid, self.Cq, self.t_points)
            self.bandwidth_ = np.asarray(self.global_fit_.h)
        else:
            self.vhat_ = _pilot_vhat(sample, self.net_, self.kernel_, self.gamma_, self.B_)
        return self

    def predict(self, X):
        check_is_fitted(self, "sample_")
        X = check_array(X)
        if self.rule == "global":
            return local_estimates(X, self.bandwidth_, self.sample_, self.kernel_,
                                   self.gamma_, self.B_)
        fits = [select_pointwise(x, self.sample_, self.net_, self.kernel_, self.gamma_, self.B_,
                                 self.C0, self.l, self.t_points, vhat=self.vhat_) for x in X]
        self.local_fits_ = fits
        return np.array([f.estimate for f in fits])
