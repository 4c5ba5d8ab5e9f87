"""k-means clustering from observations blurred by additive noise.

The population distortion ``R(c) = E min_j |X - c_j|^2`` is estimated from
noisy draws ``Z = X + eps`` through a deconvolution density estimate on a
uniform grid of ``[0, 1]^d``.  Gradients are Voronoi-cell integrals, the
bandwidth is chosen by the gradient comparison rule of
:mod:`gradsel.selector`, and the centroids come from a Lloyd-type fixed
point on the estimated density.

Codebooks are ``(k, d)`` arrays; gradients and Hessians use the matching
centroid-major flattening ``c.ravel()``.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_seed_sequence, check_bandwidth, check_points
from .exceptions import (DegenerateCodebook, EmptyCell, KTooLargeForExactMatching,
                         UnsupportedDimension)
from .grids import BandwidthNet, GridFunction, GridSpec, build_net, clustering_bounds, spatial_grid
from .kernels import DeconvolutionKernel, KernelSpec, make_kernel, make_noise, no_noise
from .selector import CandidateSet, select_from_tables

MAX_EXACT_MATCHING_K = 8


# --------------------------------------------------------------------------
# data containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """``x -> (x - offset) / scale``, the same scale on every axis."""

    offset: np.ndarray
    scale: float

    def forward(self, x):
        return (np.asarray(x, float) - self.offset) / self.scale

    def inverse(self, u):
        return np.asarray(u, float) * self.scale + self.offset

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), 1.0)

    @classmethod
    def to_unit_box(cls, x, margin=0.25):
        """Similarity map sending the bounding box of ``x`` into the middle of
        ``[0, 1]^d``, leaving a relative ``margin`` of the longest side on each end."""
        x = np.asarray(x, float)
        lo, hi = x.min(axis=0), x.max(axis=0)
        side = float((hi - lo).max()) or 1.0
        scale = side * (1.0 + 2.0 * margin)
        center = (lo + hi) / 2.0
        return cls(center - 0.5 * scale, scale)


@dataclass
class NoisySample:
    """Observations ``Z = X + eps`` with optional latent labels and clean points."""

    Z: np.ndarray
    labels: np.ndarray = None
    latent: np.ndarray = None
    noise: object = None
    affine: AffineMap = None

    def __post_init__(self):
        self.Z = check_points(self.Z, name="Z")
        n, d = self.Z.shape
        if n < 1:
            raise ValueError("sample is empty")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (n,):
                raise ValueError("labels must have one entry per observation")
        if self.latent is not None:
            self.latent = check_points(self.latent, d, "latent")
        if self.affine is None:
            self.affine = AffineMap.identity(d)

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def d(self):
        return self.Z.shape[1]

    def unit(self):
        """Observations in grid coordinates."""
        return self.affine.forward(self.Z)

    def unit_noise(self):
        """Noise model expressed in grid coordinates."""
        if self.noise is None:
            return no_noise(self.d)
        g = self.noise
        return type(g)(g.id, tuple(s / self.affine.scale for s in g.scale), g.na_beta, g.na_rho)


@dataclass
class Codebook:
    """``k`` centroids stored as a ``(k, d)`` array plus fitting diagnostics."""

    centroids: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, float))

    @property
    def k(self):
        return self.centroids.shape[0]


def check_codebook(c, unit_box=False):
    c = np.atleast_2d(np.asarray(getattr(c, "centroids", c), float))
    if c.shape[0] > 1:
        gaps = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        gaps[np.diag_indices_from(gaps)] = np.inf
        if gaps.min() <= 1e-9:
            raise DegenerateCodebook("two centroids coincide")
    if unit_box and (np.any(c < 0) or np.any(c > 1)):
        raise ValueError("centroids must lie in [0, 1]^d")
    return c


@dataclass
class DeconvDensity:
    """Deconvolution density estimate on a grid; values may be negative."""

    function: GridFunction
    kernel: KernelSpec
    h: np.ndarray
    noise: object
    eta: np.ndarray = None
    n: int = 0

    @property
    def grid(self):
        return self.function.grid

    @property
    def values(self):
        return self.function.values

    @property
    def auxiliary(self):
        return self.eta is not None

    def flat(self):
        return self.function.flat()

    def mass(self):
        return self.function.riemann_sum()


# --------------------------------------------------------------------------
# density estimation
# --------------------------------------------------------------------------

def _axis_key(K, hj, etaj):
    if etaj is None:
        return (float(hj),)
    if K.id == "sinc":
        return (float(max(hj, etaj)),)
    return (float(min(hj, etaj)), float(max(hj, etaj)))


def _product_density(factors):
    """``(1/n) sum_i prod_j A_j[i, a_j]`` as a d-way array."""
    n = factors[0].shape[0]
    if len(factors) == 1:
        return factors[0].sum(axis=0) / n
    if len(factors) == 2:
        return factors[0].T @ factors[1] / n
    letters = "abcdefghjklm"[: len(factors)]
    expr = ",".join("i" + c for c in letters) + "->" + letters
    return np.einsum(expr, *factors, optimize=True) / n


class DensityBank:
    """Caches per-axis kernel matrices and densities for one sample.

    ``K~(Z_i - x)`` factors over axes, so every density on the grid is a sum
    of outer products of per-axis matrices ``A_j[i, a] = k~_j(Z_ij - x_a)``.
    Auxiliary densities share the cache through a canonical key.
    """

    def __init__(self, Zu, K, g, grid):
        self.Z = check_points(Zu, K.d, "Z")
        self.K = K
        self.g = g if g is not None else no_noise(K.d)
        self.grid = grid
        self.nodes = grid.axis()
        self._axis = {}
        self._dens = {}

    def key(self, h, eta=None):
        h = check_bandwidth(h, self.K.d)
        eta = None if eta is None else check_bandwidth(eta, self.K.d, "eta")
        return tuple(_axis_key(self.K, h[j], None if eta is None else eta[j])
                     for j in range(self.K.d))

    def _axis_matrix(self, j, akey):
        ck = (j, akey)
        if ck not in self._axis:
            d = self.K.d
            if len(akey) == 1:
                dk = DeconvolutionKernel(self.K, np.full(d, akey[0]), self.g)
            else:
                dk = DeconvolutionKernel(self.K, np.full(d, akey[0]), self.g, np.full(d, akey[1]))
            self._axis[ck] = dk.axis_matrix(j, self.Z[:, j], self.nodes)
        return self._axis[ck]

    def values(self, h, eta=None):
        """Flat density values for ``K~_h`` or ``K~_{h,eta}``."""
        key = self.key(h, eta)
        if key not in self._dens:
            factors = [self._axis_matrix(j, akey) for j, akey in enumerate(key)]
            self._dens[key] = _product_density(factors).ravel()
        return self._dens[key]

    def density(self, h, eta=None):
        h = check_bandwidth(h, self.K.d)
        return DeconvDensity(GridFunction(self.grid, self.values(h, eta)), self.K, h, self.g,
                             None if eta is None else check_bandwidth(eta, self.K.d), len(self.Z))


def _check_nyquist(K, g, grid, *bandwidths):
    if g.id == "none" or not K.band_limited:
        return
    S = np.asarray(K.fourier_support)
    for h in bandwidths:
        if h is not None and np.any(S / np.asarray(h) > grid.nyquist):
            from .exceptions import GridTooCoarse
            raise GridTooCoarse(f"grid too coarse for bandwidth {tuple(h)}")


def deconv_density(sample, K, h, g=None, grid=None, aux_eta=None):
    """Deconvolution density ``(1/n) sum_i K~(Z_i - x)`` on the grid nodes.

    ``sample`` is a :class:`NoisySample` (its grid coordinates are used) or an
    array already in ``[0, 1]^d`` coordinates.
    """
    if isinstance(sample, NoisySample):
        Zu = sample.unit()
        if g is None:
            g = sample.unit_noise()
    else:
        Zu = check_points(sample, K.d, "Z")
    g = g if g is not None else no_noise(K.d)
    grid = grid if grid is not None else spatial_grid(K.d)
    _check_nyquist(K, g, grid, h, aux_eta)
    return DensityBank(Zu, K, g, grid).density(h, aux_eta)


# --------------------------------------------------------------------------
# distortion and its derivatives
# --------------------------------------------------------------------------

def _as_density_values(fhat):
    if isinstance(fhat, DeconvDensity):
        return fhat.grid, fhat.flat()
    if isinstance(fhat, GridFunction):
        return fhat.grid, fhat.flat()
    raise TypeError("expected a DeconvDensity or GridFunction")


def voronoi_labels(points, c):
    """Nearest-centroid index per point (ties to the lowest index) and the
    ``(N, k)`` matrix of squared distances."""
    d2 = ((points[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1)
    return np.argmin(d2, axis=1), d2


def _nearest(points, c, with_distance=True):
    """Labels (and squared distances) to the nearest centroid via one matrix product."""
    if c.shape[0] == 2 and not with_distance:
        # two centroids: the Voronoi split is a half-plane test
        side = points @ (c[1] - c[0])
        return (side > 0.5 * ((c[1] ** 2).sum() - (c[0] ** 2).sum())).astype(np.intp), None
    cross = points @ (-2.0 * c.T)
    cross += (c * c).sum(axis=1)
    labels = np.argmin(cross, axis=1)
    if not with_distance:
        return labels, None
    near = np.take_along_axis(cross, labels[:, None], axis=1)[:, 0] + (points * points).sum(axis=1)
    return labels, np.maximum(near, 0.0)


_POINTS_CACHE = {}


def _grid_points(grid):
    if grid not in _POINTS_CACHE:
        _POINTS_CACHE[grid] = grid.points()
    return _POINTS_CACHE[grid]


def distortion(c, fhat):
    """Riemann sum of ``min_j |x - c_j|^2 fhat(x)`` over the grid."""
    grid, f = _as_density_values(fhat)
    c = np.atleast_2d(np.asarray(getattr(c, "centroids", c), float))
    _, d2 = voronoi_labels(_grid_points(grid), c)
    return float(d2.min(axis=1) @ f * grid.cell_volume)


def _cell_moments(points, labels, k, F):
    """Masses ``(D, k)`` and first moments ``(D, k, d)`` of each density row of F."""
    onehot = np.zeros((points.shape[0], k))
    onehot[np.arange(points.shape[0]), labels] = 1.0
    mass = F @ onehot
    first = np.stack([F @ (onehot * points[:, [u]]) for u in range(points.shape[1])], axis=-1)
    return mass, first


def gradient_batch(c, grid, F):
    """Distortion gradients of one codebook for every density row of ``F``.

    Returns an array ``(D, k * d)``.
    """
    c = check_codebook(c)
    F = np.atleast_2d(F)
    pts = _grid_points(grid)
    labels, _ = voronoi_labels(pts, c)
    mass, first = _cell_moments(pts, labels, c.shape[0], F)
    grad = -2.0 * (first - mass[..., None] * c[None]) * grid.cell_volume
    return grad.reshape(F.shape[0], -1)


def gradient_distortion(c, fhat):
    """Gradient of :func:`distortion` in ``c``; block ``j`` is
    ``-2 int_{V_j} (x - c_j) fhat(x) dx``."""
    grid, f = _as_density_values(fhat)
    return gradient_batch(c, grid, f[None, :])[0]


def pollard_hessian(c, fhat, n_quad=512):
    """Distortion Hessian from the Voronoi block formula (d = 2 only).

    Diagonal blocks ``2 P(V_i) I - 2 sum_u |c_i - c_u|^-1 int_{F_iu} f (x-c_i)(x-c_i)^T``,
    off-diagonal blocks ``2 |c_i - c_j|^-1 int_{F_ij} f (x-c_i)(x-c_j)^T``; face
    integrals use the midpoint rule on each face clipped to ``[0, 1]^2``.
    Returns ``(H, smallest eigenvalue)``.
    """
    grid, f = _as_density_values(fhat)
    if grid.d != 2:
        raise UnsupportedDimension("the face-integral Hessian is implemented for d = 2")
    c = check_codebook(c)
    k = c.shape[0]
    pts = _grid_points(grid)
    labels, _ = voronoi_labels(pts, c)
    cell_mass = np.bincount(labels, weights=f, minlength=k) * grid.cell_volume
    axis = grid.axis()
    interp = RegularGridInterpolator((axis, axis), f.reshape(grid.shape), method="linear",
                                     bounds_error=False, fill_value=None)
    H = np.zeros((2 * k, 2 * k))
    for i in range(k):
        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] += 2.0 * cell_mass[i] * np.eye(2)
    for i, u in itertools.combinations(range(k), 2):
        seg = _voronoi_face(c, i, u)
        if seg is None:
            continue
        a, b = seg
        s = (np.arange(n_quad) + 0.5) / n_quad
        x = a + s[:, None] * (b - a)
        w = interp(x) * np.linalg.norm(b - a) / n_quad
        delta = np.linalg.norm(c[i] - c[u])
        xi, xu = x - c[i], x - c[u]
        Mii = np.einsum("q,qa,qb->ab", w, xi, xi)
        Muu = np.einsum("q,qa,qb->ab", w, xu, xu)
        Miu = np.einsum("q,qa,qb->ab", w, xi, xu)
        H[2 * i:2 * i + 2, 2 * i:2 * i + 2] -= 2.0 / delta * Mii
        H[2 * u:2 * u + 2, 2 * u:2 * u + 2] -= 2.0 / delta * Muu
        H[2 * i:2 * i + 2, 2 * u:2 * u + 2] += 2.0 / delta * Miu
        H[2 * u:2 * u + 2, 2 * i:2 * i + 2] += 2.0 / delta * Miu.T
    H = (H + H.T) / 2
    return H, float(np.linalg.eigvalsh(H).min())


def _voronoi_face(c, i, u):
    """End points of the face shared by cells i and u inside the unit square."""
    mid = (c[i] + c[u]) / 2.0
    normal = c[u] - c[i]
    direction = np.array([-normal[1], normal[0]]) / np.linalg.norm(normal)
    lo, hi = -np.inf, np.inf
    # box constraints 0 <= mid + s * direction <= 1
    for a in range(2):
        if abs(direction[a]) < 1e-15:
            if not 0.0 <= mid[a] <= 1.0:
                return None
            continue
        s1, s2 = (0.0 - mid[a]) / direction[a], (1.0 - mid[a]) / direction[a]
        lo, hi = max(lo, min(s1, s2)), min(hi, max(s1, s2))
    # stay closer to c_i than to any other centroid: 2 x.(c_v - c_i) <= |c_v|^2 - |c_i|^2
    for v in range(len(c)):
        if v in (i, u):
            continue
        coef = 2.0 * (c[v] - c[i])
        rhs = c[v] @ c[v] - c[i] @ c[i] - coef @ mid
        slope = coef @ direction
        if abs(slope) < 1e-15:
            if rhs < 0:
                return None
        elif slope > 0:
            hi = min(hi, rhs / slope)
        else:
            lo = max(lo, rhs / slope)
    if not hi > lo:
        return None
    return mid + lo * direction, mid + hi * direction


# --------------------------------------------------------------------------
# Lloyd iterations
# --------------------------------------------------------------------------

def kmeanspp_init(points, weights, k, rng):
    """k-means++ seeding on weighted points."""
    w = np.clip(np.asarray(weights, float), 0.0, None)
    if w.sum() <= 0:
        raise EmptyCell("no positive mass to seed centroids")
    idx = rng.choice(len(points), p=w / w.sum())
    centers = [points[idx]]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        p = w * closest
        if p.sum() <= 0:
            p = w
        idx = rng.choice(len(points), p=p / p.sum())
        centers.append(points[idx])
        closest = np.minimum(closest, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers, float)


def axis_split_inits(points, weights, k):
    """One start per coordinate axis: centroids at the weighted
    ``(j + 1/2)/k`` quantiles along that axis, other coordinates at the mean."""
    w = np.clip(np.asarray(weights, float), 0.0, None)
    if w.sum() <= 0:
        return []
    mean = w @ points / w.sum()
    levels = (np.arange(k) + 0.5) / k
    inits = []
    for a in range(points.shape[1]):
        order = np.argsort(points[:, a], kind="stable")
        cdf = np.cumsum(w[order]) / w.sum()
        picks = points[order[np.minimum(np.searchsorted(cdf, levels), len(order) - 1)], a]
        c = np.tile(mean, (k, 1))
        c[:, a] = picks
        inits.append(c)
    return inits


def weighted_lloyd(points, weights, centers, max_iter=100, tol=1e-8, record=True):
    """Lloyd iterations on weighted points from the given centers.

    Returns ``(centers, n_iter, history)`` where ``history`` lists the
    distortion before each update (empty unless ``record``).  Raises
    :class:`EmptyCell` when a cell loses all its mass.
    """
    centers = np.array(centers, float)
    k = centers.shape[0]
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, near = _nearest(points, centers, record)
        if record:
            history.append(float(near @ weights))
        mass = np.bincount(labels, weights=weights, minlength=k)
        if np.any(mass <= 0):
            raise EmptyCell("a Voronoi cell has no positive mass")
        new = np.stack([np.bincount(labels, weights=weights * points[:, u], minlength=k)
                        for u in range(points.shape[1])], axis=1) / mass[:, None]
        move = float(np.abs(new - centers).max())
        centers = new
        if move < tol:
            break
    if record:
        history.append(float(_nearest(points, centers)[1] @ weights))
    return centers, n_iter, history


def _coarsen(grid, w, target=48):
    """Block-sum weights onto a grid with about ``target`` nodes per axis.

    Returns ``(points, weights)`` for the coarse grid; the block centres are the
    means of the fine nodes they replace.
    """
    factor = max(1, grid.m // target)
    while grid.m % factor:
        factor -= 1
    if factor == 1:
        return _grid_points(grid), w
    coarse = GridSpec(grid.d, grid.m // factor, grid.lo, grid.hi)
    shape = []
    for _ in range(grid.d):
        shape += [coarse.m, factor]
    blocks = w.reshape(shape).sum(axis=tuple(range(1, 2 * grid.d, 2)))
    return _grid_points(coarse), blocks.ravel()


def _signed_polish(points, f, vol, centers, max_iter, tol):
    """Fixed-point iteration ``c_j <- barycenter of the signed density on V_j``.

    A fixed point zeroes :func:`gradient_distortion`.  Returns None when a
    cell's signed mass collapses or a centroid leaves the unit box.
    """
    k = centers.shape[0]
    total = abs(f.sum() * vol)
    for _ in range(max_iter):
        labels, _ = _nearest(points, centers, False)
        mass = np.bincount(labels, weights=f, minlength=k) * vol
        if np.any(mass <= 1e-3 * total):
            return None
        new = np.stack([np.bincount(labels, weights=f * points[:, u], minlength=k)
                        for u in range(points.shape[1])], axis=1) * vol / mass[:, None]
        if np.any(new < 0) or np.any(new > 1):
            return None
        move = float(np.abs(new - centers).max())
        centers = new
        if move < tol:
            return centers
    return None


def fit_codebook(fhat, k, seed=0, max_iter=100, tol=1e-6, n_restarts=5):
    """Centroids minimising the estimated distortion.

    Starts are one coordinate split per axis plus ``n_restarts`` k-means++
    seeds, all drawn from grid nodes weighted by ``max(fhat, 0)``.  Each start
    runs Lloyd on that clipped density (first on a block-summed coarse grid,
    then on the full grid) and is polished with the signed fixed-point
    iteration when it stays well defined.  The start with the smallest signed
    distortion wins.
    """
    grid, f = _as_density_values(fhat)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = _grid_points(grid)
    vol = grid.cell_volume
    w = np.clip(f, 0.0, None) * vol
    rng = np.random.default_rng(as_seed_sequence(seed))
    coarse_pts, coarse_w = _coarsen(grid, w)
    # nodes without weight cannot move Lloyd centroids, and nodes with
    # negligible |fhat| barely move the signed barycentres: drop both
    live = w > 0
    active = np.abs(f) > 1e-10 * np.abs(f).max(initial=0.0)
    live_pts, live_w = pts[live], w[live]
    act_pts, act_f = pts[active], f[active]
    best = None
    failures = 0
    seen = set()
    starts = axis_split_inits(coarse_pts, coarse_w, k) + [None] * n_restarts
    for init in starts:
        try:
            # seed and iterate on a block-summed copy, then refine on the full grid
            if init is None:
                init = kmeanspp_init(coarse_pts, coarse_w, k, rng)
            centers, _, _ = weighted_lloyd(coarse_pts, coarse_w, init, max_iter, tol, record=False)
            centers, n_iter, _ = weighted_lloyd(live_pts, live_w, centers, max_iter, tol,
                                                record=False)
        except EmptyCell:
            failures += 1
            continue
        # restarts often land on the same Lloyd fixed point; polish each one once
        key = tuple(np.round(centers[np.lexsort(centers.T[::-1])], 9).ravel())
        if key in seen:
            continue
        seen.add(key)
        polished = _signed_polish(act_pts, act_f, vol, centers, max_iter, tol)
        if polished is not None:
            centers = polished
        try:
            check_codebook(centers)
        except DegenerateCodebook:
            failures += 1
            continue
        value = distortion(centers, fhat)
        if best is None or value < best[0]:
            best = (value, centers, n_iter, polished is not None)
    if best is None:
        raise EmptyCell("every start produced an empty Voronoi cell")
    value, centers, n_iter, polished = best
    grad = gradient_distortion(centers, fhat)
    return Codebook(centers, {
        "distortion": value, "grad_norm": float(np.linalg.norm(grad)),
        "n_iter": n_iter, "signed_fixed_point": polished, "failed_restarts": failures,
    })


def lloyd_kmeans_baseline(sample, k, seed=0, n_init=5, max_iter=300, tol=1e-10):
    """Plain Lloyd k-means on the raw observations (k-means++ seeding, best of ``n_init``)."""
    Z = sample.Z if isinstance(sample, NoisySample) else check_points(sample, name="Z")
    w = np.ones(len(Z))
    rng = np.random.default_rng(as_seed_sequence(seed))
    best = None
    for _ in range(n_init):
        init = kmeanspp_init(Z, w, k, rng)
        try:
            centers, n_iter, history = weighted_lloyd(Z, w, init, max_iter, tol)
        except EmptyCell:
            continue
        if best is None or history[-1] < best[2][-1]:
            best = (centers, n_iter, history)
    if best is None:
        raise EmptyCell("every Lloyd run emptied a cell")
    centers, n_iter, history = best
    return Codebook(centers, {"distortion": history[-1] / len(Z), "n_iter": n_iter,
                              "history": [v / len(Z) for v in history]})


# --------------------------------------------------------------------------
# majorant, selection, baselines
# --------------------------------------------------------------------------

def majorant_kmeans(h, eta, n, k, d, beta, b1_prime):
    """``b1' sqrt(k d) (prod eta^-beta + prod (h v eta)^-beta) / sqrt(n)``."""
    if b1_prime <= 0:
        raise ValueError("b1_prime must be positive")
    h = np.asarray(h, float)
    eta = np.asarray(eta, float)
    beta = np.broadcast_to(np.asarray(beta, float), h.shape)
    term = np.prod(eta ** -beta) + np.prod(np.maximum(h, eta) ** -beta)
    return float(b1_prime * math.sqrt(k * d) * term / math.sqrt(n))


class KMeansBandwidthSelection:
    """Everything the noisy k-means selection rule needs for one sample.

    Densities, fitted codebooks and the comparison table do not depend on the
    majorant constant, so :meth:`select` can be called for several constants
    at the cost of one table lookup each.
    """

    def __init__(self, Zu, K, g, net, k, grid, seed=0, beta=None, loss_scale=1.0,
                 max_iter=100, tol=1e-6, n_restarts=5):
        self.K = K
        self.g = g if g is not None else no_noise(K.d)
        self.net = net
        self.k = int(k)
        self.grid = grid
        self.beta = np.asarray(self.g.na_beta if beta is None else beta, float)
        self.loss_scale = float(loss_scale)
        for h in net:
            _check_nyquist(K, self.g, grid, h)
        self.bank = DensityBank(Zu, K, self.g, grid)
        self.n = self.bank.Z.shape[0]
        seeds = as_seed_sequence(seed).spawn(len(net))
        self.fits = [fit_codebook(self.bank.density(h), self.k, seeds[i], max_iter, tol, n_restarts)
                     for i, h in enumerate(net)]
        self.candidates = CandidateSet([f.centroids for f in self.fits])
        self._table = None

    def _gradients(self):
        """Gradient of every needed density at every candidate codebook."""
        members = list(self.net)
        keys = {}
        for h in members:
            keys.setdefault(self.bank.key(h), (h, None))
            for eta in members:
                keys.setdefault(self.bank.key(h, eta), (h, eta))
        order = list(keys)
        F = np.stack([self.bank.values(*keys[key]) for key in order])
        G = np.stack([gradient_batch(c, self.grid, F) for c in self.candidates])
        return {key: G[:, i, :] * self.loss_scale for i, key in enumerate(order)}

    @property
    def table(self):
        """``T[i, j] = max_c |D_{h_i, h_j}(c) - D_{h_j}(c)|_2``."""
        if self._table is None:
            grads = self._gradients()
            members = list(self.net)
            m = len(members)
            table = np.empty((m, m))
            for j, eta in enumerate(members):
                plain = grads[self.bank.key(eta)]
                for i, h in enumerate(members):
                    diff = grads[self.bank.key(h, eta)] - plain
                    table[i, j] = np.sqrt((diff ** 2).sum(axis=1)).max()
            self._table = table
        return self._table

    def majorants(self, b1_prime):
        d = self.K.d
        return np.array([[majorant_kmeans(h, eta, self.n, self.k, d, self.beta, b1_prime)
                          for eta in self.net] for h in self.net])

    def select(self, b1_prime=1.0, positive_part=False):
        report = select_from_tables(
            self.net, self.table, self.majorants(b1_prime), len(self.candidates),
            positive_part, notes={"kernel": self.K.id, "b1_prime": b1_prime},
        )
        return report, self.fits[report.selected_index]

    def erc_select(self, const=1.0, positive_part=True):
        """Isotropic comparison of kernel empirical risks (ERC baseline).

        ``ERC(h) = max_{eta > h} {|R_eta(c_h) - R_eta(c_eta)| - T(h, eta)}_+ + T(h, h)``
        with ``T(h, eta) = const (prod eta^-beta + prod h^-beta) / sqrt(n)`` and
        ``R_eta`` the distortion under the density at bandwidth ``eta``.
        """
        iso = [i for i, h in enumerate(self.net) if len(set(h)) == 1]
        if not iso:
            raise ValueError("ERC needs isotropic bandwidths in the net")
        beta = self.beta

        def thr(h, eta):
            return const * (np.prod(np.asarray(eta) ** -beta) + np.prod(np.asarray(h) ** -beta)) \
                / math.sqrt(self.n)

        scores = []
        for i in iso:
            h = self.net[i]
            worst = 0.0 if positive_part else -math.inf
            for j in iso:
                eta = self.net[j]
                if not eta[0] > h[0]:
                    continue
                dens = self.bank.density(eta)
                gap = abs(distortion(self.fits[i].centroids, dens)
                          - distortion(self.fits[j].centroids, dens)) * self.loss_scale
                worst = max(worst, gap - thr(h, eta))
            # the coarsest member has nothing to compare against
            scores.append((0.0 if worst == -math.inf else worst) + thr(h, h))
        members = [self.net[i] for i in iso]
        from .selector import tie_break_argmin
        pos, _ = tie_break_argmin(scores, members)
        return members[pos], self.fits[iso[pos]], np.array(scores)


def select_bandwidth_kmeans(sample, K, g, net, k, b1_prime=1.0, grid=None, seed=0,
                            beta=None, positive_part=False):
    """Noisy k-means bandwidth rule.  Returns ``(SelectionReport, Codebook)``;
    the codebook is in grid coordinates."""
    if isinstance(sample, NoisySample):
        Zu = sample.unit()
        if g is None:
            g = sample.unit_noise()
    else:
        Zu = sample
    grid = grid if grid is not None else spatial_grid(K.d)
    sel = KMeansBandwidthSelection(Zu, K, g, net, k, grid, seed, beta)
    return sel.select(b1_prime, positive_part)


def erc_baseline(sample, K, g, isotropic_net, k, const=1.0, grid=None, seed=0, beta=None):
    """Codebook at the isotropic bandwidth chosen by the ERC comparison."""
    members = list(isotropic_net)
    if any(len(set(h)) != 1 for h in members):
        raise ValueError("ERC baseline needs an isotropic net")
    if isinstance(sample, NoisySample):
        Zu = sample.unit()
        if g is None:
            g = sample.unit_noise()
    else:
        Zu = sample
    grid = grid if grid is not None else spatial_grid(K.d)
    net = isotropic_net if isinstance(isotropic_net, BandwidthNet) else BandwidthNet.from_members(members)
    sel = KMeansBandwidthSelection(Zu, K, g, net, k, grid, seed, beta)
    h, fit, _ = sel.erc_select(const)
    return Codebook(fit.centroids, dict(fit.info, bandwidth=h))


# --------------------------------------------------------------------------
# scoring
# --------------------------------------------------------------------------

def clustering_error(c, sample, use_latent=True):
    """Misclassification rate of nearest-centroid labels, minimised over
    matchings of labels to centroids.

    Points are the clean latent points when available (and ``use_latent``),
    otherwise the observations; ``c`` must be in the same coordinates.
    """
    if sample.labels is None:
        raise ValueError("sample has no labels")
    c = np.atleast_2d(np.asarray(getattr(c, "centroids", c), float))
    k = c.shape[0]
    if k > MAX_EXACT_MATCHING_K:
        raise KTooLargeForExactMatching(f"k={k} exceeds {MAX_EXACT_MATCHING_K}")
    pts = sample.latent if (use_latent and sample.latent is not None) else sample.Z
    classes, y = np.unique(sample.labels, return_inverse=True)
    if len(classes) > k:
        raise ValueError("more distinct labels than centroids")
    pred, _ = voronoi_labels(pts, c)
    confusion = np.zeros((len(classes), k))
    np.add.at(confusion, (y, pred), 1.0)
    best = max(confusion[np.arange(len(classes)), list(perm)].sum()
               for perm in itertools.permutations(range(k), len(classes)))
    return float(1.0 - best / len(y))


# --------------------------------------------------------------------------
# estimator
# --------------------------------------------------------------------------

class NoisyKMeans(ClusterMixin, BaseEstimator):
    """k-means for observations corrupted by known additive noise.

    The data are mapped into ``[0, 1]^d`` by a similarity transform, a family
    of deconvolution density estimates is built over an anisotropic bandwidth
    net, and the bandwidth is picked by the gradient comparison rule.

    Parameters
    ----------
    n_clusters : int
    noise : {"none", "laplace", "gaussian"}
    noise_scale : float or array of shape (d,)
        Per-axis noise scale in data units.
    noise_beta : float or array, optional
        Polynomial decay exponents used by the majorant.  Defaults to the
        noise model's value (1 for Gaussian noise).
    b1_prime : float
        Majorant constant.
    h_bounds : (float, float), optional
        Bandwidth window in grid units; defaults to the clamped theoretical window.
    net_ratio, net_cap : geometric ratio and maximum size of the bandwidth net.
    grid_size : nodes per axis of the estimation grid.
    margin : relative padding around the data inside the unit box.
    """

    def __init__(self, n_clusters=2, kernel="sinc", noise="gaussian", noise_scale=1.0,
                 noise_beta=None, b1_prime=1.0, h_bounds=None, net_ratio=0.7, net_cap=None,
                 grid_size=128, margin=0.25, s_plus=1.0, random_state=None):
        self.n_clusters = n_clusters
        self.kernel = kernel
        self.noise = noise
        self.noise_scale = noise_scale
        self.noise_beta = noise_beta
        self.b1_prime = b1_prime
        self.h_bounds = h_bounds
        self.net_ratio = net_ratio
        self.net_cap = net_cap
        self.grid_size = grid_size
        self.margin = margin
        self.s_plus = s_plus
        self.random_state = random_state

    def _net(self, n, d, beta):
        if self.h_bounds is None:
            h_minus, h_plus, _ = clustering_bounds(n, beta, self.s_plus)
        else:
            h_minus, h_plus = self.h_bounds
        cap = self.net_cap if self.net_cap is not None else n
        return build_net(h_minus, h_plus, self.net_ratio, d, cap)

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        n, d = X.shape
        noise = make_noise(self.noise, self.noise_scale, d, self.noise_beta)
        affine = AffineMap.to_unit_box(X, self.margin)
        sample = NoisySample(X, noise=noise, affine=affine)
        g = sample.unit_noise()
        K = make_kernel(self.kernel, d)
        net = self._net(n, d, g.na_beta)
        seed = self.random_state if self.random_state is not None else 0
        self.selection_ = KMeansBandwidthSelection(sample.unit(), K, g, net, self.n_clusters,
                                                   spatial_grid(d, self.grid_size), seed)
        report, fit = self.selection_.select(self.b1_prime)
        self.selection_report_ = report
        self.bandwidth_ = np.asarray(report.selected)
        self.affine_ = affine
        self.cluster_centers_ = affine.inverse(fit.centroids)
        self.labels_ = self.predict(X)
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X)
        return voronoi_labels(X, self.cluster_centers_)[0]
