"""Product kernels, noise characteristic functions and deconvolution kernels.

Fourier convention: ``F[f](t) = int f(x) exp(i t.x) dx`` so that the sinc
kernel ``sin(x) / (pi x)`` has transform ``1{|t| <= 1}``.

All kernels and noise densities are products of one-dimensional factors, and
every evaluator below works axis by axis.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ._validation import check_bandwidth
from .exceptions import DivergentNorm, GridTooCoarse, NonBandLimited
from .grids import GridFunction

KERNEL_IDS = ("sinc", "epanechnikov", "gaussian")
NOISE_IDS = ("none", "laplace", "gaussian")

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Gauss-Legendre nodes on [-1, 1]: 3 points integrate the degree-4
# Epanechnikov convolution integrand exactly, 16 points per panel for the
# oscillatory inverse Fourier integrals.
_GL3 = np.polynomial.legendre.leggauss(3)
_GL16 = np.polynomial.legendre.leggauss(16)


def _canonical_kernel_id(kid):
    kid = kid.lower().replace("-product", "")
    if kid not in KERNEL_IDS:
        raise ValueError(f"unknown kernel {kid!r}; choose from {KERNEL_IDS}")
    return kid


def _canonical_noise_id(nid):
    nid = nid.lower().replace("-product", "")
    if nid not in NOISE_IDS:
        raise ValueError(f"unknown noise {nid!r}; choose from {NOISE_IDS}")
    return nid


# --------------------------------------------------------------------------
# one-dimensional profiles
# --------------------------------------------------------------------------

def _profile(kid, x):
    a = np.abs(np.asarray(x, dtype=float))
    if kid == "sinc":
        return np.sinc(a / math.pi) / math.pi
    if kid == "epanechnikov":
        return np.where(a <= 1.0, 0.75 * (1.0 - a * a), 0.0)
    return np.exp(-0.5 * a * a) / _SQRT_2PI


def _profile_fourier(kid, t):
    a = np.abs(np.asarray(t, dtype=float))
    if kid == "sinc":
        return (a <= 1.0).astype(float)
    if kid == "epanechnikov":
        small = a < 1e-3
        safe = np.where(small, 1.0, a)
        exact = 3.0 * (np.sin(safe) - safe * np.cos(safe)) / safe ** 3
        series = 1.0 - a ** 2 / 10.0 + a ** 4 / 280.0
        return np.where(small, series, exact)
    return np.exp(-0.5 * a * a)


def _epanechnikov_conv(a, b, x):
    """(K_a * K_b)(x) for the 1-d Epanechnikov kernel, exact."""
    x = np.asarray(x, dtype=float)
    lo = np.maximum(-b, x - a)
    hi = np.minimum(b, x + a)
    half = np.clip(hi - lo, 0.0, None) / 2.0
    mid = (hi + lo) / 2.0
    nodes, weights = _GL3
    y = mid[..., None] + half[..., None] * nodes
    vals = _profile("epanechnikov", (x[..., None] - y) / a) / a * _profile("epanechnikov", y / b) / b
    return half * (vals @ weights)


def _convolved_profile(kid, a, b, x):
    """1-d ``K_a * K_b`` with ``a <= b``."""
    if kid == "sinc":
        # indicator transforms multiply to the narrower band
        return _profile("sinc", np.asarray(x) / b) / b
    if kid == "gaussian":
        s = math.hypot(a, b)
        return _profile("gaussian", np.asarray(x) / s) / s
    return _epanechnikov_conv(a, b, x)


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    """Symmetric product kernel ``K(x) = prod_j k(x_j)`` on R^d.

    ``order`` is informational; every kernel here is symmetric, hence of
    order at least 1.
    """

    id: str = "sinc"
    d: int = 1
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "id", _canonical_kernel_id(self.id))
        if self.d < 1 or self.order < 1:
            raise ValueError("kernel needs d >= 1 and order >= 1")

    @property
    def fourier_support(self):
        """Half-widths ``S`` with ``supp F[K] in [-S, S]``, or None."""
        return (1.0,) * self.d if self.id == "sinc" else None

    @property
    def band_limited(self):
        return self.fourier_support is not None

    @property
    def nonnegative(self):
        return self.id != "sinc"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod(_profile(self.id, x), axis=-1)

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        return np.prod(_profile_fourier(self.id, t), axis=-1)

    def profile(self, x):
        return _profile(self.id, x)

    def profile_fourier(self, t):
        return _profile_fourier(self.id, t)


def make_kernel(kernel, d):
    if isinstance(kernel, KernelSpec):
        if kernel.d != d:
            raise ValueError(f"kernel has d={kernel.d}, expected {d}")
        return kernel
    return KernelSpec(kernel, int(d))


def dilate(K, h, x):
    """``K_h(x) = K(x_1/h_1, ..., x_d/h_d) / prod(h)``."""
    h = check_bandwidth(h, K.d)
    x = np.asarray(x, dtype=float)
    return K(x / h) / np.prod(h)


def dilated_axis(K, h_j, x):
    """One-dimensional factor ``k(x / h_j) / h_j``."""
    return _profile(K.id, np.asarray(x, dtype=float) / h_j) / h_j


class ConvolvedKernel:
    """Evaluator for ``K_h * K_eta``.

    ``F[K_h * K_eta](t) = F[K](h t) F[K](eta t)``; the spatial values use the
    per-axis closed forms (sinc, Gaussian) or exact Gauss-Legendre quadrature
    of the piecewise polynomial convolution integral (Epanechnikov).  The pair
    is sorted per axis so the evaluator is exactly symmetric in ``(h, eta)``.
    """

    def __init__(self, K, h, eta):
        self.K = K
        h = check_bandwidth(h, K.d, "h")
        eta = check_bandwidth(eta, K.d, "eta")
        self.h = h
        self.eta = eta
        self._lo = np.minimum(h, eta)
        self._hi = np.maximum(h, eta)

    def axis(self, j, x):
        return _convolved_profile(self.K.id, self._lo[j], self._hi[j], x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for j in range(self.K.d):
            out = out * self.axis(j, x[..., j])
        return out

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        return self.K.fourier(t * self.h) * self.K.fourier(t * self.eta)


def convolved_kernel(K, h, eta):
    return ConvolvedKernel(K, h, eta)


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Product measurement-noise density given by its characteristic function.

    ``na_beta`` and ``na_rho`` are the polynomial-decay constants used by the
    majorants.  Laplace noise satisfies the decay bound with ``beta = 2``; the
    Gaussian entry carries a user-chosen effective exponent.
    """

    id: str = "none"
    scale: tuple = (0.0,)
    na_beta: tuple = None
    na_rho: float = None

    def __post_init__(self):
        nid = _canonical_noise_id(self.id)
        object.__setattr__(self, "id", nid)
        scale = tuple(float(s) for s in np.atleast_1d(self.scale))
        if nid == "none":
            scale = tuple(0.0 for _ in scale)
        elif any(s <= 0 for s in scale):
            raise ValueError("noise scale must be positive")
        object.__setattr__(self, "scale", scale)
        beta = self.na_beta
        if beta is None:
            beta = {"none": 0.0, "laplace": 2.0, "gaussian": 1.0}[nid]
        beta = tuple(float(b) for b in np.broadcast_to(np.asarray(beta, float), (len(scale),)))
        if any(b < 0 for b in beta):
            raise ValueError("na_beta must be nonnegative")
        object.__setattr__(self, "na_beta", beta)
        rho = self.na_rho
        if rho is None:
            if nid == "laplace":
                rho = math.prod(min(0.5, 0.5 / s ** 2) for s in scale)
            else:
                rho = 1.0
        if rho <= 0:
            raise ValueError("na_rho must be positive")
        object.__setattr__(self, "na_rho", float(rho))

    @property
    def d(self):
        return len(self.scale)

    def fourier_axis(self, j, t):
        t = np.asarray(t, dtype=float)
        s = self.scale[j]
        if self.id == "none":
            return np.ones_like(t)
        if self.id == "laplace":
            return 1.0 / (1.0 + (s * t) ** 2)
        return np.exp(-0.5 * (s * t) ** 2)

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones(t.shape[:-1])
        for j in range(self.d):
            out = out * self.fourier_axis(j, t[..., j])
        return out

    def sample(self, rng, n):
        s = np.asarray(self.scale)
        if self.id == "none":
            return np.zeros((n, self.d))
        if self.id == "laplace":
            return rng.laplace(0.0, 1.0, size=(n, self.d)) * s
        return rng.standard_normal((n, self.d)) * s


def make_noise(noise, scale=None, d=None, beta=None):
    if isinstance(noise, NoiseModel):
        return noise
    if scale is None:
        scale = np.zeros(d or 1)
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    if d is not None and scale.size == 1 and d > 1:
        scale = np.full(d, scale[0])
    return NoiseModel(noise, tuple(scale), beta)


def no_noise(d):
    return NoiseModel("none", (0.0,) * d)


# --------------------------------------------------------------------------
# deconvolution kernels
# --------------------------------------------------------------------------

class _BandQuadrature:
    """``(1/pi) int_0^T cos(t x) phi(t) dt`` for even, band-limited ``phi``.

    Composite 16-point Gauss-Legendre with panels no wider than half an
    oscillation of ``cos(t x)`` for ``|x| <= xmax``.  Values at differences
    ``u_i - v_a`` come out of two matrix products through
    ``cos(t(u - v)) = cos(tu)cos(tv) + sin(tu)sin(tv)``.
    """

    def __init__(self, T, phi, xmax):
        panels = max(2, int(math.ceil(T * max(xmax, 1e-12) / math.pi)) + 1)
        edges = np.linspace(0.0, T, panels + 1)
        nodes, weights = _GL16
        half = np.diff(edges)[:, None] / 2.0
        t = (edges[:-1, None] + half * (nodes + 1.0)).ravel()
        w = (half * weights).ravel()
        self.t = t
        self.w = w * phi(t) / math.pi

    def matrix(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        tu = np.multiply.outer(u, self.t)
        tv = np.multiply.outer(v, self.t)
        return (np.cos(tu) * self.w) @ np.cos(tv).T + (np.sin(tu) * self.w) @ np.sin(tv).T

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.cos(np.multiply.outer(x, self.t)) @ self.w


class DeconvolutionKernel:
    """Deconvolution kernel with ``F[K~] = F[K](h t) F[K](eta t) / F[g](t)``.

    ``eta=None`` gives the plain ``K~_h``.  With band-limited kernels the
    inverse transform is an integral over the finite band ``[-S/h, S/h]``,
    evaluated by exact-for-smooth Gauss-Legendre quadrature.  Without noise
    the closed-form ``K_h`` (or ``K_h * K_eta``) is returned instead.
    """

    def __init__(self, K, h, g, eta=None):
        self.K = K
        self.g = g if g is not None else no_noise(K.d)
        if self.g.d != K.d:
            raise ValueError("noise and kernel dimensions differ")
        self.h = check_bandwidth(h, K.d, "h")
        self.eta = None if eta is None else check_bandwidth(eta, K.d, "eta")
        self.noisy = self.g.id != "none"
        if self.noisy and not K.band_limited:
            raise NonBandLimited(
                f"kernel {K.id!r} has unbounded Fourier support; deconvolution needs a band-limited kernel"
            )
        if K.id == "sinc" and self.eta is not None:
            # product of indicator transforms is the indicator of the narrower band
            self.h = np.maximum(self.h, self.eta)
            self.eta = None
        self._conv = None if self.eta is None else ConvolvedKernel(K, self.h, self.eta)

    @property
    def cutoff(self):
        """Per-axis half-width of the frequency band."""
        if not self.K.band_limited:
            return np.full(self.K.d, np.inf)
        S = np.asarray(self.K.fourier_support)
        return S / self.h

    def phi_axis(self, j):
        kid, hj = self.K.id, self.h[j]
        etaj = None if self.eta is None else self.eta[j]

        def phi(t):
            val = _profile_fourier(kid, hj * t)
            if etaj is not None:
                val = val * _profile_fourier(kid, etaj * t)
            return val / self.g.fourier_axis(j, t)

        return phi

    def fourier(self, t):
        t = np.asarray(t, dtype=float)
        out = self.K.fourier(t * self.h)
        if self.eta is not None:
            out = out * self.K.fourier(t * self.eta)
        return out / self.g.fourier(t)

    def axis_matrix(self, j, u, v):
        """Matrix of the j-th 1-d factor at differences ``u_i - v_a``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.noisy:
            diff = np.subtract.outer(u, v)
            if self._conv is not None:
                return self._conv.axis(j, diff)
            return dilated_axis(self.K, self.h[j], diff)
        xmax = (np.abs(u).max(initial=0.0) + np.abs(v).max(initial=0.0))
        quad = _BandQuadrature(self.cutoff[j], self.phi_axis(j), xmax)
        return quad.matrix(u, v)

    def axis_values(self, j, x):
        x = np.asarray(x, dtype=float)
        if not self.noisy:
            if self._conv is not None:
                return self._conv.axis(j, x)
            return dilated_axis(self.K, self.h[j], x)
        quad = _BandQuadrature(self.cutoff[j], self.phi_axis(j), np.abs(x).max(initial=0.0))
        return quad(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for j in range(self.K.d):
            out = out * self.axis_values(j, x[..., j])
        return out


def deconv_fourier(K, h, g, t, eta=None):
    """``F[K~_h](t)``: ``F[K](h t) / F[g](t)`` with the band truncation."""
    return DeconvolutionKernel(K, h, g, eta).fourier(t)


def deconv_kernel_on_grid(K, h, g, grid, eta=None):
    """Sample the deconvolution kernel ``K~_h`` (or ``K~_{h,eta}``) on a grid.

    Raises :class:`NonBandLimited` for an unbounded-band kernel with noise and
    :class:`GridTooCoarse` when the grid cannot resolve the kernel's band.
    """
    dk = DeconvolutionKernel(K, h, g, eta)
    if dk.noisy and np.any(dk.cutoff > grid.nyquist):
        raise GridTooCoarse(
            f"grid Nyquist frequency {grid.nyquist:.4g} < band edge {dk.cutoff.max():.4g}"
        )
    axis = grid.axis()
    factors = [dk.axis_values(j, axis) for j in range(K.d)]
    values = factors[0]
    for f in factors[1:]:
        values = np.multiply.outer(values, f)
    return GridFunction(grid, values)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def _sinc_norm_power(q):
    """``int |sin(x)/(pi x)|^q dx`` over R for q > 1."""
    if q == 2:
        return 1.0 / math.pi
    K = 50
    f = lambda s, k: abs(math.sin(s)) ** q / (k * math.pi + s) ** q if k else (
        (math.sin(s) / s) ** q if s > 0 else 1.0)
    head = sum(integrate.quad(f, 0.0, math.pi, args=(k,), epsabs=1e-14, epsrel=1e-13)[0]
               for k in range(K))
    # tail: Taylor-expand (k pi + s)^-q about the period midpoint, sum with Hurwitz zeta
    tail = 0.0
    coef = 1.0
    for j in range(0, 7, 2):
        if j:
            coef *= (q + j - 2) * (q + j - 1) / ((j - 1) * j)
        mom = integrate.quad(lambda s: math.sin(s) ** q * (s - math.pi / 2) ** j, 0.0, math.pi,
                             epsabs=1e-15, epsrel=1e-13)[0]
        tail += coef * mom * math.pi ** (-q - j) * special.zeta(q + j, K + 0.5)
    return 2.0 * math.pi ** (-q) * (head + tail)


def _norm_1d(kid, q):
    if q == math.inf:
        return {"sinc": 1.0 / math.pi, "epanechnikov": 0.75, "gaussian": 1.0 / _SQRT_2PI}[kid]
    if kid == "epanechnikov":
        # int (3/4)^q (1-x^2)^q dx = (3/4)^q B(1/2, q+1)
        return (0.75 ** q * special.beta(0.5, q + 1.0)) ** (1.0 / q)
    if kid == "gaussian":
        return (2.0 * math.pi) ** -0.5 * (2.0 * math.pi / q) ** (0.5 / q)
    if q <= 1:
        raise DivergentNorm(f"the sinc kernel has infinite L_{q:g} norm")
    return _sinc_norm_power(q) ** (1.0 / q)


def kernel_norm(K, q):
    """``||K||_q`` for ``q >= 1`` or ``q = inf``; products factor over axes."""
    q = float(q)
    if q < 1:
        raise ValueError("q must be >= 1")
    return _norm_1d(K.id, q) ** K.d
