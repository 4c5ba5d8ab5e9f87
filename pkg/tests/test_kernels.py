import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from gradsel.exceptions import DivergentNorm, GridTooCoarse, NonBandLimited
from gradsel.grids import offset_grid, spatial_grid
from gradsel.kernels import (DeconvolutionKernel, KernelSpec, NoiseModel, convolved_kernel,
                             deconv_kernel_on_grid, dilate, kernel_norm, make_kernel, make_noise,
                             no_noise)

KIDS = ["sinc", "epanechnikov", "gaussian"]


# -- kernel specs -----------------------------------------------------------

@pytest.mark.parametrize("kid", ["epanechnikov", "gaussian"])
def test_kernel_integrates_to_one(kid):
    K = make_kernel(kid, 1)
    mass, _ = integrate.quad(lambda x: K(np.array([x])), -12, 12, points=[-1, 1], epsabs=1e-12)
    assert abs(mass - 1.0) < 1e-8


def test_sinc_mass_via_fourier_value_at_zero():
    # the improper integral of sin(x)/(pi x) is the transform at 0
    assert make_kernel("sinc", 2).fourier(np.zeros(2)) == 1.0
    total, _ = integrate.quad(lambda x: math.sin(x) / (math.pi * x) if x else 1 / math.pi,
                              0, 200 * math.pi, limit=2000)
    assert abs(2 * total - 1) < 5e-3


@pytest.mark.parametrize("kid", KIDS)
def test_kernels_are_symmetric(kid):
    K = make_kernel(kid, 2)
    x = np.random.default_rng(0).normal(size=(50, 2)) * 3
    assert np.array_equal(K(x), K(-x))


def test_sinc_band_indicator():
    K = make_kernel("sinc-product", 2)
    t = np.array([[0.3, -1.0], [1.0, 1.0], [1.0001, 0.0], [0.0, -3.0]])
    assert K.fourier(t).tolist() == [1.0, 1.0, 0.0, 0.0]
    assert K.band_limited and not K.nonnegative
    assert not make_kernel("gaussian", 1).band_limited


def test_unknown_kernel_rejected():
    with pytest.raises(ValueError):
        KernelSpec("triangle", 1)


# -- dilation ---------------------------------------------------------------

def test_dilate_epanechnikov_peak():
    assert dilate(make_kernel("epanechnikov", 1), (1.0,), np.array([0.0])) == 0.75


@pytest.mark.parametrize("kid", KIDS)
def test_dilate_half_bandwidth_doubles_peak(kid):
    K = make_kernel(kid, 1)
    assert dilate(K, (0.5,), np.array([0.0])) == pytest.approx(2 * K(np.array([0.0])), rel=1e-15)


def test_dilate_sinc_hand_value():
    got = dilate(make_kernel("sinc", 1), (0.25,), np.array([0.25]))
    assert got == pytest.approx(math.sin(1.0) / (math.pi * 1.0) / 0.25, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.2, 5.0), h=st.floats(0.05, 1.0), x=st.floats(-2, 2),
       kid=st.sampled_from(KIDS))
def test_dilation_covariance(c, h, x, kid):
    K = make_kernel(kid, 1)
    lhs = dilate(K, (min(c * h, 1.0),), np.array([c * x * min(c * h, 1.0) / (c * h)]))
    rhs = dilate(K, (h,), np.array([x])) * h / min(c * h, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-10)


# -- convolved kernels ------------------------------------------------------

def test_convolved_fourier_at_zero_and_band():
    K = make_kernel("sinc", 1)
    ck = convolved_kernel(K, (0.5,), (0.25,))
    assert ck.fourier(np.zeros((1, 1)))[0] == 1.0
    t = np.linspace(-5, 5, 1001)[:, None]
    expected = (np.abs(t[:, 0]) <= 2.0).astype(float)
    assert np.array_equal(ck.fourier(t), expected)


@pytest.mark.parametrize("kid", KIDS)
def test_convolution_symmetry(kid):
    K = make_kernel(kid, 2)
    x = np.random.default_rng(1).uniform(-0.6, 0.6, (200, 2))
    a = convolved_kernel(K, (0.1, 0.3), (0.2, 0.05))(x)
    b = convolved_kernel(K, (0.2, 0.05), (0.1, 0.3))(x)
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.abs(a).max())


@pytest.mark.parametrize("kid", ["epanechnikov", "gaussian"])
def test_convolved_kernel_matches_numerical_convolution(kid):
    K = make_kernel(kid, 1)
    h, eta = 0.3, 0.2
    ck = convolved_kernel(K, (h,), (eta,))
    for x in (0.0, 0.17, -0.35):
        direct, _ = integrate.quad(
            lambda y: dilate(K, (h,), np.array([x - y])) * dilate(K, (eta,), np.array([y])),
            -3, 3, points=[-eta, eta, x - h, x + h], epsabs=1e-13)
        assert ck(np.array([x])) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("kid", KIDS)
def test_convolved_kernel_mass(kid):
    grid = offset_grid(1, 40001, 0.002)
    vals = convolved_kernel(make_kernel(kid, 1), (0.1,), (0.05,))(grid.points())
    assert abs(grid.riemann_sum(vals) - 1.0) < 1e-3


# -- noise models -----------------------------------------------------------

@pytest.mark.parametrize("nid", ["none", "laplace", "gaussian"])
def test_noise_transform_is_one_at_zero(nid):
    g = make_noise(nid, (0.3, 0.7), 2)
    assert g.fourier(np.zeros(2)) == 1.0


def test_laplace_noise_transform_and_decay_exponent():
    g = NoiseModel("laplace-product", (0.2, 0.5))
    t = np.array([3.0, -2.0])
    assert g.fourier(t) == pytest.approx(1 / (1 + 0.04 * 9) / (1 + 0.25 * 4), rel=1e-15)
    assert g.na_beta == (2.0, 2.0)


def test_none_noise_is_identity():
    g = no_noise(3)
    assert g.na_beta == (0.0, 0.0, 0.0)
    assert np.all(g.fourier(np.random.default_rng(0).normal(size=(5, 3))) == 1.0)


def test_laplace_sampling_matches_transform():
    g = make_noise("laplace", (0.4,), 1)
    eps = g.sample(np.random.default_rng(3), 200_000)[:, 0]
    t = 1.7
    assert np.mean(np.cos(t * eps)) == pytest.approx(g.fourier_axis(0, t), abs=5e-3)


# -- deconvolution kernels --------------------------------------------------

def test_deconv_fourier_identity():
    K = make_kernel("sinc", 2)
    g = make_noise("laplace", (0.1, 0.3), 2)
    h = (0.2, 0.15)
    dk = DeconvolutionKernel(K, h, g)
    t = np.random.default_rng(0).uniform(-8, 8, (4000, 2))
    gap = np.abs(dk.fourier(t) * g.fourier(t) - K.fourier(t * np.array(h)))
    assert gap.max() <= 1e-10


def test_deconv_without_noise_equals_dilated_kernel():
    K = make_kernel("sinc", 2)
    grid = spatial_grid(2, 64)
    vals = deconv_kernel_on_grid(K, (0.1, 0.2), no_noise(2), grid)
    assert np.max(np.abs(vals.flat() - dilate(K, (0.1, 0.2), grid.points()))) <= 1e-8


def test_deconv_value_at_zero_matches_direct_quadrature():
    K = make_kernel("sinc", 1)
    g = make_noise("laplace", (0.2,), 1)
    h = 0.2
    # (1/2 pi) int_{-1/h}^{1/h} (1 + sigma^2 t^2) dt
    direct, _ = integrate.quad(lambda t: (1 + 0.04 * t * t) / (2 * math.pi), -1 / h, 1 / h)
    got = DeconvolutionKernel(K, (h,), g)(np.zeros((1, 1)))[0]
    assert got == pytest.approx(direct, abs=1e-6)
    assert direct == pytest.approx((2 / h + 2 * 0.04 / (3 * h ** 3)) / (2 * math.pi), rel=1e-12)


def test_deconv_kernel_mass():
    K = make_kernel("sinc", 1)
    g = make_noise("laplace", (0.05,), 1)
    grid = offset_grid(1, 8001, 0.025)
    assert abs(deconv_kernel_on_grid(K, (0.1,), g, grid).riemann_sum() - 1.0) < 1e-3


def test_deconv_errors():
    with pytest.raises(NonBandLimited):
        deconv_kernel_on_grid(make_kernel("gaussian", 1), (0.1,), make_noise("laplace", (0.1,), 1),
                              spatial_grid(1, 64))
    with pytest.raises(GridTooCoarse):
        deconv_kernel_on_grid(make_kernel("sinc", 1), (0.001,), make_noise("laplace", (0.1,), 1),
                              spatial_grid(1, 64))


# -- norms ------------------------------------------------------------------

def test_epanechnikov_norms():
    K = make_kernel("epanechnikov", 1)
    assert kernel_norm(K, math.inf) == 0.75
    assert kernel_norm(K, 2) == pytest.approx(math.sqrt(0.6), rel=1e-12)
    oracle, _ = integrate.quad(lambda x: (0.75 * (1 - x * x)) ** 3, -1, 1)
    assert kernel_norm(K, 3) == pytest.approx(oracle ** (1 / 3), rel=1e-10)


@pytest.mark.parametrize("kid,q", [("epanechnikov", 1.5), ("gaussian", 2), ("sinc", 2), ("sinc", 3)])
def test_product_norm_factorises(kid, q):
    assert kernel_norm(make_kernel(kid, 3), q) == pytest.approx(
        kernel_norm(make_kernel(kid, 1), q) ** 3, rel=1e-12)


def test_sinc_norms_against_quadrature():
    K = make_kernel("sinc", 1)
    assert kernel_norm(K, 2) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-12)
    # q = 3 by brute quadrature over many periods plus an integral tail bound
    f = lambda x: abs(math.sin(x) / (math.pi * x)) ** 3 if x else math.pi ** -3  # noqa: E731
    head = sum(integrate.quad(f, k * math.pi, (k + 1) * math.pi)[0] for k in range(4000))
    assert kernel_norm(K, 3) == pytest.approx((2 * head) ** (1 / 3), rel=1e-6)


def test_sinc_l1_norm_diverges():
    with pytest.raises(DivergentNorm):
        kernel_norm(make_kernel("sinc", 1), 1)
