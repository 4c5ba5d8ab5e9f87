import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from gradsel.exceptions import EmptyWindow, InvalidQ
from gradsel.grids import BandwidthNet, build_net
from gradsel.kernels import make_kernel
from gradsel.robust_regression import (HuberLocalRegressor, RegressionNoise, RegressionSample,
                                       check_local_margin, default_gamma, g_emp_loc, gamma_lq,
                                       global_tables, huber, huber_prime, huber_second,
                                       interior_grid, kernel_weights, local_estimate,
                                       local_estimates, majorant_loc, pointwise_tables,
                                       select_global, select_pointwise)

from oracles import clipped_score_bound

EPA = make_kernel("epanechnikov", 1)


def sine_sample(n, seed, noise=RegressionNoise("t3", 0.5), d=1):
    rng = np.random.default_rng(seed)
    W = rng.random((n, d))
    f = lambda x: np.sin(2 * np.pi * x[:, 0])  # noqa: E731
    return RegressionSample(W, f(W) + noise.sample(rng, n), f, noise)


# -- Huber loss ----------------------------------------------------------------

def test_huber_values():
    assert huber(0.5, 1) == 0.125
    assert huber(2, 1) == 1.5
    assert huber_prime(-3, 1) == -1
    assert huber_second(0.3, 1) == 1 and huber_second(-4, 1) == 0


@given(z=st.floats(-50, 50), gamma=st.floats(0.01, 20))
def test_huber_quadratic_branch_and_derivatives(z, gamma):
    if abs(z) <= gamma:
        assert huber(z, gamma) == z * z / 2
    assert huber_prime(z, gamma) == min(max(z, -gamma), gamma)
    eps = 1e-6
    if abs(abs(z) - gamma) > 1e-3:
        fd = (huber(z + eps, gamma) - huber(z - eps, gamma)) / (2 * eps)
        assert fd == pytest.approx(huber_prime(z, gamma), abs=1e-5 * max(1, gamma))


@settings(max_examples=50)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), lam=st.floats(0, 1), gamma=st.floats(0.1, 3))
def test_huber_is_convex(a, b, lam, gamma):
    mid = huber(lam * a + (1 - lam) * b, gamma)
    assert mid <= lam * huber(a, gamma) + (1 - lam) * huber(b, gamma) + 1e-12


# -- local scores ----------------------------------------------------------------

def test_score_vanishes_on_constant_data():
    s = RegressionSample(np.random.default_rng(0).random((30, 1)), np.full(30, 0.4))
    assert g_emp_loc(0.4, np.array([0.5]), (0.3,), s, EPA, 1.0) == 0.0


def test_score_single_term():
    s = RegressionSample(np.array([[0.5]]), np.array([0.8]))
    w = float(kernel_weights(s, np.array([0.45]), EPA, (0.2,))[0])
    assert w == pytest.approx(0.75 * (1 - 0.25 ** 2) / 0.2)
    assert g_emp_loc(0.5, np.array([0.45]), (0.2,), s, EPA, 1.0) == pytest.approx(-0.3 * w)


@pytest.mark.parametrize("aux", [None, (0.1,)])
def test_score_nondecreasing_in_t(aux):
    s = sine_sample(200, 1)
    t = np.linspace(-3, 3, 401)
    G = g_emp_loc(t, np.array([0.3]), (0.15,), s, EPA, 0.7, aux_eta=aux)
    assert np.all(np.diff(G) >= -1e-15)


def test_convolved_weights_are_symmetric():
    s = sine_sample(50, 2, d=2)
    K = make_kernel("epanechnikov", 2)
    a = kernel_weights(s, np.array([0.4, 0.6]), K, (0.1, 0.3), (0.2, 0.15))
    b = kernel_weights(s, np.array([0.4, 0.6]), K, (0.2, 0.15), (0.1, 0.3))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


# -- local estimate -----------------------------------------------------------------

@pytest.mark.parametrize("kid", ["epanechnikov", "gaussian"])
def test_large_gamma_gives_nadaraya_watson(kid):
    K = make_kernel(kid, 2)
    s = sine_sample(300, 3, d=2)
    x0 = np.array([0.4, 0.55])
    B = 3.0
    gamma = np.abs(s.Y).max() + 2 * B
    w = kernel_weights(s, x0, K, (0.2, 0.25))
    nw = float(w @ s.Y / w.sum())
    assert local_estimate(x0, (0.2, 0.25), s, K, gamma, B) == pytest.approx(nw, abs=1e-9)


def test_constant_data_recovered():
    s = RegressionSample(np.random.default_rng(4).random((40, 1)), np.full(40, -1.25))
    assert local_estimate(np.array([0.5]), (0.2,), s, EPA, 0.3, 2.0) == pytest.approx(-1.25, abs=1e-10)


def test_single_outlier_influence_is_bounded():
    rng = np.random.default_rng(5)
    W = rng.random((100, 1))
    Y = 0.2 * rng.standard_normal(100)
    x0, h, gamma, B = np.array([0.5]), (0.3,), 0.3, 1e4
    clean = local_estimate(x0, h, RegressionSample(W, Y), EPA, gamma, B)
    i = int(np.argmin(np.abs(W[:, 0] - 0.5)))
    Yo = Y.copy()
    Yo[i] = 1e3
    dirty = local_estimate(x0, h, RegressionSample(W, Yo), EPA, gamma, B)
    w = kernel_weights(RegressionSample(W, Y), x0, EPA, h)
    assert abs(dirty - clean) <= clipped_score_bound(w, Y, i, clean, dirty, gamma) + 1e-9
    # the outlier moves the estimate by a few gamma-sized pushes at most
    assert abs(dirty - clean) < 3 * gamma * w[i] / w.sum()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 1000), c=st.floats(-1, 1))
def test_shift_equivariance_quadratic_branch(seed, c):
    s = sine_sample(60, seed, RegressionNoise("gaussian", 0.1))
    x0, h, B = np.array([0.5]), (0.3,), 5.0
    gamma = 20.0
    base = local_estimate(x0, h, s, EPA, gamma, B)
    moved = local_estimate(x0, h, RegressionSample(s.W, s.Y + c), EPA, gamma, B)
    assert moved == pytest.approx(base + c, abs=1e-9)


def test_estimate_is_root_or_boundary():
    s = sine_sample(200, 6)
    x0 = np.array([0.25])
    th = local_estimate(x0, (0.1,), s, EPA, 0.5, 3.0)
    assert abs(g_emp_loc(th, x0, (0.1,), s, EPA, 0.5)) < 1e-8
    tight = local_estimate(x0, (0.1,), s, EPA, 0.5, 0.2)
    assert tight == 0.2


def test_empty_window():
    s = RegressionSample(np.array([[0.1], [0.2]]), np.array([1.0, 2.0]))
    with pytest.raises(EmptyWindow):
        local_estimate(np.array([0.9]), (0.1,), s, EPA, 1.0, 3.0)


def test_signed_kernel_rejected():
    s = sine_sample(20, 0)
    with pytest.raises(ValueError):
        select_pointwise(np.array([0.5]), s, build_net(0.1, 0.3), "sinc", 1.0, 2.0)


# -- majorants -----------------------------------------------------------------------

def test_majorant_loc_hand_value():
    assert majorant_loc((1.0,), (1.0,), math.e, 1, 1.0, 1.0) == pytest.approx(2 / math.sqrt(math.e))
    assert majorant_loc((1.0,), (1.0,), math.e, 1, 1.0, 1.0) == pytest.approx(1.213, abs=1e-3)


@settings(max_examples=40)
@given(h=st.floats(0.01, 0.5), eta=st.floats(0.01, 1), grow=st.floats(1.0, 3.0))
def test_majorant_loc_saturation_and_monotonicity(h, eta, grow):
    small = min(h, eta)
    assert majorant_loc((small,), (eta,), 500, 1, EPA, 0.4) == majorant_loc((eta,), (eta,), 500, 1, EPA, 0.4)
    assert majorant_loc((h,), (min(eta * grow, 1),), 500, 1, EPA, 0.4) <= \
        majorant_loc((h,), (eta,), 500, 1, EPA, 0.4) * (1 + 1e-12)


def test_gamma_lq_hand_value():
    value = gamma_lq((0.5, 0.5), 2, 1, 100, 1.0, 1.0)
    assert value == pytest.approx(60 / math.log(2) / 5 * math.sqrt(2), rel=1e-12)
    assert value == pytest.approx(24.49, abs=0.01)


def test_gamma_lq_q_one_has_no_decay():
    K = make_kernel("epanechnikov", 1)
    for n in (10, 1000):
        assert gamma_lq((0.2,), 1, 1, n, K, 0.7) == pytest.approx(4 * 0.7 * math.sqrt(2) * 1.0)


def test_gamma_lq_n_scaling_and_errors():
    a = gamma_lq((0.1,), 2, 1, 400, EPA, 1.0)
    assert gamma_lq((0.1,), 2, 1, 800, EPA, 1.0) == pytest.approx(a / math.sqrt(2))
    with pytest.raises(InvalidQ):
        gamma_lq((0.1,), 0.5, 1, 100, EPA, 1.0)


# -- selection rules ------------------------------------------------------------------

def test_single_bandwidth_nets():
    s = sine_sample(200, 7)
    one = BandwidthNet.from_members([(0.15,)])
    assert select_pointwise(np.array([0.4]), s, one, EPA, 0.7, 3.0).h == (0.15,)
    assert select_global(s, one, EPA, 0.7, 3.0, q=2).h == (0.15,)


def brute_pointwise(x0, s, members, gamma, B, C0, vhat):
    t = np.linspace(-B, B, 201)
    G = lambda h, eta=None: g_emp_loc(t, x0, h, s, EPA, gamma, aux_eta=eta)  # noqa: E731
    values = []
    for h in members:
        first = max(np.max(np.abs(G(h, eta) - G(eta)))
                    - majorant_loc(h, eta, s.n, 1, EPA, vhat, C0) for eta in members)
        values.append(first + max(majorant_loc(lam, h, s.n, 1, EPA, vhat, C0) for lam in members))
    return np.array(values)


@pytest.mark.parametrize("C0", [0.01, 0.1, 1.0])
def test_pointwise_rule_matches_brute_force(C0):
    s = sine_sample(300, 8)
    members = [(0.3,), (0.2,), (0.12,), (0.07,)]
    x0 = np.array([0.35])
    fit = select_pointwise(x0, s, members, EPA, 0.6, 3.0, C0=C0, vhat=0.2)
    oracle = brute_pointwise(x0, s, members, 0.6, 3.0, C0, 0.2)
    assert np.allclose(fit.report.bv_hat, oracle, rtol=1e-12, atol=1e-14)
    assert fit.h == members[int(np.argmin(oracle))]
    assert fit.estimate == local_estimate(x0, fit.h, s, EPA, 0.6, 3.0)


def brute_global(s, members, gamma, B, q, grid, Cq):
    t = np.linspace(-B, B, 201)
    X = grid.points()

    def G(h, eta=None):
        return np.stack([g_emp_loc(t, x, h, s, EPA, gamma, aux_eta=eta) for x in X], axis=1)

    def lq(v):
        return np.max((np.abs(v) ** q).sum(axis=1) * grid.cell_volume) ** (1 / q)

    Gam = lambda h: gamma_lq(h, q, 1, s.n, EPA, gamma, Cq)  # noqa: E731
    values = []
    for h in members:
        first = max(lq(G(h, eta) - G(eta)) - Gam(tuple(np.maximum(h, eta))) - Gam(eta)
                    for eta in members)
        values.append(first + 2 * Gam(h))
    return np.array(values)


@pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
def test_global_rule_matches_brute_force(q):
    s = sine_sample(250, 9)
    members = [(0.25,), (0.15,), (0.08,)]
    grid = interior_grid(1, 20, 0.25)
    Cq = 0.005 if q >= 2 else 0.05
    fit = select_global(s, members, EPA, 0.6, 3.0, q=q, x_grid=grid, Cq=Cq)
    oracle = brute_global(s, members, 0.6, 3.0, q, grid, Cq)
    assert np.allclose(fit.report.bv_hat, oracle, rtol=1e-10, atol=1e-13)
    assert fit.h == members[int(np.argmin(oracle))]


def test_global_grid_must_avoid_boundary():
    s = sine_sample(100, 0)
    with pytest.raises(ValueError):
        select_global(s, [(0.3,), (0.1,)], EPA, 0.6, 3.0, x_grid=interior_grid(1, 10, 0.1))


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_selection_invariant_under_loss_scaling(c):
    s = sine_sample(300, 10)
    net = build_net(0.03, 0.25, 0.7)
    x0 = np.array([0.6])
    base = select_pointwise(x0, s, net, EPA, 0.6, 3.0, C0=0.1, vhat=0.3)
    scaled = select_pointwise(x0, s, net, EPA, 0.6, 3.0, C0=0.1, vhat=0.3, loss_scale=c)
    assert scaled.h == base.h
    assert np.allclose(scaled.report.bv_hat, c * base.report.bv_hat, rtol=1e-10)
    g1 = select_global(s, net, EPA, 0.6, 3.0, Cq=0.005)
    g2 = select_global(s, net, EPA, 0.6, 3.0, Cq=0.005, loss_scale=c)
    assert g1.h == g2.h


def test_tables_are_nonnegative_and_zero_on_diagonal_for_epanechnikov_self():
    s = sine_sample(150, 11)
    net = build_net(0.05, 0.25, 0.7)
    T = pointwise_tables(np.array([0.5]), s, net, EPA, 0.6, 3.0)
    assert np.all(T >= 0)
    Tg = global_tables(s, net, EPA, 0.6, 3.0, 2.0, interior_grid(1, 16, 0.25))
    assert Tg.shape == (len(net), len(net)) and np.all(Tg >= 0)


def test_pointwise_error_close_to_oracle_in_net():
    net = build_net(0.02, 0.25, 0.7)
    x0 = np.array([0.3])
    truth = math.sin(2 * math.pi * 0.3)
    sel, per_h = [], []
    for rep in range(50):
        s = sine_sample(1000, 1000 + rep)
        gamma = default_gamma(s)
        sel.append(abs(select_pointwise(x0, s, net, EPA, gamma, 3.0, C0=0.1).estimate - truth))
        per_h.append([abs(local_estimate(x0, h, s, EPA, gamma, 3.0) - truth) for h in net])
    # the oracle-in-net is the single member with the smallest median error
    assert np.median(sel) <= 2 * np.median(per_h, axis=0).min()


def test_global_risk_close_to_oracle_in_net():
    net = build_net(0.02, 0.25, 0.7)
    grid = interior_grid(1, 50, 0.25)
    X = grid.points()
    truth = np.sin(2 * np.pi * X[:, 0])
    sel, per_h = [], []
    for rep in range(20):
        s = sine_sample(1000, 2000 + rep)
        gamma = default_gamma(s)
        fit = select_global(s, net, EPA, gamma, 3.0, q=2, x_grid=grid, Cq=0.005)
        l2 = lambda v: math.sqrt(np.sum((v - truth) ** 2) * grid.cell_volume)  # noqa: E731
        sel.append(l2(fit.function.flat()))
        per_h.append([l2(local_estimates(X, h, s, EPA, gamma, 3.0)) for h in net])
    assert np.mean(sel) <= 1.5 * np.mean(per_h, axis=0).min()


# -- local margin ----------------------------------------------------------------------

def test_gaussian_curvature():
    assert RegressionNoise("gaussian", 0.4).curvature(1.2) == pytest.approx(
        stats.norm.cdf(3) - stats.norm.cdf(-3), abs=1e-12)
    assert RegressionNoise("gaussian", 0.4).curvature(1.2) == pytest.approx(0.9973, abs=1e-4)


def test_margin_exact_estimate_gives_zero_sides():
    W = np.random.default_rng(0).random((30, 1))
    s = RegressionSample(W, np.full(30, 0.25), lambda x: np.full(len(x), 0.25),
                         RegressionNoise("gaussian", 0.2))
    rep = check_local_margin(np.array([0.5]), s, [(0.2,), (0.1,)], EPA, 1.0, 2.0)
    assert np.allclose(rep.lhs, 0, atol=1e-10) and np.allclose(rep.rhs, 0, atol=1e-8)
    assert rep.passed


def test_margin_inequality_on_replicates():
    from gradsel.diagnostics import margin_reports
    reports = margin_reports()
    assert len(reports) == 20
    assert any(r.precondition for r in reports)
    for r in reports:
        if r.precondition:
            assert np.all(r.lhs <= r.rhs + 1e-12)


def test_mean_score_against_monte_carlo():
    noise = RegressionNoise("t3", 0.5)
    xi = noise.sample(np.random.default_rng(0), 400_000)
    assert noise.mean_score(0.3, 0.8) == pytest.approx(np.mean(np.clip(xi + 0.3, -0.8, 0.8)), abs=3e-3)


# -- estimator ---------------------------------------------------------------------------

@pytest.mark.parametrize("rule", ["pointwise", "global"])
def test_regressor_fit_predict(rule):
    s = sine_sample(400, 12, RegressionNoise("gaussian", 0.2))
    model = HuberLocalRegressor(rule=rule, h_bounds=(0.03, 0.25), C0=0.1, Cq=0.005)
    model.fit(s.W, s.Y)
    X = np.array([[0.3], [0.5], [0.7]])
    pred = model.predict(X)
    assert pred.shape == (3,)
    assert np.max(np.abs(pred - np.sin(2 * np.pi * X[:, 0]))) < 0.3


def test_regressor_rejects_bad_rule():
    with pytest.raises(ValueError):
        HuberLocalRegressor(rule="both").fit(np.random.default_rng(0).random((20, 1)), np.zeros(20))


def test_sample_validation():
    with pytest.raises(ValueError):
        RegressionSample(np.array([[1.5]]), np.array([0.0]))
    with pytest.raises(ValueError):
        RegressionSample(np.array([[0.5]]), np.array([np.inf]))
    with pytest.raises(ValueError):
        RegressionNoise("laplace")
