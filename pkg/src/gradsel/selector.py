"""Bandwidth selection by comparison of gradient empirical risks.

For a finite net ``H`` of bandwidths the criterion is::

    BV(h) = max_eta { |D_{h,eta} - D_eta|_{2,inf} - M(h, eta) } + max_lambda M(lambda, h)

where ``D_h(theta)`` is the gradient of the kernel empirical risk at bandwidth
``h``, ``D_{h,eta}`` the same gradient built with ``K_h * K_eta`` and
``|T|_{2,inf} = sup_theta |T(theta)|_2``.  The selected bandwidth minimises
``BV``.  Suprema over ``theta`` run over a finite :class:`CandidateSet`.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SingularHessian


def euclidean(v):
    return float(np.linalg.norm(np.ravel(v)))


class GradientField:
    """Pair of gradient evaluators ``grad(h, theta)`` and ``grad_aux(h, eta, theta)``.

    ``norm`` maps a gradient value to a nonnegative number; the Euclidean norm
    by default.  The global regression rule swaps in an L_q norm over space.
    """

    def __init__(self, grad, grad_aux, dim=None, norm=euclidean):
        self.grad = grad
        self.grad_aux = grad_aux
        self.dim = dim
        self.norm = norm


class MajorantFn:
    """Majorant ``M(h, eta) >= 0`` with confidence level ``level``."""

    def __init__(self, func, level=1):
        if int(level) < 1:
            raise ValueError("level must be a positive integer")
        self.func = func
        self.level = int(level)

    def __call__(self, h, eta):
        value = float(self.func(np.asarray(h, float), np.asarray(eta, float)))
        if value < 0 or math.isnan(value):
            raise ValueError(f"majorant returned {value}")
        return value

    def scaled(self, c):
        return MajorantFn(lambda h, eta: c * self.func(h, eta), self.level)


class CandidateSet:
    """Finite list of parameter points approximating a supremum over theta."""

    def __init__(self, points, box=None):
        points = list(points)
        if not points:
            raise ValueError("candidate set is empty")
        if box is not None:
            lo, hi = box
            for p in points:
                p = np.asarray(p, float)
                if np.any(p < lo) or np.any(p > hi):
                    raise ValueError("candidate outside the parameter box")
        self.points = points

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @classmethod
    def with_random(cls, anchors, box, n_random=64, seed=0, shape=None):
        """``anchors`` plus ``n_random`` uniform draws from ``box``."""
        rng = np.random.default_rng(seed)
        lo, hi = (np.asarray(b, float) for b in box)
        if shape is None:
            shape = np.shape(anchors[0]) if anchors else lo.shape
        draws = [lo + (hi - lo) * rng.random(shape) for _ in range(n_random)]
        return cls(list(anchors) + draws, box=box)


def _as_candidates(C):
    return C if isinstance(C, CandidateSet) else CandidateSet(C)


def sup_diff(field, h, eta, C):
    """``max_{theta in C} norm(grad_aux(h, eta, theta) - grad(eta, theta))``."""
    C = _as_candidates(C)
    return max(
        field.norm(np.asarray(field.grad_aux(h, eta, th)) - np.asarray(field.grad(eta, th)))
        for th in C
    )


def comparison_table(field, net, C):
    """Matrix ``T[i, j] = sup_diff(field, net[i], net[j], C)``."""
    C = _as_candidates(C)
    members = list(net)
    plain = [[np.asarray(field.grad(eta, th)) for th in C] for eta in members]
    table = np.empty((len(members), len(members)))
    for i, h in enumerate(members):
        for j, eta in enumerate(members):
            table[i, j] = max(
                field.norm(np.asarray(field.grad_aux(h, eta, th)) - plain[j][c])
                for c, th in enumerate(C)
            )
    return table


def majorant_table(M, net):
    members = list(net)
    return np.array([[M(h, eta) for eta in members] for h in members])


def bv_hat_values(table, majorants, positive_part=False, sup_majorant=None):
    """``BV`` for every net member from precomputed comparison and majorant tables.

    ``sup_majorant`` overrides ``max_lambda M(lambda, h)`` when a rule has a
    closed-form variance term.
    """
    inner = np.max(table - majorants, axis=1)
    if positive_part:
        inner = np.maximum(inner, 0.0)
    if sup_majorant is None:
        sup_majorant = majorants.max(axis=0)
    return inner + np.asarray(sup_majorant, float)


def bv_hat(h, field, M, net, C, positive_part=False):
    """``BV(h)`` with suprema over the net (for eta, lambda) and over ``C``."""
    C = _as_candidates(C)
    members = list(net)
    inner = max(sup_diff(field, h, eta, C) - M(h, eta) for eta in members)
    if positive_part:
        inner = max(inner, 0.0)
    return inner + max(M(lam, h) for lam in members)


def tie_break_argmin(values, members):
    """Index of the minimum; exact ties go to the largest volume, then the
    lexicographically largest bandwidth."""
    values = np.asarray(values, float)
    best = values.min()
    tied = [i for i in range(len(values)) if values[i] == best]
    if len(tied) == 1:
        return tied[0], ""
    winner = max(tied, key=lambda i: (math.prod(members[i]), tuple(members[i])))
    return winner, f"{len(tied)}-way tie broken towards the coarsest bandwidth"


@dataclass
class SelectionReport:
    """Outcome of a bandwidth selection.

    ``comparisons[i, j]`` holds ``|D_{h_i,h_j} - D_{h_j}|_{2,inf}`` and
    ``majorants[i, j]`` holds ``M(h_i, h_j)``.
    """

    selected: tuple
    selected_index: int
    bandwidths: tuple
    bv_hat: np.ndarray
    comparisons: np.ndarray
    majorants: np.ndarray
    sup_majorant: np.ndarray
    n_candidates: int
    tie_note: str = ""
    notes: dict = field(default_factory=dict)

    def bv_hat_map(self):
        return {h: float(v) for h, v in zip(self.bandwidths, self.bv_hat)}

    def comparison_map(self):
        return {
            (h, eta): float(self.comparisons[i, j])
            for i, h in enumerate(self.bandwidths)
            for j, eta in enumerate(self.bandwidths)
        }

    def to_rows(self):
        """One row per (h, eta) comparison, then one row per h with its BV value."""
        fmt = lambda h: " ".join(repr(float(v)) for v in h)
        rows = []
        for i, h in enumerate(self.bandwidths):
            for j, eta in enumerate(self.bandwidths):
                rows.append({
                    "kind": "comparison", "h": fmt(h), "eta": fmt(eta),
                    "value": float(self.comparisons[i, j]),
                    "majorant": float(self.majorants[i, j]), "selected": "",
                })
        for i, h in enumerate(self.bandwidths):
            rows.append({
                "kind": "bv_hat", "h": fmt(h), "eta": "", "value": float(self.bv_hat[i]),
                "majorant": float(self.sup_majorant[i]),
                "selected": int(i == self.selected_index),
            })
        return rows

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["kind", "h", "eta", "value", "majorant", "selected"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def select_from_tables(net, table, majorants, n_candidates, positive_part=False,
                       sup_majorant=None, notes=None):
    """Selection rule on precomputed tables; see :func:`select`."""
    members = tuple(tuple(float(v) for v in h) for h in net)
    if not members:
        raise ValueError("bandwidth net is empty")
    if sup_majorant is None:
        sup_majorant = majorants.max(axis=0)
    bv = bv_hat_values(table, majorants, positive_part, sup_majorant)
    idx, note = tie_break_argmin(bv, members)
    return SelectionReport(
        selected=members[idx], selected_index=idx, bandwidths=members, bv_hat=bv,
        comparisons=np.asarray(table), majorants=np.asarray(majorants),
        sup_majorant=np.asarray(sup_majorant, float), n_candidates=int(n_candidates),
        tie_note=note, notes=dict(notes or {}),
    )


def select(field, M, net, C, positive_part=False, table=None, sup_majorant=None):
    """Return the :class:`SelectionReport` for ``argmin_h BV(h)`` over ``net``."""
    C = _as_candidates(C)
    if table is None:
        table = comparison_table(field, net, C)
    majorants = majorant_table(M, net)
    return select_from_tables(net, table, majorants, len(C), positive_part, sup_majorant)


# --------------------------------------------------------------------------
# gradient / excess-risk link diagnostics
# --------------------------------------------------------------------------

def g_excess(G, theta, theta_star):
    """``|G(theta) - G(theta_star)|_2``."""
    return euclidean(np.asarray(G(theta), float) - np.asarray(G(theta_star), float))


def fd_jacobian(G, theta, step):
    """Central finite-difference Jacobian of ``G`` at ``theta``."""
    theta = np.asarray(theta, float).ravel()
    m = theta.size
    cols = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = step
        cols.append((np.ravel(G(theta + e)) - np.ravel(G(theta - e))) / (2 * step))
    return np.column_stack(cols)


def fd_hessian(R, theta, step):
    """Central finite-difference Hessian of a scalar function."""
    theta = np.asarray(theta, float).ravel()
    m = theta.size
    H = np.empty((m, m))
    r0 = R(theta)
    for a in range(m):
        ea = np.zeros(m)
        ea[a] = step
        H[a, a] = (R(theta + ea) - 2 * r0 + R(theta - ea)) / step ** 2
        for b in range(a + 1, m):
            eb = np.zeros(m)
            eb[b] = step
            H[a, b] = H[b, a] = (
                R(theta + ea + eb) - R(theta + ea - eb) - R(theta - ea + eb) + R(theta - ea - eb)
            ) / (4 * step ** 2)
    return H


@dataclass
class GradientLinkReport:
    max_ratio: float
    bound: float
    passed: bool
    lambda_min: float
    kappa1: float
    n_used: int


def check_gradient_link(R, G, theta_star, radius, n_samples=200, seed=0, step=None):
    """Check ``sqrt(R(theta) - R*) <= 2 sqrt(m kappa1) / lambda_min * |G(theta) - G*|``
    on ``n_samples`` uniform draws from the ball of given radius.

    ``kappa1`` is the largest absolute second partial derivative over the
    draws and ``lambda_min`` the smallest Hessian eigenvalue at ``theta_star``,
    both from finite differences of ``G`` (or of ``R`` when ``G`` is None).
    """
    theta_star = np.asarray(theta_star, float).ravel()
    m = theta_star.size
    if step is None:
        step = 1e-4 * max(1.0, float(np.abs(theta_star).max()))
    shape = np.shape(theta_star)

    def hessian(th):
        if G is None:
            return fd_hessian(R, th, step)
        J = fd_jacobian(lambda x: G(np.reshape(x, shape)), th, step)
        return (J + J.T) / 2

    H_star = hessian(theta_star)
    lam_min = float(np.linalg.eigvalsh(H_star).min())
    if lam_min <= 1e-10:
        raise SingularHessian(f"smallest Hessian eigenvalue {lam_min:.3g} at theta_star")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_samples, m))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(n_samples) ** (1.0 / m)
    points = theta_star + directions * radii[:, None]

    kappa1 = float(np.abs(H_star).max())
    r_star = R(theta_star)
    g_star = None if G is None else np.ravel(G(theta_star))
    ratios = []
    for th in points:
        kappa1 = max(kappa1, float(np.abs(hessian(th)).max()))
        if G is None:
            denom = euclidean(fd_jacobian(lambda x: np.atleast_1d(R(x)), th, step).ravel()
                              - fd_jacobian(lambda x: np.atleast_1d(R(x)), theta_star, step).ravel())
        else:
            denom = euclidean(np.ravel(G(th)) - g_star)
        if denom < 1e-12:
            continue
        ratios.append(math.sqrt(max(R(th) - r_star, 0.0)) / denom)
    bound = 2.0 * math.sqrt(m * kappa1) / lam_min
    max_ratio = max(ratios) if ratios else 0.0
    return GradientLinkReport(max_ratio, bound, max_ratio <= bound, lam_min, kappa1, len(ratios))
