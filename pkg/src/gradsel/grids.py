"""Bandwidth nets, the theoretical bandwidth windows, and uniform spatial grids."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyNet, InvalidBounds

#: Fallback window used when the asymptotic bandwidth formulas are unusable.
DEFAULT_H_PLUS = 0.5
DEFAULT_H_MINUS_FLOOR = 0.02


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid of cell midpoints on ``[lo, hi]^d``.

    ``m`` nodes per axis, node ``i`` sits at ``lo + (i + 1/2) * spacing``.
    """

    d: int
    m: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("grid needs d >= 1 and m >= 1")
        if not self.hi > self.lo:
            raise ValueError("grid needs hi > lo")

    @property
    def spacing(self):
        return (self.hi - self.lo) / self.m

    @property
    def cell_volume(self):
        return self.spacing ** self.d

    @property
    def shape(self):
        return (self.m,) * self.d

    @property
    def size(self):
        return self.m ** self.d

    @property
    def nyquist(self):
        """Largest angular frequency resolved by the node spacing."""
        return math.pi / self.spacing

    def axis(self):
        return self.lo + (np.arange(self.m) + 0.5) * self.spacing

    def axes(self):
        return [self.axis()] * self.d

    def points(self):
        """All nodes as an (m**d, d) array in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def riemann_sum(self, values):
        values = np.asarray(values)
        if values.size != self.size:
            raise ValueError(f"expected {self.size} values, got {values.size}")
        return float(values.sum() * self.cell_volume)


@dataclass(frozen=True)
class GridFunction:
    """Values of a function at the nodes of a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise ValueError(
                f"grid has {self.grid.size} nodes but {values.size} values were given"
            )
        object.__setattr__(self, "values", values.reshape(self.grid.shape))

    def riemann_sum(self):
        return self.grid.riemann_sum(self.values)

    def flat(self):
        return self.values.ravel()

    def to_rows(self):
        """(node coordinates..., value) rows, ready for CSV export."""
        pts = self.grid.points()
        return [tuple(p) + (v,) for p, v in zip(pts.tolist(), self.flat().tolist())]


def spatial_grid(d, m_per_axis=256):
    """Midpoint grid on ``[0, 1]^d`` with ``m_per_axis`` nodes per axis."""
    return GridSpec(int(d), int(m_per_axis))


def offset_grid(d, m, spacing):
    """Grid of ``m`` offsets per axis spaced by ``spacing`` with a node at 0."""
    lo = -(m // 2 + 0.5) * spacing
    return GridSpec(int(d), int(m), lo, lo + m * spacing)


@dataclass(frozen=True)
class BandwidthNet:
    """Finite exponential net of anisotropic bandwidths.

    Members are ordered coarsest first (largest volume, then lexicographically
    largest); the isotropic corner ``(h_minus, ..., h_minus)`` is always last.
    """

    members: tuple
    ratio: float
    h_minus: float
    h_plus: float
    cap: int
    truncated: bool = False
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        members = tuple(tuple(float(v) for v in h) for h in self.members)
        if not members:
            raise EmptyNet("bandwidth net is empty")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_index", {h: i for i, h in enumerate(members)})

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def d(self):
        return len(self.members[0])

    def array(self):
        return np.array(self.members)

    def index(self, h):
        return self._index[tuple(float(v) for v in h)]

    def isotropic(self):
        """Sub-net of members with equal components, coarsest first."""
        iso = [h for h in self.members if len(set(h)) == 1]
        return BandwidthNet(tuple(iso), self.ratio, self.h_minus, self.h_plus, self.cap)

    @classmethod
    def from_members(cls, members):
        """Net made of arbitrary bandwidths, kept in the given order."""
        arr = np.array(members, dtype=float)
        return cls(tuple(map(tuple, arr)), float("nan"), float(arr.min()), float(arr.max()), len(arr))


def _coarse_first_key(h):
    return (-math.prod(h), tuple(-v for v in h))


def ladder(h_minus, h_plus, a):
    """Geometric ladder ``h_plus * a**m`` for ``m = 0, 1, ...`` down to ``h_minus``."""
    values = []
    m = 0
    while True:
        v = h_plus * a ** m
        if v < h_minus:
            break
        values.append(v)
        m += 1
    return values


def build_net(h_minus, h_plus, a=0.7, d=1, cap=None):
    """Exponential bandwidth net on ``[h_minus, h_plus]^d``.

    The full tensor product of the per-axis ladders is formed, the finest
    members are dropped until at most ``cap`` bandwidths remain, and the
    isotropic corner is appended.
    """
    if not (0 < h_minus < h_plus < 1):
        raise InvalidBounds(f"need 0 < h_minus < h_plus < 1, got ({h_minus}, {h_plus})")
    if not 0 < a < 1:
        raise ValueError(f"ratio a must lie in (0, 1), got {a}")
    d = int(d)
    if d < 1:
        raise ValueError("d must be >= 1")
    steps = ladder(h_minus, h_plus, a)
    if not steps:
        raise EmptyNet("no ladder member inside the window")
    if cap is None:
        cap = len(steps) ** d + 1
    cap = int(cap)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    corner = (float(h_minus),) * d
    tensor = sorted(
        {tuple(p) for p in itertools.product(steps, repeat=d)} - {corner},
        key=_coarse_first_key,
    )
    kept = tensor[: cap - 1]
    return BandwidthNet(
        tuple(kept) + (corner,), float(a), float(h_minus), float(h_plus), cap,
        truncated=len(kept) < len(tensor),
    )


def net_membership_ok(net):
    """True when every member obeys the generator form of its net."""
    corner = (net.h_minus,) * net.d
    for h in net:
        if h == corner:
            continue
        for v in h:
            if v < net.h_minus:
                return False
            m = round(math.log(v / net.h_plus) / math.log(net.ratio))
            if m < 0 or net.h_plus * net.ratio ** m != v:
                return False
    return corner in net.members


def _clamp(raw_minus, raw_plus, n, d):
    if 0 < raw_minus < raw_plus < 1:
        return raw_minus, raw_plus, False
    h_plus = DEFAULT_H_PLUS
    h_minus = min(max(n ** (-1.0 / d), DEFAULT_H_MINUS_FLOOR), h_plus / 2)
    return h_minus, h_plus, True


def clustering_bounds_raw(n, beta, s_plus):
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    logn = math.log(n)
    h_minus = (logn ** 6 / n) ** (1.0 / max(2.0, 2.0 * float(beta.sum())))
    h_plus = (1.0 / logn) ** (1.0 / (2.0 * s_plus))
    return h_minus, h_plus


def clustering_bounds(n, beta, s_plus):
    """Bandwidth window for noisy k-means, clamped to a usable default.

    Returns ``(h_minus, h_plus, clamped)``.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if np.any(beta < 0) or s_plus <= 0:
        raise ValueError("need beta >= 0 and s_plus > 0")
    raw_minus, raw_plus = clustering_bounds_raw(n, beta, s_plus)
    return _clamp(raw_minus, raw_plus, n, beta.size)


def regression_bounds_raw(n, d):
    logn = math.log(n)
    return logn ** (6.0 / d) / n ** (1.0 / d), 1.0 / logn ** 2


def regression_bounds(n, d):
    """Bandwidth window for local Huber regression; see :func:`clustering_bounds`."""
    if n < 3:
        raise ValueError("n must be >= 3")
    raw_minus, raw_plus = regression_bounds_raw(n, d)
    return _clamp(raw_minus, raw_plus, n, int(d))
