"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


def check_bandwidth(h, d=None, name="h"):
    """Return ``h`` as a float vector with every component in (0, 1].

    A scalar is broadcast to ``d`` components when ``d`` is given.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {h.shape}")
    if d is not None and h.size == 1 and d > 1:
        h = np.full(d, h[0])
    if d is not None and h.size != d:
        raise ValueError(f"{name} has {h.size} components, expected {d}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0) or np.any(h > 1):
        raise ValueError(f"{name} components must lie in (0, 1], got {h}")
    return h


def check_points(x, d=None, name="x"):
    """Return ``x`` as an (n, d) float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if (d is None or d == 1) else x[None, :]
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {x.shape}")
    if d is not None and x.shape[1] != d:
        raise ValueError(f"{name} has {x.shape[1]} columns, expected {d}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_unit_box(x, name="x"):
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError(f"{name} must lie inside [0, 1]^d")
    return x


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number")
    if value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be positive, got {value}")
    return float(value)


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.SeedSequence([int(s) for s in seed])
    return np.random.SeedSequence(None if seed is None else int(seed))
