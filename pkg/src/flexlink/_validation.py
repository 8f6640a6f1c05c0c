"""Input validation shared by the public API."""

import numbers

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a function (e.g. x not in [0, l])."""


class ConfigurationError(ValueError):
    """A parameter set violates an invariant that is checked once, up front."""


class DivergenceError(FloatingPointError):
    """Integration produced a non-finite state."""

    def __init__(self, t, state):
        super().__init__(f"non-finite state at t={t:.6g} s: {np.array2string(np.asarray(state), precision=4)}")
        self.t = t
        self.state = np.asarray(state)


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigurationError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigurationError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_vector(x, size, name):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_spd(mat, name, size=None):
    """Return ``mat`` as a float array if it is symmetric positive definite.

    Scalars and 1-D arrays are promoted to (diagonal) matrices.
    """
    a = np.asarray(mat, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(size or 1)
    elif a.ndim == 1:
        a = np.diag(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"{name} must be a square matrix, got shape {a.shape}")
    if size is not None and a.shape[0] != size:
        raise ConfigurationError(f"{name} must be {size}x{size}, got {a.shape[0]}x{a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{name} has non-finite entries")
    if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
        raise ConfigurationError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise ConfigurationError(f"{name} is not positive definite") from None
    return a
