"""Input validation helpers and the package exception hierarchy."""

import math
import numbers

import numpy as np


class GeoclusterError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(GeoclusterError, ValueError):
    """An argument violates a documented invariant."""


class ComputationError(GeoclusterError, RuntimeError):
    """A numerical procedure failed on otherwise valid input."""


class InfeasibleError(GeoclusterError):
    """No design or sample satisfies the requested constraints."""


class InhibitionInfeasibleError(InfeasibleError):
    """No inhibited subset with the requested spacing could be found."""


FAMILIES = ("gaussian", "exponential", "kbessel")
SAMPLINGS = ("simple", "spatial")
SHAPES = ("disc", "rect")


def check_choice(value, choices, name):
    """Normalise a case-insensitive string option and check membership."""
    if not isinstance(value, str):
        raise ValidationError(f"{name} must be one of {choices}, got {value!r}")
    key = value.strip().lower().replace("-", "").replace("_", "")
    for c in choices:
        if key == c.replace("-", "").replace("_", ""):
            return c
    raise ValidationError(f"{name} must be one of {choices}, got {value!r}")


def check_family(family):
    return check_choice(family, FAMILIES, "family")


def check_sampling(sampling):
    return check_choice(sampling, SAMPLINGS, "sampling")


def check_positive(x, name):
    if isinstance(x, bool) or not isinstance(x, numbers.Real) or not math.isfinite(x) or x <= 0:
        raise ValidationError(f"{name} must be a finite number > 0, got {x!r}")
    return float(x)


def check_nonnegative(x, name):
    if isinstance(x, bool) or not isinstance(x, numbers.Real) or not math.isfinite(x) or x < 0:
        raise ValidationError(f"{name} must be a finite number >= 0, got {x!r}")
    return float(x)


def check_unit_interval(x, name, *, open_low=False):
    """Check ``0 <= x <= 1`` (or ``0 < x <= 1``)."""
    if isinstance(x, bool) or not isinstance(x, numbers.Real) or not math.isfinite(x):
        raise ValidationError(f"{name} must be a finite number, got {x!r}")
    if x > 1 or x < 0 or (open_low and x == 0):
        bound = "0 < " if open_low else "0 <= "
        raise ValidationError(f"{name} must satisfy {bound}{name} <= 1, got {x!r}")
    return float(x)


def check_count(x, name, *, minimum=1):
    if isinstance(x, bool) or not isinstance(x, numbers.Integral):
        if isinstance(x, numbers.Real) and float(x).is_integer():
            x = int(x)
        else:
            raise ValidationError(f"{name} must be an integer, got {x!r}")
    if x < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {x!r}")
    return int(x)


def check_distances(d, name="d"):
    """Return ``d`` as a float array, rejecting negative or non-finite entries."""
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    if np.any(arr < 0):
        raise ValidationError(f"{name} must be >= 0")
    return arr


def as_generator(seed):
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
