"""Turning elicited, real-world quantities into ``rho`` and ``r``.

Also provides the effective sample size averaged over elicited densities for
``r`` and ``rho``.
"""

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from ._validation import ValidationError, check_choice, check_positive, check_unit_interval
from .approx import ratio_q, s_tilde
from .ess import ess_approx

__all__ = [
    "DichotomousSpec",
    "ElicitedDensity",
    "rho_dichotomous",
    "rho_from_sd_ratio",
    "sd_from_interval",
    "averaged_ess",
]


@dataclass(frozen=True)
class DichotomousSpec:
    """Marginal probability of a positive outcome and the conditional
    probability given a positive neighbour at (effectively) zero distance."""

    p_marginal: float
    p_cond: float

    def __post_init__(self):
        if not 0 < self.p_marginal < 1:
            raise ValidationError(f"p_marginal must satisfy 0 < p < 1, got {self.p_marginal!r}")
        check_unit_interval(self.p_cond, "p_cond")


def rho_dichotomous(spec, allow_above_one=False):
    """``rho = (P(Y=1 | neighbour=1) - P(Y=1)) / (P(Y=1)(1 - P(Y=1)))``.

    Negative values are rejected. Values above one cannot serve as a
    correlation scale and are rejected unless ``allow_above_one`` is set.
    """
    p, pc = spec.p_marginal, spec.p_cond
    # dividing by (1 - p) first makes both endpoints exact in floating point
    rho = ((pc - p) / (1.0 - p)) / p
    if rho < 0:
        raise ValidationError(
            f"p_cond={pc} < p_marginal={p} gives rho={rho:.6g} < 0 (negative association at the nugget)"
        )
    if rho > 1 and not allow_above_one:
        raise ValidationError(f"rho={rho:.6g} > 1 violates 0 <= rho <= 1; pass allow_above_one to override")
    return rho


def rho_from_sd_ratio(ratio):
    """``rho`` from the neighbour-to-population standard deviation ratio ``sqrt(1 - rho)``."""
    ratio = check_unit_interval(ratio, "ratio")
    return 1.0 - ratio * ratio


def sd_from_interval(lo, hi, b):
    """Normal standard deviation implied by a central interval of probability ``b``."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValidationError(f"need a non-degenerate interval lo < hi, got [{lo}, {hi}]")
    if not 0 < b < 1:
        raise ValidationError(f"b must satisfy 0 < b < 1, got {b!r}")
    z = NormalDist().inv_cdf(0.5 * (1.0 + b))
    return (hi - lo) / (2.0 * z)


_KINDS = ("pointmass", "uniform", "triangular")


@dataclass(frozen=True)
class ElicitedDensity:
    """A point mass, uniform or triangular density.

    ``params`` is ``(value,)``, ``(lo, hi)`` or ``(lo, mode, hi)``.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        kind = check_choice(self.kind, _KINDS, "kind")
        object.__setattr__(self, "kind", kind)
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", params)
        expected = {"pointmass": 1, "uniform": 2, "triangular": 3}[kind]
        if len(params) != expected:
            raise ValidationError(f"{kind} density needs {expected} parameter(s), got {len(params)}")
        if not all(math.isfinite(v) for v in params):
            raise ValidationError("density parameters must be finite")
        if kind == "uniform" and not params[0] < params[1]:
            raise ValidationError("uniform density needs lo < hi")
        if kind == "triangular" and not (params[0] <= params[1] <= params[2] and params[0] < params[2]):
            raise ValidationError("triangular density needs lo <= mode <= hi with lo < hi")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg["kind"], tuple(cfg["params"]))

    @property
    def support(self):
        return (self.params[0], self.params[-1])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            lo, hi = self.params
            return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
        if self.kind == "triangular":
            lo, mode, hi = self.params
            up = np.where(mode > lo, 2 * (x - lo) / ((hi - lo) * max(mode - lo, 1e-300)), 0.0)
            down = np.where(hi > mode, 2 * (hi - x) / ((hi - lo) * max(hi - mode, 1e-300)), 0.0)
            out = np.where(x < mode, up, down)
            return np.where((x >= lo) & (x <= hi), out, 0.0)
        raise ValidationError("a point mass has no density")

    def nodes(self, order=64):
        """Quadrature nodes and weights (weights sum to one).

        Gauss-Legendre on each smooth piece of the density.
        """
        if self.kind == "pointmass":
            return np.array(self.params), np.ones(1)
        if self.kind == "uniform":
            pieces = [self.params]
        else:
            lo, mode, hi = self.params
            pieces = [(a, b) for a, b in ((lo, mode), (mode, hi)) if b > a]
        t, w = np.polynomial.legendre.leggauss(order)
        xs, ws = [], []
        for a, b in pieces:
            x = 0.5 * (b - a) * t + 0.5 * (a + b)
            xs.append(x)
            ws.append(0.5 * (b - a) * w * self.pdf(x))
        return np.concatenate(xs), np.concatenate(ws)

    def sample(self, size, rng):
        if self.kind == "pointmass":
            return np.full(size, self.params[0])
        if self.kind == "uniform":
            return rng.uniform(*self.params, size=size)
        lo, mode, hi = self.params
        return rng.triangular(lo, mode, hi, size=size)


def averaged_ess(R, J, n, h_r, h_rho, spec, order=64):
    """Approximate effective size averaged over densities for ``r`` and ``rho``.

    Evaluates the double integral of ``N~*(r, rho)`` against ``h_r(r) h_rho(rho)``
    on a tensor Gauss-Legendre grid with ``order`` nodes per smooth piece.
    Results agree with a doubled grid to better than 1e-4 relative for the
    shipped presets.
    """
    R = check_positive(R, "R")
    lo_r, _ = h_r.support
    lo_rho, hi_rho = h_rho.support
    if lo_r <= 0:
        raise ValidationError("the density for r must have support in r > 0")
    if lo_rho < 0 or hi_rho > 1:
        raise ValidationError("the density for rho must have support in [0, 1]")
    r_nodes, r_w = h_r.nodes(order)
    rho_nodes, rho_w = h_rho.nodes(order)
    q = np.array([ratio_q(spec.sampling, r, R, n) for r in r_nodes])
    s = np.asarray(s_tilde(spec, q)).reshape(-1)
    terms = []
    for rho, wr in zip(rho_nodes, rho_w):
        ess = np.asarray(ess_approx(J, n, float(rho), s)).reshape(-1)
        terms.extend((wr * r_w * ess).tolist())
    return math.fsum(terms)
