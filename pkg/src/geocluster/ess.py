"""Effective sample size of spatially correlated cluster samples."""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import ValidationError, check_count, check_unit_interval
from .correlation import CorrelationModel, correlation
from .geometry import PointSet, pairwise_distances

__all__ = [
    "ClusterConfig",
    "EssResult",
    "ess_exact",
    "cluster_ess",
    "design_ess",
    "ess_compound",
    "ess_approx",
    "correlation_matrix",
    "mean_correlation",
]


@dataclass(frozen=True)
class ClusterConfig:
    """The sampled locations of one cluster and the correlation model."""

    points: PointSet
    model: CorrelationModel

    def __post_init__(self):
        if not isinstance(self.points, PointSet):
            object.__setattr__(self, "points", PointSet(self.points))
        if len(self.points) < 1:
            raise ValidationError("a cluster needs at least one point")


@dataclass(frozen=True)
class EssResult:
    n_star: float
    n: int
    s_bar: float
    icc_sp: float

    def to_dict(self):
        return {"n_star": self.n_star, "n": self.n, "s_bar": self.s_bar, "icc_sp": self.icc_sp}


def ess_exact(sigma, N=None):
    """Effective sample size ``tr(S) / (1' S 1) * N`` of a covariance matrix.

    The matrix is first scaled to unit diagonal; the diagonal must be constant.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError("sigma must be a square matrix")
    size = sigma.shape[0]
    N = size if N is None else check_count(N, "N")
    if N != size:
        raise ValidationError(f"sigma is {size}x{size} but N={N}")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise ValidationError("sigma must be symmetric")
    diag = np.diag(sigma)
    if np.any(diag <= 0) or not np.allclose(diag, diag[0], rtol=1e-12, atol=0):
        raise ValidationError("sigma must have a constant positive diagonal")
    sigma = sigma / diag[0]
    total = sigma.sum()
    if total <= 0:
        raise ValidationError("1' sigma 1 must be positive")
    return np.trace(sigma) / total * N


def correlation_matrix(cluster):
    """Unit-diagonal covariance ``(1 - rho) I + rho F`` of one cluster."""
    model = cluster.model
    F = np.asarray(model(pairwise_distances(cluster.points)))
    F = np.atleast_2d(F)
    sigma = model.rho * F
    sigma[np.diag_indices_from(sigma)] = 1.0
    return sigma


def _offdiag_sum(F):
    return F.sum() - np.trace(F)


def mean_correlation(family, dist, r):
    """Average off-diagonal correlation ``s`` of a distance matrix (0 for n = 1)."""
    n = dist.shape[0]
    if n < 2:
        return 0.0
    return _offdiag_sum(np.asarray(correlation(family, dist, r))) / (n * (n - 1))


def cluster_ess(cluster):
    """Exact effective size of one cluster from its pairwise correlations.

    ``n* = n / (1 + rho/n * sum_{i != j} f(d_ij, r))``.
    """
    n = len(cluster.points)
    model = cluster.model
    if n == 1:
        return EssResult(n_star=1.0, n=1, s_bar=0.0, icc_sp=0.0)
    F = np.asarray(model(pairwise_distances(cluster.points)))
    total = _offdiag_sum(F)
    s_bar = total / (n * (n - 1))
    n_star = n / (1.0 + model.rho * total / n)
    return EssResult(n_star=float(n_star), n=n, s_bar=float(s_bar), icc_sp=float(model.rho * s_bar))


def _quadratic_form(cluster):
    """``1' S 1`` of one cluster's unit-diagonal covariance."""
    n = len(cluster.points)
    if n == 1:
        return 1.0
    F = np.asarray(cluster.model(pairwise_distances(cluster.points)))
    return n + cluster.model.rho * _offdiag_sum(F)


def design_ess(clusters):
    """Effective size of mutually independent clusters.

    The design covariance is block diagonal, so ``tr(S) / (1' S 1) * N``
    reduces to ``N**2 / sum_j (n_j + rho sum_{i != k} f_j(d_ik))``. For
    clusters with equal quadratic forms this is the sum of the per-cluster
    ``n*``; otherwise it is smaller.
    """
    clusters = list(clusters)
    if not clusters:
        raise ValidationError("design_ess needs at least one cluster")
    N = sum(len(c.points) for c in clusters)
    return float(N * N / math.fsum(_quadratic_form(c) for c in clusters))


def ess_compound(J, n, icc):
    """Compound-symmetry effective size ``J n / (1 + (n - 1) icc)``."""
    J = check_count(J, "J")
    if not n >= 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    icc = check_unit_interval(icc, "icc")
    return J * n / (1.0 + (n - 1) * icc)


def ess_approx(J, n, rho, s_tilde):
    """Approximate effective size ``J n / (1 + rho s~ (n - 1))``.

    ``J`` and ``n`` may be non-integer averages.
    """
    if not J > 0:
        raise ValidationError(f"J must be > 0, got {J!r}")
    if not n >= 1:
        raise ValidationError(f"n must be >= 1, got {n!r}")
    rho = check_unit_interval(rho, "rho")
    s_tilde = np.asarray(s_tilde, dtype=float)
    if np.any(s_tilde < 0) or np.any(s_tilde > 1) or not np.all(np.isfinite(s_tilde)):
        raise ValidationError("s_tilde must satisfy 0 <= s_tilde <= 1")
    out = J * n / (1.0 + rho * s_tilde * (n - 1))
    return float(out) if out.ndim == 0 else out
