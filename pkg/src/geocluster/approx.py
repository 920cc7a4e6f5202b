"""Closed-form approximations to the mean within-cluster correlation.

The mean pairwise correlation ``s`` of a cluster sample is approximated by a
sigmoid-like curve ``s~ = g(q)`` of a dimensionless ratio ``q``:

* simple random sampling: ``q = r / R``
* spatially regular sampling: ``q = r / (sqrt(R) + R / n)``

where ``R`` is the disc radius (or ``sqrt(A)`` for rectangles). Candidate
curve families are fitted to simulated ``(q, s)`` pairs by nonlinear least
squares and ranked by mean squared error.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import (
    FAMILIES,
    SAMPLINGS,
    SHAPES,
    ComputationError,
    ValidationError,
    check_choice,
    check_count,
    check_family,
    check_positive,
    check_sampling,
)
from .ess import mean_correlation
from .geometry import PointSet, Region, gen_regular, gen_uniform, pairwise_distances

__all__ = [
    "FORMS",
    "ApproxSpec",
    "FitResult",
    "MeanCorrelationRegressor",
    "TABLE1",
    "get_preset",
    "load_refit_presets",
    "ratio_q",
    "s_tilde",
    "simulate_s",
    "simulate_table",
    "fit_approximation",
    "regenerate_table1",
    "PresetTable",
]


# -- curve families ---------------------------------------------------------

def _pow(q, b):
    with np.errstate(over="ignore", invalid="ignore"):
        return q**b


def _algebraic(q, c):
    u = c[0] * _pow(q, c[1])
    return u / (1.0 + u)


def _algebraic_jac(q, c):
    a, b = c
    v = _pow(q, b)
    denom = (1.0 + a * v) ** 2
    return np.column_stack([v / denom, a * v * np.log(q) / denom])


def _tanh(q, c):
    return c[0] * np.tanh(c[1] * _pow(q, c[2]))


def _tanh_jac(q, c):
    a, b, g = c
    v = _pow(q, g)
    t = np.tanh(b * v)
    sech2 = 1.0 - t * t
    return np.column_stack([t, a * v * sech2, a * b * v * np.log(q) * sech2])


def _logistic(q, c):
    with np.errstate(over="ignore"):
        return c[0] / (1.0 + np.exp(-c[1] * _pow(q, c[2])))


def _logistic_jac(q, c):
    a, b, g = c
    v = _pow(q, g)
    with np.errstate(over="ignore"):
        sig = 1.0 / (1.0 + np.exp(-b * v))
    ds = sig * (1.0 - sig)
    return np.column_stack([sig, a * ds * v, a * ds * b * v * np.log(q)])


def _cubic(q, c):
    return c[0] + q * (c[1] + q * (c[2] + q * c[3]))


def _cubic_jac(q, c):
    return np.column_stack([np.ones_like(q), q, q * q, q**3])


@dataclass(frozen=True)
class _Form:
    name: str
    func: object
    jac: object
    starts: tuple
    formula: str


# Multi-start initial values; each row is one start.
FORMS = {
    "algebraic": _Form(
        "algebraic", _algebraic, _algebraic_jac,
        ((1.0, 1.0), (0.5, 2.0), (2.0, 1.5), (0.8, 1.4), (1.5, 2.5)),
        "1 - 1/(1 + a*q**b)",
    ),
    "tanh": _Form(
        "tanh", _tanh, _tanh_jac,
        ((1.0, 1.0, 1.0), (0.7, 0.8, 1.3), (1.0, 0.5, 1.0), (0.5, 2.0, 1.5), (1.0, 1.0, 2.0)),
        "a*tanh(b*q**c)",
    ),
    "logistic": _Form(
        "logistic", _logistic, _logistic_jac,
        ((1.0, 1.0, 1.0), (1.0, 2.0, 1.0), (0.8, 0.5, 1.0), (1.0, 1.0, 2.0), (1.5, 1.0, 0.5)),
        "a/(1 + exp(-b*q**c))",
    ),
    "cubic": _Form(
        "cubic", _cubic, _cubic_jac,
        ((0.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0), (0.5, 0.5, -0.1, 0.01),
         (0.0, 0.5, 0.0, 0.0), (1.0, -1.0, 1.0, -1.0)),
        "a + b*q + c*q**2 + d*q**3",
    ),
}
# forms that are bounded, vanish at q = 0 and can be shipped as presets
SIGMOID_FORMS = ("algebraic", "tanh", "logistic")


def _check_form(form):
    return check_choice(form, tuple(FORMS), "form")


# -- least squares ----------------------------------------------------------

def _levenberg_marquardt(func, jac, q, y, x0, max_iter=500, tol=1e-15):
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    Returns ``(coeffs, sse, converged, n_iter)``.
    """
    x = np.asarray(x0, dtype=float)
    with np.errstate(all="ignore"):
        res = func(q, x) - y
        sse = float(res @ res)
    if not np.isfinite(sse):
        return x, math.inf, False, 0
    lam = 1e-3
    for it in range(1, max_iter + 1):
        with np.errstate(all="ignore"):
            J = jac(q, x)
        if not np.all(np.isfinite(J)):
            return x, sse, False, it
        A = J.T @ J
        g = J.T @ res
        improved = False
        while lam < 1e16:
            M = A + lam * np.diag(np.maximum(np.diag(A), 1e-12))
            try:
                step = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + step
            with np.errstate(all="ignore"):
                res_new = func(q, x_new) - y
                sse_new = float(res_new @ res_new)
            if np.isfinite(sse_new) and sse_new <= sse:
                improved = True
                break
            lam *= 10.0
        if not improved:
            return x, sse, True, it
        done = (sse - sse_new) <= tol * max(sse, 1e-300) or np.all(
            np.abs(step) <= 1e-12 * (np.abs(x) + 1e-12)
        )
        x, res, sse = x_new, res_new, sse_new
        lam = max(lam / 10.0, 1e-12)
        if done or sse == 0.0:
            return x, sse, True, it
    return x, sse, False, max_iter


class MeanCorrelationRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of one curve family ``s ~ g(q)``.

    Parameters
    ----------
    form : {"algebraic", "tanh", "logistic", "cubic"}
        Curve family.
    starts : sequence of coefficient vectors, optional
        Initial values; defaults to the family's five documented starts.
    max_iter : int
        Iteration cap per start.

    Attributes
    ----------
    coef_ : ndarray
        Coefficients of the best start.
    mse_ : float
        Mean squared residual at ``coef_``.
    converged_ : bool
        Whether any start converged.
    """

    def __init__(self, form="algebraic", starts=None, max_iter=500):
        self.form = form
        self.starts = starts
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float).reshape(len(y), -1), y, y_numeric=True)
        q = X[:, 0]
        if np.any(q <= 0):
            raise ValidationError("q must be > 0")
        spec = FORMS[_check_form(self.form)]
        starts = spec.starts if self.starts is None else self.starts
        best = None
        any_converged = False
        for x0 in starts:
            coef, sse, ok, n_iter = _levenberg_marquardt(spec.func, spec.jac, q, y, x0, self.max_iter)
            any_converged |= ok
            # first start wins ties so results do not depend on float noise order
            if ok and np.isfinite(sse) and (best is None or sse < best[1]):
                best = (coef, sse, n_iter)
        if best is None:
            raise ComputationError(f"no start converged for form {spec.name!r}")
        self.coef_, sse, self.n_iter_ = best
        self.mse_ = sse / len(y)
        self.converged_ = any_converged
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(np.asarray(X, dtype=float).reshape(-1, 1) if np.ndim(X) < 2 else X)
        return FORMS[_check_form(self.form)].func(X[:, 0], self.coef_)


# -- presets ----------------------------------------------------------------

@dataclass(frozen=True)
class ApproxSpec:
    """A fitted approximation ``s~(q)`` for one family / sampling / shape."""

    family: str
    sampling: str
    shape: str
    form: str
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "family", check_family(self.family))
        object.__setattr__(self, "sampling", check_sampling(self.sampling))
        object.__setattr__(self, "shape", check_choice(self.shape, SHAPES, "shape"))
        object.__setattr__(self, "form", _check_form(self.form))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def __call__(self, q):
        return s_tilde(self, q)

    def to_dict(self):
        return {
            "family": self.family,
            "sampling": self.sampling,
            "shape": self.shape,
            "form": self.form,
            "coeffs": list(self.coeffs),
        }


# Built-in disc coefficients, three decimals.
TABLE1 = {
    ("gaussian", "simple"): ApproxSpec("gaussian", "simple", "disc", "algebraic", (0.915, 2.071)),
    ("gaussian", "spatial"): ApproxSpec("gaussian", "spatial", "disc", "algebraic", (0.876, 2.160)),
    ("exponential", "simple"): ApproxSpec("exponential", "simple", "disc", "algebraic", (0.764, 1.366)),
    ("exponential", "spatial"): ApproxSpec("exponential", "spatial", "disc", "tanh", (-0.655, -0.795, 1.270)),
    ("kbessel", "simple"): ApproxSpec("kbessel", "simple", "disc", "algebraic", (1.871, 1.603)),
    ("kbessel", "spatial"): ApproxSpec("kbessel", "spatial", "disc", "algebraic", (1.829, 1.645)),
}

_REFIT_FILE = "rect_presets.json"
# seed used to produce the shipped refit presets
DEFAULT_SEED = 20201031


def load_refit_presets():
    """Refit presets (disc and rectangle) produced by :func:`regenerate_table1` with a pinned seed."""
    raw = json.loads(resources.files("geocluster").joinpath("data", _REFIT_FILE).read_text())
    return {
        (row["family"], row["sampling"], row["shape"]): ApproxSpec(
            row["family"], row["sampling"], row["shape"], row["form"], row["coeffs"]
        )
        for row in raw["presets"]
    }


def get_preset(family, sampling, shape="disc"):
    """The shipped approximation for a family / sampling / shape."""
    family = check_family(family)
    sampling = check_sampling(sampling)
    shape = check_choice(shape, SHAPES, "shape")
    if shape == "disc":
        return TABLE1[(family, sampling)]
    return load_refit_presets()[(family, sampling, shape)]


def ratio_q(sampling, r, scale, n=None):
    """Approximation ratio for a range ``r`` and cluster scale (R or sqrt(A))."""
    sampling = check_sampling(sampling)
    r = check_positive(r, "r")
    scale = check_positive(scale, "scale")
    if sampling == "simple":
        return r / scale
    if n is None:
        raise ValidationError("n is required for spatial sampling")
    n = check_positive(n, "n")
    return r / (math.sqrt(scale) + scale / n)


def s_tilde(spec, q):
    """Evaluate an approximation at ``q > 0``, clipped to ``[0, 1]``."""
    q_arr = np.asarray(q, dtype=float)
    if np.any(~(q_arr > 0)):
        raise ValidationError("q must be > 0")
    with np.errstate(over="ignore", invalid="ignore"):
        out = FORMS[spec.form].func(q_arr, np.asarray(spec.coeffs))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# -- simulation -------------------------------------------------------------

_SCHEME_SAMPLING = {"uniform": "simple", "regular": "spatial", "inhibited": "spatial"}


def simulate_s(family, region, n, r, scheme="uniform", seed=None, points=None):
    """Simulate one ``(q, s)`` pair.

    Generates ``n`` points in ``region`` (uniform or regular) unless
    ``points`` is given, and returns the approximation ratio for the
    matching sampling scheme together with the realised mean correlation.
    """
    family = check_family(family)
    r = check_positive(r, "r")
    scheme = check_choice(scheme, tuple(_SCHEME_SAMPLING), "scheme")
    if points is None:
        n = check_count(n, "n")
        gen = gen_uniform if scheme == "uniform" else gen_regular
        points = gen(region, n, seed)
    elif not isinstance(points, PointSet):
        points = PointSet(points)
    n = len(points)
    q = ratio_q(_SCHEME_SAMPLING[scheme], r, region.scale, n)
    return q, mean_correlation(family, pairwise_distances(points), r)


def _replicate(seed_seq, sampling, shape, r_range, n_range, w_range):
    rng = np.random.default_rng(seed_seq)
    r = rng.uniform(*r_range)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    region = Region.disc(1.0) if shape == "disc" else Region.rect(rng.uniform(*w_range))
    gen = gen_uniform if sampling == "simple" else gen_regular
    dist = pairwise_distances(gen(region, n, rng))
    q = ratio_q(sampling, r, region.scale, n)
    return r, n, q, [mean_correlation(f, dist, r) for f in FAMILIES]


@dataclass
class SimulatedTable:
    """Simulated ``(q, s)`` pairs for every family under one sampling / shape."""

    sampling: str
    shape: str
    seed: int
    r: np.ndarray
    n: np.ndarray
    q: np.ndarray
    s: dict

    @property
    def replicates(self):
        return len(self.q)


def simulate_table(sampling, shape, replicates, seed, r_range=(0.001, 2.0), n_range=(10, 200),
                   w_range=(0.1, 1.0), n_jobs=1):
    """Simulate ``replicates`` point sets and their mean correlations.

    Each replicate draws ``r`` and ``n`` uniformly from their ranges (and the
    rectangle height from ``w_range``), generates points uniformly
    (``simple``) or regularly (``spatial``) and records ``s`` for all three
    families on the same points. Replicate ``i`` always uses the ``i``-th
    child of the seed sequence, so results do not depend on ``n_jobs``.
    """
    sampling = check_sampling(sampling)
    shape = check_choice(shape, SHAPES, "shape")
    replicates = check_count(replicates, "replicates")
    root = np.random.SeedSequence([int(seed), SAMPLINGS.index(sampling), SHAPES.index(shape)])
    children = root.spawn(replicates)
    rows = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_replicate)(c, sampling, shape, r_range, n_range, w_range) for c in children
    )
    r, n, q, s = zip(*rows)
    s = np.array(s)
    return SimulatedTable(
        sampling=sampling,
        shape=shape,
        seed=int(seed),
        r=np.array(r),
        n=np.array(n),
        q=np.array(q),
        s={f: s[:, i] for i, f in enumerate(FAMILIES)},
    )


# -- fitting ----------------------------------------------------------------

@dataclass
class FitResult:
    spec: ApproxSpec
    mse: float
    replicates: int
    seed: object = None
    converged: bool = True
    q_range: tuple = None
    r_range: tuple = None
    n_range: tuple = None
    message: str = ""

    def to_dict(self):
        out = self.spec.to_dict()
        out.update(mse=self.mse, replicates=self.replicates, seed=self.seed, converged=self.converged,
                   q_range=self.q_range, r_range=self.r_range, n_range=self.n_range)
        return out


def fit_approximation(data, forms=tuple(FORMS), family="exponential", sampling="simple", shape="disc",
                      seed=None, starts=None, envelope=None):
    """Fit every candidate form to ``(q, s)`` data and rank by MSE.

    ``data`` is an ``(N, 2)`` array-like of ``(q, s)`` rows with ``N >= 50``.
    Forms whose starts all fail are returned last with ``converged=False``
    and an infinite MSE.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValidationError("data must be a sequence of (q, s) pairs")
    if len(data) < 50:
        raise ValidationError(f"need at least 50 data points, got {len(data)}")
    if not forms:
        raise ValidationError("need at least one candidate form")
    q, s = data[:, 0], data[:, 1]
    envelope = dict(envelope or {})
    envelope.setdefault("q_range", (float(q.min()), float(q.max())))
    results = []
    for form in forms:
        form = _check_form(form)
        reg = MeanCorrelationRegressor(form=form, starts=None if starts is None else starts.get(form))
        try:
            reg.fit(q, s)
        except ComputationError as exc:
            nan_coeffs = (math.nan,) * len(FORMS[form].starts[0])
            spec = ApproxSpec(family, sampling, shape, form, nan_coeffs)
            results.append(FitResult(spec, math.inf, len(q), seed, False, message=str(exc), **envelope))
            continue
        spec = ApproxSpec(family, sampling, shape, form, reg.coef_)
        results.append(FitResult(spec, float(reg.mse_), len(q), seed, True, **envelope))
    results.sort(key=lambda res: (res.mse, list(FORMS).index(res.spec.form)))
    return results


def tied_best(mse_by_form, decimals=4):
    """Forms whose MSE, rounded to ``decimals`` places, equals the smallest."""
    rounded = {form: round(mse, decimals) for form, mse in mse_by_form.items() if math.isfinite(mse)}
    if not rounded:
        return []
    low = min(rounded.values())
    return [form for form in FORMS if rounded.get(form) == low]


@dataclass
class PresetTable:
    """Fits for every family / sampling / shape combination."""

    seed: int
    replicates: int
    fits: dict = field(default_factory=dict)  # key -> list of FitResult, ascending MSE
    tables: dict = field(default_factory=dict)  # (sampling, shape) -> SimulatedTable

    def best(self, family, sampling, shape, forms=None):
        for res in self.fits[(family, sampling, shape)]:
            if forms is None or res.spec.form in forms:
                return res
        raise KeyError((family, sampling, shape, forms))

    def preset(self, family, sampling, shape):
        """The shipped choice: the best bounded sigmoid form."""
        return self.best(family, sampling, shape, SIGMOID_FORMS).spec

    def to_dict(self):
        rows = []
        for (family, sampling, shape), results in sorted(self.fits.items()):
            best = self.best(family, sampling, shape, SIGMOID_FORMS)
            mse_by_form = {res.spec.form: res.mse for res in results}
            rows.append({
                **best.spec.to_dict(),
                "mse": best.mse,
                "q_range": best.q_range,
                "mse_by_form": mse_by_form,
                "coeffs_by_form": {res.spec.form: list(res.spec.coeffs) for res in results},
                "best_form": results[0].spec.form,
                "tied_best": tied_best(mse_by_form),
            })
        return {
            "seed": self.seed,
            "replicates": self.replicates,
            "r_range": [0.001, 2.0],
            "n_range": [10, 200],
            "w_range": [0.1, 1.0],
            "presets": rows,
        }


def regenerate_table1(seed=DEFAULT_SEED, replicates=2000, n_jobs=1, forms=tuple(FORMS)):
    """Simulate and fit approximations for all families, samplings and shapes."""
    replicates = check_count(replicates, "replicates", minimum=500)
    table = PresetTable(seed=int(seed), replicates=replicates)
    for shape in SHAPES:
        for sampling in SAMPLINGS:
            sim = simulate_table(sampling, shape, replicates, seed, n_jobs=n_jobs)
            table.tables[(sampling, shape)] = sim
            envelope = {
                "q_range": (float(sim.q.min()), float(sim.q.max())),
                "r_range": (float(sim.r.min()), float(sim.r.max())),
                "n_range": (int(sim.n.min()), int(sim.n.max())),
            }
            for family in FAMILIES:
                data = np.column_stack([sim.q, sim.s[family]])
                table.fits[(family, sampling, shape)] = fit_approximation(
                    data, forms, family, sampling, shape, seed=int(seed), envelope=envelope
                )
    return table
