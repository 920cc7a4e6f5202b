"""Simulation of two-stage cluster sampling scenarios.

Two scenarios vary the number of clusters ``J`` at a fixed total survey
target ``N``:

``fixed-mp``
    The total enumeration ``M = N / p`` and proportion ``p`` are fixed, so each
    cluster enumerates ``m = M / J`` locations and shrinks as ``J`` grows.
``fixed-m``
    Each cluster enumerates ``m`` locations regardless of ``J``, so the
    sampled proportion ``p = N / (J m)`` falls as ``J`` grows.

A cluster enumerating ``m`` locations is a disc of radius ``r0 * sqrt(m)``.
Each replicate enumerates uniform frames and subsamples them either by simple
random sampling or by inhibited sampling; the exact effective sample size is
computed on the realised points and compared with the closed-form
approximation.
"""

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq
from scipy.spatial.distance import pdist

from ._validation import (
    FAMILIES,
    ValidationError,
    check_choice,
    check_count,
    check_family,
    check_positive,
    check_unit_interval,
)
from .approx import get_preset, ratio_q
from .correlation import _KERNELS
from .ess import ess_approx
from .geometry import Region, gen_uniform, sample_inhibited, simple_random_subsample

__all__ = [
    "ScenarioConfig",
    "ScenarioResult",
    "run_scenario",
    "compare_strategies",
    "strategy_curve",
    "equivalent_sample_size",
]

SCENARIOS = ("fixed-mp", "fixed-m")
SCHEMES = ("simple", "spatial")

CSV_FIELDS = (
    "scenario", "family", "scheme", "rho", "r", "J",
    "mean_ess_exact", "sd_ess_exact", "ess_approx",
)


def _tuple(values, check):
    if isinstance(values, (str, int, float)):
        values = (values,)
    return tuple(check(v) for v in values)


@dataclass(frozen=True)
class ScenarioConfig:
    """Inputs of one scenario sweep.

    ``p`` is used by ``fixed-mp`` (so ``M = N / p``); ``m`` by ``fixed-m``.
    ``r0`` sets the cluster radius ``r0 * sqrt(m)``; the default 0.1 is a
    density of 100 enumerated locations per unit disc.
    """

    scenario: str = "fixed-mp"
    N: int = 200
    j_values: tuple = (1, 2, 4, 5, 10, 20, 25, 40, 50)
    rhos: tuple = (0.01, 0.1, 0.5, 0.9)
    rs: tuple = (0.1, 0.5)
    families: tuple = FAMILIES
    schemes: tuple = SCHEMES
    p: float = 0.5
    m: int = 400
    r0: float = 0.1
    replicates: int = 500
    seed: int = 0

    def __post_init__(self):
        s = object.__setattr__
        s(self, "scenario", check_choice(self.scenario, SCENARIOS, "scenario"))
        s(self, "N", check_count(self.N, "N"))
        s(self, "j_values", _tuple(self.j_values, lambda j: check_count(j, "J")))
        s(self, "rhos", _tuple(self.rhos, lambda v: check_unit_interval(v, "rho")))
        s(self, "rs", _tuple(self.rs, lambda v: check_positive(v, "r")))
        s(self, "families", _tuple(self.families, check_family))
        s(self, "schemes", _tuple(self.schemes, lambda v: check_choice(v, SCHEMES, "scheme")))
        s(self, "p", check_unit_interval(self.p, "p", open_low=True))
        s(self, "m", check_count(self.m, "m"))
        s(self, "r0", check_positive(self.r0, "r0"))
        s(self, "replicates", check_count(self.replicates, "replicates"))
        for J in self.j_values:
            n_sizes, m_sizes = self.cluster_sizes(J)
            if n_sizes.min() < 1:
                raise ValidationError(f"J={J}: n = N/J < 1 leaves empty cluster samples")
            if np.any(n_sizes > m_sizes):
                raise ValidationError(f"J={J}: cluster sample n exceeds enumeration m (p > 1)")

    @property
    def M(self):
        if self.scenario == "fixed-mp":
            return int(round(self.N / self.p))
        return None

    def cluster_sizes(self, J):
        """Per-cluster sample and frame sizes, as even as integers allow."""
        n_sizes = np.full(J, self.N // J) + (np.arange(J) < self.N % J)
        if self.scenario == "fixed-mp":
            m_sizes = np.full(J, self.M // J) + (np.arange(J) < self.M % J)
        else:
            m_sizes = np.full(J, self.m)
        return n_sizes, m_sizes

    def mean_m(self, J):
        return self.M / J if self.scenario == "fixed-mp" else float(self.m)

    def to_dict(self):
        return {
            "scenario": self.scenario, "N": self.N, "j_values": list(self.j_values),
            "rhos": list(self.rhos), "rs": list(self.rs), "families": list(self.families),
            "schemes": list(self.schemes), "p": self.p, "m": self.m, "r0": self.r0,
            "replicates": self.replicates, "seed": self.seed,
        }


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list = field(default_factory=list)
    # (family, scheme, rho, r, J) -> per-replicate exact design ESS
    draws: dict = field(default_factory=dict, repr=False)

    def lookup(self, **keys):
        return [row for row in self.rows if all(row[k] == v for k, v in keys.items())]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row[k]) for k in CSV_FIELDS})
        return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


def _replicate(config, seed_seq):
    """Exact design ESS for every grid cell in one replicate.

    Frames are shared between the two sampling schemes so their comparison
    uses common random numbers.
    """
    rng = np.random.default_rng(seed_seq)
    out = {}
    for J in config.j_values:
        n_sizes, m_sizes = config.cluster_sizes(J)
        frames = [gen_uniform(Region.disc(config.r0 * math.sqrt(m)), int(m), rng) for m in m_sizes]
        for scheme in config.schemes:
            totals = {}
            for frame, n in zip(frames, n_sizes):
                n = int(n)
                if n == len(frame):
                    pts = frame
                elif scheme == "simple":
                    pts = simple_random_subsample(frame, n, rng)
                else:
                    pts = sample_inhibited(frame, n, "auto", seed=rng)
                # each unordered pair once; the off-diagonal sum counts it twice
                pair_d = pdist(pts.coords)
                for family in config.families:
                    kernel = _KERNELS[family]
                    for r in config.rs:
                        off = 2.0 * float(np.sum(kernel(pair_d / r))) if n > 1 else 0.0
                        for rho in config.rhos:
                            key = (family, scheme, rho, r, J)
                            totals.setdefault(key, []).append(n + rho * off)
            # block-diagonal design: N^2 / sum of per-cluster quadratic forms
            N = int(n_sizes.sum())
            for key, forms in totals.items():
                out[key] = N * N / math.fsum(forms)
    return out


def _approx_ess(config, family, scheme, rho, r, J):
    n_bar = config.N / J
    m_bar = config.mean_m(J)
    R = config.r0 * math.sqrt(m_bar)
    spec = get_preset(family, scheme, "disc")
    q = ratio_q(scheme, r, R, n_bar)
    return ess_approx(J, n_bar, rho, spec(q))


def run_scenario(config, n_jobs=1):
    """Simulate the scenario and summarise exact and approximate ESS.

    Replicate ``i`` uses the ``i``-th child of ``SeedSequence(config.seed)``;
    results are independent of ``n_jobs``.
    """
    children = np.random.SeedSequence(config.seed).spawn(config.replicates)
    reps = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_replicate)(config, c) for c in children)
    result = ScenarioResult(config)
    for family in config.families:
        for scheme in config.schemes:
            for rho in config.rhos:
                for r in config.rs:
                    for J in config.j_values:
                        key = (family, scheme, rho, r, J)
                        draws = np.array([rep[key] for rep in reps])
                        result.draws[key] = draws
                        sd = float(np.std(draws, ddof=1)) if len(draws) > 1 else 0.0
                        result.rows.append({
                            "scenario": config.scenario,
                            "family": family,
                            "scheme": scheme,
                            "rho": rho,
                            "r": r,
                            "J": J,
                            "mean_ess_exact": math.fsum(draws) / len(draws),
                            "sd_ess_exact": sd,
                            "ess_approx": _approx_ess(config, family, scheme, rho, r, J),
                        })
    return result


# -- approximate strategy curves ---------------------------------------------

def strategy_curve(config):
    """Approximate ESS over ``J`` for a single family / scheme / rho / r."""
    if len(config.families) != 1 or len(config.schemes) != 1 or len(config.rhos) != 1 or len(config.rs) != 1:
        raise ValidationError("a strategy curve needs exactly one family, scheme, rho and r")
    family, scheme, rho, r = config.families[0], config.schemes[0], config.rhos[0], config.rs[0]
    rows = []
    for J in config.j_values:
        rows.append({
            "J": J,
            "m": config.mean_m(J),
            "n": config.N / J,
            "ess": _approx_ess(config, family, scheme, rho, r, J),
        })
    return rows


def compare_strategies(base, alt):
    """Side-by-side approximate ESS curves of two strategies with the same ``N``.

    Returns rows ``{J, base_m, base_n, base_ess, alt_m, alt_n, alt_ess}``.
    """
    if base.N != alt.N:
        raise ValidationError(f"strategies must share the survey target N ({base.N} != {alt.N})")
    if base.j_values != alt.j_values:
        raise ValidationError("strategies must share j_values")
    rows = []
    for b, a in zip(strategy_curve(base), strategy_curve(alt)):
        rows.append({
            "J": b["J"],
            "base_m": b["m"], "base_n": b["n"], "base_ess": b["ess"],
            "alt_m": a["m"], "alt_n": a["n"], "alt_ess": a["ess"],
        })
    return rows


def equivalent_sample_size(config, J, m, target_ess):
    """Per-cluster sample ``n`` that reaches ``target_ess`` with ``J`` clusters
    each enumerating ``m`` locations."""
    cfg = replace(config, scenario="fixed-m", m=int(m), N=int(J), j_values=(int(J),))
    family, scheme, rho, r = cfg.families[0], cfg.schemes[0], cfg.rhos[0], cfg.rs[0]
    R = cfg.r0 * math.sqrt(m)
    spec = get_preset(family, scheme, "disc")

    def gap(n):
        return ess_approx(J, n, rho, spec(ratio_q(scheme, r, R, n))) - target_ess

    if gap(m) < 0:
        raise ValidationError(f"target ESS {target_ess:g} is not reachable with m={m}")
    if gap(1.0) >= 0:
        return 1.0
    return brentq(gap, 1.0, float(m), xtol=1e-12)
