import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.special import k1

from geocluster import CorrelationModel, ValidationError, VariogramParams, bessel_k1, correlation


def test_bessel_k1_matches_scipy():
    x = np.concatenate([np.geomspace(1e-8, 2.0, 400), np.linspace(2.0, 700.0, 2000)])
    assert_allclose(bessel_k1(x), k1(x), rtol=1e-13)


@pytest.mark.parametrize("x", [1e-6, 0.1, 1.0, 1.999, 2.0, 2.001, 5.0, 30.0, 200.0])
def test_bessel_k1_matches_mpmath(x):
    ref = float(mpmath.besselk(1, x))
    assert bessel_k1(x) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_bessel_k1_rejects_bad_input(x):
    with pytest.raises(ValidationError):
        bessel_k1(x)


def test_families_at_reference_points():
    assert correlation("gaussian", 1.0, 1.0) == pytest.approx(math.exp(-1))
    assert correlation("exponential", 2.0, 1.0) == pytest.approx(math.exp(-2))
    assert correlation("kbessel", 1.0, 1.0) == pytest.approx(float(mpmath.besselk(1, 1)), rel=1e-14)
    for fam in ("gaussian", "exponential", "kbessel"):
        assert correlation(fam, 0.0, 0.7) == 1.0


def test_family_names_case_insensitive():
    assert correlation("Gaussian", 0.5, 1.0) == correlation("GAUSSIAN", 0.5, 1.0)
    with pytest.raises(ValidationError):
        correlation("matern", 0.5, 1.0)


def test_kbessel_continuous_at_zero():
    assert correlation("kbessel", 1e-12, 1.0) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    fam=st.sampled_from(["gaussian", "exponential", "kbessel"]),
    d1=st.floats(0, 50),
    d2=st.floats(0, 50),
    r=st.floats(0.01, 10),
)
def test_monotone_and_bounded(fam, d1, d2, r):
    lo, hi = sorted((d1, d2))
    f_lo, f_hi = correlation(fam, lo, r), correlation(fam, hi, r)
    assert 0 <= f_hi <= f_lo <= 1


@settings(max_examples=100, deadline=None)
@given(
    fam=st.sampled_from(["gaussian", "exponential", "kbessel"]),
    d=st.floats(0, 20),
    r=st.floats(0.05, 5),
    c=st.floats(0.1, 10),
)
def test_scale_invariance(fam, d, r, c):
    assert correlation(fam, c * d, c * r) == pytest.approx(correlation(fam, d, r), rel=1e-12, abs=1e-300)


def test_correlation_rejects_bad_arguments():
    with pytest.raises(ValidationError):
        correlation("gaussian", -1.0, 1.0)
    with pytest.raises(ValidationError):
        correlation("gaussian", 1.0, 0.0)


def test_variogram_rho():
    v = VariogramParams(nugget=0.25, sill=1.0, range=3.0)
    assert v.rho == pytest.approx(0.75)
    model = CorrelationModel.from_variogram("exponential", v)
    assert model.rho == pytest.approx(0.75) and model.r == 3.0
    with pytest.raises(ValidationError):
        VariogramParams(nugget=2.0, sill=1.0, range=1.0)


@pytest.mark.parametrize("rho", [-0.1, 1.5])
def test_model_rejects_rho_outside_unit_interval(rho):
    with pytest.raises(ValidationError, match="0 <= rho <= 1"):
        CorrelationModel("gaussian", 1.0, rho)
