import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from ctoa import specfun
from ctoa.errors import AccuracyError, DomainError

ORDERS = [-0.75, -0.25, 0.25, 0.75, 1.25]


def ascending_series(nu, x, terms=60):
    """Independent oracle: sum_k (-1)^k (x/2)^(2k+nu) / (k! Gamma(k+nu+1))."""
    return math.fsum((-1) ** k * (x / 2) ** (2 * k + nu) / (math.factorial(k) * math.gamma(k + nu + 1))
                     for k in range(terms))


def envelope_scale(ref, x):
    return np.maximum(np.abs(ref), np.where(x > 1, np.sqrt(2 / (np.pi * x)), np.abs(ref)))


# ---------------------------------------------------------------------------
# Orders and domain
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("nu", ORDERS + [Fraction(-3, 4)])
def test_allowed_orders_construct(nu):
    assert float(specfun.BesselOrder(nu)) == float(nu)


@pytest.mark.parametrize("nu", [0.5, 0.0, 1.0, -1.25, 7 / 4])
def test_other_orders_rejected(nu):
    with pytest.raises(DomainError):
        specfun.BesselOrder(nu)
    with pytest.raises(DomainError):
        specfun.bessel_j(nu, 1.0)


@pytest.mark.parametrize("x", [0.0, -1.0, np.array([1.0, -2.0])])
def test_nonpositive_argument_rejected(x):
    with pytest.raises(DomainError):
        specfun.bessel_j(0.25, x)


def test_regime_labels():
    assert specfun.eval_regime(0.25, 1.0).regime == "series"
    assert specfun.eval_regime(0.25, 15.0).regime == "recurrence"
    assert specfun.eval_regime(0.25, 100.0).regime == "asymptotic"
    with pytest.raises(DomainError):
        specfun.EvalRegime("series", 0.0)


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("nu", ORDERS)
def test_bessel_matches_scipy_over_decades(nu):
    x = np.logspace(-3, 6, 400)
    j = specfun.bessel_j(nu, x)
    ref = sc.jv(nu, x)
    err = np.abs(j - ref) / envelope_scale(ref, x)
    below = x <= specfun.CROSSOVER[Fraction(nu).limit_denominator(4)]
    assert err[below].max() <= 1e-12
    assert err[~below].max() <= 1e-10


@pytest.mark.parametrize("nu", [-0.75, 1.25])
@pytest.mark.parametrize("x", [0.37, 9.3, 24.9, 25.1, 1234.5, 987654.3])
def test_bessel_matches_mpmath(nu, x):
    with mpmath.workdps(30):
        ref = float(mpmath.besselj(nu, x))
    scale = max(abs(ref), math.sqrt(2 / (math.pi * x)) if x > 1 else abs(ref))
    assert abs(specfun.bessel_j(nu, x) - ref) <= 1e-13 * scale


def test_small_argument_leading_term():
    for x in (1e-10, 1e-6):
        lead = (x / 2) ** 0.25 / math.gamma(1.25)
        assert specfun.bessel_j(0.25, x) / lead == pytest.approx(1.0, abs=1e-11)


def test_large_argument_asymptotic_band():
    # nu = 3/4 at x = 500: leading Hankel term, error band of the next term
    nu, x = 0.75, 500.0
    mu4 = 4 * nu * nu
    chi = x - nu * math.pi / 2 - math.pi / 4
    env = math.sqrt(2 / (math.pi * x))
    lead = env * math.cos(chi)
    nxt = env * (mu4 - 1) / (8 * x) * math.sin(chi)
    two_term = lead - nxt
    j = specfun.bessel_j(nu, x)
    assert abs(j - lead) <= abs(nxt) + env / x**2
    assert abs(j - two_term) <= env * abs((mu4 - 1) * (mu4 - 9)) / (128 * x * x)


def test_derivative_matches_scipy():
    x = np.logspace(-1, 4, 300)
    for nu in ORDERS:
        ref = sc.jvp(nu, x)
        err = np.abs(specfun.bessel_j_derivative(nu, x) - ref) / envelope_scale(ref, x)
        assert err.max() <= 1e-11


@given(x=st.floats(0.1, 1e4), k=st.sampled_from(range(5)))
def test_bessel_ode_residual(x, k):
    nu = ORDERS[k]
    j = specfun._jv(nu, np.array([x]))[0]
    d1 = specfun.bessel_j_derivative(nu, x)
    d2 = 0.25 * (specfun._jv(nu - 2, np.array([x]))[0] - 2 * j + specfun._jv(nu + 2, np.array([x]))[0])
    res = x * x * d2 + x * d1 + (x * x - nu * nu) * j
    assert abs(res) <= 1e-8 * (x * x * abs(j) + 1)


@pytest.mark.parametrize("nu", ORDERS)
def test_regime_consistency_on_overlap(nu):
    x = np.linspace(12.0, 16.0, 20)
    diff = np.abs(specfun._series(nu, x) - specfun._hankel(nu, x))
    assert np.max(diff / np.sqrt(2 / (np.pi * x))) <= 1e-9


def test_perturbed_series_breaks_ode():
    x = np.logspace(-1, 0.8, 50)
    nu = 0.25

    def residual():
        j = specfun._jv(nu, x)
        d1 = 0.5 * (specfun._jv(nu - 1, x) - specfun._jv(nu + 1, x))
        d2 = 0.25 * (specfun._jv(nu - 2, x) - 2 * j + specfun._jv(nu + 2, x))
        return np.max(np.abs(x * x * d2 + x * d1 + (x * x - nu * nu) * j) / (x * x * np.abs(j) + 1))

    clean = residual()
    with specfun.perturbed_series(1e-6):
        bad = residual()
    assert clean <= 1e-12
    assert bad > 1e-8
    assert residual() == clean


# ---------------------------------------------------------------------------
# Zeros
# ---------------------------------------------------------------------------


def test_first_zero_matches_series_bisection():
    oracle = brentq(lambda x: ascending_series(-0.25, x), 0.5, 3.5, xtol=1e-14, rtol=1e-15)
    assert specfun.bessel_j_zero(-0.25, 1) == pytest.approx(oracle, abs=1e-12)


def test_zeros_strictly_increasing():
    z = specfun.bessel_j_zeros(-0.25, 50)
    assert np.all(np.diff(z) > 0)
    assert specfun.bessel_j_zero(-0.25, 50) == pytest.approx(z[-1], rel=1e-15)


def test_zero_spacing_tends_to_pi():
    z = specfun.bessel_j_zeros(-0.25, 101)
    gaps = np.abs(np.diff(z) - math.pi)
    assert gaps[99] <= 1e-4
    assert np.all(np.diff(gaps[10:]) < 0)


def test_zero_residuals_first_5000():
    z = specfun.bessel_j_zeros(-0.25, 5000)
    assert np.max(np.abs(specfun.bessel_j(-0.25, z))) <= 1e-12
    d = np.abs(specfun.bessel_j_derivative(-0.25, z))
    assert np.all(np.abs(specfun.bessel_j(-0.25, z)) <= 1e-13 * np.maximum(1.0, d) * 10)


@pytest.mark.parametrize("nu", [0.25, 0.75, 1.25])
def test_zeros_match_mpmath(nu):
    z = specfun.bessel_j_zeros(nu, 40)
    with mpmath.workdps(25):
        ref = np.array([float(mpmath.besseljzero(nu, n)) for n in range(1, 41)])
    assert np.max(np.abs(z - ref) / ref) <= 1e-14


def test_zero_index_validated():
    with pytest.raises(DomainError):
        specfun.bessel_j_zero(-0.25, 0)
    with pytest.raises(DomainError):
        specfun.bessel_j_zeros(-0.25, 0)


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------


@given(x=st.floats(-6.0, 40.0).filter(lambda v: abs(v - round(v)) > 1e-3 or v > 0.5))
def test_gamma_matches_math(x):
    assert specfun.gamma(x) == pytest.approx(math.gamma(x), rel=1e-13)


@pytest.mark.parametrize("x", [0.25, 0.75, 1.25, -0.25, -0.75, 2.75])
def test_gamma_quarter_integers(x):
    assert specfun.gamma(x) == pytest.approx(math.gamma(x), rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, -3.0])
def test_gamma_poles(x):
    with pytest.raises(DomainError):
        specfun.gamma(x)


# ---------------------------------------------------------------------------
# Parabolic cylinder function D_{1/2}
# ---------------------------------------------------------------------------


def test_pcf_at_origin():
    # D_nu(0) = 2^{nu/2} sqrt(pi) / Gamma((1 - nu) / 2), independent gamma
    ref = 2**0.25 * math.sqrt(math.pi) / math.gamma(0.25)
    assert specfun.parabolic_cylinder_d_half(0.0) == pytest.approx(ref, rel=1e-15)


@pytest.mark.parametrize("angle", [0.25, 1.25, -0.25, 0.75])
def test_pcf_on_rays_matches_mpmath(angle):
    r = np.linspace(0.0, 40.0, 81)
    z = r * np.exp(1j * math.pi * angle)
    val = specfun.parabolic_cylinder_d_half(z)
    with mpmath.workdps(25):
        ref = np.array([complex(mpmath.pcfd(0.5, complex(v))) for v in z])
    assert np.max(np.abs(val - ref) / np.abs(ref)) <= 1e-9


def test_pcf_on_real_axis_matches_mpmath():
    x = np.concatenate([np.linspace(-3.5, 3.5, 15), np.linspace(7.25, 30, 10),
                        -np.linspace(7.25, 30, 10)])
    val = specfun.parabolic_cylinder_d_half(x.astype(complex))
    with mpmath.workdps(25):
        ref = np.array([complex(mpmath.pcfd(0.5, v)) for v in x])
    assert np.max(np.abs(val - ref) / np.abs(ref)) <= 1e-9


@pytest.mark.parametrize("z", [6.5, -7.0, 6.0 + 2.0j])
def test_pcf_off_ray_gap_raises(z):
    with pytest.raises(AccuracyError) as exc:
        specfun.parabolic_cylinder_d_half(z)
    assert exc.value.estimate > specfun.PCF_TOL


@given(r=st.floats(0.0, 30.0), k=st.sampled_from([0.25, 0.75, 1.25, 1.75]))
def test_pcf_schwarz_reflection(r, k):
    z = r * np.exp(1j * math.pi * k)
    a = specfun.parabolic_cylinder_d_half(z)
    b = specfun.parabolic_cylinder_d_half(np.conj(z))
    assert abs(np.conj(a) - b) <= 1e-14 * max(abs(a), 1e-300)


@given(r=st.floats(3.5, 7.25), angle=st.floats(-math.pi, math.pi))
def test_pcf_intermediate_zone_accurate_or_raises(r, angle):
    z = r * np.exp(1j * angle)
    try:
        val = specfun.parabolic_cylinder_d_half(z)
    except AccuracyError:
        return
    with mpmath.workdps(25):
        ref = complex(mpmath.pcfd(0.5, complex(z)))
    assert abs(val - ref) <= 1e-9 * abs(ref)
