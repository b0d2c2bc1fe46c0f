import io
import math

import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from ctoa import operator, spectrum
from ctoa.errors import DomainError, UnsupportedError
from ctoa.quadrature import panel_rule
from ctoa.spectrum import BoxConfig


def even_combination(r):
    return sc.jv(-0.75, r) + (2 / 3) * sc.jv(1.25, r) + sc.jv(0.25, r) / r


def scipy_even_roots(r_max):
    """Independent oracle: sign changes on a fine grid, then Brent."""
    g = np.linspace(0.05, r_max, 200001)
    v = even_combination(g)
    idx = np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))
    return np.array([brentq(even_combination, g[i], g[i + 1], xtol=1e-15) for i in idx])


def gauss_rule(l, panels=400):
    return panel_rule(np.linspace(-l, l, panels + 1), 8)


# ---------------------------------------------------------------------------
# Roots
# ---------------------------------------------------------------------------


def test_odd_roots_are_zeros_of_minus_quarter_bessel():
    s = spectrum.odd_roots(500)
    assert np.all(np.diff(s) > 0)
    assert np.max(np.abs(sc.jv(-0.25, s))) <= 1e-12
    first = brentq(lambda x: sc.jv(-0.25, x), 0.5, 3.5, xtol=1e-15)
    assert s[0] == pytest.approx(first, abs=1e-12)


def test_odd_root_spacing_tends_to_pi():
    gaps = np.abs(np.diff(spectrum.odd_roots(400)) - math.pi)
    assert gaps[-1] <= 1e-5
    assert gaps[-1] < gaps[10] < gaps[0]


def test_even_roots_match_independent_scan():
    ref = scipy_even_roots(120.0)
    r = spectrum.even_roots(len(ref))
    assert np.max(np.abs(r - ref)) <= 1e-12


def test_even_root_residuals():
    r = spectrum.even_roots(3000)
    assert np.all(np.diff(r) > 0)
    assert np.max(np.abs(spectrum.even_secular(r))) <= 1e-12


def test_even_root_spacing_tends_to_pi():
    gaps = np.abs(np.diff(spectrum.even_roots(400)) - math.pi)
    assert gaps[-1] <= 1e-4
    assert gaps[-1] < gaps[50] < gaps[5]


def test_merged_spectrum_matches_oracle_by_rank():
    # no analytic claim: the merged, sorted analytic spectrum must coincide
    # rank by rank with the oracle spectrum
    box = BoxConfig(1.0)
    pos, _, _, _ = operator.extrapolated_by_sign(operator.kernel_t0, box, 1000, 12)
    recs = [r for p in ("even", "odd") for r in spectrum.eigenvalues(box, p, 12) if r.sign > 0]
    recs.sort(key=lambda r: -r.tau)
    taus = np.array([r.tau for r in recs[:12]])
    assert np.max(np.abs(taus - pos) / taus) <= 1e-5


# ---------------------------------------------------------------------------
# Eigenvalues
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("parity", ["even", "odd"])
def test_records_closed_under_negation(parity):
    recs = spectrum.eigenvalues(BoxConfig(2.5), parity, 40)
    assert len(recs) == 80
    taus = sorted(r.tau for r in recs)
    assert all(a == -b for a, b in zip(taus, reversed(taus)))
    plus = [r.tau for r in recs if r.sign > 0]
    assert all(b < a for a, b in zip(plus[:-1], plus[1:]))


@given(l=st.floats(0.1, 50.0), mu=st.floats(0.1, 10.0), hbar=st.floats(0.1, 10.0))
def test_eigenvalue_formula(l, mu, hbar):
    box = BoxConfig(l, mu, hbar)
    for r in spectrum.eigenvalues(box, "odd", 3):
        assert r.tau == pytest.approx(r.sign * mu * l * l / (4 * r.rho * hbar), rel=1e-15)


def test_nonperiodic_box_unsupported():
    with pytest.raises(UnsupportedError):
        spectrum.eigenvalues(BoxConfig(1.0, gamma=0.3), "odd", 3)


def test_box_validation():
    for kwargs in ({"l": 0.0}, {"l": 1.0, "mu": -1.0}, {"l": 1.0, "gamma": 2.0}):
        with pytest.raises(DomainError):
            BoxConfig(**kwargs)


def test_spacing_matches_asymptotic_law():
    box = BoxConfig(10.0)
    for parity in ("even", "odd"):
        plus = np.array([r.tau for r in spectrum.eigenvalues(box, parity, 3000) if r.sign > 0])
        k = int(np.argmin(np.abs(plus - 0.01)))
        measured = plus[k - 1] - plus[k + 1]
        assert measured / 2 == pytest.approx(box.spacing(plus[k]), rel=1e-2)


def test_analytic_vs_nystrom_l10():
    box = BoxConfig(10.0)
    pos, neg, _, _ = operator.extrapolated_by_sign(operator.kernel_t0, box, 2000, 10)
    recs = [r for p in ("even", "odd") for r in spectrum.eigenvalues(box, p, 10)]
    ana = np.sort([r.tau for r in recs if r.sign > 0])[::-1][:10]
    assert np.max(np.abs(pos - ana) / ana) <= 1e-6
    assert np.max(np.abs(neg + ana) / ana) <= 1e-6


# ---------------------------------------------------------------------------
# Eigenfunctions
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("parity,sign", [("even", 1), ("odd", 1), ("odd", -1)])
def test_parity_of_eigenfunctions(parity, sign):
    box = BoxConfig(3.0)
    q = np.linspace(0, 3.0, 57)
    for r in spectrum.eigenvalues(box, parity, 8):
        if r.sign != sign:
            continue
        a = spectrum.eigenfunction(r, box, q)
        b = spectrum.eigenfunction(r, box, -q)
        assert np.allclose(b, a if parity == "even" else -a, rtol=0, atol=1e-14)


def test_odd_eigenfunction_vanishes_at_origin():
    box = BoxConfig(1.0)
    for r in spectrum.eigenvalues(box, "odd", 5):
        assert spectrum.eigenfunction(r, box, 0.0) == 0


def test_even_eigenfunction_finite_at_origin():
    box = BoxConfig(1.0)
    r = spectrum.eigenvalues(box, "even", 3)[0]
    v0 = spectrum.eigenfunction(r, box, 0.0)
    v1 = spectrum.eigenfunction(r, box, 1e-7)
    assert np.isfinite(v0) and abs(v0 - v1) <= 1e-10 * abs(v0)


def test_minus_branch_is_conjugate_up_to_constant_phase():
    box = BoxConfig(2.0)
    q = np.linspace(-2.0, 2.0, 101)
    q = q[np.abs(q) > 1e-3]
    for parity in ("even", "odd"):
        recs = spectrum.eigenvalues(box, parity, 6)
        for plus, minus in zip(recs[::2], recs[1::2]):
            ratio = np.conj(spectrum.eigenfunction(plus, box, q)) / spectrum.eigenfunction(minus, box, q)
            assert np.allclose(np.abs(ratio), 1.0, atol=1e-12)
            assert np.ptp(ratio.real) <= 1e-12 and np.ptp(ratio.imag) <= 1e-12


def test_evaluation_outside_box_rejected():
    box = BoxConfig(1.0)
    r = spectrum.eigenvalues(box, "odd", 1)[0]
    with pytest.raises(DomainError):
        spectrum.eigenfunction(r, box, 1.01)


def test_sign_convention_against_nystrom_eigenvectors():
    box = BoxConfig(1.0)
    m = operator.nystrom(operator.kernel_t0, box, 2000)
    recs = spectrum.eigenvalues(box, "even", 5) + spectrum.eigenvalues(box, "odd", 5)
    for val, vec in operator.oracle_spectrum(m, 5):
        rec = min(recs, key=lambda r: abs(r.tau - val))
        assert np.sign(rec.tau) == np.sign(val)
        phi = spectrum.eigenfunction(rec, box, m.nodes)
        i = int(np.argmax(np.abs(vec)))
        ph = phi[i] / vec[i]
        aligned = vec * ph / abs(ph)
        assert math.sqrt(np.sum(m.weights * np.abs(aligned - phi) ** 2)) <= 1e-4


# ---------------------------------------------------------------------------
# Normalisation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("parity", ["even", "odd"])
def test_closed_form_normalisation_vs_quadrature(parity):
    box = BoxConfig(1.7)
    rho = spectrum.odd_roots(30) if parity == "odd" else spectrum.even_roots(30)
    closed = spectrum.normalization(parity, rho, box)
    quad = spectrum.normalization(parity, rho, box, method="quadrature")
    assert np.max(np.abs(closed - quad) / quad) <= 1e-9


def test_odd_normalisation_large_n_limit():
    s = spectrum.odd_roots(1000)
    l = 2.0
    exact = l**3 * sc.jv(0.75, s) ** 2 * np.sqrt(s)
    limit = 2 * l**3 / (math.pi * np.sqrt(s))
    rel = np.abs(exact - limit) / limit
    assert rel[99] <= 1e-5 and rel[999] <= 1e-7
    # the same factor written through the eigenvalue
    box = BoxConfig(l)
    tau = box.tau_of_rho(s)
    alt = (4 * l * l / math.pi) * np.sqrt(box.hbar * tau / box.mu)
    assert np.allclose(limit, alt, rtol=1e-14)


def test_normalisation_rejects_nonpositive_root():
    with pytest.raises(DomainError):
        spectrum.normalization("odd", 0.0, BoxConfig(1.0))


@given(l=st.floats(0.3, 30.0), n=st.integers(1, 25), parity=st.sampled_from(["even", "odd"]))
def test_unit_norm_any_box(l, n, parity):
    box = BoxConfig(l)
    rec = spectrum.eigenvalues(box, parity, n)[-2]
    q, w = gauss_rule(l)
    norm = np.dot(w, np.abs(spectrum.eigenfunction(rec, box, q)) ** 2)
    assert norm == pytest.approx(1.0, abs=1e-8)


def test_orthonormality_and_parity_orthogonality():
    box = BoxConfig(1.0)
    q, w = gauss_rule(1.0)
    rows = {}
    for parity in ("even", "odd"):
        recs = [r for r in spectrum.eigenvalues(box, parity, 12) if r.sign > 0]
        phi = np.array([spectrum.eigenfunction(r, box, q) for r in recs])
        rows[parity] = phi
        for block in (phi, np.conj(phi)):
            g = np.conj(block) @ (block * w).T
            assert np.max(np.abs(g - np.eye(len(recs)))) <= 1e-6
            assert np.max(np.abs(np.diag(g) - 1)) <= 1e-8
    cross = np.conj(rows["even"]) @ (rows["odd"] * w).T
    assert np.max(np.abs(cross)) <= 1e-12


def test_eigenvalue_equation_first_twenty():
    box = BoxConfig(1.0)
    q = np.linspace(-1.0, 1.0, 41)
    worst = 0.0
    for parity in ("even", "odd"):
        for r in (r for r in spectrum.eigenvalues(box, parity, 20) if r.sign > 0):
            phi = (lambda x, r=r: spectrum.eigenfunction(r, box, x))
            lhs = operator.apply_kernel(operator.kernel_t0, box, phi, q)
            ref = r.tau * phi(q)
            worst = max(worst, np.linalg.norm(lhs - ref) / np.linalg.norm(ref))
    assert worst <= 1e-5


def test_spectrum_csv_columns():
    buf = io.StringIO()
    spectrum.write_spectrum_csv(spectrum.eigenvalues(BoxConfig(1.0), "odd", 2), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "parity,n,sign,rho,tau,norm_const"
    assert len(lines) == 5 and lines[1].startswith("odd,1,plus,")
