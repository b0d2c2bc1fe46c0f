import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import dblquad

from ctoa import operator
from ctoa.errors import DomainError
from ctoa.spectrum import BoxConfig

BOX = BoxConfig(1.0)
coords = st.floats(-1.0, 1.0)


def frobenius_integral(box):
    """2-D quadrature of |T_0(q, q')|^2 over the box, split at the diagonal."""
    c = (box.mu / (4 * box.hbar)) ** 2
    l = box.l

    def f(y, x):
        return c * (x + y) ** 2 * (np.sign(x - y) - (x - y) / l) ** 2

    lower, _ = dblquad(f, -l, l, -l, lambda x: x, epsabs=1e-13)
    upper, _ = dblquad(f, -l, l, lambda x: x, l, epsabs=1e-13)
    return lower + upper


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@given(q=coords)
def test_periodic_kernel_vanishes_on_diagonal(q):
    assert operator.kernel_t0(q, q, BOX) == 0


@given(q=coords, qp=coords)
def test_periodic_kernel_hermitian_and_parity_even(q, qp):
    k = operator.kernel_t0(q, qp, BOX)
    assert abs(k - np.conj(operator.kernel_t0(qp, q, BOX))) <= 1e-15
    assert abs(k - operator.kernel_t0(-q, -qp, BOX)) <= 1e-15


def test_kernel_domain():
    with pytest.raises(DomainError):
        operator.kernel_t0(1.5, 0.0, BOX)


@given(q=coords, qp=coords, g=st.floats(0.05, 1.5).flatmap(lambda v: st.sampled_from([v, -v])))
def test_boundary_phase_kernel_hermitian(q, qp, g):
    box = BoxConfig(1.0, gamma=g)
    k = operator.kernel_tgamma(q, qp, box)
    assert abs(k - np.conj(operator.kernel_tgamma(qp, q, box))) <= 1e-14 * max(1.0, abs(k))


@given(q=coords, g=st.floats(0.05, 1.5))
def test_boundary_phase_kernel_diagonal(q, g):
    box = BoxConfig(1.0, gamma=g)
    expect = -box.mu * 2 * q * math.cos(g) / (4 * box.hbar * math.sin(g))
    assert operator.kernel_tgamma(q, q, box) == pytest.approx(expect, abs=1e-14)


def test_boundary_phase_kernel_independent_of_length():
    q, qp = 0.3, -0.7
    vals = [operator.kernel_tgamma(q, qp, BoxConfig(l, gamma=0.4)) for l in (1.0, 2.0, 50.0)]
    assert vals[0] == vals[1] == vals[2]


def test_boundary_phase_kernel_diverges_like_inverse_gamma():
    q, qp = 0.3, -0.7
    scaled = [g * operator.kernel_tgamma(q, qp, BoxConfig(1.0, gamma=g)) for g in (1e-2, 1e-4, 1e-6)]
    assert abs(scaled[2]) > 0.1
    # gamma T_gamma approaches its limit with an O(gamma) correction
    assert abs(scaled[1] - scaled[2]) <= 2e-4 * abs(scaled[2])
    assert abs(scaled[0] - scaled[2]) > abs(scaled[1] - scaled[2])


def test_boundary_phase_kernel_rejects_zero_gamma():
    with pytest.raises(DomainError):
        operator.kernel_tgamma(0.1, 0.2, BOX)
    assert operator.kernel_for(BOX) is operator.kernel_t0
    assert operator.kernel_for(BoxConfig(1.0, gamma=0.1)) is operator.kernel_tgamma


# ---------------------------------------------------------------------------
# Nystrom matrix
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, 0.7])
def test_nystrom_matrix_hermitian(gamma):
    box = BoxConfig(1.3, gamma=gamma)
    m = operator.nystrom(operator.kernel_for(box), box, 301)
    assert m.hermiticity_defect() <= 1e-14
    vals = np.linalg.eigvals(m.entries)
    assert np.max(np.abs(vals.imag)) <= 1e-12


def test_nystrom_rejects_tiny_grid():
    with pytest.raises(DomainError):
        operator.nystrom(operator.kernel_t0, BOX, 8)


def test_nystrom_midpoint_nodes_avoid_endpoints():
    m = operator.nystrom(operator.kernel_t0, BOX, 16)
    assert m.nodes[0] > -1 and m.nodes[-1] < 1
    assert np.allclose(np.diff(m.nodes), 2 / 16)


def test_frobenius_norm_square_integrable_kernel_rate():
    # the sgn(0) = 0 diagonal drops one cell per row: trace(M^2) falls short
    # of the double integral by h (mu / 4 hbar)^2 (8 l^3 / 3) to leading order
    box = BoxConfig(1.0)
    exact = frobenius_integral(box)
    for n in (500, 1000, 2000):
        m = operator.nystrom(operator.kernel_t0, box, n)
        h = 2 * box.l / n
        missing = h * (box.mu / (4 * box.hbar)) ** 2 * 8 * box.l**3 / 3
        trace = np.sum(np.abs(m.entries) ** 2)
        assert abs(exact - trace - missing) <= 2 * h * h


@pytest.mark.xfail(strict=True, reason="the zero diagonal makes trace(M^2) converge like O(h): "
                                       "2.1e-3 relative at 2000 nodes")
def test_frobenius_norm_within_1e3_at_2000_nodes():
    exact = frobenius_integral(BOX)
    trace = np.sum(np.abs(operator.nystrom(operator.kernel_t0, BOX, 2000).entries) ** 2)
    assert abs(trace - exact) / exact <= 1e-3


def test_quadratic_form_real():
    m = operator.nystrom(operator.kernel_t0, BOX, 400)
    psi = np.random.default_rng(7).standard_normal((400, 10))
    forms = np.einsum("ik,ij,jk->k", psi, m.entries, psi)
    assert np.max(np.abs(forms.imag) / np.linalg.norm(psi, axis=0) ** 2) <= 1e-12


# ---------------------------------------------------------------------------
# Oracle spectrum
# ---------------------------------------------------------------------------


def test_oracle_spectrum_symmetric():
    m = operator.nystrom(operator.kernel_t0, BOX, 800)
    vals = np.sort(np.linalg.eigvalsh(m.entries))
    assert np.max(np.abs(vals + vals[::-1])) <= 1e-10


def test_oracle_spectrum_matches_full_eigensolve():
    m = operator.nystrom(operator.kernel_t0, BOX, 400)
    pairs = operator.oracle_spectrum(m, 6)
    vals = np.array([v for v, _ in pairs])
    assert np.allclose(vals, operator.oracle_eigenvalues(m, 6), rtol=1e-12, atol=0)
    # de-weighted eigenvectors are unit-norm function samples
    for _, vec in pairs:
        assert np.dot(m.weights, np.abs(vec) ** 2) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        operator.oracle_spectrum(m, 401)


def test_extrapolated_spectrum_converged_in_nodes():
    a, raw_a = operator.extrapolated_eigenvalues(operator.kernel_t0, BOX, 1000, 10)
    b, raw_b = operator.extrapolated_eigenvalues(operator.kernel_t0, BOX, 2000, 10)
    assert np.max(np.abs(b - a) / np.abs(b)) <= 1e-6
    # the raw midpoint spectra move by O(h^2), about four times less per doubling
    assert np.max(np.abs(raw_b - raw_a) / np.abs(raw_b)) > 1e-5


def test_apply_kernel_on_constant():
    # (T0 1)(q) = (1 / 4i) int_{-1}^{1} [(q + x) sgn(q - x) - (q^2 - x^2)] dx
    q = np.linspace(-1.0, 1.0, 9)
    out = operator.apply_kernel(operator.kernel_t0, BOX, np.ones_like, q)
    below = q * (q + 1) + (q * q - 1) / 2
    above = q * (1 - q) + (1 - q * q) / 2
    exact = (below - above - (2 * q * q - 2.0 / 3.0)) / 4j
    assert np.allclose(out, exact, rtol=0, atol=1e-13)


def test_oracle_csv_writers():
    m = operator.nystrom(operator.kernel_t0, BOX, 64)
    pairs = operator.oracle_spectrum(m, 3)
    buf = io.StringIO()
    operator.write_oracle_csv(pairs, buf)
    assert buf.getvalue().splitlines()[0] == "rank,eigenvalue"
    buf = io.StringIO()
    operator.write_eigenvector_csv(m.nodes, pairs[0][1], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "node,re,im" and len(lines) == 65
