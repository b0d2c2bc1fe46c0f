"""
Analytic spectrum of the periodic (gamma = 0) confined time-of-arrival operator.

Odd eigenfunctions are ``A_n q f(s_n q^2 / l^2)`` with ``s_n`` the zeros of
``J_{-1/4}``; even ones are ``B_n g(r_n q^2 / l^2)`` with ``r_n`` the roots of
``J_{-3/4}(r) + (2/3) J_{5/4}(r) + J_{1/4}(r) / r``. Eigenvalues are
``+-mu l^2 / (4 rho hbar)``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import AccuracyError, DomainError, UnsupportedError
from .quadrature import adaptive_integrate
from .specfun import _jv, gamma

__all__ = [
    "BoxConfig",
    "EigenRecord",
    "odd_roots",
    "even_roots",
    "even_secular",
    "eigenvalues",
    "eigenfunction",
    "eigenfunction_matrix",
    "normalization",
    "records_table",
    "write_spectrum_csv",
]

PARITIES = ("even", "odd")

# xi -> 0 limits of xi^{1/4} J_{-1/4}(xi) and xi^{3/4} J_{-3/4}(xi)
_F0 = 2.0**0.25 / gamma(0.75)
_G0 = 2.0**0.75 / gamma(0.25)


@dataclass(frozen=True)
class BoxConfig:
    """Particle of mass ``mu`` on [-l, l] with boundary phase ``gamma``."""

    l: float
    mu: float = 1.0
    hbar: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise DomainError("box half-length l must be positive")
        if not (self.mu > 0 and self.hbar > 0):
            raise DomainError("mu and hbar must be positive")
        if abs(self.gamma) > math.pi / 2:
            raise DomainError("|gamma| must not exceed pi/2")

    def tau_of_rho(self, rho):
        return self.mu * self.l**2 / (4.0 * np.asarray(rho) * self.hbar)

    def rho_of_tau(self, tau):
        return self.mu * self.l**2 / (4.0 * np.abs(tau) * self.hbar)

    def spacing(self, tau):
        """Asymptotic eigenvalue spacing near ``tau`` within one parity."""
        return 4.0 * math.pi * self.hbar * tau**2 / (self.mu * self.l**2)


@dataclass(frozen=True)
class EigenRecord:
    parity: str
    n: int
    rho: float
    tau: float
    norm_const: float
    sign: int  # +1 or -1

    def __post_init__(self):
        if self.parity not in PARITIES:
            raise DomainError(f"parity must be one of {PARITIES}")
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")


# ---------------------------------------------------------------------------
# Secular roots
# ---------------------------------------------------------------------------


def odd_roots(count):
    """First ``count`` positive zeros s_n of J_{-1/4}."""
    return specfun.bessel_j_zeros(-0.25, count)


def even_secular(r):
    """Left-hand side of the even secular equation."""
    r = np.asarray(r, dtype=float)
    return _jv(-0.75, r) + (2.0 / 3.0) * _jv(1.25, r) + _jv(0.25, r) / r


def _even_secular_derivative(r):
    def dj(nu):
        return 0.5 * (_jv(nu - 1.0, r) - _jv(nu + 1.0, r))

    return dj(-0.75) + (2.0 / 3.0) * dj(1.25) + dj(0.25) / r - _jv(0.25, r) / r**2


def _sign_changes(step, r_max):
    grid = np.arange(step, r_max + step, step)
    vals = even_secular(grid)
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    return grid[idx], grid[idx + 1], vals[idx]


def even_roots(count, step=math.pi / 8):
    """First ``count`` positive roots r_n of the even secular equation.

    Sign changes are located on a grid of spacing ``step``; the scan is
    repeated at half the spacing and must find the same cells, otherwise it
    is refined further.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    r_max = (count + 2) * math.pi
    for _ in range(4):
        a, b, fa = _sign_changes(step, r_max)
        a2, _, _ = _sign_changes(step / 2, r_max)
        if len(a2) == len(a):
            break
        step /= 2
    else:
        raise AccuracyError("even secular scan still ambiguous after refinement")
    if len(a) < count:
        raise AccuracyError(f"found only {len(a)} even roots below {r_max:.1f}")
    a, b, fa = a[:count], b[:count], fa[:count]
    roots = specfun._polish(even_secular, _even_secular_derivative, a, b, fa, 0.5 * (a + b))
    return roots


# ---------------------------------------------------------------------------
# Eigenfunction profiles
# ---------------------------------------------------------------------------


def _f_plus(xi):
    """f^+(xi) = exp(-i xi) xi^{1/4} [J_{-1/4}(xi) - i J_{3/4}(xi)], xi >= 0."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape, dtype=complex)
    pos = xi > 0
    x = xi[pos]
    q = x**0.25
    out[pos] = np.exp(-1j * x) * q * (_jv(-0.25, x) - 1j * _jv(0.75, x))
    out[~pos] = _F0
    return out


def _g_plus(xi, r):
    """g^+(xi) including the additive constant fixed by the root r."""
    xi = np.asarray(xi, dtype=float)
    r = np.asarray(r, dtype=float)
    xi, r = np.broadcast_arrays(xi, r)
    out = np.empty(xi.shape, dtype=complex)
    pos = xi > 0
    x = xi[pos]
    q = x**0.75
    out[pos] = np.exp(-1j * x) * q * (_jv(-0.75, x) - 1j * _jv(0.25, x))
    out[~pos] = _G0
    rr = np.unique(r)
    if rr.size == 1:
        c = np.exp(-1j * rr[0]) * _jv(0.25, rr) / rr**0.25
        return out + c[0]
    const = np.exp(-1j * r) * _jv(0.25, r) / r**0.25
    return out + const


def _lommel(nu, r):
    """Integral of x J_nu(x)^2 over [0, r]."""
    j = _jv(nu, r)
    dj = 0.5 * (_jv(nu - 1.0, r) - _jv(nu + 1.0, r))
    return 0.5 * r * r * (dj * dj + (1.0 - nu * nu / (r * r)) * j * j)


def normalization(parity, rho, box, method="closed"):
    """Normalisation constant (real, positive) of the eigenfunction.

    ``method="closed"`` uses exact Bessel-integral identities; for the odd
    sector this is ``1 / sqrt(l^3 J_{3/4}(s)^2 sqrt(s))``. ``"quadrature"``
    integrates ``|phi|^2`` over [-l, l] adaptively (relative error 1e-11).
    """
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho_arr <= 0):
        raise DomainError("rho must be positive")
    l = box.l
    if method == "closed":
        if parity == "odd":
            j34 = _jv(0.75, rho_arr)
            res = 1.0 / np.sqrt(l**3 * j34**2 * np.sqrt(rho_arr))
        elif parity == "even":
            r = rho_arr
            sq = (l / np.sqrt(r)) * (_lommel(-0.75, r) + _lommel(0.25, r))
            sq = sq + 4.0 * l * _jv(0.25, r) ** 2 / np.sqrt(r)
            res = 1.0 / np.sqrt(sq)
        else:
            raise DomainError(f"unknown parity {parity!r}")
    elif method == "quadrature":
        res = np.array([1.0 / math.sqrt(_norm_quadrature(parity, float(r), l)) for r in rho_arr])
    else:
        raise DomainError(f"unknown method {method!r}")
    return float(res[0]) if np.ndim(rho) == 0 else res


def _norm_quadrature(parity, rho, l):
    # integrate over [0, l] in q and double; the xi-phase is 2 rho q^2 / l^2
    if parity == "odd":
        def f(q):
            return np.abs(q * _f_plus(rho * q * q / l**2)) ** 2
    elif parity == "even":
        def f(q):
            return np.abs(_g_plus(rho * q * q / l**2, rho)) ** 2
    else:
        raise DomainError(f"unknown parity {parity!r}")
    n_init = max(4, int(4 * rho / math.pi))
    val, err = adaptive_integrate(f, 0.0, l, abs_tol=0.0, rel_tol=1e-12,
                                  initial=n_init, max_panels=200 * n_init + 20000)
    if err > 1e-9 * abs(val):
        raise AccuracyError("normalisation quadrature did not converge", estimate=err / val)
    return 2.0 * val


def eigenvalues(box, parity, count):
    """2 * count records (both signs), |tau| decreasing with n."""
    if box.gamma != 0:
        raise UnsupportedError(
            "analytic spectrum exists only for gamma = 0; use operator.nystrom"
        )
    if parity == "odd":
        rho = odd_roots(count)
    elif parity == "even":
        rho = even_roots(count)
    else:
        raise DomainError(f"unknown parity {parity!r}")
    norm = normalization(parity, rho, box)
    tau = box.tau_of_rho(rho)
    out = []
    for n, (r, t, c) in enumerate(zip(rho, tau, norm), start=1):
        for sign in (1, -1):
            out.append(EigenRecord(parity, n, float(r), float(sign * t), float(c), sign))
    return out


def eigenfunction_matrix(parity, rho, norm, box, q):
    """phi^+ for each root in ``rho`` (rows) at positions ``q`` (columns).

    phi^- is the complex conjugate of phi^+ for real normalisation constants.
    """
    rho = np.asarray(rho, dtype=float)[:, None]
    q = np.asarray(q, dtype=float)[None, :]
    xi = rho * q * q / box.l**2
    norm = np.asarray(norm, dtype=float)[:, None]
    if parity == "odd":
        return norm * q * _f_plus(xi)
    return norm * _g_plus(xi, np.broadcast_to(rho, xi.shape))


def eigenfunction(record, box, q):
    """Value of the eigenfunction described by ``record`` at ``q``."""
    qa = np.asarray(q, dtype=float)
    if np.any(np.abs(qa) > box.l * (1 + 1e-12)):
        raise DomainError("eigenfunction evaluated outside [-l, l]")
    vals = eigenfunction_matrix(record.parity, [record.rho], [record.norm_const], box,
                                np.atleast_1d(qa))[0]
    if record.sign < 0:
        vals = np.conj(vals)
    return complex(vals[0]) if qa.ndim == 0 else vals


def records_table(records):
    return [
        {
            "parity": r.parity,
            "n": r.n,
            "sign": "plus" if r.sign > 0 else "minus",
            "rho": repr(r.rho),
            "tau": repr(r.tau),
            "norm_const": repr(r.norm_const),
        }
        for r in records
    ]


def write_spectrum_csv(records, fh):
    writer = csv.DictWriter(fh, fieldnames=["parity", "n", "sign", "rho", "tau", "norm_const"])
    writer.writeheader()
    writer.writerows(records_table(records))
