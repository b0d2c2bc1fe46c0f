"""
Arrival-time distribution for motion confined to [-l, l].

The accumulated probability is a step function built from the overlaps of
the packet with the confined time-of-arrival eigenfunctions. Helpers here
compare it with Kijowski's continuum distribution and provide the large-l
limit of the odd eigenfunctions.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import spectrum
from .errors import AccuracyError, DomainError
from .kijowski import Curve, kijowski_accumulated, kijowski_density
from .quadrature import gauss_legendre, oscillatory_rule
from .specfun import _jv

__all__ = [
    "SpectralWeights",
    "spectral_weights",
    "accumulated_discrete",
    "density_histogram",
    "limit_eigenfunction_odd",
    "limit_density_odd",
    "nearest_record",
    "KijowskiTable",
    "sup_gap",
    "convergence_study",
    "write_convergence_csv",
]

_BLOCK_ROWS = 256
# the GL rule for overlaps: 4-point panels, 8 panels per oscillation
_ORDER = 4
_PPO = 8.0


@dataclass(frozen=True)
class SpectralWeights:
    """Weights per record; ``captured_norm`` is their sum in eigenvalue order."""

    records: tuple
    weights: np.ndarray
    box: object = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.records),):
            raise DomainError("one weight per record required")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        tau = np.array([r.tau for r in self.records])
        order = np.argsort(tau, kind="stable")
        object.__setattr__(self, "_tau_sorted", tau[order])
        object.__setattr__(self, "_w_sorted", w[order])
        object.__setattr__(self, "_cum", np.cumsum(w[order]))

    @property
    def captured_norm(self):
        return float(self._cum[-1]) if self._cum.size else 0.0

    @property
    def taus(self):
        return np.array([r.tau for r in self.records])

    def count_per_parity(self):
        return max(r.n for r in self.records)


def _support_check(packet, box):
    for a, b in packet.position_support():
        if a < -box.l or b > box.l:
            raise DomainError(
                f"packet support [{a:.4g}, {b:.4g}] is not inside [-{box.l}, {box.l}]"
            )


def _overlaps(packet, box, parity, rho, norm, panels_per_oscillation=_PPO):
    """<phi^+|psi> and <phi^-|psi> for a block of roots."""
    q_iv = packet.position_support()
    q_max = max(max(abs(a), abs(b)) for a, b in q_iv)
    rate = packet.position_rate(2.0 * float(np.max(rho)) * q_max / box.l**2)
    q, w = oscillatory_rule(q_iv, rate, order=_ORDER,
                            panels_per_oscillation=panels_per_oscillation)
    psi = packet.position(q) * w
    phi = spectrum.eigenfunction_matrix(parity, rho, norm, box, q)
    plus = np.conj(phi) @ psi
    minus = phi @ psi  # phi^- = conj(phi^+)
    return plus, minus


def _initial_count(packet, box):
    """Roots per parity reaching down to the earliest plausible arrival."""
    q_lo = min(min(abs(a), abs(b)) if a * b > 0 else 0.0 for a, b in _core_support(packet))
    p_hi = max(abs(c.p0) + 5.0 * packet.hbar / (2 * c.sigma) for c in packet.components)
    q_lo = max(q_lo, 1e-3 * box.l)
    tau_min = packet.mu * q_lo / p_hi
    rho_max = box.rho_of_tau(tau_min)
    return max(16, int(rho_max / math.pi) + 8)


def _core_support(packet):
    return [(c.x0 - 5 * c.sigma, c.x0 + 5 * c.sigma) for c in packet.components]


def spectral_weights(packet, box, count_per_parity=None, tol=1e-4, max_count=40000):
    """Weights |<phi|psi>|^2 for both parities and sign branches, n = 1..count.

    With ``count_per_parity=None`` the count starts at an estimate from the
    earliest classical arrival and grows by 50% until the captured norm is
    within ``tol`` of one (or ``max_count`` is reached, which warns).
    """
    _support_check(packet, box)
    count = count_per_parity or _initial_count(packet, box)
    auto = count_per_parity is None
    rows = {}
    while True:
        rec, wts = [], []
        for parity in ("even", "odd"):
            have = rows.get(parity)
            start = 0 if have is None else len(have[0])
            roots = spectrum.odd_roots(count) if parity == "odd" else spectrum.even_roots(count)
            norms = spectrum.normalization(parity, roots, box)
            new_p, new_m = [], []
            for i in range(start, count, _BLOCK_ROWS):
                sl = slice(i, min(count, i + _BLOCK_ROWS))
                p, m = _overlaps(packet, box, parity, roots[sl], norms[sl])
                new_p.append(np.abs(p) ** 2)
                new_m.append(np.abs(m) ** 2)
            wp = np.concatenate(([] if have is None else [have[1]]) + new_p)
            wm = np.concatenate(([] if have is None else [have[2]]) + new_m)
            rows[parity] = (roots, wp, wm, norms)
            tau = box.tau_of_rho(roots)
            for n in range(count):
                rec.append(spectrum.EigenRecord(parity, n + 1, float(roots[n]), float(tau[n]),
                                                float(norms[n]), 1))
                wts.append(wp[n])
                rec.append(spectrum.EigenRecord(parity, n + 1, float(roots[n]), -float(tau[n]),
                                                float(norms[n]), -1))
                wts.append(wm[n])
        captured = float(np.sum(wts))
        if not auto or captured >= 1.0 - tol:
            break
        if count >= max_count:
            warnings.warn(
                f"captured norm {captured:.6f} falls short of 1 by {1 - captured:.2e} "
                f"with {count} eigenfunctions per parity",
                RuntimeWarning,
                stacklevel=2,
            )
            break
        count = min(max_count, int(1.5 * count))
    return SpectralWeights(tuple(rec), np.array(wts), box)


def accumulated_discrete(weights, t):
    """Sum of weights with tau <= t (right-continuous)."""
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(weights._tau_sorted, t, side="right")
    cum = np.concatenate(([0.0], weights._cum))
    res = cum[idx]
    return float(res) if res.ndim == 0 else res


def _left_limit(weights, t):
    idx = np.searchsorted(weights._tau_sorted, np.asarray(t, dtype=float), side="left")
    cum = np.concatenate(([0.0], weights._cum))
    return cum[idx]


def density_histogram(weights, bin_width=None, window=None, label="discrete"):
    """Weights binned by tau, divided by the bin width.

    The default bin width is ten local eigenvalue spacings at the window
    centre. Without a window the bins cover every eigenvalue. The returned
    curve's ``flags`` mark bins holding fewer than three eigenvalues.
    """
    taus = weights._tau_sorted
    if window is None:
        lo, hi = float(taus[0]), float(taus[-1])
    else:
        lo, hi = map(float, window)
    if bin_width is None:
        if weights.box is None:
            raise DomainError("bin_width required when the box is unknown")
        bin_width = 10.0 * weights.box.spacing(0.5 * (lo + hi))
    if not bin_width > 0:
        raise DomainError("bin_width must be positive")
    if window is None:
        # every eigenvalue, including the largest, falls in a bin
        n_bins = max(1, int(math.floor((hi - lo) / bin_width)) + 1)
    else:
        # a window that is a whole number of bins up to rounding gets no extra bin
        n_bins = max(1, int(math.ceil((hi - lo) / bin_width - 1e-9)))
    edges = lo + bin_width * np.arange(n_bins + 1)
    w_sorted = weights._w_sorted
    idx = np.searchsorted(edges, taus, side="right") - 1
    keep = (idx >= 0) & (idx < n_bins)
    mass = np.bincount(idx[keep], weights=w_sorted[keep], minlength=n_bins)
    counts = np.bincount(idx[keep], minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    curve = Curve(centers, mass / bin_width, "density", label)
    object.__setattr__(curve, "flags", counts < 3)
    object.__setattr__(curve, "bin_width", bin_width)
    return curve


def nearest_record(records, t, parity, sign=None):
    """Record of the given parity minimising |tau - t|; ties go to smaller n."""
    cand = [r for r in records if r.parity == parity and (sign is None or r.sign == sign)]
    if not cand:
        raise DomainError("no records of the requested parity/sign")
    return min(cand, key=lambda r: (abs(r.tau - t), r.n))


# ---------------------------------------------------------------------------
# Large-l limit of the odd eigenfunctions
# ---------------------------------------------------------------------------


def limit_eigenfunction_odd(t, q, mu=1.0, hbar=1.0):
    """Limit of the confined odd eigenfunctions at eigenvalue ``t``.

    For ``t < 0`` the value is the conjugate of the value at ``-t``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise DomainError("t = 0 is not allowed")
    q = np.asarray(q, dtype=float)
    t, q = np.broadcast_arrays(t, q)
    ta = np.abs(t)
    a = mu / (4 * hbar * ta)
    xi = a * q * q
    out = np.zeros(xi.shape, dtype=complex)
    pos = xi > 0
    x = xi[pos]
    bessel = _jv(-0.25, x) - 1j * _jv(0.75, x)
    out[pos] = (math.sqrt(2 * hbar / mu) * a[pos] ** 1.25 * q[pos] * x**0.25
                * np.exp(-1j * x) * bessel)
    out = np.where(t < 0, np.conj(out), out)
    return complex(out) if out.ndim == 0 else out


def limit_density_odd(packet, t, panels_per_oscillation=_PPO):
    """|<phi_t^odd|psi>|^2 with the limit eigenfunction (odd arrival density)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    iv = packet.position_support()
    q_max = max(max(abs(a), abs(b)) for a, b in iv)
    t_min = float(np.min(np.abs(t_arr)))
    rate = packet.position_rate(packet.mu * q_max / (packet.hbar * t_min))
    q, w = oscillatory_rule(iv, rate, order=_ORDER, panels_per_oscillation=panels_per_oscillation)
    psi = packet.position(q) * w
    phi = limit_eigenfunction_odd(t_arr[:, None], q[None, :], packet.mu, packet.hbar)
    res = np.abs(np.conj(phi) @ psi) ** 2
    return float(res[0]) if np.ndim(t) == 0 else res


# ---------------------------------------------------------------------------
# Comparison with Kijowski
# ---------------------------------------------------------------------------


class KijowskiTable:
    """F^K on a window, interpolated by cubic Hermite with the density as slope.

    F^K is integrated once up to the window start. The window is then
    bisected adaptively: an interval is accepted when an 8-point
    Gauss-Legendre rule on its halves agrees with a 5-point rule on the whole
    interval, and the Hermite prediction at the midpoint agrees with the
    quadrature value, both within ``tol``.
    """

    def __init__(self, packet, window, tol=1e-10, initial=64, max_intervals=200000):
        lo, hi = map(float, window)
        if not hi > lo:
            raise DomainError("window must have positive length")
        x8, w8 = gauss_legendre(8)
        x5, w5 = gauss_legendre(5)

        def dens(t):
            t = np.where(t == 0, 1e-12 * (hi - lo), t)
            return kijowski_density(packet, t)

        edges = np.linspace(lo, hi, initial + 1)
        todo = np.stack([edges[:-1], edges[1:]], axis=1)
        done_a, done_inc, done_err = [], [], []
        n_seen = 0
        while todo.size:
            a, b = todo[:, :1], todo[:, 1:]
            m = 0.5 * (a + b)
            h = 0.5 * (b - a)
            nodes = np.concatenate([
                0.5 * (a + m) + 0.5 * h * x8,
                0.5 * (m + b) + 0.5 * h * x8,
                m + h * x5,
                np.concatenate([a, b], axis=1),
            ], axis=1)
            vals = dens(nodes.ravel()).reshape(nodes.shape)
            left = 0.5 * h[:, 0] * (vals[:, :8] @ w8)
            right = 0.5 * h[:, 0] * (vals[:, 8:16] @ w8)
            coarse = h[:, 0] * (vals[:, 16:21] @ w5)
            pa, pb = vals[:, 21], vals[:, 22]
            inc = left + right
            # cubic Hermite value at the midpoint relative to F(a)
            herm = 0.5 * inc + 0.25 * h[:, 0] * (pa - pb)
            err = np.maximum(np.abs(inc - coarse), np.abs(herm - left))
            ok = err <= tol
            n_seen += len(todo)
            done_a.append(a[ok, 0])
            done_inc.append(inc[ok])
            done_err.append(err[ok])
            bad = todo[~ok]
            mid = 0.5 * (bad[:, 0] + bad[:, 1])
            todo = np.concatenate([np.stack([bad[:, 0], mid], 1), np.stack([mid, bad[:, 1]], 1)])
            if n_seen + len(todo) > max_intervals:
                raise AccuracyError("F^K table refinement exceeded its interval budget")
        starts = np.concatenate(done_a)
        incs = np.concatenate(done_inc)
        order = np.argsort(starts)
        grid = np.concatenate([starts[order], [hi]])
        self.error_bound = float(np.sum(np.concatenate(done_err)))
        self.grid = grid
        self.F = kijowski_accumulated(packet, lo) + np.concatenate(([0.0], np.cumsum(incs[order])))
        self.density = dens(grid)
        self._spline = CubicHermiteSpline(grid, self.F, self.density)
        self.window = (lo, hi)

    def __call__(self, t):
        return self._spline(np.asarray(t, dtype=float))


def sup_gap(weights, table, window=None):
    """Exact sup of |F^(l) - F^K| over ``window`` (default: the table window).

    F^(l) is constant between eigenvalues and F^K is monotone, so the sup is
    attained at a window end or at a one-sided limit at an eigenvalue.
    """
    lo, hi = table.window if window is None else map(float, window)
    if lo < table.window[0] or hi > table.window[1] or not hi > lo:
        raise DomainError("gap window must lie inside the table window")
    taus = weights._tau_sorted
    inside = taus[(taus >= lo) & (taus <= hi)]
    pts = np.array([lo, hi] + list(inside))
    right = np.abs(accumulated_discrete(weights, pts) - table(pts))
    left = np.abs(_left_limit(weights, inside) - table(inside))
    return float(max(right.max(), left.max() if left.size else 0.0))


def convergence_study(packet, box_lengths, window, t_grid=None, tol=1e-4, table_tol=1e-8):
    """For each l: exact sup gap over ``window`` and the captured norm.

    Returns rows ``{"l", "sup_norm_diff", "captured_norm", "grid_sup"}``; the
    ``grid_sup`` entry is the sup over ``t_grid`` when given. Monotonicity is
    reported in the ``"decreasing"`` key of the last row, not asserted.
    """
    from .spectrum import BoxConfig

    if not box_lengths:
        raise DomainError("box_lengths must not be empty")
    table = KijowskiTable(packet, window, tol=table_tol)
    rows = []
    for l in box_lengths:
        box = BoxConfig(float(l), packet.mu, packet.hbar)
        sw = spectral_weights(packet, box, tol=tol)
        row = {"l": float(l), "sup_norm_diff": sup_gap(sw, table), "captured_norm": sw.captured_norm}
        if t_grid is not None:
            tg = np.asarray(t_grid, dtype=float)
            row["grid_sup"] = float(np.max(np.abs(accumulated_discrete(sw, tg) - table(tg))))
        rows.append(row)
    diffs = [r["sup_norm_diff"] for r in rows]
    rows[-1]["decreasing"] = all(b < a for a, b in zip(diffs[:-1], diffs[1:]))
    return rows


def write_convergence_csv(rows, fh):
    writer = csv.writer(fh)
    writer.writerow(["l", "sup_norm_diff", "captured_norm"])
    for r in rows:
        writer.writerow([repr(r["l"]), repr(r["sup_norm_diff"]), repr(r["captured_norm"])])
