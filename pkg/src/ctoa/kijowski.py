"""
Kijowski's arrival-time distribution at the origin for free motion.

Two independent routes are provided. The momentum route integrates the
packet's momentum amplitude against ``sqrt(|p| / 2 pi mu hbar) exp(-i p^2 t /
2 mu hbar)`` over each half-line. The position route overlaps the packet with
the even and odd continuum eigenfunctions, written with parabolic cylinder
functions ``D_{1/2}``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError
from .quadrature import adaptive_integrate, oscillatory_rule, phase_rule
from .specfun import parabolic_cylinder_d_half
from .states import SUPPORT_WIDTHS

__all__ = [
    "Curve",
    "kijowski_density_momentum",
    "kijowski_density_position",
    "kijowski_density",
    "kijowski_accumulated",
    "position_eigenfunction",
    "switch_time",
    "write_curves_csv",
]

CURVE_KINDS = ("density", "accumulated", "integrated_flux")
MAX_NODES = 400_000
SWITCH_OSCILLATIONS = 500.0
_BLOCK = 2_000_000  # complex entries per vectorised chunk
# Gauss-Legendre points per panel on the momentum route
_PANEL_ORDER = 8


@dataclass(frozen=True)
class Curve:
    times: np.ndarray
    values: np.ndarray
    kind: str
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise DomainError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise DomainError("curve times must be strictly increasing")
        if self.kind not in CURVE_KINDS:
            raise DomainError(f"kind must be one of {CURVE_KINDS}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def check_invariants(self, label_is_kijowski=True):
        """Raise DomainError if the curve breaks its kind's invariants."""
        if self.kind == "accumulated":
            if np.any(np.diff(self.values) < -1e-10) or np.any(self.values > 1 + 1e-6):
                raise DomainError("accumulated curve must be nondecreasing and <= 1")
        if self.kind == "density" and label_is_kijowski and np.any(self.values < 0):
            raise DomainError("density must be nonnegative")


def write_curves_csv(curves, fh):
    writer = csv.writer(fh)
    writer.writerow(["t", "value", "kind", "label"])
    for c in curves:
        for t, v in zip(c.times, c.values):
            writer.writerow([repr(float(t)), repr(float(v)), c.kind, c.label])


# ---------------------------------------------------------------------------
# Momentum route
# ---------------------------------------------------------------------------


def _half_line_intervals(packet, alpha):
    """u-intervals (p = u^2) covering the support of psi~(alpha p), p > 0."""
    out = []
    for a, b in packet.momentum_support():
        if alpha < 0:
            a, b = -b, -a
        a = max(a, 0.0)
        if b > a:
            out.append((math.sqrt(a), math.sqrt(b)))
    return out


def _momentum_phase(packet, t_max):
    """Accumulated phase bound in u for exp(-i u^4 t / 2 mu hbar) psi~(u^2)."""
    mu, hbar = packet.mu, packet.hbar
    x_max = max(abs(c.x0) for c in packet.components)
    s_max = max(c.sigma for c in packet.components)
    a = (abs(t_max) + abs(packet.t0)) / (2 * mu * hbar)
    # psi~ carries phase p x0 / hbar; its envelope's log-derivative is at most
    # SUPPORT_WIDTHS * sigma / hbar on the support
    b = (x_max + SUPPORT_WIDTHS * s_max) / hbar

    def phase(u):
        u2 = u * u
        return a * u2 * u2 + b * u2

    return phase


def _momentum_amplitudes(packet, t, panels_per_oscillation, max_nodes):
    """Half-line amplitudes for alpha = +1, -1 at times ``t`` (1-D)."""
    mu, hbar = packet.mu, packet.hbar
    amps = []
    for alpha in (1.0, -1.0):
        iv = _half_line_intervals(packet, alpha)
        if not iv:
            amps.append(np.zeros(t.shape, dtype=complex))
            continue
        t_max = float(np.max(np.abs(t))) if t.size else 0.0
        phase = _momentum_phase(packet, t_max)
        n_osc = sum(phase(b) - phase(a) for a, b in iv) / (2 * math.pi)
        if panels_per_oscillation * n_osc * _PANEL_ORDER > max_nodes:
            raise AccuracyError(
                f"momentum route needs ~{int(n_osc)} oscillations at |t|={t_max:.3g}; "
                "use a coarser time or the position route",
                estimate=n_osc,
            )
        u, w = phase_rule(iv, phase, order=_PANEL_ORDER,
                          panels_per_oscillation=panels_per_oscillation)
        p = u * u
        base = w * 2.0 * p * packet.momentum(alpha * p) / math.sqrt(2 * math.pi * mu * hbar)
        chirp = -p * p / (2 * mu * hbar)
        out = np.empty(t.shape, dtype=complex)
        step = max(1, _BLOCK // max(1, u.size))
        for i in range(0, t.size, step):
            tb = t[i:i + step]
            out[i:i + step] = np.exp(1j * np.outer(tb, chirp)) @ base
        amps.append(out)
    return amps


def _grouped(t, fn, group=64):
    """Apply ``fn`` to groups of similar |t| so node counts track |t|."""
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    order = np.argsort(np.abs(flat), kind="stable")
    out = np.empty(flat.shape)
    for i in range(0, flat.size, group):
        idx = order[i:i + group]
        out[idx] = fn(flat[idx])
    return out.reshape(t.shape)


def kijowski_density_momentum(packet, t, panels_per_oscillation=8.0, max_nodes=MAX_NODES):
    """Kijowski density from the momentum amplitude.

    Each half-line integral is taken in ``u = sqrt(|p|)``, which removes the
    square-root endpoint behaviour, with Gauss-Legendre panels resolving
    every oscillation of ``p^2 t / 2 mu hbar`` by ``panels_per_oscillation``
    panels.
    """

    def fn(tb):
        a_pos, a_neg = _momentum_amplitudes(packet, tb, panels_per_oscillation, max_nodes)
        return np.abs(a_pos) ** 2 + np.abs(a_neg) ** 2

    res = _grouped(t, fn)
    return float(res) if np.ndim(t) == 0 else res


# ---------------------------------------------------------------------------
# Position route
# ---------------------------------------------------------------------------


def position_eigenfunction(t, parity, q, mu=1.0, hbar=1.0):
    """Even or odd continuum arrival-time eigenfunction at time ``t``.

    For ``t < 0`` the value is the complex conjugate of the value at ``-t``.
    ``t`` and ``q`` broadcast against each other.
    """
    if parity not in ("even", "odd"):
        raise DomainError(f"unknown parity {parity!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise DomainError("t = 0 is not allowed")
    q = np.asarray(q, dtype=float)
    t, q = np.broadcast_arrays(t, q)
    ta = np.abs(t)
    kappa = np.sqrt(mu / (hbar * ta))
    w = np.exp(0.25j * math.pi)
    sgn = 1.0 if parity == "even" else -1.0
    pref = np.exp(1j * (1 + 2 * sgn) * math.pi / 8) * 0.25 * np.sqrt(2 / (math.pi * ta)) * kappa**0.5
    z = w * kappa * q
    bracket = parabolic_cylinder_d_half(-z) + sgn * parabolic_cylinder_d_half(z)
    val = pref * np.exp(-1j * mu * q * q / (4 * hbar * ta)) * bracket
    val = np.where(t < 0, np.conj(val), val)
    return complex(val) if val.ndim == 0 else val


def _position_overlaps(packet, t, panels_per_oscillation):
    mu, hbar = packet.mu, packet.hbar
    iv = packet.position_support()
    q_max = max(max(abs(a), abs(b)) for a, b in iv)
    t_min = float(np.min(np.abs(t)))
    rate = packet.position_rate(mu * q_max / (hbar * t_min))
    q, w = oscillatory_rule(iv, rate, order=8, panels_per_oscillation=panels_per_oscillation)
    psi = packet.position(q) * w
    out = {}
    for parity in ("even", "odd"):
        phi = position_eigenfunction(t[:, None], parity, q[None, :], mu, hbar)
        out[parity] = np.conj(phi) @ psi
    return out


def kijowski_density_position(packet, t, panels_per_oscillation=2.0, parts=False):
    """Kijowski density from even and odd eigenfunction overlaps.

    With ``parts=True`` returns ``(even_term, odd_term)`` instead of the sum.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr == 0):
        raise DomainError("t = 0 is not allowed on the position route")
    flat = t_arr.ravel()
    even = np.empty(flat.shape)
    odd = np.empty(flat.shape)
    order = np.argsort(np.abs(flat), kind="stable")
    for i in range(0, flat.size, 32):
        idx = order[i:i + 32]
        ov = _position_overlaps(packet, flat[idx], panels_per_oscillation)
        even[idx] = np.abs(ov["even"]) ** 2
        odd[idx] = np.abs(ov["odd"]) ** 2
    even = even.reshape(t_arr.shape)
    odd = odd.reshape(t_arr.shape)
    if parts:
        return (float(even), float(odd)) if t_arr.ndim == 0 else (even, odd)
    tot = even + odd
    return float(tot) if t_arr.ndim == 0 else tot


# ---------------------------------------------------------------------------
# Dispatcher and accumulated distribution
# ---------------------------------------------------------------------------


def switch_time(packet, oscillations=SWITCH_OSCILLATIONS):
    """|t| beyond which the position route is cheaper than the momentum route."""
    p = packet.max_abs_momentum()
    return 4.0 * math.pi * packet.mu * packet.hbar * oscillations / (p * p)


def kijowski_density(packet, t, t_switch=None):
    """Momentum route for |t| <= t_switch, position route beyond."""
    if t_switch is None:
        t_switch = switch_time(packet)
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape)
    near = np.abs(t) <= t_switch
    if np.any(near):
        out[near] = kijowski_density_momentum(packet, t[near])
    if np.any(~near):
        out[~near] = kijowski_density_position(packet, t[~near])
    return float(out) if out.ndim == 0 else out


def _classical_times(packet):
    return sorted(-c.x0 * packet.mu / c.p0 - packet.t0 for c in packet.components if c.p0 != 0)


def _time_scale(packet):
    """Rough width of the arrival-time peak of the narrowest component."""
    scales = []
    for c in packet.components:
        sp = packet.hbar / (2 * c.sigma)
        v = abs(c.p0) + sp
        scales.append(packet.mu * (c.sigma + abs(c.x0) * sp / v) / v)
    return min(scales)


def kijowski_accumulated(packet, t, t_switch=None, tol=1e-11, max_panels=20000):
    """F^K(t), the integral of the Kijowski density from -infinity to t.

    The integral is split at ``+-T`` (``T = t_switch``). Beyond ``T`` the
    substitution ``|t| = 1 / u^2`` maps the |t|^{-3/2} tail onto a finite
    interval with a smooth integrand; on [-T, T] adaptive Gauss-Kronrod
    starts from panels no wider than the packet's arrival-time scale.
    """
    if t_switch is None:
        t_switch = switch_time(packet)
    T = t_switch
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.ravel()

    def dens(x):
        return kijowski_density(packet, x, t_switch=T)

    def tail_neg(u):
        return dens(-1.0 / (u * u)) * 2.0 / u**3

    def tail_pos(u):
        return dens(1.0 / (u * u)) * 2.0 / u**3

    def integrate(f, a, b, initial=1):
        val, _ = adaptive_integrate(f, a, b, abs_tol=tol, rel_tol=0.0,
                                    initial=initial, max_panels=max_panels)
        return val

    u_T = 1.0 / math.sqrt(T)
    base = integrate(tail_neg, 0.0, u_T, initial=8)
    scale = _time_scale(packet)
    # breakpoints: the window ends and classical arrival times inside it
    marks = [-T, 0.0] + [x for x in _classical_times(packet) if -T < x < T] + [T]
    order = np.argsort(flat, kind="stable")
    out = np.empty(flat.shape)
    acc = base
    cur = -T
    seg_marks = sorted(set(marks))
    for i in order:
        ti = flat[i]
        if ti <= -T:
            out[i] = integrate(tail_neg, 0.0, 1.0 / math.sqrt(-ti), initial=8)
            continue
        stop = min(ti, T)
        if stop > cur:
            pts = [cur] + [m for m in seg_marks if cur < m < stop] + [stop]
            for a, b in zip(pts[:-1], pts[1:]):
                n0 = max(4, min(400, int(math.ceil(2 * (b - a) / scale))))
                acc += integrate(dens, a, b, initial=n0)
            cur = stop
        val = acc
        if ti > T:
            val = acc + integrate(tail_pos, 1.0 / math.sqrt(ti), u_T, initial=8)
        out[i] = val
    out = out.reshape(t_arr.shape)
    return float(out) if out.ndim == 0 else out
