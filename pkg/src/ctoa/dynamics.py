"""
Unitary free evolution in the periodic box and on the line.

Box states are expanded in the plane waves ``exp(i pi m q / l) / sqrt(2 l)``
and evolved by exact phases. Coefficients are computed with an FFT whose
endpoint corrections make the rule exact for cubic integrands, so states
that are not periodic (the odd time-of-arrival eigenfunctions jump across the
wall) are still expanded accurately.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError
from .quadrature import gauss_legendre, panel_rule
from .states import SUPPORT_WIDTHS

__all__ = [
    "ModeExpansion",
    "expand",
    "evolve_box",
    "evolve_free",
    "density_diagnostics",
    "Diagnostics",
    "CollapseScan",
    "collapse_scan",
    "flux_at_origin",
    "integrated_flux",
    "backflow_intervals",
    "right_probability",
    "negative_momentum_probability",
    "endpoint_corrected_fourier",
    "write_snapshot_csv",
    "write_diagnostics_csv",
    "write_flux_csv",
]


@dataclass(frozen=True)
class ModeExpansion:
    """Amplitudes c_m for m = -M..M of a state in the periodic box."""

    coefficients: np.ndarray
    box: object
    t: float = 0.0
    tail: float = 0.0
    norm_squared: float = 1.0
    M: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise DomainError("coefficients must have odd length 2M+1")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "M", (c.size - 1) // 2)

    @property
    def modes(self):
        return np.arange(-self.M, self.M + 1)

    @property
    def energies(self):
        b = self.box
        m = self.modes
        return (b.hbar * math.pi * m) ** 2 / (2 * b.mu * b.l**2)

    def coefficient(self, m):
        return self.coefficients[m + self.M]

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def evaluate(self, q, derivative=False):
        """psi(q) (or dpsi/dq) by direct summation."""
        q = np.asarray(q, dtype=float)
        k = math.pi * self.modes / self.box.l
        c = self.coefficients * (1j * k if derivative else 1.0)
        flat = q.ravel()
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, 2_000_000 // c.size)
        for i in range(0, flat.size, step):
            out[i:i + step] = np.exp(1j * np.outer(flat[i:i + step], k)) @ c
        return (out / math.sqrt(2 * self.box.l)).reshape(q.shape)

    def grid_values(self, n_points=None):
        """psi on the uniform periodic grid q_j = -l + 2 l j / N via one FFT."""
        M = self.M
        n = n_points or 1 << int(math.ceil(math.log2(4 * M + 2)))
        if n < 2 * M + 1:
            raise DomainError("grid too coarse for the mode range")
        buf = np.zeros(n, dtype=complex)
        m = self.modes
        # exp(i pi m q_j / l) = (-1)^m exp(2 pi i m j / N)
        buf[m % n] = self.coefficients * np.where(m % 2 == 0, 1.0, -1.0)
        vals = np.fft.ifft(buf) * n / math.sqrt(2 * self.box.l)
        q = -self.box.l + 2 * self.box.l * np.arange(n) / n
        return q, vals


# ---------------------------------------------------------------------------
# Endpoint-corrected Fourier integrals
# ---------------------------------------------------------------------------


def _dft_weights(theta):
    """W and the cubic endpoint corrections alpha_0..alpha_3 at angle theta."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    small = np.abs(th) < 5e-2
    t = np.where(small, 1.0, th)
    t2, t4 = t * t, t**4
    c, s = np.cos(t), np.sin(t)
    c2, s2 = np.cos(2 * t), np.sin(2 * t)
    W = (6 + t2) / (3 * t4) * (3 - 4 * c + c2)
    a0 = ((-42 + 5 * t2 + (6 + t2) * (8 * c - c2)) + 1j * (-12 * t + 6 * t2 * t + (6 + t2) * s2)) / (6 * t4)
    a1 = ((14 * (3 - t2) - 7 * (6 + t2) * c) + 1j * (30 * t - 5 * (6 + t2) * s)) / (6 * t4)
    a2 = ((-4 * (3 - t2) + 2 * (6 + t2) * c) + 1j * (-12 * t + 2 * (6 + t2) * s)) / (3 * t4)
    a3 = ((2 * (3 - t2) - (6 + t2) * c) + 1j * (6 * t - (6 + t2) * s)) / (6 * t4)
    if np.any(small):
        x = th[small]
        x2, x4, x6 = x * x, x**4, x**6
        W[small] = 1 - 11 * x4 / 720 + 23 * x6 / 15120
        a0[small] = (-2 / 3 + x2 / 45 + 103 * x4 / 15120 - 169 * x6 / 226800
                     + 1j * x * (2 / 45 + 2 * x2 / 105 - 8 * x4 / 2835 + 86 * x6 / 467775))
        a1[small] = (7 / 24 - 7 * x2 / 180 + 5 * x4 / 3456 - 7 * x6 / 259200
                     + 1j * x * (7 / 72 - x2 / 168 + 11 * x4 / 72576 - 13 * x6 / 5987520))
        a2[small] = (-1 / 6 + x2 / 45 - 5 * x4 / 6048 + x6 / 64800
                     + 1j * x * (-7 / 90 + x2 / 210 - 11 * x4 / 90720 + 13 * x6 / 7484400))
        a3[small] = (1 / 24 - x2 / 180 + 5 * x4 / 24192 - x6 / 259200
                     + 1j * x * (7 / 360 - x2 / 840 + 11 * x4 / 362880 - 13 * x6 / 29937600))
    shape = np.shape(theta)
    return W.reshape(shape), tuple(a.reshape(shape) for a in (a0, a1, a2, a3))


def endpoint_corrected_fourier(samples, a, b, omega):
    """Integral of h(x) exp(i omega x) over [a, b] from N+1 uniform samples.

    ``samples[j] = h(a + j (b - a) / N)``. The DFT part is an FFT of length
    N; ``omega`` must be of the form ``2 pi k / (b - a)`` for integers k with
    ``|k| <= N / 2``. Exact for cubic h.
    """
    h = np.asarray(samples, dtype=complex)
    n = h.size - 1
    if n < 8:
        raise DomainError("need at least 9 samples")
    delta = (b - a) / n
    omega = np.asarray(omega, dtype=float)
    k = np.rint(omega * (b - a) / (2 * math.pi)).astype(int)
    if np.any(np.abs(k) > n // 2):
        raise DomainError("frequency beyond the Nyquist limit of the grid")
    theta = omega * delta
    fft = np.fft.ifft(h[:n]) * n  # sum_j h_j exp(+2 pi i j k / n)
    dft = fft[k % n]
    W, (a0, a1, a2, a3) = _dft_weights(theta)
    end = np.exp(1j * omega * (b - a))
    corr = (a0 * h[0] + a1 * h[1] + a2 * h[2] + a3 * h[3]
            + end * (np.conj(a0) * h[n] + np.conj(a1) * h[n - 1]
                     + np.conj(a2) * h[n - 2] + np.conj(a3) * h[n - 3]))
    # the correction weights are written for the sum over j = 0..n; the FFT
    # covers j = 0..n-1, so the last sample is added separately
    return delta * np.exp(1j * omega * a) * (W * (dft + end * h[n]) + corr)


def _norm_squared(state, l, panels):
    x, w = panel_rule(np.linspace(-l, l, panels + 1), 8)
    return float(np.dot(w, np.abs(state(x)) ** 2))


def expand(state, box, M=None, tail_tol=1e-8, M_max=1 << 17, oversample=4, norm_squared=None):
    """Mode amplitudes c_m = <e_m|psi> of a callable state on [-l, l].

    ``M`` is doubled (starting from 4096 when not given) until the missing
    mass ``||psi||^2 - sum |c_m|^2`` is below ``tail_tol``. Samples are taken
    on ``oversample * 2M`` intervals so every used frequency sits well below
    the grid's Nyquist limit.
    """
    l = box.l
    M = M or 4096
    if norm_squared is None:
        norm_squared = _norm_squared(state, l, max(4096, 2 * oversample * M // 8))
    while True:
        n = oversample * 2 * M
        q = np.linspace(-l, l, n + 1)
        h = state(q)
        m = np.arange(-M, M + 1)
        c = endpoint_corrected_fourier(h, -l, l, -math.pi * m / l) / math.sqrt(2 * l)
        tail = norm_squared - float(np.sum(np.abs(c) ** 2))
        if abs(tail) <= tail_tol:
            return ModeExpansion(c, box, 0.0, tail, norm_squared)
        if 2 * M > M_max:
            raise AccuracyError(
                f"mode tail {tail:.2e} exceeds {tail_tol:.0e} at M = {M}", estimate=abs(tail)
            )
        M *= 2


def evolve_box(expansion, t):
    """c_m -> c_m exp(-i E_m t / hbar)."""
    ph = np.exp(-1j * expansion.energies * t / expansion.box.hbar)
    return ModeExpansion(expansion.coefficients * ph, expansion.box, expansion.t + t,
                         expansion.tail, expansion.norm_squared)


def evolve_free(packet, t):
    """Freely evolved packet; its momentum amplitude gains exp(-i p^2 t / 2 mu hbar)."""
    return packet.evolved(t)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostics:
    centroid: float
    variance: float
    whm: float
    abs_centroid: float
    multi_peaked: bool


def density_diagnostics(q, density, periodic=True, norm_tol=1e-6):
    """Centroid, variance and width at half maximum of a sampled density.

    ``q`` is a uniform grid. With ``periodic=True`` the grid is one period
    (last point excluded) and sums are trapezoidal on the circle. The WHM is
    the width of the peak-connected region above half the maximum, with edges
    linearly interpolated; ``multi_peaked`` flags other regions above half
    maximum. ``abs_centroid`` is the mean of |q|.
    """
    q = np.asarray(q, dtype=float)
    rho = np.asarray(density, dtype=float)
    if q.shape != rho.shape or q.size < 3:
        raise DomainError("q and density must be equal-length arrays")
    h = q[1] - q[0]
    w = np.full(q.size, h)
    if not periodic:
        w[0] = w[-1] = 0.5 * h
    mass = float(np.dot(w, rho))
    if abs(mass - 1.0) > norm_tol:
        raise DomainError(f"density integrates to {mass:.8f}, not 1")
    centroid = float(np.dot(w, q * rho)) / mass
    variance = float(np.dot(w, (q - centroid) ** 2 * rho)) / mass
    abs_centroid = float(np.dot(w, np.abs(q) * rho)) / mass
    i = int(np.argmax(rho))
    half = 0.5 * rho[i]
    lo = i
    while lo > 0 and rho[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < rho.size - 1 and rho[hi + 1] >= half:
        hi += 1
    if lo > 0:
        left = q[lo - 1] + (half - rho[lo - 1]) / (rho[lo] - rho[lo - 1]) * h
    else:
        left = q[0]
    if hi < rho.size - 1:
        right = q[hi] + (rho[hi] - half) / (rho[hi] - rho[hi + 1]) * h
    else:
        right = q[-1]
    above = rho >= half
    above[lo:hi + 1] = False
    return Diagnostics(centroid, variance, float(right - left), abs_centroid, bool(np.any(above)))


@dataclass(frozen=True)
class CollapseScan:
    """Diagnostics of an evolved eigenfunction on a time grid centred on tau.

    Offsets are in grid steps from tau. Parity-definite densities have zero
    centroid at every time, so the centroid marker is the mean of |q|.
    """

    record: object
    times: np.ndarray
    steps: np.ndarray
    diagnostics: tuple
    q: np.ndarray
    density_at_tau: np.ndarray
    tail: float

    def _argmin_step(self, attr):
        vals = np.array([getattr(d, attr) for d in self.diagnostics])
        return int(self.steps[np.argmin(vals)])

    @property
    def variance_offset(self):
        return self._argmin_step("variance")

    @property
    def centroid_offset(self):
        return self._argmin_step("abs_centroid")

    @property
    def at_tau(self):
        return self.diagnostics[int(np.flatnonzero(self.steps == 0)[0])]

    def synchronous(self):
        return abs(self.variance_offset) <= 1 and abs(self.centroid_offset) <= 1


def collapse_scan(record, box, half_steps=10, divisions=200, M=1 << 15, tail_tol=1e-4):
    """Evolve an eigenfunction and scan t = tau (1 + k / divisions), |k| <= half_steps."""
    from .spectrum import eigenfunction

    if half_steps < 1 or divisions < 1:
        raise DomainError("half_steps and divisions must be positive")
    l = box.l
    ex = expand(lambda q: eigenfunction(record, box, np.clip(q, -l, l)), box, M=M,
                tail_tol=tail_tol)
    steps = np.arange(-half_steps, half_steps + 1)
    times = record.tau * (1.0 + steps / divisions)
    norm_tol = max(1e-6, 10 * abs(ex.tail))
    diags = []
    for t, k in zip(times, steps):
        q, v = evolve_box(ex, t).grid_values()
        rho = np.abs(v) ** 2
        diags.append(density_diagnostics(q, rho, norm_tol=norm_tol))
        if k == 0:
            q0, rho0 = q, rho
    return CollapseScan(record, times, steps, tuple(diags), q0, rho0, ex.tail)


def flux_at_origin(state, t):
    """J(0, t) = (hbar / mu) Im[conj(psi) dpsi/dq] at q = 0.

    ``state`` is a ModeExpansion (box) or a WavePacket (free line); ``t`` may
    be an array.
    """
    t = np.asarray(t, dtype=float)
    if isinstance(state, ModeExpansion):
        b = state.box
        k = math.pi * state.modes / b.l
        ph = np.exp(-1j * np.outer(t.ravel(), state.energies) / b.hbar)
        amp = ph * state.coefficients
        psi = amp.sum(axis=1)
        dpsi = (amp * (1j * k)).sum(axis=1)
        j = (b.hbar / b.mu) * np.imag(np.conj(psi) * dpsi) / (2 * b.l)
        j = j.reshape(t.shape)
    else:
        flat = t.ravel()
        j = np.empty(flat.shape)
        for i, ti in enumerate(flat):
            ev = state.evolved(ti)
            psi = ev.position(0.0)
            dpsi = ev.position_derivative(0.0)
            j[i] = (state.hbar / state.mu) * np.imag(np.conj(psi) * dpsi)
        j = j.reshape(t.shape)
    return float(j) if j.ndim == 0 else j


def integrated_flux(state, times, offset=0.0, order=10):
    """Cumulative integral of J(0, t) over the grid ``times`` plus ``offset``.

    Each step between consecutive grid times uses ``order``-point
    Gauss-Legendre quadrature.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")
    x, w = gauss_legendre(order)
    a, b = times[:-1, None], times[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    vals = np.asarray(flux_at_origin(state, nodes.ravel())).reshape(nodes.shape)
    inc = (0.5 * (b - a) * w * vals).sum(axis=1)
    return offset + np.concatenate(([0.0], np.cumsum(inc)))


def backflow_intervals(times, flux):
    """Maximal runs of grid times where the flux is negative.

    Returns a list of ``(first, last)`` grid times; the integrated flux
    decreases across each run.
    """
    times = np.asarray(times, dtype=float)
    neg = np.asarray(flux) < 0
    edges = np.flatnonzero(np.diff(np.concatenate(([0], neg.astype(np.int8), [0]))))
    return [(float(times[i]), float(times[j - 1])) for i, j in zip(edges[::2], edges[1::2])]


def right_probability(packet, t=0.0):
    """Probability of q > 0 for a free packet at time t (quadrature)."""
    ev = packet.evolved(t) if t else packet
    iv = [(max(a, 0.0), b) for a, b in ev.position_support() if b > 0]
    if not iv:
        return 0.0
    from .quadrature import oscillatory_rule

    x, w = oscillatory_rule(iv, ev.position_rate())
    return float(np.dot(w, np.abs(ev.position(x)) ** 2))


def negative_momentum_probability(packet):
    from .quadrature import oscillatory_rule

    iv = [(a, min(b, 0.0)) for a, b in packet.momentum_support() if a < 0]
    if not iv:
        return 0.0
    # psi~ carries phase p x0 / hbar and a Gaussian envelope of width hbar / 2 sigma
    s = max(c.sigma for c in packet.components)
    x_max = max(abs(c.x0) for c in packet.components)
    x, w = oscillatory_rule(iv, (x_max + SUPPORT_WIDTHS * s) / packet.hbar)
    return float(np.dot(w, np.abs(packet.momentum(x)) ** 2))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_snapshot_csv(q, density, fh):
    writer = csv.writer(fh)
    writer.writerow(["q", "density"])
    for a, b in zip(q, density):
        writer.writerow([repr(float(a)), repr(float(b))])


def write_diagnostics_csv(times, diags, fh):
    writer = csv.writer(fh)
    writer.writerow(["t", "centroid", "variance", "whm", "abs_centroid"])
    for t, d in zip(times, diags):
        writer.writerow([repr(float(t)), repr(d.centroid), repr(d.variance), repr(d.whm),
                         repr(d.abs_centroid)])


def write_flux_csv(times, flux, integrated, fh):
    writer = csv.writer(fh)
    writer.writerow(["t", "J", "integrated_J"])
    for t, j, i in zip(times, flux, integrated):
        writer.writerow([repr(float(t)), repr(float(j)), repr(float(i))])
