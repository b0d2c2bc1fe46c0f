"""
Gaussian wavepackets and superpositions in position and momentum space.

A packet may be truncated to a box [-l, l] (hard cutoff and renormalisation)
and may carry a free-evolution offset ``t0``. Without truncation all
representations are exact closed forms; free evolution of a Gaussian stays
Gaussian.
"""

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AccuracyError, DomainError, UnsupportedError
from .quadrature import adaptive_integrate, oscillatory_rule

__all__ = [
    "GaussianSpec",
    "WavePacket",
    "eval_position",
    "eval_momentum",
    "inner_product",
    "parity_part",
    "merge_intervals",
    "packet_from_config",
    "SUPPORT_WIDTHS",
]

# Components are treated as zero beyond this many standard deviations of
# |psi|; the amplitude there is exp(-SUPPORT_WIDTHS**2 / 4) < 1e-13.
SUPPORT_WIDTHS = 11.0
_FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class GaussianSpec:
    """One Gaussian component.

    ``fwhm_x`` is the full width at half maximum of ``|psi(q)|^2`` when
    ``reading="fwhm"``; with ``reading="std"`` the same number is taken as the
    standard deviation of ``|psi|^2``.
    """

    x0: float
    p0: float
    fwhm_x: float
    weight: complex = 1.0
    reading: str = "fwhm"

    def __post_init__(self):
        if not self.fwhm_x > 0:
            raise DomainError("fwhm_x must be positive")
        if self.reading not in ("fwhm", "std"):
            raise DomainError("reading must be 'fwhm' or 'std'")

    @property
    def sigma(self):
        """Standard deviation of |psi(q)|^2 at t = 0."""
        return self.fwhm_x / _FWHM_FACTOR if self.reading == "fwhm" else self.fwhm_x


def _sigma_t(sigma, t, mu, hbar):
    return sigma * math.sqrt(1.0 + (hbar * t / (2.0 * mu * sigma * sigma)) ** 2)


def merge_intervals(intervals):
    """Sorted union of closed intervals."""
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _gauss_overlap(c1, c2, hbar):
    """<g1|g2> for unit-weight t = 0 components."""
    s1, s2 = c1.sigma, c2.sigma
    a = 0.25 / s1**2 + 0.25 / s2**2
    b = c1.x0 / (2 * s1**2) + c2.x0 / (2 * s2**2) + 1j * (c2.p0 - c1.p0) / hbar
    c = -(c1.x0**2) / (4 * s1**2) - c2.x0**2 / (4 * s2**2)
    pref = (2 * math.pi * s1 * s1) ** -0.25 * (2 * math.pi * s2 * s2) ** -0.25
    return pref * math.sqrt(math.pi / a) * cmath.exp(b * b / (4 * a) + c)


@dataclass(frozen=True)
class WavePacket:
    """Superposition of Gaussian components.

    Parameters
    ----------
    components : sequence of GaussianSpec
    box : BoxConfig, optional
        Hard truncation to [-l, l] followed by renormalisation.
    mu, hbar : float
    t0 : float
        Free-evolution time already applied to the state.
    normalize : bool
        If False the amplitudes are used as given (parity parts of a
        normalised packet are built this way).
    """

    components: tuple
    box: object = None
    mu: float = 1.0
    hbar: float = 1.0
    t0: float = 0.0
    normalize: bool = True
    scale: float = field(init=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("packet needs at least one component")
        object.__setattr__(self, "components", comps)
        if self.box is not None and self.t0 != 0:
            raise UnsupportedError("truncated packets cannot carry an evolution offset")
        if self.normalize:
            n2 = self.raw_norm_squared()
            if not n2 > 0:
                raise DomainError("packet has zero norm")
            object.__setattr__(self, "scale", 1.0 / math.sqrt(n2))
        else:
            object.__setattr__(self, "scale", 1.0)

    # -- norms and supports -------------------------------------------------

    def raw_norm_squared(self):
        """Squared norm of the unscaled (possibly truncated) amplitude."""
        if self.box is None:
            tot = 0.0
            for ci in self.components:
                for cj in self.components:
                    tot += np.conj(ci.weight) * cj.weight * _gauss_overlap(ci, cj, self.hbar)
            return float(tot.real)
        x, w = self.position_rule()
        v = self._raw_position(x)
        return float(np.dot(w, np.abs(v) ** 2))

    def truncation_loss(self):
        """Relative norm change caused by the box cutoff."""
        if self.box is None:
            return 0.0
        full = replace(self, box=None, normalize=False).raw_norm_squared()
        return abs(full - self.raw_norm_squared()) / full

    def position_support(self):
        """Merged intervals outside which |psi| is negligible."""
        iv = []
        for c in self.components:
            s = _sigma_t(c.sigma, self.t0, self.mu, self.hbar)
            x = c.x0 + c.p0 * self.t0 / self.mu
            iv.append((x - SUPPORT_WIDTHS * s, x + SUPPORT_WIDTHS * s))
        iv = merge_intervals(iv)
        if self.box is not None:
            l = self.box.l
            iv = [(max(a, -l), min(b, l)) for a, b in iv if b > -l and a < l]
        return iv

    def momentum_support(self):
        iv = []
        for c in self.components:
            sp = self.hbar / (2.0 * c.sigma)
            iv.append((c.p0 - SUPPORT_WIDTHS * sp, c.p0 + SUPPORT_WIDTHS * sp))
        return merge_intervals(iv)

    def max_abs_momentum(self):
        return max(max(abs(a), abs(b)) for a, b in self.momentum_support())

    def position_rate(self, extra=0.0):
        """Bound on the phase rate of psi(q) (rad per unit length) plus ``extra``."""
        rate = 0.0
        for c in self.components:
            s = _sigma_t(c.sigma, self.t0, self.mu, self.hbar)
            # envelope scale plus mean momentum plus chirp of the spread packet
            chirp = self.hbar * abs(self.t0) / (self.mu * s * s) * SUPPORT_WIDTHS / 2
            rate = max(rate, abs(c.p0) / self.hbar + 3.0 / s + chirp)
        return rate + extra

    def position_rule(self, extra_rate=0.0, panels_per_oscillation=2.0):
        return oscillatory_rule(self.position_support(), self.position_rate(extra_rate),
                                panels_per_oscillation=panels_per_oscillation)

    # -- evaluation ---------------------------------------------------------

    def _component_position(self, c, q):
        mu, hbar, t = self.mu, self.hbar, self.t0
        s = c.sigma
        if t == 0:
            return (2 * math.pi * s * s) ** -0.25 * np.exp(
                -((q - c.x0) ** 2) / (4 * s * s) + 1j * c.p0 * q / hbar
            )
        alpha = s * s / hbar**2 + 1j * t / (2 * mu * hbar)
        beta = 2 * c.p0 * s * s / hbar**2 + 1j * (q - c.x0) / hbar
        g0 = -(c.p0**2) * s * s / hbar**2 + 1j * c.p0 * c.x0 / hbar
        pref = (2 * math.pi * hbar) ** -0.5 * (2 * s * s / (math.pi * hbar**2)) ** 0.25
        return pref * np.sqrt(math.pi / alpha) * np.exp(beta * beta / (4 * alpha) + g0)

    def _component_position_derivative(self, c, q):
        if self.t0 == 0:
            s = c.sigma
            factor = -(q - c.x0) / (2 * s * s) + 1j * c.p0 / self.hbar
        else:
            s = c.sigma
            alpha = s * s / self.hbar**2 + 1j * self.t0 / (2 * self.mu * self.hbar)
            beta = 2 * c.p0 * s * s / self.hbar**2 + 1j * (q - c.x0) / self.hbar
            factor = 1j * beta / (2 * alpha * self.hbar)
        return factor * self._component_position(c, q)

    def _raw_position(self, q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape, dtype=complex)
        for c in self.components:
            out += c.weight * self._component_position(c, q)
        if self.box is not None:
            out[np.abs(q) > self.box.l] = 0.0
        return out

    def position(self, q):
        return self.scale * self._raw_position(q)

    def position_derivative(self, q):
        """d psi / dq (exact for untruncated packets)."""
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape, dtype=complex)
        for c in self.components:
            out += c.weight * self._component_position_derivative(c, q)
        if self.box is not None:
            out[np.abs(q) > self.box.l] = 0.0
        return self.scale * out

    def _analytic_momentum(self, p):
        p = np.asarray(p, dtype=float)
        hbar = self.hbar
        out = np.zeros(p.shape, dtype=complex)
        for c in self.components:
            s = c.sigma
            pref = (2 * s * s / (math.pi * hbar**2)) ** 0.25
            out += c.weight * pref * np.exp(
                -((p - c.p0) ** 2) * s * s / hbar**2 - 1j * (p - c.p0) * c.x0 / hbar
            )
        if self.t0 != 0:
            out *= np.exp(-1j * p * p * self.t0 / (2 * self.mu * hbar))
        return self.scale * out

    def momentum(self, p):
        """psi~(p) = (2 pi hbar)^{-1/2} int exp(-i p q / hbar) psi(q) dq."""
        if self.box is None:
            return self._analytic_momentum(p)
        p = np.asarray(p, dtype=float)
        flat = p.ravel()
        pmax = float(np.max(np.abs(flat))) if flat.size else 0.0
        x, w = self.position_rule(extra_rate=pmax / self.hbar)
        psi = self.position(x) * w
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, 4_000_000 // max(1, x.size))
        for i in range(0, flat.size, step):
            blk = flat[i:i + step]
            out[i:i + step] = np.exp(-1j * np.outer(blk, x) / self.hbar) @ psi
        return (out / math.sqrt(2 * math.pi * self.hbar)).reshape(p.shape)

    def evolved(self, t):
        """Packet freely evolved by an additional time ``t``."""
        if self.box is not None:
            raise UnsupportedError("free evolution of a truncated packet; use dynamics")
        return replace(self, t0=self.t0 + t)

    def truncated(self, box):
        return replace(self, box=box)

    def conjugated(self):
        """Complex-conjugate state (time reversal at t0 = 0)."""
        if self.t0 != 0:
            raise UnsupportedError("conjugation only for t0 = 0")
        comps = tuple(replace(c, p0=-c.p0, weight=np.conj(c.weight)) for c in self.components)
        return replace(self, components=comps)


def eval_position(packet, q):
    return packet.position(q)


def eval_momentum(packet, p):
    return packet.momentum(p)


def parity_part(packet, parity):
    """Even or odd part (psi(q) +- psi(-q)) / 2, not renormalised."""
    if parity not in ("even", "odd"):
        raise DomainError(f"unknown parity {parity!r}")
    sgn = 1.0 if parity == "even" else -1.0
    comps = []
    for c in packet.components:
        w = 0.5 * c.weight * packet.scale
        comps.append(replace(c, weight=w))
        comps.append(replace(c, x0=-c.x0, p0=-c.p0, weight=sgn * w))
    return replace(packet, components=tuple(comps), normalize=False)


def inner_product(f, g, intervals, rate=None, abs_tol=1e-10, panels_per_oscillation=8.0):
    """<f|g> = sum over ``intervals`` of the integral of conj(f) g.

    With ``rate=None`` the integral is computed by adaptive Gauss-Kronrod.
    For oscillatory integrands pass a bound ``rate`` on the phase derivative;
    a panel rule with ``panels_per_oscillation`` is then compared against the
    rule at half the panel width, and the finer value is returned.
    """
    if rate is None:
        total = 0.0
        for a, b in intervals:
            val, _ = adaptive_integrate(lambda x: np.conj(f(x)) * g(x), a, b,
                                        abs_tol=abs_tol / max(1, len(intervals)), rel_tol=0.0)
            total = total + val
        return complex(total)
    x1, w1 = oscillatory_rule(intervals, rate, panels_per_oscillation=panels_per_oscillation)
    x2, w2 = oscillatory_rule(intervals, rate, panels_per_oscillation=2 * panels_per_oscillation)
    v1 = np.dot(w1, np.conj(f(x1)) * g(x1))
    v2 = np.dot(w2, np.conj(f(x2)) * g(x2))
    if abs(v2 - v1) > abs_tol:
        raise AccuracyError("oscillatory overlap did not converge", estimate=abs(v2 - v1))
    return complex(v2)


def packet_from_config(entries, box=None, mu=1.0, hbar=1.0, reading="fwhm"):
    """Build a packet from a list of {x0, p0, fwhm, weight_re, weight_im} maps."""
    comps = []
    for e in entries:
        try:
            w = complex(float(e.get("weight_re", 1.0)), float(e.get("weight_im", 0.0)))
            comps.append(GaussianSpec(float(e["x0"]), float(e["p0"]), float(e["fwhm"]), w, reading))
        except KeyError as exc:
            raise DomainError(f"packet entry missing key {exc}") from exc
    return WavePacket(tuple(comps), box=box, mu=mu, hbar=hbar)
