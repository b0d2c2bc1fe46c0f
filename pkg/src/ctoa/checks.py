"""
Invariant suite run by ``ctoa verify``.

Each check returns a ``CheckResult`` with the measured value and the limit it
was held to. Checks are deterministic: sample points come from fixed grids or
a seeded generator. Spectral checks use the first configured box length;
packet and dynamics checks use the last one.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import discrete, dynamics, kijowski, operator, spectrum, specfun
from .errors import CTOAError
from .quadrature import oscillatory_rule, panel_rule
from .states import merge_intervals, packet_from_config, parity_part

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


def _result(name, value, limit, detail=""):
    value = float(value)
    return CheckResult(name, bool(value <= limit), value, limit, detail)


class _Context:
    """Lazily built objects shared between checks of one run."""

    def __init__(self, config):
        self.config = config
        self.l_spec = config.lengths[0] if config.lengths else 1.0
        self.l_packet = config.lengths[-1] if config.lengths else 3.0
        self._cache = {}

    def get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def box(self):
        c = self.config
        return spectrum.BoxConfig(self.l_spec, c.mu, c.hbar)

    @property
    def packet_box(self):
        c = self.config
        return spectrum.BoxConfig(self.l_packet, c.mu, c.hbar)

    @property
    def packet(self):
        c = self.config
        return self.get("packet", lambda: packet_from_config(
            c.packet, mu=c.mu, hbar=c.hbar, reading=c.fwhm_reading))

    @property
    def weights(self):
        return self.get("weights", lambda: discrete.spectral_weights(
            self.packet, self.packet_box, tol=self.config.tol_weights))

    def records(self, parity, count):
        return self.get(("records", parity, count),
                        lambda: spectrum.eigenvalues(self.box, parity, count))

    def arrival_times(self, count=12):
        """Times spread over the bulk of the packet's arrival distribution."""
        c = min(self.packet.components, key=lambda g: abs(g.x0) / max(abs(g.p0), 1e-300))
        t0 = self.packet.mu * abs(c.x0) / max(abs(c.p0), 1e-300)
        return t0 * np.linspace(0.6, 1.6, count)


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def check_bessel_ode(ctx):
    x = np.logspace(-1, 4, 200)
    worst = 0.0
    for nu in map(float, specfun.ALLOWED_ORDERS):
        j = specfun._jv(nu, x)
        d1 = 0.5 * (specfun._jv(nu - 1, x) - specfun._jv(nu + 1, x))
        d2 = 0.25 * (specfun._jv(nu - 2, x) - 2 * j + specfun._jv(nu + 2, x))
        res = np.abs(x * x * d2 + x * d1 + (x * x - nu * nu) * j) / (x * x * np.abs(j) + 1)
        worst = max(worst, float(res.max()))
    return _result("bessel_ode_residual", worst, 1e-8)


def check_regime_overlap(ctx):
    x = np.linspace(12.0, 16.0, 20)
    env = np.sqrt(2 / (np.pi * x))
    worst = max(float(np.max(np.abs(specfun._series(nu, x) - specfun._hankel(nu, x)) / env))
                for nu in map(float, specfun.ALLOWED_ORDERS))
    return _result("bessel_regime_consistency", worst, 1e-9)


def check_zero_residual(ctx):
    z = specfun.bessel_j_zeros(-0.25, 5000)
    return _result("bessel_zero_residual", np.max(np.abs(specfun.bessel_j(-0.25, z))), 1e-12)


# ---------------------------------------------------------------------------
# Operator and spectrum
# ---------------------------------------------------------------------------


def check_kernel_symmetry(ctx):
    box = ctx.box
    rng = np.random.default_rng(0)
    q, qp = rng.uniform(-box.l, box.l, (2, 500))
    k = operator.kernel_t0(q, qp, box)
    herm = np.max(np.abs(k - np.conj(operator.kernel_t0(qp, q, box))))
    par = np.max(np.abs(k - operator.kernel_t0(-q, -qp, box)))
    m = operator.nystrom(operator.kernel_t0, box, 200)
    worst = max(herm, par, m.hermiticity_defect())
    return _result("kernel_hermiticity_parity", worst, 1e-14)


def check_quadratic_form(ctx):
    m = operator.nystrom(operator.kernel_t0, ctx.box, 400)
    rng = np.random.default_rng(1)
    psi = rng.standard_normal((400, 8))
    forms = np.einsum("ik,ij,jk->k", psi, m.entries, psi)
    rel = np.max(np.abs(forms.imag) / np.linalg.norm(psi, axis=0) ** 2)
    return _result("quadratic_form_real", rel, 1e-12)


def check_nystrom_convergence(ctx):
    n = ctx.config.nystrom_nodes
    count = ctx.config.eigen_count
    a, _ = operator.extrapolated_eigenvalues(operator.kernel_t0, ctx.box, n, count)
    b, _ = operator.extrapolated_eigenvalues(operator.kernel_t0, ctx.box, 2 * n, count)
    return _result("nystrom_convergence", np.max(np.abs(b - a) / np.abs(b)), 1e-6,
                   f"N={n} vs {2 * n}, extrapolated")


def check_spectral_oracle(ctx):
    count = ctx.config.eigen_count
    analytic = np.array([r.tau for p in ("even", "odd") for r in ctx.records(p, count)])
    analytic = analytic[np.argsort(-np.abs(analytic), kind="stable")][:count]
    ext, _ = operator.extrapolated_eigenvalues(operator.kernel_t0, ctx.box,
                                               2 * ctx.config.nystrom_nodes, count)
    worst = 0.0
    for sgn in (1, -1):
        a = np.sort(sgn * analytic[sgn * analytic > 0])[::-1]
        o = np.sort(sgn * ext[sgn * ext > 0])[::-1]
        k = min(len(a), len(o))
        worst = max(worst, float(np.max(np.abs(a[:k] - o[:k]) / a[:k])))
    return _result("spectrum_vs_nystrom", worst, ctx.config.tol_spectrum)


def check_spectrum_symmetry(ctx):
    worst = 0.0
    for parity in ("even", "odd"):
        taus = np.array([r.tau for r in ctx.records(parity, 50)])
        s = np.sort(taus)
        worst = max(worst, float(np.max(np.abs(s + s[::-1]))))
    return _result("spectrum_symmetry", worst, 0.0)


def _eigen_samples(ctx, parity, count, q):
    recs = [r for r in ctx.records(parity, count) if r.sign > 0]
    return recs, np.array([spectrum.eigenfunction(r, ctx.box, q) for r in recs])


def check_orthonormality(ctx):
    l = ctx.box.l
    q, w = panel_rule(np.linspace(-l, l, 401), 8)
    worst_off, worst_diag = 0.0, 0.0
    rows = {}
    for parity in ("even", "odd"):
        _, phi = _eigen_samples(ctx, parity, 10, q)
        rows[parity] = phi
        for sign_rows in (phi, np.conj(phi)):
            g = np.conj(sign_rows) @ (sign_rows * w).T
            off = g - np.diag(np.diag(g))
            worst_off = max(worst_off, float(np.max(np.abs(off))))
            worst_diag = max(worst_diag, float(np.max(np.abs(np.diag(g) - 1))))
    cross = np.max(np.abs(np.conj(rows["even"]) @ (rows["odd"] * w).T))
    ok = worst_off <= 1e-6 and worst_diag <= 1e-8 and cross <= 1e-12
    return CheckResult("orthonormality", ok, max(worst_off, worst_diag, float(cross)), 1e-6,
                       f"off-diagonal {worst_off:.1e}, diagonal {worst_diag:.1e}, "
                       f"even-odd {cross:.1e}")


def check_eigen_equation(ctx):
    box = ctx.box
    q = np.linspace(-box.l, box.l, 41)
    worst = 0.0
    for parity in ("even", "odd"):
        for r in (r for r in ctx.records(parity, 20) if r.sign > 0):
            phi = (lambda x, r=r: spectrum.eigenfunction(r, box, x))
            t_phi = operator.apply_kernel(operator.kernel_t0, box, phi, q)
            ref = r.tau * phi(q)
            worst = max(worst, float(np.linalg.norm(t_phi - ref) / np.linalg.norm(ref)))
    return _result("eigenvalue_equation", worst, 1e-5)


# ---------------------------------------------------------------------------
# Packets and arrival distributions
# ---------------------------------------------------------------------------


def check_parity_split(ctx):
    pk = ctx.packet
    ev, od = parity_part(pk, "even"), parity_part(pk, "odd")
    support = merge_intervals([(-b, -a) for a, b in pk.position_support()] + pk.position_support())
    q, w = oscillatory_rule(support, pk.position_rate(), order=8, panels_per_oscillation=4)
    e, o = ev.position(q), od.position(q)
    cross = abs(np.dot(w, np.conj(e) * o))
    norm = abs(np.dot(w, np.abs(e) ** 2 + np.abs(o) ** 2) - 1.0)
    ok = cross <= 1e-12 and norm <= 1e-10
    return CheckResult("parity_split", ok, max(float(cross), float(norm)), 1e-12,
                       f"cross {cross:.1e}, norm defect {norm:.1e}")


def check_overlap_resolution(ctx):
    sw = ctx.weights
    box = ctx.packet_box
    count = sw.count_per_parity()
    worst = 0.0
    for parity in ("even", "odd"):
        roots = spectrum.odd_roots(count) if parity == "odd" else spectrum.even_roots(count)
        rho = roots[-64:]
        norm = spectrum.normalization(parity, rho, box)
        a = discrete._overlaps(ctx.packet, box, parity, rho, norm)
        b = discrete._overlaps(ctx.packet, box, parity, rho, norm, 2 * discrete._PPO)
        for x, y in zip(a, b):
            worst = max(worst, float(np.max(np.abs(np.abs(x) ** 2 - np.abs(y) ** 2))))
    return _result("overlap_resolution", worst, 1e-8)


def check_completeness(ctx):
    return _result("completeness_tail", 1.0 - ctx.weights.captured_norm, 1e-4,
                   f"l={ctx.l_packet}, {ctx.weights.count_per_parity()} per parity")


def check_sum_rule(ctx):
    sw = ctx.weights
    return _result("sum_rule", abs(discrete.accumulated_discrete(sw, np.inf) - sw.captured_norm), 0.0)


def check_parity_additivity(ctx):
    pk = ctx.packet
    ev, od = parity_part(pk, "even"), parity_part(pk, "odd")
    t = ctx.arrival_times(6)
    fk = kijowski.kijowski_accumulated(pk, t)
    fk_parts = kijowski.kijowski_accumulated(ev, t) + kijowski.kijowski_accumulated(od, t)
    box = ctx.packet_box
    sw = ctx.weights
    count = sw.count_per_parity()
    swe = discrete.spectral_weights(ev, box, count)
    swo = discrete.spectral_weights(od, box, count)
    tg = np.linspace(-3 * t[-1], 3 * t[-1], 401)
    fl = discrete.accumulated_discrete(sw, tg)
    fl_parts = discrete.accumulated_discrete(swe, tg) + discrete.accumulated_discrete(swo, tg)
    worst = max(float(np.max(np.abs(fk - fk_parts))), float(np.max(np.abs(fl - fl_parts))))
    return _result("parity_additivity", worst, 1e-10)


def check_limit_density(ctx):
    pk = ctx.packet
    t = ctx.arrival_times()
    lim = discrete.limit_density_odd(pk, t)
    _, odd = kijowski.kijowski_density_position(pk, t, parts=True)
    return _result("limit_density_odd", np.max(np.abs(lim - odd)) / np.max(odd), 1e-6)


def check_covariance(ctx):
    pk = ctx.packet
    rng = np.random.default_rng(2)
    t0 = ctx.arrival_times(2)
    span = t0[1] - t0[0]
    taus = np.concatenate(([0.0], rng.uniform(-0.5, 0.5, 19) * span))
    ts = rng.uniform(t0[0], t0[1], 20) - taus
    peak = np.max(kijowski.kijowski_density(pk, ctx.arrival_times(40)))
    worst = 0.0
    for tau, t in zip(taus, ts):
        a = kijowski.kijowski_density(pk.evolved(tau), t)
        b = kijowski.kijowski_density(pk, t + tau)
        worst = max(worst, abs(a - b) / peak)
    return _result("covariance", worst, 1e-8, "20 (tau, t) pairs, relative to peak")


def check_representations(ctx):
    pk = ctx.packet
    t = ctx.arrival_times(40)
    a = kijowski.kijowski_density_momentum(pk, t)
    b = kijowski.kijowski_density_position(pk, t)
    keep = b >= 1e-3 * b.max()
    return _result("representation_equivalence", np.max(np.abs(a - b)[keep] / b[keep]), 1e-6)


def check_phase_identity(ctx):
    c = ctx.config
    q = np.linspace(-1.0, 1.0, 101)
    q = q[q != 0]
    a = kijowski.position_eigenfunction(c.target_time, "odd", q, c.mu, c.hbar)
    b = discrete.limit_eigenfunction_odd(c.target_time, q, c.mu, c.hbar)
    ratio = a / b
    var = float(np.mean(np.abs(ratio - ratio.mean()) ** 2))
    return _result("phase_identity", var, 1e-10,
                   f"ratio {ratio.mean().real:+.12f}{ratio.mean().imag:+.12f}i")


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


def check_unitarity(ctx):
    pk = ctx.packet
    box = ctx.packet_box
    ex = ctx.get("expansion", lambda: dynamics.expand(pk.position, box, tail_tol=1e-8))
    n0 = ex.norm()
    box_defect = max(abs(dynamics.evolve_box(ex, t).norm() - n0) for t in (1e-3, 0.1, 10.0, 1e4))
    free_defect = max(abs(pk.evolved(t).raw_norm_squared() - 1.0) for t in (1e-3, 0.1, 10.0))
    return _result("unitarity", max(box_defect, free_defect), 1e-12)


def check_box_vs_free(ctx):
    pk = ctx.packet
    box = ctx.packet_box
    ex = ctx.get("expansion", lambda: dynamics.expand(pk.position, box, tail_tol=1e-8))
    worst = 0.0
    for t in ctx.arrival_times(3)[:2] * 0.5:
        q, v = dynamics.evolve_box(ex, t).grid_values()
        free = pk.evolved(t).position(q)
        worst = max(worst, float(np.max(np.abs(np.abs(v) ** 2 - np.abs(free) ** 2))))
    return _result("box_vs_free", worst, 1e-6)


def _scan(ctx, l, parity, half_steps):
    c = ctx.config
    box = spectrum.BoxConfig(l, c.mu, c.hbar)
    count = int(box.rho_of_tau(c.target_time) / math.pi) + 20
    rec = discrete.nearest_record(spectrum.eigenvalues(box, parity, count), c.target_time,
                                  parity, 1)
    return dynamics.collapse_scan(rec, box, half_steps, c.scan_divisions, c.modes, c.tail_tol)


def check_collapse_synchrony(ctx):
    worst = 0
    for parity in ("even", "odd"):
        s = _scan(ctx, ctx.l_packet, parity, ctx.config.scan_steps)
        worst = max(worst, abs(s.variance_offset), abs(s.centroid_offset))
    return _result("collapse_synchrony", worst, 1, f"l={ctx.l_packet}, offsets in grid steps")


def check_whm_monotone(ctx):
    bad = 0
    detail = []
    for parity in ("even", "odd"):
        whm = [_scan(ctx, float(l), parity, 1).at_tau.whm for l in range(1, 6)]
        bad += sum(b >= a for a, b in zip(whm[:-1], whm[1:]))
        detail.append(parity + " " + " ".join(f"{v:.4g}" for v in whm))
    return _result("whm_monotone", bad, 0, "; ".join(detail))


CHECKS = (
    check_bessel_ode,
    check_regime_overlap,
    check_zero_residual,
    check_kernel_symmetry,
    check_quadratic_form,
    check_nystrom_convergence,
    check_spectral_oracle,
    check_spectrum_symmetry,
    check_orthonormality,
    check_eigen_equation,
    check_parity_split,
    check_overlap_resolution,
    check_completeness,
    check_sum_rule,
    check_parity_additivity,
    check_limit_density,
    check_covariance,
    check_representations,
    check_phase_identity,
    check_unitarity,
    check_box_vs_free,
    check_collapse_synchrony,
    check_whm_monotone,
)


def run_checks(config, only=None, perturb_bessel=None):
    """Run the suite; ``perturb_bessel`` scales one series coefficient (test hook)."""
    ctx = _Context(config)
    out = []
    for check in CHECKS:
        name = check.__name__[len("check_"):]
        if only is not None and name not in only:
            continue
        try:
            if perturb_bessel:
                with specfun.perturbed_series(perturb_bessel):
                    out.append(check(ctx))
            else:
                out.append(check(ctx))
        except CTOAError as exc:
            out.append(CheckResult(name, False, float("nan"), float("nan"), str(exc)))
    return out
