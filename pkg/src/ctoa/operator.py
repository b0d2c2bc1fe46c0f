"""
Integral kernels of the confined time-of-arrival operators and their Nystrom
discretisation, used as an independent numerical check on the analytic
spectrum.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AccuracyError, DomainError
from .quadrature import panel_rule

__all__ = [
    "KernelMatrix",
    "kernel_t0",
    "kernel_tgamma",
    "kernel_for",
    "nystrom",
    "oracle_spectrum",
    "oracle_eigenvalues",
    "extrapolated_eigenvalues",
    "extrapolated_by_sign",
    "apply_kernel",
    "write_oracle_csv",
    "write_eigenvector_csv",
]


def _check_domain(box, *qs):
    for q in qs:
        if np.any(np.abs(q) > box.l * (1 + 1e-12)):
            raise DomainError("kernel arguments must lie in [-l, l]")


def kernel_t0(q, qp, box):
    """Periodic kernel; sgn(0) = 0 so the diagonal vanishes."""
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    _check_domain(box, q, qp)
    c = box.mu / (4j * box.hbar)
    return c * (q + qp) * np.sign(q - qp) - (c / box.l) * (q * q - qp * qp)


def kernel_tgamma(q, qp, box):
    """Kernel for gamma != 0 with H(0) = 1/2."""
    if box.gamma == 0:
        raise DomainError("gamma = 0: use kernel_t0")
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    _check_domain(box, q, qp)
    g = box.gamma
    h = np.heaviside(q - qp, 0.5)
    return (-box.mu * (q + qp) / (4 * box.hbar * math.sin(g))) * (
        np.exp(1j * g) * h + np.exp(-1j * g) * (1.0 - h)
    )


def kernel_for(box):
    return kernel_t0 if box.gamma == 0 else kernel_tgamma


@dataclass(frozen=True)
class KernelMatrix:
    nodes: np.ndarray
    weights: np.ndarray
    entries: np.ndarray

    def __post_init__(self):
        n = self.nodes.size
        if self.weights.shape != (n,) or self.entries.shape != (n, n):
            raise DomainError("inconsistent Nystrom matrix dimensions")

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


def nystrom(kernel, box, n_nodes=2000):
    """Midpoint-rule Nystrom matrix sqrt(w_i) T(q_i, q_j) sqrt(w_j)."""
    if n_nodes < 16:
        raise DomainError("n_nodes must be >= 16")
    h = 2.0 * box.l / n_nodes
    nodes = -box.l + h * (np.arange(n_nodes) + 0.5)
    weights = np.full(n_nodes, h)
    sw = np.sqrt(weights)
    k = kernel(nodes[:, None], nodes[None, :], box)
    entries = sw[:, None] * k * sw[None, :]
    # exact Hermitian symmetry despite rounding in the kernel formula
    entries = 0.5 * (entries + entries.conj().T)
    return KernelMatrix(nodes, weights, entries)


def oracle_spectrum(matrix, count):
    """``count`` eigenpairs of largest |eigenvalue|, eigenvectors de-weighted.

    Returns a list of ``(eigenvalue, samples)`` sorted by decreasing
    magnitude; ``samples`` approximate the normalised eigenfunction at
    ``matrix.nodes``. Only the ``count`` extreme eigenpairs at each end of
    the spectrum are computed.
    """
    n = matrix.nodes.size
    if count > n:
        raise DomainError("count exceeds matrix dimension")
    k = min(count, n)
    try:
        lo_v, lo_x = scipy.linalg.eigh(matrix.entries, subset_by_index=[0, k - 1], driver="evr")
        hi_v, hi_x = scipy.linalg.eigh(matrix.entries, subset_by_index=[n - k, n - 1], driver="evr")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise AccuracyError(f"eigensolver failed: {exc}") from exc
    vals = np.concatenate([lo_v, hi_v])
    vecs = np.concatenate([lo_x, hi_x], axis=1)
    if 2 * k > n:
        vals, idx = np.unique(vals, return_index=True)
        vecs = vecs[:, idx]
    order = np.argsort(-np.abs(vals), kind="stable")[:count]
    sw = np.sqrt(matrix.weights)
    return [(float(vals[i]), vecs[:, i] / sw) for i in order]


def oracle_eigenvalues(matrix, count):
    """Eigenvalues only, sorted by decreasing magnitude."""
    try:
        vals = np.linalg.eigvalsh(matrix.entries)
    except np.linalg.LinAlgError as exc:
        raise AccuracyError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-np.abs(vals), kind="stable")[:count]
    return vals[order]


def extrapolated_by_sign(kernel, box, n_nodes=2000, count=10):
    """Largest ``count`` positive and negative eigenvalues, O(h^2) error removed.

    The midpoint rule converges like h^2 for this kernel; one Richardson
    step on the spectra at ``n_nodes // 2`` and ``n_nodes`` nodes gives
    ``(4 lam_N - lam_{N/2}) / 3``, with eigenvalues matched by rank within
    each sign. Returns ``(positive, negative, positive_raw, negative_raw)``,
    each ordered by decreasing magnitude; the raw arrays are the spectra at
    ``n_nodes``.
    """
    if n_nodes < 32:
        raise DomainError("n_nodes must be >= 32 for extrapolation")

    def by_sign(n):
        v = np.linalg.eigvalsh(nystrom(kernel, box, n).entries)
        return np.sort(v[v > 0])[::-1][:count], np.sort(v[v < 0])[:count]

    p1, n1 = by_sign(n_nodes)
    p0, n0 = by_sign(n_nodes // 2)
    if min(len(p1), len(n1), len(p0), len(n0)) < count:
        raise AccuracyError("too few eigenvalues of one sign for extrapolation")
    r = (n_nodes / (n_nodes // 2)) ** 2 - 1.0
    return p1 + (p1 - p0) / r, n1 + (n1 - n0) / r, p1, n1


def extrapolated_eigenvalues(kernel, box, n_nodes=2000, count=10):
    """The ``count`` extrapolated eigenvalues of largest magnitude.

    Returns ``(extrapolated, raw)``, both sorted by decreasing magnitude of
    the raw values. See ``extrapolated_by_sign``.
    """
    pos, neg, pos_raw, neg_raw = extrapolated_by_sign(kernel, box, n_nodes, count)
    fine = np.concatenate([pos_raw, neg_raw])
    ext = np.concatenate([pos, neg])
    order = np.argsort(-np.abs(fine), kind="stable")[:count]
    return ext[order], fine[order]


def apply_kernel(kernel, box, phi, q, order=16, panels=64):
    """(T phi)(q) by composite Gauss-Legendre quadrature split at the diagonal.

    Each side of the diagonal gets ``panels`` panels of ``order`` points, so
    oscillatory ``phi`` needs enough panels per oscillation.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(q.shape, dtype=complex)
    for i, qi in enumerate(q):
        total = 0.0
        for a, b in ((-box.l, qi), (qi, box.l)):
            if b <= a:
                continue
            nodes, weights = panel_rule(np.linspace(a, b, panels + 1), order)
            vals = kernel(np.full_like(nodes, qi), nodes, box) * phi(nodes)
            total = total + np.dot(weights, vals)
        out[i] = total
    return out


def write_oracle_csv(pairs, fh):
    writer = csv.writer(fh)
    writer.writerow(["rank", "eigenvalue"])
    for rank, (val, _) in enumerate(pairs, start=1):
        writer.writerow([rank, repr(val)])


def write_eigenvector_csv(nodes, samples, fh):
    writer = csv.writer(fh)
    writer.writerow(["node", "re", "im"])
    for q, v in zip(nodes, samples):
        writer.writerow([repr(float(q)), repr(float(v.real)), repr(float(v.imag))])
