"""
Command-line experiment runner.

    ctoa spectrum|distribution|dynamics|verify [--config NAME_OR_PATH] [--out DIR]

Each command reads a preset or JSON config, writes CSV files and a
``manifest.json`` into the output directory, and prints a short summary.
Exit codes: 0 success, 1 tolerance failure, 2 usage or configuration error,
3 numerical accuracy failure.
"""

import argparse
import csv
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import checks, discrete, dynamics, kijowski, operator, spectrum
from .config import PRESETS, load_config
from .errors import AccuracyError, BracketError, CTOAError
from .io import atomic_open, write_manifest
from .states import packet_from_config

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, EXIT_ACCURACY = 0, 1, 2, 3

DEFAULT_PRESET = {
    "spectrum": "spectrum",
    "distribution": "fig1",
    "dynamics": "fig4",
    "verify": "verify",
}


def _tag(l):
    return f"l{l:g}"


def _packet(cfg):
    if not cfg.packet:
        raise CTOAError("config has no packet")
    return packet_from_config(cfg.packet, mu=cfg.mu, hbar=cfg.hbar, reading=cfg.fwhm_reading)


def _lengths(cfg):
    if not cfg.lengths:
        raise CTOAError("config has an empty list of box lengths")
    return cfg.lengths


def _csv(out, name, writer, *args):
    with atomic_open(out / name) as fh:
        writer(*args, fh)
    return name


def _rows_writer(header, rows):
    def write(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])

    return write


def _write_rows(out, name, header, rows):
    return _csv(out, name, _rows_writer(header, rows))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_spectrum(cfg, out):
    files, results, ok = [], {}, True
    for l in _lengths(cfg):
        box = spectrum.BoxConfig(l, cfg.mu, cfg.hbar, cfg.gamma)
        count = cfg.eigen_count
        pos, neg, pos_raw, neg_raw = operator.extrapolated_by_sign(
            operator.kernel_for(box), box, cfg.nystrom_nodes, count)
        if cfg.gamma != 0:
            warnings.warn(f"gamma = {cfg.gamma}: no analytic spectrum, writing the Nystrom "
                          "spectrum only")
            rows = [(s, k + 1, float(r), float(e))
                    for s, ext, raw in (("plus", pos, pos_raw), ("minus", neg, neg_raw))
                    for k, (e, r) in enumerate(zip(ext, raw))]
            files.append(_write_rows(out, f"nystrom_{_tag(l)}.csv",
                                     ["sign", "rank", "nystrom", "nystrom_extrapolated"], rows))
            continue
        records = spectrum.eigenvalues(box, "even", count) + spectrum.eigenvalues(box, "odd", count)
        files.append(_csv(out, f"spectrum_{_tag(l)}.csv", spectrum.write_spectrum_csv, records))
        rows, worst = [], 0.0
        for sign, ext, raw in ((1, pos, pos_raw), (-1, neg, neg_raw)):
            recs = sorted((r for r in records if r.sign == sign), key=lambda r: -abs(r.tau))[:count]
            for k, (r, e, w) in enumerate(zip(recs, ext, raw)):
                err = abs(e - r.tau) / abs(r.tau)
                worst = max(worst, err)
                rows.append(("plus" if sign > 0 else "minus", k + 1, r.parity, r.n, r.tau,
                             float(w), float(e), err))
        files.append(_write_rows(
            out, f"compare_{_tag(l)}.csv",
            ["sign", "rank", "parity", "n", "analytic", "nystrom", "nystrom_extrapolated",
             "relative_error"], rows))
        results[_tag(l)] = {"max_relative_error": worst}
        ok &= worst <= cfg.tol_spectrum
        print(f"{_tag(l)}: max relative error {worst:.3e} (tolerance {cfg.tol_spectrum:.0e})")
    return ok, files, results


def _discrepancy_window(times, integrated, accumulated, fraction=0.5):
    """Span of grid times where |integrated flux - F^K| reaches ``fraction`` of its max.

    The discrepancy oscillates, so the zone runs from the first to the last
    grid time above the threshold.
    """
    d = np.abs(integrated - accumulated)
    above = np.flatnonzero(d >= fraction * d.max())
    return float(times[above[0]]), float(times[above[-1]]), float(d.max())


def cmd_distribution(cfg, out):
    pk = _packet(cfg)
    grid = cfg.time_grid()
    table = discrete.KijowskiTable(pk, cfg.window, tol=cfg.tol_table)
    fk = table(grid)
    pik = kijowski.kijowski_density(pk, grid)
    flux = dynamics.flux_at_origin(pk, grid)
    offset = dynamics.right_probability(pk, grid[0]) - dynamics.negative_momentum_probability(pk)
    integrated = dynamics.integrated_flux(pk, grid, offset)
    curves = [
        kijowski.Curve(grid, fk, "accumulated", "kijowski"),
        kijowski.Curve(grid, pik, "density", "kijowski"),
        kijowski.Curve(grid, integrated, "integrated_flux", "flux"),
        kijowski.Curve(grid, flux, "density", "flux"),
    ]
    curves[0].check_invariants()
    curves[1].check_invariants()
    backflow = dynamics.backflow_intervals(grid, flux)
    results = {
        "kijowski_table_error_bound": table.error_bound,
        "backflow_intervals": backflow,
        "kijowski_density_min": float(pik.min()),
    }
    gap_window = None
    if cfg.gap_window == "discrepancy":
        a, b, d = _discrepancy_window(grid, integrated, fk)
        gap_window = (a, b)
        results["discrepancy_window"] = [a, b]
        results["max_flux_discrepancy"] = d
    elif cfg.gap_window is not None:
        gap_window = cfg.gap_window
    rows, ok = [], True
    for l in _lengths(cfg):
        box = spectrum.BoxConfig(l, cfg.mu, cfg.hbar)
        sw = discrete.spectral_weights(pk, box, tol=cfg.tol_weights)
        tag = _tag(l)
        curves.append(kijowski.Curve(grid, discrete.accumulated_discrete(sw, grid),
                                     "accumulated", f"confined_{tag}"))
        curves.append(discrete.density_histogram(sw, window=cfg.window, label=f"confined_{tag}"))
        gap = discrete.sup_gap(sw, table)
        row = [l, gap, sw.captured_norm, sw.count_per_parity()]
        if gap_window is not None:
            row.append(discrete.sup_gap(sw, table, gap_window))
        rows.append(row)
        if cfg.tol_gap is not None:
            ok &= all(g <= cfg.tol_gap for g in [gap] + row[4:])
        print(f"{tag}: sup gap {gap:.4e}, captured norm {sw.captured_norm:.8f}"
              + (f", gap in [{gap_window[0]:.6g}, {gap_window[1]:.6g}] {row[4]:.4e}"
                 if gap_window is not None else ""))
    gaps = [r[1] for r in rows]
    decreasing = all(b < a for a, b in zip(gaps[:-1], gaps[1:]))
    results["sup_gaps"] = gaps
    results["decreasing"] = decreasing
    if cfg.require_decreasing:
        ok &= decreasing
    header = ["l", "sup_norm_diff", "captured_norm", "count_per_parity"]
    if gap_window is not None:
        header.append("sup_norm_diff_gap_window")
    files = [
        _csv(out, "curves.csv", kijowski.write_curves_csv, curves),
        _write_rows(out, "convergence.csv", header, rows),
        _write_rows(out, "backflow.csv", ["start", "end"], backflow),
    ]
    if backflow:
        print(f"flux negative on {len(backflow)} grid runs within "
              f"[{backflow[0][0]:.6g}, {backflow[-1][1]:.6g}]")
    return ok, files, results


def cmd_dynamics(cfg, out):
    files, rows, results = [], [], {}
    whm = {"even": [], "odd": []}
    peak = {"even": [], "odd": []}
    sync_fail = []
    for l in _lengths(cfg):
        box = spectrum.BoxConfig(l, cfg.mu, cfg.hbar)
        count = int(box.rho_of_tau(cfg.target_time) / math.pi) + 20
        for parity in ("even", "odd"):
            rec = discrete.nearest_record(spectrum.eigenvalues(box, parity, count),
                                          cfg.target_time, parity, 1)
            if abs(rec.tau - cfg.target_time) > 0.1 * abs(cfg.target_time):
                warnings.warn(f"{_tag(l)} {parity}: nearest eigenvalue {rec.tau:.6g} is more "
                              f"than 10% from t = {cfg.target_time:g}")
            scan = dynamics.collapse_scan(rec, box, cfg.scan_steps, cfg.scan_divisions,
                                          cfg.modes, cfg.tail_tol)
            d = scan.at_tau
            tag = f"{_tag(l)}_{parity}"
            files.append(_csv(out, f"diagnostics_{tag}.csv", dynamics.write_diagnostics_csv,
                              scan.times, scan.diagnostics))
            if cfg.snapshot_points:
                q = np.linspace(-l, l, cfg.snapshot_points)
                dens = np.interp(q, scan.q, scan.density_at_tau, period=2 * l)
                files.append(_csv(out, f"snapshot_{tag}.csv", dynamics.write_snapshot_csv, q, dens))
            pk = float(np.max(scan.density_at_tau))
            whm[parity].append(d.whm)
            peak[parity].append(pk)
            if not scan.synchronous():
                sync_fail.append(tag)
            rows.append((l, parity, rec.n, rec.tau, d.whm, d.variance, d.abs_centroid, pk,
                         scan.variance_offset, scan.centroid_offset, scan.synchronous(),
                         scan.tail))
            print(f"{tag}: n={rec.n} tau={rec.tau:.6g} whm={d.whm:.5g} "
                  f"offsets(variance, |q|)=({scan.variance_offset}, {scan.centroid_offset})")
    files.append(_write_rows(
        out, "whm.csv",
        ["l", "parity", "n", "tau", "whm", "variance", "abs_centroid", "peak",
         "variance_offset", "centroid_offset", "synchronous", "mode_tail"], rows))

    def strictly_down(v):
        return all(b < a for a, b in zip(v[:-1], v[1:]))

    def strictly_up(v):
        return all(b > a for a, b in zip(v[:-1], v[1:]))

    ok = all(strictly_down(whm[p]) and strictly_up(peak[p]) for p in whm)
    results.update({"whm": whm, "peak": peak, "whm_decreasing": ok,
                    "synchrony_failures": sync_fail})
    if sync_fail:
        warnings.warn("minimum variance or minimum <|q|> more than one grid step from tau "
                      "for: " + ", ".join(sync_fail))
    return ok, files, results


def cmd_verify(cfg, out, perturb_bessel=None):
    res = checks.run_checks(cfg, perturb_bessel=perturb_bessel)
    width = max(len(r.name) for r in res)
    for r in res:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  {r.value:.3e} (limit {r.limit:.1e})  {r.detail}")
    rows = [(r.name, r.passed, r.value, r.limit, r.detail) for r in res]
    files = [_write_rows(out, "verify.csv", ["check", "passed", "value", "limit", "detail"], rows)]
    ok = all(r.passed for r in res)
    return ok, files, {"failed": [r.name for r in res if not r.passed]}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "distribution": cmd_distribution,
    "dynamics": cmd_dynamics,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="ctoa", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", default=None,
                       help=f"preset name ({', '.join(PRESETS)}) or JSON file; "
                            f"default {DEFAULT_PRESET[name]}")
        s.add_argument("--out", default=None, help="output directory (default from config)")
        if name == "verify":
            s.add_argument("--perturb-bessel", type=float, default=None,
                           help=argparse.SUPPRESS)
    return p


def _format_warning(message, category, filename, lineno, line=None):
    return f"warning: {message}\n"


def main(argv=None):
    args = _parser().parse_args(argv)
    saved = warnings.formatwarning
    warnings.formatwarning = _format_warning
    try:
        return _run(args)
    finally:
        warnings.formatwarning = saved


def _run(args):
    try:
        cfg = load_config(args.config or DEFAULT_PRESET[args.command])
        out = Path(args.out or cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        kwargs = {}
        if args.command == "verify" and args.perturb_bessel:
            kwargs["perturb_bessel"] = args.perturb_bessel
        ok, files, results = COMMANDS[args.command](cfg, out, **kwargs)
        write_manifest(out, args.command, cfg, files, results)
    except (AccuracyError, BracketError) as exc:
        print(f"ctoa: accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except CTOAError as exc:
        print(f"ctoa: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not ok:
        print(f"ctoa {args.command}: tolerance check failed", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
