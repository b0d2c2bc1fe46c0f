"""
Experiment configuration: flat JSON key/value maps plus a packet list.

Schema (all keys optional unless a command needs them)::

    name            text label written to the manifest
    mu, hbar        units (default 1, 1)
    gamma           boundary phase of the box (default 0)
    packet          list of {x0, p0, fwhm, weight_re, weight_im}
    fwhm_reading    "fwhm" (width of |psi|^2 at half maximum) or "std"
    lengths         list of box half-lengths l
    window          [t_lo, t_hi] for arrival-time curves
    grid_points     number of points of the uniform time grid on the window
    gap_window      null, [t_lo, t_hi] or "discrepancy"
    require_decreasing  sup gaps must decrease along ``lengths``
    eigen_count     eigenvalues per sign compared with the Nystrom oracle
    nystrom_nodes   Nystrom matrix size
    target_time     time whose nearest eigenvalue is studied (dynamics)
    scan_steps      half-width of the time scan, in grid steps
    scan_divisions  grid step is tau / scan_divisions
    modes           initial number of box modes M
    snapshot_points samples of the density snapshot at tau (0: none)
    tol_spectrum, tol_weights, tol_table, tol_gap, tail_tol   tolerances
    out             output directory (overridden by --out)

Presets ``spectrum``, ``fig1`` .. ``fig5`` and ``verify`` ship with the
package; ``load_config`` accepts either a preset name or a file path.
"""

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = ["ExperimentConfig", "PRESETS", "load_config", "preset_names"]

PRESETS = ("spectrum", "fig1", "fig2", "fig3", "fig4", "fig5", "verify")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    mu: float = 1.0
    hbar: float = 1.0
    gamma: float = 0.0
    packet: tuple = ()
    fwhm_reading: str = "fwhm"
    lengths: tuple = ()
    window: tuple = None
    grid_points: int = 201
    gap_window: object = None
    require_decreasing: bool = False
    eigen_count: int = 10
    nystrom_nodes: int = 2000
    target_time: float = 0.01
    scan_steps: int = 10
    scan_divisions: int = 200
    modes: int = 32768
    snapshot_points: int = 0
    tol_spectrum: float = 1e-6
    tol_weights: float = 1e-4
    tol_table: float = 1e-8
    tol_gap: float = None
    tail_tol: float = 1e-4
    out: str = "out"

    def __post_init__(self):
        if not (self.mu > 0 and self.hbar > 0):
            raise DomainError("mu and hbar must be positive")
        if abs(self.gamma) > math.pi / 2:
            raise DomainError("|gamma| must not exceed pi/2")
        if self.fwhm_reading not in ("fwhm", "std"):
            raise DomainError("fwhm_reading must be 'fwhm' or 'std'")
        if any(not l > 0 for l in self.lengths):
            raise DomainError("box lengths must be positive")
        for name in ("tol_spectrum", "tol_weights", "tol_table", "tail_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.tol_gap is not None and not self.tol_gap > 0:
            raise DomainError("tol_gap must be positive")
        if self.window is not None:
            if len(self.window) != 2 or not self.window[1] > self.window[0]:
                raise DomainError("window must be [t_lo, t_hi] with t_lo < t_hi")
            if self.grid_points < 2:
                raise DomainError("grid_points must be >= 2")
        gw = self.gap_window
        if gw is not None and gw != "discrepancy":
            if len(gw) != 2 or not gw[1] > gw[0]:
                raise DomainError("gap_window must be null, 'discrepancy' or [t_lo, t_hi]")
        if self.eigen_count < 1 or self.nystrom_nodes < 32:
            raise DomainError("eigen_count must be >= 1 and nystrom_nodes >= 32")
        if self.scan_steps < 1 or self.scan_divisions < 1 or self.modes < 16:
            raise DomainError("scan_steps, scan_divisions must be >= 1 and modes >= 16")

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown config keys: {', '.join(unknown)}")
        if "packet" in data:
            data["packet"] = tuple(dict(e) for e in data["packet"])
        for key in ("lengths", "window"):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        if isinstance(data.get("gap_window"), list):
            data["gap_window"] = tuple(float(v) for v in data["gap_window"])
        return cls(**data)

    def time_grid(self):
        if self.window is None:
            raise DomainError("config has no time window")
        return np.linspace(self.window[0], self.window[1], self.grid_points)

    def to_dict(self):
        d = asdict(self)
        d["packet"] = [dict(e) for e in self.packet]
        return d


def preset_names():
    return PRESETS


def load_config(source):
    """Config from a preset name or a JSON file path."""
    if source in PRESETS:
        text = resources.files("ctoa.presets").joinpath(f"{source}.json").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise DomainError(f"no preset or config file named {source!r}")
        text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DomainError("config must be a JSON object")
    return ExperimentConfig.from_mapping(data)
