"""
Output helpers: atomic file writes and the run manifest.

Every file is written to a temporary sibling and renamed into place, so an
interrupted run never leaves a truncated CSV behind. The manifest lists the
resolved inputs, tolerances, library versions and a SHA-256 digest of each
output; it carries no timestamps, so identical runs produce identical files.
"""

import hashlib
import json
import os
import platform
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import scipy

__all__ = ["atomic_open", "write_manifest", "file_digest"]


@contextmanager
def atomic_open(path, mode="w"):
    """Open a temporary file next to ``path``; rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, command, config, files, results):
    """Write ``manifest.json`` describing one command run."""
    from . import __version__

    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config.to_dict(),
        "versions": {
            "ctoa": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "files": {name: file_digest(out_dir / name) for name in sorted(files)},
        "results": results,
    }
    with atomic_open(out_dir / "manifest.json") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return manifest


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
