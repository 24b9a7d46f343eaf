"""Experiment manifests and atomic, reproducible file output.

Every command writes its outputs through `atomic_write` (temp file + rename)
and records a manifest: config snapshot, RNG algorithm, backend, seeds and
a sha256 per emitted file. Manifests contain no timestamps, so a rerun with
the same inputs produces byte-identical files, manifest included.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from ._accel import BACKEND

TOOL_VERSION = "0.1.0"
RNG_ALGORITHM = "numpy-PCG64"


def atomic_write(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path | str, command: str, seed: int, config: dict,
                   outputs: list[Path | str]) -> dict:
    """Hash the given output files and write the manifest JSON next to them."""
    path = Path(path)
    manifest = {
        "tool": "steelprop",
        "version": TOOL_VERSION,
        "command": command,
        "rng_algorithm": RNG_ALGORITHM,
        "backend": BACKEND,
        "seed": seed,
        "config": config,
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
