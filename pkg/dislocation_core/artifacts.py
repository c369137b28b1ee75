# dislocation_core/artifacts.py
"""
Run artifacts: CSV tables, JSON reports, flat-binary snapshots and the run
metadata file. Every write goes to a temporary sibling first and is moved
into place, so a run directory never holds a partial file.
"""

import hashlib
import json
import logging
import os
import platform
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import scipy

from dislocation_core.grids import Grid1D
from dislocation_core.layer_profile import LayerProfile

logger = logging.getLogger(__name__)

METADATA_FILE = "run_metadata.json"


class ArtifactIntegrityError(ValueError):
    """Raised when a stored artifact does not match its recorded checksum or sidecar."""
    pass


def generate_timestamp() -> str:
    """ISO 8601 UTC timestamp."""
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def _atomic_write(path: str | Path, write: Callable[[Any], None], binary: bool = False) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb" if binary else "w", **({} if binary else {"newline": ""})) as handle:
            write(handle)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug(f"Wrote {target}")
    return target


def write_csv(path: str | Path, header: Sequence[str], rows: np.ndarray) -> Path:
    """Write a numeric table with a header row; %.17g makes the round trip bit-exact."""
    data = np.atleast_2d(np.asarray(rows, dtype=float))
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"table has {data.shape[1]} columns, header has {len(header)}")
    return _atomic_write(
        path,
        lambda f: np.savetxt(f, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g"),
    )


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, "r", newline="") as f:
        header = f.readline().strip().split(",")
        rows = np.loadtxt(f, delimiter=",", ndmin=2)
    return header, rows


def write_json(path: str | Path, data: dict[str, Any]) -> Path:
    return _atomic_write(path, lambda f: json.dump(data, f, indent=2, sort_keys=True, default=_json_default))


def read_json(path: str | Path) -> dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_snapshot(path: str | Path, values: np.ndarray, metadata: dict[str, Any]) -> tuple[Path, Path]:
    """
    Row-major float64 flat binary at `path` (.bin) and a JSON sidecar
    (.json) holding the shape plus the given metadata.
    """
    data = np.ascontiguousarray(values, dtype=np.float64)
    binary = Path(path).with_suffix(".bin")
    sidecar = Path(path).with_suffix(".json")
    _atomic_write(binary, lambda f: f.write(data.tobytes(order="C")), binary=True)
    write_json(sidecar, {**metadata, "shape": list(data.shape), "dtype": "float64"})
    return binary, sidecar


def read_snapshot(path: str | Path) -> tuple[np.ndarray, dict[str, Any]]:
    binary = Path(path).with_suffix(".bin")
    meta = read_json(Path(path).with_suffix(".json"))
    values = np.fromfile(binary, dtype=np.float64)
    shape = tuple(meta["shape"])
    if values.size != int(np.prod(shape)):
        raise ArtifactIntegrityError(f"{binary} holds {values.size} values, sidecar declares shape {shape}")
    return values.reshape(shape), meta


def save_layer_table(layer: LayerProfile, directory: str | Path, stem: str = "layer") -> tuple[Path, Path]:
    """Persist a layer trace as CSV (x, phi0) plus JSON (c0, alpha, grid)."""
    if layer.grid is None:
        raise ValueError("only layers with a solve grid can be saved as tables")
    directory = Path(directory)
    x, phi0 = layer.table()
    table = write_csv(directory / f"{stem}.csv", ["x", "phi0"], np.column_stack([x, phi0]))
    meta = write_json(directory / f"{stem}.json", layer.to_dict())
    logger.info(f"Saved layer table to {table}")
    return table, meta


def load_layer_table(directory: str | Path, stem: str = "layer") -> LayerProfile:
    """
    Rebuild a tabulated layer saved by save_layer_table.

    Raises:
        ArtifactIntegrityError: If the table does not match the recorded grid
    """
    directory = Path(directory)
    meta = read_json(directory / f"{stem}.json")
    _, rows = read_csv(directory / f"{stem}.csv")
    grid_meta = meta.get("grid")
    if grid_meta is None:
        raise ArtifactIntegrityError(f"{stem}.json records no grid")
    grid = Grid1D(L=float(grid_meta["L"]), n=int(grid_meta["n"]))
    if rows.shape != (grid.n, 2) or not np.allclose(rows[:, 0], grid.x, rtol=0.0, atol=1e-12 * grid.L):
        raise ArtifactIntegrityError(f"{stem}.csv does not sample the recorded grid (L={grid.L}, n={grid.n})")
    return LayerProfile.from_table(grid, rows[:, 1], c0=float(meta["c0"]), alpha=float(meta["alpha"]))


def file_sha256(path: str | Path) -> str:
    sha256_hash = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha256_hash.update(chunk)
    return sha256_hash.hexdigest()


def write_run_metadata(
    directory: str | Path,
    config_hash: str,
    started: str,
    extra: dict[str, Any] | None = None,
) -> Path:
    """
    Write run_metadata.json listing the sha256 and size of every file in the
    run directory (recursively), with timestamps and library versions.
    """
    directory = Path(directory)
    files = {}
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        if path.name == METADATA_FILE or path.name.startswith("."):
            continue
        rel = path.relative_to(directory).as_posix()
        files[rel] = {"sha256": file_sha256(path), "size_bytes": path.stat().st_size}
    metadata = {
        "config_hash": config_hash,
        "started": started,
        "finished": generate_timestamp(),
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "files": files,
        **(extra or {}),
    }
    path = write_json(directory / METADATA_FILE, metadata)
    logger.info(f"Run metadata written: {len(files)} files in {directory}")
    return path


def verify_run_directory(directory: str | Path) -> list[str]:
    """
    Recompute the checksums recorded in run_metadata.json.

    Returns:
        Relative paths of the files that are missing or whose checksum differs
    """
    directory = Path(directory)
    metadata = read_json(directory / METADATA_FILE)
    bad = []
    for rel, entry in metadata.get("files", {}).items():
        path = directory / rel
        if not path.exists() or file_sha256(path) != entry.get("sha256"):
            bad.append(rel)
    if bad:
        logger.warning(f"Checksum mismatch for {len(bad)} artifacts in {directory}")
    return bad
