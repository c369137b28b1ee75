import json

import numpy as np
import pytest

from dislocation_core.artifacts import (
    METADATA_FILE,
    ArtifactIntegrityError,
    generate_timestamp,
    load_layer_table,
    read_csv,
    read_json,
    read_snapshot,
    save_layer_table,
    verify_run_directory,
    write_csv,
    write_json,
    write_run_metadata,
    write_snapshot,
)
from dislocation_core.grids import Grid1D
from dislocation_core.layer_profile import EXPLICIT_LAYER, solve_layer_general
from dislocation_core.potential import SINUSOIDAL


def test_csv_is_bit_exact(tmp_path):
    rows = np.array([[0.1, 1.0 / 3.0], [np.pi, -2e-17]])
    write_csv(tmp_path / "t.csv", ["t", "x_1"], rows)
    header, back = read_csv(tmp_path / "t.csv")
    assert header == ["t", "x_1"]
    assert np.array_equal(back, rows)


def test_csv_header_must_match_columns(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "t.csv", ["t"], np.zeros((2, 2)))
    assert not (tmp_path / "t.csv").exists()


def test_json_handles_numpy_values(tmp_path):
    write_json(tmp_path / "r.json", {"value": np.float64(1.5), "array": np.arange(3)})
    assert read_json(tmp_path / "r.json") == {"array": [0, 1, 2], "value": 1.5}


def test_failed_write_leaves_no_partial_file(tmp_path):
    with pytest.raises(TypeError):
        write_json(tmp_path / "bad.json", {"value": object()})
    assert list(tmp_path.iterdir()) == []


def test_snapshot_is_row_major_float64(tmp_path):
    values = np.arange(12, dtype=float).reshape(4, 3)
    binary, sidecar = write_snapshot(tmp_path / "snap", values, {"time": 0.5})
    assert binary.stat().st_size == 12 * 8
    assert np.array_equal(np.fromfile(binary, dtype="<f8"), values.ravel(order="C"))
    back, meta = read_snapshot(tmp_path / "snap")
    assert np.array_equal(back, values)
    assert meta["shape"] == [4, 3] and meta["time"] == 0.5


def test_snapshot_shape_mismatch_detected(tmp_path):
    write_snapshot(tmp_path / "snap", np.zeros((2, 2)), {})
    sidecar = tmp_path / "snap.json"
    meta = json.loads(sidecar.read_text())
    meta["shape"] = [3, 3]
    sidecar.write_text(json.dumps(meta))
    with pytest.raises(ArtifactIntegrityError):
        read_snapshot(tmp_path / "snap")


def test_layer_table_round_trip(tmp_path):
    layer = solve_layer_general(SINUSOIDAL, grid1d=Grid1D(L=64.0, n=1024))
    save_layer_table(layer, tmp_path)
    loaded = load_layer_table(tmp_path)
    assert loaded.c0 == layer.c0
    assert np.allclose(loaded.table()[1], layer.table()[1], rtol=0.0, atol=1e-14)


def test_explicit_layer_has_no_table(tmp_path):
    with pytest.raises(ValueError):
        save_layer_table(EXPLICIT_LAYER, tmp_path)


def test_run_metadata_checksums(tmp_path):
    write_csv(tmp_path / "a.csv", ["t"], np.array([[1.0]]))
    write_json(tmp_path / "sub" / "b.json", {"k": 1})
    write_run_metadata(tmp_path, "abc", generate_timestamp(), {"scenario": "demo"})
    meta = read_json(tmp_path / METADATA_FILE)
    assert set(meta["files"]) == {"a.csv", "sub/b.json"}
    assert meta["config_hash"] == "abc" and meta["scenario"] == "demo"
    assert verify_run_directory(tmp_path) == []
    (tmp_path / "a.csv").write_text("t\n2\n")
    assert verify_run_directory(tmp_path) == ["a.csv"]
