import json

import numpy as np
import pytest

from matlda import Dataset, FitConfig, SignalSpec, fit_matrix_lda, make_signal
from matlda import io
from matlda.errors import DataFileError


def test_load_csv_basic(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1,2\n3,4")
    np.testing.assert_array_equal(io.load_matrix_csv(f), [[1, 2], [3, 4]])


def test_load_csv_with_header(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("# subject 7\n1.5,-2e-3\n\n")
    np.testing.assert_array_equal(io.load_matrix_csv(f), [[1.5, -0.002]])


def test_load_csv_ragged_names_row(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1,2\n3")
    with pytest.raises(DataFileError, match="row 2"):
        io.load_matrix_csv(f)


def test_load_csv_non_numeric_names_cell(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1,2\n3,x4\n")
    with pytest.raises(DataFileError, match="row 2, column 2"):
        io.load_matrix_csv(f)


def test_load_csv_rejects_comma_decimal(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1;5\n")
    with pytest.raises(DataFileError):
        io.load_matrix_csv(f)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataFileError, match="not found"):
        io.load_matrix_csv(tmp_path / "nope.csv")


def test_load_csv_rejects_nan(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("1,nan\n")
    with pytest.raises(DataFileError, match="column 2"):
        io.load_matrix_csv(f)


def test_csv_round_trip_exact(tmp_path, rng):
    M = rng.standard_normal((64, 64)) * 10.0 ** rng.integers(-20, 20, (64, 64))
    io.save_matrix_csv(M, tmp_path / "m.csv", header="random")
    np.testing.assert_array_equal(io.load_matrix_csv(tmp_path / "m.csv"), M)


def test_binary_round_trip_exact(tmp_path, rng):
    M = rng.standard_normal((5, 7))
    io.save_matrix_bin(M, tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:8] == io.BIN_MAGIC and len(raw) == 16 + 8 * 35
    np.testing.assert_array_equal(io.load_matrix(tmp_path / "m.bin"), M)


def test_binary_rejects_bad_magic(tmp_path):
    (tmp_path / "m.bin").write_bytes(b"XXXXXXXX" + bytes(8))
    with pytest.raises(DataFileError, match="magic"):
        io.load_matrix_bin(tmp_path / "m.bin")


def test_binary_rejects_truncated_payload(tmp_path, rng):
    io.save_matrix_bin(rng.standard_normal((3, 3)), tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "m.bin").write_bytes(raw[:-8])
    with pytest.raises(DataFileError):
        io.load_matrix_bin(tmp_path / "m.bin")


def test_pgm_constant_is_mid_grey(tmp_path):
    io.render_pgm(np.full((3, 4), 2.5), tmp_path / "c.pgm")
    px = io.read_pgm(tmp_path / "c.pgm")
    assert px.shape == (3, 4) and np.all(px == 128)


def test_pgm_header(tmp_path):
    io.render_pgm(np.arange(6.0).reshape(2, 3), tmp_path / "a.pgm")
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n3 2\n255\n")


def test_pgm_two_values_map_to_extremes(tmp_path):
    B = make_signal(SignalSpec("cross"))
    io.render_pgm(B, tmp_path / "x.pgm")
    px = io.read_pgm(tmp_path / "x.pgm")
    assert set(np.unique(px).tolist()) == {0, 255}
    np.testing.assert_array_equal(px == 0, B > 0)


def test_pgm_unwritable_path(tmp_path):
    with pytest.raises(DataFileError):
        io.render_pgm(np.eye(2), tmp_path / "missing" / "x.pgm")


def _dataset(rng, n=6, p=3, q=2):
    return Dataset(rng.standard_normal((n, p, q)), np.repeat([1, 2], [n // 2, n - n // 2]))


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_dataset_round_trip(tmp_path, rng, fmt):
    d = _dataset(rng)
    man = io.write_dataset(d, tmp_path / "data", fmt=fmt)
    back = io.load_dataset(man)
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.labels, d.labels)
    assert back.names[0].endswith("." + fmt)


def test_manifest_shape_mismatch_names_first_bad_file(tmp_path, rng):
    man = io.write_dataset(_dataset(rng), tmp_path, checksums=False)
    io.save_matrix_csv(np.zeros((2, 2)), tmp_path / "x2.csv")
    io.save_matrix_csv(np.zeros((2, 2)), tmp_path / "x4.csv")
    with pytest.raises(DataFileError, match="x2.csv"):
        io.load_dataset(man)


def test_manifest_checksum_mismatch(tmp_path, rng):
    man = io.write_dataset(_dataset(rng), tmp_path)
    io.save_matrix_csv(np.zeros((3, 2)), tmp_path / "x1.csv")
    with pytest.raises(DataFileError, match="x1.csv: checksum"):
        io.load_dataset(man)


def test_manifest_validation(tmp_path):
    f = tmp_path / "m.json"
    f.write_text("{not json")
    with pytest.raises(DataFileError, match="invalid JSON"):
        io.read_manifest(f)
    f.write_text(json.dumps({"format_version": 99, "p": 1, "q": 1, "entries": []}))
    with pytest.raises(DataFileError, match="format_version"):
        io.read_manifest(f)
    f.write_text(json.dumps({"format_version": 1, "p": 1, "q": 1, "entries": [{"path": "a", "label": 3}]}))
    with pytest.raises(DataFileError, match="label"):
        io.read_manifest(f)
    with pytest.raises(DataFileError, match="not found"):
        io.read_manifest(tmp_path / "none.json")


def test_unlabelled_manifest(tmp_path, rng):
    d = Dataset(rng.standard_normal((3, 2, 2)), None)
    man = io.write_dataset(d, tmp_path)
    assert io.load_dataset(man).labels is None


def test_model_round_trip_bit_exact(tmp_path, rng):
    d = _dataset(rng, n=30, p=4, q=3)
    m = fit_matrix_lda(d, FitConfig(omega=0.01))
    io.save_model(m, tmp_path / "m.json", {"seed": 3})
    back, meta = io.load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.b_hat, m.b_hat)
    assert back.beta0_tilde == m.beta0_tilde and back.rank == m.rank
    assert meta == {"seed": 3}
    X = rng.standard_normal((100, 4, 3))
    np.testing.assert_array_equal(back.decision_function(X), m.decision_function(X))


def test_model_file_errors(tmp_path):
    with pytest.raises(DataFileError):
        io.load_model(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text(json.dumps({"format_version": 1, "p": 2, "q": 2, "b_hat": [1.0]}))
    with pytest.raises(DataFileError):
        io.load_model(tmp_path / "bad.json")


def test_report_round_trip():
    text = io.format_report([("a", {"x": 0.1, "y": None, "z": "cross"})],
                            [("t", ["i", "v"], [(0, 1.5), (1, 2.5)])])
    doc = io.parse_report(text)
    assert doc["a"] == {"x": "0.1", "y": "NA", "z": "cross"}
    assert doc["t"] == [{"i": "0", "v": "1.5"}, {"i": "1", "v": "2.5"}]
    assert text == io.format_report([("a", {"x": 0.1, "y": None, "z": "cross"})],
                                    [("t", ["i", "v"], [(0, 1.5), (1, 2.5)])])
