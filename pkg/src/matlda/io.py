"""File formats: matrix CSV/binary, PGM rendering, dataset manifests, model files, reports."""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DataFileError, InvalidInputError
from .lda import DiscriminantModel
from . import matcore

FORMAT_VERSION = 1
BIN_MAGIC = b"MLDAMAT1"
_BIN_HEADER = struct.Struct("<8sII")


# -- single matrices -------------------------------------------------------------

def load_matrix_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV; lines starting with ``#`` before the data are a header.

    Rows and columns in error messages are 1-based and count data rows only.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFileError(f"{path}: file not found") from None
    except OSError as exc:
        raise DataFileError(f"{path}: cannot read ({exc.strerror})") from None
    rows = []
    width = None
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.lstrip().startswith("#"):
            if rows:
                raise DataFileError(f"{path}: comment line after data row {len(rows)}")
            continue
        r = len(rows) + 1
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataFileError(f"{path}: ragged row {r}: {len(cells)} columns, expected {width}")
        vals = []
        for c, cell in enumerate(cells, 1):
            try:
                v = float(cell)
            except ValueError:
                raise DataFileError(
                    f"{path}: non-numeric cell {cell.strip()!r} at row {r}, column {c}") from None
            if not np.isfinite(v):
                raise DataFileError(f"{path}: non-finite value at row {r}, column {c}")
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise DataFileError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def save_matrix_csv(M, path, header: str | None = None) -> None:
    """Write ``M`` with 17 significant digits, enough to round-trip every float64."""
    M = matcore.as_mat(M)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write(f"# {header}\n")
        for row in M:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def save_matrix_bin(M, path) -> None:
    """Packed little-endian float64: magic, ``p``, ``q``, then the row-major payload."""
    M = matcore.as_mat(M)
    with open(path, "wb") as fh:
        fh.write(_BIN_HEADER.pack(BIN_MAGIC, *M.shape))
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def load_matrix_bin(path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DataFileError(f"{path}: file not found") from None
    if len(raw) < _BIN_HEADER.size:
        raise DataFileError(f"{path}: truncated header")
    magic, p, q = _BIN_HEADER.unpack_from(raw)
    if magic != BIN_MAGIC:
        raise DataFileError(f"{path}: bad magic {magic!r}")
    payload = raw[_BIN_HEADER.size:]
    if len(payload) != 8 * p * q or p == 0 or q == 0:
        raise DataFileError(f"{path}: payload of {len(payload)} bytes does not hold {p}x{q} floats")
    M = np.frombuffer(payload, dtype="<f8").reshape(p, q).astype(np.float64)
    if not np.all(np.isfinite(M)):
        raise DataFileError(f"{path}: non-finite entries")
    return M


def load_matrix(path) -> np.ndarray:
    """Dispatch on the extension: ``.bin`` is the packed format, anything else CSV."""
    return load_matrix_bin(path) if str(path).endswith(".bin") else load_matrix_csv(path)


def save_matrix(M, path) -> None:
    if str(path).endswith(".bin"):
        save_matrix_bin(M, path)
    else:
        save_matrix_csv(M, path)


def render_pgm(M, path) -> None:
    """Binary greyscale PGM; the largest entry is black (0), the smallest white (255)."""
    M = matcore.as_mat(M)
    lo, hi = float(M.min()), float(M.max())
    if hi == lo:
        px = np.full(M.shape, 128, dtype=np.uint8)
    else:
        px = np.rint(255.0 * (hi - M) / (hi - lo)).astype(np.uint8)
    p, q = M.shape
    try:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{q} {p}\n255\n".encode("ascii"))
            fh.write(px.tobytes())
    except OSError as exc:
        raise DataFileError(f"{path}: cannot write ({exc.strerror})") from None


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`render_pgm` (pixel values only)."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise DataFileError(f"{path}: not an 8-bit P5 image")
    q, p = int(parts[1]), int(parts[2])
    return np.frombuffer(raw[-p * q:], dtype=np.uint8).reshape(p, q)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- manifests -------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int | None
    sha256: str | None = None


@dataclass(frozen=True)
class Manifest:
    """List of matrix files with labels; relative paths resolve against ``root``."""

    p: int
    q: int
    entries: tuple
    root: Path = Path(".")
    format_version: int = FORMAT_VERSION

    def to_json(self) -> str:
        doc = {
            "format_version": self.format_version,
            "p": self.p,
            "q": self.q,
            "entries": [{k: v for k, v in (("path", e.path), ("label", e.label), ("sha256", e.sha256))
                         if v is not None} for e in self.entries],
        }
        return json.dumps(doc, indent=1) + "\n"


def read_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFileError(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise DataFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    try:
        version = int(doc["format_version"])
        p, q = int(doc["p"]), int(doc["q"])
        raw = doc["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFileError(f"{path}: missing or malformed field {exc}") from None
    if version != FORMAT_VERSION:
        raise DataFileError(f"{path}: unsupported format_version {version}")
    if p < 1 or q < 1:
        raise DataFileError(f"{path}: p and q must be positive")
    entries = []
    for i, e in enumerate(raw):
        if not isinstance(e, dict) or "path" not in e:
            raise DataFileError(f"{path}: entry {i} has no path")
        label = e.get("label")
        if label is not None and label not in (1, 2):
            raise DataFileError(f"{path}: entry {i} ({e['path']}) has label {label!r}, expected 1 or 2")
        entries.append(ManifestEntry(str(e["path"]), label, e.get("sha256")))
    if not entries:
        raise DataFileError(f"{path}: manifest lists no files")
    return Manifest(p, q, tuple(entries), path.parent, version)


def load_dataset(manifest_path, verify: bool = True) -> Dataset:
    """Load every matrix listed in a manifest.

    Files are checked in manifest order, so the error names the first
    offending file. Labels must be given for all entries or for none.
    """
    man = read_manifest(manifest_path)
    mats = []
    for e in man.entries:
        f = man.root / e.path
        if verify and e.sha256 is not None and f.exists() and file_sha256(f) != e.sha256:
            raise DataFileError(f"{f}: checksum mismatch")
        M = load_matrix(f)
        if M.shape != (man.p, man.q):
            raise DataFileError(f"{f}: matrix is {M.shape[0]}x{M.shape[1]}, manifest says {man.p}x{man.q}")
        mats.append(M)
    labels = [e.label for e in man.entries]
    if all(lab is None for lab in labels):
        labels = None
    elif any(lab is None for lab in labels):
        raise DataFileError(f"{manifest_path}: labels given for some entries but not all")
    return Dataset(np.stack(mats), labels, tuple(e.path for e in man.entries))


def write_dataset(d: Dataset, directory, stem: str = "x", fmt: str = "csv",
                  manifest_name: str = "manifest.json", checksums: bool = True) -> Path:
    """Write one file per sample plus a manifest; returns the manifest path."""
    if fmt not in ("csv", "bin"):
        raise InvalidInputError(f"format must be csv or bin, got {fmt!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = len(str(d.n - 1))
    p, q = d.shape
    entries = []
    for i in range(d.n):
        name = f"{stem}{i:0{width}d}.{fmt}"
        save_matrix(d.X[i], directory / name)
        label = None if d.labels is None else int(d.labels[i])
        sha = file_sha256(directory / name) if checksums else None
        entries.append(ManifestEntry(name, label, sha))
    out = directory / manifest_name
    out.write_text(Manifest(p, q, tuple(entries)).to_json(), encoding="utf-8")
    return out


# -- models ----------------------------------------------------------------------

def model_to_dict(model: DiscriminantModel, metadata: dict | None = None) -> dict:
    p, q = model.shape
    return {
        "format_version": FORMAT_VERSION,
        "p": p,
        "q": q,
        "b_hat": model.b_hat.ravel().tolist(),
        "beta0_tilde": model.beta0_tilde,
        "omega": model.omega,
        "rank": model.rank,
        "singulars": np.asarray(model.singulars, dtype=float).tolist(),
        "diagnostics": model.diagnostics,
        "metadata": metadata or {},
    }


def save_model(model: DiscriminantModel, path, metadata: dict | None = None) -> None:
    """JSON model file. Python's float repr round-trips, so ``b_hat`` reloads bit-exactly."""
    Path(path).write_text(json.dumps(model_to_dict(model, metadata), indent=1, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_model(path):
    """Returns ``(model, metadata)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFileError(f"{path}: model file not found") from None
    except json.JSONDecodeError as exc:
        raise DataFileError(f"{path}: invalid JSON ({exc.msg})") from None
    try:
        if int(doc["format_version"]) != FORMAT_VERSION:
            raise DataFileError(f"{path}: unsupported format_version {doc['format_version']}")
        p, q = int(doc["p"]), int(doc["q"])
        b = np.array(doc["b_hat"], dtype=np.float64)
        if b.size != p * q:
            raise DataFileError(f"{path}: b_hat has {b.size} entries, expected {p * q}")
        model = DiscriminantModel(b.reshape(p, q), float(doc["beta0_tilde"]), float(doc["omega"]),
                                  int(doc["rank"]), np.array(doc["singulars"], dtype=np.float64),
                                  dict(doc.get("diagnostics", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFileError(f"{path}: malformed model file ({exc})") from None
    return model, dict(doc.get("metadata", {}))


# -- reports ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "NA"
    return str(v)


def format_report(sections, tables=()) -> str:
    """Flat text report of ``[name]`` key/value sections followed by CSV table sections.

    ``sections`` is a sequence of ``(name, mapping)``; ``tables`` a sequence of
    ``(name, header, rows)``. Floats are written with ``repr`` so values
    survive a round trip and equal inputs give identical bytes.
    """
    out = []
    for name, kv in sections:
        out.append(f"[{name}]")
        for k, v in kv.items():
            out.append(f"{k} = {_fmt(v)}")
        out.append("")
    for name, header, rows in tables:
        out.append(f"[table {name}]")
        out.append(",".join(header))
        for r in rows:
            out.append(",".join(_fmt(v) for v in r))
        out.append("")
    return "\n".join(out)


def parse_report(text: str) -> dict:
    """Read a :func:`format_report` document back as ``{section: dict or list of rows}``."""
    doc, cur, name, header = {}, None, None, None
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("[table "):
            name, header = line[7:-1], None
            cur = doc[name] = []
        elif line.startswith("["):
            name, header = line[1:-1], None
            cur = doc[name] = {}
        elif isinstance(cur, dict):
            k, _, v = line.partition(" = ")
            cur[k] = v
        elif header is None:
            header = line.split(",")
        else:
            cur.append(dict(zip(header, line.split(","))))
    return doc


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
