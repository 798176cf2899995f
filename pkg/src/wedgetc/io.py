"""Flat-file formats for tensors, CP models and sampled index sets.

Binary files share a 16-byte header: an 8-byte magic, a little-endian u32
format version and a reserved u32. Dense arrays follow with ``u32 k``,
``u32 dims[k]`` and little-endian f64 entries in row-major order; index
sets store their parameters and then the sorted keys as u64.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .sampling import ObservationSet, WedgeSampleSet
from .tensor_core import CPModel

__all__ = [
    "FormatError",
    "save_tensor",
    "load_tensor",
    "save_cp_model",
    "load_cp_model",
    "save_subspace",
    "save_wedges",
    "load_wedges",
    "save_observations",
    "load_observations",
    "wedges_to_csv",
    "observations_to_csv",
]

VERSION = 1
TENSOR_MAGIC = b"WTCTENSR"
WEDGE_MAGIC = b"WTCWEDGE"
OBS_MAGIC = b"WTCOBSRV"


class FormatError(ValueError):
    pass


def _header(magic):
    return magic + struct.pack("<II", VERSION, 0)


def _check_header(buf, magic, path):
    if len(buf) < 16 or buf[:8] != magic:
        raise FormatError(f"{path}: not a {magic.decode()} file")
    version, _ = struct.unpack_from("<II", buf, 8)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    return 16


def save_tensor(path, T) -> None:
    T = np.ascontiguousarray(T, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_header(TENSOR_MAGIC))
        fh.write(struct.pack(f"<I{T.ndim}I", T.ndim, *T.shape))
        fh.write(T.tobytes(order="C"))


def load_tensor(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    off = _check_header(buf, TENSOR_MAGIC, path)
    (k,) = struct.unpack_from("<I", buf, off)
    dims = struct.unpack_from(f"<{k}I", buf, off + 4)
    off += 4 + 4 * k
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) - off != 8 * count:
        raise FormatError(f"{path}: expected {count} entries, found {(len(buf) - off) // 8}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(dims).astype(np.float64)


def save_subspace(path, estimate) -> None:
    """Basis ``U`` of a subspace estimate, as an order-2 tensor file."""
    save_tensor(path, estimate.U if hasattr(estimate, "U") else estimate)


def save_cp_model(path, model: CPModel) -> None:
    Path(path).write_text(json.dumps(model.to_json_dict()), encoding="utf-8")


def load_cp_model(path) -> CPModel:
    try:
        return CPModel.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: malformed CP model ({exc})") from exc


def _keys_bytes(keys):
    return np.ascontiguousarray(keys, dtype="<u8").tobytes()


def save_wedges(path, wedges: WedgeSampleSet) -> None:
    with open(path, "wb") as fh:
        fh.write(_header(WEDGE_MAGIC))
        fh.write(struct.pack("<QQdQ", wedges.n, wedges.m, wedges.p, len(wedges)))
        fh.write(_keys_bytes(wedges.keys))


def load_wedges(path) -> WedgeSampleSet:
    buf = Path(path).read_bytes()
    off = _check_header(buf, WEDGE_MAGIC, path)
    n, m, p, count = struct.unpack_from("<QQdQ", buf, off)
    off += 32
    keys = np.frombuffer(buf, dtype="<u8", count=count, offset=off).astype(np.int64)
    return WedgeSampleSet(n=int(n), m=int(m), p=p, keys=keys)


def save_observations(path, obs: ObservationSet) -> None:
    k = len(obs.shape)
    with open(path, "wb") as fh:
        fh.write(_header(OBS_MAGIC))
        fh.write(struct.pack(f"<I{k}IdQ", k, *obs.shape, obs.q, len(obs)))
        fh.write(_keys_bytes(obs.flat))


def load_observations(path) -> ObservationSet:
    buf = Path(path).read_bytes()
    off = _check_header(buf, OBS_MAGIC, path)
    (k,) = struct.unpack_from("<I", buf, off)
    fmt = f"<{k}IdQ"
    vals = struct.unpack_from(fmt, buf, off + 4)
    off += 4 + struct.calcsize(fmt)
    shape, q, count = tuple(vals[:k]), vals[k], vals[k + 1]
    flat = np.frombuffer(buf, dtype="<u8", count=count, offset=off).astype(np.int64)
    return ObservationSet(shape=shape, q=q, flat=flat)


def wedges_to_csv(path, wedges: WedgeSampleSet) -> None:
    i, ell, j = wedges.triples()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "l", "j"])
        w.writerows(zip(i.tolist(), ell.tolist(), j.tolist()))


def observations_to_csv(path, obs: ObservationSet) -> None:
    idx = obs.indices
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"i{d}" for d in range(len(obs.shape))])
        w.writerows(zip(*(a.tolist() for a in idx)))
