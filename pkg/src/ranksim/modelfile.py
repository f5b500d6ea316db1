"""Binary model persistence.

Layout (all integers and floats little-endian)::

    "RSF1"                magic
    u32 version           currently 1
    u32 flags             bits 0-1 mode (0 transform, 1 rsc, 2 rspc); bit 2 map present
    u64 m, n, c           filters, features, classes
    u64 seed, k_default
    f64[m*n]              L1-normalized filter weights, row-major
    f64[m*c]              filter labels (one-hot for rsc)
    u64 n_maps            only when bit 2 is set: 1, or one map per class for rsc
    f64[n_maps*n]         distribution maps
    f64[c]                class ids
    u32                   CRC-32 of every preceding byte

Ranks are not stored; they are recovered from the weights, whose order
the distribution map preserves.
"""

import os
import struct
import tempfile
import zlib

import numpy as np

from .classifiers import RSCModel, RSPCModel
from .errors import ModelFormatError
from .filters import FilterBank
from .ranking import rank_rows

MAGIC = b"RSF1"
VERSION = 1
MODES = {"transform": 0, "rsc": 1, "rspc": 2}
HAS_MAP = 4
_HEADER = struct.Struct("<4sII5Q")
NORM_TOL = 1e-9


def _parts(model):
    """Mode, weights, labels, maps, class ids and bank metadata of a model."""
    if isinstance(model, FilterBank):
        maps = [] if model.distribution is None else [model.distribution]
        return "transform", model.weights, np.zeros((model.n_filters, 0)), maps, np.zeros(0), model
    if isinstance(model, RSCModel):
        dists = [b.distribution for b in model.banks]
        if any(d is None for d in dists) and not all(d is None for d in dists):
            raise ModelFormatError("rsc banks must all have a distribution map or none")
        maps = [] if dists[0] is None else dists
        return "rsc", model.weights, model.labels, maps, model.class_ids, model.banks[0]
    if isinstance(model, RSPCModel):
        bank = model.bank
        maps = [] if bank.distribution is None else [bank.distribution]
        return "rspc", bank.weights, model.labels, maps, model.class_ids, bank
    raise TypeError(f"cannot serialize {type(model).__name__}")


def to_bytes(model):
    mode, W, L, maps, class_ids, bank = _parts(model)
    m, n = W.shape
    c = L.shape[1]
    try:
        ids = np.asarray(class_ids, dtype="<f8")
    except (TypeError, ValueError):
        raise ModelFormatError("class ids must be numeric to be stored") from None
    flags = MODES[mode] | (HAS_MAP if maps else 0)
    chunks = [
        _HEADER.pack(MAGIC, VERSION, flags, m, n, c, int(bank.seed), int(bank.k_default)),
        np.ascontiguousarray(W, dtype="<f8").tobytes(),
        np.ascontiguousarray(L, dtype="<f8").tobytes(),
    ]
    if maps:
        chunks.append(struct.pack("<Q", len(maps)))
        chunks.append(np.ascontiguousarray(np.vstack(maps), dtype="<f8").tobytes())
    chunks.append(ids.tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def _read(buf, offset, count, what):
    end = offset + 8 * count
    if end > len(buf):
        raise ModelFormatError(f"model file truncated while reading {what}")
    return np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64), end


def from_bytes(buf):
    """Parse and validate a model; returns a FilterBank, RSCModel or RSPCModel."""
    if len(buf) < _HEADER.size + 4:
        raise ModelFormatError("model file too short")
    body, crc = buf[:-4], struct.unpack("<I", buf[-4:])[0]
    if buf[:4] != MAGIC:
        raise ModelFormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    if zlib.crc32(body) != crc:
        raise ModelFormatError("CRC mismatch: model file is corrupted")
    _, version, flags, m, n, c, seed, k_default = _HEADER.unpack_from(body)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    codes = {v: k for k, v in MODES.items()}
    if flags & ~(3 | HAS_MAP) or (flags & 3) not in codes:
        raise ModelFormatError(f"invalid flags {flags:#x}")
    mode = codes[flags & 3]
    if m < 1 or n < 1:
        raise ModelFormatError("model has no filters or no features")
    if (mode == "transform") != (c == 0):
        raise ModelFormatError("class count does not match model mode")
    pos = _HEADER.size
    W, pos = _read(body, pos, m * n, "weights")
    L, pos = _read(body, pos, m * c, "labels")
    W, L = W.reshape(m, n), L.reshape(m, c)
    maps = []
    if flags & HAS_MAP:
        if pos + 8 > len(body):
            raise ModelFormatError("model file truncated while reading map count")
        (n_maps,) = struct.unpack_from("<Q", body, pos)
        expected = c if mode == "rsc" else 1
        if n_maps != expected:
            raise ModelFormatError(f"expected {expected} distribution maps, found {n_maps}")
        flat, pos = _read(body, pos + 8, n_maps * n, "distribution maps")
        maps = list(flat.reshape(n_maps, n))
    ids, pos = _read(body, pos, c, "class ids")
    if pos != len(body):
        raise ModelFormatError(f"{len(body) - pos} unexpected trailing bytes")
    _check_weights(W, L, mode)
    ranks = rank_rows(W)

    def bank(rows, dist):
        return FilterBank(ranks[rows], dist, k_default=int(k_default), seed=int(seed),
                          mode="rank" if dist is None else "confusion")

    if mode == "transform":
        return bank(slice(None), maps[0] if maps else None)
    if mode == "rspc":
        return RSPCModel(bank(slice(None), maps[0] if maps else None), L, _ids(ids))
    owner = np.argmax(L, axis=1)
    if np.any(np.diff(owner) < 0):
        raise ModelFormatError("rsc filters must be grouped by class")
    banks = []
    for i in range(c):
        rows = np.flatnonzero(owner == i)
        if rows.size == 0:
            raise ModelFormatError(f"class {i} has no filters")
        b = bank(rows, maps[i] if maps else None)
        b.seed = int(seed) + i
        banks.append(b)
    return RSCModel(banks, _ids(ids))


def _ids(ids):
    as_int = ids.astype(np.int64)
    return as_int if np.array_equal(as_int, ids) else ids


def _check_weights(W, L, mode):
    if not np.all(np.isfinite(W)) or np.any(W < 0):
        raise ModelFormatError("filter weights must be finite and non-negative")
    norms = W.sum(axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ModelFormatError("filter weights are not L1-normalized")
    if L.size and (not np.all(np.isfinite(L)) or np.any(L < 0)):
        raise ModelFormatError("filter labels must be finite and non-negative")
    if mode == "rsc" and (not np.all((L == 0) | (L == 1)) or np.any(L.sum(axis=1) != 1)):
        raise ModelFormatError("rsc filter labels must be one-hot")


def atomic_write(path, data):
    """Write bytes via a temporary file in the same directory and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model, path):
    atomic_write(path, to_bytes(model))


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
