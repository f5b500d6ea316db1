"""Data matrices, file loaders and synthetic generators.

A data matrix is either a dense float64 ``ndarray`` or a
``scipy.sparse.csr_matrix`` with sorted indices and no explicit zeros.
Values are expected to be non-negative so that implicit zeros of a CSR
row rank exactly like explicit zeros of the dense row.
"""

import csv
import gzip
import math
import struct

import numpy as np
import scipy.sparse as sp

from .errors import DataFormatError, InvalidInputError

# rows per block when streaming over a matrix
BLOCK_ROWS = 4096


def as_matrix(X, copy=False):
    """Validate and canonicalize a data matrix (dense float64 or CSR)."""
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=np.float64, copy=copy)
        if not X.has_canonical_format or np.any(X.data == 0):
            # never rewrite the caller's matrix in place
            X = X.copy()
        X.sum_duplicates()
        X.eliminate_zeros()
        X.sort_indices()
        if not np.all(np.isfinite(X.data)):
            raise InvalidInputError("data contains non-finite values")
        if X.nnz and X.data.min() < 0:
            raise InvalidInputError("sparse data must be non-negative")
        return X
    X = np.array(X, dtype=np.float64, copy=True if copy else None, order="C", ndmin=2)
    if X.ndim != 2:
        raise InvalidInputError(f"expected a 2-D data matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("data contains non-finite values")
    return X


def dense_rows(X, rows):
    """Dense float64 copy of the selected rows."""
    if sp.issparse(X):
        return X[rows].toarray()
    return np.array(X[rows], dtype=np.float64)


def iter_blocks(X, block_rows=BLOCK_ROWS):
    """Yield ``(start, stop, block_as_csr)`` over row blocks.

    Dense and sparse inputs produce the same CSR blocks, so statistics
    accumulated from them agree bit for bit.
    """
    N = X.shape[0]
    for start in range(0, N, block_rows):
        stop = min(start + block_rows, N)
        block = sp.csr_matrix(X[start:stop])
        block.eliminate_zeros()
        yield start, stop, block


def column_moments(X):
    """Per-column mean and (population) variance, two-pass."""
    N, n = X.shape
    total = np.zeros(n)
    for _, _, block in iter_blocks(X):
        total += np.bincount(block.indices, weights=block.data, minlength=n)
    mean = total / N
    sq = np.zeros(n)
    nnz = np.zeros(n)
    for _, _, block in iter_blocks(X):
        dev = block.data - mean[block.indices]
        sq += np.bincount(block.indices, weights=dev * dev, minlength=n)
        nnz += np.bincount(block.indices, minlength=n)
    var = (sq + (N - nnz) * mean * mean) / N
    return mean, var


def value_range(X):
    """Max minus min over all entries, counting implicit zeros."""
    if sp.issparse(X):
        vals = X.data
        if X.nnz < X.shape[0] * X.shape[1]:
            vals = np.concatenate([vals, [0.0]])
        return float(vals.max() - vals.min()) if vals.size else 0.0
    return float(X.max() - X.min()) if X.size else 0.0


def similarity(X, W):
    """Dot products of every sample with every row of ``W`` (N x m, dense)."""
    out = X @ W.T
    return np.asarray(out.toarray() if sp.issparse(out) else out)


# --------------------------------------------------------------------------
# CSV


def _parse_number(text, lineno, col):
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"line {lineno}, column {col + 1}: not a number: {text!r}") from None


def _labels_array(raw):
    try:
        vals = np.array([float(v) for v in raw])
    except ValueError:
        return np.array(raw)
    if np.all(vals == np.round(vals)):
        return vals.astype(np.int64)
    return vals


def load_csv(path, has_header=False, label_column=None):
    """Read a numeric CSV file into a dense matrix.

    ``label_column`` (an index, negative allowed) is split off and returned
    as the label vector; otherwise labels are ``None``.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(not c.strip() for c in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataFormatError(f"line {lineno}: expected {width} fields, got {len(record)}")
            if label_column is not None:
                lc = label_column % width
                labels.append(record[lc].strip())
                record = record[:lc] + record[lc + 1:]
            rows.append([_parse_number(c, lineno, i) for i, c in enumerate(record)])
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    X = np.array(rows, dtype=np.float64)
    if X.shape[1] == 0:
        raise DataFormatError(f"{path}: no feature columns")
    return X, (_labels_array(labels) if label_column is not None else None)


def save_csv(path, X, labels=None):
    """Write a dense matrix as CSV, labels (if any) as the last column."""
    X = np.asarray(X.toarray() if sp.issparse(X) else X, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(X):
            fields = [repr(float(v)) for v in row]
            if labels is not None:
                fields.append(str(labels[i]))
            writer.writerow(fields)


# --------------------------------------------------------------------------
# IDX (the MNIST family distribution format)

_IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def load_idx(path):
    """Read an IDX file.

    One-dimensional files (label files) come back as an integer or float
    vector; two- and three-dimensional files are flattened row-major into
    an ``N x (d1 * d2)`` float64 matrix.  Gzipped files are accepted.
    """
    with _open_maybe_gzip(path) as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise DataFormatError(f"{path}: bad IDX magic")
    type_code, ndim = raw[2], raw[3]
    if type_code not in _IDX_TYPES:
        raise DataFormatError(f"{path}: unknown IDX element type 0x{type_code:02x}")
    if not 1 <= ndim <= 3:
        raise DataFormatError(f"{path}: IDX files with {ndim} dimensions are not supported")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    dtype = _IDX_TYPES[type_code]
    expected = math.prod(dims) * dtype.itemsize
    payload = raw[header:]
    if len(payload) != expected:
        raise DataFormatError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    arr = np.frombuffer(payload, dtype=dtype)
    if ndim == 1:
        return arr.astype(np.int64 if dtype.kind in "iu" else np.float64)
    return arr.reshape(dims[0], -1).astype(np.float64)


def save_idx(path, array, type_code=0x08):
    """Write an array as an IDX file (used for fixtures and exports)."""
    array = np.asarray(array)
    if not 1 <= array.ndim <= 3:
        raise InvalidInputError("IDX export supports 1 to 3 dimensions")
    dtype = _IDX_TYPES[type_code]
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, type_code, array.ndim]))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.astype(dtype).tobytes())


# --------------------------------------------------------------------------
# svmlight / libsvm text format


def _parse_label(text, lineno):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"line {lineno}: bad label {text!r}") from None
    return int(v) if v == int(v) else v


def load_svmlight(path, n_features=None, zero_based=False):
    """Read an svmlight file into a CSR matrix and a list of label tuples.

    Each line is ``label[,label...] index:value ...`` with 1-based
    indices (``zero_based=True`` for 0-based).  Indices must increase
    strictly within a line.
    """
    indptr, indices, data, label_sets = [0], [], [], []
    offset = 0 if zero_based else 1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            label_sets.append(tuple(_parse_label(t, lineno) for t in parts[0].split(",") if t))
            prev = -1
            for tok in parts[1:]:
                idx_text, sep, val_text = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"line {lineno}: expected index:value, got {tok!r}")
                try:
                    idx = int(idx_text) - offset
                    val = float(val_text)
                except ValueError:
                    raise DataFormatError(f"line {lineno}: bad feature {tok!r}") from None
                if idx < 0:
                    raise DataFormatError(f"line {lineno}: index {idx_text} out of range")
                if idx <= prev:
                    raise DataFormatError(f"line {lineno}: indices must be strictly increasing")
                if n_features is not None and idx >= n_features:
                    raise DataFormatError(f"line {lineno}: index {idx_text} exceeds {n_features} features")
                prev = idx
                indices.append(idx)
                data.append(val)
            indptr.append(len(indices))
    if not label_sets:
        raise DataFormatError(f"{path}: no data rows")
    if n_features is None:
        n_features = (max(indices) + 1) if indices else 1
    X = sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(label_sets), n_features),
    )
    return as_matrix(X), label_sets


def dump_svmlight(path, X, label_sets, zero_based=False):
    """Write a matrix and label tuples in svmlight format."""
    X = sp.csr_matrix(X)
    X.sort_indices()
    offset = 0 if zero_based else 1
    with open(path, "w") as fh:
        for i in range(X.shape[0]):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            labels = ",".join(str(v) for v in label_sets[i])
            feats = " ".join(f"{j + offset}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
            fh.write(f"{labels} {feats}".rstrip() + "\n")


def label_matrix(label_sets, classes=None):
    """Binary N x c indicator matrix from label tuples; returns ``(Y, classes)``."""
    if classes is None:
        classes = sorted({v for s in label_sets for v in s})
    lookup = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((len(label_sets), len(classes)))
    for r, s in enumerate(label_sets):
        for v in s:
            Y[r, lookup[v]] = 1.0
    return Y, np.asarray(classes)


# --------------------------------------------------------------------------
# synthetic data


def make_rank_clusters(n_classes, per_class, n_features, noise_std, seed=0, mirror=False):
    """Classes that differ only in the order of their feature values.

    Each class gets a random permutation of ``1..n_features`` as its mean
    pattern; samples are the pattern plus gaussian noise, clipped at 0.
    With ``mirror=True`` half of each class uses the reversed pattern
    (``n_features + 1 - pattern``), which makes every class mean the same
    constant vector so no linear function of the raw values can separate
    the classes.

    Returns ``(X, y)`` with rows shuffled.
    """
    if n_features < 9:
        raise InvalidInputError("rank clusters need at least 9 features")
    if n_classes < 1 or per_class < 1 or noise_std < 0:
        raise InvalidInputError("invalid rank cluster sizes")
    rng = np.random.default_rng(seed)
    patterns = np.array([rng.permutation(n_features) + 1.0 for _ in range(n_classes)])
    y = np.repeat(np.arange(n_classes), per_class)
    means = patterns[y]
    if mirror:
        # exactly half of each class is mirrored so class means coincide
        flip = np.concatenate([rng.permutation(per_class) < per_class // 2 for _ in range(n_classes)])
        means[flip] = n_features + 1.0 - means[flip]
    X = np.maximum(means + rng.normal(0.0, noise_std, means.shape), 0.0) if noise_std > 0 else means
    order = rng.permutation(y.size)
    return X[order], y[order]


def zipf_means(n_features, exponent, scale=50.0):
    """Feature means ``scale * j ** -exponent`` for ``j = 1..n_features``."""
    if exponent < 0 or n_features < 1:
        raise InvalidInputError("invalid zipf parameters")
    return scale * np.arange(1, n_features + 1, dtype=np.float64) ** -exponent


def make_zipf_features(n_features, exponent, N, seed=0, scale=50.0):
    """Poisson counts whose feature means follow a power law in feature index."""
    if N < 1:
        raise InvalidInputError("N must be positive")
    rng = np.random.default_rng(seed)
    return rng.poisson(zipf_means(n_features, exponent, scale), size=(N, n_features)).astype(np.float64)


def make_zipf_classification(n_classes, per_class, n_features, exponent=1.0, scale=50.0,
                             n_swaps=None, seed=0):
    """Word-count-like classes sharing one power-law frequency profile.

    Every class starts from the same Zipf profile over the features and
    then exchanges the frequencies of ``n_swaps`` random feature pairs,
    so classes share most of their vocabulary statistics and differ in a
    few relative frequencies.  Counts are Poisson.  Returns ``(X, y)``.
    """
    rng = np.random.default_rng(seed)
    base = zipf_means(n_features, exponent, scale)
    if n_swaps is None:
        n_swaps = max(1, n_features // 4)
    profiles = []
    for _ in range(n_classes):
        prof = base.copy()
        for _ in range(n_swaps):
            a, b = rng.choice(n_features, size=2, replace=False)
            prof[a], prof[b] = prof[b], prof[a]
        profiles.append(prof)
    y = np.repeat(np.arange(n_classes), per_class)
    X = rng.poisson(np.array(profiles)[y]).astype(np.float64)
    order = rng.permutation(y.size)
    return X[order], y[order]
