"""Dissimilarity matrices: construction from points and words, validation, file I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

MAGIC = "DSOM-DISSIM 1"

# Largest magnitude below which float64 integers (and their sums) stay exact.
EXACT_INT_LIMIT = 2.0**53


class MatrixError(ValueError):
    """Base class for invalid dissimilarity data."""


class MatrixFormatError(MatrixError):
    """Malformed file header or unparsable content."""


class MatrixShapeError(MatrixError):
    """Matrix is not square or the row count disagrees with the header."""


class SymmetryError(MatrixError):
    def __init__(self, i: int, k: int, a: float, b: float):
        super().__init__(f"matrix not symmetric at ({i}, {k}): {a!r} != {b!r}")
        self.pair = (i, k)


class DiagonalError(MatrixError):
    def __init__(self, i: int, value: float):
        super().__init__(f"nonzero diagonal entry at ({i}, {i}): {value!r}")
        self.index = i


class NegativeEntryError(MatrixError):
    def __init__(self, i: int, k: int, value: float):
        super().__init__(f"negative entry at ({i}, {k}): {value!r}")
        self.pair = (i, k)


@dataclass(frozen=True)
class PointSet:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[0] < 1:
            raise ValueError("a point set needs at least one row of coordinates")
        if not np.all(np.isfinite(coords)):
            raise ValueError("point coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


class DissimilarityMatrix:
    """Dense symmetric N x N table of nonnegative dissimilarities.

    The values array is read-only once constructed. ``kind`` is ``"integer"``
    when every entry is an exact integer small enough that all sums used by
    the training engine are exact in float64, ``"real"`` otherwise.
    """

    def __init__(self, values, check: bool = True):
        values = np.array(values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise MatrixShapeError(f"expected a square matrix, got shape {values.shape}")
        if values.shape[0] == 0:
            raise MatrixShapeError("empty matrix")
        if check:
            validate_values(values)
        values.setflags(write=False)
        self.values = values
        self.kind = _detect_kind(values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def is_integer(self) -> bool:
        return self.kind == "integer"

    def __repr__(self):
        return f"DissimilarityMatrix(n={self.n}, kind={self.kind!r})"

    def __eq__(self, other):
        if not isinstance(other, DissimilarityMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)


def validate_values(values: np.ndarray) -> None:
    """Raise a specific MatrixError for the first violated invariant."""
    if not np.all(np.isfinite(values)):
        i, k = map(int, np.argwhere(~np.isfinite(values))[0])
        raise MatrixFormatError(f"non-finite entry at ({i}, {k})")
    diag = np.diagonal(values)
    bad = np.flatnonzero(diag != 0.0)
    if bad.size:
        raise DiagonalError(int(bad[0]), float(diag[bad[0]]))
    neg = np.argwhere(values < 0.0)
    if neg.size:
        i, k = map(int, neg[0])
        raise NegativeEntryError(i, k, float(values[i, k]))
    asym = np.argwhere(np.triu(values != values.T))
    if asym.size:
        i, k = map(int, asym[0])
        raise SymmetryError(i, k, float(values[i, k]), float(values[k, i]))


def _detect_kind(values: np.ndarray) -> str:
    # Row sums bound every partial sum the engine forms.
    if np.all(values == np.rint(values)) and values.sum(axis=1).max() < EXACT_INT_LIMIT:
        return "integer"
    return "real"


def generate_uniform_square(n: int, seed: int) -> PointSet:
    """Draw ``n`` points uniformly in [0, 1]^2 from numpy's PCG64 seeded with ``seed``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    return PointSet(rng.random((n, 2)))


def build_from_vectors(points: PointSet) -> DissimilarityMatrix:
    """Squared Euclidean dissimilarities, each pair computed once and mirrored."""
    return DissimilarityMatrix(_squared_euclidean(points.coords), check=False)


@numba.njit(cache=True)
def _squared_euclidean(x):
    n, dim = x.shape
    out = np.zeros((n, n))
    for i in range(n):
        for k in range(i + 1, n):
            s = 0.0
            for t in range(dim):
                diff = x[i, t] - x[k, t]
                s += diff * diff
            out[i, k] = s
            out[k, i] = s
    return out


def integerize(matrix: DissimilarityMatrix, scale: float) -> DissimilarityMatrix:
    """Scale and round to the nearest integer (ties to even)."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    out = DissimilarityMatrix(np.rint(matrix.values * scale), check=True)
    if not out.is_integer:
        raise ValueError(f"scale {scale} overflows the exact-integer range for n={out.n}")
    return out


# -- edit distance ---------------------------------------------------------------


def _codes(s: str) -> np.ndarray:
    # One entry per Unicode scalar value.
    return np.array([ord(ch) for ch in s], dtype=np.int64)


@numba.njit(cache=True)
def _lev_codes(a, b, row):
    la, lb = a.shape[0], b.shape[0]
    for t in range(lb + 1):
        row[t] = t
    for s in range(1, la + 1):
        diag = row[0]
        row[0] = s
        ca = a[s - 1]
        for t in range(1, lb + 1):
            up = row[t]
            best = diag + (0 if ca == b[t - 1] else 1)
            if up + 1 < best:
                best = up + 1
            if row[t - 1] + 1 < best:
                best = row[t - 1] + 1
            row[t] = best
            diag = up
    return row[lb]


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (substitution, insertion, deletion)."""
    ca, cb = _codes(a), _codes(b)
    return int(_lev_codes(ca, cb, np.empty(cb.shape[0] + 1, dtype=np.int64)))


def normalized_levenshtein(a: str, b: str) -> float:
    """Edit distance divided by the longer length; 0.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


@numba.njit(cache=True)
def _word_matrix(codes, offsets, normalized):
    n = offsets.shape[0] - 1
    out = np.zeros((n, n))
    maxlen = 0
    for i in range(n):
        maxlen = max(maxlen, offsets[i + 1] - offsets[i])
    row = np.empty(maxlen + 1, dtype=np.int64)
    for i in range(n):
        a = codes[offsets[i]:offsets[i + 1]]
        for k in range(i + 1, n):
            b = codes[offsets[k]:offsets[k + 1]]
            v = float(_lev_codes(a, b, row))
            if normalized:
                longest = max(a.shape[0], b.shape[0])
                v = v / longest if longest > 0 else 0.0
            out[i, k] = v
            out[k, i] = v
    return out


def build_from_words(words: Sequence[str], normalized: bool = False) -> DissimilarityMatrix:
    if len(words) == 0:
        raise ValueError("word list is empty")
    lengths = np.array([len(w) for w in words], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    codes = np.array([ord(ch) for w in words for ch in w], dtype=np.int64)
    return DissimilarityMatrix(_word_matrix(codes, offsets, normalized), check=False)


# -- files -------------------------------------------------------------------------


def _format_value(v: float) -> str:
    if v == int(v) and abs(v) < EXACT_INT_LIMIT:
        return str(int(v))
    return repr(float(v))


def save_matrix(matrix: DissimilarityMatrix, path) -> None:
    lines = [MAGIC, str(matrix.n)]
    lines.extend(" ".join(_format_value(v) for v in row) for row in matrix.values.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_matrix(path) -> DissimilarityMatrix:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != MAGIC:
        raise MatrixFormatError(f"{path}: line 1: expected header {MAGIC!r}")
    if len(lines) < 2:
        raise MatrixFormatError(f"{path}: line 2: missing matrix size")
    try:
        n = int(lines[1].strip())
    except ValueError:
        raise MatrixFormatError(f"{path}: line 2: invalid matrix size {lines[1]!r}") from None
    if n < 1:
        raise MatrixFormatError(f"{path}: line 2: matrix size must be positive")
    body = lines[2:]
    if len(body) != n:
        raise MatrixShapeError(f"{path}: expected {n} rows, found {len(body)}")
    values = np.empty((n, n))
    for r, line in enumerate(body):
        fields = line.split()
        if len(fields) != n:
            raise MatrixShapeError(f"{path}: line {r + 3}: expected {n} values, found {len(fields)}")
        try:
            values[r] = [float(f) for f in fields]
        except ValueError:
            raise MatrixFormatError(f"{path}: line {r + 3}: unparsable value") from None
    return DissimilarityMatrix(values)


def save_points(points: PointSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in points.coords.tolist():
            writer.writerow([repr(v) for v in row])


def load_points(path) -> PointSet:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise MatrixFormatError(f"{path}: line {lineno}: unparsable coordinate") from None
            if len(rows[-1]) != len(rows[0]):
                raise MatrixFormatError(f"{path}: line {lineno}: expected {len(rows[0])} columns")
    if not rows:
        raise MatrixFormatError(f"{path}: no points")
    return PointSet(np.array(rows))


def load_words(path) -> list[str]:
    return _clean_words(Path(path).read_text(encoding="utf-8").split("\n"))


def _clean_words(lines: Iterable[str]) -> list[str]:
    return [line.strip() for line in lines if line.strip()]
