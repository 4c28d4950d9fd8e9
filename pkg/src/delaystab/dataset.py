"""Sparse datasets: LIBSVM text I/O, seeded splits and synthetic quadratic data.

Samples are stored together as a CSR matrix (rows are samples) plus a label
vector.  Indices are 1-based on the wire and 0-based in memory.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input.  ``lineno`` is 1-based (0 for whole-input errors)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


@dataclass(frozen=True)
class Sample:
    indices: np.ndarray
    values: np.ndarray
    label: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if np.any(np.diff(idx) <= 0) or np.any(idx < 0):
            raise ValueError("feature indices must be nonnegative and strictly increasing")
        if not (np.all(np.isfinite(val)) and math.isfinite(self.label)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "label", float(self.label))

    @classmethod
    def from_dense(cls, x, label: float) -> "Sample":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], label)

    def to_dense(self, d: int) -> np.ndarray:
        out = np.zeros(d)
        out[self.indices] = self.values
        return out

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of labelled sparse samples.

    Parameters
    ----------
    X : scipy.sparse.csr_matrix, shape (n, d)
        Feature rows.  Explicitly stored zeros are kept so that text
        round-trips are exact.
    y : ndarray, shape (n,)
        Raw real labels (no sign coercion; the loss is squared).
    name : str
    """

    X: sp.csr_matrix
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = self.X if sp.isspmatrix_csr(self.X) else sp.csr_matrix(self.X)
        y = np.asarray(self.y, dtype=np.float64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on the number of samples")
        if not (np.all(np.isfinite(X.data)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def sample(self, i: int) -> Sample:
        if not 0 <= i < self.n:
            raise IndexError(f"sample index {i} out of range for n={self.n}")
        lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
        return Sample(self.X.indices[lo:hi], self.X.data[lo:hi], self.y[i])

    @property
    def samples(self) -> list[Sample]:
        return [self.sample(i) for i in range(self.n)]

    def subset(self, rows, name: str | None = None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.name if name is None else name)

    def dense(self) -> np.ndarray:
        return self.X.toarray()

    @classmethod
    def from_samples(cls, samples: Sequence[Sample], d: int | None = None, name: str = "") -> "Dataset":
        indptr = np.zeros(len(samples) + 1, dtype=np.int64)
        for k, s in enumerate(samples):
            indptr[k + 1] = indptr[k] + s.indices.size
        indices = np.concatenate([s.indices for s in samples]) if samples else np.zeros(0, np.int64)
        values = np.concatenate([s.values for s in samples]) if samples else np.zeros(0)
        max_idx = int(indices.max()) + 1 if indices.size else 0
        if d is None:
            d = max_idx
        elif d < max_idx:
            raise ValueError(f"dimension {d} smaller than max feature index {max_idx - 1}")
        X = sp.csr_matrix((values, indices, indptr), shape=(len(samples), d))
        y = np.array([s.label for s in samples], dtype=np.float64)
        return cls(X, y, name)

    @classmethod
    def from_dense(cls, X, y, name: str = "") -> "Dataset":
        return cls(sp.csr_matrix(np.asarray(X, dtype=np.float64)), np.asarray(y, dtype=np.float64), name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        a, b = self.X, other.X
        return (
            a.shape == b.shape
            and np.array_equal(self.y, other.y)
            and np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    def __repr__(self):
        return f"Dataset(name={self.name!r}, n={self.n}, d={self.d}, nnz={self.X.nnz})"


# ---------------------------------------------------------------------------
# LIBSVM text format


def _parse_number(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise LibsvmParseError(f"non-numeric {what} {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise LibsvmParseError(f"non-finite {what} {tok!r}", lineno)
    return v


def parse_libsvm(source, n_features: int | None = None, name: str = "") -> Dataset:
    """Parse LIBSVM text (``<label> <idx>:<val> ...``) into a :class:`Dataset`.

    ``source`` may be a string or a text stream.  ``#`` starts a comment and
    blank lines are skipped.  The dimension is the largest index seen unless
    ``n_features`` overrides it.
    """
    lines: Iterable[str] = io.StringIO(source) if isinstance(source, str) else source
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[float] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        labels.append(_parse_number(toks[0], lineno, "label"))
        prev = 0
        for tok in toks[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx = int(key)
            except ValueError:
                raise LibsvmParseError(f"non-integer index {key!r}", lineno) from None
            if idx < 1:
                raise LibsvmParseError(f"index {idx} < 1", lineno)
            if idx <= prev:
                raise LibsvmParseError(f"index {idx} not increasing (previous {prev})", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(_parse_number(val, lineno, "value"))
        indptr.append(len(indices))
    if not labels:
        raise LibsvmParseError("empty input")
    max_idx = max(indices) + 1 if indices else 0
    d = max_idx if n_features is None else n_features
    if d < max_idx:
        raise LibsvmParseError(f"feature index {max_idx} exceeds declared dimension {d}")
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    return Dataset(X, np.array(labels), name)


def load_libsvm(path, n_features: int | None = None) -> Dataset:
    from pathlib import Path

    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, n_features=n_features, name=path.stem)


def format_float(v: float) -> str:
    """Shortest decimal that parses back to exactly ``v``; integral values drop ``.0``."""
    if v == 0.0:
        return "-0" if math.copysign(1.0, v) < 0 else "0"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def serialize_libsvm(dataset: Dataset) -> str:
    X = dataset.X
    out = []
    for i in range(dataset.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        parts = [format_float(dataset.y[i])]
        parts.extend(f"{j + 1}:{format_float(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        out.append(" ".join(parts) + "\n")
    return "".join(out)


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError("need at least two samples to split")
    perm = np.random.default_rng(spec.seed).permutation(n)
    k = min(max(math.ceil(spec.train_fraction * n), 1), n - 1)
    return perm[:k], perm[k:]


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(dataset.n, spec)
    return dataset.subset(tr, f"{dataset.name}:train"), dataset.subset(te, f"{dataset.name}:test")


# ---------------------------------------------------------------------------
# synthetic quadratic data


def make_spectrum(spec, d: int) -> np.ndarray:
    """Expand a spectrum description to ``d`` eigenvalues.

    ``spec`` is ``("uniform", a_min, a_max)`` (evenly spaced, descending),
    ``("geometric", a_max, ratio)`` or an explicit sequence of ``d`` values.
    """
    if isinstance(spec, (tuple, list)) and spec and isinstance(spec[0], str):
        kind, *args = spec
        if kind == "uniform":
            a_min, a_max = args
            a = np.linspace(a_max, a_min, d)
        elif kind == "geometric":
            a_max, ratio = args
            a = a_max * float(ratio) ** np.arange(d)
        else:
            raise ValueError(f"unknown spectrum kind {kind!r}")
    else:
        a = np.asarray(spec, dtype=np.float64).ravel()
        if a.size != d:
            raise ValueError(f"explicit spectrum has {a.size} values, expected {d}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("spectrum values must be finite and nonnegative")
    return a


@dataclass(frozen=True, eq=False)
class QuadraticDistribution:
    """x = Q diag(sqrt(a)) g with g ~ N(0, I);  y = x.w* + noise_std * N(0, 1)."""

    Q: np.ndarray
    spectrum: np.ndarray
    w_star: np.ndarray
    noise_std: float = 0.0

    @property
    def d(self) -> int:
        return self.spectrum.size

    @property
    def covariance(self) -> np.ndarray:
        return (self.Q * self.spectrum) @ self.Q.T

    def draw(self, n: int, rng: np.random.Generator, name: str = "synthetic") -> Dataset:
        g = rng.standard_normal((n, self.d))
        X = (g * np.sqrt(self.spectrum)) @ self.Q.T
        y = X @ self.w_star
        if self.noise_std > 0:
            y = y + self.noise_std * rng.standard_normal(n)
        return Dataset.from_dense(X, y, name)


def make_distribution(d: int, spectrum_spec, label_noise_std: float = 0.0, seed: int = 0) -> QuadraticDistribution:
    a = make_spectrum(spectrum_spec, d)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    return QuadraticDistribution(Q, a, w, float(label_noise_std))


def synth_quadratic(d: int, n: int, spectrum_spec, label_noise_std: float = 0.0, seed: int = 0) -> Dataset:
    """Draw ``n`` samples whose second-moment matrix has expected spectrum ``spectrum_spec``."""
    dist = make_distribution(d, spectrum_spec, label_noise_std, seed)
    return dist.draw(n, np.random.default_rng(np.random.SeedSequence([seed, 1])))
