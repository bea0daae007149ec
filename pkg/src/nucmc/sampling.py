"""Uniform sampling with replacement and the sampling operator R_Omega.

Omega is a multiset: a cell drawn twice contributes twice to every sum over
Omega. Index pairs are stored 0-based in memory; the observation file format
is 1-based.

Random streams come from numpy's counter-based Philox bit generator. Trial
``k`` of a run seeded with ``s`` always uses ``Philox(s ^ k)``, so results do
not depend on how trials are scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .linalg import as_matrix

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def trial_seed(seed: int, k: int) -> int:
    return (int(seed) ^ int(k)) & SEED_MASK


@dataclass(frozen=True, eq=False)
class SampleMultiset:
    """An ordered multiset of cells of an ``m x n`` grid.

    ``rows`` and ``cols`` are aligned 0-based index arrays. ``counts`` is the
    dense multiplicity table, so applying R_Omega is an elementwise product.
    """

    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    seed: int = 0
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise InvalidArgument(f"ambient dimensions must be positive, got {self.m}x{self.n}")
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise InvalidArgument("rows and cols must have equal length")
        if rows.size < 1:
            raise InvalidArgument("a sample needs at least one index pair")
        if rows.min() < 0 or rows.max() >= self.m or cols.min() < 0 or cols.max() >= self.n:
            raise InvalidArgument(f"index pair out of bounds for a {self.m}x{self.n} matrix")
        counts = np.zeros((self.m, self.n), dtype=np.float64)
        np.add.at(counts, (rows, cols), 1.0)
        for arr in (rows, cols, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    def pairs(self) -> list[tuple[int, int]]:
        """Index pairs in draw order, 1-based."""
        return [(int(i) + 1, int(j) + 1) for i, j in zip(self.rows, self.cols)]

    @classmethod
    def from_pairs(cls, m: int, n: int, pairs, seed: int = 0) -> "SampleMultiset":
        """Build from 1-based ``(i, j)`` pairs."""
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls(m=m, n=n, rows=arr[:, 0] - 1, cols=arr[:, 1] - 1, seed=seed)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Sampled entries: ``values[k]`` is A at cell ``(rows[k], cols[k])``."""

    sample: SampleMultiset
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.shape[0] != len(self.sample):
            raise InvalidArgument(
                f"{values.shape[0]} values for {len(self.sample)} index pairs"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("observed values must be finite")
        observed = np.zeros(self.sample.shape)
        observed[self.sample.rows, self.sample.cols] = values
        if not np.array_equal(observed[self.sample.rows, self.sample.cols], values):
            raise InvalidArgument("duplicated index pairs carry different values")
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_observed", observed)

    @classmethod
    def from_matrix(cls, sample: SampleMultiset, A) -> "ObservationSet":
        A = as_matrix(A)
        _check_shape(sample, A)
        return cls(sample=sample, values=A[sample.rows, sample.cols])

    @property
    def shape(self) -> tuple[int, int]:
        return self.sample.shape

    @property
    def observed(self) -> np.ndarray:
        """Dense matrix holding the observed value on sampled cells, 0 elsewhere."""
        return self._observed

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.values**2)))


def _check_shape(omega: SampleMultiset, Z: np.ndarray) -> None:
    if Z.shape != omega.shape:
        raise InvalidArgument(f"matrix shape {Z.shape} does not match sample grid {omega.shape}")


def sample_uniform(m: int, n: int, count: int, seed: int) -> SampleMultiset:
    """Draw `count` cells i.i.d. uniformly from the ``m x n`` grid."""
    if m < 1 or n < 1:
        raise InvalidArgument(f"dimensions must be positive, got {m}x{n}")
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    flat = make_rng(seed).integers(0, m * n, size=count)
    rows, cols = np.divmod(flat, n)
    return SampleMultiset(m=m, n=n, rows=rows, cols=cols, seed=seed)


def apply_romega(omega: SampleMultiset, Z) -> np.ndarray:
    """R_Omega(Z): entry (i, j) becomes ``t_ij * Z_ij`` where t_ij is the multiplicity."""
    Z = as_matrix(Z)
    _check_shape(omega, Z)
    return omega.counts * Z


def romega_inner(omega: SampleMultiset, Z, W) -> float:
    """``<R_Omega(Z), W>``, i.e. the sum over Omega of ``Z_ij W_ij`` with repeats."""
    Z = as_matrix(Z)
    W = as_matrix(W)
    _check_shape(omega, Z)
    _check_shape(omega, W)
    return float(np.dot(Z[omega.rows, omega.cols], W[omega.rows, omega.cols]))


def max_multiplicity(omega: SampleMultiset) -> int:
    """Largest number of times any single cell was drawn.

    R_Omega is diagonal in the entry basis, so this is also its operator norm.
    """
    return int(omega.counts.max())


def read_observations(path) -> ObservationSet:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise InvalidArgument(f"{path}: empty observation file")
    try:
        m, n, count = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise InvalidArgument(f"{path}: bad header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != count:
        raise InvalidArgument(f"{path}: header announces {count} entries, found {len(body)}")
    pairs, values = [], []
    for ln in body:
        i, j, v = ln.split()
        pairs.append((int(i), int(j)))
        values.append(float(v))
    sample = SampleMultiset.from_pairs(m, n, pairs)
    return ObservationSet(sample=sample, values=np.array(values))


def write_observations(path, obs: ObservationSet) -> None:
    s = obs.sample
    out = [f"{s.m} {s.n} {len(s)}"]
    out += [
        f"{i + 1} {j + 1} {float(v)!r}" for i, j, v in zip(s.rows, s.cols, obs.values)
    ]
    Path(path).write_text("\n".join(out) + "\n")
