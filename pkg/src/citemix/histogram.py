"""Count histograms and the counts-file formats.

Two on-disk formats are accepted:

``raw``
    one nonnegative integer (a citation count) per line
``hist``
    lines ``c,count`` with unique ``c``

Blank lines and lines starting with ``#`` are ignored.  Observed citation
counts ``c >= 0`` are mapped onto the model support by ``k = c + k_shift``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

__all__ = ["Histogram", "CountsParseError", "ingest", "parse_counts", "write_raw", "write_hist"]


class CountsParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + msg)
        self.line = line


@dataclass(frozen=True)
class Histogram:
    """Sparse map ``k -> frequency`` over k >= 1."""

    bins: Mapping[int, int]
    n_zero: int = 0
    k_shift: int = 1
    total_n: int = field(init=False)

    def __post_init__(self):
        clean = {}
        for k, f in self.bins.items():
            k, f = int(k), int(f)
            if k < 1:
                raise ValueError(f"histogram key {k} outside the support k >= 1")
            if f < 0:
                raise ValueError(f"negative frequency {f} at k={k}")
            if f:
                clean[k] = f
        object.__setattr__(self, "bins", dict(sorted(clean.items())))
        object.__setattr__(self, "total_n", sum(clean.values()))

    @classmethod
    def from_samples(cls, ks: Iterable[int], k_shift: int = 1) -> "Histogram":
        """Histogram of model-support samples ``k >= 1``."""
        arr = np.asarray(list(ks) if not isinstance(ks, np.ndarray) else ks, dtype=np.int64)
        if arr.size == 0:
            return cls({}, k_shift=k_shift)
        vals, counts = np.unique(arr, return_counts=True)
        n_zero = int(counts[vals == k_shift].sum()) if k_shift >= 1 else 0
        return cls(dict(zip(vals.tolist(), counts.tolist())), n_zero=n_zero, k_shift=k_shift)

    @classmethod
    def from_citations(cls, counts: Iterable[int], k_shift: int = 1) -> "Histogram":
        arr = np.asarray(list(counts), dtype=np.int64)
        if np.any(arr < 0):
            raise ValueError("citation counts must be nonnegative")
        return cls.from_samples(arr + k_shift, k_shift=k_shift)

    @property
    def ks(self) -> np.ndarray:
        return np.fromiter(self.bins.keys(), dtype=np.int64, count=len(self.bins))

    @property
    def freqs(self) -> np.ndarray:
        return np.fromiter(self.bins.values(), dtype=np.int64, count=len(self.bins))

    @property
    def n_support(self) -> int:
        return len(self.bins)

    def mean(self) -> float:
        return float(np.dot(self.ks, self.freqs) / self.total_n)

    def var(self) -> float:
        m = self.mean()
        return float(np.dot((self.ks - m) ** 2, self.freqs) / self.total_n)

    def expand(self) -> np.ndarray:
        return np.repeat(self.ks, self.freqs)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for k, f in self.bins.items():
            h.update(f"{k}:{f};".encode())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return dict(self.bins) == dict(other.bins)

    __hash__ = None


def parse_counts(lines: Iterable[str], fmt: str = "raw", k_shift: int = 1, path: str | None = None) -> Histogram:
    """Parse counts-file lines into a histogram over ``k = c + k_shift``.

    Raises
    ------
    CountsParseError
        For malformed lines, negative counts, duplicate histogram keys, or a
        shift that would put any observation below k = 1.
    """
    if fmt not in ("raw", "hist"):
        raise CountsParseError(f"unknown format {fmt!r} (expected raw or hist)", path=path)
    bins: dict[int, int] = {}
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            if fmt == "raw":
                c, n = int(s), 1
            else:
                parts = [p.strip() for p in s.split(",")]
                if len(parts) != 2:
                    raise ValueError
                c, n = int(parts[0]), int(parts[1])
        except ValueError:
            raise CountsParseError(f"malformed line {s!r}", lineno, path) from None
        if c < 0 or n < 0:
            raise CountsParseError(f"negative value in line {s!r}", lineno, path)
        k = c + k_shift
        if k < 1:
            raise CountsParseError(f"count {c} maps to k={k} < 1 with k_shift={k_shift}", lineno, path)
        if fmt == "hist":
            if k in bins:
                raise CountsParseError(f"duplicate histogram key {c}", lineno, path)
            bins[k] = n
        else:
            bins[k] = bins.get(k, 0) + 1
    n_zero = bins.get(k_shift, 0) if k_shift >= 1 else 0
    return Histogram(bins, n_zero=n_zero, k_shift=k_shift)


def ingest(path, fmt: str = "raw", k_shift: int = 1) -> Histogram:
    path = Path(path)
    with path.open() as fh:
        return parse_counts(fh, fmt=fmt, k_shift=k_shift, path=str(path))


def write_raw(path, ks: np.ndarray, k_shift: int = 1) -> None:
    """Write samples as citation counts ``c = k - k_shift``, one per line."""
    cs = np.asarray(ks, dtype=np.int64) - k_shift
    with open(path, "w") as fh:
        if cs.size:
            fh.write("\n".join(map(str, cs.tolist())))
            fh.write("\n")


def write_hist(path, h: Histogram) -> None:
    with open(path, "w") as fh:
        fh.write(f"# c,count  (k = c + {h.k_shift}); N={h.total_n}\n")
        for k, f in h.bins.items():
            fh.write(f"{k - h.k_shift},{f}\n")
