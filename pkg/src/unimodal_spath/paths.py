"""S-paths, set partitions and the exact counts relating them.

An S-path of ``n + 1`` coordinates is a non-decreasing integer vector
``(S_0, ..., S_n)`` with ``S_0 = 0``, ``S_n = n`` and ``S_j <= j``.  Its
jump locations and jump sizes encode the maximal elements and sizes of the
cells of every set partition of ``{1..n}`` that corresponds to it.

All counting is done with Python integers so large values are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

DEFAULT_PATH_CAP = 14
DEFAULT_PARTITION_CAP = 12


class PathError(ValueError):
    """Raised when a coordinate vector is not a valid S-path."""

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class EnumerationCapError(ValueError):
    """Raised when an exhaustive enumeration would exceed its size cap."""


@dataclass(frozen=True)
class SPath:
    coords: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.coords) - 1

    @property
    def jumps(self) -> tuple[tuple[int, int], ...]:
        """``(j, S_j - S_{j-1})`` for every location with a positive increment."""
        c = self.coords
        return tuple((j, c[j] - c[j - 1]) for j in range(1, len(c)) if c[j] > c[j - 1])

    @property
    def increments(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.jumps)

    @property
    def n_jumps(self) -> int:
        c = self.coords
        return sum(1 for j in range(1, len(c)) if c[j] > c[j - 1])

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, j: int) -> int:
        return self.coords[j]


@dataclass(frozen=True)
class Partition:
    """Set partition of ``{1..n}``; cells are stored sorted, ordered by minimum."""

    cells: tuple[tuple[int, ...], ...]
    n: int

    @classmethod
    def from_cells(cls, cells, n: int | None = None) -> "Partition":
        norm = tuple(sorted(tuple(sorted(c)) for c in cells))
        if n is None:
            n = sum(len(c) for c in norm)
        seen = [x for c in norm for x in c]
        if any(len(c) == 0 for c in norm):
            raise ValueError("partition cells must be non-empty")
        if sorted(seen) != list(range(1, n + 1)):
            raise ValueError(f"cells do not partition {{1..{n}}}")
        return cls(norm, n)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.cells)

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def validate_path(coords: Sequence[int]) -> SPath:
    """Check the three S-path conditions and return the path.

    Raises:
        PathError: naming the failed condition (``endpoint``, ``ceiling`` or
            ``monotonicity``).
    """
    c = tuple(int(x) for x in coords)
    if not c:
        raise PathError("endpoint", "empty coordinate sequence")
    n = len(c) - 1
    if c[0] != 0 or c[n] != n:
        raise PathError("endpoint", f"need S_0 = 0 and S_{n} = {n}, got {c[0]} and {c[n]}")
    for j in range(1, n):
        if c[j] > j:
            raise PathError("ceiling", f"S_{j} = {c[j]} > {j}")
    for j in range(n):
        if c[j] > c[j + 1]:
            raise PathError("monotonicity", f"S_{j} = {c[j]} > S_{j + 1} = {c[j + 1]}")
    return SPath(c)


def count_corresponding_partitions(s: SPath) -> int:
    """Number of set partitions corresponding to ``s``."""
    c = s.coords
    out = 1
    for j in range(1, len(c)):
        if c[j] > c[j - 1]:
            out *= math.comb(j - 1 - c[j - 1], j - c[j])
    return out


def log_count_corresponding_partitions(s: SPath) -> float:
    c = s.coords
    out = 0.0
    for j in range(1, len(c)):
        if c[j] > c[j - 1]:
            out += log_comb(j - 1 - c[j - 1], j - c[j])
    return out


def log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def path_of_partition(p: Partition) -> SPath:
    inc = [0] * (p.n + 1)
    for cell in p.cells:
        inc[max(cell)] = len(cell)
    coords = [0]
    for j in range(1, p.n + 1):
        coords.append(coords[-1] + inc[j])
    return SPath(tuple(coords))


def _check_cap(n: int, cap: int, what: str) -> None:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > cap:
        raise EnumerationCapError(f"{what} enumeration for n={n} exceeds cap {cap}")


def enumerate_paths(n: int, cap: int = DEFAULT_PATH_CAP) -> Iterator[SPath]:
    """Yield every S-path of ``n + 1`` coordinates in lexicographic order."""
    _check_cap(n, cap, "path")
    if n == 0:
        yield SPath((0,))
        return
    coords = [0] * (n + 1)
    coords[n] = n

    def rec(j: int) -> Iterator[SPath]:
        if j == n:
            yield SPath(tuple(coords))
            return
        for v in range(coords[j - 1], j + 1):
            coords[j] = v
            yield from rec(j + 1)

    yield from rec(1)


def enumerate_partitions(n: int, cap: int = DEFAULT_PARTITION_CAP) -> Iterator[Partition]:
    """Yield every set partition of ``{1..n}`` (restricted-growth-string order)."""
    _check_cap(n, cap, "partition")
    if n == 0:
        yield Partition((), 0)
        return
    labels = [0] * n

    def rec(i: int, n_blocks: int) -> Iterator[Partition]:
        if i == n:
            cells = [[] for _ in range(n_blocks)]
            for idx, lab in enumerate(labels):
                cells[lab].append(idx + 1)
            yield Partition(tuple(tuple(c) for c in cells), n)
            return
        for lab in range(n_blocks + 1):
            labels[i] = lab
            yield from rec(i + 1, max(n_blocks, lab + 1))

    labels[0] = 0
    yield from rec(1, 1)


def count_paths(n: int) -> int:
    """Number of S-paths of ``n + 1`` coordinates (the Catalan number)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.comb(2 * n, n) // (n + 1)


def count_partitions(n: int) -> int:
    """Bell number ``B_n`` via the Bell triangle."""
    if n < 0:
        raise ValueError("n must be non-negative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


@dataclass(frozen=True)
class PathCountTable:
    """One row of the path-versus-partition complexity table.

    ``lambda_`` and ``bell`` are the products ``L_n * L_{N-n}`` and
    ``B_n * B_{N-n}``; ``ratio`` is their quotient (a fraction, not percent).
    """

    n: int
    complement: int
    lambda_: int
    bell: int

    @property
    def ratio(self) -> float:
        return self.lambda_ / self.bell

    @property
    def percent(self) -> float:
        return 100.0 * self.lambda_ / self.bell

    def format(self) -> str:
        return f"{self.n:>3} {self.complement:>4} {self.lambda_:>22,} {self.bell:>26,} {self.percent:>8.3f}"


def table1(N: int) -> list[PathCountTable]:
    """Complexity rows for splits ``n = N//2, N//2 - 2, ..., >= 0`` of ``N`` observations."""
    if N < 0:
        raise ValueError("N must be non-negative")
    rows = []
    for n in range(N // 2, -1, -2):
        rows.append(
            PathCountTable(
                n=n,
                complement=N - n,
                lambda_=count_paths(n) * count_paths(N - n),
                bell=count_partitions(n) * count_partitions(N - n),
            )
        )
    return rows
