"""Uniform grid partitioning of coordinate lattices and signals.

Coordinates are normalized so that sample ``r`` of ``N`` (1-based) sits at
``2*(r-1)/(N-1) - 1``; both axes of an image and the single time axis of
audio use the same rule.  An order-``M`` grid splits the domain into
``M**rank`` congruent cells.  Cell ``m`` (1-based, row-major) occupies the
open box with per-axis extent ``(2*(i-1)/M - 1, 2*i/M - 1)``; on the sample
lattice we close the cells half-open (last cell fully closed), which makes
every sample belong to exactly one cell.  Because ``M`` divides ``N`` and
``gcd(M, N-1) = 1``, no interior lattice point ever lands on a cell
boundary, so the convention only matters for the continuous map.

Each cell also carries local coordinates: the affine image of its extent
onto ``[-1, 1]`` per axis, which is what its sub-network consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SourceInfo:
    """Where a signal's values came from, for lossless export."""

    kind: str = "unit"  # "uint8" (image), "pcm16" (audio), or "unit" (already normalized)
    sample_rate: int | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sample_rate": self.sample_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceInfo":
        return cls(kind=d.get("kind", "unit"), sample_rate=d.get("sample_rate"))


@dataclass
class SignalTensor:
    """A normalized target signal: 1-D audio or a square 2-D image.

    ``values`` has shape ``(n, channels)`` for rank 1 and
    ``(n, n, channels)`` for rank 2, with every entry in ``[-1, 1]``.
    """

    rank: int
    n: int
    channels: int
    values: np.ndarray
    source: SourceInfo = SourceInfo()

    def __post_init__(self):
        if self.rank not in (1, 2):
            raise ValueError(f"rank must be 1 or 2, got {self.rank}")
        expected = (self.n, self.channels) if self.rank == 1 else (self.n, self.n, self.channels)
        if tuple(self.values.shape) != expected:
            raise ValueError(f"values shape {self.values.shape} does not match {expected}")

    @property
    def num_samples(self) -> int:
        return self.n**self.rank

    def flat_values(self) -> np.ndarray:
        """Row-major (num_samples, channels) view of the values."""
        return self.values.reshape(self.num_samples, self.channels)

    def clamped(self) -> "SignalTensor":
        return replace(self, values=np.clip(self.values, -1.0, 1.0))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of order ``M`` per axis over a rank-1 or rank-2 domain."""

    m: int
    rank: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"grid order must be >= 1, got {self.m}")
        if self.rank not in (1, 2):
            raise ValueError(f"rank must be 1 or 2, got {self.rank}")

    @property
    def num_cells(self) -> int:
        return self.m**self.rank

    def check_divides(self, n: int) -> None:
        if n % self.m != 0:
            raise ValueError(
                f"signal size N={n} is not divisible by grid order M={self.m}"
            )


@dataclass(frozen=True)
class CellId:
    """One grid cell: linear index ``m`` plus its (row, column) position."""

    m: int
    i: int
    j: int | None = None  # None for rank-1 grids


@dataclass
class CoordinateBatch:
    """Sample coordinates: global, cell-local, and 1-based lattice indices."""

    global_coords: np.ndarray  # (batch, rank) in [-1, 1]
    local_coords: np.ndarray | None  # (batch, rank) in [-1, 1], None until mapped
    sample_indices: np.ndarray  # (batch, rank) ints, 1-based


def axis_coords(n: int) -> np.ndarray:
    """Normalized positions of ``n`` lattice samples along one axis."""
    if n < 2:
        raise ValueError(f"need at least 2 samples per axis, got {n}")
    r = np.arange(1, n + 1, dtype=np.float64)
    return 2.0 * (r - 1.0) / (n - 1.0) - 1.0


def global_coords(n: int, rank: int) -> CoordinateBatch:
    """All lattice coordinates in row-major sample order."""
    ax = axis_coords(n)
    idx = np.arange(1, n + 1, dtype=np.int64)
    if rank == 1:
        return CoordinateBatch(ax[:, None].copy(), None, idx[:, None].copy())
    if rank != 2:
        raise ValueError(f"rank must be 1 or 2, got {rank}")
    g1, g2 = np.meshgrid(ax, ax, indexing="ij")
    coords = np.stack([g1.ravel(), g2.ravel()], axis=1)
    i1, i2 = np.meshgrid(idx, idx, indexing="ij")
    indices = np.stack([i1.ravel(), i2.ravel()], axis=1)
    return CoordinateBatch(coords, None, indices)


def cell_id_from_m(grid: GridSpec, m: int) -> CellId:
    """Recover a cell's grid position from its linear index."""
    if not 1 <= m <= grid.num_cells:
        raise ValueError(f"cell index {m} out of range 1..{grid.num_cells}")
    if grid.rank == 1:
        return CellId(m=m, i=m)
    i = (m - 1) // grid.m + 1
    j = (m - 1) % grid.m + 1
    return CellId(m=m, i=i, j=j)


def cell_of_index(grid: GridSpec, n: int, r: int, c: int | None = None) -> CellId:
    """The unique cell owning lattice sample ``(r, c)`` (1-based)."""
    grid.check_divides(n)
    span = n // grid.m
    if not 1 <= r <= n:
        raise ValueError(f"row index {r} out of range 1..{n}")
    i = (r - 1) // span + 1
    if grid.rank == 1:
        if c is not None:
            raise ValueError("rank-1 grids take a single index")
        return CellId(m=i, i=i)
    if c is None:
        raise ValueError("rank-2 grids need both row and column indices")
    if not 1 <= c <= n:
        raise ValueError(f"column index {c} out of range 1..{n}")
    j = (c - 1) // span + 1
    return CellId(m=(i - 1) * grid.m + j, i=i, j=j)


def cell_extent(cell: CellId, grid: GridSpec) -> list[tuple[float, float]]:
    """Per-axis (lo, hi) of the cell's region in global coordinates."""

    def axis_range(k: int) -> tuple[float, float]:
        return (2.0 * (k - 1) / grid.m - 1.0, 2.0 * k / grid.m - 1.0)

    if grid.rank == 1:
        return [axis_range(cell.i)]
    return [axis_range(cell.i), axis_range(cell.j)]


def to_local_coords(cell: CellId, grid: GridSpec, batch: CoordinateBatch) -> CoordinateBatch:
    """Affinely remap a cell's global coordinates onto [-1, 1] per axis.

    Raises if any row's global coordinates lie outside the cell region
    (with a tiny tolerance for the closed upper edge of the last cell).
    """
    ks = [cell.i] if grid.rank == 1 else [cell.i, cell.j]
    g = batch.global_coords
    local = np.empty_like(g)
    for axis, k in enumerate(ks):
        lo = 2.0 * (k - 1) / grid.m - 1.0
        hi = 2.0 * k / grid.m - 1.0
        x = g[:, axis]
        eps = 1e-12
        if np.any(x < lo - eps) or np.any(x > hi + eps):
            raise ValueError(f"coordinates outside cell m={cell.m} on axis {axis}")
        local[:, axis] = grid.m * x - (2.0 * k - 1.0 - grid.m)
    return CoordinateBatch(g, local, batch.sample_indices)


def _block_slices(grid: GridSpec, n: int, cell: CellId):
    span = n // grid.m
    rs = slice((cell.i - 1) * span, cell.i * span)
    if grid.rank == 1:
        return (rs,)
    cs = slice((cell.j - 1) * span, cell.j * span)
    return (rs, cs)


def partition_coords(grid: GridSpec, n: int):
    """Per-cell coordinate batches (global + local), ordered by ``m``."""
    grid.check_divides(n)
    ax = axis_coords(n)
    idx = np.arange(1, n + 1, dtype=np.int64)
    out = []
    for m in range(1, grid.num_cells + 1):
        cell = cell_id_from_m(grid, m)
        sl = _block_slices(grid, n, cell)
        if grid.rank == 1:
            g = ax[sl[0], None].copy()
            indices = idx[sl[0], None].copy()
        else:
            a1, a2 = ax[sl[0]], ax[sl[1]]
            g1, g2 = np.meshgrid(a1, a2, indexing="ij")
            g = np.stack([g1.ravel(), g2.ravel()], axis=1)
            i1, i2 = np.meshgrid(idx[sl[0]], idx[sl[1]], indexing="ij")
            indices = np.stack([i1.ravel(), i2.ravel()], axis=1)
        out.append((cell, to_local_coords(cell, grid, CoordinateBatch(g, None, indices))))
    return out


def partition_signal(signal: SignalTensor, grid: GridSpec):
    """Split a signal into per-cell (CellId, CoordinateBatch, targets).

    Cells come out ordered by linear index ``m``; within a cell, samples
    are row-major over the cell's lattice indices.  Targets are views of
    shape (samples_per_cell, channels).
    """
    if grid.rank != signal.rank:
        raise ValueError(f"grid rank {grid.rank} does not match signal rank {signal.rank}")
    grid.check_divides(signal.n)
    n = signal.n
    span = n // grid.m
    out = []
    for cell, batch in partition_coords(grid, n):
        sl = _block_slices(grid, n, cell)
        if grid.rank == 1:
            targets = signal.values[sl[0]].reshape(span, signal.channels)
        else:
            targets = signal.values[sl[0], sl[1]].reshape(span * span, signal.channels)
        out.append((cell, batch, targets))
    return out


def aggregate_outputs(per_cell_outputs, grid: GridSpec, n: int, *,
                      channels: int | None = None,
                      source: SourceInfo | None = None) -> SignalTensor:
    """Place per-cell outputs back into a full signal.

    ``per_cell_outputs`` is an iterable of ``(CellId, values)`` with values
    shaped (samples_per_cell, channels) in the cell's row-major sample
    order; every cell must appear exactly once.  Inverse of
    :func:`partition_signal`'s placement.
    """
    grid.check_divides(n)
    span = n // grid.m
    items = list(per_cell_outputs)
    seen = {}
    for cell, vals in items:
        if cell.m in seen:
            raise ValueError(f"duplicate output for cell m={cell.m}")
        seen[cell.m] = (cell, np.asarray(vals))
    missing = [m for m in range(1, grid.num_cells + 1) if m not in seen]
    if missing:
        raise ValueError(f"missing output for cell m={missing[0]}")

    if channels is None:
        channels = seen[1][1].shape[1]
    shape = (n, channels) if grid.rank == 1 else (n, n, channels)
    full = np.empty(shape, dtype=seen[1][1].dtype)
    for m in range(1, grid.num_cells + 1):
        cell, vals = seen[m]
        if vals.shape != (span**grid.rank, channels):
            raise ValueError(
                f"cell m={m} output has shape {vals.shape}, "
                f"expected {(span**grid.rank, channels)}"
            )
        sl = _block_slices(grid, n, cell)
        if grid.rank == 1:
            full[sl[0]] = vals
        else:
            full[sl[0], sl[1]] = vals.reshape(span, span, channels)
    return SignalTensor(grid.rank, n, channels, full, source or SourceInfo())
