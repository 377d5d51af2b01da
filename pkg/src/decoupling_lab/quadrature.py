"""Quadrature rules over cubes and a deterministic chunked map.

Every integral in the package goes through :class:`QuadratureRule`.  Points
are produced in fixed-size chunks of strata, so results never depend on how
many workers consume the chunks.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import DyadicCube, GeometryError, dyadic_cubes

# single-core desk default; the 1e8 ceiling of a workstation is a config value
FULL_GRID_MAX = 1 << 18


def default_workers() -> int:
    env = os.environ.get("DECOUPLING_LAB_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


_WORKERS = None


def set_workers(n: int | None) -> None:
    global _WORKERS
    _WORKERS = None if n is None else max(1, int(n))


def workers() -> int:
    return _WORKERS if _WORKERS is not None else default_workers()


def ordered_map(fn, items, n_workers: int | None = None) -> list:
    """``list(map(fn, items))`` run on a thread pool; output keeps input order."""
    items = list(items)
    nw = n_workers or workers()
    if nw <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class GridSpec:
    """How to integrate over ``region``.

    mode is ``full-grid``, ``stratified-sample`` or ``auto`` (full grid when
    the tensor grid has at most ``full_grid_max`` points).
    """

    region: DyadicCube
    spacing: float = 0.125
    mode: str = "auto"
    sample_budget: int = 200_000
    seed: int = 0
    full_grid_max: int = FULL_GRID_MAX

    def __post_init__(self):
        if self.mode not in ("auto", "full-grid", "stratified-sample"):
            raise GeometryError(f"unknown quadrature mode {self.mode!r}")
        if not self.spacing > 0:
            raise GeometryError("spacing must be positive")
        if self.resolved_mode() == "full-grid" and self.spacing > 0.125 + 1e-15:
            raise GeometryError("full-grid spacing must be <= 1/8")
        if self.resolved_mode() == "stratified-sample" and self.sample_budget < 1000:
            raise GeometryError("sample budget must be >= 1000")

    def grid_points(self) -> float:
        return (self.region.side / self.spacing) ** self.region.dim

    def resolved_mode(self) -> str:
        if self.mode != "auto":
            return self.mode
        return "full-grid" if self.grid_points() <= self.full_grid_max else "stratified-sample"


CELL_POINTS_MAX = 1 << 14
CHUNK_POINTS_MAX = 1 << 17


@dataclass
class Chunk:
    points: np.ndarray      # (N, d)
    weights: np.ndarray     # (N,)
    cell: np.ndarray        # (N,) global cell ids
    first: int              # first cell id in this chunk
    per: int                # points per cell

    def cell_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum (N, ...) values over the points of each cell -> (n_chunk_cells, ...)."""
        return values.reshape((-1, self.per) + values.shape[1:]).sum(axis=1)

    stratum_sums = cell_sums


class QuadratureRule:
    """Points and weights over ``spec.region`` organised by strata of side ``stratum_side``.

    Each stratum is split into equal dyadic cells (the unit of sampling and of
    chunking); cells are numbered stratum by stratum, so per-stratum totals are
    contiguous sums of per-cell totals.
    """

    def __init__(self, spec: GridSpec, stratum_side: float | None = None):
        self.spec = spec
        region = spec.region
        side = region.side if stratum_side is None else stratum_side
        self.strata = dyadic_cubes(region, side) if side < region.side else [region]
        self.stratum_side = side
        self.mode = spec.resolved_mode()
        d = region.dim
        cell = side
        if self.mode == "full-grid":
            if abs(side / spec.spacing - round(side / spec.spacing)) > 1e-9:
                raise GeometryError("grid spacing must divide the stratum side")
            while (cell / spec.spacing) ** d > CELL_POINTS_MAX and cell / 2 >= spec.spacing:
                cell /= 2
            m = int(round(cell / spec.spacing))
            self.per_axis = m
            per = m ** d
        else:
            budget_per_stratum = max(2, spec.sample_budget // len(self.strata))
            while budget_per_stratum / (side / cell) ** d > CELL_POINTS_MAX:
                cell /= 2
            per = max(2, budget_per_stratum // int(round((side / cell) ** d)))
        self.cell_side = cell
        self.cells_per_stratum = int(round((side / cell) ** d))
        if self.cells_per_stratum == 1:
            self.cells = list(self.strata)
        else:
            self.cells = [c for st in self.strata for c in dyadic_cubes(st, cell)]
        self.points_per_cell = per
        self.n_points = per * len(self.cells)

    @property
    def n_strata(self) -> int:
        return len(self.strata)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def points_per_stratum(self) -> int:
        return self.points_per_cell * self.cells_per_stratum

    def chunk_ranges(self):
        s = max(1, CHUNK_POINTS_MAX // self.points_per_cell)
        return [(a, min(a + s, self.n_cells)) for a in range(0, self.n_cells, s)]

    def chunk(self, rng_range) -> Chunk:
        a, b = rng_range
        d = self.spec.region.dim
        lows = np.array([self.cells[i].lo for i in range(a, b)])
        if self.mode == "full-grid":
            h = self.spec.spacing
            ax = (np.arange(self.per_axis) + 0.5) * h
            local = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
            pts = (lows[:, None, :] + local[None, :, :]).reshape(-1, d)
            w = np.full(pts.shape[0], h ** d)
        else:
            m = self.points_per_cell
            rng = np.random.default_rng([self.spec.seed, a])
            local = rng.random((b - a, m, d)) * self.cell_side
            pts = (lows[:, None, :] + local).reshape(-1, d)
            w = np.full(pts.shape[0], self.cell_side ** d / m)
        k = self.points_per_cell
        return Chunk(pts, w, np.repeat(np.arange(a, b), k), a, k)

    def map_cells(self, fn, n_workers: int | None = None):
        """Apply ``fn(chunk)`` -> tuple of per-cell arrays; concatenate along cells."""
        parts = ordered_map(lambda r: fn(self.chunk(r)), self.chunk_ranges(), n_workers)
        if not parts:
            return []
        return [np.concatenate([p[i] for p in parts], axis=0) for i in range(len(parts[0]))]

    def to_strata(self, per_cell: np.ndarray) -> np.ndarray:
        """Per-cell totals -> per-stratum totals (fixed summation order)."""
        a = np.asarray(per_cell)
        return a.reshape((self.n_strata, self.cells_per_stratum) + a.shape[1:]).sum(axis=1)

    def map_strata(self, fn, n_workers: int | None = None):
        """As :meth:`map_cells` but reduced to per-stratum arrays."""
        return [self.to_strata(x) for x in self.map_cells(fn, n_workers)]


def stderr_from_moments(s1, s2, rule: QuadratureRule) -> float:
    """Standard error of a stratified estimate from per-cell weighted moments.

    ``s1 = sum w f``, ``s2 = sum w^2 f^2`` per cell. Zero in full-grid mode.
    """
    if rule.mode == "full-grid":
        return 0.0
    m = rule.points_per_cell
    # per cell: est = sum w f, sample variance of (m w f) over points
    var = (m * np.asarray(s2) - np.asarray(s1) ** 2) / max(1, m - 1)
    return float(math.sqrt(max(0.0, float(np.sum(np.maximum(var, 0.0))))))
