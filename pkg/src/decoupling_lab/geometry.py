"""Cap partition of the paraboloid, subspaces, dyadic cubes.

Frequency conventions: a cap is a cell of side 1/D on the grid over
[-1, 1]^n whose lifted centre (xi, |xi|^2) sits on the paraboloid.
Normals point "down" (negative last coordinate); every distance used
downstream is sign invariant.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GeometryError(ValueError):
    pass


def is_dyadic(x: float) -> bool:
    if x <= 0:
        return False
    m, _ = math.frexp(x)
    return m == 0.5


def largest_dyadic_at_most(x: float) -> int:
    if x < 1:
        raise GeometryError(f"no dyadic integer <= {x}")
    return 1 << int(math.floor(math.log2(x) + 1e-12))


@dataclass(frozen=True)
class Ambient:
    """Dimension and scale data shared by every object of one experiment.

    ``n`` is the frequency dimension, functions live on R^{n+1}. ``D0`` is
    derived from ``eps`` and ``L`` unless passed explicitly.
    """

    n: int
    D: int
    eps: float = 0.1
    L: float = 4.0
    D0: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise GeometryError("n must be >= 1")
        if self.D < 2 or not is_dyadic(self.D):
            raise GeometryError(f"invalid scale D={self.D}: need a power of two >= 2")
        if self.D0 is None:
            d0 = largest_dyadic_at_most(self.D ** (self.eps ** (math.sqrt(self.L) / 2)))
            object.__setattr__(self, "D0", max(2, d0))
        if not is_dyadic(self.D0) or not 2 <= self.D0 <= self.D:
            raise GeometryError(f"D0={self.D0} must be dyadic with 2 <= D0 <= D={self.D}")

    @property
    def dim(self) -> int:
        return self.n + 1

    def with_scale(self, D: int, D0: int | None = None) -> "Ambient":
        if D0 is None:
            D0 = min(self.D0, D)
        return Ambient(self.n, D, self.eps, self.L, D0)


def normal_of(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    v = np.append(2.0 * xi, -1.0)
    return v / math.sqrt(1.0 + 4.0 * float(xi @ xi))


@dataclass(frozen=True)
class Cap:
    index: tuple[int, ...]
    scale: int

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) / self.scale

    @property
    def normal(self) -> np.ndarray:
        return normal_of(self.center)

    @property
    def lifted_center(self) -> np.ndarray:
        c = self.center
        return np.append(c, c @ c)


def cap_normal(cap: Cap) -> np.ndarray:
    return cap.normal


def build_cap_partition(amb_or_n, D: int | None = None) -> list[Cap]:
    """All grid cells of side 1/D meeting the open unit ball, sorted by index.

    Accepts an :class:`Ambient` or ``(n, D)``.
    """
    if isinstance(amb_or_n, Ambient):
        n, D = amb_or_n.n, amb_or_n.D
    else:
        n = int(amb_or_n)
    if D is None or D < 2:
        raise GeometryError(f"invalid scale D={D}")
    caps = []
    for idx in itertools.product(range(-D, D), repeat=n):
        a = np.asarray(idx, dtype=float) / D
        b = a + 1.0 / D
        # closest point of the half-open cell [a, b) to the origin
        nearest = np.clip(0.0, a, b)
        if nearest @ nearest < 1.0:
            caps.append(Cap(tuple(idx), D))
    return caps


def cap_cell_index(xi, D: int) -> tuple[int, ...]:
    """Index of the half-open cell of side 1/D containing ``xi``."""
    return tuple(int(v) for v in np.floor(np.asarray(xi, dtype=float) * D))


class CapSet:
    """Array view of a cap partition: centres, normals and frames as arrays."""

    def __init__(self, n: int, D: int):
        self.n = n
        self.D = D
        self.caps = build_cap_partition(n, D)
        self.lookup = {c.index: i for i, c in enumerate(self.caps)}
        self.centers = np.array([c.center for c in self.caps])
        self.normals = np.array([normal_of(c) for c in self.centers])
        sq = np.einsum("ij,ij->i", self.centers, self.centers)
        self.lifted = np.column_stack([self.centers, sq])

    def __len__(self):
        return len(self.caps)

    @cached_property
    def frames(self) -> np.ndarray:
        return np.array([cap_frame(v) for v in self.normals])

    def index_of(self, cap_index) -> int:
        try:
            return self.lookup[tuple(cap_index)]
        except KeyError:
            raise GeometryError(f"cap {tuple(cap_index)} is not in the scale-{self.D} partition") from None

    def parent_of(self, fine: "CapSet") -> np.ndarray:
        """For each cap of ``fine``, the index of the cap of ``self`` containing its centre."""
        out = np.empty(len(fine), dtype=int)
        for i, c in enumerate(fine.centers):
            key = cap_cell_index(c, self.D)
            out[i] = self.lookup[key]
        return out


_CAPSETS: dict[tuple[int, int], CapSet] = {}


def capset(n: int, D: int) -> CapSet:
    key = (n, D)
    if key not in _CAPSETS:
        _CAPSETS[key] = CapSet(n, D)
    return _CAPSETS[key]


def cap_frame(normal) -> np.ndarray:
    """Orthonormal frame (columns) whose last column is ``normal``.

    Householder reflection sending e_last to the normal; deterministic.
    """
    v = np.asarray(normal, dtype=float)
    d = v.size
    e = np.zeros(d)
    e[-1] = 1.0
    u = e - v
    nu = np.linalg.norm(u)
    if nu < 1e-14:
        H = np.eye(d)
    else:
        u = u / nu
        H = np.eye(d) - 2.0 * np.outer(u, u)
    H[:, -1] = v
    return H


class Subspace:
    """A linear subspace of R^{n+1}, stored by an orthonormal basis (rows)."""

    def __init__(self, vectors, tol: float = 1e-10):
        M = np.atleast_2d(np.asarray(vectors, dtype=float))
        if M.size == 0:
            raise GeometryError("a subspace needs at least one vector")
        u, s, _ = np.linalg.svd(M.T, full_matrices=False)
        rank = int(np.sum(s > tol * max(1.0, s.max())))
        if rank == 0:
            raise GeometryError("spanning vectors are all zero")
        self.basis = u[:, :rank].T.copy()

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def __repr__(self):
        return f"Subspace(dim={self.dim}, basis={np.round(self.basis, 6).tolist()})"

    def to_json(self):
        return self.basis.tolist()

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(np.eye(d))


def dist_to_subspace(v, V: Subspace) -> float:
    v = np.asarray(v, dtype=float)
    c = V.basis @ v
    return math.sqrt(max(0.0, float(v @ v) - float(c @ c)))


def dists_to_subspace(vs: np.ndarray, V: Subspace) -> np.ndarray:
    c = vs @ V.basis.T
    r = np.einsum("ij,ij->i", vs, vs) - np.einsum("ij,ij->i", c, c)
    return np.sqrt(np.maximum(r, 0.0))


# slack absorbing rounding when a normal sits exactly on the threshold
_NEAR_TOL = 1e-12


def near_mask(normals: np.ndarray, V: Subspace, D: int) -> np.ndarray:
    return dists_to_subspace(normals, V) <= 1.0 / D + _NEAR_TOL


def caps_near_subspace(caps: list[Cap], V: Subspace, D: int) -> list[Cap]:
    if not caps:
        return []
    normals = np.array([c.normal for c in caps])
    keep = near_mask(normals, V, D)
    return [c for c, k in zip(caps, keep) if k]


def caps_avoiding(caps: list[Cap], subspaces, D: int) -> list[Cap]:
    if not caps:
        return []
    normals = np.array([c.normal for c in caps])
    hit = np.zeros(len(caps), dtype=bool)
    for V in subspaces:
        hit |= near_mask(normals, V, D)
    return [c for c, h in zip(caps, hit) if not h]


@dataclass(frozen=True)
class DyadicCube:
    """Axis-aligned cube; ``corner`` is its lowest vertex."""

    corner: tuple[float, ...]
    side: float
    aligned: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.side > 0:
            raise GeometryError(f"degenerate cube side {self.side}")
        object.__setattr__(self, "corner", tuple(float(c) for c in self.corner))
        if self.aligned:
            if not is_dyadic(self.side):
                raise GeometryError(f"side {self.side} is not dyadic")
            q = np.asarray(self.corner) / self.side
            if not np.allclose(q, np.round(q), atol=1e-9):
                raise GeometryError(f"corner {self.corner} not aligned to the side-{self.side} grid")

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.corner) + self.side / 2

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.corner)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.corner) + self.side

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def contains_cube(self, other: "DyadicCube") -> bool:
        return bool(np.all(other.lo >= self.lo - 1e-9) and np.all(other.hi <= self.hi + 1e-9))

    def to_json(self):
        return {"corner": list(self.corner), "side": self.side}

    @classmethod
    def centered(cls, center, side) -> "DyadicCube":
        c = np.asarray(center, dtype=float)
        return cls(tuple(c - side / 2), side, aligned=False)


def origin_cube(dim: int, side: float) -> DyadicCube:
    return DyadicCube((0.0,) * dim, side)


def dyadic_cubes(region: DyadicCube, side: float) -> list[DyadicCube]:
    if not is_dyadic(side) or side > region.side:
        raise GeometryError(f"side {side} must be dyadic and at most {region.side}")
    ratio = region.side / side
    m = int(round(ratio))
    if abs(ratio - m) > 1e-9 or not is_dyadic(m):
        raise GeometryError(f"side {side} does not divide {region.side}")
    lo = np.asarray(region.corner)
    out = []
    for idx in itertools.product(range(m), repeat=region.dim):
        out.append(DyadicCube(tuple(lo + side * np.asarray(idx)), side, aligned=region.aligned))
    return out


def dilate(U: DyadicCube, factor: float) -> DyadicCube:
    if factor < 1:
        raise GeometryError(f"dilation factor {factor} < 1")
    if factor == 1:
        return U
    return DyadicCube.centered(U.center, U.side * factor)


# -- candidate subspaces -------------------------------------------------

def _dedupe(subspaces: list[Subspace], tol: float = 1e-9) -> list[Subspace]:
    kept: list[Subspace] = []
    projs: dict[int, list[np.ndarray]] = {}
    for V in subspaces:
        # all principal angles below tol <=> projectors agree
        P = V.projector.ravel()
        same = projs.setdefault(V.dim, [])
        if same and np.min(np.max(np.abs(np.asarray(same) - P), axis=1)) < tol:
            continue
        same.append(P)
        kept.append(V)
    return kept


def candidate_subspaces(normals, d: int, strategy: str = "mixed", seed: int = 0,
                        budget: int = 256, samples: int = 16, weights=None) -> list[Subspace]:
    """Finite stand-in for the Grassmannian of d-planes.

    strategy: ``normals`` (spans of d-subsets of the given normals),
    ``sampled`` (Gaussian frames), ``coordinate``, or ``mixed`` (all three).
    With ``weights`` the normal-spanned subsets are taken heaviest first.
    """
    if len(normals) and isinstance(normals[0], Cap):
        normals = [c.normal for c in normals]
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    dim = normals.shape[1]
    if not 1 <= d <= dim:
        raise GeometryError(f"subspace dimension {d} outside 1..{dim}")
    if strategy not in ("normals", "sampled", "coordinate", "mixed"):
        raise GeometryError(f"unknown candidate strategy {strategy!r}")
    out: list[Subspace] = []
    if d == dim:
        return [Subspace.full(dim)]
    if strategy in ("normals", "mixed") and len(normals):
        order = np.arange(len(normals))
        if weights is not None:
            order = np.argsort(-np.asarray(weights, dtype=float), kind="stable")
        count = 0
        for combo in itertools.combinations(order, d):
            if count >= budget:
                break
            M = normals[list(combo)]
            if np.linalg.matrix_rank(M, tol=1e-9) < d:
                continue
            out.append(Subspace(M))
            count += 1
    if strategy in ("sampled", "mixed"):
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            G = rng.standard_normal((d, dim))
            out.append(Subspace(G))
    if strategy in ("coordinate", "mixed"):
        for combo in itertools.combinations(range(dim), d):
            out.append(Subspace(np.eye(dim)[list(combo)]))
    return _dedupe(out)
