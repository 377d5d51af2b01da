"""Functions with Fourier support near the paraboloid.

Two concrete kinds share one evaluation interface (``amb``,
``cap_positions``, ``cap_values``):

* :class:`Field` - a finite wave-packet superposition
  ``sum a_T phi_T(x) exp(i x . c(theta))``;
* :class:`ExtensionField` - the extension operator applied to sampled
  coefficients, ``sum_j w_j f_j exp(i (x . xi_j + t |xi_j|^2))``.

Cap pieces are exact in both: packets carry their cap label, and an
extension sample belongs to the cap whose cell contains it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .geometry import Ambient, Cap, GeometryError, Subspace, cap_cell_index, capset, near_mask
from . import _kernels
from .wave_packets import DEFAULT_BUMP, BumpProfile, Tile, WavePacket, bump, tile_dims

FIELD_VERSION = "field-v1"


def _matvec3(pts: np.ndarray, M: np.ndarray) -> np.ndarray:
    # explicit small product: keeps results independent of BLAS threading
    out = pts[:, :1] * M[0]
    for k in range(1, M.shape[0]):
        out = out + pts[:, k:k + 1] * M[k]
    return out


def support_constant(n: int, profile: BumpProfile = DEFAULT_BUMP) -> float:
    """c0 with every packet's Fourier support inside N_{c0/D^2} Sigma.

    Angular half-widths of the bump transform are 2 pi h / D across and
    2 pi h / D^2 along the normal; the tangential offset bends away from the
    paraboloid by at most its squared length.
    """
    t = 2 * math.pi * profile.half_width
    return t + n * t * t


@dataclass(frozen=True)
class Field:
    amb: Ambient
    packets: tuple = ()
    profile: BumpProfile = dc_field(default=DEFAULT_BUMP, compare=False)

    @property
    def support_constant(self) -> float:
        return support_constant(self.amb.n, self.profile)

    @cached_property
    def _arrays(self):
        cs = capset(self.amb.n, self.amb.D)
        if not self.packets:
            return cs, np.zeros(0, int), np.zeros((0, self.amb.dim), int), np.zeros(0, complex)
        pos = np.array([cs.index_of(p.tile.cap.index) for p in self.packets])
        tidx = np.array([p.tile.index for p in self.packets], dtype=int)
        coef = np.array([p.coefficient for p in self.packets], dtype=complex)
        return cs, pos, tidx, coef

    @cached_property
    def cap_positions(self) -> np.ndarray:
        """Sorted positions (in the scale-D cap partition) of caps carrying packets."""
        return np.unique(self._arrays[1])

    @property
    def caps(self) -> list[Cap]:
        cs = self._arrays[0]
        return [cs.caps[i] for i in self.cap_positions]

    def __len__(self):
        return len(self.packets)

    def masses(self) -> np.ndarray:
        m = math.sqrt(float(np.prod(tile_dims(self.amb.n, self.amb.D))) * self.profile.l2sq ** self.amb.dim)
        return np.abs(self._arrays[3]) * m

    @cached_property
    def _kernel_args(self):
        cs, pos, tidx, coef = self._arrays
        caps = self.cap_positions
        ptr = np.searchsorted(pos, np.append(caps, np.iinfo(np.int64).max)).astype(np.int64)
        d = self.amb.dim
        kmin = np.zeros((len(caps), d), dtype=np.int64)
        kmax = np.zeros((len(caps), d), dtype=np.int64)
        for c in range(len(caps)):
            block = tidx[ptr[c]:ptr[c + 1]]
            kmin[c], kmax[c] = block.min(axis=0), block.max(axis=0)
        return (np.ascontiguousarray(cs.frames[caps]), np.ascontiguousarray(cs.lifted[caps]),
                tile_dims(self.amb.n, self.amb.D), ptr, kmin, kmax,
                np.ascontiguousarray(tidx, dtype=np.int64), np.ascontiguousarray(coef))

    def cap_values(self, pts: np.ndarray, truncation: float | None = None, power: int = 1) -> np.ndarray:
        """(N, len(cap_positions)) complex values of the cap pieces F_theta.

        ``power=2`` replaces every bump by its square (used for sampling densities).
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if len(self.cap_positions) == 0:
            return np.zeros((pts.shape[0], 0), dtype=complex)
        R = self.profile.tail_radius(1e-10) if truncation is None else truncation
        return _kernels.cap_values(pts, *self._kernel_args, self.profile, R, power)

    def to_json(self) -> dict:
        a = self.amb
        return {
            "version": FIELD_VERSION,
            "ambient": {"n": a.n, "D": a.D, "eps": a.eps, "L": a.L, "D0": a.D0},
            "support_constant": self.support_constant,
            "packets": [
                {"cap_index": list(p.tile.cap.index), "tile_index": list(p.tile.index),
                 "re": float(np.real(p.coefficient)), "im": float(np.imag(p.coefficient))}
                for p in self.packets
            ],
        }

    @classmethod
    def from_json(cls, doc) -> "Field":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if doc.get("version") != FIELD_VERSION:
            raise ValueError(f"unsupported field document version {doc.get('version')!r}")
        a = doc["ambient"]
        amb = Ambient(int(a["n"]), int(a["D"]), float(a["eps"]), float(a["L"]), int(a["D0"]))
        pk = [WavePacket(Tile(Cap(tuple(p["cap_index"]), amb.D), tuple(p["tile_index"])),
                         complex(p["re"], p["im"])) for p in doc["packets"]]
        return synthesize(amb, pk)


def synthesize(amb: Ambient, packets, profile: BumpProfile = DEFAULT_BUMP) -> Field:
    cs = capset(amb.n, amb.D)
    for p in packets:
        if p.tile.cap.scale != amb.D:
            raise GeometryError(f"packet at scale {p.tile.cap.scale} in a scale-{amb.D} field")
        cs.index_of(p.tile.cap.index)
    ordered = tuple(sorted(packets, key=lambda p: (p.tile.cap.index, p.tile.index)))
    return Field(amb, ordered, profile)


def evaluate(F, pts, truncation: float | None = None) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(F, Field):
        vals = F.cap_values(pts, truncation)
    else:
        vals = F.cap_values(pts)
    return vals.sum(axis=1) if vals.shape[1] else np.zeros(pts.shape[0], dtype=complex)


def evaluate_direct(F: Field, pts) -> np.ndarray:
    """Unaccelerated packet-by-packet sum; independent of :meth:`Field.cap_values`."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(pts.shape[0], dtype=complex)
    for p in F.packets:
        phi = bump(p.tile, F.profile)(pts)
        out += p.coefficient * phi * np.exp(1j * pts @ p.tile.cap.lifted_center)
    return out


def restrict_to_caps(F: Field, keep) -> Field:
    keep = set(keep)
    return Field(F.amb, tuple(p for p in F.packets if p.tile.cap.index in keep), F.profile)


def restrict_to_cap(F: Field, cap: Cap) -> Field:
    capset(F.amb.n, F.amb.D).index_of(cap.index)
    return restrict_to_caps(F, {cap.index})


def restrict_to_subspace_caps(F, V: Subspace):
    if isinstance(F, ExtensionField):
        return F.restrict_near(V)
    cs = capset(F.amb.n, F.amb.D)
    near = near_mask(cs.normals, V, F.amb.D)
    keep = {cs.caps[i].index for i in np.nonzero(near)[0]}
    return restrict_to_caps(F, keep)


def scale_field(F: Field, s) -> Field:
    return Field(F.amb, tuple(p.scaled(s) for p in F.packets), F.profile)


def merge(F: Field, G: Field) -> Field:
    return synthesize(F.amb, list(F.packets) + list(G.packets), F.profile)


# -- extension operator ----------------------------------------------------

@dataclass(frozen=True)
class Coefficients:
    """Samples of f on a midpoint grid: nodes ``xi`` (M, n), weights, values."""

    xi: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.xi.shape[1]

    def with_values(self, values) -> "Coefficients":
        return Coefficients(self.xi, self.weights, np.asarray(values, dtype=complex))


def coefficient_grid(n: int, spacing: float, values=None, radius: float = 1.0) -> Coefficients:
    """Midpoint grid over B^n(0, radius) with the given spacing (cells whose centre lies inside)."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    m = int(math.ceil(radius / spacing - 1e-12))
    ax = (np.arange(-m, m) + 0.5) * spacing
    grid = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.einsum("ij,ij->i", grid, grid) < radius ** 2]
    if grid.shape[0] == 0:
        raise ValueError("empty coefficient grid")
    w = np.full(grid.shape[0], spacing ** n)
    if values is None:
        vals = np.ones(grid.shape[0], dtype=complex)
    elif callable(values):
        vals = np.asarray(values(grid), dtype=complex)
    else:
        vals = np.asarray(values, dtype=complex)
    return Coefficients(grid, w, vals)


def _lift(xi: np.ndarray) -> np.ndarray:
    return np.column_stack([xi, np.einsum("ij,ij->i", xi, xi)])


def extension_operator(f: Coefficients, pts) -> np.ndarray:
    """R f(x, t) = integral over B^n of exp(i x.xi + i t|xi|^2) f(xi) dxi, by midpoint quadrature."""
    if f.xi.shape[0] == 0:
        raise ValueError("empty coefficient grid")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lifted = _lift(f.xi)
    out = np.zeros(pts.shape[0], dtype=complex)
    wv = f.weights * f.values
    for b0 in range(0, lifted.shape[0], 256):
        ph = _matvec3(pts, lifted[b0:b0 + 256].T)
        out += (np.exp(1j * ph) * wv[None, b0:b0 + 256]).sum(axis=1)
    return out


class ExtensionField:
    """R f viewed at cap scale ``amb.D``: its cap pieces are R(f 1_cell)."""

    def __init__(self, amb: Ambient, f: Coefficients):
        if f.n != amb.n:
            raise ValueError("coefficient dimension does not match the ambient")
        self.amb = amb
        self.f = f
        cs = capset(amb.n, amb.D)
        self._pos = np.array([cs.index_of(cap_cell_index(x, amb.D)) for x in f.xi], dtype=int)

    @cached_property
    def cap_positions(self) -> np.ndarray:
        nz = np.abs(self.f.values) > 0
        return np.unique(self._pos[nz])

    def cap_values(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        caps = self.cap_positions
        out = np.zeros((pts.shape[0], len(caps)), dtype=complex)
        lifted = _lift(self.f.xi)
        wv = self.f.weights * self.f.values
        for col, c in enumerate(caps):
            sel = np.nonzero(self._pos == c)[0]
            ph = _matvec3(pts, lifted[sel].T)
            out[:, col] = (np.exp(1j * ph) * wv[None, sel]).sum(axis=1)
        return out

    def restrict_positions(self, keep: np.ndarray) -> "ExtensionField":
        mask = np.isin(self._pos, keep)
        return ExtensionField(self.amb, self.f.with_values(np.where(mask, self.f.values, 0)))

    def restrict_near(self, V: Subspace) -> "ExtensionField":
        cs = capset(self.amb.n, self.amb.D)
        return self.restrict_positions(np.nonzero(near_mask(cs.normals, V, self.amb.D))[0])

    def at_scale(self, D: int) -> "ExtensionField":
        return ExtensionField(self.amb.with_scale(D), self.f)


# -- parabolic rescaling ---------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """(x, t) -> ((x + 2 t c) / K, t / K^2) and the phase x.c + t|c|^2."""

    center: np.ndarray
    K: float

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, t = pts[:, :-1], pts[:, -1:]
        return np.column_stack([(x + 2 * t * self.center) / self.K, t[:, 0] / self.K ** 2])

    def phase(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = self.center
        return pts[:, :-1] @ c + pts[:, -1] * float(c @ c)


def parabolic_rescale(f, center, K: float, tol: float = 0.0):
    """Rescale coefficients supported on the cell of side 1/K centred at ``center``.

    Returns ``(g, jacobian_factor, A)`` with g(eta) = f(center + eta / K) and

        R f_theta(x, t) = exp(i A.phase(x, t)) * jacobian_factor * R g(A(x, t)),

    jacobian_factor = K^{-n}.  ``f`` may be :class:`Coefficients` (returned g
    is on the mapped grid) or a callable (g is a callable).
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    n = center.size
    A = AffineMap(center, float(K))
    jac = float(K) ** (-n)
    if callable(f):
        def g(eta):
            return f(center + np.atleast_2d(eta) / K)
        return g, jac, A
    if K == 1:
        inside = np.ones(f.xi.shape[0], dtype=bool)  # the whole ball
    else:
        inside = np.all(np.abs(f.xi - center) <= 0.5 / K + 1e-12, axis=1)
    if np.any(np.abs(f.values[~inside]) > tol):
        raise ValueError("coefficients are not supported in the cap")
    xi = f.xi[inside]
    g = Coefficients(K * (xi - center), f.weights[inside] * K ** n, f.values[inside])
    return g, jac, A


# -- global L^2 ------------------------------------------------------------

def l2_norm_sq(F: Field, n_samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """||F||_2^2 over all of R^{n+1} by importance sampling; returns (value, stderr).

    Points are drawn from rho = sum |a_T|^2 phi_T^2 / Z, which is a mixture of
    separable densities; the estimator is Z * mean(|F|^2 / (Z rho)).
    """
    if not F.packets:
        return 0.0, 0.0
    rng = np.random.default_rng([seed, 7])
    cs, pos, tidx, coef = F._arrays
    dims = tile_dims(F.amb.n, F.amb.D)
    w = np.abs(coef) ** 2
    vol = float(np.prod(dims))
    Z = float(w.sum()) * vol * F.profile.l2sq ** F.amb.dim
    pick = rng.choice(len(w), size=n_samples, p=w / w.sum())
    s = F.profile.sample_sq(rng, (n_samples, F.amb.dim)) + tidx[pick]
    y = s * dims
    frames = cs.frames[pos[pick]]
    x = np.einsum("nij,nj->ni", frames, y)
    sq = Field(F.amb, tuple(WavePacket(p.tile, abs(p.coefficient) ** 2) for p in F.packets), F.profile)
    dens = np.abs(sq.cap_values(x, power=2)).sum(axis=1)
    val = np.abs(evaluate(F, x)) ** 2
    ratio = val / np.maximum(dens, 1e-300) * Z
    est = float(ratio.mean())
    return est, float(ratio.std(ddof=1) / math.sqrt(n_samples))
