"""Tiles, partition-of-unity bumps and packet ensembles.

The bump attached to a tile is separable in the tile frame.  Along each
frame axis the 1D generator is

    g(s) = a * sinc(a s)^m / beta_m(0),      a = 2 h / m,

whose Fourier transform is the centred cardinal B-spline of order m dilated
to [-h, h] (cycles per tile width) and normalised to 1 at the origin.  With
h < 1 the transform vanishes at every nonzero integer, so by Poisson
summation the integer translates of g add up to exactly 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import BSpline

from .geometry import (
    Cap,
    DyadicCube,
    GeometryError,
    Subspace,
    capset,
    dyadic_cubes,
    near_mask,
)

log = logging.getLogger(__name__)


class BumpProfile:
    """1D generator g of the tile bumps (see module docstring)."""

    def __init__(self, order: int = 12, half_width: float = 0.5, scale: float = 1.0):
        if order < 2 or order % 2:
            raise ValueError("B-spline order must be even and >= 2 (keeps g >= 0)")
        if not 0 < half_width < 1:
            raise ValueError("half width must lie in (0, 1)")
        self.order = order
        self.half_width = half_width
        # scale != 1 only for fault injection: breaks the partition of unity
        self.scale = scale
        self.a = 2.0 * half_width / order
        self._spline = BSpline.basis_element(np.arange(order + 1) - order / 2, extrapolate=False)
        self.beta0 = float(self._spline(0.0))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.scale * self.a * np.sinc(self.a * s) ** self.order / self.beta0

    def fourier(self, omega):
        """Transform of g in cycles per unit of s."""
        u = np.asarray(omega, dtype=float) / self.a
        v = np.nan_to_num(self._spline(u), nan=0.0)
        return self.scale * v / self.beta0

    @cached_property
    def l2sq(self) -> float:
        spl2 = BSpline.basis_element(np.arange(2 * self.order + 1) - self.order, extrapolate=False)
        return self.scale ** 2 * self.a * float(spl2(0.0)) / self.beta0 ** 2

    def power_integral(self, p: float) -> float:
        """Integral of g^p over the line (trapezoid; the integrand is band-limited)."""
        if p == 2:
            return self.l2sq
        step = 0.25 / (p * self.half_width)
        S = 40.0 * self.order / (2 * math.pi * self.half_width)
        s = np.arange(-S, S + step / 2, step)
        return float(np.sum(np.abs(self(s)) ** p) * step)

    def tail_radius(self, tol: float = 1e-10) -> float:
        """Distance (in tile widths) beyond which g/g(0) < tol."""
        return self.order * tol ** (-1.0 / self.order) / (2 * math.pi * self.half_width)

    @cached_property
    def _cdf_table(self):
        S = self.tail_radius(1e-12)
        s = np.linspace(-S, S, 200_001)
        dens = self(s) ** 2
        cdf = np.cumsum(dens)
        cdf /= cdf[-1]
        return s, cdf

    def sample_sq(self, rng, size):
        """Draw from the density g^2 / ||g||_2^2."""
        s, cdf = self._cdf_table
        return np.interp(rng.random(size), cdf, s)


DEFAULT_BUMP = BumpProfile()


def tile_dims(n: int, D: int) -> np.ndarray:
    return np.array([float(D)] * n + [float(D) ** 2])


@dataclass(frozen=True)
class Tile:
    cap: Cap
    index: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.cap.index)

    @property
    def dims(self) -> np.ndarray:
        return tile_dims(self.n, self.cap.scale)

    @property
    def frame(self) -> np.ndarray:
        cs = capset(self.n, self.cap.scale)
        return cs.frames[cs.index_of(self.cap.index)]

    @property
    def center(self) -> np.ndarray:
        return self.frame @ (np.asarray(self.index, dtype=float) * self.dims)

    @property
    def volume(self) -> float:
        return float(np.prod(self.dims))


def bump(tile: Tile, profile: BumpProfile = DEFAULT_BUMP):
    """Return the bump phi_T as a callable on (N, n+1) points."""
    frame, dims = tile.frame, tile.dims
    k = np.asarray(tile.index, dtype=float)

    def phi(x):
        y = np.atleast_2d(np.asarray(x, dtype=float)) @ frame
        s = y / dims - k
        return np.prod(profile(s), axis=1)

    return phi


def bump_l2(n: int, D: int, profile: BumpProfile = DEFAULT_BUMP) -> float:
    return math.sqrt(float(np.prod(tile_dims(n, D))) * profile.l2sq ** (n + 1))


@dataclass(frozen=True)
class WavePacket:
    tile: Tile
    coefficient: complex

    @property
    def cap(self) -> Cap:
        return self.tile.cap

    @property
    def key(self):
        return (self.tile.cap.index, self.tile.index)

    def l2_mass(self, profile: BumpProfile = DEFAULT_BUMP) -> float:
        return abs(self.coefficient) * bump_l2(self.tile.n, self.tile.cap.scale, profile)

    def scaled(self, s) -> "WavePacket":
        return WavePacket(self.tile, self.coefficient * s)


# -- box intersection ------------------------------------------------------

def _sat_axes(frame: np.ndarray) -> np.ndarray:
    d = frame.shape[0]
    axes = [np.eye(d), frame.T]
    if d == 3:
        cr = []
        for i in range(3):
            for j in range(3):
                c = np.cross(np.eye(3)[i], frame[:, j])
                nc = np.linalg.norm(c)
                if nc > 1e-12:
                    cr.append(c / nc)
        if cr:
            axes.append(np.array(cr))
    return np.vstack(axes)


def box_meets_cubes(center, frame, half, lows: np.ndarray, side: float) -> np.ndarray:
    """Closed oriented box (centre, frame columns, half extents) vs axis-aligned cubes.

    Separating-axis test, exact in dimensions 2 and 3.  Higher dimensions fall
    back to the same test without cross axes (conservative: may report a meet).
    """
    lows = np.atleast_2d(lows)
    d = lows.shape[1]
    c_cubes = lows + side / 2
    axes = _sat_axes(frame)
    r_box = np.abs(axes @ frame) @ half                       # (A,)
    r_cube = np.abs(axes).sum(axis=1) * (side / 2)             # (A,)
    sep = np.abs((c_cubes - np.asarray(center)) @ axes.T)      # (Q, A)
    return np.all(sep <= r_box + r_cube + 1e-9, axis=1)


def dilated_half(tile: Tile, factor: float) -> np.ndarray:
    return tile.dims * factor / 2


def tile_meets(tile: Tile, region: DyadicCube, factor: float) -> bool:
    return bool(box_meets_cubes(tile.center, tile.frame, dilated_half(tile, factor),
                                region.lo[None, :], region.side)[0])


def tile_lattice(cap: Cap, region: DyadicCube, D0: int) -> list[Tile]:
    """Tiles of ``cap`` whose D0-dilation meets ``region``, sorted by index."""
    return [Tile(cap, tuple(int(v) for v in row)) for row in lattice_indices(cap, region, D0)]


def lattice_indices(cap: Cap, region: DyadicCube, D0: int) -> np.ndarray:
    """Integer (m, n+1) index array of :func:`tile_lattice`."""
    if not region.side > 0:
        raise GeometryError("degenerate region")
    n = len(cap.index)
    t0 = Tile(cap, (0,) * (n + 1))
    frame, dims = t0.frame, t0.dims
    corners = np.array(np.meshgrid(*[[0.0, region.side]] * region.dim, indexing="ij")).reshape(region.dim, -1).T
    corners = corners + region.lo
    y = corners @ frame / dims
    lo = np.ceil(y.min(axis=0) - D0 / 2 - 1e-9).astype(int)
    hi = np.floor(y.max(axis=0) + D0 / 2 + 1e-9).astype(int)
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    centers = (idx * dims) @ frame.T
    half = dims * D0 / 2
    axes = _sat_axes(frame)
    r_box = np.abs(axes @ frame) @ half
    r_cube = np.abs(axes).sum(axis=1) * (region.side / 2)
    sep = np.abs((region.center - centers) @ axes.T)
    ok = np.all(sep <= r_box + r_cube + 1e-9, axis=1)
    return idx[ok]


def partition_sum(cap: Cap, pts, profile: BumpProfile = DEFAULT_BUMP, radius: float | None = None) -> np.ndarray:
    """Sum of phi_T(x) over every tile T of ``cap`` within ``radius`` tile widths of x.

    The bumps are products over frame axes, so the lattice sum factors into
    one 1D sum per axis.
    """
    R = profile.tail_radius(1e-12) if radius is None else radius
    t0 = Tile(cap, (0,) * (len(cap.index) + 1))
    s = np.atleast_2d(np.asarray(pts, dtype=float)) @ t0.frame / t0.dims
    r = int(math.ceil(R))
    ks = np.arange(-r, r + 1)
    base = np.floor(s)
    total = np.ones(s.shape[0])
    for j in range(s.shape[1]):
        u = s[:, j:j + 1] - (base[:, j:j + 1] + ks[None, :])
        total *= profile(u).sum(axis=1)
    return total


# -- buckets and localisation ---------------------------------------------

def dyadic_ceil(x: float) -> float:
    """Smallest power of two mu with mu/2 < x <= mu."""
    if x <= 0:
        raise ValueError("need a positive number")
    m, e = math.frexp(x)
    return x if m == 0.5 else math.ldexp(1.0, e)


@dataclass
class MuBucket:
    mu: float
    packets: list


def mu_buckets(packets, masses=None, profile: BumpProfile = DEFAULT_BUMP) -> dict[float, MuBucket]:
    """Group packets by dyadic L^2 mass. ``masses`` overrides cached packet masses."""
    if masses is None:
        masses = [p.l2_mass(profile) for p in packets]
    out: dict[float, MuBucket] = {}
    dropped = 0
    for p, m in zip(packets, masses):
        if m <= 0:
            dropped += 1
            continue
        mu = dyadic_ceil(m)
        out.setdefault(mu, MuBucket(mu, [])).packets.append(p)
    if dropped:
        log.warning("mu_buckets: dropped %d zero-mass packets", dropped)
    return dict(sorted(out.items()))


def localize(packets, U: DyadicCube, D0: float) -> list:
    if isinstance(packets, MuBucket):
        packets = packets.packets
    return [p for p in packets if tile_meets(p.tile, U, D0)]


def packet_cube_incidence(packets, cubes: list[DyadicCube], D0: float) -> np.ndarray:
    """Boolean (P, Q): does the D0-dilated tile of packet i meet cube j."""
    if not cubes:
        return np.zeros((len(packets), 0), dtype=bool)
    lows = np.array([q.lo for q in cubes])
    side = cubes[0].side
    out = np.zeros((len(packets), len(cubes)), dtype=bool)
    for i, p in enumerate(packets):
        t = p.tile
        out[i] = box_meets_cubes(t.center, t.frame, dilated_half(t, D0), lows, side)
    return out


def gamma_cubes(B: DyadicCube, packets, D: int, D0: float) -> dict[float, list[DyadicCube]]:
    """Sort the side-D cubes of B by the dyadic class of their packet count."""
    if abs(B.side - D * D) > 1e-9:
        raise GeometryError(f"B must have side D^2 = {D * D}")
    cubes = dyadic_cubes(B, D)
    counts = packet_cube_incidence(packets, cubes, D0).sum(axis=0)
    out: dict[float, list[DyadicCube]] = {}
    for q, c in zip(cubes, counts):
        if c == 0:
            continue
        out.setdefault(dyadic_ceil(float(c)), []).append(q)
    return dict(sorted(out.items()))


def bernstein_ratio(packet: WavePacket, p: float, profile: BumpProfile = DEFAULT_BUMP) -> float:
    """||F_{theta,T}||_p / (D^{(n+2)(1/p-1/2)} ||F_{theta,T}||_2).

    The modulus |a| phi_T is a product over frame axes, so both norms reduce
    to 1D integrals of the generator (computed by quadrature).
    """
    if packet.coefficient == 0:
        raise ValueError("zero packet")
    n, D = packet.tile.n, packet.tile.cap.scale
    if p == 2:
        return 1.0
    vol = float(np.prod(tile_dims(n, D)))
    lp = abs(packet.coefficient) * (vol * profile.power_integral(p) ** (n + 1)) ** (1 / p)
    l2 = packet.l2_mass(profile)
    return lp / (D ** ((n + 2) * (1 / p - 0.5)) * l2)


def packets_near_subspace(packets, V: Subspace, D: int) -> list:
    if not packets:
        return []
    normals = np.array([p.cap.normal for p in packets])
    keep = near_mask(normals, V, D)
    return [p for p, k in zip(packets, keep) if k]


# -- re-decomposition at a coarser scale -----------------------------------

REDECOMPOSE_GRID_MAX = 1 << 21


@dataclass
class Redecomposition:
    """Packets of a scale-D decomposition of a finer-scale field near Q.

    ``masses[i]`` is ||phi_T F_theta||_2 measured on the sampling box (the
    packet mass as measured on the sampling box).  ``residual`` compares F
    with the exact pieces sum phi_T F_theta over the returned tiles on Q;
    ``coefficient_residual`` does the same for the coefficient model
    sum a_T phi_T e^{i x.c(theta)}.
    """

    packets: list
    masses: np.ndarray
    residual: float
    coefficient_residual: float = 0.0
    box: DyadicCube | None = None
    spacing: float = 0.0
    notes: list = None


def _nearest_cap_positions(cs, idx: np.ndarray) -> np.ndarray:
    """Map integer cell indices (M, n) to positions in the cap partition (nearest centre)."""
    D = cs.D
    cen = (idx + 0.5) / D
    out = np.empty(idx.shape[0], dtype=int)
    table = {c.index: i for i, c in enumerate(cs.caps)}
    miss = []
    for r, row in enumerate(map(tuple, idx)):
        j = table.get(row)
        if j is None:
            miss.append(r)
        else:
            out[r] = j
    if miss:
        d2 = ((cen[miss][:, None, :] - cs.centers[None, :, :]) ** 2).sum(axis=2)
        out[miss] = np.argmin(d2, axis=1)
    return out


def redecompose(F, Q: DyadicCube, D: int, D0: int | None = None, spacing: float = 0.125,
                dilation: float = 4.0, grid_max: int = REDECOMPOSE_GRID_MAX) -> Redecomposition:
    """Scale-D wave packets (theta, T) with T* meeting Q of a field F at scale K >= D.

    F is sampled on a periodised grid over the ``dilation``-dilate of Q, split
    into scale-D caps by a sharp discrete Fourier cutoff, and each cap piece is
    windowed by the scale-D bumps.  A packet's coefficient is the
    phi_T-weighted mean of the cap envelope F_theta e^{-i x.c(theta)}, so the
    packets reproduce F_theta wherever the bumps sum to one.
    """
    from .field import Field, evaluate  # local: field depends on this module

    from .geometry import dilate, is_dyadic

    K = F.amb.D
    n = F.amb.n
    if not is_dyadic(D) or D < 2 or D > K:
        raise GeometryError(f"re-decomposition scale must be dyadic with 2 <= D <= K={K}")
    D0 = D0 or min(2, D)
    profile = F.profile if isinstance(F, Field) else DEFAULT_BUMP
    if isinstance(F, Field) and not F.packets:
        return Redecomposition([], np.zeros(0), 0.0, notes=["zero field"])
    if isinstance(F, Field) and D == K:
        pk = [p for p in F.packets if tile_meets(p.tile, Q, D0)]
        return Redecomposition(pk, np.array([p.l2_mass(profile) for p in pk]), 0.0,
                               notes=["same-scale relabelling"])
    box = dilate(Q, dilation)
    m = int(round(box.side / spacing))
    d = n + 1
    if float(m) ** d > grid_max:
        raise GeometryError(
            f"re-decomposition needs a {m}^{d} = {m ** d} point grid, budget is {grid_max}")
    axes = [box.lo[j] + (np.arange(m) + 0.5) * spacing for j in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = evaluate(F, mesh).reshape((m,) * d)
    spec = np.fft.fftn(vals)
    freqs = [2 * np.pi * np.fft.fftfreq(m, d=spacing)] * d
    # assign each spatial-frequency column to a cap by its first n coordinates
    fgrid = np.stack(np.meshgrid(*freqs[:n], indexing="ij"), axis=-1).reshape(-1, n)
    cells = np.floor(fgrid * D).astype(int)
    cs = capset(n, D)
    cap_of = _nearest_cap_positions(cs, cells).reshape((m,) * n)
    hvol = spacing ** d
    in_q = np.all((mesh >= Q.lo - 1e-12) & (mesh < Q.hi - 1e-12), axis=1)
    packets, masses = [], []
    recon = np.zeros(mesh.shape[0], dtype=complex)
    exact = np.zeros(mesh.shape[0], dtype=complex)
    for pos in np.unique(cap_of):
        mask = (cap_of == pos)[..., None]
        piece_hat = spec * mask
        if not np.any(piece_hat):
            continue
        piece = np.fft.ifftn(piece_hat).reshape(-1)
        cap = cs.caps[pos]
        carrier = np.exp(-1j * mesh @ cs.lifted[pos])
        env = piece * carrier
        for tile in tile_lattice(cap, Q, D0):
            phi = bump(tile, profile)(mesh)
            mass = math.sqrt(float(np.sum(np.abs(phi * piece) ** 2)) * hvol)
            if mass == 0:
                continue
            a = complex(np.sum(env * phi) / np.sum(phi))
            packets.append(WavePacket(tile, a))
            masses.append(mass)
            recon += a * phi / carrier
            exact += phi * piece
    fq = vals.reshape(-1)[in_q]
    denom = float(np.linalg.norm(fq))
    if denom == 0:
        return Redecomposition(packets, np.array(masses), 0.0, 0.0, box, spacing, ["zero on Q"])
    resid = float(np.linalg.norm(fq - exact[in_q]) / denom)
    cresid = float(np.linalg.norm(fq - recon[in_q]) / denom)
    return Redecomposition(packets, np.array(masses), resid, cresid, box, spacing, [])
