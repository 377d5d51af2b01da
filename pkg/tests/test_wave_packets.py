import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from decoupling_lab.field import evaluate, synthesize
from decoupling_lab.geometry import Ambient, Cap, DyadicCube, GeometryError, capset, dyadic_cubes, origin_cube
from decoupling_lab.lab import essential_disjointness_ratio
from decoupling_lab.wave_packets import (
    DEFAULT_BUMP,
    BumpProfile,
    Tile,
    WavePacket,
    bernstein_ratio,
    bump,
    dyadic_ceil,
    gamma_cubes,
    localize,
    mu_buckets,
    partition_sum,
    redecompose,
    tile_lattice,
)


def _box_meets_cube_lp(tile, factor, cube):
    """Oracle: is {frame y : |y - k dims| <= factor dims / 2} within the closed cube? (LP feasibility)"""
    F, dims, d = tile.frame, tile.dims, len(tile.dims)
    c = np.asarray(tile.index) * dims
    half = factor * dims / 2
    A = np.vstack([F, -F])
    b = np.concatenate([np.asarray(cube.hi), -np.asarray(cube.lo)])
    res = linprog(np.zeros(d), A_ub=A, b_ub=b + 1e-9, bounds=list(zip(c - half, c + half)), method="highs")
    return res.status == 0


class TestBump:
    @pytest.mark.parametrize("n,D", [(1, 4), (2, 4), (1, 16)])
    def test_partition_of_unity(self, n, D, rng):
        cap = capset(n, D).caps[len(capset(n, D)) // 3]
        tile = Tile(cap, (0,) * (n + 1))
        y = rng.uniform(-0.5, 0.5, (100, n + 1)) * tile.dims
        pts = y @ tile.frame.T
        assert np.max(np.abs(partition_sum(cap, pts) - 1)) <= 1e-8

    def test_partition_of_unity_direct_sum(self, rng):
        # slow oracle: sum phi_T tile by tile over the whole truncation window
        cap = Cap((1,), 4)
        R = int(math.ceil(DEFAULT_BUMP.tail_radius(1e-10))) + 1
        pts = (rng.uniform(-0.5, 0.5, (10, 2)) * Tile(cap, (0, 0)).dims) @ Tile(cap, (0, 0)).frame.T
        total = np.zeros(len(pts))
        for i, j in itertools.product(range(-R, R + 1), repeat=2):
            total += bump(Tile(cap, (i, j)))(pts)
        assert np.max(np.abs(total - 1)) <= 1e-8

    def test_broken_profile_detected(self, rng):
        cap = Cap((0,), 4)
        pts = rng.uniform(-2, 2, (20, 2))
        assert np.max(np.abs(partition_sum(cap, pts, BumpProfile(scale=0.9)) - 1)) > 0.05

    def test_decay_and_nonnegative(self):
        tile = Tile(Cap((0, 1), 4), (0, 0, 0))
        phi = bump(tile)
        diam = float(np.linalg.norm(tile.dims))
        far = tile.center + 3 * diam * tile.frame[:, 0]
        assert phi(tile.center[None])[0] > phi(far[None])[0] >= 0
        assert np.all(DEFAULT_BUMP(np.linspace(-200, 200, 4001)) >= 0)

    def test_fourier_support_inside_dual_cell(self):
        # FFT of the 1D generator vanishes outside |omega| <= h cycles per tile width
        h = 1 / 16
        s = (np.arange(1 << 16) - (1 << 15)) * h
        spec = np.abs(np.fft.fftshift(np.fft.fft(DEFAULT_BUMP(s))))
        om = np.fft.fftshift(np.fft.fftfreq(s.size, d=h))
        outside = np.abs(om) > DEFAULT_BUMP.half_width
        assert spec[outside].max() < 1e-8 * spec.max()

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            BumpProfile(order=5)
        with pytest.raises(ValueError):
            BumpProfile(half_width=1.5)


class TestTileLattice:
    def test_frame_last_axis_is_normal(self):
        for cap in capset(2, 4).caps:
            t = Tile(cap, (0, 0, 0))
            assert np.allclose(t.frame[:, -1], cap.normal, atol=1e-12)
            assert np.allclose(t.frame.T @ t.frame, np.eye(3), atol=1e-12)

    @pytest.mark.parametrize("corner", [(0.0, 0.0), (-16.0, 32.0), (48.0, -16.0)])
    def test_matches_lp_oracle(self, corner):
        D, D0 = 4, 2
        cap = Cap((2,), D)
        cube = DyadicCube(corner, 16.0)
        got = {t.index for t in tile_lattice(cap, cube, D0)}
        want = {
            (i, j)
            for i in range(-40, 41)
            for j in range(-6, 7)
            if _box_meets_cube_lp(Tile(cap, (i, j)), D0, cube)
        }
        assert got == want

    def test_side_D2_count(self):
        # region side 16 for n=1, D=4: about 4 core tiles plus a ring from the D0 dilation
        tiles = tile_lattice(Cap((0,), 4), origin_cube(2, 16.0), 2)
        assert 4 <= len(tiles) <= 30

    def test_sorted(self):
        idx = [t.index for t in tile_lattice(Cap((-3, 1), 4), origin_cube(3, 16.0), 2)]
        assert idx == sorted(idx)

    def test_degenerate_region(self):
        with pytest.raises(GeometryError):
            tile_lattice(Cap((0,), 4), DyadicCube((0.0, 0.0), 0.0), 2)


class TestBuckets:
    def test_example(self):
        pk = [WavePacket(Tile(Cap((0,), 4), (i, 0)), 1.0) for i in range(3)]
        b = mu_buckets(pk, masses=[0.3, 0.5, 1.1])
        assert list(b) == [0.5, 2.0]
        assert b[0.5].packets == pk[:2] and b[2.0].packets == pk[2:]

    def test_equal_and_empty(self):
        pk = [WavePacket(Tile(Cap((0,), 4), (i, 0)), 1.0) for i in range(3)]
        assert list(mu_buckets(pk, masses=[0.25] * 3)) == [0.25]
        assert mu_buckets([]) == {}

    def test_zero_mass_dropped(self):
        pk = [WavePacket(Tile(Cap((0,), 4), (i, 0)), c) for i, c in enumerate([0.0, 1.0])]
        b = mu_buckets(pk)
        assert sum(len(v.packets) for v in b.values()) == 1

    @given(st.floats(1e-6, 1e6))
    def test_dyadic_ceil(self, x):
        mu = dyadic_ceil(x)
        assert mu / 2 < x <= mu and math.log2(mu) == int(math.log2(mu))

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=30))
    def test_membership(self, masses):
        pk = [WavePacket(Tile(Cap((0,), 4), (i, 0)), 1.0) for i in range(len(masses))]
        b = mu_buckets(pk, masses=masses)
        assert sum(len(v.packets) for v in b.values()) == len(pk)
        lookup = {id(p): m for p, m in zip(pk, masses)}
        for mu, bucket in b.items():
            assert all(mu / 2 < lookup[id(p)] <= mu for p in bucket.packets)


class TestLocalize:
    def test_all_and_none(self):
        cap = Cap((1,), 4)
        pk = [WavePacket(t, 1.0) for t in tile_lattice(cap, origin_cube(2, 16.0), 2)]
        assert localize(pk, DyadicCube((-1024.0, -1024.0), 2048.0, aligned=False), 2) == pk
        assert localize(pk, DyadicCube((4096.0, 4096.0), 16.0), 2) == []

    def test_boundary_tile_included(self):
        # a cube whose corner sits exactly on the tile's dilated boundary counts (closed sets)
        tile = Tile(Cap((0,), 4), (0, 0))  # axis-aligned-ish frame; use LP oracle for ground truth
        cube = DyadicCube((4.0, 0.0), 4.0)
        assert bool(localize([WavePacket(tile, 1.0)], cube, 2)) == _box_meets_cube_lp(tile, 2, cube)


class TestGammaCubes:
    def test_three_packets_one_cube(self):
        D = 4
        B = origin_cube(2, 16.0)
        cubes = dyadic_cubes(B, 4.0)
        cap = Cap((0,), D)
        pk = [WavePacket(t, 1.0) for t in tile_lattice(cap, cubes[0], 2)][:3]
        assert len(pk) == 3
        classes = gamma_cubes(B, pk, D, 2)
        holding = [q for g, qs in classes.items() for q in qs if q == cubes[0]]
        assert holding and cubes[0] in classes.get(4.0, [])

    def test_single_packet_class_one(self):
        D = 4
        B = origin_cube(2, 16.0)
        pk = [WavePacket(Tile(Cap((0,), D), (0, 0)), 1.0)]
        classes = gamma_cubes(B, pk, D, 2)
        assert list(classes) == [1.0]
        met = [q for q in dyadic_cubes(B, 4.0) if _box_meets_cube_lp(pk[0].tile, 2, q)]
        assert sorted(q.corner for q in classes[1.0]) == sorted(q.corner for q in met)

    def test_side_check(self):
        with pytest.raises(GeometryError):
            gamma_cubes(origin_cube(2, 8.0), [], 4, 2)


class TestBernstein:
    def test_p2_is_one(self):
        assert bernstein_ratio(WavePacket(Tile(Cap((1,), 4), (0, 0)), 1.0), 2) == 1.0

    def test_p4_range(self):
        r = bernstein_ratio(WavePacket(Tile(Cap((1,), 4), (0, 0)), 1.0), 4)
        assert 1 / 8 <= r <= 8

    def test_homogeneous(self):
        t = Tile(Cap((-1,), 4), (0, 0))
        assert bernstein_ratio(WavePacket(t, 1.0), 4) == pytest.approx(
            bernstein_ratio(WavePacket(t, 3 - 4j), 4), rel=1e-10)

    def test_zero_packet(self):
        with pytest.raises(ValueError):
            bernstein_ratio(WavePacket(Tile(Cap((0,), 4), (0, 0)), 0.0), 4)


class TestEssentialDisjointness:
    def test_p2_in_band(self):
        assert 1 / 8 <= essential_disjointness_ratio(Cap((0,), 4), 8, 2) <= 8

    @pytest.mark.parametrize("p", [4, 6])
    def test_higher_p_exceeds_band(self, p):
        # with sub-tile frequency support the bumps overlap heavily, so the ratio grows with p;
        # this is a recorded deviation, reported by the invariant suite as such
        r = essential_disjointness_ratio(Cap((0,), 4), 8, p)
        assert r > 8
        # oracle: 0 <= row sum <= 1, so int row^p <= int row = n and the ratio is at most 1 / int g^p
        assert r <= 1 / DEFAULT_BUMP.power_integral(p)


class TestRedecompose:
    def test_same_scale_identity(self):
        amb = Ambient(1, 16)
        Q = origin_cube(2, 16.0)
        F = synthesize(amb, [WavePacket(Tile(Cap((3,), 16), (0, 0)), 1.0)])
        out = redecompose(F, Q, 16)
        assert out.packets == list(F.packets) and out.residual < 1e-6

    def test_zero_field(self):
        out = redecompose(synthesize(Ambient(1, 16), []), origin_cube(2, 16.0), 4)
        assert out.packets == [] and out.residual == 0

    def test_energy_of_pieces(self, rng):
        amb = Ambient(1, 16)
        cs = capset(1, 16)
        caps = rng.choice(len(cs), 10, replace=False)
        pk = [WavePacket(Tile(cs.caps[c], (int(rng.integers(-1, 1)), 0)), complex(*rng.standard_normal(2)))
              for c in caps]
        out = redecompose(synthesize(amb, pk), origin_cube(2, 16.0), 4)
        # r = ||F - sum pieces||_Q / ||F||_Q, so ||sum pieces||^2 / ||F||^2 lies in [(1-r)^2, (1+r)^2]
        r = out.residual
        assert 0.25 <= (1 - r) ** 2 and (1 + r) ** 2 <= 4
        assert len(out.masses) == len(out.packets) and np.all(out.masses > 0)

    def test_budget_refusal(self):
        F = synthesize(Ambient(2, 16), [WavePacket(Tile(Cap((0, 0), 16), (0, 0, 0)), 1.0)])
        with pytest.raises(GeometryError, match="budget"):
            redecompose(F, origin_cube(3, 256.0), 4)
