import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decoupling_lab.geometry import (
    Ambient,
    DyadicCube,
    GeometryError,
    Subspace,
    build_cap_partition,
    candidate_subspaces,
    cap_cell_index,
    cap_normal,
    capset,
    caps_avoiding,
    caps_near_subspace,
    dilate,
    dist_to_subspace,
    dyadic_cubes,
    origin_cube,
)


def _cells_meeting_ball(n, D):
    """Independent enumeration: cells [i/D, (i+1)/D)^n whose closest point to 0 has norm < 1."""
    out = []
    for idx in itertools.product(range(-D - 1, D + 1), repeat=n):
        lo = np.array(idx) / D
        hi = lo + 1 / D
        closest = np.clip(0.0, lo, hi)
        if np.linalg.norm(closest) < 1:
            out.append(idx)
    return sorted(out)


class TestAmbient:
    def test_default_D0_collapses_to_two(self):
        assert Ambient(2, 16).D0 == 2

    def test_D0_formula(self):
        # D^(eps^(sqrt(L)/2)) with eps=0.5, L=4: 2^20^(0.5) = 2^10
        assert Ambient(1, 2 ** 20, eps=0.5, L=4).D0 == 2 ** 10

    @pytest.mark.parametrize("D", [1, 3, 6, 0])
    def test_invalid_scale(self, D):
        with pytest.raises(GeometryError):
            Ambient(1, D)

    def test_D0_above_D_rejected(self):
        with pytest.raises(GeometryError):
            Ambient(1, 4, D0=8)


class TestCapPartition:
    def test_n1_D4_centres(self):
        caps = build_cap_partition(1, 4)
        assert sorted(c.center[0] for c in caps) == [-7 / 8, -5 / 8, -3 / 8, -1 / 8, 1 / 8, 3 / 8, 5 / 8, 7 / 8]

    def test_n1_D2_four_caps(self):
        assert len(build_cap_partition(1, 2)) == 4

    def test_n2_D2_sixteen_caps(self):
        caps = build_cap_partition(2, 2)
        assert len(caps) == 16
        assert sorted(c.index for c in caps) == _cells_meeting_ball(2, 2)

    @pytest.mark.parametrize("n,D", [(1, 8), (2, 4), (2, 8), (3, 4)])
    def test_matches_enumeration(self, n, D):
        assert sorted(c.index for c in build_cap_partition(n, D)) == _cells_meeting_ball(n, D)

    @pytest.mark.parametrize("n,D", [(1, 2), (1, 64), (2, 2), (2, 32), (3, 2), (3, 8)])
    def test_count_bounds(self, n, D):
        assert D ** n <= len(build_cap_partition(n, D)) <= (2 * D + 2) ** n

    def test_ordering_deterministic(self):
        idx = [c.index for c in build_cap_partition(2, 4)]
        assert idx == sorted(idx)

    @pytest.mark.parametrize("D", [1, 0, -2])
    def test_invalid_scale(self, D):
        with pytest.raises(GeometryError):
            build_cap_partition(1, D)

    @given(st.lists(st.floats(-0.999, 0.999), min_size=2, max_size=2))
    def test_partition_covers(self, xi):
        xi = np.array(xi)
        if np.linalg.norm(xi) >= 1:
            return
        cs = capset(2, 8)
        idx = cap_cell_index(xi, 8)
        cap = cs.caps[cs.index_of(idx)]
        lo = np.array(cap.index) / 8
        assert np.all(lo <= xi) and np.all(xi < lo + 1 / 8)

    def test_centre_formula(self):
        for c in build_cap_partition(2, 8):
            assert np.allclose(c.center, (np.array(c.index) + 0.5) / 8)
            assert np.linalg.norm(c.center) < 1 + math.sqrt(2) / 8


class TestNormals:
    def test_examples(self):
        caps1 = {c.index: c for c in build_cap_partition(1, 2)}
        assert np.allclose(cap_normal(caps1[(1,)]), np.array([2 * 0.75, -1]) / math.sqrt(1 + 4 * 0.75 ** 2))
        from decoupling_lab.geometry import normal_of
        assert np.allclose(normal_of([0.0]), [0, -1])
        assert np.allclose(normal_of([0.5]), np.array([1, -1]) / math.sqrt(2))
        assert np.allclose(normal_of([0.5, 0.0]), np.array([1, 0, -1]) / math.sqrt(2))

    def test_unit_and_sign(self):
        cs = capset(2, 8)
        assert np.allclose(np.linalg.norm(cs.normals, axis=1), 1, atol=1e-12)
        assert np.all(cs.normals[:, -1] < 0)


class TestSubspaces:
    def test_orthonormal_basis(self, rng):
        V = Subspace(rng.standard_normal((2, 4)))
        assert np.allclose(V.basis @ V.basis.T, np.eye(2), atol=1e-10)

    def test_distance_examples(self):
        V = Subspace([[1.0, 0.0]])
        assert dist_to_subspace(np.array([1.0, 0.0]), V) == pytest.approx(0)
        assert dist_to_subspace(np.array([0.0, 1.0]), V) == pytest.approx(1)
        s = math.sqrt(2) / 2
        assert dist_to_subspace(np.array([s, s]), V) == pytest.approx(s)

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.integers(0, 1000))
    def test_sign_invariance(self, v, seed):
        v = np.array(v)
        if np.linalg.norm(v) < 1e-3:
            return
        v = v / np.linalg.norm(v)
        V = Subspace(np.random.default_rng(seed).standard_normal((1, 3)))
        assert dist_to_subspace(v, V) == pytest.approx(dist_to_subspace(-v, V), abs=1e-12)

    def test_near_vertical_line(self):
        caps = build_cap_partition(1, 4)
        V = Subspace([[0.0, 1.0]])
        near = caps_near_subspace(caps, V, 4)
        assert sorted(c.center[0] for c in near) == [-1 / 8, 1 / 8]
        # independent arithmetic: dist = |2 xi| / sqrt(1 + 4 xi^2)
        d = lambda x: 2 * x / math.sqrt(1 + 4 * x * x)
        assert d(1 / 8) == pytest.approx(0.2425, abs=1e-4) and d(3 / 8) == pytest.approx(0.6, abs=1e-12)

    def test_full_space_captures_all(self):
        caps = build_cap_partition(2, 4)
        assert len(caps_near_subspace(caps, Subspace.full(3), 4)) == len(caps)

    def test_single_normal_line(self):
        # centre 1/8: both neighbours' normals lie farther than 1/4 from its line
        caps = build_cap_partition(1, 4)
        c0 = next(c for c in caps if c.index == (0,))
        near = caps_near_subspace(caps, Subspace([cap_normal(c0)]), 4)
        assert [c.index for c in near] == [c0.index]

    def test_avoiding(self):
        caps = build_cap_partition(1, 4)
        assert caps_avoiding(caps, [], 4) == caps
        assert caps_avoiding(caps, [Subspace([cap_normal(c)]) for c in caps], 4) == []
        rest = caps_avoiding(caps, [Subspace([[0.0, 1.0]])], 4)
        assert sorted(abs(c.center[0]) for c in rest) == [3 / 8, 3 / 8, 5 / 8, 5 / 8, 7 / 8, 7 / 8]

    @given(st.integers(0, 10_000))
    def test_near_and_avoiding_partition(self, seed):
        caps = build_cap_partition(2, 4)
        V = Subspace(np.random.default_rng(seed).standard_normal((2, 3)))
        near = {c.index for c in caps_near_subspace(caps, V, 4)}
        far = {c.index for c in caps_avoiding(caps, [V], 4)}
        assert near.isdisjoint(far) and near | far == {c.index for c in caps}


class TestCubes:
    def test_counts(self):
        U = origin_cube(2, 4.0)
        assert dyadic_cubes(U, 4.0) == [U]
        assert len(dyadic_cubes(U, 2.0)) == 4
        assert len(dyadic_cubes(origin_cube(3, 16.0), 4.0)) == 64

    def test_lexicographic_order(self):
        cubes = dyadic_cubes(origin_cube(2, 4.0), 2.0)
        assert [c.corner for c in cubes] == sorted(c.corner for c in cubes)

    @pytest.mark.parametrize("side", [3.0, 8.0])
    def test_bad_side(self, side):
        with pytest.raises(GeometryError):
            dyadic_cubes(origin_cube(2, 4.0), side)

    def test_alignment_enforced(self):
        with pytest.raises(GeometryError):
            DyadicCube((1.0, 0.0), 4.0)

    def test_dilate(self):
        U = DyadicCube((4.0, 8.0), 4.0)
        assert dilate(U, 1) is U
        W = dilate(U, 2)
        assert W.side == 8 and np.allclose(W.center, U.center)
        assert dilate(origin_cube(3, 16.0), 4).side == 64
        with pytest.raises(GeometryError):
            dilate(U, 0.5)

    @given(st.floats(1, 8), st.floats(1, 8))
    def test_dilate_composes(self, a, b):
        U = DyadicCube((4.0, -4.0), 4.0)
        W = dilate(dilate(U, a), b)
        assert W.side == pytest.approx(dilate(U, a * b).side)
        assert np.allclose(W.center, U.center)


class TestCandidates:
    def test_two_normals_two_lines(self):
        normals = capset(1, 4).normals[:2]
        assert len(candidate_subspaces(normals, 1, "normals")) == 2

    def test_full_dimension(self):
        c = candidate_subspaces(capset(2, 4).normals, 3, "mixed")
        assert any(V.dim == 3 for V in c)

    def test_eight_lines(self):
        normals = capset(1, 4).normals
        assert len(candidate_subspaces(normals, 1, "normals", budget=8)) == 8

    def test_deterministic(self):
        normals = capset(2, 4).normals
        a = candidate_subspaces(normals, 2, "mixed", seed=3)
        b = candidate_subspaces(normals, 2, "mixed", seed=3)
        assert all(np.allclose(x.basis, y.basis) for x, y in zip(a, b)) and len(a) == len(b)

    def test_duplicates_removed(self):
        normals = np.vstack([capset(1, 4).normals[:1]] * 3)
        assert len(candidate_subspaces(normals, 1, "normals")) == 1

    def test_bad_dimension(self):
        with pytest.raises(GeometryError):
            candidate_subspaces(capset(1, 4).normals, 3)
