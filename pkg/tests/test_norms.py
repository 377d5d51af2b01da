import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from decoupling_lab.field import Coefficients, ExtensionField, scale_field, synthesize
from decoupling_lab.geometry import Ambient, GeometryError, Subspace, capset, candidate_subspaces, dist_to_subspace, origin_cube
from decoupling_lab.norms import (
    NormParams,
    broad_norm,
    cap_weights,
    capture_matrix,
    decoupling_norm,
    dyadic_levels,
    exact_search,
    greedy_search,
    local_level_broad_norm,
    lp_norm,
    minmax_value,
    restricted_broad_norm,
    weak_triangle_check,
    xi,
)
from decoupling_lab.wave_packets import Tile, WavePacket, lattice_indices

GRID = NormParams(spacing=0.125, quad_mode="full-grid", full_grid_max=1 << 20)


def plane_waves(n, D, xis, vals=None):
    """Sum of exact plane waves exp(i(x.xi + t|xi|^2)) with unit weight: |F_theta| is constant."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    vals = np.ones(len(xis), dtype=complex) if vals is None else np.asarray(vals, dtype=complex)
    return ExtensionField(Ambient(n, D), Coefficients(xis, np.ones(len(xis)), vals))


def random_field(n, D, seed, per_cap=2, caps=None, side=None):
    rng = np.random.default_rng(seed)
    amb = Ambient(n, D)
    cs = capset(n, D)
    region = origin_cube(n + 1, float(side or D * D))
    chosen = range(len(cs)) if caps is None else rng.choice(len(cs), caps, replace=False)
    pk = []
    for c in chosen:
        idx = lattice_indices(cs.caps[c], region, amb.D0)
        for t in rng.choice(len(idx), min(per_cap, len(idx)), replace=False):
            pk.append(WavePacket(Tile(cs.caps[c], tuple(int(v) for v in idx[t])),
                                 complex(np.exp(2j * np.pi * rng.random()))))
    return synthesize(amb, pk)


def brute_minmax(W, cap, A):
    """Independent oracle: every A-subset of the raw candidate list, no pattern dedupe."""
    K = cap.shape[0]
    out = []
    for row in W:
        best = math.inf
        for t in itertools.combinations(range(K), min(A, K)):
            surv = ~cap[list(t)].any(axis=0) if t else np.ones(cap.shape[1], bool)
            m = row[surv].max() if surv.any() else 0.0
            best = min(best, m)
        out.append(best)
    return np.array(out)


class TestLp:
    def test_unit_modulus(self):
        F = plane_waves(1, 4, [[0.3]])
        U = origin_cube(2, 4.0)  # volume 16
        assert lp_norm(F, U, 4, GRID).value == pytest.approx(2.0, rel=1e-12)

    def test_zero_field(self):
        assert lp_norm(synthesize(Ambient(1, 4), []), origin_cube(2, 4.0), 4).value == 0

    def test_grid_halving(self):
        F = random_field(1, 4, 0)
        U = origin_cube(2, 16.0)
        a = lp_norm(F, U, 4, GRID).value
        b = lp_norm(F, U, 4, replace(GRID, spacing=0.0625)).value
        assert abs(a - b) / b < 0.01

    def test_p_below_one(self):
        with pytest.raises(GeometryError):
            lp_norm(plane_waves(1, 4, [[0.3]]), origin_cube(2, 4.0), 0.5)


class TestDecoupling:
    def test_single_cap_equals_lp(self):
        F = random_field(1, 4, 1, caps=1)
        U = origin_cube(2, 16.0)
        assert decoupling_norm(F, U, 4, params=GRID).value == pytest.approx(lp_norm(F, U, 4, GRID).value, rel=1e-12)

    def test_two_equal_caps(self):
        F = plane_waves(1, 4, [[0.1], [0.6]])
        U = origin_cube(2, 4.0)
        w = 16 ** 0.25
        assert decoupling_norm(F, U, 4, params=GRID).value == pytest.approx(2 ** 0.25 * w, rel=1e-12)

    def test_zero(self):
        assert decoupling_norm(synthesize(Ambient(2, 4), []), origin_cube(3, 16.0), 4).value == 0


class TestSearch:
    def _instance(self, seed, C=8, K=10):
        rng = np.random.default_rng(seed)
        W = rng.random((3, C)) * (rng.random((3, C)) < 0.8)
        cap = rng.random((K, C)) < 0.3
        return W, cap

    @given(st.integers(0, 100_000), st.integers(1, 2))
    def test_exact_is_brute_force(self, seed, A):
        W, cap = self._instance(seed)
        ex = exact_search(W, cap, A)
        assert np.array_equal(ex.values, brute_minmax(W, cap, A))

    @given(st.integers(0, 100_000), st.integers(1, 2))
    def test_greedy_not_below_exact(self, seed, A):
        W, cap = self._instance(seed)
        assert np.all(greedy_search(W, cap, A).values >= exact_search(W, cap, A).values)

    def test_exact_limit(self):
        W = np.ones((1, 40))
        cap = np.eye(40, dtype=bool)
        with pytest.raises(GeometryError, match="tuples"):
            exact_search(W, cap, 5, limit=1000)

    def test_tie_break_is_lexicographic(self):
        W = np.array([[1.0, 1.0]])
        cap = np.array([[True, False], [False, True]])
        s = exact_search(W, cap, 1)
        assert s.tuples == [(0,)] and s.attaining[0] == 1

    def test_empty_max_is_zero(self):
        W = np.array([[3.0, 2.0]])
        cap = np.array([[True, True]])
        assert exact_search(W, cap, 1).values[0] == 0 and exact_search(W, cap, 1).attaining[0] == -1


class TestBroad:
    def test_single_cap_zero(self):
        F = random_field(1, 4, 2, caps=1)
        res = broad_norm(F, origin_cube(2, 16.0), replace(GRID, k=2, A=1, candidate_strategy="normals"))
        assert res.value == 0

    def test_far_pair_oracle(self):
        # caps at +-7/8: their normals make a ~59.5 degree angle, so no line captures both
        F = plane_waves(1, 4, [[-7 / 8], [7 / 8]])
        e = capset(1, 4).normals
        cos = abs(e[0] @ e[-1])
        assert math.degrees(math.acos(cos)) == pytest.approx(59.5, abs=0.1)
        params = replace(GRID, k=2, A=1)
        res = broad_norm(F, origin_cube(2, 16.0), params)
        cands = candidate_subspaces(capset(1, 4).normals[F.cap_positions], 1, params.candidate_strategy,
                                    params.seed, params.candidate_budget, params.candidate_samples)
        cap = capture_matrix(capset(1, 4).normals[F.cap_positions], cands, 4)
        assert not np.any(cap.all(axis=1))
        # every |F_theta| = 1, so each cap weight is the cube area 256 and the value is 256^(1/4)
        assert res.value == pytest.approx(256 ** 0.25, rel=1e-12)
        assert res.per_cube[0].weight == pytest.approx(256, rel=1e-12)

    def test_A_at_least_caps(self):
        F = random_field(1, 4, 3, caps=3)
        res = broad_norm(F, origin_cube(2, 16.0), replace(GRID, k=2, A=3, candidate_strategy="normals"))
        assert res.value == 0

    @given(st.integers(0, 1000))
    def test_broad_below_decoupling_and_monotone(self, seed):
        F = random_field(1, 4, seed, caps=5)
        U = origin_cube(2, 32.0)
        dec = decoupling_norm(F, U, 4, params=GRID, stratum_side=16.0).value
        vals = [broad_norm(F, U, replace(GRID, k=2, A=A)).value for A in (1, 2, 4)]
        assert vals[0] <= dec * (1 + 1e-9)
        assert vals[0] >= vals[1] >= vals[2]

    def test_more_candidates_never_increase(self):
        F = random_field(1, 4, 7, caps=6)
        U = origin_cube(2, 16.0)
        params = replace(GRID, k=2, A=1)
        normals = capset(1, 4).normals[F.cap_positions]
        few = candidate_subspaces(normals, 1, "normals")[:2]
        many = candidate_subspaces(normals, 1, "mixed")
        assert broad_norm(F, U, params, many + few).value <= broad_norm(F, U, params, few).value

    def test_homogeneity_and_tuples(self):
        F = random_field(2, 4, 4)
        U = origin_cube(3, 16.0)
        params = NormParams(k=2, A=2, spacing=0.125, quad_mode="stratified-sample", sample_budget=20_000)
        a = broad_norm(F, U, params)
        b = broad_norm(scale_field(F, 3.0), U, params)
        assert b.value == pytest.approx(3 * a.value, rel=1e-10)
        for ra, rb in zip(a.per_cube, b.per_cube):
            assert [V.basis.tolist() for V in ra.tuple] == [V.basis.tolist() for V in rb.tuple]

    def test_certificate_structure(self):
        F = random_field(1, 4, 5, caps=4)
        res = broad_norm(F, origin_cube(2, 32.0), replace(GRID, k=2, A=1))
        assert res.value ** 4 == pytest.approx(sum(r.weight for r in res.per_cube), rel=1e-12)
        e = {c.index: c.normal for c in capset(1, 4).caps}
        for r in res.per_cube:
            if r.attaining is not None:
                assert all(dist_to_subspace(e[r.attaining], V) > 1 / 4 for V in r.tuple)
        assert "per_cube" in res.to_json()

    def test_k_too_large(self):
        with pytest.raises(GeometryError):
            broad_norm(random_field(1, 4, 0, caps=1), origin_cube(2, 16.0), replace(GRID, k=3))


class TestRestricted:
    def test_empty_theta_DV(self):
        # every normal has |last coordinate| > 1/4, so the horizontal plane captures no cap
        F = random_field(2, 4, 0, caps=3)
        V = Subspace(np.eye(3)[:2])
        assert np.all(np.abs(capset(2, 4).normals[:, -1]) > 0.25)
        res = restricted_broad_norm(F, V, origin_cube(3, 16.0), NormParams(k=2, sample_budget=10_000))
        assert res.value == 0

    def test_one_coarse_cap(self):
        # two fine caps sharing a coarse parent: restricted broad part vanishes with A=1
        cs = capset(2, 4)
        parent = capset(2, 2).parent_of(cs)
        same = [i for i in range(len(cs)) if parent[i] == parent[0]][:2]
        pk = [WavePacket(Tile(cs.caps[i], (0, 0, 0)), 1.0) for i in same]
        F = synthesize(Ambient(2, 4, D0=2), pk)
        V = Subspace(cs.normals[same])
        res = restricted_broad_norm(F, V, origin_cube(3, 16.0), NormParams(k=2, A=1, candidate_strategy="normals",
                                                                          sample_budget=20_000))
        assert res.value == 0

    def test_dim_and_side_checks(self):
        F = random_field(2, 4, 0, caps=2)
        with pytest.raises(GeometryError):
            restricted_broad_norm(F, Subspace([[1.0, 0, 0]]), origin_cube(3, 16.0), NormParams(k=2))
        with pytest.raises(GeometryError):
            restricted_broad_norm(F, Subspace(np.eye(3)[:2]), origin_cube(3, 8.0), NormParams(k=2))

    def test_below_decoupling(self):
        F = random_field(2, 4, 9)
        cs = capset(2, 4)
        V = Subspace(cs.normals[F.cap_positions[:2]])
        B = origin_cube(3, 16.0)
        params = NormParams(k=2, A=1, sample_budget=30_000)
        from decoupling_lab.field import restrict_to_subspace_caps
        lhs = restricted_broad_norm(F, V, B, params).value
        rhs = decoupling_norm(restrict_to_subspace_caps(F, V), B, 4, 2, params, stratum_side=4.0).value
        assert lhs <= rhs * (1 + 1e-9)


class TestLevels:
    def test_above_sup_is_zero(self):
        F = random_field(1, 4, 0, caps=3)
        U = origin_cube(2, 16.0)
        assert local_level_broad_norm(F, U, replace(GRID, k=2), 2.0 ** 20).value == 0

    def test_zero_field(self):
        assert local_level_broad_norm(synthesize(Ambient(1, 4), []), origin_cube(2, 16.0),
                                      replace(GRID, k=2), 1.0).value == 0

    def test_non_dyadic_lambda(self):
        with pytest.raises(GeometryError):
            local_level_broad_norm(random_field(1, 4, 0, caps=2), origin_cube(2, 16.0), GRID, 0.3)

    def test_level_weights_partition(self):
        # the level sets split every cap weight: sum over dyadic lambda reproduces it
        F = random_field(1, 4, 6, caps=5)
        U = origin_cube(2, 16.0)
        full = cap_weights(F, U, 4, 2, GRID)
        top = float(np.max([np.abs(F.cap_values(np.zeros((1, 2)))).max(), 1.0])) * 8
        lv = dyadic_levels(top, 60)
        parts = cap_weights(F, U, 4, 2, GRID, levels=lv)
        total = sum(cw.W for cw in parts)
        assert np.allclose(total, full.W, rtol=1e-6, atol=1e-12 * full.W.max())


class TestXi:
    def test_single_cap(self):
        F = random_field(2, 4, 0, caps=1)
        assert xi(F, 2, 4, 1, origin_cube(3, 16.0), NormParams(sample_budget=10_000)).value == 0

    def test_zero(self):
        assert xi(synthesize(Ambient(2, 4), []), 2, 4, 1, origin_cube(3, 16.0), NormParams()).value == 0

    def test_monotone_in_M(self):
        F = random_field(2, 4, 3, caps=8)
        U = origin_cube(3, 16.0)
        params = NormParams(sample_budget=5_000, candidate_budget=64)
        vals = [xi(F, 2, 4, M, U, params).value for M in (1, 2, 4)]
        assert vals[0] >= vals[1] >= vals[2]


class TestWeakTriangle:
    def test_zero_second(self, rng):
        w = rng.random(6)
        cap = rng.random((6, 6)) < 0.3
        ok, slack = weak_triangle_check(w, np.zeros(6), 2, 2, cap)
        assert ok and slack == pytest.approx(0, abs=1e-15)

    @given(st.integers(0, 100_000))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        cap = rng.random((8, 6)) < 0.35
        ok, slack = weak_triangle_check(rng.random(6), rng.random(6), 2, 1, cap)
        assert ok and slack >= -1e-12

    def test_equal_weights(self, rng):
        w = rng.random(6)
        cap = rng.random((8, 6)) < 0.35
        lhs = minmax_value(2 * w, cap, 2)
        assert lhs <= 2 * minmax_value(w, cap, 1)

    def test_bad_split(self):
        with pytest.raises(GeometryError):
            weak_triangle_check([1.0], [1.0], 1, 2, np.ones((1, 1), bool))
