import math

import numpy as np
import pytest

from decoupling_lab.geometry import DyadicCube, GeometryError, origin_cube
from decoupling_lab.quadrature import (
    GridSpec,
    QuadratureRule,
    ordered_map,
    set_workers,
    stderr_from_moments,
)


def integrate(rule, f):
    def red(ch):
        v = f(ch.points) * ch.weights
        return (ch.cell_sums(v),)
    (c,) = rule.map_cells(red)
    return float(rule.to_strata(c).sum())


class TestGridSpec:
    def test_auto_mode(self):
        assert GridSpec(origin_cube(2, 8.0)).resolved_mode() == "full-grid"
        assert GridSpec(origin_cube(3, 256.0)).resolved_mode() == "stratified-sample"

    def test_full_grid_spacing_cap(self):
        with pytest.raises(GeometryError):
            GridSpec(origin_cube(2, 8.0), spacing=0.25, mode="full-grid")

    def test_budget_floor(self):
        with pytest.raises(GeometryError):
            GridSpec(origin_cube(2, 8.0), mode="stratified-sample", sample_budget=999)

    def test_unknown_mode(self):
        with pytest.raises(GeometryError):
            GridSpec(origin_cube(2, 8.0), mode="magic")


class TestRule:
    def test_full_grid_volume_exact(self):
        rule = QuadratureRule(GridSpec(origin_cube(3, 16.0), spacing=0.125, full_grid_max=1 << 21))
        assert integrate(rule, lambda x: np.ones(len(x))) == pytest.approx(16.0 ** 3, rel=1e-12)

    def test_midpoint_exact_for_linear(self):
        U = DyadicCube((8.0, -16.0), 8.0)
        rule = QuadratureRule(GridSpec(U, spacing=0.125), stratum_side=4.0)
        # integral of x0 + 2 x1 over [8,16] x [-16,-8]
        exact = 64 * 12 + 2 * 64 * (-12)
        assert integrate(rule, lambda x: x[:, 0] + 2 * x[:, 1]) == pytest.approx(exact, rel=1e-12)

    def test_stratified_estimate(self):
        U = origin_cube(2, 64.0)
        rule = QuadratureRule(GridSpec(U, mode="stratified-sample", sample_budget=50_000, seed=3), 16.0)
        f = lambda x: np.cos(x[:, 0] / 10) ** 2
        exact = 64 * (32 + 5 * math.sin(12.8) / 2)  # int_0^64 cos^2(x/10) dx times 64
        assert integrate(rule, f) == pytest.approx(exact, rel=2e-2)

    def test_strata_layout(self):
        rule = QuadratureRule(GridSpec(origin_cube(2, 64.0), spacing=0.125), stratum_side=16.0)
        assert rule.n_strata == 16
        assert rule.n_cells == rule.n_strata * rule.cells_per_stratum
        # cells of stratum s are contiguous and lie inside it
        for s, st in enumerate(rule.strata):
            for c in rule.cells[s * rule.cells_per_stratum:(s + 1) * rule.cells_per_stratum]:
                assert np.all(np.asarray(c.lo) >= np.asarray(st.lo)) and np.all(np.asarray(c.hi) <= np.asarray(st.hi))

    def test_spacing_must_divide(self):
        spec = GridSpec(origin_cube(2, 8.0), spacing=0.12)
        with pytest.raises(GeometryError):
            QuadratureRule(spec)

    def test_stderr_zero_on_grid(self):
        rule = QuadratureRule(GridSpec(origin_cube(2, 8.0)))
        assert stderr_from_moments(np.ones(rule.n_cells), np.ones(rule.n_cells), rule) == 0.0

    def test_stderr_shrinks_with_budget(self):
        U = origin_cube(2, 64.0)
        f = lambda x: np.sin(x[:, 0]) ** 2 + x[:, 1] / 64

        def se(budget):
            rule = QuadratureRule(GridSpec(U, mode="stratified-sample", sample_budget=budget))
            def red(ch):
                v = f(ch.points) * ch.weights
                return ch.cell_sums(v), ch.cell_sums(v * v)
            s1, s2 = rule.map_cells(red)
            return stderr_from_moments(s1, s2, rule)
        assert se(64_000) < se(4_000)


class TestDeterminism:
    @pytest.mark.parametrize("mode", ["full-grid", "stratified-sample"])
    def test_workers_do_not_change_bits(self, mode):
        U = origin_cube(2, 64.0)
        spec = GridSpec(U, spacing=0.125, mode=mode, sample_budget=300_000, seed=5,
                        full_grid_max=1 << 30)
        f = lambda x: np.exp(-np.sum(x * x, axis=1) / 500)
        outs = []
        for w in (1, 8):
            set_workers(w)
            try:
                rule = QuadratureRule(spec, stratum_side=16.0)
                outs.append(integrate(rule, f))
            finally:
                set_workers(None)
        assert outs[0] == outs[1]

    def test_ordered_map_order(self):
        assert ordered_map(lambda x: x * x, range(50), n_workers=8) == [x * x for x in range(50)]
