"""Tests for scenario definitions, statistics, norms, and comparators."""

import numpy as np
import pytest

from sgswe.basis import build_basis, p3_exact_rule, pce_project, tensor_index_set
from sgswe.galerkin import triple_product_tensor
from sgswe.scenarios import (
    builtin_scenario,
    closure_discrepancy,
    collocation_solve,
    convergence_table,
    error_norm,
    initial_state,
    moments,
    run_scenario,
)
from sgswe.solver import Grid, StateField


class TestBuiltinScenarios:
    def test_scenario_1_setup(self):
        spec = builtin_scenario(1)
        assert spec.domain == (0.0, 2.0, 0.0, 1.0)
        assert spec.t_end == 0.07
        assert spec.dist.params == ((0.0, 0.0),)
        assert spec.index_set.size == 4
        xi = np.array([0.5])
        assert spec.w(0.3, 0.4, xi) == pytest.approx(1.0)
        assert spec.u(0.3, 0.4, xi) == pytest.approx(0.3)
        b = spec.bottom(1.0, 0.5, xi)
        assert b == pytest.approx(0.5 + 0.1 * 1.5)

    def test_scenario_2_setup(self):
        spec = builtin_scenario(2)
        assert spec.dist.params == ((1.0, 3.0),)
        assert spec.bc.top == "periodic" and spec.bc.bottom == "periodic"
        assert spec.bc.left == "extrapolate"
        xi = np.zeros(1)
        assert spec.w(0.1, 0.5, xi) == pytest.approx(1.01)
        assert spec.w(0.05, 0.5, xi) == pytest.approx(1.0)
        assert spec.w(0.3, 0.5, xi) == pytest.approx(1.0)

    def test_scenario_3_setup(self):
        spec = builtin_scenario(3)
        assert spec.dist.params == ((1.0, 3.0), (0.0, 0.0))
        assert spec.index_set.size == 16
        xi = np.array([0.2, -0.3])
        expected = 0.8 * np.exp(-5 * (1.0 - 0.9 + 0.02) ** 2
                                - 50 * (0.5 - 0.5 - 0.03) ** 2)
        assert spec.bottom(1.0, 0.5, xi) == pytest.approx(expected)

    def test_scenario_4_setup(self):
        spec = builtin_scenario(4)
        assert spec.theta == 1.0
        assert spec.dist.params == ((0.0, 0.0), (1.0, 3.0))
        xi = np.array([0.0, 0.0])
        # plateau top, ramp, and lowland
        assert spec.bottom(0.0, 0.0, xi) == pytest.approx(0.9998)
        assert spec.bottom(0.3, 0.0, xi) == pytest.approx(0.0001)
        r = 0.15 + 0.0001
        mid = 9.997 * (0.2 - r) + 0.0001
        assert spec.bottom(0.15, 0.0, xi) == pytest.approx(mid)
        assert spec.w(-0.35, 0.0, xi) == pytest.approx(1.0001)

    def test_scenario_5_setup(self):
        spec = builtin_scenario(5)
        assert spec.dist.params == ((3.0, 1.0), (0.0, 0.0))
        xi = np.array([-1.0, -1.0])
        assert spec.bottom(0.3, 0.9, xi) == pytest.approx(0.5)

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            builtin_scenario(6)

    def test_k_override(self):
        assert builtin_scenario(1, k=8).index_set.size == 8
        assert builtin_scenario(3, degrees=(1, 1)).index_set.size == 4
        with pytest.raises(ValueError):
            builtin_scenario(3, k=10)


class TestMoments:
    def test_simple(self):
        m = moments(np.array([2.0, 0.3, 0.4]))
        assert m.mean == pytest.approx(2.0)
        assert m.std == pytest.approx(0.5)

    def test_deterministic_zero_std(self):
        m = moments(np.array([[1.5, 0.0, 0.0]]))
        assert m.std[0] == 0.0

    def test_sign_flip_invariant(self):
        z = np.array([1.0, 0.2, -0.3, 0.05])
        flipped = z.copy()
        flipped[1:] *= -1
        assert moments(z).std == pytest.approx(moments(flipped).std)

    def test_projection_of_constant(self):
        basis = build_basis(builtin_scenario(1).dist, tensor_index_set([3]))
        rule = p3_exact_rule(basis)
        coeffs = pce_project(lambda p: np.full(p.shape[0], 3.3), basis, rule)
        m = moments(coeffs)
        assert m.mean == pytest.approx(3.3)
        assert abs(m.std) < 1e-13


class TestErrorNorm:
    def _state(self, grid, h, qx, qy):
        return StateField.from_interior(h, qx, qy)

    def test_zero_for_identical(self):
        grid = Grid(4, 4, 0.0, 1.0, 0.0, 1.0)
        rng = np.random.default_rng(0)
        h = rng.random((4, 4, 3))
        s = self._state(grid, h, h.copy(), h.copy())
        s2 = self._state(grid, h.copy(), h.copy(), h.copy())
        assert error_norm(s, grid, s2, grid) == 0.0

    def test_single_cell_euclidean(self):
        grid = Grid(1, 1, 0.0, 1.0, 0.0, 1.0)
        h1 = np.zeros((1, 1, 2))
        h2 = np.array([[[0.3, 0.4]]])
        a = self._state(grid, h1, np.zeros((1, 1, 2)), np.zeros((1, 1, 2)))
        b = self._state(grid, h2, np.zeros((1, 1, 2)), np.zeros((1, 1, 2)))
        assert error_norm(a, grid, b, grid) == pytest.approx(0.5)

    def test_triangle_inequality(self):
        grid = Grid(3, 5, 0.0, 1.0, 0.0, 2.0)
        rng = np.random.default_rng(1)
        states = [
            self._state(grid, *rng.standard_normal((3, 3, 5, 4)))
            for _ in range(3)
        ]
        d01 = error_norm(states[0], grid, states[1], grid)
        d12 = error_norm(states[1], grid, states[2], grid)
        d02 = error_norm(states[0], grid, states[2], grid)
        assert d02 <= d01 + d12 + 1e-12

    def test_incompatible_grids(self):
        g1 = Grid(4, 4, 0.0, 1.0, 0.0, 1.0)
        g2 = Grid(6, 6, 0.0, 1.0, 0.0, 1.0)
        z = np.zeros((4, 4, 2))
        z6 = np.zeros((6, 6, 2))
        with pytest.raises(ValueError):
            error_norm(
                self._state(g1, z, z, z), g1, self._state(g2, z6, z6, z6), g2
            )

    def test_downsampling_aggregates_averages(self):
        # aggregated fine field equal to the coarse field gives zero error
        gc = Grid(2, 2, 0.0, 1.0, 0.0, 1.0)
        gf = Grid(4, 4, 0.0, 1.0, 0.0, 1.0)
        rng = np.random.default_rng(2)
        fine = rng.random((4, 4, 1))
        coarse = fine.reshape(2, 2, 2, 2, 1).mean(axis=(1, 3))
        zc = np.zeros_like(coarse)
        zf = np.zeros_like(fine)
        err = error_norm(
            self._state(gc, coarse, zc, zc), gc,
            self._state(gf, fine, zf, zf), gf,
        )
        assert err < 1e-15


class TestInitialState:
    def test_exact_flat_surface(self):
        # constant surface minus bottom average: eta is exactly flat
        spec = builtin_scenario(1, k=4)
        from sgswe.solver import build_bottom

        grid = Grid(10, 10, *spec.domain)
        basis = build_basis(spec.dist, spec.index_set)
        rule = p3_exact_rule(basis)
        bottom = build_bottom(spec.bottom, grid, basis, rule, spec.bc)
        state = initial_state(spec, grid, basis, rule, bottom)
        h, qx, qy = state.interior()
        eta = h + bottom.center[2:-2, 2:-2]
        expect = np.zeros(4)
        expect[0] = 1.0
        assert np.abs(eta - expect).max() < 1e-13
        assert np.abs(qx - 0.3 * h).max() < 1e-13
        assert np.abs(qy).max() == 0.0

    def test_nonnegative_at_nodes(self):
        for sid in (1, 2, 4):
            spec = builtin_scenario(sid)
            grid = Grid(20, 20, *spec.domain)
            basis = build_basis(spec.dist, spec.index_set)
            rule = p3_exact_rule(basis)
            from sgswe.solver import build_bottom

            bottom = build_bottom(spec.bottom, grid, basis, rule, spec.bc)
            state = initial_state(spec, grid, basis, rule, bottom)
            h, _, _ = state.interior()
            phi = basis.evaluate(rule.nodes)
            assert (h @ phi.T).min() > 0.0, f"scenario {sid}"


class TestClosureDiscrepancy:
    def test_k1_zero(self):
        spec = builtin_scenario(1, k=1)
        res = run_scenario(spec, 10, 10, t_end=0.01)
        h, qx, qy = res.state.interior()
        assert closure_discrepancy(res.tensor, h, qx, qy) < 1e-15

    def test_equal_discharges_zero(self):
        basis = build_basis(builtin_scenario(1).dist, tensor_index_set([3]))
        tensor = triple_product_tensor(basis)
        rng = np.random.default_rng(3)
        h = np.zeros((5, 5, 4))
        h[..., 0] = 1.0
        h[..., 1] = 0.1
        q = rng.standard_normal((5, 5, 4))
        assert closure_discrepancy(tensor, h, q, q) < 1e-13

    def test_generally_nonzero(self):
        basis = build_basis(builtin_scenario(1).dist, tensor_index_set([3]))
        tensor = triple_product_tensor(basis)
        rng = np.random.default_rng(4)
        h = np.zeros((2, 2, 4))
        h[..., 0] = 1.0
        h[..., 1] = 0.2
        qx = rng.standard_normal((2, 2, 4))
        qy = rng.standard_normal((2, 2, 4))
        assert closure_discrepancy(tensor, h, qx, qy) > 1e-6


class TestCollocation:
    def test_deterministic_scenario_matches_single_run(self):
        # no xi dependence anywhere: SC mean equals one deterministic run and
        # the higher collocation moments vanish
        spec = builtin_scenario(1, k=4)
        from dataclasses import replace

        det = replace(spec, bottom=lambda x, y, xi: 0.5 * np.exp(
            -25.0 * (x - 1.0) ** 2 - 50.0 * (y - 0.5) ** 2) + 0.1)
        h, qx, qy = collocation_solve(det, 4, 12, 12, t_end=0.02)
        assert np.abs(h[..., 1:]).max() < 1e-12
        base = run_scenario(builtin_scenario(1, k=1), 12, 12, t_end=0.02)
        hb, _, _ = base.state.interior()
        # the K=1 run uses the stochastic bottom at its single (mean) node,
        # which coincides with the deterministic bottom here
        assert np.abs(h[..., 0] - hb[..., 0]).max() < 1e-12

    def test_still_water_projection_identity(self):
        # still water over a xi-linear bottom at t = 0: the collocation
        # projection of h reproduces the Galerkin coefficients exactly
        spec = builtin_scenario(2, k=4)
        from dataclasses import replace

        spec = replace(spec, w=lambda x, y, xi: np.broadcast_to(
            2.0, np.broadcast(x, y).shape))
        h_sc, qx_sc, _ = collocation_solve(spec, 8, 6, 6, t_end=0.0)
        sg = run_scenario(spec, 6, 6, t_end=0.0)
        h_sg, _, _ = sg.state.interior()
        assert np.abs(h_sc - h_sg).max() < 1e-12
        assert np.abs(qx_sc).max() < 1e-14


class TestConvergenceTable:
    def test_determinism_and_shape(self):
        spec = builtin_scenario(1, k=2)
        rows1, _ = convergence_table(spec, [8, 16], 32, t_end=0.01)
        rows2, _ = convergence_table(spec, [8, 16], 32, t_end=0.01)
        assert rows1[0]["order"] is None
        assert rows1[1]["order"] is not None
        for a, b in zip(rows1, rows2):
            assert a["error"] == b["error"]

    def test_manufactured_first_order_sequence(self):
        # order formula on a synthetic error sequence with refinement ratio 3
        import math

        errs = {9: 0.9, 27: 0.3}
        order = math.log(errs[9] / errs[27]) / math.log(27 / 9)
        assert order == pytest.approx(1.0)


class TestInitialValidation:
    def test_negative_initial_height_rejected(self):
        from dataclasses import replace

        spec = builtin_scenario(1, k=2)
        drowned = replace(spec, w=lambda x, y, xi: np.broadcast_to(
            0.1, np.broadcast(x, y).shape))
        with pytest.raises(ValueError, match="negative at a quadrature node"):
            run_scenario(drowned, 8, 8, t_end=0.001)
