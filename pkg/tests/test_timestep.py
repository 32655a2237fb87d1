import math

import numpy as np
import pytest

from oracles import bisect_friction_speed
from pswe.mesh import attach_ghosts, build_structured_mesh
from pswe.physics import ConstantInfiltration, ConstantRain, FrictionParams, HortonInfiltration, SourceModel
from pswe.scheme import assemble_rhs
from pswe.state import G, FieldState, Terrain, make_lake_state
from pswe.timestep import (Model, PositivityError, StepPolicy, TimeStepError, advance, dt_cfl, dt_positivity,
                           friction_substep_v, hyperbolic_substep, run, select_dt, source_substep_h, total_mass)


def unit_squares(nx=3, ny=3, policy="wall"):
    return attach_ghosts(build_structured_mesh("rect", nx, ny, 1.0), policy)


class TestStepPolicy:
    @pytest.mark.parametrize("kw", [dict(safety=0.0), dict(safety=1.5), dict(bound="both"),
                                    dict(dt_min=1.0, dt_max=0.5), dict(dt_min=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            StepPolicy(**kw)


class TestBounds:
    def test_positivity_bound(self):
        m = unit_squares()
        s = FieldState(np.ones(9), np.tile([2.0, 0.0], (9, 1)))
        assert dt_positivity(s, m) == 0.125

    def test_positivity_bound_at_rest(self):
        m = unit_squares()
        assert dt_positivity(FieldState.at_rest(np.ones(9)), m, dt_max=7.0) == 7.0

    def test_positivity_bound_scales_with_spacing(self):
        s = FieldState(np.ones(4), np.tile([1.0, 1.0], (4, 1)))
        a = dt_positivity(s, build_structured_mesh("rect", 2, 2, 1.0))
        b = dt_positivity(s, build_structured_mesh("rect", 2, 2, 0.5))
        assert b == a / 2

    def test_cfl_bound(self):
        m = unit_squares()
        assert dt_cfl(FieldState.at_rest(np.ones(9)), m) == pytest.approx(0.25 / math.sqrt(G), rel=1e-15)
        assert dt_cfl(FieldState.at_rest(np.ones(9)), m) == pytest.approx(0.0798, abs=5e-5)

    def test_cfl_bound_with_speed(self):
        m = unit_squares()
        s = FieldState(np.ones(9), np.tile([0.0, 2.0], (9, 1)))
        assert dt_cfl(s, m) == pytest.approx(0.25 / (2 + math.sqrt(G)), rel=1e-15)

    def test_cfl_dry_basin(self):
        assert dt_cfl(FieldState.at_rest(np.zeros(9)), unit_squares(), dt_max=3.0) == 3.0

    @pytest.mark.parametrize("bound, expected", [("positivity", 0.125), ("cfl", 0.25 / (2 + math.sqrt(G))),
                                                 ("min", 0.25 / (2 + math.sqrt(G)))])
    def test_select(self, bound, expected):
        m = unit_squares()
        s = FieldState(np.ones(9), np.tile([2.0, 0.0], (9, 1)))
        model = Model(m, Terrain.flat(9))
        assert select_dt(s, model, StepPolicy(0.9, bound)) == pytest.approx(0.9 * expected, rel=1e-15)


class TestHyperbolicSubstep:
    def test_zero_rhs_is_identity(self):
        m = unit_squares()
        t = Terrain.flat(9, theta=0.5)
        s = FieldState(np.linspace(0.5, 1.5, 9), np.full((9, 2), 0.3))
        rhs = assemble_rhs(s, m, t)
        zero = type(rhs)(rhs.L * 0, rhs.J * 0, rhs.S * 0, rhs.V * 0, rhs.friction * 0, rhs.mu)
        th, thv, clamped = hyperbolic_substep(s, zero, 0.1, m, t)
        np.testing.assert_array_equal(th, 0.5 * s.h)
        np.testing.assert_array_equal(thv, (0.5 * s.h)[:, None] * s.v)
        assert clamped == 0.0

    def test_two_cell_dam_momentum(self):
        m = attach_ghosts(build_structured_mesh("rect", 2, 1, 1.0), "wall")
        t = Terrain([1.0, 1.0], 1.0)
        s = FieldState.at_rest([9.0, 1.0])
        rhs = assemble_rhs(s, m, t, viscosity=False)
        dt = 0.01
        th, thv, _ = hyperbolic_substep(s, rhs, dt, m, t)
        S = -0.5 * (G * 2 - G * 10) * 9.0
        np.testing.assert_array_equal(th, [9.0, 1.0])
        assert thv[0, 0] == pytest.approx(dt * S, rel=1e-15)

    def test_large_step_aborts(self):
        m = unit_squares(2, 1, "copy_owner")
        t = Terrain.flat(2)
        s = FieldState(np.array([1.0, 1.0]), np.array([[5.0, 0.0], [5.0, 0.0]]))
        rhs = assemble_rhs(s, m, t, viscosity=False)
        with pytest.raises(PositivityError) as info:
            hyperbolic_substep(s, rhs, 10.0, m, t)
        assert info.value.state is s


class TestSourceSubstep:
    def test_no_sources(self):
        th = np.array([0.0, 1.0])
        out, clamped = source_substep_h(th, 1.0, np.ones(2), SourceModel(), 0.5)
        np.testing.assert_array_equal(out, th)
        assert not clamped.any()

    def test_rain_only(self):
        out, _ = source_substep_h(np.array([0.0, 1.0]), 1.0, np.ones(2), SourceModel(ConstantRain(2e-3)), 0.5)
        np.testing.assert_allclose(out, [1e-3, 1.001], rtol=1e-15)

    def test_horton_matches_bisection(self):
        inf = HortonInfiltration(3e-5, 1e-5, 1e-3)
        theta = np.array([0.3, 0.9])
        th = np.array([0.2, 0.05])
        out, _ = source_substep_h(th, 50.0, theta, SourceModel(ConstantRain(1e-5), inf), 10.0)
        expected = th + 10.0 * (1e-5 - theta * inf.capacity(50.0))
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_gated_infiltration_solved_implicitly(self):
        inf = ConstantInfiltration(1e-3, gate_depth=0.1)
        theta = np.array([0.5, 1.0, 0.25])
        th = np.array([0.01, 0.5, 1e-6])
        dt = 3.0
        out, clamped = source_substep_h(th, 1.0, theta, SourceModel(infiltration=inf), dt)
        resid = out - th + dt * theta * inf(1.0, out / theta)
        assert np.abs(resid).max() <= 1e-15
        assert np.all(out >= 0) and not clamped.any()

    def test_overdraft_is_clamped_and_logged(self):
        inf = ConstantInfiltration(1.0)
        out, clamped = source_substep_h(np.array([0.1]), 0.0, np.array([1.0]), SourceModel(infiltration=inf), 1.0)
        assert out[0] == 0.0
        assert clamped[0] == pytest.approx(0.9)


class TestFrictionSubstep:
    def test_zero_momentum(self):
        v = friction_substep_v(np.array([1.0]), np.zeros((1, 2)), np.array([0.3]), 0.1)
        np.testing.assert_array_equal(v, 0.0)

    def test_no_friction_is_division(self):
        v = friction_substep_v(np.array([2.0]), np.array([[1.0, -3.0]]), np.array([0.0]), 0.1)
        np.testing.assert_array_equal(v, [[0.5, -1.5]])

    def test_dry_cells_have_no_velocity(self):
        v = friction_substep_v(np.array([0.0]), np.array([[1.0, 1.0]]), np.array([0.3]), 0.1)
        np.testing.assert_array_equal(v, 0.0)

    def test_matches_bisection(self, rng):
        n = 20_000
        th = 10 ** rng.uniform(-6, 1, n)
        mom = rng.normal(size=(n, 2)) * 10 ** rng.uniform(-6, 1, (n, 1))
        K = rng.uniform(0, 5, n)
        dt = 10 ** rng.uniform(-4, 1, n)
        v = friction_substep_v(th, mom, K, dt)
        s = np.hypot(v[:, 0], v[:, 1])
        ref = bisect_friction_speed(th, np.hypot(mom[:, 0], mom[:, 1]), K, dt)
        np.testing.assert_allclose(s, ref, rtol=1e-12)
        # parallel to the momentum and slower than without friction
        assert np.all(np.abs(v[:, 0] * mom[:, 1] - v[:, 1] * mom[:, 0]) <= 1e-12 * s * np.hypot(*mom.T))
        assert np.all(s <= np.hypot(*mom.T) / th * (1 + 1e-15))


class TestAdvance:
    def test_lake_is_a_fixed_point(self, rng):
        m = build_structured_mesh("rect", 8, 8, 1.0)
        t = Terrain(rng.uniform(0, 1, 64), rng.uniform(0.1, 1, 64))
        m = attach_ghosts(m, 10.0)
        s = make_lake_state(m, t, G * 1.2)
        model = Model(m, t, FrictionParams(0.1, 0.01))
        new, rep = advance(s, model, StepPolicy())
        assert np.array_equal(new.h, s.h) and np.array_equal(new.v, s.v)
        assert rep.energy == pytest.approx(sum(m.area * t.theta * (0.5 * G * s.h ** 2 + G * t.z * s.h)), rel=1e-14)
        assert rep.dt == pytest.approx(0.9 * 0.25 / math.sqrt(G * s.h.max()), rel=1e-15)

    def test_dam_break_stays_nonnegative(self):
        m = unit_squares(20, 4, "copy_owner")
        t = Terrain.flat(80, theta=0.4)
        s = FieldState.at_rest(np.where(m.centroid[:, 0] < 10, 3.0, 0.0))
        model = Model(m, t)
        for _ in range(200):
            s, rep = advance(s, model, StepPolicy())
            assert s.h.min() >= 0
            assert rep.clamped_mass == 0.0

    def test_dry_velocity_guard(self):
        m = unit_squares(2, 1, "wall")
        t = Terrain.flat(2)
        s = FieldState(np.array([1.0, 0.0]), np.zeros((2, 2)))
        new, _ = advance(s, Model(m, t, h_dry=1.0), StepPolicy())
        np.testing.assert_array_equal(new.v, 0.0)

    def test_dt_min_abort_keeps_last_state(self):
        m = unit_squares(2, 1)
        s = FieldState(np.ones(2), np.array([[1e6, 0.0], [1e6, 0.0]]))
        with pytest.raises(TimeStepError) as info:
            advance(s, Model(m, Terrain.flat(2)), StepPolicy(dt_min=1e-3))
        assert info.value.state is s


class TestRun:
    def test_lands_on_output_times(self):
        m = unit_squares(6, 1, "copy_owner")
        t = Terrain.flat(6)
        s = FieldState.at_rest(np.linspace(1, 2, 6))
        seen = []
        final, reports = run(s, Model(m, t), StepPolicy(), 1.0, output_times=[0.25, 0.5, 0.75],
                             on_output=lambda st: seen.append(st.t))
        assert seen == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert final.t == 1.0
        assert sum(r.dt for r in reports) == pytest.approx(1.0, rel=1e-13)

    def test_closed_basin_conserves_mass(self):
        m = unit_squares(10, 10, "wall")
        t = Terrain(np.zeros(100), 0.7)
        s = FieldState.at_rest(np.where(m.centroid[:, 0] < 4, 2.0, 0.5))
        m0 = total_mass(s, m, t)
        final, _ = run(s, Model(m, t), StepPolicy(), 5.0)
        assert abs(total_mass(final, m, t) - m0) <= 1e-13 * m0

    def test_max_steps(self):
        m = unit_squares(3, 1, "wall")
        s = FieldState.at_rest(np.array([1.0, 2.0, 1.0]))
        _, reports = run(s, Model(m, Terrain.flat(3)), StepPolicy(), 100.0, max_steps=5)
        assert len(reports) == 5

    def test_report_row(self):
        m = unit_squares(3, 1, "wall")
        _, rep = advance(FieldState.at_rest(np.array([1.0, 2.0, 1.0])), Model(m, Terrain.flat(3)), StepPolicy())
        assert len(rep.row()) == len(rep.FIELDS)
        assert float(rep.row()[1]) == rep.dt
