import math

import numpy as np
import pytest

from oracles import reference_rhs
from pswe.mesh import attach_ghosts, build_structured_mesh
from pswe.physics import FrictionParams
from pswe.scheme import assemble_rhs, ghost_interface, interface_values, viscosity_coefficients
from pswe.state import G, FieldState, Terrain, make_lake_state, make_uniform_flow_problem


def two_cells(h, v, z=(0.0, 0.0), theta=(1.0, 1.0), policy="copy_owner"):
    m = attach_ghosts(build_structured_mesh("rect", 2, 1, 1.0), policy)
    return m, FieldState(np.asarray(h, float), np.asarray(v, float)), Terrain(np.asarray(z, float), theta)


def inner_edge(m):
    return int(m.interior_edges[0])


class TestInterfaceValues:
    def test_centred_velocity_and_upwinding(self):
        m, s, t = two_cells([2.0, 1.0], [[1.0, 0.0], [3.0, 0.0]], theta=(0.5, 0.8))
        iv = interface_values(inner_edge(m), m, s, t)
        np.testing.assert_array_equal(iv.v, [2.0, 0.0])
        assert iv.vn == 2.0
        assert iv.th_up == 1.0
        assert iv.th_s == iv.th_up

    def test_opposite_velocities_pick_the_higher_surface(self):
        m, s, t = two_cells([5 / G, 3 / G], [[1.0, 0.0], [-1.0, 0.0]])
        iv = interface_values(inner_edge(m), m, s, t)
        assert iv.vn == 0.0
        assert iv.th_up == 0.0
        assert iv.th_s == 5 / G

    def test_equal_surfaces_take_the_right_cell(self):
        m, s, t = two_cells([1.0, 0.5], [[0.0, 0.0]] * 2, z=(0.0, 0.5), theta=(1.0, 0.5))
        iv = interface_values(inner_edge(m), m, s, t)
        assert iv.th_s == 0.25

    def test_negative_normal_velocity_upwinds_right(self):
        m, s, t = two_cells([2.0, 1.0], [[-1.0, 0.0], [-1.0, 0.0]])
        assert interface_values(inner_edge(m), m, s, t).th_up == 1.0

    def test_centred_free_surface(self):
        m, s, t = two_cells([1.0, 2.0], [[0.0, 0.0]] * 2, z=(1.0, 0.0))
        assert interface_values(inner_edge(m), m, s, t).w == pytest.approx(G * 2.0)


class TestGhostInterface:
    def setup_method(self):
        self.m = attach_ghosts(build_structured_mesh("rect", 1, 1, 1.0), "copy_owner")
        self.t = Terrain([0.0], 0.5)
        sides = np.array(self.m.edge_side)
        self.east = int(np.flatnonzero(sides == "east")[0])

    def test_outflow_carries_owner_depth(self):
        s = FieldState(np.array([2.0]), np.array([[1.0, 0.0]]))
        iv = ghost_interface(self.east, self.m, s, self.t)
        assert iv.vn == 1.0 and iv.th_up == 1.0

    def test_inflow_carries_nothing(self):
        s = FieldState(np.array([2.0]), np.array([[-1.0, 0.0]]))
        iv = ghost_interface(self.east, self.m, s, self.t)
        assert iv.vn == -1.0 and iv.th_up == 0.0
        # only the west side (outflow, theta*h = 1) moves water; nothing enters from the east
        assert assemble_rhs(s, self.m, self.t, viscosity=False).L[0] == -1.0

    def test_at_rest_no_mass_flux(self):
        s = FieldState.at_rest([2.0])
        iv = ghost_interface(self.east, self.m, s, self.t)
        assert iv.vn == 0.0
        assert assemble_rhs(s, self.m, self.t).L[0] == 0.0

    def test_interior_edge_rejected(self):
        m, s, t = two_cells([1.0, 1.0], [[0.0, 0.0]] * 2)
        with pytest.raises(ValueError):
            ghost_interface(inner_edge(m), m, s, t)


class TestAssemble:
    def test_two_cell_dam(self):
        m, s, t = two_cells([9.0, 1.0], [[0.0, 0.0]] * 2, z=(1.0, 1.0), policy="wall")
        rhs = assemble_rhs(s, m, t, viscosity=False)
        np.testing.assert_array_equal(rhs.L, 0.0)
        wl, wr = G * 10.0, G * 2.0
        expected = -0.5 * 1.0 * (wr - wl) * 9.0
        assert rhs.S[0, 0] == pytest.approx(expected, rel=1e-15)
        assert rhs.S[1, 0] == pytest.approx(expected, rel=1e-15)
        assert rhs.S[0, 1] == 0.0

    @pytest.mark.parametrize("viscosity", ["off", "upwind", "bounded"])
    @pytest.mark.parametrize("policy", ["copy_owner", "wall", 0.3])
    def test_matches_edge_loop_oracle(self, kind, viscosity, policy, rng):
        m = attach_ghosts(build_structured_mesh(kind, 6, 5, 0.8), policy)
        n = m.n_cells
        z = rng.uniform(0, 0.5, n)
        theta = rng.uniform(0.1, 1.0, n)
        h = np.where(rng.random(n) < 0.3, 0.0, rng.uniform(0, 2, n))
        v = rng.normal(size=(n, 2))
        v[h == 0] = 0
        rhs = assemble_rhs(FieldState(h, v), m, Terrain(z, theta), viscosity=viscosity)
        L, J, S, V = reference_rhs(h, v, z, theta, m, viscosity)
        scale = np.abs(S).max()
        np.testing.assert_allclose(rhs.L, L, atol=1e-13 * np.abs(L).max())
        np.testing.assert_allclose(rhs.J, J, atol=1e-13 * scale)
        np.testing.assert_allclose(rhs.S, S, atol=1e-13 * scale)
        np.testing.assert_allclose(rhs.V, V, atol=1e-13 * max(np.abs(V).max(), 1.0))

    def test_friction_reported_separately(self):
        m, s, t = two_cells([1.0, 1.0], [[2.0, 0.0], [0.0, 1.0]], theta=(0.5, 0.5))
        p = FrictionParams(0.1, 0.02)
        rhs = assemble_rhs(s, m, t, p, viscosity=False)
        K = 0.1 * 1.0 * 0.5 + 0.5 * 0.02
        np.testing.assert_allclose(rhs.friction, [[-K * 4, 0.0], [0.0, -K]], rtol=1e-15)
        np.testing.assert_array_equal(rhs.momentum, rhs.J + rhs.V + rhs.S)

    def test_needs_ghosts(self):
        m = build_structured_mesh("rect", 2, 1, 1.0)
        with pytest.raises(ValueError):
            assemble_rhs(FieldState.at_rest([1.0, 1.0]), m, Terrain.flat(2))

    def test_unknown_viscosity_mode(self):
        m, s, t = two_cells([1.0, 1.0], [[0.0, 0.0]] * 2)
        with pytest.raises(ValueError):
            assemble_rhs(s, m, t, viscosity="sticky")


class TestWellBalance:
    @pytest.mark.parametrize("viscosity", [False, "upwind", "bounded"])
    def test_regular_lake_is_exactly_stationary(self, kind, viscosity, rng):
        m = build_structured_mesh(kind, 12, 10, 1.0)
        t = Terrain(rng.uniform(0, 1, m.n_cells), rng.uniform(0.05, 1, m.n_cells))
        m = attach_ghosts(m, 20.0)
        s = make_lake_state(m, t, G * 1.5)
        rhs = assemble_rhs(s, m, t, FrictionParams(0.1, 0.02), viscosity)
        for part in (rhs.L, rhs.J, rhs.S, rhs.V, rhs.friction):
            assert np.all(part == 0.0)

    def test_singular_lake_is_exactly_stationary(self, kind, rng):
        m = build_structured_mesh(kind, 12, 10, 1.0)
        t = Terrain(rng.uniform(0, 2, m.n_cells), 0.6)
        m = attach_ghosts(m, 5.0)
        s = make_lake_state(m, t, G * 1.0)
        assert 0 < np.mean(s.h > 0) < 1
        rhs = assemble_rhs(s, m, t)
        assert np.all(rhs.L == 0.0) and np.all(rhs.S == 0.0) and np.all(rhs.J == 0.0)

    def test_uniform_flow_balances_friction(self):
        p = make_uniform_flow_problem(16, 8, margin=4)
        rhs = assemble_rhs(p.state, p.mesh, p.terrain, p.params, True)
        total = rhs.J + rhs.V + rhs.S + rhs.friction
        inner = p.window
        scale = np.abs(rhs.friction[inner]).max()
        assert np.abs(total[inner]).max() <= 1e-10 * scale
        assert np.abs(rhs.L[inner]).max() <= 1e-10 * scale


class TestViscosity:
    def test_dry_pair(self):
        m, s, t = two_cells([0.0, 0.0], [[0.0, 0.0]] * 2)
        assert np.all(viscosity_coefficients(s, m, t) == 0.0)

    def test_wave_speed_of_wet_dry_pair(self):
        m, s, t = two_cells([1.0, 0.0], [[0.0, 0.0]] * 2)
        mu = viscosity_coefficients(s, m, t, mode="upwind")[inner_edge(m)]
        assert mu == pytest.approx(1.0 * math.sqrt(G), rel=1e-15)
        # the bounded form never exceeds the shallower side's theta*h
        assert viscosity_coefficients(s, m, t, mode="bounded")[inner_edge(m)] == 0.0

    def test_identical_cells(self):
        m, s, t = two_cells([1.0, 1.0], [[2.0, 0.0], [2.0, 0.0]])
        mu = viscosity_coefficients(s, m, t)[inner_edge(m)]
        assert mu == pytest.approx(2 + math.sqrt(G), rel=1e-15)

    def test_nonnegative(self, rng):
        m = attach_ghosts(build_structured_mesh("hex", 6, 6, 1.0))
        n = m.n_cells
        s = FieldState(rng.uniform(0, 2, n), rng.normal(size=(n, 2)))
        t = Terrain(np.zeros(n), rng.uniform(0.1, 1, n))
        for mode in ("upwind", "bounded"):
            assert np.all(viscosity_coefficients(s, m, t, mode=mode) >= 0)
