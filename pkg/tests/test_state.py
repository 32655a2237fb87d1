import math

import numpy as np
import pytest

from pswe.mesh import build_structured_mesh
from pswe.physics import FrictionParams
from pswe.state import (G, FieldState, Terrain, even_level, free_surface, lake_depth, make_lake_state, make_uniform_flow_problem,
                        make_uniform_flow_state, to_conservative, to_primitive, uniform_flow_velocity)


class TestTerrain:
    @pytest.mark.parametrize("theta", [0.0, -0.1, 1.01])
    def test_porosity_range(self, theta):
        with pytest.raises(ValueError):
            Terrain(np.zeros(3), theta)

    def test_bed_must_be_finite(self):
        with pytest.raises(ValueError):
            Terrain(np.array([0.0, np.nan]), 1.0)

    def test_plane(self):
        m = build_structured_mesh("rect", 2, 2, 1.0)
        t = Terrain.plane(m, (0.1, -0.2), z0=1.0, theta=0.5)
        np.testing.assert_allclose(t.z, 1.0 + 0.1 * m.centroid[:, 0] - 0.2 * m.centroid[:, 1])
        assert np.all(t.theta == 0.5)


class TestFreeSurface:
    @pytest.mark.parametrize("z, h, w", [(0.0, 0.0, 0.0), (1.0, 9.0, 98.1), (2.0, 0.0, 19.62)])
    def test_values(self, z, h, w):
        out = free_surface(FieldState.at_rest([h]), Terrain([z], 1.0))
        assert math.isclose(out[0], w, rel_tol=1e-15)


class TestLake:
    def test_flat_regular_lake(self):
        m = build_structured_mesh("rect", 3, 3, 1.0)
        s = make_lake_state(m, Terrain.flat(9), 9.81)
        np.testing.assert_array_equal(s.h, 1.0)
        np.testing.assert_array_equal(s.v, 0.0)

    def test_singular_lake(self):
        m = build_structured_mesh("rect", 2, 1, 1.0)
        s = make_lake_state(m, Terrain([0.0, 2.0], 1.0), 9.81)
        np.testing.assert_array_equal(s.h, [1.0, 0.0])

    def test_empty_basin(self):
        m = build_structured_mesh("rect", 3, 1, 1.0)
        s = make_lake_state(m, Terrain([1.0, 2.0, 3.0], 1.0), 0.5 * G)
        np.testing.assert_array_equal(s.h, 0.0)

    def test_surface_is_level_to_the_bit(self, rng):
        z = rng.uniform(0, 1, 10_000)
        h = lake_depth(z, 1.5)
        assert np.all(z + h == 1.5)
        assert np.all(h > 0)

    def test_odd_level_is_moved_to_a_reachable_neighbour(self, rng):
        # 1.2 has an odd last mantissa bit: depths >= 1 could never reach it exactly
        z = rng.uniform(0, 0.2, 5_000)
        h = lake_depth(z, 1.2)
        target = even_level(1.2)
        assert target == np.nextafter(1.2, 0)
        assert np.all(z + h == target)


class TestConservative:
    def test_round_trip_on_wet_cells(self, rng):
        n = 500
        t = Terrain(np.zeros(n), rng.uniform(0.05, 1, n))
        s = FieldState(rng.uniform(0.1, 3, n), rng.normal(size=(n, 2)))
        back = to_primitive(to_conservative(s, t), t)
        np.testing.assert_allclose(back.h, s.h, rtol=2e-16)
        np.testing.assert_allclose(back.v, s.v, rtol=4e-16)

    def test_dry_cells_map_to_zero(self):
        t = Terrain(np.zeros(2), 0.5)
        view = to_conservative(FieldState(np.array([0.0, 1e-12]), np.ones((2, 2))), t)
        back = to_primitive(view, t)
        np.testing.assert_array_equal(back.v, 0.0)
        np.testing.assert_array_equal(view.th[0], 0.0)


class TestUniformFlow:
    def test_closed_form_speed(self):
        v = uniform_flow_velocity((0.01, 0.0), 1.0, 1.0, FrictionParams(alpha_p=0.3, alpha_s=0.01))
        # water runs downhill: against the gradient of z
        np.testing.assert_allclose(v, [-0.01 * math.sqrt(9.81 / (0.01 * 0.01)), 0.0], rtol=1e-15)

    def test_direction_follows_slope_axis(self):
        v = uniform_flow_velocity((0.0, 0.02), 1.0, 1.0, FrictionParams(alpha_s=0.01))
        assert v[0] == 0.0 and v[1] < 0

    def test_speed_scales_with_root_of_theta_h(self):
        p = FrictionParams(alpha_p=0.0, alpha_s=0.05)
        a = uniform_flow_velocity((0.01, 0.0), 1.0, 1.0, p)
        b = uniform_flow_velocity((0.01, 0.0), 1.0, 2.0, p)
        assert math.isclose(b[0] / a[0], math.sqrt(2), rel_tol=1e-14)

    def test_frozen_value(self):
        v = uniform_flow_velocity((0.01, 0.0), 0.7, 0.5, FrictionParams(0.1, 0.02))
        assert math.isclose(v[0], -1.0881017954407481, rel_tol=1e-14)

    @pytest.mark.parametrize("slope, h", [((0.0, 0.0), 1.0), ((0.01, 0.0), 0.0)])
    def test_degenerate_inputs(self, slope, h):
        with pytest.raises(ValueError):
            uniform_flow_velocity(slope, 1.0, h, FrictionParams(alpha_s=0.01))

    def test_no_friction(self):
        with pytest.raises(ValueError):
            uniform_flow_velocity((0.01, 0.0), 1.0, 1.0, FrictionParams())

    def test_constant_state(self):
        m = build_structured_mesh("hex", 3, 3, 1.0)
        s = make_uniform_flow_state(m, (0.01, 0.01), 0.5, 0.3, FrictionParams(0.1, 0.02))
        assert np.all(s.h == 0.3)
        assert np.all(s.v == s.v[0])

    def test_problem_window_is_downstream_block(self):
        p = make_uniform_flow_problem(8, 4, margin=5)
        assert p.mesh.n_cells == 13 * 4
        assert p.window.size == 32
        assert p.mesh.centroid[p.window, 0].max() < 8
