"""Reference path construction, evaluation, projection, and corridor."""

import warnings

import numpy as np
import pytest

from dockmpc import path as pm


def straight(length=10.0):
    return pm.build_path([(0.0, 0.0), (length, 0.0)], [1])


def two_leg():
    return pm.build_path(
        [[(0.0, 0.0), (10.0, 0.0)], [(10.0, 0.0), (5.0, 0.0)]], [1, -1])


def quarter_circle(radius=5.0, n=50):
    ang = np.linspace(0.0, np.pi / 2, n)
    pts = [(radius * np.sin(a), radius * (1 - np.cos(a))) for a in ang]
    return pm.build_path(pts, [1])


class TestBuildPath:
    def test_straight_line(self):
        path = straight()
        assert path.theta_end == pytest.approx(10.0, abs=1e-3)
        for th in path.seg_phi[0]:
            assert abs(th) < 1e-9

    def test_two_legs_make_cusp(self):
        path = two_leg()
        assert len(path.segments) == 2
        assert path.segments[0].theta_end == pytest.approx(10.0, abs=1e-3)
        assert path.theta_end == pytest.approx(15.0, abs=1e-3)
        assert path.segments[0].direction == 1
        assert path.segments[1].direction == -1

    def test_quarter_circle_arc_length(self):
        path = quarter_circle()
        assert path.theta_end == pytest.approx(5 * np.pi / 2, abs=1e-2)

    def test_rejects_short_leg(self):
        with pytest.raises(pm.DegeneratePath):
            pm.build_path([(0.0, 0.0), (0.1, 0.0)], [1])

    def test_rejects_repeated_waypoints(self):
        with pytest.raises(pm.DegeneratePath):
            pm.build_path([(0.0, 0.0), (0.0, 0.0), (5.0, 0.0)], [1])

    def test_sample_spacing_guarantee(self):
        path = quarter_circle()
        for th in path.seg_theta:
            assert np.diff(th).max() <= 0.25 + 1e-9

    def test_arc_length_consistency(self):
        path = quarter_circle()
        total = 0.0
        for x, y in zip(path.seg_x, path.seg_y):
            total += np.hypot(np.diff(x), np.diff(y)).sum()
        assert 0.999 * path.theta_end <= total <= 1.001 * path.theta_end

    def test_heading_unwrapped(self):
        path = two_leg()
        for phi in path.seg_phi:
            assert np.abs(np.diff(phi)).max() < np.pi

    def test_reverse_leg_keeps_vehicle_heading(self):
        # reverse travel to the west with the nose still pointing east:
        # stored heading is travel tangent + pi
        path = two_leg()
        assert path.seg_phi[1][0] == pytest.approx(0.0, abs=1e-6)


class TestEvalReference:
    def test_midpoint(self):
        path = straight()
        x, y, phi = pm.eval_reference(path, 5.0)
        assert (x, y, phi) == pytest.approx((5.0, 0.0, 0.0), abs=1e-9)

    def test_endpoint_exact(self):
        path = straight()
        x, y, phi = pm.eval_reference(path, path.theta_end)
        assert (x, y, phi) == pytest.approx((10.0, 0.0, 0.0), abs=1e-9)

    def test_extrapolation_beyond_end(self):
        path = straight()
        x, y, phi = pm.eval_reference(path, path.theta_end + 2.0)
        assert (x, y, phi) == pytest.approx((12.0, 0.0, 0.0), abs=1e-6)

    def test_extrapolation_before_start(self):
        path = straight()
        x, y, phi = pm.eval_reference(path, -1.0)
        assert (x, y, phi) == pytest.approx((-1.0, 0.0, 0.0), abs=1e-6)

    def test_continuity_at_end(self):
        path = quarter_circle()
        a = pm.eval_reference(path, path.theta_end - 1e-9)
        b = pm.eval_reference(path, path.theta_end + 1e-9)
        assert np.abs(np.subtract(a, b)).max() < 1e-6

    def test_batch_matches_scalar(self):
        path = two_leg()
        thetas = np.linspace(-2.0, path.theta_end + 2.0, 137)
        batch = pm.eval_reference_batch(path, thetas)
        for th, row in zip(thetas, batch):
            assert np.abs(np.subtract(pm.eval_reference(path, th),
                                      row)).max() < 1e-12


class TestSegmentEnd:
    def test_first_segment(self):
        assert pm.segment_end(two_leg(), 3.0) == pytest.approx(10.0, abs=1e-3)

    def test_second_segment(self):
        assert pm.segment_end(two_leg(), 12.0) == pytest.approx(15.0, abs=1e-3)

    def test_cusp_belongs_to_following_segment(self):
        path = two_leg()
        cusp = path.segments[0].theta_end
        assert pm.segment_end(path, cusp) == pytest.approx(15.0, abs=1e-3)


class TestProjectGoal:
    def test_inside_corridor(self):
        goal = pm.project_goal(straight(), (4.0, 1.0, 0.0))
        assert goal.theta_g == pytest.approx(4.0, abs=1e-3)
        assert goal.location is pm.GoalLocation.INSIDE_CORRIDOR

    def test_beyond_path_end(self):
        path = straight()
        goal = pm.project_goal(path, (12.0, -1.0, 0.0))
        assert goal.theta_g == pytest.approx(path.theta_end, abs=1e-9)
        assert goal.location is pm.GoalLocation.BEYOND_PATH_END

    def test_quarter_circle_radial_offset(self):
        # ORACLE (frozen): dense 1e-4 m brute-force projection of the
        # radially offset midpoint lands at half the arc length
        path = quarter_circle()
        mid = path.theta_end / 2
        xm, ym, phim = pm.eval_reference(path, mid)
        gx = xm - 0.5 * np.sin(phim)
        gy = ym + 0.5 * np.cos(phim)
        goal = pm.project_goal(path, (gx, gy, 0.0))
        assert goal.theta_g == pytest.approx(mid, abs=0.05)

    def test_on_path_round_trip(self):
        path = quarter_circle()
        for theta in np.linspace(0.3, path.theta_end - 0.3, 17):
            pose = pm.eval_reference(path, theta)
            goal = pm.project_goal(path, pose)
            assert goal.theta_g == pytest.approx(theta, abs=1e-3)

    def test_ambiguous_projection_warns_and_takes_larger_theta(self):
        # hairpin: the two straights are 1.0 apart; a point centered
        # between them is near-equidistant to both
        path = pm.build_path(
            [[(0.0, 0.0), (10.0, 0.0)], [(10.0, 0.0), (10.0, 1.0)],
             [(10.0, 1.0), (0.0, 1.0)]], [1, -1, 1])
        with pytest.warns(pm.AmbiguousProjectionWarning):
            goal = pm.project_goal(path, (5.0, 0.5, 0.0))
        assert goal.theta_g > 11.0

    def test_mid_path_point_is_not_beyond(self):
        # a position far from the end but past the terminal tangent line
        # must not be classified beyond the path end
        path = pm.build_path(
            [[(0.0, 0.0), (4.0, 0.0), (7.0, 0.804), (9.196, 3.0),
              (10.0, 6.0)], [(10.0, 6.0), (10.0, 1.0)]], [1, -1])
        goal = pm.project_goal(path, (5.0, 1.2, 0.0))
        assert goal.location is pm.GoalLocation.INSIDE_CORRIDOR
        assert goal.theta_g < 8.0


class TestProjectPosition:
    def test_matches_dense_oracle(self):
        # ORACLE (frozen): brute-force distance over a 1e-3 theta grid
        path = quarter_circle()
        rng = np.random.default_rng(5)
        grid = np.arange(0.0, path.theta_end, 1e-3)
        ref = pm.eval_reference_batch(path, grid)
        for _ in range(10):
            px = rng.uniform(-1, 6)
            py = rng.uniform(-1, 6)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                theta = pm.project_position(path, px, py)
            d2 = (ref[:, 0] - px) ** 2 + (ref[:, 1] - py) ** 2
            theta_oracle = grid[np.argmin(d2)]
            # the sample table is 0.1 m; refinement lands within a
            # fraction of one sample of the dense-grid minimizer
            assert theta == pytest.approx(theta_oracle, abs=0.03)


class TestCorridor:
    def test_constant(self):
        c = pm.Corridor.constant(1.5, 10.0)
        assert pm.corridor_bounds(c, 3.7) == pytest.approx((-1.5, 1.5))

    def test_linear_narrowing(self):
        c = pm.Corridor([0.0, 10.0], [-1.5, -0.5], [1.5, 0.5])
        assert pm.corridor_bounds(c, 5.0) == pytest.approx((-1.0, 1.0))

    def test_clamped_outside(self):
        c = pm.Corridor([0.0, 10.0], [-1.5, -0.5], [1.5, 0.5])
        assert pm.corridor_bounds(c, 13.0) == pytest.approx((-0.5, 0.5))

    def test_must_contain_path(self):
        with pytest.raises(ValueError):
            pm.Corridor([0.0, 10.0], [0.5, -0.5], [1.5, 0.5])
