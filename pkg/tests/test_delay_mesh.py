"""
tests/test_delay_mesh.py
Delays, primary discontinuity points, meshes and interval lookup.
"""

import numpy as np
import pytest

from tools.delay_mesh import (
    HISTORY,
    DelaySpec,
    Mesh,
    build_mesh,
    compute_discontinuities,
    disc_table,
    locate,
)
from tools.errors import (
    DelayBoundViolation,
    EmptySegment,
    NonmonotoneDeviatedArgument,
    OutOfDomain,
    StepExceedsTauZero,
)
from tools.problem_defs import example_1, example_4


class TestDiscontinuities:

    def test_half_delay(self):
        problem = example_1(8)
        disc = compute_discontinuities(problem.delay, problem.T)
        assert len(disc.xi) == 1
        assert abs(disc.xi[0] - 1.0) <= np.spacing(1.0)
        assert disc.boundaries == (0.0, disc.xi[0], 3.0)
        assert disc.history_start == -0.5

    def test_quadratic_deviated_argument(self):
        problem = example_4(8)
        disc = compute_discontinuities(problem.delay, problem.T)
        assert len(disc.xi) == 1
        assert abs(disc.xi[0] - 1.0) <= 4 * np.spacing(1.0)

    def test_longer_horizon_gets_second_point(self):
        problem = example_4(8)
        disc = compute_discontinuities(problem.delay, 1.5, validate=False)
        np.testing.assert_allclose(disc.xi, [1.0, np.sqrt(2.0)], atol=1e-12)

    def test_constant_delay(self, constant_delay):
        disc = compute_discontinuities(constant_delay, 1.0)
        np.testing.assert_allclose(disc.xi, [0.3, 0.6, 0.9], atol=1e-12)

    def test_recursion_holds(self, constant_delay):
        disc = compute_discontinuities(constant_delay, 2.0)
        previous = 0.0
        for xi in disc.xi:
            assert abs(constant_delay.deviated(xi) - previous) <= 1e-12
            previous = xi

    def test_delay_below_bound(self):
        delay = DelaySpec(tau=lambda t: 0.5 - 0.1 * t, tau0=0.5, label="shrinking")
        with pytest.raises(DelayBoundViolation):
            compute_discontinuities(delay, 1.0)

    def test_vanishing_delay_rejected(self):
        with pytest.raises(DelayBoundViolation):
            DelaySpec(tau=lambda t: t, tau0=0.0)

    def test_nonmonotone_deviated_argument(self):
        delay = DelaySpec(tau=lambda t: 0.5 + 2.0 * t, tau0=0.5, label="fast")
        with pytest.raises(NonmonotoneDeviatedArgument):
            compute_discontinuities(delay, 1.0)

    def test_history_start_defaults_to_deviated_zero(self):
        delay = DelaySpec(tau=lambda t: 0.25 + t * 0.0, tau0=0.25)
        assert delay.history_start == pytest.approx(-0.25)

    def test_deviated_on_arrays(self, constant_delay):
        ts = np.array([0.0, 0.5, 1.0])
        np.testing.assert_allclose(constant_delay.deviated(ts), [-0.3, 0.2, 0.7])

    def test_disc_table(self):
        problem = example_1(8)
        table = disc_table(compute_discontinuities(problem.delay, problem.T))
        assert list(table.columns) == ["mu", "xi", "segment_start", "segment_end"]
        assert len(table) == 1
        row = table.iloc[0]
        assert row["mu"] == 1
        assert row["segment_start"] == 0.0
        assert row["xi"] == pytest.approx(1.0)


class TestBuildMesh:

    def test_constrained_uniform(self, unit_disc):
        mesh = build_mesh(unit_disc, 0.4)
        expected = [0.0, 0.4, 0.8, 1.0, 1.2, 1.6, 2.0, 2.4, 2.8, 3.0]
        np.testing.assert_allclose(mesh.nodes, expected, atol=1e-14)
        assert mesh.N == 9
        assert list(mesh.seg) == [1, 1, 1, 2, 2, 2, 2, 2, 2]
        assert mesh.segment_node_range(1) == (0, 3)
        assert mesh.segment_node_range(2) == (3, 9)
        stats = mesh.ratio_stats
        assert stats["max_shrink_ratio"] == pytest.approx(2.0)
        assert stats["max_grow_ratio"] == pytest.approx(2.0)
        assert stats["h_max"] == pytest.approx(0.4)
        assert stats["h_min"] == pytest.approx(0.2)

    def test_contains_discontinuities_exactly(self, unit_disc):
        mesh = build_mesh(unit_disc, 0.3)
        assert 1.0 in mesh.nodes.tolist()
        assert mesh.nodes[-1] == 3.0

    def test_merge_onto_grid_point(self, unit_disc):
        mesh = build_mesh(unit_disc, 0.25)
        assert len(mesh.nodes) == 13
        assert mesh.ratio_stats["max_shrink_ratio"] == pytest.approx(1.0)

    def test_per_segment_uniform(self, unit_disc):
        mesh = build_mesh(unit_disc, 0.3, policy="per_segment_uniform")
        assert mesh.N == 11
        lo, hi = mesh.segment_node_range(1)
        assert hi - lo == 4
        np.testing.assert_allclose(mesh.steps[:4], 0.25)
        np.testing.assert_allclose(mesh.steps[4:], 2.0 / 7.0)
        assert mesh.max_step <= 0.3

    def test_shorter_horizon(self, unit_disc):
        mesh = build_mesh(unit_disc, 0.25, T=0.9)
        assert mesh.T == pytest.approx(0.9)
        assert mesh.disc.xi == ()
        assert list(mesh.seg) == [1] * mesh.N

    def test_step_above_tau_zero(self, unit_disc):
        with pytest.raises(StepExceedsTauZero):
            build_mesh(unit_disc, 0.6)

    def test_bad_arguments(self, unit_disc):
        with pytest.raises(ValueError):
            build_mesh(unit_disc, 0.0)
        with pytest.raises(ValueError):
            build_mesh(unit_disc, 0.25, policy="geometric")

    def test_from_nodes_requires_discontinuities(self, unit_disc):
        with pytest.raises(EmptySegment):
            Mesh.from_nodes([0.0, 0.5, 1.5, 3.0], unit_disc)

    def test_from_nodes_rejects_unordered(self, unit_disc):
        with pytest.raises(ValueError):
            Mesh.from_nodes([0.0, 1.0, 0.5, 3.0], unit_disc)
        with pytest.raises(ValueError):
            Mesh.from_nodes([0.0, 1.0, 2.0], unit_disc)


class TestLocate:

    @pytest.fixture
    def mesh(self, unit_disc):
        return build_mesh(unit_disc, 0.4)

    def test_half_open_intervals(self, mesh):
        assert locate(mesh, 1.0) == 2
        assert locate(mesh, 1.0 + 1e-9) == 3
        assert locate(mesh, 0.1) == 0
        assert locate(mesh, 0.4) == 0

    def test_history_and_endpoint(self, mesh):
        assert locate(mesh, 0.0) == HISTORY
        assert locate(mesh, -0.3) == HISTORY
        assert locate(mesh, 3.0) == mesh.N - 1

    @pytest.mark.parametrize("t", [-0.6, 3.1])
    def test_outside_domain(self, mesh, t):
        with pytest.raises(OutOfDomain):
            locate(mesh, t)
