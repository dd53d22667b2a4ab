"""
tests/test_history_store.py
Continuous extensions used for delayed arguments.

Stores are filled with synthetic interval records so that the expected
values are known in closed form.
"""

import numpy as np
import pandas as pd
import pytest

from integrators import StepRecord
from services.history_store import (
    ExponentialDenseOutput,
    InterpolantStore,
    ModifiedInterpolantStore,
    check_node_consistency,
    dump_dense_csv,
    eval_dense,
    eval_interpolant,
    eval_modified,
    make_history_store,
)
from tools.errors import FutureEvaluation, OutOfDomain, StencilUnavailable
from tools.phi_functions import gauss_scheme, make_scheme, radau_scheme, weight_a, weight_b
from tools.spectral_operator import explicit_diagonal


def polynomial_record(k, mesh, scheme, poly):
    """Record whose node and stage values sample poly (vector-valued, 2 DOF)."""
    t_left = float(mesh.nodes[k])
    h = float(mesh.nodes[k + 1]) - t_left

    def value(t):
        return np.array([poly(t), 2.0 * poly(t) - 1.0])

    stages = np.vstack([value(t_left + c * h) for c in scheme.c])
    return StepRecord(
        index=k,
        t_left=t_left,
        h=h,
        u_left=value(t_left),
        stages=stages,
        g=np.zeros_like(stages),
        u_right=value(t_left + h),
        iterations=1,
    )


def fill(store, mesh, scheme, poly, count=None):
    for k in range(mesh.N if count is None else count):
        store.append(polynomial_record(k, mesh, scheme, poly))
    return store


def history_of(poly):
    return lambda t: np.array([poly(t), 2.0 * poly(t) - 1.0])


class TestInterpolantStore:

    @pytest.mark.parametrize("scheme, degree", [
        (radau_scheme(2), 2),
        (gauss_scheme(2), 3),
        (make_scheme([0.0, 0.5, 1.0]), 2),
        (make_scheme([1.0]), 1),
    ])
    def test_reproduces_polynomials_of_its_degree(self, ex1_mesh, scheme, degree):
        poly = lambda t: 1.0 + 0.5 * t - 0.3 * t ** degree  # noqa: E731
        store = fill(InterpolantStore(ex1_mesh, history_of(poly), scheme), ex1_mesh, scheme, poly)
        assert store.degree == degree
        for t in (0.01, 0.3, 1.0, 1.07, 2.99):
            np.testing.assert_allclose(store.evaluate(t), history_of(poly)(t), rtol=1e-12, atol=1e-13)

    def test_theta_nodes_collapse_endpoints(self, ex1_mesh, ex1_small):
        store = InterpolantStore(ex1_mesh, ex1_small.history, make_scheme([0.0, 0.5, 1.0]))
        np.testing.assert_array_equal(store.theta_nodes, [0.0, 0.5, 1.0])
        store = InterpolantStore(ex1_mesh, ex1_small.history, gauss_scheme(2))
        assert len(store.theta_nodes) == 4

    def test_midpoint_coefficients(self, ex1_mesh, radau2):
        """Nodes {0, 1/3, 1} at theta = 1/2 give weights (-1/4, 9/8, 1/8)."""
        store = InterpolantStore(ex1_mesh, lambda t: np.zeros(1), radau2)
        h = float(ex1_mesh.nodes[1])
        store.append(StepRecord(
            index=0, t_left=0.0, h=h,
            u_left=np.array([1.0]),
            stages=np.array([[10.0], [100.0]]),
            g=np.zeros((2, 1)),
            u_right=np.array([100.0]),
            iterations=1,
        ))
        value = store.evaluate(0.5 * h)
        assert value[0] == pytest.approx(-0.25 + 9.0 / 8.0 * 10.0 + 100.0 / 8.0, rel=1e-13)

    def test_history_for_nonpositive_times(self, ex1_mesh, radau2):
        poly = lambda t: 3.0 - t  # noqa: E731
        store = InterpolantStore(ex1_mesh, history_of(poly), radau2)
        np.testing.assert_array_equal(store.evaluate(-0.25), history_of(poly)(-0.25))
        other = lambda t: np.array([7.0, 7.0])  # noqa: E731
        np.testing.assert_array_equal(eval_interpolant(store, other, 0.0), [7.0, 7.0])

    def test_future_evaluation(self, ex1_mesh, radau2):
        poly = lambda t: t  # noqa: E731
        store = fill(InterpolantStore(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly, count=3)
        assert store.completed_until == pytest.approx(0.375)
        store.evaluate(0.375)
        with pytest.raises(FutureEvaluation):
            store.evaluate(0.4)

    def test_out_of_domain(self, ex1_mesh, radau2):
        store = InterpolantStore(ex1_mesh, history_of(lambda t: t), radau2)
        with pytest.raises(OutOfDomain):
            store.evaluate(-0.75)

    def test_append_in_order(self, ex1_mesh, radau2):
        poly = lambda t: t  # noqa: E731
        store = InterpolantStore(ex1_mesh, history_of(poly), radau2)
        with pytest.raises(ValueError):
            store.append(polynomial_record(1, ex1_mesh, radau2, poly))

    def test_prune_before(self, ex1_mesh, radau2):
        poly = lambda t: t ** 2  # noqa: E731
        store = fill(InterpolantStore(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly)
        assert store.prune_before(1.0) == 7
        with pytest.raises(OutOfDomain):
            store.evaluate(0.5)
        np.testing.assert_allclose(store.evaluate(0.99), history_of(poly)(0.99), rtol=1e-12)
        assert store.prune_before(1.0) == 0


class TestModifiedInterpolantStore:

    @pytest.mark.parametrize("k, nodes, left, right", [
        (4, [3, 4, 5, 6], 2, 2),
        (0, [0, 1, 2, 3], 1, 3),
        (7, [5, 6, 7, 8], 3, 1),
        (8, [8, 9, 10, 11], 1, 3),
    ])
    def test_stencils_stay_in_segment(self, ex1_mesh, radau2, k, nodes, left, right):
        store = ModifiedInterpolantStore(ex1_mesh, lambda t: np.zeros(1), radau2)
        stencil = store.stencil_for(k)
        assert stencil["nodes"] == nodes
        assert stencil["left"] == left
        assert stencil["right"] == right
        assert stencil["left"] + stencil["right"] == 4

    def test_segment_index(self, ex1_mesh, radau2):
        store = ModifiedInterpolantStore(ex1_mesh, lambda t: np.zeros(1), radau2)
        assert store.stencil_for(7)["segment"] == 1
        assert store.stencil_for(8)["segment"] == 2

    def test_stencil_limited_by_completed_nodes(self, ex1_mesh, radau2):
        store = ModifiedInterpolantStore(ex1_mesh, lambda t: np.zeros(1), radau2)
        assert store.stencil_for(1, last_node=3)["nodes"] == [0, 1, 2, 3]
        with pytest.raises(StencilUnavailable):
            store.stencil_for(1, last_node=2)

    def test_check_stencils(self, ex1_mesh, radau2):
        report = ModifiedInterpolantStore(ex1_mesh, lambda t: np.zeros(1), radau2).check_stencils()
        assert report["passed"]
        assert report["crossing_intervals"] == []
        assert report["unavailable_intervals"] == []

    def test_reproduces_cubics(self, ex1_mesh, radau2):
        poly = lambda t: 0.5 - t + 0.25 * t ** 2 - 0.1 * t ** 3  # noqa: E731
        store = fill(ModifiedInterpolantStore(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly)
        for t in (0.05, 0.6, 0.999, 1.2, 2.5, 3.0):
            expected = history_of(poly)(t)
            np.testing.assert_allclose(eval_modified(store, store.history, t), expected, rtol=1e-11, atol=1e-13)

    def test_prune_keeps_stencil_nodes(self, ex1_mesh, radau2):
        poly = lambda t: t ** 3  # noqa: E731
        store = fill(ModifiedInterpolantStore(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly)
        store.prune_before(2.0)
        np.testing.assert_allclose(store.evaluate(2.1), history_of(poly)(2.1), rtol=1e-11)


class TestExponentialDenseOutput:

    @staticmethod
    def collocation_record(k, mesh, scheme, u_left, g):
        """Exact collocation record for A = 0 with stage nonlinearities g."""
        t_left = float(mesh.nodes[k])
        h = float(mesh.nodes[k + 1]) - t_left
        s = scheme.s
        stages = np.vstack([
            u_left + h * sum(weight_a(scheme, i, j, 0.0) * g[j - 1] for j in range(1, s + 1))
            for i in range(1, s + 1)
        ])
        u_right = u_left + h * sum(weight_b(scheme, j, 1.0, 0.0) * g[j - 1] for j in range(1, s + 1))
        return StepRecord(
            index=k, t_left=t_left, h=h, u_left=u_left, stages=stages, g=g,
            u_right=u_right, iterations=1,
        )

    def test_zero_operator_matches_interpolant(self, ex1_mesh, radau2):
        op = explicit_diagonal([0.0, 0.0])
        dense = ExponentialDenseOutput(ex1_mesh, lambda t: np.zeros(2), op, radau2)
        interp = InterpolantStore(ex1_mesh, lambda t: np.zeros(2), radau2)
        u = np.array([1.0, -2.0])
        for k in range(4):
            g = np.array([[0.5 + k, 1.0], [-1.0, 0.25 * k]])
            record = self.collocation_record(k, ex1_mesh, radau2, u, g)
            dense.append(record)
            interp.append(record)
            u = record.u_right
        for t in (0.01, 0.2, 0.26, 0.5):
            np.testing.assert_allclose(dense.evaluate(t), interp.evaluate(t), rtol=1e-12, atol=1e-14)

    def test_theta_endpoints(self, ex1_mesh, radau2):
        op = explicit_diagonal([0.0, 0.0])
        dense = ExponentialDenseOutput(ex1_mesh, lambda t: np.zeros(2), op, radau2)
        record = self.collocation_record(0, ex1_mesh, radau2, np.array([1.0, 2.0]), np.ones((2, 2)))
        dense.append(record)
        np.testing.assert_allclose(dense.evaluate_theta(0, 0.0), record.u_left)
        np.testing.assert_allclose(dense.evaluate_theta(0, 1.0), record.u_right, rtol=1e-14)
        assert check_node_consistency(dense)["passed"]

    def test_eval_dense_checks_operator_and_scheme(self, ex1_mesh, radau2):
        op = explicit_diagonal([1.0])
        dense = ExponentialDenseOutput(ex1_mesh, lambda t: np.ones(1), op, radau2)
        np.testing.assert_array_equal(eval_dense(dense, dense.history, op, radau2, -0.1), [1.0])
        with pytest.raises(ValueError):
            eval_dense(dense, dense.history, op, radau_scheme(2), -0.1)
        with pytest.raises(ValueError):
            eval_dense(dense, dense.history, explicit_diagonal([1.0]), radau2, -0.1)


class TestHelpers:

    def test_make_history_store(self, ex1_mesh, radau2):
        op = explicit_diagonal([1.0])
        assert isinstance(make_history_store("erkc_i", ex1_mesh, None, op, radau2), InterpolantStore)
        assert isinstance(make_history_store("merkc_i", ex1_mesh, None, op, radau2), ModifiedInterpolantStore)
        assert isinstance(make_history_store("erkc_c", ex1_mesh, None, op, radau2), ExponentialDenseOutput)
        with pytest.raises(ValueError):
            make_history_store("erkc_x", ex1_mesh, None, op, radau2)

    @pytest.mark.parametrize("store_cls", [InterpolantStore, ModifiedInterpolantStore])
    def test_node_consistency(self, ex1_mesh, radau2, store_cls):
        poly = lambda t: np.sin(t)  # noqa: E731
        store = fill(store_cls(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly)
        report = check_node_consistency(store)
        assert report["passed"], report["message"]
        assert report["max_deviation"] <= 1e-12

    def test_dump_dense_csv(self, ex1_mesh, radau2, tmp_path):
        poly = lambda t: 1.0 + t  # noqa: E731
        store = fill(InterpolantStore(ex1_mesh, history_of(poly), radau2), ex1_mesh, radau2, poly)
        path = tmp_path / "out" / "dense.csv"
        frame = dump_dense_csv(store, [-0.5, 0.0, 1.5, 3.0], path)
        assert path.read_text().startswith("#schema=1 store=interpolant")
        loaded = pd.read_csv(path, comment="#", dtype=float)
        assert list(loaded.columns) == ["t", "dof_0", "dof_1"]
        np.testing.assert_allclose(loaded["dof_0"], [0.5, 1.0, 2.5, 4.0], rtol=1e-14)
        pd.testing.assert_frame_equal(loaded, frame)
