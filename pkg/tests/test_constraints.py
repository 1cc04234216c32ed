import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from poismer.constraints import (FeasibleSet, HypothesisSpec,
                                 constraint_residual, project_l1, shrink_l2)
from poismer.errors import DimensionMismatch


class TestProjectL1:
    def test_interior_point_unchanged(self):
        v = np.array([0.2, 0.1])
        np.testing.assert_array_equal(project_l1(v, 1.0), v)

    def test_axis_point(self):
        np.testing.assert_allclose(project_l1([3.0, 0.0], 1.0), [1.0, 0.0],
                                   atol=1e-12)

    def test_threshold_example(self):
        np.testing.assert_allclose(project_l1([2.0, 1.0], 1.0), [1.0, 0.0],
                                   atol=1e-12)

    def test_idempotent(self, rng):
        for _ in range(100):
            v = rng.standard_normal(int(rng.integers(1, 30))) * 3
            R1 = rng.uniform(0.1, 4.0)
            once = project_l1(v, R1)
            twice = project_l1(once, R1)
            assert np.max(np.abs(once - twice)) <= 1e-12

    def test_optimal_against_feasible_perturbations(self, rng):
        for _ in range(500):
            p = int(rng.integers(2, 20))
            v = rng.standard_normal(p) * 2.5
            R1 = rng.uniform(0.2, 3.0)
            proj = project_l1(v, R1)
            assert np.abs(proj).sum() <= R1 * (1 + 1e-12)
            d0 = np.linalg.norm(proj - v)
            cand = rng.standard_normal((100, p))
            cand *= (R1 * rng.uniform(0, 1, size=100) /
                     np.abs(cand).sum(axis=1))[:, None]
            dists = np.linalg.norm(cand - v[None, :], axis=1)
            assert np.all(d0 <= dists + 1e-9)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            project_l1([1.0], 0.0)


class TestShrinkL2:
    def test_interior_unchanged(self):
        np.testing.assert_array_equal(shrink_l2([0.3, 0.4], 1.0), [0.3, 0.4])

    def test_rescales(self):
        np.testing.assert_allclose(shrink_l2([3.0, 4.0], 1.0), [0.6, 0.8])

    def test_zero_vector(self):
        np.testing.assert_array_equal(shrink_l2(np.zeros(4), 2.0), np.zeros(4))

    def test_never_grows_norm(self, rng):
        for _ in range(50):
            v = rng.standard_normal(8) * 4
            R2 = rng.uniform(0.2, 5.0)
            out = shrink_l2(v, R2)
            assert np.linalg.norm(out) <= min(np.linalg.norm(v), R2) + 1e-12


class TestHypothesisSpec:
    def test_single_coordinate(self):
        spec = HypothesisSpec(C=[[1.0]], t=[0.0], M=[2])
        assert spec.r == 1 and spec.m == 1
        np.testing.assert_array_equal(spec.M, [2])

    def test_sorting_permutes_columns(self):
        spec = HypothesisSpec(C=[[2.0, 3.0]], t=[1.0], M=[5, 1])
        np.testing.assert_array_equal(spec.M, [1, 5])
        np.testing.assert_array_equal(spec.C, [[3.0, 2.0]])

    def test_rank_deficient_rejected(self):
        with pytest.raises(ValueError, match="rank"):
            HypothesisSpec(C=[[1.0, 1.0], [2.0, 2.0]], t=[0.0, 0.0], M=[0, 1])

    def test_more_rows_than_columns_rejected(self):
        with pytest.raises(ValueError):
            HypothesisSpec(C=[[1.0], [0.5]], t=[0.0, 0.0], M=[0])

    def test_duplicate_indices_rejected(self):
        with pytest.raises(ValueError):
            HypothesisSpec(C=[[1.0, 1.0]], t=[0.0], M=[3, 3])

    def test_complement(self):
        spec = HypothesisSpec(C=[[1.0, 1.0]], t=[0.0], M=[0, 3])
        np.testing.assert_array_equal(spec.complement(5), [1, 2, 4])
        with pytest.raises(DimensionMismatch):
            spec.complement(3)

    def test_json_round_trip_one_based(self):
        spec = HypothesisSpec(C=[[1.0, -1.0]], t=[0.5], M=[0, 4])
        text = spec.to_json()
        assert '"M": [1, 5]' in text
        back = HypothesisSpec.from_json(text)
        np.testing.assert_array_equal(back.M, spec.M)
        np.testing.assert_array_equal(back.C, spec.C)
        np.testing.assert_array_equal(back.t, spec.t)

    def test_json_rejects_zero_index(self):
        with pytest.raises(ValueError):
            HypothesisSpec.from_json('{"C": [[1.0]], "t": [0.0], "M": [0]}')


class TestConstraintResidual:
    def test_satisfied(self):
        spec = HypothesisSpec(C=[[1.0, 0.0]], t=[0.0], M=[0, 1])
        beta = np.array([0.0, 5.0, 1.0])
        assert constraint_residual(spec, beta) == 0.0

    def test_violated(self):
        spec = HypothesisSpec(C=[[1.0, -1.0]], t=[0.0], M=[0, 1])
        beta = np.array([0.75, -0.75, 0.2])
        assert constraint_residual(spec, beta) == pytest.approx(1.5)

    def test_sum_constraint(self):
        # beta_1 + beta_p = 0.75 with beta_1 = 0.75 and beta_p = 0
        spec = HypothesisSpec(C=[[1.0, 1.0]], t=[0.75], M=[0, 49])
        beta = np.zeros(50)
        beta[0] = 0.75
        assert constraint_residual(spec, beta) == 0.0


class TestFeasibleSet:
    def test_positive_radii_required(self):
        with pytest.raises(ValueError):
            FeasibleSet(R1=0.0, R2=1.0)
        with pytest.raises(ValueError):
            FeasibleSet(R1=1.0, R2=-2.0)


@settings(deadline=None, max_examples=80)
@given(
    v=arrays(np.float64, st.integers(1, 12),
             elements=st.floats(-5, 5, allow_nan=False)),
    R1=st.floats(0.1, 5.0),
)
def test_projection_lands_in_ball(v, R1):
    out = project_l1(v, R1)
    assert np.abs(out).sum() <= R1 + 1e-9
    # projection never flips a sign
    assert np.all(out * v >= -1e-12)
