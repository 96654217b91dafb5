"""Geodesic, distance, and swelling tests.

Commuting (diagonal) pairs give closed-form oracles for every metric:
the scalar geodesic applies per eigenvalue.
"""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdmix.data_io import gen_random_spd
from spdmix.linalg import log_det, matrix_log
from spdmix.metrics import (
    MetricKind,
    StabilityWarning,
    SwellingReport,
    bures_cross_sqrt,
    geodesic,
    log_euclidean_distance,
    swelling_check,
)

ALL_METRICS = list(MetricKind)


def random_pair(seed, n=8, cond=100.0):
    rng = np.random.default_rng(seed)
    return gen_random_spd(n, cond, rng), gen_random_spd(n, cond, rng)


def rotated_pair(seed, n=8, cond=100.0):
    """Two matrices sharing a spectrum but rotated: equal determinants."""
    rng = np.random.default_rng(seed)
    s = gen_random_spd(n, cond, rng)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return s.array, q @ s.array @ q.T


class TestGeodesicEndpoints:
    @pytest.mark.parametrize("metric", ALL_METRICS)
    def test_identical_endpoints_fixed(self, metric):
        s, _ = random_pair(0)
        for lam in (0.0, 0.3, 1.0):
            out = geodesic(s, s, lam, metric)
            assert np.linalg.norm(out.array - s.array) <= 1e-8 * np.linalg.norm(s.array)

    @pytest.mark.parametrize("metric", ALL_METRICS)
    @pytest.mark.parametrize("seed", range(5))
    def test_endpoint_property(self, metric, seed):
        s_i, s_j = random_pair(seed)
        at0 = geodesic(s_i, s_j, 0.0, metric)
        at1 = geodesic(s_i, s_j, 1.0, metric)
        assert np.linalg.norm(at0.array - s_i.array) <= 1e-8 * np.linalg.norm(s_i.array)
        assert np.linalg.norm(at1.array - s_j.array) <= 1e-8 * np.linalg.norm(s_j.array)

    @pytest.mark.parametrize("metric", ALL_METRICS)
    def test_symmetry_in_arguments(self, metric):
        s_i, s_j = random_pair(42)
        fwd = geodesic(s_i, s_j, 0.3, metric)
        rev = geodesic(s_j, s_i, 0.7, metric)
        assert np.linalg.norm(fwd.array - rev.array) <= 1e-8 * np.linalg.norm(fwd.array)


class TestGeodesicCommutingOracles:
    def test_log_euclidean_diagonal_midpoint(self):
        out = geodesic(np.diag([1.0, 4.0]), np.diag([4.0, 1.0]), 0.5,
                       MetricKind.LOG_EUCLIDEAN)
        np.testing.assert_allclose(out.array, np.diag([2.0, 2.0]), atol=1e-12)

    def test_euclidean_diagonal_midpoint(self):
        out = geodesic(np.diag([1.0, 4.0]), np.diag([4.0, 1.0]), 0.5,
                       MetricKind.EUCLIDEAN)
        np.testing.assert_allclose(out.array, np.diag([2.5, 2.5]), atol=1e-14)

    @settings(deadline=None, max_examples=25)
    @given(
        a=st.lists(st.floats(min_value=0.1, max_value=10.0), min_size=2, max_size=4),
        lam=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_bures_wasserstein_diagonal_formula(self, a, lam):
        rng = np.random.default_rng(3)
        b = rng.uniform(0.1, 10.0, size=len(a))
        a = np.asarray(a)
        expected = ((1 - lam) * np.sqrt(a) + lam * np.sqrt(b)) ** 2
        out = geodesic(np.diag(a), np.diag(b), lam, MetricKind.BURES_WASSERSTEIN)
        np.testing.assert_allclose(out.array, np.diag(expected), atol=1e-9)

    @settings(deadline=None, max_examples=25)
    @given(lam=st.floats(min_value=0.0, max_value=1.0))
    def test_affine_invariant_matches_log_euclidean_on_commuting(self, lam):
        # commuting inputs: both reduce to a^(1-lam) b^lam per eigenvalue
        a = np.diag([0.5, 2.0, 7.0])
        b = np.diag([3.0, 0.4, 1.0])
        ai = geodesic(a, b, lam, MetricKind.AFFINE_INVARIANT)
        le = geodesic(a, b, lam, MetricKind.LOG_EUCLIDEAN)
        np.testing.assert_allclose(ai.array, le.array, atol=1e-10)


class TestGeodesicValidation:
    def test_lambda_out_of_range(self):
        s_i, s_j = random_pair(1)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            geodesic(s_i, s_j, 1.5, MetricKind.LOG_EUCLIDEAN)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            geodesic(np.eye(2), np.eye(3), 0.5, MetricKind.EUCLIDEAN)

    def test_metric_tag_attached_to_errors(self):
        bad = np.diag([1.0, -1.0])
        with pytest.raises(ValueError, match="log_euclidean geodesic"):
            geodesic(bad, np.eye(2), 0.5, MetricKind.LOG_EUCLIDEAN)

    def test_stability_warning_on_tiny_eigenvalues(self):
        tiny = np.diag([1e-12, 1.0])
        with pytest.warns(StabilityWarning):
            geodesic(tiny, np.eye(2), 0.5, MetricKind.AFFINE_INVARIANT)
        with pytest.warns(StabilityWarning):
            bures_cross_sqrt(tiny, np.eye(2))


class TestBuresCrossSqrt:
    def test_identity_left_factor(self):
        rng = np.random.default_rng(5)
        s = gen_random_spd(6, 50.0, rng)
        half = bures_cross_sqrt(np.eye(6), s)
        assert np.linalg.norm(half @ half - s.array) <= 1e-7 * np.linalg.norm(s.array)

    def test_equal_factors(self):
        rng = np.random.default_rng(6)
        s = gen_random_spd(5, 20.0, rng)
        out = bures_cross_sqrt(s, s)
        assert np.linalg.norm(out - s.array) <= 1e-7 * np.linalg.norm(s.array)

    @pytest.mark.parametrize("seed", range(5))
    def test_square_back(self, seed):
        s_i, s_j = random_pair(seed + 10)
        cross = bures_cross_sqrt(s_i, s_j)
        prod = s_i.array @ s_j.array
        assert np.linalg.norm(cross @ cross - prod) <= 1e-7 * np.linalg.norm(prod)


class TestLogEuclideanDistance:
    def test_zero_on_equal(self):
        s, _ = random_pair(7)
        assert log_euclidean_distance(s, s) <= 1e-10

    def test_closed_form_example(self):
        d = log_euclidean_distance(np.eye(2), np.diag([np.e, np.e]))
        assert d == pytest.approx(np.sqrt(2.0), abs=1e-12)

    def test_direct_formula_oracle(self):
        s_i, s_j = random_pair(8)
        expected = np.linalg.norm(matrix_log(s_i) - matrix_log(s_j))
        assert log_euclidean_distance(s_i, s_j) == pytest.approx(expected, rel=1e-12)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(9)
        mats = [gen_random_spd(6, 100.0, rng) for _ in range(3)]
        d01 = log_euclidean_distance(mats[0], mats[1])
        d10 = log_euclidean_distance(mats[1], mats[0])
        assert d01 == pytest.approx(d10, abs=1e-12)
        d02 = log_euclidean_distance(mats[0], mats[2])
        d12 = log_euclidean_distance(mats[1], mats[2])
        assert d02 <= d01 + d12 + 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            log_euclidean_distance(np.eye(2), np.eye(3))


class TestSwellingCheck:
    def test_reference_determinants(self):
        # endpoints with determinants 5.40 and 6.46; the geodesic midpoint
        # determinant is their geometric mean
        s_i = np.diag([5.40, 1.0])
        s_j = np.diag([6.46, 1.0])
        rep = swelling_check(s_i, s_j, 0.5, MetricKind.LOG_EUCLIDEAN)
        assert np.exp(rep.det_mix) == pytest.approx(np.sqrt(5.40 * 6.46), rel=1e-9)
        assert np.exp(rep.det_mix) == pytest.approx(5.906, abs=5e-4)
        assert rep.within_bounds and not rep.exceeds_max

    def test_equal_endpoints_all_metrics(self):
        s, _ = random_pair(11)
        for metric in ALL_METRICS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", StabilityWarning)
                rep = swelling_check(s, s, 0.7, metric)
            assert rep.within_bounds and not rep.exceeds_max
            assert rep.det_mix == pytest.approx(rep.det_i, abs=1e-8)

    def test_determinant_identity_log_euclidean_and_affine(self):
        for seed in range(10):
            s_i, s_j = random_pair(seed, n=6)
            lam = np.random.default_rng(seed).uniform()
            for metric in (MetricKind.LOG_EUCLIDEAN, MetricKind.AFFINE_INVARIANT):
                rep = swelling_check(s_i, s_j, lam, metric)
                expected = (1 - lam) * rep.det_i + lam * rep.det_j
                assert abs(rep.det_mix - expected) <= 1e-8
                assert rep.within_bounds

    def test_euclidean_exceedance_exists(self):
        hits = 0
        for seed in range(1000):
            a, b = rotated_pair(seed, n=4)
            rep = swelling_check(a, b, 0.5, MetricKind.EUCLIDEAN)
            hits += rep.exceeds_max
            if hits:
                break
        assert hits >= 1

    def test_exceeds_and_within_mutually_exclusive(self):
        for seed in range(20):
            a, b = rotated_pair(seed)
            for metric in (MetricKind.EUCLIDEAN, MetricKind.CHOLESKY):
                rep = swelling_check(a, b, 0.4, metric)
                assert not (rep.exceeds_max and rep.within_bounds)


class TestOrderProperties:
    def test_holder_direction(self):
        # geodesic determinant never exceeds the straight-line determinant
        for seed in range(20):
            s_i, s_j = random_pair(seed, n=6)
            for lam in (0.1, 0.5, 0.9):
                le = swelling_check(s_i, s_j, lam, MetricKind.LOG_EUCLIDEAN)
                eu = swelling_check(s_i, s_j, lam, MetricKind.EUCLIDEAN)
                assert le.det_mix <= eu.det_mix + 1e-9

    def test_operator_concavity_of_log(self):
        for seed in range(20):
            s_i, s_j = random_pair(seed, n=6)
            lam = np.random.default_rng(1000 + seed).uniform()
            blend_log = matrix_log((1 - lam) * s_i.array + lam * s_j.array)
            log_blend = (1 - lam) * matrix_log(s_i) + lam * matrix_log(s_j)
            gap = np.linalg.eigvalsh(blend_log - log_blend)[0]
            assert gap >= -1e-9

    def test_no_swelling_guarantee(self):
        for seed in range(20):
            s_i, s_j = random_pair(seed, n=5)
            lam = np.random.default_rng(2000 + seed).uniform()
            for metric in (MetricKind.LOG_EUCLIDEAN, MetricKind.AFFINE_INVARIANT):
                rep = swelling_check(s_i, s_j, lam, metric)
                lo = min(rep.det_i, rep.det_j)
                hi = max(rep.det_i, rep.det_j)
                assert lo - 1e-9 <= rep.det_mix <= hi + 1e-9


class TestSwellingReportShape:
    def test_fields_are_log_space(self):
        s_i = np.diag([2.0, 1.0])
        rep = swelling_check(s_i, s_i, 0.5, MetricKind.EUCLIDEAN)
        assert isinstance(rep, SwellingReport)
        assert rep.det_i == pytest.approx(log_det(s_i))
