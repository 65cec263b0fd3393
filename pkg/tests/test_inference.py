"""ML root-finding, confidence intervals, and the two-step procedure."""

import json
import math

import numpy as np
import pytest
from scipy.special import ndtri

from tensorpotts import (
    ModelSpec,
    augment_ci,
    ci_beta,
    ci_h,
    compute_beta_c,
    compute_special_point,
    critical_slice_beta,
    critical_slice_h,
    exact_sample,
    expect_u1,
    expect_up,
    f_deriv,
    magnetization_law,
    mle_beta,
    mle_h,
    two_step_ci,
)
from tensorpotts.errors import DegenerateIntervalError, DomainError, PreconditionError
from tensorpotts.exact import HProfile
from tensorpotts.inference import result_to_json

from conftest import rng


class TestRootRecovery:
    def test_self_consistency_random_points(self):
        gen = rng(23)
        N = 80
        for _ in range(10):
            p = int(gen.integers(2, 5))
            q = int(gen.integers(2, 4))
            beta0 = float(gen.uniform(0.05, 1.2))
            h0 = float(gen.uniform(0.05, 1.0))
            spec = ModelSpec(p, q, beta0, h0)
            est_h = mle_h(spec, expect_u1(spec, N), N)
            assert est_h.converged and abs(est_h.estimate - h0) < 1e-9
            est_b = mle_beta(spec, expect_up(spec, N), N)
            assert est_b.converged and abs(est_b.estimate - beta0) < 1e-9

    def test_residual_bound(self):
        spec = ModelSpec(4, 3, 0.7, 0.4)
        N = 120
        est = mle_h(spec, 0.52, N)
        assert est.converged and est.residual <= 1e-10

    def test_bracket_sign_pattern(self):
        # the profile is increasing across the final bracket
        spec = ModelSpec(4, 3, 0.7, 0.4)
        N = 100
        prof = HProfile(spec, N)
        est = mle_h(spec, 0.55, N, profile=prof)
        lo, hi = est.bracket
        assert prof.u1(lo) <= 0.55 <= prof.u1(hi)

    def test_boundary_flag(self):
        spec = ModelSpec(4, 3, 0.5, 0.0)
        N = 60
        floor = expect_u1(spec, N)
        est = mle_h(spec, floor - 0.01, N)
        assert est.boundary and est.estimate == 0.0

    def test_symmetric_independence_case(self):
        est = mle_h(ModelSpec(2, 2, 0.0, 0.0), 0.5, 40)
        assert est.estimate == 0.0 and est.boundary

    def test_boundary_of_range_saturates(self):
        # u_{N,p} < 1 for finite beta, but saturates to 1.0 in double precision;
        # the root returned is where the statistic becomes indistinguishable
        spec = ModelSpec(4, 3, 0.0, 0.1)
        est = mle_beta(spec, 1.0, 30)
        assert est.converged and est.residual == 0.0
        assert est.estimate < 64.0

    def test_domain_checks(self):
        spec = ModelSpec(4, 3, 0.5, 0.1)
        with pytest.raises(DomainError):
            mle_h(spec, 1.5, 30)
        with pytest.raises(DomainError):
            mle_beta(spec, 0.01, 30)  # below q^{1-p}

    def test_exact_zero_observation_hits_boundary(self):
        # an empty first color has positive probability in the ordered phase
        spec = ModelSpec(4, 3, 1.3, 0.0)
        est = mle_h(spec, 0.0, 60)
        assert est.boundary and est.estimate == 0.0
        est_b = mle_beta(ModelSpec(4, 3, 0.0, 0.2), 3 ** (1 - 4), 60)
        assert est_b.boundary and est_b.estimate == 0.0


class TestPlainIntervals:
    def test_z_quantile_value(self):
        assert ndtri(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_interval_centers_on_estimate(self, fig_regular_spec):
        N = 200
        law = magnetization_law(fig_regular_spec, N)
        data = exact_sample(law, 1, seed=31)[0]
        est = mle_h(fig_regular_spec, float(data[0]), N)
        cs = ci_h(fig_regular_spec, data, N, 0.05, estimate=est)
        assert cs.method == "plain"
        lo, hi = cs.interval
        assert (lo + hi) / 2 == pytest.approx(est.estimate, abs=1e-12)
        # explicit width: (q/(q-1)) sqrt(-f''(s_plug)/N) z
        s_plug = 1 - 3 * float(data[-1])
        half = 1.5 * math.sqrt(-f_deriv(fig_regular_spec.with_params(h=0.0), s_plug, 2) / N)
        assert hi - lo == pytest.approx(2 * half * ndtri(0.975), rel=1e-12)

    def test_width_scales_as_sqrt_n(self, fig_regular_spec):
        widths = {}
        for N in (500, 1000, 2000, 4000):
            law = magnetization_law(fig_regular_spec, N)
            data = exact_sample(law, 1, seed=41)[0]
            widths[N] = ci_h(fig_regular_spec, data, N, 0.05).width()
        assert widths[500] > widths[1000] > widths[2000] > widths[4000]
        # quadrupling N halves the width (up to plug-in noise)
        assert widths[1000] / widths[4000] == pytest.approx(2.0, rel=0.10)

    def test_ci_beta_formula(self):
        spec = ModelSpec(4, 2, 0.7, 0.4)
        N = 150
        data = exact_sample(magnetization_law(spec, N), 1, seed=43)[0]
        est = mle_beta(spec, float(np.sum(data ** 4)), N)
        cs = ci_beta(spec, data, N, 0.05, estimate=est)
        denom = 4 * 1 * (data[0] ** 3 - data[1] ** 3)
        curv = -f_deriv(spec.with_params(beta=est.estimate, h=0.0), 1 - 2 * data[1], 2)
        half = 2 * math.sqrt(curv / N) / denom * ndtri(0.975)
        assert cs.width() == pytest.approx(2 * half, rel=1e-12)

    def test_ci_beta_requires_field(self):
        spec = ModelSpec(4, 2, 0.7, 0.0)
        with pytest.raises(PreconditionError):
            ci_beta(spec, np.array([0.8, 0.2]), 50, 0.05)

    def test_degenerate_plugin_curvature(self):
        # at (4,2) with beta above 2/3, the plug-in f'' at s = 0 is positive
        spec = ModelSpec(4, 2, 0.9, 0.2)
        with pytest.raises(DegenerateIntervalError):
            ci_h(spec, np.array([0.5, 0.5]), 50, 0.05,
                 estimate=mle_h(spec, 0.5, 50))

    def test_ci_beta_degenerate_denominator(self):
        spec = ModelSpec(4, 3, 0.6, 0.2)
        data = np.array([1 / 3, 1 / 3, 1 / 3])
        est = mle_beta(spec, float(np.sum(data ** 4)) + 1e-6, 40)
        with pytest.raises(DegenerateIntervalError):
            ci_beta(spec, data, 40, 0.05, estimate=est)


class TestCriticalSlices:
    def test_h_slice_geometry_7_5(self):
        bc = compute_beta_c(7, 5)
        sp = compute_special_point(7, 5)
        assert critical_slice_h(7, 5, bc + 0.5) == [0.0]
        assert critical_slice_h(7, 5, sp.beta_tilde - 0.05) == []
        mid = 0.5 * (sp.beta_tilde + bc)
        pts = critical_slice_h(7, 5, mid)
        assert len(pts) == 1 and 0 < pts[0] < sp.h_tilde

    def test_h_slice_q2(self):
        assert critical_slice_h(4, 2, 0.8) == [0.0]
        assert critical_slice_h(4, 2, 0.5) == []

    def test_beta_slice(self):
        sp = compute_special_point(4, 3)
        assert critical_slice_beta(4, 3, sp.h_tilde + 0.1) == []
        pts = critical_slice_beta(4, 3, 0.2)
        assert len(pts) == 1 and pts[0] == pytest.approx(0.965, abs=5e-4)
        with pytest.raises(DomainError):
            critical_slice_beta(4, 3, 0.0)

    def test_beta_slice_q2_empty(self):
        assert critical_slice_beta(4, 2, 0.3) == []

    def test_slice_point_is_critical(self):
        from tensorpotts import PointTag, classify_point

        beta = critical_slice_beta(4, 3, 0.2)[0]
        tag = classify_point(ModelSpec(4, 3, beta, 0.2)).tag
        assert tag is PointTag.STRONGLY_CRITICAL


class TestAugmented:
    def test_appends_outside_point(self):
        from tensorpotts.inference import ConfidenceSet

        cs = ConfidenceSet(interval=(0.4, 0.6), level=0.95, method="plain")
        aug = augment_ci(cs, [0.0])
        assert aug.method == "augmented"
        assert aug.appended_points == [0.0]
        assert aug.contains(0.0) and aug.contains(0.5)

    def test_swallows_inside_point(self):
        from tensorpotts.inference import ConfidenceSet

        cs = ConfidenceSet(interval=(-0.1, 0.6), level=0.95, method="plain")
        aug = augment_ci(cs, [0.0])
        assert aug.appended_points == []


class TestTwoStep:
    def test_regular_slice_empty_returns_plain_interval(self, fig_regular_spec):
        N = 150
        data = exact_sample(magnetization_law(fig_regular_spec, N), 1, seed=51)[0]
        cs = two_step_ci(fig_regular_spec, data, N, 0.05, param="h")
        assert cs.method == "two_step"
        assert cs.width() > 0

    def test_accepts_axis_null_at_h0_data(self):
        # beta above beta_c(4,3): S(beta) = {0}; data simulated at h = 0 should
        # accept the null and return the singleton
        bc = compute_beta_c(4, 3)
        spec = ModelSpec(4, 3, bc + 0.1, 0.0)
        N = 200
        data = exact_sample(magnetization_law(spec, N), 1, seed=53)[0]
        cs = two_step_ci(spec, data, N, 0.05, param="h")
        assert cs.interval == (0.0, 0.0)

    def test_rejects_axis_null_for_extreme_data(self):
        # a first coordinate this extreme forces a large field estimate, so the
        # test statistic escapes the mixture law's acceptance region
        bc = compute_beta_c(4, 3)
        spec = ModelSpec(4, 3, bc + 0.1, 0.6)
        N = 200
        data = np.array([0.995, 0.003, 0.002])
        cs = two_step_ci(spec, data, N, 0.05, param="h")
        assert cs.width() > 0  # plain interval, not the singleton

    def test_i_accepts_moderate_ordered_data(self):
        # above beta_c a strongly ordered sample is compatible with h = 0: the
        # likelihood in h is nearly flat past the basin flip, so the null stands
        bc = compute_beta_c(4, 3)
        spec = ModelSpec(4, 3, bc + 0.1, 0.6)
        N = 200
        data = exact_sample(magnetization_law(spec, N), 1, seed=55)[0]
        cs = two_step_ci(spec, data, N, 0.05, param="h")
        assert cs.interval == (0.0, 0.0)


class TestJson:
    def test_round_trip(self, fig_regular_spec):
        N = 100
        data = exact_sample(magnetization_law(fig_regular_spec, N), 1, seed=61)[0]
        est = mle_h(fig_regular_spec, float(data[0]), N)
        cs = ci_h(fig_regular_spec, data, N, 0.05, estimate=est)
        payload = json.loads(result_to_json(est, cs))
        assert payload["converged"] is True
        assert payload["ci"]["method"] == "plain"
        assert payload["ci"]["lower"] < payload["estimate"] < payload["ci"]["upper"]
