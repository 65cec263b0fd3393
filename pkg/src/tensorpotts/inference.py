"""Maximum-likelihood estimation of beta and h, with confidence sets.

The ML estimate of h at known beta solves u_{N,1}(beta, h) = observed
first-coordinate magnetization; the estimate of beta at known h solves
u_{N,p}(beta, h) = observed p-norm statistic.  Both maps are strictly
increasing in the estimated parameter (the log-partition function is strictly
convex), so bracketed bisection is unconditionally convergent and needs no
derivatives.  Expectations inside the root-finding are exact finite-N values
from the enumeration engine, never Monte Carlo.

Confidence sets: the plain plug-in intervals around the estimates are
asymptotically valid at regular points.  They are made universally valid
either by uniting the (at most one) point of the critical-set closure on the
relevant parameter slice, or by the two-step procedure that first tests that
point with the estimator's critical/special limiting law.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DegenerateIntervalError, DomainError, PreconditionError
from .exact import DEFAULT_SUPPORT_CAP, BProfile, HProfile
from .model import ModelSpec, as_prob_vector, f_deriv
from .phase import (
    PointTag,
    SpecialPoint,
    classify_point,
    compute_beta_c,
    compute_special_point,
)

BRACKET_CAP = 64.0
ROOT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    observed_statistic: float
    iterations: int
    bracket: tuple
    converged: bool
    boundary: bool = False
    residual: float = math.nan

    def to_json_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "observed_statistic": self.observed_statistic,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "converged": self.converged,
            "boundary_flag": self.boundary,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class ConfidenceSet:
    interval: tuple
    level: float
    method: str  # plain | augmented | two_step
    appended_points: list = field(default_factory=list)

    def contains(self, value: float) -> bool:
        lo, hi = self.interval
        if lo <= value <= hi:
            return True
        return any(abs(value - pt) < 1e-12 for pt in self.appended_points)

    def width(self) -> float:
        return self.interval[1] - self.interval[0]

    def to_json_dict(self) -> dict:
        return {
            "lower": self.interval[0],
            "upper": self.interval[1],
            "appended": list(self.appended_points),
            "method": self.method,
            "level": self.level,
        }


def _bisect_increasing(fn, observed: float, cap: float = BRACKET_CAP):
    """Root of the increasing fn(x) = observed on [0, cap] by doubling + bisection.

    Returns (root, iterations, bracket, converged, boundary).
    """
    lo, hi = 0.0, 1.0
    iters = 0
    f_lo = fn(lo)
    if f_lo >= observed:
        return 0.0, 0, (0.0, 0.0), True, True
    while fn(hi) < observed:
        lo = hi
        hi *= 2.0
        iters += 1
        if hi > cap:
            return hi, iters, (lo, hi), False, False
    bracket = (lo, hi)
    while hi - lo > 1e-13 and iters < 200:
        mid = 0.5 * (lo + hi)
        if fn(mid) < observed:
            lo = mid
        else:
            hi = mid
        iters += 1
    return 0.5 * (lo + hi), iters, bracket, True, False


def mle_h(spec: ModelSpec, observed_x1: float, N: int,
          profile: HProfile | None = None,
          cap: int = DEFAULT_SUPPORT_CAP) -> EstimationResult:
    """ML estimate of h at known beta, from the observed first coordinate.

    Below u_{N,1}(beta, 0) the nonnegativity constraint is active and the
    boundary estimate 0 is flagged rather than raised; an observed value of
    exactly 0 (empty first color, positive probability at finite N) lands on
    that same boundary path.
    """
    if not (0.0 <= observed_x1 <= 1.0):
        raise DomainError(f"observed_x1 must be in [0, 1], got {observed_x1}")
    if profile is None:
        profile = HProfile(spec, N, cap)
    root, iters, bracket, converged, boundary = _bisect_increasing(profile.u1, observed_x1)
    residual = abs(profile.u1(root) - observed_x1) if converged else math.nan
    if converged and not boundary and residual > ROOT_RESIDUAL_TOL:
        converged = False
    return EstimationResult(estimate=root, observed_statistic=observed_x1,
                            iterations=iters, bracket=bracket, converged=converged,
                            boundary=boundary, residual=residual)


def mle_beta(spec: ModelSpec, observed_pnorm: float, N: int,
             profile: BProfile | None = None,
             cap: int = DEFAULT_SUPPORT_CAP) -> EstimationResult:
    """ML estimate of beta at known h, from the observed p-norm statistic.

    The uniform-magnetization value q^(1-p) (attainable when q divides N)
    sits below u_{N,p}(0, h) and yields the boundary estimate 0.
    """
    q, p = spec.q, spec.p
    if not (q ** (1 - p) <= observed_pnorm <= 1.0):
        raise DomainError(
            f"observed p-norm must lie in [q^(1-p), 1] = [{q ** (1 - p)}, 1], got {observed_pnorm}")
    if profile is None:
        profile = BProfile(spec, N, cap)
    root, iters, bracket, converged, boundary = _bisect_increasing(profile.up, observed_pnorm)
    residual = abs(profile.up(root) - observed_pnorm) if converged else math.nan
    if converged and not boundary and residual > ROOT_RESIDUAL_TOL:
        converged = False
    return EstimationResult(estimate=root, observed_statistic=observed_pnorm,
                            iterations=iters, bracket=bracket, converged=converged,
                            boundary=boundary, residual=residual)


def _plugin_curvature(spec: ModelSpec, beta_slot: float, data_x: np.ndarray) -> float:
    """-f''_{beta,0} at the plug-in s = 1 - q * xbar_q (f'' is h-free)."""
    s_plug = 1.0 - spec.q * float(data_x[-1])
    if not (0.0 <= s_plug <= 1.0 - 1e-9):
        raise DegenerateIntervalError(
            f"plug-in s = {s_plug} outside [0, 1): the sample's last coordinate "
            "is too extreme for the plug-in interval")
    f2 = f_deriv(spec.with_params(beta=beta_slot, h=0.0), s_plug, 2)
    if f2 >= 0:
        raise DegenerateIntervalError(
            f"plug-in f'' = {f2} >= 0: data is near-critical, interval degenerate")
    return -f2


def ci_h(spec: ModelSpec, data_x, N: int, alpha: float = 0.05,
         estimate: EstimationResult | None = None,
         profile: HProfile | None = None) -> ConfidenceSet:
    """Plain plug-in interval for h at known beta.

    hhat +/- (q/(q-1)) sqrt(-f''_{beta,0}(1 - q xbar_q)/N) z_{1-alpha/2}.
    """
    if not (0 < alpha < 1):
        raise DomainError("alpha must be in (0, 1)")
    data_x = as_prob_vector(data_x, spec.q)
    if estimate is None:
        estimate = mle_h(spec, float(data_x[0]), N, profile=profile)
    q = spec.q
    curv = _plugin_curvature(spec, spec.beta, data_x)
    z = ndtri(1.0 - alpha / 2.0)
    half = (q / (q - 1.0)) * math.sqrt(curv / N) * z
    return ConfidenceSet(interval=(estimate.estimate - half, estimate.estimate + half),
                         level=1.0 - alpha, method="plain")


def ci_beta(spec: ModelSpec, data_x, N: int, alpha: float = 0.05,
            estimate: EstimationResult | None = None,
            profile: BProfile | None = None) -> ConfidenceSet:
    """Plain plug-in interval for beta at known h != 0.

    betahat +/- q sqrt(-f''_{betahat,0}(1 - q xbar_q)/N)
              / (p (q-1) (xbar_1^{p-1} - xbar_2^{p-1})) z_{1-alpha/2}.
    """
    if not (0 < alpha < 1):
        raise DomainError("alpha must be in (0, 1)")
    if spec.h == 0.0:
        raise PreconditionError("the beta interval requires h != 0")
    data_x = as_prob_vector(data_x, spec.q)
    if estimate is None:
        observed = float(np.sum(data_x ** spec.p))
        estimate = mle_beta(spec, observed, N, profile=profile)
    q, p = spec.q, spec.p
    denom = p * (q - 1.0) * float(data_x[0] ** (p - 1) - data_x[1] ** (p - 1))
    if abs(denom) < 1e-9:
        raise DegenerateIntervalError(
            "xbar_1^{p-1} - xbar_2^{p-1} is below 1e-9; interval degenerate")
    curv = _plugin_curvature(spec, estimate.estimate, data_x)
    z = ndtri(1.0 - alpha / 2.0)
    half = q * math.sqrt(curv / N) / denom * z
    return ConfidenceSet(interval=(estimate.estimate - half, estimate.estimate + half),
                         level=1.0 - alpha, method="plain")


def critical_slice_h(p: int, q: int, beta: float,
                     beta_c: float | None = None,
                     special: SpecialPoint | None = None,
                     curve_tol: float = 1e-10) -> list:
    """S(beta): the h values putting (beta, h) in the closure of the critical set.

    At most one point: h = 0 for beta >= beta_c, the curve height phi^{-1}(beta)
    for beta_tilde <= beta < beta_c, nothing below beta_tilde.
    """
    if beta_c is None:
        beta_c = compute_beta_c(p, q)
    if beta >= beta_c - 1e-12:
        return [0.0]
    if special is None:
        special = compute_special_point(p, q)
    if special.h_tilde <= 0 or beta < special.beta_tilde - 1e-12:
        return []
    if abs(beta - special.beta_tilde) <= 1e-12:
        return [special.h_tilde]
    # invert the strictly decreasing curve by bisection in h
    lo, hi = 0.0, special.h_tilde
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        phi_mid = _phi_at(p, q, mid, beta_c, special)
        if phi_mid > beta:
            lo = mid
        else:
            hi = mid
        if hi - lo < curve_tol:
            break
    return [0.5 * (lo + hi)]


def _phi_at(p: int, q: int, h: float, beta_c: float, special: SpecialPoint) -> float:
    from .phase import _solve_tie  # curve machinery

    lo, hi = special.beta_tilde, beta_c * (1.0 + 1e-3) + 1e-6
    return _solve_tie(p, q, h, lo, hi, special.s_pq)


def critical_slice_beta(p: int, q: int, h: float,
                        beta_c: float | None = None,
                        special: SpecialPoint | None = None) -> list:
    """T(h) for h != 0: the beta with (beta, h) in the critical-set closure."""
    if h == 0.0:
        raise DomainError("T(h) is defined for h != 0")
    if special is None:
        special = compute_special_point(p, q)
    if special.h_tilde <= 0 or h > special.h_tilde + 1e-12:
        return []
    if beta_c is None:
        beta_c = compute_beta_c(p, q)
    if abs(h - special.h_tilde) <= 1e-12:
        return [special.beta_tilde]
    return [_phi_at(p, q, h, beta_c, special)]


def augment_ci(cs: ConfidenceSet, slice_points) -> ConfidenceSet:
    """Union the (at most one) critical-closure point into the confidence set."""
    lo, hi = cs.interval
    appended = [pt for pt in slice_points if not (lo <= pt <= hi)]
    return ConfidenceSet(interval=cs.interval, level=cs.level, method="augmented",
                         appended_points=appended)


_RATE_EXPONENTS = {
    PointTag.STRONGLY_CRITICAL: 0.5,
    PointTag.WEAKLY_CRITICAL: 0.5,
    PointTag.SPECIAL_TYPE_I: 0.75,
    PointTag.SPECIAL_TYPE_II: 5.0 / 6.0,
}


def two_step_ci(spec: ModelSpec, data_x, N: int, alpha: float = 0.05,
                param: str = "h",
                beta_c: float | None = None,
                special: SpecialPoint | None = None) -> ConfidenceSet:
    """Two-step confidence set: test the critical-closure point first.

    Tests H0: parameter equals the slice point, at level alpha, using the
    critical/special limiting law of the estimator at that point; on
    acceptance the singleton is returned, on rejection the plain interval.
    """
    from .laws import bhat_limit, hhat_limit

    data_x = as_prob_vector(data_x, spec.q)
    if param == "h":
        est = mle_h(spec, float(data_x[0]), N)
        slice_pts = critical_slice_h(spec.p, spec.q, spec.beta, beta_c, special)

        def plain():
            return ci_h(spec, data_x, N, alpha, estimate=est)

    elif param == "beta":
        est = mle_beta(spec, float(np.sum(data_x ** spec.p)), N)
        slice_pts = critical_slice_beta(spec.p, spec.q, spec.h, beta_c, special)

        def plain():
            return ci_beta(spec, data_x, N, alpha, estimate=est)

    else:
        raise DomainError("param must be 'h' or 'beta'")

    def plain_as_two_step():
        cs = plain()
        return ConfidenceSet(interval=cs.interval, level=cs.level, method="two_step")

    if not slice_pts:
        return plain_as_two_step()
    target = slice_pts[0]
    null_spec = spec.with_params(**{param: target} if param == "beta" else {"h": target})
    pclass = classify_point(null_spec)
    rate = _RATE_EXPONENTS.get(pclass.tag)
    if rate is None:
        # the slice point classified regular: fall back to the plain interval
        return plain_as_two_step()
    law = hhat_limit(null_spec, pclass) if param == "h" else bhat_limit(null_spec, pclass)
    stat = N ** rate * (est.estimate - target)
    lo_q = law.quantile(alpha / 2.0)
    hi_q = law.quantile(1.0 - alpha / 2.0)
    if lo_q <= stat <= hi_q:
        return ConfidenceSet(interval=(target, target), level=1.0 - alpha,
                             method="two_step")
    return plain_as_two_step()


def result_to_json(estimate: EstimationResult, cs: ConfidenceSet | None = None) -> str:
    payload = estimate.to_json_dict()
    if cs is not None:
        payload["ci"] = cs.to_json_dict()
    return json.dumps(payload)
