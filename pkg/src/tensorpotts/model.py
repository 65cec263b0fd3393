"""Core model definitions for the mean-field Potts model with p-body interactions.

The model on N sites with q colors has probabilities proportional to
``exp(beta * N * sum_r xbar_r^p + N * h * xbar_1)`` where ``xbar`` is the
empirical color-frequency (magnetization) vector.  Everything downstream is
driven by the negative free energy

    H(v) = beta * sum_r v_r^p + h * v_1 - sum_r v_r log v_r

on the probability simplex, and by its one-dimensional reduction along the ray

    x_s = ((1 + (q-1) s) / q, (1-s)/q, ..., (1-s)/q),      0 <= s < 1,

    f(s) = (q-1) k((1-s)/q) + k((1+(q-1)s)/q) + h (1+(q-1)s)/q,

with ``k(x) = beta x^p - x log x``.  This module provides the model spec,
closed-form derivatives of ``k`` and ``f`` up to order six, the quadratic form
of the Hessian on the zero-sum hyperplane, and the limiting covariance matrix
at points where the reduced curvature is negative.

All functions here are pure and operate on immutable values; they are safe to
call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ClassificationError, DomainError, ShapeError

# Upper guard on s: k'' and higher derivatives blow up at the simplex boundary.
BOUNDARY_DELTA = 1e-9

# Tolerance for ProbVector validation (entries sum to one).
PROB_SUM_TOL = 1e-12

MAX_DERIV_ORDER = 6


@dataclass(frozen=True)
class ModelSpec:
    """Parameters (p, q, beta, h) of the mean-field p-body Potts model.

    p is the interaction order (>= 2), q the number of colors (>= 2);
    beta >= 0 is the interaction strength and h >= 0 the external field on
    color 1.  beta = 0 is admitted for oracle tests only.
    """

    p: int
    q: int
    beta: float
    h: float

    def __post_init__(self):
        if not (isinstance(self.p, (int, np.integer)) and self.p >= 2):
            raise DomainError(f"interaction order p must be an integer >= 2, got {self.p}")
        if not (isinstance(self.q, (int, np.integer)) and self.q >= 2):
            raise DomainError(f"number of colors q must be an integer >= 2, got {self.q}")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise DomainError(f"beta must be finite and >= 0, got {self.beta}")
        if not (np.isfinite(self.h) and self.h >= 0):
            raise DomainError(f"h must be finite and >= 0, got {self.h}")

    def with_params(self, beta=None, h=None) -> "ModelSpec":
        return ModelSpec(self.p, self.q,
                         self.beta if beta is None else float(beta),
                         self.h if h is None else float(h))


@dataclass(frozen=True)
class SDerivatives:
    """Values f^(0)..f^(6) of the reduced free energy at a single s."""

    s: float
    values: np.ndarray  # shape (7,)


def as_prob_vector(v, q: int | None = None) -> np.ndarray:
    """Validate and return v as a probability vector (1-D, >= 0, sums to 1)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or (q is not None and v.shape[0] != q):
        raise ShapeError(f"expected a length-{q or 'q'} vector, got shape {v.shape}")
    if np.any(v < 0):
        raise ShapeError("probability vector has negative entries")
    if abs(v.sum() - 1.0) > PROB_SUM_TOL:
        raise ShapeError(f"probability vector sums to {v.sum()!r}, not 1")
    return v


def u_vector(q: int) -> np.ndarray:
    """The direction (1-q, 1, ..., 1) spanning the degenerate subspace at special points."""
    u = np.ones(q)
    u[0] = 1.0 - q
    return u


def x_of_s(q: int, s: float) -> np.ndarray:
    """Map s in [0, 1) to the ray vector ((1+(q-1)s)/q, (1-s)/q, ..., (1-s)/q)."""
    if not (0.0 <= s < 1.0):
        raise DomainError(f"s must lie in [0, 1), got {s}")
    v = np.full(q, (1.0 - s) / q)
    v[0] = (1.0 + (q - 1.0) * s) / q
    return v


def s_of_x(v) -> float:
    """Invert x_of_s via s = 1 - q*v_2; coordinates 2..q must agree."""
    v = np.asarray(v, dtype=float)
    q = v.shape[0]
    if q < 2:
        raise ShapeError("need at least two coordinates")
    tail = v[1:]
    if np.max(tail) - np.min(tail) > 1e-9:
        raise ShapeError("coordinates 2..q are not equal; vector is not on the x_s ray")
    return 1.0 - q * float(v[1])


def negative_free_energy(spec: ModelSpec, v) -> float:
    """H(v) = beta * sum v_r^p + h v_1 - sum v_r log v_r, with 0 log 0 = 0."""
    v = as_prob_vector(v, spec.q)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    return float(spec.beta * np.sum(v ** spec.p) + spec.h * v[0] - ent.sum())


def _falling_factorial(p: int, n: int) -> float:
    out = 1.0
    for i in range(n):
        out *= p - i
    return out


def _k_scalar(spec: ModelSpec, x: float, order: int) -> float:
    if x <= 0:
        raise DomainError("k derivatives require x > 0")
    p = spec.p
    poly = spec.beta * _falling_factorial(p, order) * x ** (p - order) if order <= p else 0.0
    if order == 0:
        ent = x * math.log(x)
    elif order == 1:
        ent = math.log(x) + 1.0
    else:
        ent = (-1.0) ** order * math.factorial(order - 2) * x ** (1 - order)
    return poly - ent


def k_deriv(spec: ModelSpec, x, order: int):
    """n-th derivative of k(x) = beta x^p - x log x at x > 0, for n <= 6.

    The entropy part contributes -x log x, -(log x + 1), -1/x, +1/x^2, ... ;
    the polynomial part vanishes for order > p.
    """
    if not (0 <= order <= MAX_DERIV_ORDER):
        raise DomainError(f"derivative order must be 0..{MAX_DERIV_ORDER}, got {order}")
    if isinstance(x, (float, int)):
        return _k_scalar(spec, float(x), order)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("k derivatives require x > 0")
    p = spec.p
    poly = spec.beta * _falling_factorial(p, order) * x ** (p - order) if order <= p else np.zeros_like(x)
    if order == 0:
        ent = x * np.log(x)
    elif order == 1:
        ent = np.log(x) + 1.0
    else:
        ent = (-1.0) ** order * math.factorial(order - 2) * x ** (1 - order)
    out = poly - ent
    return float(out) if out.ndim == 0 else out


def f_deriv(spec: ModelSpec, s, order: int):
    """n-th derivative of the reduced free energy f(s) along the x_s ray.

    f^(n)(s) = ((q-1)/q)^n k^(n)((1+(q-1)s)/q) + (q-1)(-1/q)^n k^(n)((1-s)/q),
    plus h*(q-1)/q for n = 1 and the full affine h-term for n = 0.
    """
    if not (0 <= order <= MAX_DERIV_ORDER):
        raise DomainError(f"derivative order must be 0..{MAX_DERIV_ORDER}, got {order}")
    q = spec.q
    # the two coefficients must cancel exactly at order 1 so that f'(0) = 0
    # at h = 0 in floating point; (q-1)*(-1/q)**n rounds differently
    coef_a = ((q - 1.0) / q) ** order
    coef_b = (-1.0) ** order * (q - 1.0) / q ** order
    if isinstance(s, (float, int)):
        s = float(s)
        if s < 0 or s > 1.0 - BOUNDARY_DELTA:
            raise DomainError(f"s must lie in [0, 1 - {BOUNDARY_DELTA}]")
        a = (1.0 + (q - 1.0) * s) / q
        b = (1.0 - s) / q
        val = coef_a * _k_scalar(spec, a, order) + coef_b * _k_scalar(spec, b, order)
        if order == 0:
            return val + spec.h * a
        if order == 1:
            return val + spec.h * (q - 1.0) / q
        return val
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(s > 1.0 - BOUNDARY_DELTA):
        raise DomainError(f"s must lie in [0, 1 - {BOUNDARY_DELTA}]")
    a = (1.0 + (q - 1.0) * s) / q
    b = (1.0 - s) / q
    val = coef_a * k_deriv(spec, a, order) + coef_b * k_deriv(spec, b, order)
    if order == 0:
        val = val + spec.h * a
    elif order == 1:
        val = val + spec.h * (q - 1.0) / q
    return float(val) if np.ndim(val) == 0 else val


def f_derivative_bundle(spec: ModelSpec, s: float) -> SDerivatives:
    """All derivatives f^(0)..f^(6) at one point, as a single value object."""
    values = np.array([f_deriv(spec, s, n) for n in range(MAX_DERIV_ORDER + 1)])
    return SDerivatives(s=float(s), values=values)


def quadratic_form(spec: ModelSpec, s: float, t) -> float:
    """Hessian quadratic form of H at x_s restricted to the zero-sum hyperplane.

    Q(t) = k''((1-s)/q) * sum_{r>=2} t_r^2 + k''((1+(q-1)s)/q) * (sum_{r>=2} t_r)^2.
    Requires sum(t) = 0 within 1e-10.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != (spec.q,):
        raise ShapeError(f"t must have length q={spec.q}")
    if abs(t.sum()) > 1e-10:
        raise DomainError("t is not in the zero-sum hyperplane")
    q = spec.q
    kb = k_deriv(spec, (1.0 - s) / q, 2)
    ka = k_deriv(spec, (1.0 + (q - 1.0) * s) / q, 2)
    tail = t[1:]
    return float(kb * np.sum(tail ** 2) + ka * np.sum(tail) ** 2)


def sigma_ratio(spec: ModelSpec, s: float) -> float:
    """Curvature ratio rho = k''((1+(q-1)s)/q) / k''((1-s)/q)."""
    q = spec.q
    return k_deriv(spec, (1.0 + (q - 1.0) * s) / q, 2) / k_deriv(spec, (1.0 - s) / q, 2)


def sigma_matrix(spec: ModelSpec, s: float) -> np.ndarray:
    """Limiting covariance of sqrt(N) * (Xbar - x_s) at a point with f''(s) < 0.

    Prefactor (-q^2/(q-1) * f''(s))^(-1) times the patterned matrix with first
    row/column (q-1, -1, ..., -1) and lower block (1+(q-2)rho) on the diagonal,
    -rho off it.  Rows sum to zero (the law lives on the simplex); the matrix
    is PSD of rank q-1.
    """
    f2 = f_deriv(spec, s, 2)
    if f2 >= 0:
        raise ClassificationError(
            f"sigma_matrix requires f''(s) < 0 (regular/critical maximizer); got {f2}")
    q = spec.q
    rho = sigma_ratio(spec, s)
    m = np.full((q, q), -rho)
    m[0, :] = -1.0
    m[:, 0] = -1.0
    m[0, 0] = q - 1.0
    idx = np.arange(1, q)
    m[idx, idx] = 1.0 + (q - 2.0) * rho
    pref = 1.0 / (-(q * q / (q - 1.0)) * f2)
    return pref * m
