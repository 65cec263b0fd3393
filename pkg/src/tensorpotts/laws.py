"""Limiting distributions of the magnetization and of the ML estimators.

Scalar laws come in a few families:

* tilted quartic / sextic densities proportional to
  ``exp(x^4/24 * q^4 f''''(s) + c1 x)`` and ``exp(-32/15 x^6 - c1 x)``,
  realized on a truncated grid with Simpson quadrature;
* Gaussians and signed half-Gaussians;
* mixtures with point masses, including masses at +/- infinity (kept as
  explicit mass fields, never numeric sentinels);
* composed estimator laws whose cdf at t evaluates the mean of a t-tilted
  member of the family and feeds it through the zero-tilt cdf;
* Monte-Carlo laws for quadratic forms of rank-deficient Gaussians.

Vector laws are Gaussians supported on the zero-sum hyperplane (rank q-1), or
mixtures of permuted copies at critical points, or the rank-(q-2) covariance
of the V-component at special points.

Every law is immutable after construction: normalization constants and grids
are cached at build time, and evaluation/sampling are pure given a seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson
from scipy.special import ndtr, ndtri

from .errors import ClassificationError, DomainError
from .model import ModelSpec, f_deriv, k_deriv, sigma_matrix, sigma_ratio, u_vector, x_of_s
from .phase import PointClass, PointTag, classify_point

GRID_POINTS = 4097
TAIL_LOG_EPS = math.log(1e-14)


# ---------------------------------------------------------------------------
# scalar laws


class ScalarLaw:
    """Interface: pdf/cdf/mean/var, quantile, seeded sampling, JSON dump."""

    kind = "abstract"

    def pdf(self, x):
        raise NotImplementedError(f"{self.kind} has no density")

    def cdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def var(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, seed: int) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} does not support sampling")

    def quantile(self, u: float) -> float:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


class GridLaw(ScalarLaw):
    """Density proportional to exp(log_density) on [-R, R], Simpson-normalized.

    The truncation radius R is chosen by the caller so the integrand tail is
    below 1e-14 of the mode; ``normalization_error`` records the relative
    Richardson gap between the full grid and its half-resolution subset.
    """

    def __init__(self, kind: str, log_density, radius: float,
                 n_points: int = GRID_POINTS, params: dict | None = None):
        if radius <= 0 or n_points < 5 or n_points % 2 == 0:
            raise DomainError("need radius > 0 and an odd n_points >= 5")
        self.kind = kind
        self._params = dict(params or {})
        x = np.linspace(-radius, radius, n_points)
        ld = np.asarray(log_density(x), dtype=float)
        top = ld.max()
        raw = np.exp(ld - top)
        z_fine = simpson(raw, x=x)
        z_coarse = simpson(raw[::2], x=x[::2])
        self.normalization_error = abs(z_fine / z_coarse - 1.0)
        self.x = x
        self.pdf_values = raw / z_fine
        cdf = cumulative_simpson(self.pdf_values, x=x, initial=0.0)
        self.cdf_values = np.clip(cdf / cdf[-1], 0.0, 1.0)
        self._mean = float(simpson(self.pdf_values * x, x=x))
        self._second = float(simpson(self.pdf_values * x * x, x=x))

    def pdf(self, x):
        return np.interp(x, self.x, self.pdf_values, left=0.0, right=0.0)

    def cdf(self, x):
        return np.interp(x, self.x, self.cdf_values, left=0.0, right=1.0)

    def mean(self) -> float:
        return self._mean

    def var(self) -> float:
        return self._second - self._mean ** 2

    def second_moment(self) -> float:
        return self._second

    def quantile(self, u):
        return np.interp(u, self.cdf_values, self.x)

    def sample(self, n: int, seed: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(seed))
        return np.interp(rng.random(n), self.cdf_values, self.x)

    def params(self) -> dict:
        return dict(self._params)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params(),
                "normalization_error": self.normalization_error,
                "grid_spec": {"lo": float(self.x[0]), "hi": float(self.x[-1]),
                              "n": int(len(self.x))}}


class NormalLaw(ScalarLaw):
    kind = "Normal"

    def __init__(self, mu: float, variance: float):
        if variance <= 0:
            raise DomainError(f"normal variance must be positive, got {variance}")
        self.mu = float(mu)
        self.variance = float(variance)
        self.sigma = math.sqrt(variance)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def mean(self) -> float:
        return self.mu

    def var(self) -> float:
        return self.variance

    def quantile(self, u):
        return self.mu + self.sigma * ndtri(u)

    def sample(self, n, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        return self.mu + self.sigma * rng.standard_normal(n)

    def params(self):
        return {"mean": self.mu, "variance": self.variance}


class HalfNormalLaw(ScalarLaw):
    """|Z| (sign=+1) or -|Z| (sign=-1) for Z ~ N(0, variance)."""

    def __init__(self, sign: int, variance: float):
        if sign not in (-1, 1):
            raise DomainError("sign must be +1 or -1")
        if variance <= 0:
            raise DomainError("variance must be positive")
        self.sign = sign
        self.variance = float(variance)
        self.sigma = math.sqrt(variance)
        self.kind = "HalfNormalPlus" if sign > 0 else "HalfNormalMinus"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.sigma
        base = 2.0 * np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))
        mask = x >= 0 if self.sign > 0 else x <= 0
        return np.where(mask, base, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.sigma
        if self.sign > 0:
            return np.where(x < 0, 0.0, 2.0 * ndtr(z) - 1.0)
        return np.where(x >= 0, 1.0, 2.0 * ndtr(z))

    def mean(self) -> float:
        return self.sign * self.sigma * math.sqrt(2.0 / math.pi)

    def var(self) -> float:
        return self.variance * (1.0 - 2.0 / math.pi)

    def quantile(self, u):
        if self.sign > 0:
            return self.sigma * ndtri(0.5 * (1.0 + u))
        return self.sigma * ndtri(0.5 * u)

    def sample(self, n, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        return self.sign * np.abs(self.sigma * rng.standard_normal(n))

    def params(self):
        return {"sign": self.sign, "variance": self.variance}


@dataclass(frozen=True)
class Atom:
    location: float  # finite
    mass: float


class MixtureLaw(ScalarLaw):
    """Weighted continuous components plus finite atoms and +/-inf masses.

    ``components`` is a list of (weight, ScalarLaw).  Masses at infinity are
    explicit fields: the cdf starts at ``neg_inf_mass`` and tops out at
    ``1 - pos_inf_mass``.
    """

    kind = "AtomMixture"

    def __init__(self, components, atoms=(), neg_inf_mass: float = 0.0,
                 pos_inf_mass: float = 0.0):
        self.components = [(float(w), law) for w, law in components]
        self.atoms = [Atom(float(a.location), float(a.mass)) for a in atoms]
        self.neg_inf_mass = float(neg_inf_mass)
        self.pos_inf_mass = float(pos_inf_mass)
        total = (sum(w for w, _ in self.components) + sum(a.mass for a in self.atoms)
                 + self.neg_inf_mass + self.pos_inf_mass)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"mixture masses sum to {total!r}, not 1")

    @property
    def total_mass(self) -> float:
        return (sum(w for w, _ in self.components) + sum(a.mass for a in self.atoms)
                + self.neg_inf_mass + self.pos_inf_mass)

    def pdf(self, x):
        """Density of the continuous part only; atoms are not included."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        for w, law in self.components:
            out = out + w * law.pdf(x)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.neg_inf_mass, dtype=float)
        for w, law in self.components:
            out = out + w * law.cdf(x)
        for a in self.atoms:
            out = out + a.mass * (x >= a.location)
        return out

    def mean(self) -> float:
        if self.neg_inf_mass > 0 or self.pos_inf_mass > 0:
            raise DomainError("mean undefined: mass at infinity")
        return (sum(w * law.mean() for w, law in self.components)
                + sum(a.mass * a.location for a in self.atoms))

    def quantile(self, u: float) -> float:
        if u <= self.neg_inf_mass:
            return -math.inf
        if u > 1.0 - self.pos_inf_mass:
            return math.inf
        lo, hi = -1.0, 1.0
        while self.cdf(lo) > u - 1e-15 and lo > -1e12:
            lo *= 4
        while self.cdf(hi) < u and hi < 1e12:
            hi *= 4
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def sample(self, n, seed):
        if self.neg_inf_mass > 0 or self.pos_inf_mass > 0:
            raise DomainError("cannot sample a law with mass at infinity")
        rng = np.random.Generator(np.random.Philox(seed))
        weights = [w for w, _ in self.components] + [a.mass for a in self.atoms]
        choice = rng.choice(len(weights), size=n, p=np.asarray(weights) / sum(weights))
        out = np.empty(n)
        for i, (w, law) in enumerate(self.components):
            mask = choice == i
            k = int(mask.sum())
            if k:
                out[mask] = law.sample(k, seed=seed + 1000 + i)
        for j, a in enumerate(self.atoms):
            out[choice == len(self.components) + j] = a.location
        return out

    def params(self):
        return {
            "weights": [w for w, _ in self.components],
            "components": [law.to_json_dict() for _, law in self.components],
            "atoms": [{"location": a.location, "mass": a.mass} for a in self.atoms],
            "neg_inf_mass": self.neg_inf_mass,
            "pos_inf_mass": self.pos_inf_mass,
        }


class ComposedLaw(ScalarLaw):
    """Estimator cdf of the form t -> F0(+/- mu(t)).

    ``outer`` is the zero-tilt cdf of the family; ``tilted_mean(t)`` is the
    mean of the t-tilted member, strictly decreasing in t.  The
    sign-consistent form applies the outer cdf to the negated mean; the
    as-printed form (no negation) is kept as an option.  mu is tabulated once
    on a range wide enough that the outer cdf saturates beyond it.
    """

    kind = "Composed"

    def __init__(self, name: str, outer: GridLaw, tilted_mean, negate_mean: bool = True,
                 grid_points: int = 1025):
        self.name = name
        self.outer = outer
        self.negate_mean = negate_mean
        radius = float(outer.x[-1])
        t_max = 1.0
        while abs(tilted_mean(t_max)) < radius and t_max < 1e9:
            t_max *= 2.0
        # sinh spacing: dense where the cdf moves fastest (small t), still
        # reaching the saturation range
        u = np.linspace(-1.0, 1.0, grid_points)
        stretch = 6.0
        self._t_grid = t_max * np.sinh(stretch * u) / math.sinh(stretch)
        self._mu_grid = np.array([tilted_mean(float(t)) for t in self._t_grid])

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        mu = np.interp(t, self._t_grid, self._mu_grid)
        vals = self.outer.cdf(-mu if self.negate_mean else mu)
        return float(vals) if t.ndim == 0 else vals

    def mean(self) -> float:
        us = np.linspace(0.0005, 0.9995, 999)
        return float(np.mean([self.quantile(u) for u in us]))

    def quantile(self, u: float) -> float:
        lo, hi = float(self._t_grid[0]), float(self._t_grid[-1])
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def sample(self, n, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        return np.array([self.quantile(u) for u in rng.random(n)])

    def params(self):
        return {"name": self.name, "negate_mean": self.negate_mean,
                "outer": self.outer.to_json_dict()}


class AffineOfLaw(ScalarLaw):
    """Law of a * X for X following ``base`` (a nonzero)."""

    def __init__(self, kind: str, base: ScalarLaw, a: float):
        if a == 0:
            raise DomainError("affine scale must be nonzero")
        self.kind = kind
        self.base = base
        self.a = float(a)

    def pdf(self, y):
        return self.base.pdf(np.asarray(y, dtype=float) / self.a) / abs(self.a)

    def cdf(self, y):
        inner = self.base.cdf(np.asarray(y, dtype=float) / self.a)
        return inner if self.a > 0 else 1.0 - inner

    def mean(self):
        return self.a * self.base.mean()

    def var(self):
        return self.a * self.a * self.base.var()

    def quantile(self, u):
        if self.a > 0:
            return self.a * self.base.quantile(u)
        return self.a * self.base.quantile(1.0 - u)

    def sample(self, n, seed):
        return self.a * self.base.sample(n, seed)

    def params(self):
        return {"scale": self.a, "base": self.base.to_json_dict()}


class SquaredGridLaw(ScalarLaw):
    """Law of c * T^2 for T following a (symmetric or not) grid law."""

    def __init__(self, kind: str, base: GridLaw, c: float):
        if c <= 0:
            raise DomainError("scale c must be positive")
        self.kind = kind
        self.base = base
        self.c = float(c)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(np.maximum(t, 0.0) / self.c)
        return np.where(t <= 0, 0.0, self.base.cdf(r) - self.base.cdf(-r))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        r = np.sqrt(np.maximum(t, 1e-300) / self.c)
        val = (self.base.pdf(r) + self.base.pdf(-r)) / (2.0 * np.sqrt(np.maximum(t, 1e-300) * self.c))
        return np.where(t <= 0, 0.0, val)

    def mean(self) -> float:
        return self.c * self.base.second_moment()

    def quantile(self, u):
        lo, hi = 0.0, self.c * self.base.x[-1] ** 2
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def sample(self, n, seed):
        return self.c * self.base.sample(n, seed) ** 2

    def params(self):
        return {"scale": self.c, "base": self.base.to_json_dict()}


class MonteCarloLaw(ScalarLaw):
    """Law represented by a frozen Monte-Carlo sample (for W'W functionals)."""

    def __init__(self, kind: str, draws: np.ndarray, seed: int):
        self.kind = kind
        self.draws = np.sort(np.asarray(draws, dtype=float))
        self.seed = seed

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.draws, x, side="right") / len(self.draws)

    def mean(self) -> float:
        return float(self.draws.mean())

    def var(self) -> float:
        return float(self.draws.var())

    def quantile(self, u):
        return float(np.quantile(self.draws, u))

    def sample(self, n, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        return rng.choice(self.draws, size=n, replace=True)

    def threshold_prob(self, c: float):
        """(P(X <= c), Monte-Carlo standard error of that probability)."""
        p = float(np.mean(self.draws <= c))
        se = math.sqrt(max(p * (1 - p), 1e-12) / len(self.draws))
        return p, se

    def params(self):
        return {"n_draws": len(self.draws), "seed": self.seed}


# ---------------------------------------------------------------------------
# vector laws


class GaussianSimplex:
    """Gaussian on the zero-sum hyperplane: kernel contains the ones vector."""

    kind = "GaussianSimplex"

    def __init__(self, mean: np.ndarray, cov: np.ndarray):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        w, v = np.linalg.eigh(self.cov)
        if w.min() < -1e-10:
            raise DomainError(f"covariance has eigenvalue {w.min()}, not PSD")
        self._eigvals = np.clip(w, 0.0, None)
        self._eigvecs = v

    def rank(self, tol: float = 1e-10) -> int:
        return int(np.sum(self._eigvals > tol * max(self._eigvals.max(), 1.0)))

    def sample(self, n: int, seed: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(seed))
        z = rng.standard_normal((n, len(self.mean)))
        return self.mean + (z * np.sqrt(self._eigvals)) @ self._eigvecs.T

    def project(self, direction) -> NormalLaw:
        v = np.asarray(direction, dtype=float)
        return NormalLaw(float(v @ self.mean), float(v @ self.cov @ v))

    def to_json_dict(self):
        return {"kind": self.kind, "params": {"mean": self.mean.tolist(),
                                              "cov": self.cov.tolist()}}


class MixtureGaussianSimplex:
    """Mixture of permuted simplex Gaussians (the critical-point limit)."""

    kind = "MixtureGaussianSimplex"

    def __init__(self, weights, components):
        self.weights = np.asarray(weights, dtype=float)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise DomainError("mixture weights must sum to 1")
        self.components = list(components)

    def sample(self, n: int, seed: int) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(seed))
        choice = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, len(self.components[0].mean)))
        for i, comp in enumerate(self.components):
            mask = choice == i
            if mask.any():
                out[mask] = comp.sample(int(mask.sum()), seed=seed + 7919 * (i + 1))
        return out

    def project(self, direction) -> MixtureLaw:
        comps = [(w, comp.project(direction)) for w, comp in
                 zip(self.weights, self.components)]
        return MixtureLaw(comps)

    def to_json_dict(self):
        return {"kind": self.kind,
                "params": {"weights": self.weights.tolist(),
                           "components": [c.to_json_dict() for c in self.components]}}


@dataclass(frozen=True)
class ProductTV:
    """Independent product of the scalar T limit and the Gaussian V limit."""

    t_law: ScalarLaw
    v_law: GaussianSimplex
    kind: str = "ProductTV"

    def sample(self, n: int, seed: int):
        return self.t_law.sample(n, seed), self.v_law.sample(n, seed + 1)


# ---------------------------------------------------------------------------
# constructors


def _tilt_radius(coef_high: float, degree: int, coef1: float) -> float:
    """Truncation radius where the exponent falls TAIL_LOG_EPS below the mode."""
    r = (-TAIL_LOG_EPS / -coef_high) ** (1.0 / degree)
    for _ in range(12):
        r = ((-TAIL_LOG_EPS + abs(coef1) * r) / -coef_high) ** (1.0 / degree)
    return r


def _maximizer_info(spec: ModelSpec, point_class: PointClass):
    s = point_class.witness.s_values[0]
    m = x_of_s(spec.q, s)
    return s, m


def quartic_law(spec: ModelSpec, beta_bar: float = 0.0, h_bar: float = 0.0,
                point_class: PointClass | None = None) -> GridLaw:
    """Tilted quartic limit of T_N at a type-I special point.

    Density proportional to exp(x^4/24 q^4 f''''(s) + c1 x) with
    c1 = beta_bar p <m^{p-1}, u> + h_bar (1-q).
    """
    if point_class is None:
        point_class = classify_point(spec)
    if point_class.tag is not PointTag.SPECIAL_TYPE_I:
        raise ClassificationError(f"quartic law requires a type-I special point, got {point_class.tag}")
    s, m = _maximizer_info(spec, point_class)
    f4 = f_deriv(spec, s, 4)
    if f4 >= 0:
        raise ClassificationError(f"f'''' must be negative, got {f4}")
    q = spec.q
    coef4 = q ** 4 * f4 / 24.0
    coef1 = beta_bar * spec.p * float(m ** (spec.p - 1) @ u_vector(q)) + h_bar * (1 - q)
    radius = _tilt_radius(coef4, 4, coef1)
    return GridLaw("QuarticTilt", lambda x: coef4 * x ** 4 + coef1 * x, radius,
                   params={"coef4": coef4, "coef1": coef1,
                           "beta_bar": beta_bar, "h_bar": h_bar})


def sextic_law(h_bar: float = 0.0) -> GridLaw:
    """Limit of T_N at the type-II special point: exp(-32/15 x^6 - h_bar x)."""
    coef6 = -32.0 / 15.0
    coef1 = -h_bar
    radius = _tilt_radius(coef6, 6, coef1)
    return GridLaw("SexticTilt", lambda x: coef6 * x ** 6 + coef1 * x, radius,
                   params={"coef6": coef6, "coef1": coef1, "h_bar": h_bar})


def gaussian_limit_regular(spec: ModelSpec, beta_bar: float = 0.0,
                           h_bar: float = 0.0,
                           point_class: PointClass | None = None) -> GaussianSimplex:
    """sqrt(N) Gaussian limit at a regular point, with the perturbation drift
    Sigma (beta_bar p m^{p-1} + h_bar e1)."""
    if point_class is None:
        point_class = classify_point(spec)
    if point_class.tag is not PointTag.REGULAR:
        raise ClassificationError(f"gaussian limit requires a regular point, got {point_class.tag}")
    s, m = _maximizer_info(spec, point_class)
    cov = sigma_matrix(spec, s)
    drift = beta_bar * spec.p * m ** (spec.p - 1)
    drift[0] += h_bar
    return GaussianSimplex(mean=cov @ drift, cov=cov)


def _s_of_maximizer(q: int, m: np.ndarray) -> float:
    # permutations share the minimum coordinate (1-s)/q
    return 1.0 - q * float(np.min(m))


def _tau(spec: ModelSpec, m: np.ndarray) -> float:
    """tau weight of a maximizer, with the positive radicand -f''(s)^{-1}."""
    s = _s_of_maximizer(spec.q, m)
    f2 = f_deriv(spec, s, 2)
    kb = k_deriv(spec, (1.0 - s) / spec.q, 2)
    rad = (-1.0 / f2) * (-kb) ** (2 - spec.q) / float(np.prod(m))
    if rad <= 0:
        raise ClassificationError(f"tau radicand is not positive at s={s}: {rad}")
    return math.sqrt(rad)


def mixture_weights(spec: ModelSpec, point_class: PointClass | None = None,
                    tie_tol: float | None = None) -> np.ndarray:
    """Basin weights p_k = tau(m_k) / sum tau(m_i) at a critical point."""
    if point_class is None:
        point_class = (classify_point(spec, tie_tol=tie_tol) if tie_tol is not None
                       else classify_point(spec))
    if point_class.tag not in (PointTag.STRONGLY_CRITICAL, PointTag.WEAKLY_CRITICAL):
        raise ClassificationError(f"mixture weights require a critical point, got {point_class.tag}")
    taus = np.array([_tau(spec, m) for m in point_class.witness.vectors])
    return taus / taus.sum()


def critical_mixture_law(spec: ModelSpec, beta_bar: float = 0.0, h_bar: float = 0.0,
                         point_class: PointClass | None = None) -> MixtureGaussianSimplex:
    """Magnetization limit at a critical point: tau-weighted permuted Gaussians."""
    if point_class is None:
        point_class = classify_point(spec)
    weights = mixture_weights(spec, point_class)
    comps = []
    for m in point_class.witness.vectors:
        s = _s_of_maximizer(spec.q, m)
        cov = sigma_matrix(spec, s)
        base = x_of_s(spec.q, s)
        # permutation matrix P with m = P x_s (ties matched greedily)
        P = np.zeros((spec.q, spec.q))
        used = set()
        for i in range(spec.q):
            for jj in range(spec.q):
                if jj not in used and abs(m[i] - base[jj]) < 1e-12:
                    P[i, jj] = 1.0
                    used.add(jj)
                    break
        pcov = P @ cov @ P.T
        drift = beta_bar * spec.p * m ** (spec.p - 1)
        drift[0] += h_bar
        comps.append(GaussianSimplex(mean=pcov @ drift, cov=pcov))
    return MixtureGaussianSimplex(weights, comps)


def v_limit_covariance(spec: ModelSpec,
                       point_class: PointClass | None = None) -> GaussianSimplex:
    """Rank-(q-2) Gaussian limit of V_N at a type-I special point."""
    if point_class is None:
        point_class = classify_point(spec)
    if point_class.tag is not PointTag.SPECIAL_TYPE_I:
        raise ClassificationError(f"V limit requires a type-I special point, got {point_class.tag}")
    s, _ = _maximizer_info(spec, point_class)
    q = spec.q
    kb = k_deriv(spec, (1.0 - s) / q, 2)
    cov = np.zeros((q, q))
    if q > 2:
        block = np.full((q - 1, q - 1), -1.0)
        np.fill_diagonal(block, q - 2.0)
        cov[1:, 1:] = block / (-(q - 1.0) * kb)
    return GaussianSimplex(mean=np.zeros(q), cov=cov)


def product_tv_law(spec: ModelSpec, beta_bar: float = 0.0, h_bar: float = 0.0,
                   point_class: PointClass | None = None) -> ProductTV:
    """Joint (T, V) limit at a type-I special point; T and V are independent."""
    t = quartic_law(spec, beta_bar, h_bar, point_class)
    v = v_limit_covariance(spec, point_class)
    return ProductTV(t_law=t, v_law=v)


def _is_axis_transition(spec: ModelSpec, point_class: PointClass) -> bool:
    """True at (beta_c, 0): strongly critical with s = 0 among the tied maximizers."""
    return spec.h == 0.0 and min(point_class.witness.s_values) < 1e-9


def _weight_of_uniform(spec: ModelSpec, point_class: PointClass) -> float:
    weights = mixture_weights(spec, point_class)
    for w, m in zip(weights, point_class.witness.vectors):
        if np.ptp(m) < 1e-12:
            return float(w)
    raise ClassificationError("no uniform maximizer in the witness set")


def hhat_limit(spec: ModelSpec, point_class: PointClass | None = None,
               stated_form: bool = False) -> ScalarLaw:
    """Limiting law of the rescaled ML field estimate, per phase class.

    Regular: N(0, -q^2/(q-1)^2 f''(s)).  Special: the composed laws G1/G2
    (sign-consistent by default; ``stated_form`` keeps the un-negated mean).
    Critical: half-normal mixtures with an atom at zero.
    """
    if point_class is None:
        point_class = classify_point(spec)
    q = spec.q
    tag = point_class.tag

    if tag is PointTag.REGULAR:
        s = point_class.witness.s_values[0]
        return NormalLaw(0.0, -(q * q / (q - 1.0) ** 2) * f_deriv(spec, s, 2))

    if tag is PointTag.SPECIAL_TYPE_I:
        outer = quartic_law(spec, 0.0, 0.0, point_class)

        def mu(t: float) -> float:
            return quartic_law(spec, 0.0, t, point_class).mean()

        return ComposedLaw("G1", outer, mu, negate_mean=not stated_form)

    if tag is PointTag.SPECIAL_TYPE_II:
        outer = sextic_law(0.0)

        def mu(t: float) -> float:
            return sextic_law(t).mean()

        return ComposedLaw("G2", outer, mu, negate_mean=not stated_form)

    def var_plain(s):
        return -(q * q / (q - 1.0) ** 2) * f_deriv(spec, s, 2)

    def var_corrected(s):
        rho = sigma_ratio(spec, s)
        return -(q * q) * f_deriv(spec, s, 2) / ((q - 1.0) * (1.0 + (q - 2.0) * rho))

    if tag is PointTag.WEAKLY_CRITICAL:
        s = point_class.witness.s_values[0]
        p_q = 1.0 / q  # permutation symmetry at h = 0
        return MixtureLaw(
            components=[((1.0 - p_q) / 2.0, HalfNormalLaw(-1, var_corrected(s))),
                        (p_q / 2.0, HalfNormalLaw(+1, var_plain(s)))],
            atoms=[Atom(0.0, 0.5)])

    # strongly critical
    if _is_axis_transition(spec, point_class):
        s = max(point_class.witness.s_values)
        p_q = _weight_of_uniform(spec, point_class)
        return MixtureLaw(
            components=[((1.0 - p_q) * (q - 1.0) / (2.0 * q), HalfNormalLaw(-1, var_corrected(s))),
                        ((1.0 - p_q) / (2.0 * q), HalfNormalLaw(+1, var_plain(s)))],
            atoms=[Atom(0.0, (1.0 + p_q) / 2.0)])

    s1, s2 = point_class.witness.s_values
    weights = mixture_weights(spec, point_class)
    # maximizers in ascending order of first coordinates: x_{s1} before x_{s2}
    p1 = float(weights[0])
    return MixtureLaw(
        components=[(p1 / 2.0, HalfNormalLaw(-1, var_plain(s1))),
                    ((1.0 - p1) / 2.0, HalfNormalLaw(+1, var_plain(s2)))],
        atoms=[Atom(0.0, 0.5)])


def _beta_variance(spec: ModelSpec, s: float, m: np.ndarray) -> float:
    q, p = spec.q, spec.p
    gap = float(np.max(m) ** (p - 1) - np.min(m) ** (p - 1))
    return -(q * q) * f_deriv(spec, s, 2) / (p * p * (q - 1.0) ** 2) / gap ** 2


def gamma1_weight(spec: ModelSpec, n_draws: int = 1_000_000, seed: int = 20240901):
    """gamma_1 = P(W'W <= (1-q)/k''(1/q)) with W ~ N(0, Sigma at s=0), by
    Monte Carlo (the rank-deficient quadratic form has no convenient cdf).

    Returns (estimate, standard error)."""
    q = spec.q
    cov = sigma_matrix(spec, 0.0)
    law = GaussianSimplex(mean=np.zeros(q), cov=cov)
    w = law.sample(n_draws, seed)
    stat = np.sum(w * w, axis=1)
    thresh = (1.0 - q) / k_deriv(spec, 1.0 / q, 2)
    gamma = float(np.mean(stat <= thresh))
    se = math.sqrt(max(gamma * (1.0 - gamma), 1e-12) / n_draws)
    return gamma, se


def bhat_limit(spec: ModelSpec, point_class: PointClass | None = None,
               stated_form: bool = False, mc_seed: int = 20240901) -> ScalarLaw:
    """Limiting law of the rescaled ML interaction estimate, per phase class.

    At points where the maximizer is uniform the estimate is inconsistent and
    the law degenerates to masses at +/- infinity (gamma_1, alpha, gamma_2
    weights); elsewhere it is Gaussian, a composed law L1, or a half-normal
    mixture over the L^p-ordered maximizers.
    """
    if point_class is None:
        point_class = classify_point(spec)
    q, p = spec.q, spec.p
    tag = point_class.tag

    if tag is PointTag.REGULAR:
        s = point_class.witness.s_values[0]
        if spec.h > 0:
            m = point_class.witness.vectors[0]
            return NormalLaw(0.0, _beta_variance(spec, s, m))
        gamma, se = gamma1_weight(spec, seed=mc_seed)
        law = MixtureLaw(components=[], atoms=[], neg_inf_mass=gamma,
                         pos_inf_mass=1.0 - gamma)
        law.gamma1 = gamma
        law.gamma1_se = se
        return law

    if tag is PointTag.SPECIAL_TYPE_I:
        if (p, q) in ((2, 2), (3, 2)):
            base = quartic_law(spec, 0.0, 0.0, point_class)
            b = math.sqrt(base.second_moment())
            alpha = float(base.cdf(b) - base.cdf(-b))
            law = MixtureLaw(components=[], atoms=[], neg_inf_mass=alpha,
                             pos_inf_mass=1.0 - alpha)
            law.alpha = alpha
            return law
        outer = quartic_law(spec, 0.0, 0.0, point_class)

        def mu(t: float) -> float:
            return quartic_law(spec, t, 0.0, point_class).mean()

        return ComposedLaw("L1", outer, mu, negate_mean=True)

    if tag is PointTag.SPECIAL_TYPE_II:
        base = sextic_law(0.0)
        b = math.sqrt(base.second_moment())
        gamma2 = float(base.cdf(b) - base.cdf(-b))
        law = MixtureLaw(components=[], atoms=[], neg_inf_mass=gamma2,
                         pos_inf_mass=1.0 - gamma2)
        law.gamma2 = gamma2
        return law

    if tag is PointTag.WEAKLY_CRITICAL:
        s = point_class.witness.s_values[0]
        m = x_of_s(q, s)
        return NormalLaw(0.0, _beta_variance(spec, s, m))

    # strongly critical, maximizers in ascending order of L^p norms
    if _is_axis_transition(spec, point_class):
        s = max(point_class.witness.s_values)
        m = x_of_s(q, s)
        p1 = _weight_of_uniform(spec, point_class)
        gamma, se = gamma1_weight(spec, seed=mc_seed)
        law = MixtureLaw(
            components=[((1.0 - p1) / 2.0, HalfNormalLaw(+1, _beta_variance(spec, s, m)))],
            atoms=[Atom(0.0, (1.0 + p1) / 2.0 - p1 * gamma)],
            neg_inf_mass=p1 * gamma)
        law.gamma1 = gamma
        law.gamma1_se = se
        return law

    s1, s2 = point_class.witness.s_values
    weights = mixture_weights(spec, point_class)
    p1 = float(weights[0])  # lower L^p norm = lower s
    m1, m2 = x_of_s(q, s1), x_of_s(q, s2)
    return MixtureLaw(
        components=[(p1 / 2.0, HalfNormalLaw(-1, _beta_variance(spec, s1, m1))),
                    ((1.0 - p1) / 2.0, HalfNormalLaw(+1, _beta_variance(spec, s2, m2)))],
        atoms=[Atom(0.0, 0.5)])


def norm_p_limit(spec: ModelSpec, point_class: PointClass | None = None,
                 beta_bar: float = 0.0, mc_seed: int = 20240902,
                 mc_draws: int = 200_000) -> ScalarLaw:
    """Limit of the rescaled p-norm statistic under a beta perturbation.

    Regular off-uniform: Gaussian with mean beta_bar times its variance.
    Regular uniform: the generalized chi-square p(p-1)/(2 q^{p-2}) W'W.
    Type I: a scaled quartic (or its square at (2,2)/(3,2)); type II: 3 F0^2.
    """
    if point_class is None:
        point_class = classify_point(spec)
    q, p = spec.q, spec.p
    tag = point_class.tag

    if tag in (PointTag.REGULAR, PointTag.WEAKLY_CRITICAL, PointTag.STRONGLY_CRITICAL):
        # at critical points this is the law conditioned on the top basin
        s = max(point_class.witness.s_values)
        if s > 1e-9:
            m = x_of_s(q, s)
            gap = float(np.max(m) ** (p - 1) - np.min(m) ** (p - 1))
            variance = -(p * p * (q - 1.0) ** 2 / (q * q)) * gap ** 2 / f_deriv(spec, s, 2)
            return NormalLaw(beta_bar * variance, variance)
        cov = sigma_matrix(spec, 0.0)
        w = GaussianSimplex(np.zeros(q), cov).sample(mc_draws, mc_seed)
        stat = (p * (p - 1.0) / (2.0 * q ** (p - 2))) * np.sum(w * w, axis=1)
        return MonteCarloLaw("GeneralizedChiSq", stat, mc_seed)

    if tag is PointTag.SPECIAL_TYPE_I:
        base = quartic_law(spec, beta_bar, 0.0, point_class)
        if (p, q) in ((2, 2), (3, 2)):
            c = p * (p - 1.0) / 2 ** (p - 2)
            return SquaredGridLaw("QuarticSquared", base, c)
        _, m = _maximizer_info(spec, point_class)
        scale = -p * (q - 1.0) * float(m[0] ** (p - 1) - m[1] ** (p - 1))
        return AffineOfLaw("QuarticTilt", base, scale)

    if tag is PointTag.SPECIAL_TYPE_II:
        return SquaredGridLaw("SexticSquared", sextic_law(0.0), 3.0)

    raise ClassificationError(f"unsupported class {tag}")


def ks_distance(samples, law: ScalarLaw) -> float:
    """sup |empirical cdf - law cdf| over the sample points."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    if n == 0:
        raise DomainError("need at least one sample")
    f = np.asarray(law.cdf(xs), dtype=float)
    upper = np.abs(f - np.arange(1, n + 1) / n)
    lower = np.abs(f - np.arange(n) / n)
    return float(np.max(np.maximum(upper, lower)))


def density_table(law: ScalarLaw, n: int = 512):
    """(x, pdf, cdf) arrays for plotting overlays."""
    if isinstance(law, GridLaw):
        x = law.x
        return x, law.pdf(x), law.cdf(x)
    if isinstance(law, NormalLaw):
        x = np.linspace(law.mu - 6 * law.sigma, law.mu + 6 * law.sigma, n)
        return x, law.pdf(x), law.cdf(x)
    if isinstance(law, (MixtureLaw, HalfNormalLaw, SquaredGridLaw)):
        lo, hi = law.quantile(1e-6), law.quantile(1.0 - 1e-6)
        pad = 0.05 * (hi - lo + 1e-12)
        x = np.linspace(lo - pad, hi + pad, n)
        return x, law.pdf(x), law.cdf(x)
    raise DomainError(f"no density table for kind {law.kind}")


def density_table_csv(law: ScalarLaw, path) -> None:
    x, pdf, cdf = density_table(law)
    with open(path, "w") as fh:
        fh.write("x,pdf,cdf\n")
        for xi, pi, ci in zip(x, pdf, cdf):
            fh.write("%.17g,%.17g,%.17g\n" % (xi, pi, ci))


def law_to_json(law) -> str:
    return json.dumps(law.to_json_dict())
