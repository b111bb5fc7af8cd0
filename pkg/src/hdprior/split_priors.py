"""Per-split prior machinery.

The PC prior on a dual split's weight is an exponential distribution on the
Kullback-Leibler distance from the base configuration, evaluated through a
whitening + eigendecomposition route: with both side covariances reduced to
a jointly nonsingular observation subset, find P with P (S1 + S2) P' = I,
diagonalize the transformed first side, and the distance at any weight is a
sum over eigenvalue ratios.  Three regimes:

* case 1 - base at an endpoint, preferred side nonsingular: truncated
  exponential on the distance to the far endpoint.
* case 2 - base at an endpoint, preferred side singular: the scaled-distance
  limit, where the distance degenerates to sqrt(weight) and the density has
  the closed form lam * exp(-lam sqrt(w)) / (2 sqrt(w) (1 - exp(-lam))),
  including the proper lam -> 0 limit 1 / (2 sqrt(w)).
* case 3 - interior base: one rate, half the mass on each side, each side
  truncated by its own endpoint distance.

Also here: the symmetric Dirichlet split with quantile calibration of its
concentration, density tables, inverse-CDF sampling, and the conversion of a
multi-way split with an equal-attribution base into a chain of dual splits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import numerics
from .errors import CalibrationError, ValidationError
from .numerics import RandomSource
from .tree import DecompositionTree, Split, SplitPriorSpec, validate as validate_tree

__all__ = [
    "DensityTable",
    "DirichletSplitPrior",
    "DistanceKernel",
    "PCSplitPrior",
    "build_pc_split",
    "calibrate_interval",
    "calibrate_median",
    "dirichlet_calibrate",
    "dirichlet_density",
    "dirichlet_log_density",
    "dirichlet_sample",
    "expand_multisplit",
    "pc_density",
    "sample_split",
    "tabulate",
    "tabulate_dirichlet_marginal",
    "weight_distance",
    "weight_distance_derivative",
    "with_expanded_multisplits",
]

_SNAP = numerics.NULL_SPACE_RTOL  # eigenvalue snap-to-{0,1} tolerance
_TAIL = 1e-10  # omitted tail mass when a segment's endpoint distance is infinite
LOG3 = math.log(3.0)


# ---------------------------------------------------------------------------
# distance kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceKernel:
    """Eigen data for the distance between the two sides of a dual split.

    ``mu`` are the eigenvalues (in [0, 1]) of the whitened x = 1 side; the
    mixture covariance at weight x has transformed eigenvalues
    h_i(x) = x mu_i + (1 - x)(1 - mu_i).  ``subset`` records which
    observation indices were kept to make the side sum nonsingular.
    """

    mu: np.ndarray
    base: float
    subset: np.ndarray
    dim: int

    def h(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.outer(self.mu, x) + np.outer(1.0 - self.mu, 1.0 - x)

    def h_base(self) -> np.ndarray:
        return self.mu * self.base + (1.0 - self.mu) * (1.0 - self.base)

    def distance(self, x) -> np.ndarray | float:
        """d(x; base): sqrt of sum of r - 1 - log r over eigendirections."""
        scalar = np.isscalar(x)
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        h0 = self.h_base()
        if (h0 <= 0.0).any():
            raise ValidationError(
                "distance base is singular; both side matrices vanish there"
            )
        hx = self.h(xv)
        with np.errstate(divide="ignore"):
            r = hx / h0[:, None]
            terms = np.where(r > 0.0, r - 1.0 - np.log(np.maximum(r, 1e-320)), np.inf)
        d2 = terms.sum(axis=0)
        out = np.sqrt(np.maximum(d2, 0.0))
        return float(out[0]) if scalar else out

    def derivative(self, x) -> np.ndarray | float:
        """d'(x); at x = base the removable singularity is replaced by the
        (positive) limit sqrt(sum c_i^2 / 2)."""
        scalar = np.isscalar(x)
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        h0 = self.h_base()
        if (h0 <= 0.0).any():
            raise ValidationError("distance base is singular")
        c = (2.0 * self.mu - 1.0) / h0
        if np.abs(c).max(initial=0.0) < 1e-12:
            raise ValidationError(
                "the two sides are identical: the distance is identically zero"
            )
        hx = self.h(xv)
        d = self.distance(xv)
        limit = math.sqrt(float((c * c).sum()) / 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            num = (c[:, None] * (1.0 - (h0[:, None] / hx))).sum(axis=0)
            out = num / (2.0 * d)
        at_base = d == 0.0
        out = np.where(at_base, limit, out)
        out = np.where(np.isinf(d), np.where(xv >= self.base, np.inf, -np.inf), out)
        if scalar:
            return float(out[0])
        return out


def make_kernel(cov_at_1: np.ndarray, cov_at_0: np.ndarray, base: float) -> DistanceKernel:
    """Whiten the side sum (restricted to a jointly nonsingular observation
    subset) and diagonalize the x = 1 side."""
    a = numerics.symmetrize(cov_at_1)
    b = numerics.symmetrize(cov_at_0)
    if a.shape != b.shape:
        raise ValidationError("side covariances must share a shape")
    total = a + b
    subset = numerics.nonsingular_subset(total)
    if subset.size == 0:
        raise ValidationError("both side covariances are numerically zero")
    if subset.size < total.shape[0]:
        a = a[np.ix_(subset, subset)]
        total = total[np.ix_(subset, subset)]
    eig = numerics.eigen_sym(total)
    floor = 1e-13 * eig.values.max()
    vals = np.maximum(eig.values, floor)
    p = (eig.vectors / np.sqrt(vals)).T
    s1 = p @ a @ p.T
    mu = numerics.eigen_sym(0.5 * (s1 + s1.T)).values
    mu = np.clip(mu, 0.0, 1.0)
    mu[mu < _SNAP] = 0.0
    mu[mu > 1.0 - _SNAP] = 1.0
    return DistanceKernel(mu=mu, base=float(base), subset=subset, dim=int(subset.size))


def weight_distance(omega, omega0: float, cov1: np.ndarray, cov2: np.ndarray):
    """Distance d(omega) from the base mixture (1-omega0) cov1 + omega0 cov2
    to the mixture at omega, via the eigen route.

    Follows the convention that omega multiplies cov2.  Returns +inf where
    the mixture is singular (endpoints with a singular side); raises when the
    base mixture itself is singular.
    """
    kern = make_kernel(cov_at_1=cov2, cov_at_0=cov1, base=omega0)
    return kern.distance(omega)


def weight_distance_derivative(omega, omega0: float, cov1: np.ndarray, cov2: np.ndarray):
    """Analytic d'(omega) matching weight_distance."""
    kern = make_kernel(cov_at_1=cov2, cov_at_0=cov1, base=omega0)
    return kern.derivative(omega)


# ---------------------------------------------------------------------------
# PC split prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PCSplitPrior:
    """Calibrated PC prior on the first child's weight of a dual split.

    ``base`` and all public coordinates refer to the first child's weight;
    when the base prefers the first child (base = 1) the internal coordinate
    is flipped so the machinery always measures distance away from a base at
    zero (case 3 keeps the raw coordinate).  ``rate`` may be 0.0 only in the
    singular case-2 limit.
    """

    base: float
    rate: float
    case: int
    flip: bool
    kernel: DistanceKernel | None
    rank_deficiency: int
    subset: np.ndarray = field(repr=False)
    d_left: float = math.inf  # case 3: distance at x = 0
    d_right: float = math.inf  # case 1/2/3: distance at x = 1

    # -- coordinate helpers -------------------------------------------------

    def _to_x(self, omega):
        w = np.asarray(omega, dtype=float)
        if (w < -1e-12).any() or (w > 1.0 + 1e-12).any():
            raise ValidationError("weights must lie in [0, 1]")
        w = np.clip(w, 0.0, 1.0)
        return 1.0 - w if self.flip else w

    def _dist_x(self, x) -> np.ndarray:
        if self.case == 2:
            return np.sqrt(np.asarray(x, dtype=float))
        return np.atleast_1d(self.kernel.distance(np.atleast_1d(x)))

    def _deriv_x(self, x) -> np.ndarray:
        if self.case == 2:
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore"):
                return np.where(x > 0.0, 0.5 / np.sqrt(np.maximum(x, 1e-320)), np.inf)
        return np.atleast_1d(self.kernel.derivative(np.atleast_1d(x)))

    # -- public surface -----------------------------------------------------

    def distance(self, omega):
        """Distance from the base model at the given first-child weight."""
        scalar = np.isscalar(omega)
        out = self._dist_x(np.atleast_1d(self._to_x(omega)))
        return float(out[0]) if scalar else out

    def density(self, omega):
        scalar = np.isscalar(omega)
        x = np.atleast_1d(self._to_x(omega))
        lam = self.rate
        if self.case == 2:
            s = np.sqrt(x)
            with np.errstate(divide="ignore"):
                inv = np.where(s > 0.0, 0.5 / np.maximum(s, 1e-320), np.inf)
            if lam == 0.0:
                out = inv
            else:
                z = -math.expm1(-lam)
                out = lam * np.exp(-lam * s) * inv / z
        elif self.case == 1:
            d = self._dist_x(x)
            dp = self._deriv_x(x)
            z = 1.0 if math.isinf(self.d_right) else -math.expm1(-lam * self.d_right)
            with np.errstate(invalid="ignore"):
                out = lam * np.abs(dp) * np.exp(-lam * d) / z
            out = np.where(np.isinf(d), np.inf, out)
        else:
            d = self._dist_x(x)
            dp = np.abs(self._deriv_x(x))
            zl = 1.0 if math.isinf(self.d_left) else -math.expm1(-lam * self.d_left)
            zr = 1.0 if math.isinf(self.d_right) else -math.expm1(-lam * self.d_right)
            z = np.where(x < self.base, 2.0 * zl, 2.0 * zr)
            with np.errstate(invalid="ignore"):
                out = lam * dp * np.exp(-lam * d) / z
            out = np.where(np.isinf(d), np.inf, out)
        return float(out[0]) if scalar else out

    def log_density(self, omega):
        scalar = np.isscalar(omega)
        dens = np.atleast_1d(self.density(omega))
        with np.errstate(divide="ignore"):
            out = np.log(dens)
        return float(out[0]) if scalar else out

    def cdf(self, omega):
        scalar = np.isscalar(omega)
        x = np.atleast_1d(self._to_x(omega))
        fx = self._cdf_x(x)
        out = 1.0 - fx if self.flip else fx
        return float(out[0]) if scalar else out

    def _cdf_x(self, x: np.ndarray) -> np.ndarray:
        lam = self.rate
        if self.case == 2:
            s = np.sqrt(x)
            if lam == 0.0:
                return s
            return np.expm1(-lam * s) / np.expm1(-lam)
        d = self._dist_x(x)
        if self.case == 1:
            z = 1.0 if math.isinf(self.d_right) else -math.expm1(-lam * self.d_right)
            return -np.expm1(-lam * np.minimum(d, 1e308)) / z
        el = 0.0 if math.isinf(self.d_left) else math.exp(-lam * self.d_left)
        er = 0.0 if math.isinf(self.d_right) else math.exp(-lam * self.d_right)
        ed = np.exp(-lam * np.minimum(d, 1e308))
        left = 0.5 * (ed - el) / (1.0 - el)
        right = 0.5 + 0.5 * (1.0 - ed) / (1.0 - er)
        return np.where(x < self.base, left, np.where(x > self.base, right, 0.5))

    def ppf(self, u):
        """Inverse CDF; u = 0.5 returns the median exactly."""
        scalar = np.isscalar(u)
        uv = np.atleast_1d(np.asarray(u, dtype=float))
        if (uv < 0.0).any() or (uv > 1.0).any():
            raise ValidationError("quantile levels must lie in [0, 1]")
        ux = 1.0 - uv if self.flip else uv
        x = self._ppf_x(ux)
        out = 1.0 - x if self.flip else x
        return float(out[0]) if scalar else out

    def _ppf_x(self, u: np.ndarray) -> np.ndarray:
        lam = self.rate
        if self.case == 2:
            if lam == 0.0:
                return u * u
            s = -np.log1p(u * np.expm1(-lam)) / lam
            return s * s
        if self.case == 1:
            z = 1.0 if math.isinf(self.d_right) else -math.expm1(-lam * self.d_right)
            s = -np.log1p(-u * z) / lam
            return self._invert_distance(s, lower=self.base, upper=1.0)
        el = 0.0 if math.isinf(self.d_left) else math.exp(-lam * self.d_left)
        er = 0.0 if math.isinf(self.d_right) else math.exp(-lam * self.d_right)
        out = np.empty_like(u)
        left = u <= 0.5
        if left.any():
            s = -np.log(el + 2.0 * u[left] * (1.0 - el)) / lam
            out[left] = self._invert_distance(s, lower=self.base, upper=0.0)
        if (~left).any():
            s = -np.log1p(-(2.0 * u[~left] - 1.0) * (1.0 - er)) / lam
            out[~left] = self._invert_distance(s, lower=self.base, upper=1.0)
        return out

    def _invert_distance(self, s: np.ndarray, lower: float, upper: float) -> np.ndarray:
        """Solve d(x) = s on the monotone segment from ``lower`` (d = 0)
        toward ``upper`` by bisection."""
        if self.case == 2:
            return np.clip(s * s, 0.0, 1.0)
        lo = np.full_like(s, lower)
        hi = np.full_like(s, upper)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self._dist_x(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        end_d = self.d_right if upper > lower else self.d_left
        if not math.isinf(end_d):
            out = np.where(s >= end_d, upper, out)
        return out

    def sample(self, rng: RandomSource, n: int) -> np.ndarray:
        """Inverse-CDF draws of the first-child weight."""
        if n < 0:
            raise ValidationError("sample size must be nonnegative")
        return np.atleast_1d(self.ppf(rng.uniform(n)))

    def median(self) -> float:
        """Median of the first-child weight (the tabulated coordinate)."""
        return float(self.ppf(0.5))

    def deviation_median(self) -> float:
        """Median of the deviation weight (the coordinate running away from
        the base); this is what median calibration targets."""
        m = self.median()
        return 1.0 - m if self.flip else m

    @property
    def calibrated(self) -> bool:
        return not math.isnan(self.rate)


def build_pc_split(cov1: np.ndarray, cov2: np.ndarray, base: float) -> PCSplitPrior:
    """Uncalibrated PC prior skeleton for a dual split.

    ``cov1``/``cov2`` are the side covariances of the first and second child;
    ``base`` is the base-model weight of the first child.
    """
    if not 0.0 <= base <= 1.0:
        raise ValidationError(f"base weight must lie in [0, 1], got {base}")
    if base == 0.0:
        flip = False
        kern = make_kernel(cov_at_1=cov1, cov_at_0=cov2, base=0.0)
    elif base == 1.0:
        flip = True
        kern = make_kernel(cov_at_1=cov2, cov_at_0=cov1, base=0.0)
    else:
        flip = False
        kern = make_kernel(cov_at_1=cov1, cov_at_0=cov2, base=float(base))
    if np.abs(2.0 * kern.mu - 1.0).max() < 1e-10:
        # both whitened sides are I/2: the mixture never moves with the weight
        raise ValidationError(
            "the two sides of this split are numerically identical; no PC "
            "prior exists (use a Dirichlet split)"
        )

    if base in (0.0, 1.0):
        l_def = int((kern.mu == 1.0).sum())  # singular directions of the base side
        if l_def > 0:
            return PCSplitPrior(
                base=float(base), rate=math.nan, case=2, flip=flip, kernel=kern,
                rank_deficiency=l_def, subset=kern.subset, d_right=1.0,
            )
        d_end = float(kern.distance(1.0))
        if d_end == 0.0:
            raise ValidationError("the two sides are identical: no PC prior exists")
        return PCSplitPrior(
            base=float(base), rate=math.nan, case=1, flip=flip, kernel=kern,
            rank_deficiency=0, subset=kern.subset, d_right=d_end,
        )

    d_left = float(kern.distance(0.0))
    d_right = float(kern.distance(1.0))
    if d_left == 0.0 and d_right == 0.0:
        raise ValidationError("the two sides are identical: no PC prior exists")
    return PCSplitPrior(
        base=float(base), rate=math.nan, case=3, flip=False, kernel=kern,
        rank_deficiency=0, subset=kern.subset, d_left=d_left, d_right=d_right,
    )


def pc_density(omega, prior: PCSplitPrior):
    """Density of the calibrated PC split prior at the given weight(s)."""
    if not prior.calibrated:
        raise ValidationError("prior is not calibrated; set a rate first")
    if prior.rate < 0.0:
        raise ValidationError("negative rates are not part of the prior family")
    return prior.density(omega)


def with_rate(prior: PCSplitPrior, rate: float) -> PCSplitPrior:
    if rate < 0.0:
        raise ValidationError("rate must be nonnegative")
    if rate == 0.0 and prior.case != 2:
        raise ValidationError("a zero rate is only defined as the singular-case limit")
    return replace(prior, rate=float(rate))


def _grow_bracket(g, lo: float = 1e-8, hi: float = 1.0) -> tuple[float, float]:
    """Expand ``hi`` until g changes sign; g must be increasing."""
    glo = g(lo)
    if glo > 0.0:
        raise CalibrationError("calibration target is below the attainable range")
    for _ in range(80):
        if g(hi) >= 0.0:
            return lo, hi
        lo = hi
        hi *= 2.0
    raise CalibrationError("calibration target is not attainable at any finite rate")


def calibrate_median(prior: PCSplitPrior, omega_m: float = 0.25) -> PCSplitPrior:
    """Set the rate so the deviation weight has prior median omega_m.

    The deviation weight is the weight of the child the base model does NOT
    prefer (for a base at 1 the roles of the children are reversed, so this
    is always the coordinate in which the base sits at 0).  Only endpoint
    bases have a single monotone distance segment, so this is restricted to
    cases 1 and 2.  In the singular case the attainable medians are
    (0, 1/4]; exactly 1/4 lands on the documented rate -> 0 limit.
    """
    if prior.case == 3:
        raise ValidationError("median calibration needs a base at 0 or 1; use the interval rule")
    if not 0.0 < omega_m < 1.0:
        raise ValidationError("target median must be in (0, 1)")
    x_m = omega_m  # the deviation coordinate runs away from the base at 0

    if prior.case == 2:
        if x_m > 0.25 + 1e-12:
            raise CalibrationError(
                f"median {omega_m} is not attainable for a singular base; the "
                "attainable supremum is 0.25 (reached in the rate -> 0 limit)"
            )
        if abs(x_m - 0.25) <= 1e-12:
            return with_rate(prior, 0.0)
        s_m = math.sqrt(x_m)
        g = lambda lam: math.expm1(-lam * s_m) / math.expm1(-lam) - 0.5
        lo, hi = _grow_bracket(g)
        return with_rate(prior, numerics.find_root(g, lo, hi))

    a = float(prior._dist_x(np.array([x_m]))[0])
    if a <= 0.0:
        raise CalibrationError("target median coincides with the base model")
    if math.isinf(prior.d_right):
        return with_rate(prior, math.log(2.0) / a)
    if a / prior.d_right >= 0.5 - 1e-13:
        sup_x = float(prior._invert_distance(np.array([prior.d_right / 2.0]), prior.base, 1.0)[0])
        raise CalibrationError(
            f"median {omega_m} is not attainable under the truncated distance; "
            f"the attainable supremum is {sup_x:.6g}"
        )
    b = prior.d_right
    g = lambda lam: math.expm1(-lam * a) / math.expm1(-lam * b) - 0.5
    lo, hi = _grow_bracket(g)
    return with_rate(prior, numerics.find_root(g, lo, hi))


def calibrate_interval(prior: PCSplitPrior) -> PCSplitPrior:
    """Set the rate of an interior-base prior so that mass 1/2 falls in
    (logistic(logit(base) - log 3), logistic(logit(base) + log 3))."""
    if prior.case != 3:
        raise ValidationError("interval calibration needs an interior base")
    a_lo = numerics.logistic(numerics.logit(prior.base) - LOG3)
    a_hi = numerics.logistic(numerics.logit(prior.base) + LOG3)
    s_lo = float(prior._dist_x(np.array([a_lo]))[0])
    s_hi = float(prior._dist_x(np.array([a_hi]))[0])

    def mass(lam: float) -> float:
        zl = 1.0 if math.isinf(prior.d_left) else -math.expm1(-lam * prior.d_left)
        zr = 1.0 if math.isinf(prior.d_right) else -math.expm1(-lam * prior.d_right)
        return 0.5 * (-math.expm1(-lam * s_lo)) / zl + 0.5 * (-math.expm1(-lam * s_hi)) / zr

    g = lambda lam: mass(lam) - 0.5
    try:
        lo, hi = _grow_bracket(g)
    except CalibrationError as exc:
        raise CalibrationError(
            f"interval mass does not cross 1/2 for base {prior.base}: {exc}"
        ) from exc
    return with_rate(prior, numerics.find_root(g, lo, hi))


def sample_split(prior: PCSplitPrior, rng: RandomSource, n: int) -> np.ndarray:
    """Inverse-CDF draws on the distance scale, inverted to weights."""
    return prior.sample(rng, n)


# ---------------------------------------------------------------------------
# density tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityTable:
    """Tabulated density/CDF over a split weight.

    The grid is strictly increasing inside [0, 1]; endpoints are included
    only when the density is finite and positive there, so the table never
    represents a pointwise value at an integrable divergence.  ``distance``
    carries the PC distance from the base (None for Dirichlet marginals).
    ``cdf_at`` uses monotone cubic interpolation; ``log_density_at`` is
    linear between nodes (per monotone segment, so a case-3 truncation jump
    at the base never smears across sides).
    """

    omega: np.ndarray
    log_density: np.ndarray
    cdf: np.ndarray
    distance: np.ndarray | None = None
    segment_break: int | None = None  # first index of the right segment (case 3)

    def __post_init__(self) -> None:
        if len(self.omega) < 2:
            raise ValidationError("a density table needs at least two rows")
        if (np.diff(self.omega) <= 0.0).any():
            raise ValidationError("table grid must be strictly increasing")
        if (np.diff(self.cdf) < 0.0).any():
            raise ValidationError("table cdf must be nondecreasing")

    def log_density_at(self, omega):
        scalar = np.isscalar(omega)
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        if self.segment_break is None:
            out = np.interp(w, self.omega, self.log_density)
        else:
            k = self.segment_break
            out = np.empty_like(w)
            left = w <= self.omega[k - 1]
            out[left] = np.interp(w[left], self.omega[:k], self.log_density[:k])
            out[~left] = np.interp(
                w[~left], self.omega[k:], self.log_density[k:], left=self.log_density[k]
            )
        return float(out[0]) if scalar else out

    def cdf_at(self, omega):
        scalar = np.isscalar(omega)
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        out = _pchip_eval(self.omega, self.cdf, w)
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def total_mass_trapezoid_on_distance(self) -> float | None:
        """Trapezoid of the density against the distance grid (PC tables)."""
        if self.distance is None:
            return None
        dens = np.exp(self.log_density)
        mass = 0.0
        segs = [(0, len(self.omega))]
        if self.segment_break is not None:
            segs = [(0, self.segment_break), (self.segment_break, len(self.omega))]
        for lo, hi in segs:
            w = self.omega[lo:hi]
            mass += float(np.trapezoid(dens[lo:hi], w))
        return mass

    def to_csv(self) -> str:
        lines = ["omega,log_density,cdf"]
        for w, ld, f in zip(self.omega, self.log_density, self.cdf):
            lines.append(f"{w:.17g},{ld:.17g},{f:.17g}")
        return "\n".join(lines) + "\n"


def _pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson monotone cubic slopes."""
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    m = np.zeros(n)
    m[0] = delta[0]
    m[-1] = delta[-1]
    for i in range(1, n - 1):
        if delta[i - 1] * delta[i] <= 0.0:
            m[i] = 0.0
        else:
            w1 = 2.0 * h[i] + h[i - 1]
            w2 = h[i] + 2.0 * h[i - 1]
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
    return m


def _pchip_eval(x: np.ndarray, y: np.ndarray, xq: np.ndarray) -> np.ndarray:
    m = _pchip_slopes(x, y)
    idx = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, len(x) - 2)
    h = x[idx + 1] - x[idx]
    t = np.clip((xq - x[idx]) / h, 0.0, 1.0)
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * y[idx] + h10 * h * m[idx] + h01 * y[idx + 1] + h11 * h * m[idx + 1]


def _segment_rows(prior: PCSplitPrior, toward_one: bool, points: int):
    """Rows (x, dist, cdf_x) for one monotone segment, uniform on distance.

    Includes the base row when the density is finite there and the far
    endpoint row when its distance is finite.
    """
    lam = prior.rate
    d_end = prior.d_right if toward_one else prior.d_left
    if math.isinf(d_end):
        if lam <= 0.0:
            raise ValidationError("cannot tabulate an infinite segment at rate zero")
        s_cap = -math.log(_TAIL) / lam
    else:
        s_cap = d_end
    s = np.linspace(0.0, s_cap, points)
    if prior.case == 2:
        s = s[1:]  # the density diverges at the base
        x = s * s
    else:
        upper = 1.0 if toward_one else 0.0
        x = prior._invert_distance(s, lower=prior.base, upper=upper)
        x[0] = prior.base
        if not math.isinf(d_end):
            x[-1] = upper
    # exact per-segment cdf from the distance grid
    if prior.case == 2:
        if lam == 0.0:
            cdf = s.copy()
        else:
            cdf = np.expm1(-lam * s) / np.expm1(-lam)
    elif prior.case == 1:
        z = 1.0 if math.isinf(prior.d_right) else -math.expm1(-lam * prior.d_right)
        cdf = -np.expm1(-lam * s) / z
    else:
        if toward_one:
            er = 0.0 if math.isinf(prior.d_right) else math.exp(-lam * prior.d_right)
            cdf = 0.5 + 0.5 * (-np.expm1(-lam * s)) / (1.0 - er)
        else:
            el = 0.0 if math.isinf(prior.d_left) else math.exp(-lam * prior.d_left)
            cdf = 0.5 * (np.exp(-lam * s) - el) / (1.0 - el)
    return x, s, cdf


def tabulate(prior: PCSplitPrior, points: int = 1025) -> DensityTable:
    """Density table over the split weight, gridded uniformly on the distance
    scale per monotone segment and mapped back by monotone inversion."""
    if points < 16:
        raise ValidationError("a density table needs at least 16 points per segment")
    if not prior.calibrated:
        raise ValidationError("prior is not calibrated; set a rate first")

    if prior.case in (1, 2):
        x, s, cdf_x = _segment_rows(prior, toward_one=True, points=points)
        seg_break = None
    else:
        xl, sl, cl = _segment_rows(prior, toward_one=False, points=points)
        xr, sr, cr = _segment_rows(prior, toward_one=True, points=points)
        x = np.concatenate([xl[::-1], xr[1:]])
        s = np.concatenate([sl[::-1], sr[1:]])
        cdf_x = np.concatenate([cl[::-1], cr[1:]])
        seg_break = len(xl)

    dens = np.atleast_1d(prior.density(1.0 - x if prior.flip else x))
    if prior.flip:
        # case 3 never flips, so there is no segment break to remap
        omega = (1.0 - x)[::-1]
        cdf = (1.0 - cdf_x)[::-1]
        dens = dens[::-1]
        s = s[::-1]
    else:
        omega = x
        cdf = cdf_x

    keep = np.isfinite(dens) & (dens > 0.0)
    # also collapse accidental duplicate omegas from inversion roundoff
    keep &= np.concatenate([[True], np.diff(omega) > 0.0])
    if not keep.all():
        kept_idx = np.flatnonzero(keep)
        if seg_break is not None:
            seg_break = int((kept_idx < seg_break).sum())
        omega, dens, cdf, s = omega[keep], dens[keep], cdf[keep], s[keep]

    return DensityTable(
        omega=omega,
        log_density=np.log(dens),
        cdf=np.clip(cdf, 0.0, 1.0),
        distance=s,
        segment_break=seg_break,
    )


# ---------------------------------------------------------------------------
# symmetric Dirichlet split
# ---------------------------------------------------------------------------

_DIRICHLET_CACHE: dict[int, float] = {}


@dataclass(frozen=True)
class DirichletSplitPrior:
    """Symmetric Dirichlet prior on a K-way split weight vector."""

    order: int
    concentration: float

    def __post_init__(self) -> None:
        if self.order < 2:
            raise ValidationError("a Dirichlet split needs order K >= 2")
        if self.concentration <= 0.0:
            raise ValidationError("concentration must be positive")

    def log_norm(self) -> float:
        """log B(a, ..., a) for the simplex Lebesgue measure."""
        a = self.concentration
        return self.order * math.lgamma(a) - math.lgamma(self.order * a)

    def marginal_beta(self) -> tuple[float, float]:
        a = self.concentration
        return a, (self.order - 1) * a


def dirichlet_calibrate(k: int) -> float:
    """Concentration such that each marginal weight puts probability 1/2 in
    (logistic(logit(1/K) - log 3), logistic(logit(1/K) + log 3))."""
    if k < 2:
        raise ValidationError("a Dirichlet split needs K >= 2")
    if k in _DIRICHLET_CACHE:
        return _DIRICHLET_CACHE[k]
    base = numerics.logit(1.0 / k)
    lo = numerics.logistic(base - LOG3)
    hi = numerics.logistic(base + LOG3)

    def mass_minus_half(a: float) -> float:
        b = (k - 1) * a
        return numerics.inc_beta(a, b, hi) - numerics.inc_beta(a, b, lo) - 0.5

    blo, bhi = _grow_bracket(mass_minus_half, lo=1e-4, hi=1.0)
    a_star = numerics.find_root(mass_minus_half, blo, bhi)
    _DIRICHLET_CACHE[k] = a_star
    return a_star


def _check_simplex_point(omega, k: int) -> np.ndarray:
    w = np.asarray(omega, dtype=float)
    if w.shape != (k,):
        raise ValidationError(f"expected a weight vector of length {k}")
    if abs(float(w.sum()) - 1.0) > 1e-9:
        raise ValidationError("weights must sum to 1")
    if (w <= 0.0).any() or (w >= 1.0).any():
        raise ValidationError(
            "weight vector must be interior to the simplex for pointwise evaluation"
        )
    return w


def dirichlet_log_density(omega, prior: DirichletSplitPrior) -> float:
    w = _check_simplex_point(omega, prior.order)
    a = prior.concentration
    return float((a - 1.0) * np.log(w).sum() - prior.log_norm())


def dirichlet_density(omega, prior: DirichletSplitPrior) -> float:
    return math.exp(dirichlet_log_density(omega, prior))


def dirichlet_sample(prior: DirichletSplitPrior, rng: RandomSource, n: int) -> np.ndarray:
    """(n, K) draws via normalized independent Gamma(a, 1) variables."""
    if n < 0:
        raise ValidationError("sample size must be nonnegative")
    g = rng.gamma(prior.concentration, n * prior.order).reshape(n, prior.order)
    return g / g.sum(axis=1, keepdims=True)


def tabulate_dirichlet_marginal(prior: DirichletSplitPrior, points: int = 1025) -> DensityTable:
    """Table of the Beta(a, (K-1)a) marginal of one weight coordinate."""
    if points < 16:
        raise ValidationError("a density table needs at least 16 points per segment")
    a, b = prior.marginal_beta()
    ln_b = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    grid = np.linspace(0.0, 1.0, points)[1:-1]
    logd = (a - 1.0) * np.log(grid) + (b - 1.0) * np.log1p(-grid) - ln_b
    cdf = np.array([numerics.inc_beta(a, b, float(x)) for x in grid])
    # endpoint rows only where the density is finite and positive (a = 1
    # keeps the left endpoint, b = 1 the right; divergent or zero endpoints
    # stay off the grid)
    if abs(a - 1.0) < 1e-12:
        grid = np.concatenate([[0.0], grid])
        logd = np.concatenate([[(b - 1.0) * 0.0 - ln_b], logd])
        cdf = np.concatenate([[0.0], cdf])
    if abs(b - 1.0) < 1e-12:
        grid = np.concatenate([grid, [1.0]])
        logd = np.concatenate([logd, [-ln_b]])
        cdf = np.concatenate([cdf, [1.0]])
    return DensityTable(omega=grid, log_density=logd, cdf=np.clip(cdf, 0.0, 1.0))


# ---------------------------------------------------------------------------
# multi-split conversion
# ---------------------------------------------------------------------------


def expand_multisplit(split: Split) -> tuple[Split, ...]:
    """Replace a K-way split (equal-attribution base) by K-1 dual splits.

    Split i separates child i from children i..K with base weight
    1/(K + 1 - i); conditioning every dual split at its base gives each
    child exactly 1/K of the parent mass.
    """
    k = len(split.children)
    if k <= 2:
        raise ValidationError("only splits with more than two children can be expanded")
    if any(abs(b - 1.0 / k) > 1e-9 for b in split.base):
        raise ValidationError(
            "multi-split expansion requires an equal-attribution base model"
        )
    out = []
    rest = list(split.children)
    for i in range(1, k):
        head = rest[0]
        tail = tuple(name for child in rest[1:] for name in child)
        base_head = 1.0 / (k + 1 - i)
        out.append(
            Split(
                index=0,  # reindexed by the tree rebuild
                parent=head + tail,
                children=(head, tail),
                base=(base_head, 1.0 - base_head),
                prior=SplitPriorSpec(kind="pc"),
            )
        )
        rest = rest[1:]
    return tuple(out)


def with_expanded_multisplits(tree: DecompositionTree) -> DecompositionTree:
    """Expand every PC-prior split with more than two children."""
    new_splits: list[Split] = []
    for s in tree.splits:
        if s.prior.kind == "pc" and len(s.children) > 2:
            new_splits.extend(expand_multisplit(s))
        else:
            new_splits.append(s)
    # rebuild preorder indices from the root
    by_parent = {frozenset(s.parent): s for s in new_splits}
    ordered: list[Split] = []

    def walk(node: frozenset) -> None:
        if len(node) == 1:
            return
        s = by_parent.get(node)
        if s is None:
            raise ValidationError(f"no split found for node {sorted(node)} after expansion")
        ordered.append(replace(s, index=len(ordered) + 1))
        for child in s.children:
            walk(frozenset(child))

    walk(frozenset(tree.effects))
    out = DecompositionTree(effects=tree.effects, splits=tuple(ordered))
    validate_tree(out)
    return out
