"""Priors for the top of the tree.

Two modes: a scale-invariant Jeffreys prior on the total variance of a
Gaussian model, entered by augmenting the tree with a residual-vs-latent
split, or a proper PC prior that shrinks the total latent variance toward
zero (an exponential on the total standard deviation).  Calibration helpers
turn tail statements and odds-ratio statements into rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import CalibrationError, ImproperPriorError, ValidationError
from .numerics import RandomSource
from .tree import DecompositionTree, Split, SplitPriorSpec

__all__ = [
    "OddsCalibration",
    "TotalVariancePrior",
    "calibrate_pc_sd",
    "calibrate_total_from_odds",
    "calibrate_total_from_tail",
    "jeffreys_augment",
    "log_density_total",
    "pc_total_density",
    "pc_total_tail",
    "sample_total",
]


def calibrate_pc_sd(upper: float, alpha: float) -> float:
    """Rate of the exponential prior on a standard deviation such that
    P(sigma > upper) = alpha."""
    if upper <= 0.0:
        raise ValidationError("upper bound must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("tail probability must be in (0, 1)")
    return -math.log(alpha) / upper


def calibrate_total_from_tail(upper: float, alpha: float) -> float:
    """Rate on sqrt(total) such that P(total > upper) = alpha."""
    if upper <= 0.0:
        raise ValidationError("upper bound must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("tail probability must be in (0, 1)")
    return -math.log(alpha) / math.sqrt(upper)


def pc_total_density(t: float, rate: float) -> float:
    """lam/(2 sqrt(t)) exp(-lam sqrt(t)): exponential with the given rate on
    the total standard deviation, expressed on the variance scale."""
    if rate <= 0.0:
        raise ValidationError("total-variance rate must be positive")
    if t <= 0.0:
        raise ValidationError("total variance must be positive")
    s = math.sqrt(t)
    return rate / (2.0 * s) * math.exp(-rate * s)


def pc_total_tail(upper: float, rate: float) -> float:
    """P(total > upper) = exp(-rate sqrt(upper))."""
    if upper <= 0.0:
        raise ValidationError("upper bound must be positive")
    return math.exp(-rate * math.sqrt(upper))


@dataclass(frozen=True)
class OddsCalibration:
    """Interval statement for the multiplicative effect exp(x), x ~ N(0, t):
    P(lower < exp(x) < upper) = prob, marginally over the total prior."""

    lower: float
    upper: float
    prob: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lower < 1.0 < self.upper:
            raise ValidationError("odds interval must satisfy 0 < lower < 1 < upper")
        if not 0.0 < self.prob < 1.0:
            raise ValidationError("interval probability must be in (0, 1)")
        if self.prob > 1.0 - 1e-8:
            # the required rate diverges as prob -> 1, faster than the
            # calibration quadrature can resolve
            raise CalibrationError(
                "interval probability is too close to 1 to calibrate"
            )
        if abs(self.lower * self.upper - 1.0) > 1e-9:
            raise ValidationError(
                "asymmetric odds intervals (lower != 1/upper) are not supported"
            )


def _odds_interval_mass(rate: float, log_upper: float, tol: float = 1e-10) -> float:
    """P(|x| < log_upper) with x | sigma ~ N(0, sigma^2), sigma ~ Exp(rate);
    the sigma integral is truncated at its 1 - 1e-12 quantile."""
    sigma_max = -math.log(1e-12) / rate

    def integrand(s: float) -> float:
        if s <= 0.0:
            return rate
        return rate * math.exp(-rate * s) * (
            numerics.norm_cdf(log_upper / s) - numerics.norm_cdf(-log_upper / s)
        )

    return numerics.integrate(integrand, 0.0, sigma_max, tol=tol)


def calibrate_total_from_odds(cal: OddsCalibration, alpha: float = 0.05) -> tuple[float, float]:
    """Rate matching the odds statement, plus the upper bound with
    P(total > upper) = alpha under that rate.

    The interval mass grows with the rate (more shrinkage concentrates
    exp(x) near 1), which is asserted while bracketing.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("tail probability must be in (0, 1)")
    c = math.log(cal.upper)
    rate_cap = 1e4  # beyond this the prior is numerically a point mass at 0
    last = -1.0
    lo, hi = 1e-4, 1.0
    m_lo = _odds_interval_mass(lo, c)
    if m_lo > cal.prob:
        raise CalibrationError("interval probability is below the attainable range")
    while True:
        m_hi = _odds_interval_mass(hi, c)
        if m_hi < m_lo - 1e-9 or m_hi < last - 1e-9:
            raise CalibrationError("interval mass is not monotone in the rate")
        last = m_hi
        if m_hi >= cal.prob:
            break
        if hi >= rate_cap:
            raise CalibrationError(
                f"interval probability {cal.prob} is too close to 1: the "
                "required rate diverges"
            )
        lo, m_lo = hi, m_hi
        hi = min(hi * 2.0, rate_cap)
    rate = numerics.find_root(lambda lam: _odds_interval_mass(lam, c) - cal.prob, lo, hi)
    upper = (math.log(alpha) / -rate) ** 2
    return rate, upper


@dataclass(frozen=True)
class TotalVariancePrior:
    """Prior on the tree's top-level variance.

    kind "pc_total" is the proper shrinkage prior with the given rate;
    kind "jeffreys_gaussian" is the improper 1/V prior used with the
    residual augmentation and only supports density evaluation.
    """

    kind: str
    rate: float | None = None
    upper: float | None = None  # calibration metadata when derived from a tail
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("pc_total", "jeffreys_gaussian"):
            raise ValidationError(f"unknown total-variance prior kind {self.kind!r}")
        if self.kind == "pc_total" and (self.rate is None or self.rate <= 0.0):
            raise ValidationError("pc_total needs a positive rate")
        if self.kind == "jeffreys_gaussian" and self.rate is not None:
            raise ValidationError("the Jeffreys prior has no rate")

    @property
    def improper(self) -> bool:
        return self.kind == "jeffreys_gaussian"


def log_density_total(prior: TotalVariancePrior, t: float) -> float:
    if t <= 0.0:
        raise ValidationError("total variance must be positive")
    if prior.improper:
        return -math.log(t)  # unnormalized
    s = math.sqrt(t)
    return math.log(prior.rate) - math.log(2.0 * s) - prior.rate * s


def sample_total(prior: TotalVariancePrior, rng: RandomSource, n: int) -> np.ndarray:
    if prior.improper:
        raise ImproperPriorError(
            "the Jeffreys total-variance prior is improper; only the weights "
            "can be sampled in this mode"
        )
    u = rng.uniform(n)
    sigma = -np.log1p(-u) / prior.rate
    return sigma * sigma


def jeffreys_augment(
    latent_tree: DecompositionTree,
    residual: str,
    residual_prior: SplitPriorSpec | None = None,
) -> DecompositionTree:
    """Add a top split (latent subtree, residual) with base (0, 1).

    The latent subtree's splits are untouched; the new root's first child is
    the whole latent node, so the split weight is the latent share of the
    total variance (the ICC in a random intercept model).
    """
    if residual in latent_tree.effects:
        raise ValidationError(f"residual effect {residual!r} is already a tree leaf")
    prior = residual_prior or SplitPriorSpec(kind="pc")
    if prior.kind != "pc":
        raise ValidationError("the residual split uses a PC prior")
    top = Split(
        index=1,
        parent=latent_tree.effects + (residual,),
        children=(latent_tree.effects, (residual,)),
        base=(0.0, 1.0),
        prior=prior,
    )
    shifted = [
        Split(
            index=s.index + 1,
            parent=s.parent,
            children=s.children,
            base=s.base,
            prior=s.prior,
        )
        for s in latent_tree.splits
    ]
    return DecompositionTree(
        effects=latent_tree.effects + (residual,),
        splits=(top, *shifted),
    )
