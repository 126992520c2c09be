"""
Target first-passage-time distributions: Inverse Gaussian, its heavy-tailed
rho -> infinity limit, and Gamma (exponential included as kappa = 1).
"""
import logging
import math
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize, special

from ifpt2d.exceptions import NonPositiveInput

logger = logging.getLogger("IFPT2D.Targets")

PositiveFinite = Annotated[float, Field(gt=0.0, allow_inf_nan=False)]


def _grid(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr > 0.0, np.where(arr > 0.0, arr, 1.0)


def _finish(values: np.ndarray, like):
    return float(values) if np.ndim(like) == 0 else values


class _Target(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    def quantile(self, prob: float) -> float:
        """Smallest t with cdf(t) = prob, by Brent's method on an expanding bracket."""
        if not 0.0 < prob < 1.0:
            raise NonPositiveInput(f"quantile level must lie in (0, 1), got {prob}")
        hi = 1.0
        while self.cdf(hi) < prob:
            hi *= 2.0
            if hi > 1e15:
                raise NonPositiveInput(f"quantile {prob} is beyond the representable range")
        return float(optimize.brentq(lambda t: self.cdf(t) - prob, 0.0, hi, xtol=1e-12, rtol=1e-12))

    def cv(self) -> float:
        mean = self.mean()
        return math.sqrt(self.variance()) / mean if math.isfinite(mean) else math.nan

    @property
    def singular_at_origin(self) -> bool:
        """True when the density is unbounded as t -> 0+."""
        return False


class InverseGaussian(_Target):
    """IG law with mean rho and shape lambda; CV = sqrt(rho / lambda)."""
    family: Literal["inverse_gaussian"] = "inverse_gaussian"
    rho: PositiveFinite
    lam: PositiveFinite = Field(alias="lambda")

    def pdf(self, t):
        arr, pos, safe = _grid(t)
        value = np.sqrt(self.lam / (2.0 * np.pi * safe ** 3)) * np.exp(
            -self.lam / (2.0 * safe) * (safe / self.rho - 1.0) ** 2
        )
        return _finish(np.where(pos, value, 0.0), t)

    def cdf(self, t):
        arr, pos, safe = _grid(t)
        root = np.sqrt(self.lam / safe)
        # second term evaluated in log space: e^{2 lambda / rho} overflows for small CV
        value = special.ndtr(root * (safe / self.rho - 1.0)) + np.exp(
            2.0 * self.lam / self.rho + special.log_ndtr(-root * (safe / self.rho + 1.0))
        )
        return _finish(np.where(pos, np.minimum(value, 1.0), 0.0), t)

    def mean(self) -> float:
        return self.rho

    def variance(self) -> float:
        return self.rho ** 3 / self.lam


class HeavyTailIG(_Target):
    """
    rho -> infinity limit of the IG law (Levy law): first passage of a driftless
    Brownian motion with diffusion nu through a level b, lambda = b^2 / nu^2.
    Infinite mean.
    """
    family: Literal["heavy_tail_ig"] = "heavy_tail_ig"
    lam: PositiveFinite = Field(alias="lambda")

    def pdf(self, t):
        arr, pos, safe = _grid(t)
        value = np.sqrt(self.lam / (2.0 * np.pi * safe ** 3)) * np.exp(-self.lam / (2.0 * safe))
        return _finish(np.where(pos, value, 0.0), t)

    def cdf(self, t):
        arr, pos, safe = _grid(t)
        value = special.erfc(np.sqrt(self.lam / (2.0 * safe)))
        return _finish(np.where(pos, value, 0.0), t)

    def mean(self) -> float:
        return math.inf

    def variance(self) -> float:
        return math.inf

    @classmethod
    def from_brownian_level(cls, level: float, diffusion: float) -> "HeavyTailIG":
        if level <= 0.0 or diffusion <= 0.0:
            raise NonPositiveInput("level and diffusion must be positive")
        return cls(lam=level ** 2 / diffusion ** 2)


class Gamma(_Target):
    """Gamma law with shape kappa and rate gamma; CV = 1 / sqrt(kappa)."""
    family: Literal["gamma"] = "gamma"
    kappa: PositiveFinite
    gamma: PositiveFinite

    def pdf(self, t):
        arr, pos, safe = _grid(t)
        log_value = (
            self.kappa * math.log(self.gamma)
            + special.xlogy(self.kappa - 1.0, safe)
            - self.gamma * safe
            - special.gammaln(self.kappa)
        )
        return _finish(np.where(pos, np.exp(log_value), 0.0), t)

    def cdf(self, t):
        arr, pos, safe = _grid(t)
        return _finish(np.where(pos, special.gammainc(self.kappa, self.gamma * safe), 0.0), t)

    def mean(self) -> float:
        return self.kappa / self.gamma

    def variance(self) -> float:
        return self.kappa / self.gamma ** 2

    @property
    def singular_at_origin(self) -> bool:
        return self.kappa < 1.0


TargetDistribution = Annotated[Union[InverseGaussian, HeavyTailIG, Gamma], Field(discriminator="family")]


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0.0 and math.isfinite(value)):
            raise NonPositiveInput(f"{name} must be positive and finite, got {value}")


def ig_from_mean_cv(mean: float, cv: float) -> InverseGaussian:
    """IG with the given mean and coefficient of variation: rho = mean, lambda = mean / cv^2."""
    _check_positive(mean=mean, cv=cv)
    return InverseGaussian(rho=mean, lam=mean / cv ** 2)


def gamma_from_mean_cv(mean: float, cv: float) -> Gamma:
    """Gamma with the given mean and coefficient of variation: kappa = 1 / cv^2, gamma = kappa / mean."""
    _check_positive(mean=mean, cv=cv)
    kappa = 1.0 / cv ** 2
    return Gamma(kappa=kappa, gamma=kappa / mean)


def exponential(rate: float) -> Gamma:
    """Exponential law, represented as Gamma with kappa = 1."""
    _check_positive(rate=rate)
    return Gamma(kappa=1.0, gamma=rate)


def pdf(d: TargetDistribution, t):
    """Density of d at t (0 for t <= 0)."""
    return d.pdf(t)


def cdf(d: TargetDistribution, t):
    """P(T <= t) under d (0 for t <= 0)."""
    return d.cdf(t)


def describe(d: TargetDistribution) -> str:
    if isinstance(d, InverseGaussian):
        return f"InverseGaussian(rho={d.rho:g}, lambda={d.lam:g})"
    if isinstance(d, HeavyTailIG):
        return f"HeavyTailIG(lambda={d.lam:g})"
    return f"Gamma(kappa={d.kappa:g}, gamma={d.gamma:g})"
