"""
Kolmogorov-Smirnov distances for simulated first-passage samples.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ifpt2d.exceptions import InsufficientMass
from ifpt2d.models import FptSampleSet
from ifpt2d.targets.distributions import TargetDistribution

logger = logging.getLogger("IFPT2D.Goodness")


def censored_ks_distance(
    sample: FptSampleSet,
    target: TargetDistribution,
    grid: Optional[np.ndarray] = None,
) -> float:
    """
    One-sample KS distance between the crossed part of a sample and the target
    conditioned to [0, horizon].

    The empirical cdf of the crossing times is compared with
    F(t) / F(horizon). Crossing times produced by grid detection live on the
    simulation grid, so when ``grid`` is given the supremum is taken over the
    grid points; otherwise the continuous statistic of ``scipy.stats.kstest`` is used.

    Raises:
        InsufficientMass: if no path crossed or the target has no mass on [0, horizon].
    """
    if sample.times.size == 0:
        raise InsufficientMass(
            f"none of the {sample.n_paths} simulated paths crossed the boundary before t={sample.horizon:g}"
        )
    mass = float(target.cdf(sample.horizon))
    if mass <= 0.0:
        raise InsufficientMass(f"target has no probability mass on [0, {sample.horizon:g}]")

    def conditioned_cdf(t):
        return np.minimum(np.asarray(target.cdf(t)) / mass, 1.0)

    if grid is None:
        return float(stats.kstest(sample.times, conditioned_cdf).statistic)

    ordered = np.sort(sample.times)
    points = np.asarray(grid, dtype=float)
    # crossing times are k*h; a half-ulp guard keeps k*h on the right side of the comparison
    empirical = np.searchsorted(ordered, points * (1.0 + 1e-12), side="right") / ordered.size
    return float(np.max(np.abs(empirical - conditioned_cdf(points))))


def two_sample_ks(first: FptSampleSet, second: FptSampleSet) -> Tuple[float, float]:
    """
    Two-sample KS statistic and p-value between the crossing times of two samples.

    Raises:
        InsufficientMass: if either sample has no crossings.
    """
    if first.times.size == 0 or second.times.size == 0:
        raise InsufficientMass("two-sample comparison needs crossings in both samples")
    result = stats.ks_2samp(first.times, second.times)
    logger.debug(f"Two-sample KS: D={result.statistic:.5f}, p={result.pvalue:.3g}")
    return float(result.statistic), float(result.pvalue)
