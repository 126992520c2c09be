"""
Closed-form description of the two-compartment Ornstein-Uhlenbeck process.

With X(0) = 0 the drift matrix A = [[-a-b, b], [b, -a-b]] has eigenvalues
-alpha and -(alpha + 2 beta), so every quantity below is a combination of the
two exponentials e^{-alpha t} and e^{-(alpha+2beta) t}. Covariances are the
Ito-isometry integrals of the noise integrands

    X1: (sigma/2) (e^{-alpha u} - e^{-(alpha+2beta) u})
    X2: (sigma/2) (e^{-alpha u} + e^{-(alpha+2beta) u})

with the sigma^2 prefactor kept in every entry.
"""
import logging
import math
import warnings
from typing import Tuple

import numpy as np
from scipy import integrate

from ifpt2d.exceptions import (
    DegenerateCouplingWarning,
    NonFiniteParam,
    NonPositiveAlpha,
    NonPositiveSigma,
    OrderViolation,
)
from ifpt2d.models import ModelParams, Moments2, State2

logger = logging.getLogger("IFPT2D.Process")


def validate_params(p: ModelParams) -> ModelParams:
    """
    Check the process constants and return them unchanged.

    Args:
        p: Candidate constants.

    Returns:
        The same ModelParams instance.

    Raises:
        NonFiniteParam: if any constant is NaN or infinite.
        NonPositiveAlpha: if alpha <= 0.
        NonPositiveSigma: if sigma <= 0.
    """
    for name in ("alpha", "beta", "mu", "sigma"):
        value = getattr(p, name)
        if not math.isfinite(value):
            raise NonFiniteParam(f"process.{name} must be finite, got {value}")
    if p.alpha <= 0.0:
        raise NonPositiveAlpha(f"process.alpha must be > 0, got {p.alpha}")
    if p.sigma <= 0.0:
        raise NonPositiveSigma(f"process.sigma must be > 0, got {p.sigma}")
    if p.beta < 0.0:
        logger.warning(f"Negative coupling beta={p.beta}; the model is normally used with beta >= 0")
    if p.is_degenerate:
        message = "beta = 0: the first component has no noise and stays identically at 0"
        logger.warning(message)
        warnings.warn(message, DegenerateCouplingWarning, stacklevel=2)
    return p


def drift_matrix(p: ModelParams) -> np.ndarray:
    """The matrix A of dX = (AX + M) dt + G dB."""
    return np.array([[-p.alpha - p.beta, p.beta], [p.beta, -p.alpha - p.beta]])


def _relaxation(rate: float, t):
    # (1 - e^{-rate t}) / rate, exact at small t
    return -np.expm1(-rate * np.asarray(t, dtype=float)) / rate


def transition_matrix(h, p: ModelParams) -> np.ndarray:
    """Phi(h) = e^{Ah}; shape (2, 2) for scalar h, (..., 2, 2) otherwise."""
    ea = np.exp(-p.alpha * np.asarray(h, dtype=float))
    eb = np.exp(-(p.alpha + 2.0 * p.beta) * np.asarray(h, dtype=float))
    plus, minus = 0.5 * (ea + eb), 0.5 * (ea - eb)
    return np.stack([np.stack([plus, minus], axis=-1), np.stack([minus, plus], axis=-1)], axis=-2)


def input_gain(h, p: ModelParams) -> np.ndarray:
    """
    Gamma(h) = int_0^h e^{As} ds, the response of the state to a constant input
    vector held over a step of length h.
    """
    ga = _relaxation(p.alpha, h)
    gb = _relaxation(p.alpha + 2.0 * p.beta, h)
    plus, minus = 0.5 * (ga + gb), 0.5 * (ga - gb)
    return np.stack([np.stack([plus, minus], axis=-1), np.stack([minus, plus], axis=-1)], axis=-2)


def _mean_increment(h, p: ModelParams) -> np.ndarray:
    # Gamma(h) (0, mu)^T; written column-wise so that an explicit input
    # (0, mu) applied through Gamma reproduces it bit for bit.
    return input_gain(h, p)[..., :, 1] * p.mu


def mean_at(t, p: ModelParams) -> np.ndarray:
    """
    Unconditional mean m(t) = E[X(t)] with X(0) = 0.

    Args:
        t: Time (scalar or array), t >= 0.
        p: Process constants.

    Returns:
        Array of shape (2,) for scalar t, (len(t), 2) for an array.
    """
    return _mean_increment(t, p)


def covariance_entries(t, p: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q11(t), Q12(t), Q22(t) (vectorized over t)."""
    t = np.asarray(t, dtype=float)
    c = p.alpha + p.beta
    ea = _relaxation(2.0 * p.alpha, t) * 2.0          # (1 - e^{-2 alpha t}) / alpha
    ec = _relaxation(2.0 * c, t) * 2.0                # (1 - e^{-2 (alpha+beta) t}) / (alpha+beta)
    eb = _relaxation(2.0 * (p.alpha + 2.0 * p.beta), t) * 2.0
    scale = p.sigma ** 2 / 8.0
    q11 = np.maximum(scale * ((ea - 2.0 * ec) + eb), 0.0)
    q12 = scale * (ea - eb)
    q22 = np.maximum(scale * ((ea + 2.0 * ec) + eb), 0.0)
    return q11, q12, q22


def covariance_at(t: float, p: ModelParams) -> np.ndarray:
    """
    Covariance matrix Q(t) of X(t), also the innovation covariance of a step of length t.

    Args:
        t: Elapsed time, t >= 0.
        p: Process constants.

    Returns:
        Symmetric 2x2 array.
    """
    q11, q12, q22 = covariance_entries(float(t), p)
    return np.array([[float(q11), float(q12)], [float(q12), float(q22)]])


def moments_at(t: float, p: ModelParams) -> Moments2:
    return Moments2(mean=mean_at(float(t), p), cov=covariance_at(t, p))


def transition(h: float, p: ModelParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact one-step transition kernel.

    X(t+h) = Phi(h) X(t) + c(h) + N(0, Q(h)) in law.

    Args:
        h: Step length, h > 0.
        p: Process constants.

    Returns:
        (Phi(h), c(h), Q(h)).
    """
    if h <= 0.0:
        raise ValueError(f"transition step must be positive, got {h}")
    return transition_matrix(h, p), _mean_increment(h, p), covariance_at(h, p)


def innovation_factor(h: float, p: ModelParams) -> np.ndarray:
    """
    Lower-triangular L with L L^T = Q(h).

    When Q11(h) vanishes (beta = 0) the matrix has rank one and the first
    column of L is set to zero instead of failing a Cholesky factorization.
    """
    q11, q12, q22 = (float(v) for v in covariance_entries(h, p))
    if q11 <= 0.0:
        return np.array([[0.0, 0.0], [0.0, math.sqrt(q22)]])
    l11 = math.sqrt(q11)
    l21 = q12 / l11
    l22 = math.sqrt(max(q22 - l21 * l21, 0.0))
    return np.array([[l11, 0.0], [l21, l22]])


def _check_order(t, theta) -> float:
    lag = np.asarray(t, dtype=float) - np.asarray(theta, dtype=float)
    if np.any(lag < 0.0):
        raise OrderViolation(f"conditioning time theta={theta} is later than t={t}")
    return lag


def conditioned_mean_x1(t, theta, x: State2, p: ModelParams):
    """
    E[X1(t) | X(theta) = x].

    Affine in x with coefficients equal to the first row of Phi(t - theta);
    equals x1 exactly at t = theta.

    Raises:
        OrderViolation: if t < theta.
    """
    lag = _check_order(t, theta)
    phi = transition_matrix(lag, p)
    return phi[..., 0, 0] * x.x1 + phi[..., 0, 1] * x.x2 + _mean_increment(lag, p)[..., 0]


def conditioned_var_x1(t, theta, p: ModelParams):
    """
    Var[X1(t) | X(theta)], which does not depend on the conditioning state
    and equals Q11(t - theta).

    Raises:
        OrderViolation: if t < theta.
    """
    lag = _check_order(t, theta)
    return covariance_entries(lag, p)[0]


def isometry_quadrature(t: float, p: ModelParams, epsrel: float = 1e-10) -> np.ndarray:
    """
    Q(t) by adaptive quadrature of the Ito-isometry integrals; a cross-check
    for the closed-form entries.
    """
    a, b = p.alpha, p.alpha + 2.0 * p.beta
    s2 = p.sigma ** 2 / 4.0

    def entry(sign_left: float, sign_right: float) -> float:
        value, _ = integrate.quad(
            lambda u: (math.exp(-a * u) + sign_left * math.exp(-b * u))
            * (math.exp(-a * u) + sign_right * math.exp(-b * u)),
            0.0, t, epsabs=0.0, epsrel=epsrel, limit=200,
        )
        return s2 * value

    q11, q12, q22 = entry(-1.0, -1.0), entry(-1.0, 1.0), entry(1.0, 1.0)
    return np.array([[q11, q12], [q12, q22]])
