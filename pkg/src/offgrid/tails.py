"""Admissible Gaussian noise, suprema statistics, tail bounds and tuning rules.

The noise model draws i.i.d. centered Gaussian entries of variance
``sigma^2 * Delta_T`` per coordinate, realizing the equality case of the
admissibility bound ``Var <f, w> <= sigma^2 Delta_T ||f||^2``.  The suprema
statistics ``M_i = sup_theta || <W, phi^[i](theta)> ||_{L^q(nu)}`` drive the
probability event of the prediction bound; their tails are controlled by the
decreasing functions

    f_n(x) = exp(-x (1 - 2 sqrt(n/x)))      g_n(x) = x^{n/2} e^{-x/2} / Gamma(n/2)

through the weighted chi^2 supremum bound, from which the p = 2 and p = 1
tuning rules and failure probabilities follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .certificates import CertificateConstants
from .measures import DiscreteMeasure, lq_norm


@dataclass(frozen=True)
class NoiseModel:
    """Level sigma, per-T variance decay Delta_T, and a base seed."""

    sigma: float
    delta_T: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.delta_T <= 0:
            raise ValueError("need sigma >= 0 and delta_T > 0")


def noise_rng(model: NoiseModel, replicate: int = 0) -> np.random.Generator:
    """Counter-based stream: replicate r gets the Philox key (seed, r)."""
    key = np.array([model.seed % (1 << 64), replicate % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_noise(model: NoiseModel, n: int, T: int, replicate: int = 0) -> np.ndarray:
    """n x T matrix of i.i.d. N(0, sigma^2 Delta_T) entries, deterministic in (seed, r)."""
    if n < 1 or T < 1:
        raise ValueError("need n, T >= 1")
    if model.sigma == 0.0:
        return np.zeros((n, T))
    scale = model.sigma * math.sqrt(model.delta_T)
    return scale * noise_rng(model, replicate).standard_normal((n, T))


def sup_stat(W: np.ndarray, model, nu: DiscreteMeasure, i: int, q: float,
             grid_step: float = 0.02, polish: bool = True) -> float:
    """M_i = sup_theta || <W, phi^[i](theta)> ||_{L^q(nu)} by grid max + polish.

    ``model`` is the kernel model of the dictionary (it owns the metric grid).
    """
    if not 0 <= i <= 2:
        raise ValueError("the statistic order i must be 0, 1 or 2")
    W = np.asarray(W, dtype=float)
    thetas, cov = model.grid_cov_features(grid_step)
    corr = cov[i] @ W.T                            # (m, n)
    vals = lq_norm(corr, nu, q)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if polish:
        lo = thetas[max(0, k - 1)]
        hi = thetas[min(len(thetas) - 1, k + 1)]
        if hi > lo:
            def neg(t):
                f = model.dic.cov_features(np.array([t]))[i, 0]
                return -float(lq_norm(W @ f, nu, q))
            res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded")
            best = max(best, float(-res.fun))
    return best


def f_tail(n: int, x) -> np.ndarray | float:
    """exp(-x (1 - 2 sqrt(n/x))), decreasing on [n, inf)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    out = np.exp(-x + 2.0 * np.sqrt(n * x))
    return float(out) if out.ndim == 0 else out


def g_tail(n: int, x) -> np.ndarray | float:
    """x^{n/2} e^{-x/2} / Gamma(n/2), evaluated in the log domain."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    out = np.exp(0.5 * n * np.log(x) - 0.5 * x - gammaln(0.5 * n))
    return float(out) if out.ndim == 0 else out


def chi2_bound(u: float, n: int, C1: float, C2: float, sigma: float,
               delta_T: float, a_max: float, diam: float) -> float:
    """Tail bound for sup_theta sum_z a_z <h(theta), W(z)>^2 at level u.

    ``C1`` bounds ||h(theta)||, ``C2`` bounds the covariant derivative norm,
    ``diam`` is the metric diameter of the parameter interval.  Requires
    ``u >= (n+1) a_max sigma^2 Delta_T C1^2``; the raw value is returned
    unclipped (it may exceed 1).
    """
    scale = sigma**2 * a_max * delta_T * C1**2
    if u < (n + 1) * scale:
        raise ValueError(f"u below the tail-bound validity threshold {(n + 1) * scale:.6g}")
    x = u / scale
    return float(f_tail(n, x) + (4.0 * C2 * diam / (C1 * 2.0 ** (n / 2.0))) * g_tail(n, x))


@dataclass(frozen=True)
class TheoreticalConstants:
    """Every computable constant of the prediction bound and the tuning rules."""

    C_cal: float          # threshold level of the probability events
    C_prime: float        # C_cal v 1
    C_big: float          # prediction-bound aggregation constant
    C0: float             # (c_B + 2 C_B) * C_big
    C1_prime: float
    C2_prime: float
    C1: float             # p = 2 tuning-rule constant
    C2: float             # p = 2 failure-probability constant
    C3: float             # p = 1 tuning-rule constant
    inputs: CertificateConstants
    L22: float
    L3: float

    def __post_init__(self):
        for name in ("C_cal", "C_prime", "C_big", "C0", "C1", "C2", "C3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def event_constants(cc: CertificateConstants, L22: float, L3: float) -> TheoreticalConstants:
    """Exact arithmetic from the certificate constants to the event, bound and tuning constants."""
    C_cal = min(cc.C_F / (2.0 * (2.0 - cc.C_F + cc.c_F)),
                cc.C_N / (2.0 * (cc.C_N_prime + cc.c_N + 0.5)))
    C_prime = max(C_cal, 1.0)
    C_big = 4.0 * C_prime * (1.0
                             + (C_prime / cc.C_N) * (2.0 * cc.C_N_prime + cc.c_N + 1.0)
                             + (C_prime / cc.C_F) * (3.0 - 2.0 * cc.C_F + cc.c_F))
    C0 = (cc.c_B + 2.0 * cc.C_B) * C_big
    C1_prime = math.sqrt(C_cal**2 / max(2.0 * L22, 1.0))
    C2_prime = 4.0 * max(1.0, math.sqrt(2.0 * L22), math.sqrt(L3) / math.sqrt(L22))
    return TheoreticalConstants(
        C_cal=C_cal, C_prime=C_prime, C_big=C_big, C0=C0,
        C1_prime=C1_prime, C2_prime=C2_prime,
        C1=math.sqrt(2.0) / C1_prime,
        C2=3.0 * max(1.0, C2_prime),
        C3=(2.0 / C_cal) * max(1.0, math.sqrt(2.0 * L22)),
        inputs=cc, L22=L22, L3=L3)


def kappa_p2(tau: float, n: int, sigma: float, delta_T: float, a_max: float,
             nu_mass: float, C1: float) -> float:
    """p = 2 tuning rule: C1 sigma sqrt(a_max Delta_T n / nu(Z)^2) (1 + sqrt(1 + log(tau)/n))."""
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    return C1 * sigma * math.sqrt(a_max * delta_T * n / nu_mass**2) \
        * (1.0 + math.sqrt(1.0 + math.log(tau) / n))


def kappa_p1(tau: float, sigma: float, delta_T: float, nu_mass: float,
             C3: float) -> float:
    """p = 1 tuning rule: C3 sigma sqrt(Delta_T log(tau)) / nu(Z)."""
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    return C3 * sigma * math.sqrt(delta_T * math.log(tau)) / nu_mass


def tail_F(n: int) -> float:
    """F(n) = g_n(n) e^{-n/2} / 2^{n/2}, asymptotically sqrt(n) e^{-n/2} up to constants."""
    return float(g_tail(n, float(n))) * math.exp(-0.5 * n) / 2.0 ** (0.5 * n)


def failure_prob_p2(tau: float, n: int, diam: float, C2: float = 1.0) -> float:
    """p = 2 failure-probability envelope 1/tau + diam F(n)/sqrt(tau), scaled by C2."""
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    return C2 * (1.0 / tau + diam * tail_F(n) / math.sqrt(tau))


def failure_prob_p1(tau: float, n: int, diam: float, C4: float) -> float:
    """p = 1 failure probability C4 n max(diam / (tau sqrt(log tau)), 1/tau)."""
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    return C4 * n * max(diam / (tau * math.sqrt(math.log(tau))), 1.0 / tau)
