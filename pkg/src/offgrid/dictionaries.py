"""Continuous feature dictionaries with analytic derivatives up to order 3.

A dictionary is a family ``theta -> phi(theta)`` of vectors in R^T indexed by a
real parameter on a compact interval.  All downstream geometry (kernels,
covariant derivatives, Riemannian metric) is driven by the derivatives of the
*normalized* feature ``phi(theta)/||phi(theta)||``, so every built-in family
exposes exact analytic jets of order 3; finite differences are reserved for
test oracles.

Built-in families:

* ``gaussian_location`` -- Gaussian bumps of fixed width sampled on a grid,
  parametrized by location.
* ``fourier_lowpass``   -- complex exponentials ``exp(2i*pi*f*theta)`` for
  ``|f| <= f_c`` embedded as ``2 f_c + 1`` real cosine/sine coordinates, so
  the ambient space stays real while the induced kernel is exactly the
  normalized Dirichlet kernel.
* ``exponential_decay`` -- decaying exponentials sampled in time, parametrized
  by the decay rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-30
METRIC_TOL = 1e-14


class DegenerateFeatureError(RuntimeError):
    """Raised when a raw feature has (numerically) zero norm."""


class DegenerateMetricError(RuntimeError):
    """Raised when the metric density g(theta) is not strictly positive."""


@dataclass(frozen=True)
class DomainInterval:
    """Compact parameter interval, optionally embedded in a larger one.

    ``[lo, hi]`` is the compact interval on which estimation and all suprema
    are taken; ``[lo_inf, hi_inf]`` is the (possibly unbounded) interval on
    which a limit kernel is defined.
    """

    lo: float
    hi: float
    lo_inf: float = -math.inf
    hi_inf: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty domain [{self.lo}, {self.hi}]")
        if self.lo < self.lo_inf or self.hi > self.hi_inf:
            raise ValueError("compact interval must sit inside the extended one")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, theta, tol: float = 1e-12) -> bool:
        t = np.asarray(theta, dtype=float)
        pad = tol * max(1.0, self.width)
        return bool(np.all(t >= self.lo - pad) and np.all(t <= self.hi + pad))

    def clip(self, theta):
        return np.clip(theta, self.lo, self.hi)


@dataclass(frozen=True)
class FeatureJet:
    """Value and first three derivatives of the normalized feature at theta."""

    theta: float
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def _dot(u, v):
    # batched inner product over the trailing (coordinate) axis
    return np.einsum("...i,...i->...", u, v)


def normalize_jets(raw: np.ndarray) -> np.ndarray:
    """Jets of phi/||phi|| from jets of the raw feature phi.

    ``raw`` has shape (4, m, T): orders 0..3 for a batch of m parameters.
    Uses exact Taylor (jet) arithmetic: with n = ||phi|| and w = 1/n,
    the normalized feature is phi * w.
    """
    r0, r1, r2, r3 = raw
    m0 = _dot(r0, r0)
    if np.any(m0 <= NORM_TOL):
        raise DegenerateFeatureError("raw feature with zero norm")
    m1 = 2.0 * _dot(r0, r1)
    m2 = 2.0 * (_dot(r0, r2) + _dot(r1, r1))
    m3 = 2.0 * _dot(r0, r3) + 6.0 * _dot(r1, r2)

    n0 = np.sqrt(m0)
    n1 = m1 / (2.0 * n0)
    n2 = (0.5 * m2 - n1**2) / n0
    n3 = (0.5 * m3 - 3.0 * n1 * n2) / n0

    w0 = 1.0 / n0
    w1 = -n1 * w0 / n0
    w2 = -(n2 * w0 + 2.0 * n1 * w1) / n0
    w3 = -(n3 * w0 + 3.0 * n2 * w1 + 3.0 * n1 * w2) / n0

    w0, w1, w2, w3 = (c[..., None] for c in (w0, w1, w2, w3))
    p0 = r0 * w0
    p1 = r1 * w0 + r0 * w1
    p2 = r2 * w0 + 2.0 * r1 * w1 + r0 * w2
    p3 = r3 * w0 + 3.0 * r2 * w1 + 3.0 * r1 * w2 + r0 * w3
    return np.stack([p0, p1, p2, p3])


def metric_jets(norm: np.ndarray) -> np.ndarray:
    """(g, g', g'') of g = ||d/dtheta phi_normalized||^2, shape (3, m)."""
    _, p1, p2, p3 = norm
    g0 = _dot(p1, p1)
    g1 = 2.0 * _dot(p2, p1)
    g2 = 2.0 * (_dot(p3, p1) + _dot(p2, p2))
    return np.stack([g0, g1, g2])


def covariant_features(norm: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Covariant derivatives phi^[i], i = 0..3, of the normalized feature.

    The order-(i+1) covariant derivative of a field f is
    ``g^{i/2} d/dtheta (D_i f / g^{i/2})`` and phi^[i] divides the result by
    ``g^{i/2}``; unrolling the recursion gives the closed forms below.
    """
    p0, p1, p2, p3 = norm
    g0, g1, g2 = g
    if np.any(g0 <= METRIC_TOL):
        raise DegenerateMetricError("g(theta) <= 0: metric degenerate")
    sg = np.sqrt(g0)
    a = (g1 / (2.0 * g0))[..., None]
    b = ((g1 / g0) ** 2 - g2 / (2.0 * g0))[..., None]
    c0 = p0
    c1 = p1 / sg[..., None]
    c2 = (p2 - a * p1) / g0[..., None]
    c3 = (p3 - 3.0 * a * p2 + b * p1) / (g0 * sg)[..., None]
    return np.stack([c0, c1, c2, c3])


class Dictionary:
    """Base class: a C^3 feature family on a compact interval.

    Subclasses implement ``_raw_jets`` returning the raw feature and its first
    three theta-derivatives for a batch of parameters.
    """

    kind: str = "abstract"

    def __init__(self, domain: DomainInterval, T: int):
        self.domain = domain
        self.T = int(T)

    # -- raw features -------------------------------------------------------

    def _raw_jets(self, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def raw_jets(self, thetas) -> np.ndarray:
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if not self.domain.contains(thetas):
            raise ValueError(
                f"theta outside domain [{self.domain.lo}, {self.domain.hi}]"
            )
        return self._raw_jets(thetas)

    def eval(self, theta) -> np.ndarray:
        """Raw feature phi(theta) in R^T."""
        return self.raw_jets(theta)[0, 0]

    def deriv(self, k: int, theta) -> np.ndarray:
        """k-th theta-derivative of the raw feature, k = 1..3."""
        if not 1 <= k <= 3:
            raise ValueError("derivative order must be 1, 2 or 3")
        return self.raw_jets(theta)[k, 0]

    # -- normalized features and geometry -----------------------------------

    def norm_jets(self, thetas) -> np.ndarray:
        return normalize_jets(self.raw_jets(thetas))

    def features(self, thetas) -> np.ndarray:
        """Normalized features only (m, T); cheaper than the full jet stack."""
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if not self.domain.contains(thetas):
            raise ValueError(
                f"theta outside domain [{self.domain.lo}, {self.domain.hi}]"
            )
        raw = self._raw_value(thetas)
        nrm = np.sqrt(np.einsum("mt,mt->m", raw, raw))
        if np.any(nrm**2 <= NORM_TOL):
            raise DegenerateFeatureError("raw feature with zero norm")
        return raw / nrm[:, None]

    def _raw_value(self, thetas: np.ndarray) -> np.ndarray:
        return self._raw_jets(thetas)[0]

    def g_jets(self, thetas) -> np.ndarray:
        return metric_jets(self.norm_jets(thetas))

    def cov_features(self, thetas) -> np.ndarray:
        norm = self.norm_jets(thetas)
        return covariant_features(norm, metric_jets(norm))

    def feature_jet(self, theta: float) -> FeatureJet:
        jets = self.norm_jets(theta)
        return FeatureJet(float(theta), jets[0, 0], jets[1, 0], jets[2, 0], jets[3, 0])

    def metric_density(self, thetas):
        return self.g_jets(thetas)[0]


def normalized_feature(dic: Dictionary, theta) -> np.ndarray:
    """phi(theta)/||phi(theta)||; unit Euclidean norm."""
    return dic.norm_jets(theta)[0, 0]


def phi_cov(dic: Dictionary, theta, i: int) -> np.ndarray:
    """Covariant derivative phi^[i](theta) of the normalized feature, i = 0..3."""
    if not 0 <= i <= 3:
        raise ValueError("covariant order must be in 0..3")
    return dic.cov_features(theta)[i, 0]


class GaussianLocationDictionary(Dictionary):
    """Gaussian bump of width sigma sampled on a fixed grid, located at theta."""

    kind = "gaussian_location"

    def __init__(self, domain: DomainInterval, T: int, sigma: float,
                 grid_lo: float | None = None, grid_hi: float | None = None):
        super().__init__(domain, T)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        # the sample grid extends past the domain so boundary features keep
        # essentially full mass and the kernel stays translation invariant
        pad = 6.0 * sigma
        self.grid_lo = domain.lo - pad if grid_lo is None else float(grid_lo)
        self.grid_hi = domain.hi + pad if grid_hi is None else float(grid_hi)
        self.grid = np.linspace(self.grid_lo, self.grid_hi, self.T)

    def _raw_jets(self, thetas):
        s2 = self.sigma**2
        u = (self.grid[None, :] - thetas[:, None]) / s2  # d/dtheta log phi
        e = np.exp(-0.5 * s2 * u**2)
        d1 = u * e
        d2 = (u**2 - 1.0 / s2) * e
        d3 = (u**3 - 3.0 * u / s2) * e
        return np.stack([e, d1, d2, d3])

    def _raw_value(self, thetas):
        s2 = self.sigma**2
        return np.exp(-((self.grid[None, :] - thetas[:, None]) ** 2) / (2.0 * s2))


class FourierLowpassDictionary(Dictionary):
    """Low-pass complex exponentials embedded as real cosine/sine coordinates.

    Coordinates are ``1, sqrt(2) cos(2 pi f theta), sqrt(2) sin(2 pi f theta)``
    for f = 1..f_c, giving T = 2 f_c + 1 and the exact normalized Dirichlet
    kernel ``sin((2f_c+1) pi u) / ((2f_c+1) sin(pi u))`` in u = theta - theta'.
    """

    kind = "fourier_lowpass"

    def __init__(self, domain: DomainInterval, f_c: int):
        f_c = int(f_c)
        if f_c < 1:
            raise ValueError("cutoff f_c must be >= 1")
        if domain.width >= 1.0:
            raise ValueError("domain must fit inside one period (width < 1)")
        super().__init__(domain, 2 * f_c + 1)
        self.f_c = f_c
        self.omega = 2.0 * np.pi * np.arange(1, f_c + 1)

    def _raw_jets(self, thetas):
        m = thetas.shape[0]
        ang = self.omega[None, :] * thetas[:, None]  # (m, f_c)
        out = np.empty((4, m, self.T))
        rt2 = math.sqrt(2.0)
        for k in range(4):
            # d^k/dtheta^k cos = omega^k cos(ang + k pi/2), same shift for sin
            ck = self.omega**k * np.cos(ang + k * np.pi / 2.0)
            sk = self.omega**k * np.sin(ang + k * np.pi / 2.0)
            out[k, :, 0] = 1.0 if k == 0 else 0.0
            out[k, :, 1::2] = rt2 * ck
            out[k, :, 2::2] = rt2 * sk
        return out

    def _raw_value(self, thetas):
        ang = self.omega[None, :] * thetas[:, None]
        out = np.empty((thetas.shape[0], self.T))
        out[:, 0] = 1.0
        out[:, 1::2] = math.sqrt(2.0) * np.cos(ang)
        out[:, 2::2] = math.sqrt(2.0) * np.sin(ang)
        return out


class ExponentialDecayDictionary(Dictionary):
    """exp(-theta t) sampled on a time grid; theta > 0 is the decay rate."""

    kind = "exponential_decay"

    def __init__(self, domain: DomainInterval, T: int, t_max: float | None = None):
        if domain.lo <= 0:
            raise ValueError("decay-rate domain must be positive")
        super().__init__(domain, T)
        # long enough for the slowest feature to decay out
        self.t_max = 10.0 / domain.lo if t_max is None else float(t_max)
        self.times = np.linspace(0.0, self.t_max, self.T)

    def _raw_jets(self, thetas):
        t = self.times[None, :]
        e = np.exp(-thetas[:, None] * t)
        return np.stack([e, -t * e, t**2 * e, -(t**3) * e])

    def _raw_value(self, thetas):
        return np.exp(-thetas[:, None] * self.times[None, :])


class ReparametrizedDictionary(Dictionary):
    """Composition with a smooth increasing change of variable theta = psi(u).

    ``psi_jets(u)`` must return (psi, psi', psi'', psi''') for a batch of u.
    Used to exercise reparametrization invariance of the metric.
    """

    kind = "reparametrized"

    def __init__(self, base: Dictionary, domain: DomainInterval, psi_jets):
        super().__init__(domain, base.T)
        self.base = base
        self.psi_jets = psi_jets

    def _raw_jets(self, us):
        s0, s1, s2, s3 = self.psi_jets(us)
        r = self.base.raw_jets(s0)
        s1, s2, s3 = (c[:, None] for c in (s1, s2, s3))
        b0, b1, b2, b3 = r
        # Faa di Bruno through order 3
        d0 = b0
        d1 = b1 * s1
        d2 = b2 * s1**2 + b1 * s2
        d3 = b3 * s1**3 + 3.0 * b2 * s1 * s2 + b1 * s3
        return np.stack([d0, d1, d2, d3])


_KINDS = {
    "gaussian_location": GaussianLocationDictionary,
    "fourier_lowpass": FourierLowpassDictionary,
    "exponential_decay": ExponentialDecayDictionary,
}


def make_dictionary(kind: str, domain, T: int | None = None, **params) -> Dictionary:
    """Factory used by the experiment config: {kind, params, T, domain:[lo,hi]}."""
    if isinstance(domain, (tuple, list)):
        domain = DomainInterval(float(domain[0]), float(domain[1]))
    if kind == "gaussian_location":
        if T is None:
            raise ValueError("gaussian_location requires T")
        return GaussianLocationDictionary(domain, T, **params)
    if kind == "fourier_lowpass":
        return FourierLowpassDictionary(domain, **params)
    if kind == "exponential_decay":
        if T is None:
            raise ValueError("exponential_decay requires T")
        return ExponentialDecayDictionary(domain, T, **params)
    raise ValueError(f"unknown dictionary kind {kind!r} (have {sorted(_KINDS)})")
