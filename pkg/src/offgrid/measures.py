"""Finite weighted measures over signal indices, mixed norms and the forward model.

The observation is a stack of signals ``Y(z) in R^T`` indexed by finitely many
atoms z carrying nonnegative weights a_z.  Norms over the index set are
weighted L^p norms; the estimator's penalty is the mixed norm
``sum_k || B_k ||_{L^p}`` which couples sparsity across signals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dictionaries import Dictionary


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite positive measure sum_z a_z delta_z with distinct integer indices."""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)
        if idx.ndim != 1 or w.shape != idx.shape:
            raise ValueError("indices and weights must be 1-d of equal length")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("indices must be distinct")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if w.sum() <= 0:
            raise ValueError("total mass must be positive")

    @classmethod
    def from_weights(cls, weights) -> "DiscreteMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(np.arange(len(w)), w)

    @classmethod
    def counting(cls, n: int) -> "DiscreteMeasure":
        return cls.from_weights(np.ones(n))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def max_weight(self) -> float:
        return float(np.max(self.weights))

    @property
    def positive(self) -> np.ndarray:
        """Mask of atoms with strictly positive weight (the L^inf support)."""
        return self.weights > 0


def lq_norm(x, nu: DiscreteMeasure, q: float) -> np.ndarray:
    """Weighted L^q(nu) norm along the last axis; q may be math.inf.

    Zero-weight atoms are excluded from the q = inf supremum (ess sup).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != nu.n:
        raise ValueError("field length must match the number of atoms")
    if q == math.inf:
        xa = np.where(nu.positive, np.abs(x), 0.0)
        return np.max(xa, axis=-1)
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return np.abs(x) @ nu.weights
    if q == 2:
        return np.sqrt((x * x) @ nu.weights)
    return (np.abs(x) ** q @ nu.weights) ** (1.0 / q)


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def mixed_norm(B, nu: DiscreteMeasure, p: float) -> float:
    """sum_k || B_k ||_{L^p(nu)} over the columns (features) of B (n x K)."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("the penalty exponent p must lie in [1, 2]")
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != nu.n:
        raise ValueError(f"B must be (n={nu.n}) x K, got {B.shape}")
    return float(np.sum(lq_norm(B.T, nu, p)))


@dataclass(frozen=True)
class SignalSet:
    """n x T real matrix of signals, one row per atom of the measure."""

    data: np.ndarray
    measure: DiscreteMeasure

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", d)
        if d.ndim != 2 or d.shape[0] != self.measure.n:
            raise ValueError("row count must equal the number of atoms")
        if not np.all(np.isfinite(d)):
            raise ValueError("signal entries must be finite")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def lt_norm(self) -> float:
        """|| . ||_{L_T}: sqrt(sum_z a_z ||row z||^2)."""
        return math.sqrt(float(np.einsum("z,zt,zt->", self.measure.weights,
                                         self.data, self.data)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z"] + [f"y_{t}" for t in range(self.T)])
            for z, row in zip(self.measure.indices, self.data):
                w.writerow([int(z)] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, measure: DiscreteMeasure | None = None) -> "SignalSet":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = rows[1:]
        idx = np.array([int(r[0]) for r in body])
        data = np.array([[float(v) for v in r[1:]] for r in body])
        if measure is None:
            measure = DiscreteMeasure(idx, np.ones(len(idx)))
        return cls(data, measure)


@dataclass(frozen=True)
class MixtureParams:
    """Per-signal linear weights B (n x K) and shared nonlinear parameters theta (K,)."""

    B: np.ndarray
    theta: np.ndarray
    K: int
    support: tuple = field(default=())

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "theta", th)
        if B.shape[1] != th.shape[0]:
            raise ValueError("B must have one column per theta entry")
        if th.shape[0] > self.K:
            raise ValueError("more atoms than the capacity K")
        if len(self.support) > self.K:
            raise ValueError("support larger than the capacity K")

    @classmethod
    def build(cls, B, theta, nu: DiscreteMeasure, K: int | None = None,
              tol: float = 0.0) -> "MixtureParams":
        """Construct with the support read off the weighted column norms."""
        B = np.atleast_2d(np.asarray(B, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        norms = lq_norm(B.T, nu, 2)
        support = tuple(int(k) for k in np.nonzero(norms > tol)[0])
        return cls(B, theta, K=B.shape[1] if K is None else int(K), support=support)

    @property
    def s(self) -> int:
        return len(self.support)

    def restrict(self) -> "MixtureParams":
        """Drop columns outside the support."""
        keep = list(self.support)
        return MixtureParams(self.B[:, keep], self.theta[keep], self.K,
                             tuple(range(len(keep))))

    def to_csv(self, path):
        n = self.B.shape[0]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "theta"] + [f"b_z{z}" for z in range(n)])
            for k in range(self.B.shape[1]):
                w.writerow([k, repr(float(self.theta[k]))]
                           + [repr(float(v)) for v in self.B[:, k]])

    @classmethod
    def from_csv(cls, path, K: int | None = None) -> "MixtureParams":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = rows[1:]
        theta = np.array([float(r[1]) for r in body])
        B = np.array([[float(v) for v in r[2:]] for r in body]).T
        return cls(B, theta, K=B.shape[1] if K is None else K,
                   support=tuple(range(B.shape[1])))


def synthesize(params: MixtureParams, dic: Dictionary, nu: DiscreteMeasure,
               noise: np.ndarray | None = None) -> SignalSet:
    """Forward model: row z is sum_k B_{z,k} phi(theta_k)/||phi(theta_k)|| + noise."""
    if params.theta.size and not dic.domain.contains(params.theta):
        raise ValueError("mixture parameter outside the dictionary domain")
    if params.theta.size:
        Phi = dic.features(params.theta)  # (K, T)
        data = params.B @ Phi
    else:
        data = np.zeros((nu.n, dic.T))
    if noise is not None:
        data = data + np.asarray(noise, dtype=float)
    return SignalSet(data, nu)


def prediction_error(est: MixtureParams, truth: MixtureParams, dic: Dictionary,
                     nu: DiscreteMeasure) -> float:
    """nu-averaged L_T distance between the two predicted mixtures (R_hat)."""
    diff = synthesize(est, dic, nu).data - synthesize(truth, dic, nu).data
    sq = float(np.einsum("z,zt,zt->", nu.weights, diff, diff))
    return math.sqrt(sq / nu.mass)


def dual_unit(f, nu: DiscreteMeasure, p: float) -> np.ndarray:
    """The unit-L^q dual field v(f): sign(f) |f|^{p-1} / ||f||_p^{p-1}.

    Returns the constant nu(Z)^{-1/q} when f vanishes in L^p(nu); q is the
    conjugate exponent of p.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    f = np.asarray(f, dtype=float)
    q = conjugate_exponent(p)
    norm = float(lq_norm(f, nu, p))
    if norm == 0.0:
        const = 1.0 if q == math.inf else nu.mass ** (-1.0 / q)
        return np.full(nu.n, const)
    if p == 1:
        return np.sign(f)
    return np.sign(f) * (np.abs(f) / norm) ** (p - 1.0)
