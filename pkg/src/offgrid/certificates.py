"""Dual certificates: separation machinery, Schur systems, and verification.

A certificate is a field ``eta(z, theta) = <phi(theta), P(z)>`` with
``P(z) = sum_k alpha_k(z) phi(theta*_k) + xi_k(z) phi^[1](theta*_k)`` whose
coefficients solve a 2s x 2s block system built from the Gram matrices
``K^[i,j]`` at the anchor set.  An interpolating certificate matches target
values at the anchors with vanishing covariant derivative; a derivative
certificate does the opposite.  Both exist with controlled coefficients as
soon as the anchors are separated enough that the Gram perturbation
``A_inf(theta*)`` stays below 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import DiscreteMeasure, lq_norm

NODE_TOL = 1e-9  # grid points this close (in metric) to an anchor are interpolation nodes


class SeparationError(ValueError):
    """Anchor set violates the pairwise-separation precondition."""


class CertificateInfeasibleError(RuntimeError):
    """The limit kernel's concavity/contrast functionals are not positive."""


class ConditioningError(RuntimeError):
    """The certificate linear system is too close to singular."""

    def __init__(self, msg, gap):
        super().__init__(f"{msg} (||I - M||_op,inf = {gap:.6g})")
        self.gap = gap


def op_norm_inf(A) -> float:
    """Operator norm for the sup-norm on vectors: the max row l1 sum."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.max(np.sum(np.abs(A), axis=1)))


@dataclass(frozen=True)
class GramBundle:
    """Kernel covariant Grams at an anchor set, and the stacked block matrix."""

    theta_star: np.ndarray
    G00: np.ndarray
    G10: np.ndarray
    G11: np.ndarray
    G20: np.ndarray
    G21: np.ndarray

    @classmethod
    def build(cls, model, theta_star) -> "GramBundle":
        th = np.atleast_1d(np.asarray(theta_star, dtype=float))
        return cls(th,
                   G00=model.cov_gram(0, 0, th),
                   G10=model.cov_gram(1, 0, th),
                   G11=model.cov_gram(1, 1, th),
                   G20=model.cov_gram(2, 0, th),
                   G21=model.cov_gram(2, 1, th))

    @property
    def gamma(self) -> np.ndarray:
        return np.block([[self.G00, self.G10.T], [self.G10, self.G11]])

    def a_inf(self) -> float:
        """Worst Gram perturbation: max of the six sup-norm operator norms."""
        s = len(self.theta_star)
        eye = np.eye(s)
        return max(op_norm_inf(eye - self.G00),
                   op_norm_inf(eye - self.G11),
                   op_norm_inf(eye + self.G20),
                   op_norm_inf(self.G10),
                   op_norm_inf(self.G10.T),
                   op_norm_inf(self.G21.T))  # K^[1,2](t) = K^[2,1](t)^T


def a_inf(model, theta_star) -> float:
    """A(theta*): how far the anchor Grams sit from their diagonal ideals."""
    th = np.atleast_1d(np.asarray(theta_star, dtype=float))
    if len(np.unique(th)) != len(th):
        raise ValueError("anchor parameters must be distinct")
    return GramBundle.build(model, th).a_inf()


def delta_search(surface, u: float, s: int, grid_step: float = 0.02,
                 restarts: int = 64, seed: int = 0) -> float:
    """Upper estimate of the critical separation delta(u, s).

    Smallest delta (resolved to ``grid_step``) such that the worst anchor
    configuration found with pairwise metric separation > delta has
    ``a_inf <= u``.  The worst case is searched over configurations equispaced
    in metric arclength at all feasible offsets plus random restarts, so the
    returned value is an upper estimate of the true infimum.  Returns +inf
    when even the domain diameter is insufficient.
    """
    if u <= 0 or s < 1:
        raise ValueError("need u > 0 and s >= 1")
    if s == 1:
        return grid_step
    S = surface.metric_diameter
    rng = np.random.default_rng(seed)

    def worst_a(delta: float) -> float:
        gap = delta * (1.0 + 1e-9)
        if (s - 1) * gap > S:
            return math.inf
        worst = 0.0
        free = S - (s - 1) * gap
        offsets = np.linspace(0.0, free, 5) if free > 0 else np.zeros(1)
        configs = [off + gap * np.arange(s) for off in offsets]
        for _ in range(restarts):
            extra = np.sort(rng.uniform(0.0, free, size=s)) if free > 0 else np.zeros(s)
            configs.append(extra + gap * np.arange(s))
        for pos in configs:
            th = surface.theta_of_arclength(np.asarray(pos))
            worst = max(worst, _surface_a_inf(surface, th))
        return worst

    delta_hi = S / (s - 1) * (1.0 - 1e-6)
    if worst_a(delta_hi) > u:
        return math.inf
    lo, hi = 0.0, delta_hi
    while hi - lo > grid_step:
        mid = 0.5 * (lo + hi)
        if worst_a(mid) <= u:
            hi = mid
        else:
            lo = mid
    return hi


def _surface_a_inf(surface, th) -> float:
    th = np.atleast_1d(np.asarray(th, dtype=float))
    s = len(th)
    eye = np.eye(s)
    g = {(i, j): np.asarray(surface.cov_gram(i, j, th))
         for (i, j) in [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1)]}
    return max(op_norm_inf(eye - g[(0, 0)]),
               op_norm_inf(eye - g[(1, 1)]),
               op_norm_inf(eye + g[(2, 0)]),
               op_norm_inf(g[(1, 0)]),
               op_norm_inf(g[(1, 0)].T),
               op_norm_inf(g[(2, 1)].T))


def thresholds(limit, r: float, rho: float) -> tuple[float, float]:
    """The two admissibility levels governing certificate feasibility.

    H1 bounds the kernel-approximation error V_T; H2 bounds the separation
    level u.  Both are exact min-expressions in the limit-kernel functionals.
    """
    eps = limit.eps_far(r / rho)
    nu = limit.nu_near(rho * r)
    if eps <= 0 or nu <= 0:
        raise CertificateInfeasibleError(
            f"limit kernel not usable at r={r}, rho={rho}: "
            f"eps_far={eps:.3g}, nu_near={nu:.3g}")
    L10, L20, L21 = limit.L(1, 0), limit.L(2, 0), limit.L(2, 1)
    H1 = min(0.5, L20, L21, nu / 10.0, eps / 10.0)
    H2 = min(1.0 / 6.0,
             8.0 * eps / (10.0 * (5.0 + 2.0 * L10)),
             8.0 * nu / (9.0 * (2.0 * L20 + 2.0 * L21 + 4.0)))
    return H1, H2


@dataclass(frozen=True)
class CertificateConstants:
    """The explicit constants entering both certificate constructions."""

    C_N: float
    C_N_prime: float
    C_F: float
    C_B: float
    c_N: float
    c_F: float
    c_B: float
    r: float
    rho: float
    u_inf: float
    u_inf_prime: float

    def __post_init__(self):
        if not self.C_F < 1:
            raise CertificateInfeasibleError("C_F must be < 1")
        for name in ("C_N", "C_N_prime", "C_F", "C_B", "c_N", "c_F", "c_B"):
            if getattr(self, name) <= 0:
                raise CertificateInfeasibleError(f"{name} must be positive")


def certificate_constants(limit, r: float, rho: float,
                          safety: float = 0.9) -> CertificateConstants:
    """Constants of the two certificate constructions for a given (r, rho).

    ``u_inf`` and ``u_inf_prime`` are placed a ``safety`` fraction below their
    admissible ceilings H2 and 1/6.
    """
    L20, L21, L10 = limit.L(2, 0), limit.L(2, 1), limit.L(1, 0)
    if not r < 1.0 / math.sqrt(2.0 * L20):
        raise CertificateInfeasibleError(
            f"r must be < 1/sqrt(2 L_20) = {1.0 / math.sqrt(2.0 * L20):.4g}")
    eps = limit.eps_far(r / rho)
    nu = limit.nu_near(rho * r)
    if eps <= 0 or nu <= 0:
        raise CertificateInfeasibleError("eps_far / nu_near not positive")
    _, H2 = thresholds(limit, r, rho)
    return CertificateConstants(
        C_N=nu / 180.0,
        C_N_prime=0.625 * L20 + 0.125 * L21 + 0.5,
        C_F=eps / 10.0,
        C_B=2.0,
        c_N=0.125 * L20 + 0.625 * L21 + 0.875,
        c_F=1.25 * L10 + 1.75,
        c_B=2.0,
        r=r, rho=rho,
        u_inf=safety * H2,
        u_inf_prime=safety / 6.0)


@dataclass(frozen=True)
class Certificate:
    """Coefficient fields over the signal atoms plus the anchor set."""

    kind: str  # "interpolating" | "derivative"
    alpha: np.ndarray  # n x s
    xi: np.ndarray     # n x s
    theta_star: np.ndarray
    V: np.ndarray      # n x s unit-L^q target columns
    q: float

    @property
    def s(self) -> int:
        return len(self.theta_star)


def build_certificate(model, theta_star, V, kind: str, nu: DiscreteMeasure,
                      q: float = 2.0) -> Certificate:
    """Solve the block interpolation system for the requested certificate kind.

    interpolating:  eta(z, t*_k) = V(z, t*_k)  and  D1 eta(z, .)(t*_k) = 0
    derivative:     eta(z, t*_k) = 0           and  D1 eta(z, .)(t*_k) = V(z, t*_k)

    Requires the reduced (Schur) matrix and the derivative Gram to be safely
    invertible in the sup operator norm.
    """
    th = np.atleast_1d(np.asarray(theta_star, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape != (nu.n, len(th)):
        raise ValueError(f"V must be n x s = {(nu.n, len(th))}, got {V.shape}")
    unit = lq_norm(V.T, nu, q)
    if np.max(np.abs(unit - 1.0)) > 1e-10:
        raise ValueError("target columns must have unit L^q(nu) norm")

    bundle = GramBundle.build(model, th)
    s = len(th)
    eye = np.eye(s)
    gap11 = op_norm_inf(eye - bundle.G11)
    if gap11 >= 0.99:
        raise ConditioningError("derivative Gram nearly singular", gap11)
    G11_inv = np.linalg.solve(bundle.G11, eye)
    schur = bundle.G00 - bundle.G10.T @ G11_inv @ bundle.G10
    gap_sc = op_norm_inf(eye - schur)
    if gap_sc >= 0.99:
        raise ConditioningError("Schur complement nearly singular", gap_sc)
    schur_inv = np.linalg.solve(schur, eye)

    if kind == "interpolating":
        alpha = V @ schur_inv.T
        xi = -alpha @ (G11_inv @ bundle.G10).T
    elif kind == "derivative":
        M = schur_inv @ bundle.G10.T @ G11_inv
        alpha = -V @ M.T
        xi = V @ G11_inv.T + (V @ M.T) @ (G11_inv @ bundle.G10).T
    else:
        raise ValueError("kind must be 'interpolating' or 'derivative'")
    return Certificate(kind, alpha, xi, th, V, q)


def certificate_field(cert: Certificate, model, thetas, order: int = 0) -> np.ndarray:
    """eta and its covariant derivatives on a parameter batch: (n, m) array.

    eta^{(o)}(z, theta) = sum_k alpha_k(z) K^[o,0](theta, t*_k)
                        + sum_k xi_k(z)    K^[o,1](theta, t*_k);
    the cross matrices are assembled through K^[o,j](x, y) = K^[j,o](y, x).
    """
    if not 0 <= order <= 2:
        raise ValueError("order must be 0, 1 or 2")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    K_a = np.asarray(model.cov_cross(0, order, cert.theta_star, thetas))  # (s, m)
    K_x = np.asarray(model.cov_cross(1, order, cert.theta_star, thetas))
    return cert.alpha @ K_a + cert.xi @ K_x


def eval_certificate(cert: Certificate, model, z: int, theta, order: int = 0):
    """eta^{(order)}(z, theta) for a single signal index z."""
    vals = certificate_field(cert, model, np.atleast_1d(theta), order)
    out = vals[z]
    return float(out[0]) if np.isscalar(theta) else out


def p_norm_lt(cert: Certificate, model, nu: DiscreteMeasure) -> float:
    """||P||_{L_T} of the certificate element, assembled from the Grams."""
    b = GramBundle.build(model, cert.theta_star)
    quad = (np.einsum("zk,kl,zl->z", cert.alpha, b.G00, cert.alpha)
            + 2.0 * np.einsum("zk,lk,zl->z", cert.alpha, b.G10, cert.xi)
            + np.einsum("zk,kl,zl->z", cert.xi, b.G11, cert.xi))
    return math.sqrt(float(nu.weights @ quad))


@dataclass(frozen=True)
class VerificationRow:
    point: str
    assumption: int
    region: str
    theta: float
    margin: float
    ok: bool


@dataclass
class VerificationReport:
    rows: list = field(default_factory=list)
    grid_step: float = 0.0
    all_pass: bool = True
    worst: dict = field(default_factory=dict)

    def add(self, point, assumption, region, theta, margin, tol=0.0):
        ok = bool(margin >= -tol)
        self.rows.append(VerificationRow(point, assumption, region,
                                         float(theta), float(margin), ok))
        self.all_pass &= ok
        key = (assumption, point)
        if key not in self.worst or margin < self.worst[key]:
            self.worst[key] = float(margin)

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["point", "assumption", "region", "theta", "margin", "pass"])
            for r in self.rows:
                w.writerow([r.point, r.assumption, r.region,
                            repr(r.theta), repr(r.margin), int(r.ok)])


def verify_assumptions(interp: Certificate, deriv: Certificate, model,
                       nu: DiscreteMeasure, q: float, r: float,
                       constants: CertificateConstants,
                       grid_step: float = 0.01) -> VerificationReport:
    """Measure the interpolation/decay/boundedness margins of both certificates.

    Evaluates ``||eta(., theta)||_{L^q(nu)}`` on a metric-arclength grid and
    checks the near-region quadratic bounds, the far-region level bounds and
    the L_T-norm bounds.  Grid points sitting exactly on an anchor are the
    interpolation nodes: there the inequalities hold with equality by
    construction, so they are asserted as identities instead of margins.
    """
    th_star = np.asarray(interp.theta_star, dtype=float)
    s = len(th_star)
    for a in range(s):
        for b in range(a + 1, s):
            if model.dist(th_star[a], th_star[b]) <= 2.0 * r:
                raise SeparationError(
                    f"anchors {a},{b} separated by "
                    f"{model.dist(th_star[a], th_star[b]):.4g} <= 2r = {2 * r:.4g}")

    p = 1.0 if q == math.inf else q / (q - 1.0)
    power = 0.5 / p - (0.0 if q == math.inf else 0.5 / q)
    nu_factor = nu.mass ** power

    thetas, sgrid, actual = model.arclength_grid(grid_step)
    s_star = np.asarray([model.arclength_of(t) for t in th_star])
    gaps = np.abs(sgrid[:, None] - s_star[None, :])
    nearest = np.argmin(gaps, axis=1)
    d_near = gaps[np.arange(len(thetas)), nearest]

    report = VerificationReport(grid_step=actual)

    eta_i = certificate_field(interp, model, thetas, order=0)
    eta_d = certificate_field(deriv, model, thetas, order=0)
    norm_i = lq_norm(eta_i.T, nu, q)
    norm_d = lq_norm(eta_d.T, nu, q)

    node = d_near < NODE_TOL
    near = (d_near <= r) & ~node
    far = d_near > r

    # the interpolation identities are asserted exactly at the anchors, where
    # the inequality margins are zero by construction
    eta_i_star = certificate_field(interp, model, th_star, order=0)
    eta_d_star = certificate_field(deriv, model, th_star, order=0)
    for k in range(s):
        res_i = float(lq_norm(eta_i_star[:, k] - interp.V[:, k], nu, q))
        res_d = float(lq_norm(eta_d_star[:, k], nu, q))
        report.add("node-identity", 1, "node", th_star[k], 1e-8 - res_i)
        report.add("node-identity", 2, "node", th_star[k], 1e-8 - res_d)

    d2 = d_near**2
    for m in np.nonzero(near)[0]:
        k = nearest[m]
        report.add("i", 1, "near", thetas[m],
                   (1.0 - constants.C_N * d2[m]) - norm_i[m])
        res = float(lq_norm(eta_i[:, m] - interp.V[:, k], nu, q))
        report.add("ii", 1, "near", thetas[m], constants.C_N_prime * d2[m] - res)
        sign = math.copysign(1.0, thetas[m] - th_star[k])
        res_d = float(lq_norm(eta_d[:, m] - deriv.V[:, k] * sign * d_near[m], nu, q))
        report.add("i", 2, "near", thetas[m], constants.c_N * d2[m] - res_d)

    for m in np.nonzero(far)[0]:
        report.add("iii", 1, "far", thetas[m], (1.0 - constants.C_F) - norm_i[m])
        report.add("ii", 2, "far", thetas[m], constants.c_F - norm_d[m])

    cap = math.sqrt(s) * nu_factor
    report.add("iv", 1, "global", float("nan"),
               constants.C_B * cap - p_norm_lt(interp, model, nu))
    report.add("iii", 2, "global", float("nan"),
               constants.c_B * cap - p_norm_lt(deriv, model, nu))
    return report


def quadratic_decay_check(eta_norms, dists, r: float, delta: float,
                          eps: float | None = None, L: float | None = None) -> bool:
    """Pointwise check of the quadratic-decay conclusions on a measured grid.

    With ``||D2 eta|| <= delta`` near an anchor, the vanishing variant must
    satisfy ``||eta|| <= (delta/2) d^2``; the unit-interpolating variant (pass
    ``eps``, the concavity level, and ``L`` with r < 1/sqrt(L)) must satisfy
    ``||eta|| <= 1 - ((eps - delta)/2) d^2``.
    """
    eta_norms = np.asarray(eta_norms, dtype=float)
    dists = np.asarray(dists, dtype=float)
    mask = dists <= r
    if eps is None:
        bound = 0.5 * delta * dists[mask] ** 2
    else:
        if L is not None and not r < 1.0 / math.sqrt(L):
            return False
        if not delta < eps:
            return False
        bound = 1.0 - 0.5 * (eps - delta) * dists[mask] ** 2
    return bool(np.all(eta_norms[mask] <= bound + 1e-12))
