"""Kernel of a dictionary, covariant derivatives, Riemannian metric and limit kernels.

The kernel is the normalized feature correlation
``K(theta, theta') = <phi(theta), phi(theta')>``.  Its covariant derivatives
``K^[i,j]`` are built by the order-raising recursion

    D_{i+1,j}[F](x, y) = g(x)^{i/2} d/dx ( D_{i,j}[F](x, y) / g(x)^{i/2} )

normalized by ``g(x)^{i/2} g(y)^{j/2}``; they are invariant under smooth
reparametrization and satisfy the diagonal identities K(t,t) = 1,
K^[1,0](t,t) = 0, K^[2,0](t,t) = -1, K^[2,1](t,t) = 0.  The metric is the
arclength ``|G(x) - G(y)|`` with ``G' = sqrt(g)``, ``g = ||d phi/d theta||^2``.

Limit kernels for the built-in families are stationary in arclength:
``K(x, y) = k(G(x) - G(y))`` for an even profile with k(0) = 1, k''(0) = -1,
so ``K^[i,j](x, y) = (-1)^j k^(i+j)(G(x) - G(y))`` and every regularity
constant reduces to a 1-d extremum of a profile derivative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, optimize

from .dictionaries import (METRIC_TOL, DegenerateMetricError, Dictionary,
                           DomainInterval)


def _cov_from_tables(i: int, j: int, J: np.ndarray, gx: np.ndarray,
                     gy: np.ndarray, order: str = "yx") -> np.ndarray:
    """Covariant derivative K^[i,j] from a table of plain kernel partials.

    ``J[a, b]`` holds d^a/dx^a d^b/dy^b K at a batch of parameter pairs
    (a <= i, b <= j suffice); ``gx``/``gy`` are the jets (g, g', g'') of the
    metric density on each side.  ``order`` selects whether the y- or x-
    recursion runs first; the normalized first-order operators commute, so
    both give the same value.
    """
    if not (0 <= i <= 3 and 0 <= j <= 3):
        raise ValueError("covariant orders must lie in 0..3")

    def run(table, steps, g):
        # table[b] = b-th derivative in the active variable; entries carry the
        # passive-variable orders (and the batch) in their leading axes.
        u0 = g[1] / g[0]
        u1 = g[2] / g[0] - u0**2
        for m in range(steps):
            new = []
            for b in range(len(table) - 1):
                val = table[b + 1]
                if m > 0:
                    corr = u0 * table[b]
                    if b:
                        corr = corr + b * u1 * table[b - 1]
                    val = val - 0.5 * m * corr
                new.append(val)
            table = new
        return table

    if order == "yx":
        cols = run([J[:, b] for b in range(J.shape[1])], j, gy)
        rows = run([cols[0][a] for a in range(cols[0].shape[0])], i, gx)
    elif order == "xy":
        cols = run([J[a, :] for a in range(J.shape[0])], i, gx)
        rows = run([cols[0][b] for b in range(cols[0].shape[0])], j, gy)
    else:
        raise ValueError("order must be 'yx' or 'xy'")
    return rows[0] / (gx[0] ** (0.5 * i) * gy[0] ** (0.5 * j))


@dataclass(frozen=True)
class ProximityReport:
    """How close the dictionary kernel is to its limit kernel."""

    V1: float
    V2: float
    V_T: float
    rho_T: float
    grid_step: float
    feasible: bool  # V_T <= L_{2,2} /\ L_3

    def rows(self):
        return [("V1", self.V1, self.grid_step),
                ("V2", self.V2, self.grid_step),
                ("V_T", self.V_T, self.grid_step),
                ("rho_T", self.rho_T, self.grid_step)]


class KernelModel:
    """Kernel, covariant derivatives and metric attached to a dictionary."""

    def __init__(self, dic: Dictionary, metric_table_size: int = 4097):
        self.dic = dic
        self.domain = dic.domain
        self._table_size = int(metric_table_size)
        self._G_cache: dict[float, float] = {}
        self._grid_feats: dict[float, tuple] = {}
        self._grid_cov: dict[float, tuple] = {}

    # -- kernel values --------------------------------------------------------

    def kernel(self, theta, theta2):
        """K(theta, theta') = <phi(theta), phi(theta')> in [-1, 1]."""
        x = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.atleast_1d(np.asarray(theta2, dtype=float))
        x, y = np.broadcast_arrays(x, y)
        px = self.dic.norm_jets(x.ravel())[0]
        py = self.dic.norm_jets(y.ravel())[0]
        val = np.einsum("mt,mt->m", px, py).reshape(x.shape)
        if np.isscalar(theta) and np.isscalar(theta2):
            return float(val[0])
        return val

    def cov(self, i: int, j: int, theta, theta2, order: str = "yx"):
        """K^[i,j](theta, theta') via the covariant recursion on kernel partials."""
        x = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.atleast_1d(np.asarray(theta2, dtype=float))
        x, y = np.broadcast_arrays(x, y)
        shape = x.shape
        jx = self.dic.norm_jets(x.ravel())
        jy = self.dic.norm_jets(y.ravel())
        gx = self.dic.g_jets(x.ravel())
        gy = self.dic.g_jets(y.ravel())
        J = np.einsum("amt,bmt->abm", jx[: i + 1], jy[: j + 1])
        val = _cov_from_tables(i, j, J, gx, gy, order=order).reshape(shape)
        if np.isscalar(theta) and np.isscalar(theta2):
            return float(val[0])
        return val

    def cov_feature_path(self, i: int, j: int, theta, theta2):
        """Independent path: <phi^[i](theta), phi^[j](theta')>."""
        x = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.atleast_1d(np.asarray(theta2, dtype=float))
        x, y = np.broadcast_arrays(x, y)
        cx = self.dic.cov_features(x.ravel())[i]
        cy = self.dic.cov_features(y.ravel())[j]
        val = np.einsum("mt,mt->m", cx, cy).reshape(x.shape)
        if np.isscalar(theta) and np.isscalar(theta2):
            return float(val[0])
        return val

    def cov_cross(self, i: int, j: int, thetas_a, thetas_b,
                  jets_a=None, g_a=None, jets_b=None, g_b=None) -> np.ndarray:
        """Full matrix K^[i,j](theta_a[k], theta_b[l]), blockwise in memory."""
        a = np.atleast_1d(np.asarray(thetas_a, dtype=float))
        b = np.atleast_1d(np.asarray(thetas_b, dtype=float))
        ja = self.dic.norm_jets(a) if jets_a is None else jets_a
        ga = self.dic.g_jets(a) if g_a is None else g_a
        jb = self.dic.norm_jets(b) if jets_b is None else jets_b
        gb = self.dic.g_jets(b) if g_b is None else g_b
        mA, mB = len(a), len(b)
        out = np.empty((mA, mB))
        block = max(1, 2_000_000 // max(mB, 1))
        for lo in range(0, mA, block):
            hi = min(mA, lo + block)
            J = np.einsum("amt,bnt->abmn", ja[: i + 1, lo:hi], jb[: j + 1])
            out[lo:hi] = _cov_from_tables(i, j, J, ga[:, lo:hi, None], gb[:, None, :])
        return out

    def cov_gram(self, i: int, j: int, thetas, thetas2=None) -> np.ndarray:
        t2 = thetas if thetas2 is None else thetas2
        return self.cov_cross(i, j, thetas, t2)

    def h_fn(self, theta):
        """h(theta) = K^[3,3](theta, theta), a squared covariant norm."""
        return self.cov(3, 3, theta, theta)

    def metric_g(self, theta):
        g = self.dic.metric_density(np.atleast_1d(theta))
        if np.any(g <= METRIC_TOL):
            raise DegenerateMetricError("g(theta) <= 0 inside the domain")
        return float(g[0]) if np.isscalar(theta) else g

    # -- Riemannian metric ----------------------------------------------------

    def metric_G(self, theta) -> float:
        """Arclength primitive of sqrt(g), anchored at the domain midpoint."""
        t = float(theta)
        if t not in self._G_cache:
            val, err = integrate.quad(
                lambda u: math.sqrt(self.dic.metric_density(u)[0]),
                self.domain.midpoint, t, limit=200)
            if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
                raise RuntimeError("arclength quadrature did not converge")
            self._G_cache[t] = val
        return self._G_cache[t]

    def dist(self, theta, theta2) -> float:
        return abs(self.metric_G(theta) - self.metric_G(theta2))

    @cached_property
    def _metric_table(self):
        th = np.linspace(self.domain.lo, self.domain.hi, self._table_size)
        sq = np.sqrt(self.dic.metric_density(th))
        s = integrate.cumulative_simpson(sq, x=th, initial=0.0)
        return th, s

    def arclength_of(self, theta):
        """Arclength coordinate s(theta) in [0, diameter], table-interpolated."""
        th, s = self._metric_table
        return np.interp(theta, th, s)

    def theta_of_arclength(self, s):
        th, tab = self._metric_table
        return np.interp(s, tab, th)

    @property
    def metric_diameter(self) -> float:
        return float(self._metric_table[1][-1])

    def arclength_grid(self, step: float):
        """Uniform-in-metric grid over the domain: (thetas, s_values, actual step)."""
        S = self.metric_diameter
        m = max(2, int(math.ceil(S / step)) + 1)
        s = np.linspace(0.0, S, m)
        return self.theta_of_arclength(s), s, S / (m - 1)

    def grid_features(self, step: float):
        """Cached (thetas, unit features) on the metric grid of a given step."""
        if step not in self._grid_feats:
            th, _, _ = self.arclength_grid(step)
            self._grid_feats[step] = (th, self.dic.features(th))
        return self._grid_feats[step]

    def grid_cov_features(self, step: float):
        """Cached (thetas, covariant feature stack) on the metric grid."""
        if step not in self._grid_cov:
            th, _, _ = self.arclength_grid(step)
            self._grid_cov[step] = (th, self.dic.cov_features(th))
        return self._grid_cov[step]

    # -- global kernel diagnostics --------------------------------------------

    def _scan_max(self, block_values, gap_mask, th, s):
        """Max over grid pairs of a value matrix, restricted by a metric-gap mask."""
        m = len(th)
        best, arg = -math.inf, None
        block = max(1, 2_000_000 // max(m, 1))
        for lo in range(0, m, block):
            hi = min(m, lo + block)
            V = np.array(block_values(lo, hi), dtype=float)
            gap = np.abs(s[lo:hi, None] - s[None, :])
            V[~gap_mask(gap)] = -math.inf
            k = int(np.argmax(V))
            if V.flat[k] > best:
                best = float(V.flat[k])
                arg = (float(th[lo + k // m]), float(th[k % m]))
        return best, arg

    def _polish_pair(self, value_fn, feasible, x, y, halfwidth):
        """Coordinate-wise bounded polish of a pair maximizer; keeps feasibility."""
        best = value_fn(x, y)
        for _ in range(2):
            for which in (0, 1):
                cur = y if which else x
                lo = max(self.domain.lo, cur - halfwidth)
                hi = min(self.domain.hi, cur + halfwidth)
                if hi <= lo:
                    continue

                def neg(t):
                    xx, yy = (x, t) if which else (t, y)
                    if not feasible(xx, yy):
                        return 2.0 - value_fn(xx, yy)  # repel from infeasible
                    return -value_fn(xx, yy)

                res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded")
                cand = (x, float(res.x)) if which else (float(res.x), y)
                if feasible(*cand) and value_fn(*cand) > best:
                    x, y = cand
                    best = value_fn(x, y)
        return best

    def eps_far(self, r: float, grid_step: float = 0.02) -> float:
        """1 - sup{|K(x,y)| : dist >= r}; returns 1.0 (with a warning) on an empty set."""
        if r <= 0:
            raise ValueError("r must be positive")
        th, s, _ = self.arclength_grid(grid_step)
        P = self.dic.norm_jets(th)[0]
        best, arg = self._scan_max(lambda lo, hi: np.abs(P[lo:hi] @ P.T),
                                   lambda gap: gap >= r, th, s)
        if arg is None:
            warnings.warn("no pair is r-separated on the domain; eps_far = 1 by convention")
            return 1.0
        best = max(best, self._polish_pair(
            lambda a, b: abs(self.kernel(a, b)),
            lambda a, b: self.dist(a, b) >= r, *arg, halfwidth=grid_step))
        return 1.0 - best

    def nu_near(self, r: float, grid_step: float = 0.02) -> float:
        """-sup{K^[0,2](x,y) : dist <= r}; positive for locally concave kernels."""
        if r < 0:
            raise ValueError("r must be nonnegative")
        th, s, _ = self.arclength_grid(grid_step)
        jets = self.dic.norm_jets(th)
        g = self.dic.g_jets(th)

        def bv(lo, hi):
            J = np.einsum("amt,bnt->abmn", jets[:1, lo:hi], jets[:3])
            return _cov_from_tables(0, 2, J, g[:, lo:hi, None], g[:, None, :])

        best, arg = self._scan_max(bv, lambda gap: gap <= r, th, s)
        if arg is not None:
            best = max(best, self._polish_pair(
                lambda a, b: self.cov(0, 2, a, b),
                lambda a, b: self.dist(a, b) <= r, *arg, halfwidth=grid_step))
        return -best

    def proximity(self, limit: "LimitKernelSpec",
                  grid_step: float = 0.02) -> ProximityReport:
        """V_T = max(V1, V2) and rho_T against a limit kernel, grid-resolved."""
        th, s, actual = self.arclength_grid(grid_step)
        m = len(th)
        jets = self.dic.norm_jets(th)
        g = self.dic.g_jets(th)

        V1 = 0.0
        block = max(1, 1_000_000 // max(m, 1))
        for lo in range(0, m, block):
            hi = min(m, lo + block)
            J = np.einsum("amt,bnt->abmn", jets[:3, lo:hi], jets[:3])
            gxb = g[:, lo:hi, None]
            gyb = g[:, None, :]
            X = np.broadcast_to(th[lo:hi, None], (hi - lo, m))
            Y = np.broadcast_to(th[None, :], (hi - lo, m))
            for i in range(3):
                for j in range(i, 3):
                    KT = _cov_from_tables(i, j, J[: i + 1, : j + 1], gxb, gyb)
                    KI = limit.cov(i, j, X, Y)
                    V1 = max(V1, float(np.max(np.abs(KT - KI))))

        hT = np.asarray(self.cov(3, 3, th, th))
        hI = np.asarray(limit.h_fn(th))
        V2 = float(np.max(np.abs(hT - hI)))

        ratio = self.dic.metric_density(th) / limit.g_fn(th)
        rho = float(np.sqrt(max(np.max(ratio), np.max(1.0 / ratio))))
        VT = max(V1, V2)
        return ProximityReport(V1, V2, VT, rho, actual,
                               feasible=VT <= min(limit.L(2, 2), limit.L3))


# -- limit kernels ------------------------------------------------------------


class StationaryProfile:
    """Even C^6 profile k(d) in metric units with k(0) = 1, k''(0) = -1."""

    def deriv(self, m: int, d):
        raise NotImplementedError


class GaussianProfile(StationaryProfile):
    """k(d) = exp(-d^2/2); derivatives via probabilists' Hermite polynomials."""

    def deriv(self, m, d):
        d = np.asarray(d, dtype=float)
        he = [np.ones_like(d), d]
        for n in range(1, m):
            he.append(d * he[n] - n * he[n - 1])
        return (-1.0) ** m * he[m] * np.exp(-0.5 * d * d)


class DirichletProfile(StationaryProfile):
    """Normalized Dirichlet kernel of cutoff f_c, rescaled to metric units."""

    def __init__(self, f_c: int):
        self.f_c = int(f_c)
        self.omega = 2.0 * np.pi * np.arange(1, self.f_c + 1)
        self.g = 2.0 * float(np.sum(self.omega**2)) / (2 * self.f_c + 1)

    def deriv(self, m, d):
        d = np.asarray(d, dtype=float)
        u = d[..., None] / math.sqrt(self.g)
        w = self.omega / math.sqrt(self.g)
        terms = w**m * np.cos(self.omega * u + m * np.pi / 2.0)
        base = 1.0 if m == 0 else 0.0
        return (base + 2.0 * terms.sum(axis=-1)) / (2 * self.f_c + 1)


class SechProfile(StationaryProfile):
    """k(d) = sech(d), the stationary form of 2 sqrt(xy)/(x+y) in log coordinates.

    Derivatives are polynomials in (s, t) = (sech, tanh) generated by the
    closure s' = -s t, t' = s^2.
    """

    def __init__(self):
        polys = [{(1, 0): 1.0}]
        for _ in range(6):
            nxt: dict = {}
            for (a, b), c in polys[-1].items():
                if a:
                    key = (a, b + 1)
                    nxt[key] = nxt.get(key, 0.0) - c * a
                if b:
                    key = (a + 2, b - 1)
                    nxt[key] = nxt.get(key, 0.0) + c * b
            polys.append(nxt)
        self._polys = polys

    def deriv(self, m, d):
        d = np.asarray(d, dtype=float)
        s = 1.0 / np.cosh(d)
        t = np.tanh(d)
        out = np.zeros_like(d)
        for (a, b), c in self._polys[m].items():
            out = out + c * s**a * t**b
        return out


class LimitKernelSpec:
    """Analytic limit kernel, stationary in arclength, with its constants.

    Exposes the same kernel/metric surface as :class:`KernelModel` so that
    separation searches and threshold formulas run on either.
    """

    def __init__(self, profile: StationaryProfile, g_fn, G_fn, G_inv,
                 domain_inf: DomainInterval, d_cap: float = 64.0, label: str = ""):
        self.profile = profile
        self.g_fn = g_fn
        self.G_fn = G_fn
        self.G_inv = G_inv
        self.domain_inf = domain_inf
        self.label = label
        lo, hi = domain_inf.lo_inf, domain_inf.hi_inf
        if math.isfinite(lo) and math.isfinite(hi):
            self.d_max = min(d_cap, float(G_fn(hi) - G_fn(lo)))
        else:
            self.d_max = d_cap
        self._d_grid = np.linspace(0.0, self.d_max, 20001)
        self._validate()

    def _validate(self):
        k0 = float(self.profile.deriv(0, np.zeros(1))[0])
        k2 = float(self.profile.deriv(2, np.zeros(1))[0])
        if abs(k0 - 1.0) > 1e-8 or abs(k2 + 1.0) > 1e-8:
            raise ValueError("profile must satisfy k(0)=1 and k''(0)=-1")
        if self.m_g <= 0:
            raise ValueError("inf of the limit metric density must be positive")

    # -- kernel surface --------------------------------------------------------

    def kernel(self, theta, theta2):
        d = self.G_fn(np.asarray(theta, dtype=float)) \
            - self.G_fn(np.asarray(theta2, dtype=float))
        return self.profile.deriv(0, d)

    def cov(self, i, j, theta, theta2):
        d = self.G_fn(np.asarray(theta, dtype=float)) \
            - self.G_fn(np.asarray(theta2, dtype=float))
        return (-1.0) ** j * self.profile.deriv(i + j, d)

    def cov_gram(self, i, j, thetas, thetas2=None):
        a = np.atleast_1d(np.asarray(thetas, dtype=float))
        b = a if thetas2 is None else np.atleast_1d(np.asarray(thetas2, dtype=float))
        return np.asarray(self.cov(i, j, a[:, None], b[None, :]))

    def h_fn(self, theta):
        val = -float(self.profile.deriv(6, np.zeros(1))[0])
        return val * np.ones_like(np.asarray(theta, dtype=float))

    def dist(self, theta, theta2):
        return abs(float(self.G_fn(theta)) - float(self.G_fn(theta2)))

    def arclength_of(self, theta):
        return self.G_fn(np.asarray(theta, dtype=float)) - self._s0

    def theta_of_arclength(self, s):
        return self.G_inv(np.asarray(s, dtype=float) + self._s0)

    @cached_property
    def _s0(self):
        lo = self.domain_inf.lo_inf
        ref = lo if math.isfinite(lo) else self.domain_inf.lo
        return float(self.G_fn(ref))

    @property
    def metric_diameter(self) -> float:
        return self.d_max

    # -- constants --------------------------------------------------------------

    def _sup_abs_deriv(self, m: int, lo: float = 0.0, hi: float | None = None) -> float:
        hi = self.d_max if hi is None else min(hi, self.d_max)
        if hi <= lo:
            return float(np.abs(self.profile.deriv(m, np.array([lo])))[0])
        inner = self._d_grid[(self._d_grid > lo) & (self._d_grid < hi)]
        if len(inner) < 3:
            inner = np.linspace(lo, hi, 101)[1:-1]
        grid = np.concatenate([[lo], inner, [hi]])
        vals = np.abs(self.profile.deriv(m, grid))
        k = int(np.argmax(vals))
        a, b = grid[max(0, k - 1)], grid[min(len(grid) - 1, k + 1)]
        res = optimize.minimize_scalar(
            lambda d: -float(np.abs(self.profile.deriv(m, np.array([d])))[0]),
            bounds=(a, b), method="bounded")
        return max(float(vals[k]), float(-res.fun))

    def L(self, i: int, j: int) -> float:
        """L_{i,j} = sup |K^[i,j]| over the extended domain."""
        return self._sup_abs_deriv(i + j)

    @cached_property
    def L3(self) -> float:
        """sup h = sup of K^[3,3] on the diagonal (constant when stationary)."""
        return -float(self.profile.deriv(6, np.zeros(1))[0])

    @cached_property
    def m_g(self) -> float:
        lo, hi = self.domain_inf.lo_inf, self.domain_inf.hi_inf
        if math.isfinite(lo) and math.isfinite(hi):
            grid = np.linspace(lo, hi, 4001)
        else:
            grid = np.linspace(self.domain_inf.lo, self.domain_inf.hi, 4001)
        return float(np.min(self.g_fn(grid)))

    def eps_far(self, r: float) -> float:
        if r > self.d_max:
            warnings.warn("no pair is r-separated; eps_far = 1 by convention")
            return 1.0
        return 1.0 - self._sup_abs_deriv(0, lo=r)

    def nu_near(self, r: float) -> float:
        hi = min(r, self.d_max)
        inner = self._d_grid[(self._d_grid > 0.0) & (self._d_grid < hi)]
        if len(inner) < 3:
            inner = np.linspace(0.0, hi, 101)[1:-1]
        grid = np.concatenate([[0.0], inner, [hi]])
        vals = self.profile.deriv(2, grid)
        k = int(np.argmax(vals))
        a, b = grid[max(0, k - 1)], grid[min(len(grid) - 1, k + 1)]
        res = optimize.minimize_scalar(
            lambda d: -float(self.profile.deriv(2, np.array([d]))[0]),
            bounds=(a, b), method="bounded")
        return -max(float(vals[k]), float(-res.fun))


def gaussian_limit(sigma: float, domain: DomainInterval | None = None) -> LimitKernelSpec:
    """exp(-(x-y)^2 / (4 sigma^2)): limit of the gaussian_location kernel."""
    g = 1.0 / (2.0 * sigma**2)
    sq = math.sqrt(g)
    dom = domain if domain is not None else DomainInterval(-1.0, 1.0)
    return LimitKernelSpec(GaussianProfile(),
                           lambda th: g * np.ones_like(np.asarray(th, float)),
                           lambda th: np.asarray(th, float) * sq,
                           lambda s: np.asarray(s, float) / sq,
                           dom, label="gaussian")


def dirichlet_limit(f_c: int, domain: DomainInterval) -> LimitKernelSpec:
    """The fourier_lowpass kernel itself (already analytic); V_T = 0 exactly."""
    prof = DirichletProfile(f_c)
    sq = math.sqrt(prof.g)
    return LimitKernelSpec(prof,
                           lambda th: prof.g * np.ones_like(np.asarray(th, float)),
                           lambda th: np.asarray(th, float) * sq,
                           lambda s: np.asarray(s, float) / sq,
                           domain, d_cap=min(1.0, domain.width) * sq,
                           label="dirichlet")


def sech_limit(domain: DomainInterval) -> LimitKernelSpec:
    """2 sqrt(xy)/(x+y): continuum limit of the exponential_decay kernel."""
    if domain.lo_inf <= 0 or not math.isfinite(domain.hi_inf):
        raise ValueError("exponential-decay limit needs a bounded positive domain")
    return LimitKernelSpec(SechProfile(),
                           lambda th: 0.25 / np.asarray(th, float) ** 2,
                           lambda th: 0.5 * np.log(np.asarray(th, float)),
                           lambda s: np.exp(2.0 * np.asarray(s, float)),
                           domain, label="sech")


def limit_for(dic: Dictionary) -> LimitKernelSpec:
    """The natural analytic limit kernel for a built-in dictionary."""
    if dic.kind == "gaussian_location":
        return gaussian_limit(dic.sigma, DomainInterval(dic.domain.lo, dic.domain.hi))
    if dic.kind == "fourier_lowpass":
        pad = min(0.05 * dic.domain.width, 0.45 * (1.0 - dic.domain.width))
        dom = DomainInterval(dic.domain.lo, dic.domain.hi,
                             dic.domain.lo - pad, dic.domain.hi + pad)
        return dirichlet_limit(dic.f_c, dom)
    if dic.kind == "exponential_decay":
        dom = DomainInterval(dic.domain.lo, dic.domain.hi,
                             dic.domain.lo * 0.9, dic.domain.hi * 1.1)
        return sech_limit(dom)
    raise ValueError(f"no built-in limit kernel for dictionary kind {dic.kind!r}")
