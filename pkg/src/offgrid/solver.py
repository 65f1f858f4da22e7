"""Penalized estimator over (B, theta): greedy insertion, convex group steps, refinement.

Minimizes

    (1 / 2 nu(Z)) || Y - B Phi(theta) ||_{L_T}^2 + kappa sum_k || B_k ||_{L^p(nu)}

for p in {1, 2} by alternating three monotone stages: insert the parameter
maximizing the dual correlation of the residual, solve the convex B-subproblem
at fixed theta by accelerated proximal gradient, and refine each theta_k by a
bounded line search on the smooth data-fidelity term (the penalty does not
depend on theta).  Zero groups are pruned and near-duplicate atoms merged, so
the trace of objective values is nonincreasing across accepted outer steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .certificates import op_norm_inf
from .kernels import KernelModel
from .measures import (DiscreteMeasure, MixtureParams, conjugate_exponent,
                       lq_norm, mixed_norm)


@dataclass(frozen=True)
class SolverConfig:
    kappa: float
    p: float = 2.0
    K_max: int = 8
    insertion_grid_step: float = 0.02
    max_outer_iters: int = 25
    max_inner_iters: int = 4000
    tol_obj: float = 1e-12
    tol_dual: float = 1e-6
    refine: bool = True
    refine_rounds: int = 12
    merge_radius_factor: float = 0.25

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.K_max < 1:
            raise ValueError("K_max must be >= 1")
        if self.p not in (1, 2, 1.0, 2.0):
            raise ValueError("optimization supports p in {1, 2} only")


@dataclass
class SolveTrace:
    objectives: list = field(default_factory=list)
    events: list = field(default_factory=list)  # (iter, event, dual_sup)
    final_dual_sup: float = math.nan
    converged: bool = False

    def log(self, it: int, event: str, dual: float, objective: float):
        self.events.append((it, objective, event, dual))

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "objective", "event", "dual_sup"])
            for it, obj, event, dual in self.events:
                w.writerow([it, repr(float(obj)), event, repr(float(dual))])


def objective(Y, B, theta, dic, nu: DiscreteMeasure, kappa: float, p: float) -> float:
    """Penalized objective; exact finite sum, any p in [1, 2]."""
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B, dtype=float)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    E = Y - B @ dic.features(theta) if theta.size else Y.copy()
    fid = 0.5 * float(np.einsum("z,zt,zt->", nu.weights, E, E)) / nu.mass
    pen = kappa * mixed_norm(B, nu, p) if B.size else 0.0
    return fid + pen


def dual_sup(R, model: KernelModel, nu: DiscreteMeasure, q: float,
             grid_step: float = 0.02, polish: bool = True) -> tuple[float, float]:
    """sup_theta || <R, phi(theta)> ||_{L^q(nu)} and its argmax.

    Grid maximization over the metric-arclength grid with a bounded local
    polish; ties resolved to the smaller theta by the scan order.
    """
    R = np.asarray(R, dtype=float)
    thetas, feats = model.grid_features(grid_step)
    vals = lq_norm(feats @ R.T, nu, q)
    k = int(np.argmax(vals))
    best, arg = float(vals[k]), float(thetas[k])
    if polish:
        lo = thetas[max(0, k - 1)]
        hi = thetas[min(len(thetas) - 1, k + 1)]
        if hi > lo:
            def neg(t):
                f = model.dic.features(np.array([t]))[0]
                return -float(lq_norm(R @ f, nu, q))
            res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded")
            if -res.fun > best:
                best, arg = float(-res.fun), float(res.x)
    return best, arg


def group_prox_step(B, gradient, step: float, kappa_nu: float, p: float,
                    nu: DiscreteMeasure) -> np.ndarray:
    """One forward-backward step for the scaled objective.

    p = 2: block soft-thresholding of each weighted group norm (the gradient
    is taken in the L^2(nu) geometry, so atom weights cancel from the smooth
    part and appear only inside the group norms).
    p = 1: entrywise soft-thresholding at level ``step * kappa_nu * a_z``
    (Euclidean geometry; the gradient carries the atom weights).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    X = np.asarray(B, dtype=float) - step * np.asarray(gradient, dtype=float)
    if p == 2:
        norms = lq_norm(X.T, nu, 2)
        scale = np.zeros_like(norms)
        pos = norms > 0
        scale[pos] = np.maximum(0.0, 1.0 - step * kappa_nu / norms[pos])
        return X * scale[None, :]
    if p == 1:
        thr = step * kappa_nu * nu.weights[:, None]
        return np.sign(X) * np.maximum(0.0, np.abs(X) - thr)
    raise ValueError("prox supports p in {1, 2} only")


def _scaled_pieces(Y, theta, model):
    Phi = model.dic.features(theta)              # (k, T)
    G = model.cov_gram(0, 0, theta)              # (k, k)
    Cmat = Y @ Phi.T                             # (k-correlations, unweighted)
    return G, Cmat


def _scaled_objective_gram(B, G, Cmat, yy2, nu, kappa_nu, p):
    # 0.5 ||Y - B Phi||^2_{L_T} expanded through the Gram; no T-sized work
    fid = yy2 - float(np.sum(nu.weights[:, None] * B * Cmat)) \
        + 0.5 * float(nu.weights @ np.einsum("zk,kl,zl->z", B, G, B))
    return fid + kappa_nu * mixed_norm(B, nu, p)


def kkt_residual(B, G, Cmat, nu: DiscreteMeasure, kappa_nu: float, p: float) -> float:
    """Max relative violation of the group first-order conditions at fixed theta."""
    corr = Cmat - B @ G
    q = conjugate_exponent(p)
    norms = lq_norm(corr.T, nu, q)
    active = lq_norm(B.T, nu, 2) > 0
    viol = 0.0
    if np.any(active):
        viol = float(np.max(np.abs(norms[active] - kappa_nu))) / kappa_nu
    if np.any(~active):
        viol = max(viol, float(np.max(norms[~active] - kappa_nu)) / kappa_nu)
    return viol


def fit_groups(Y, theta, model: KernelModel, nu: DiscreteMeasure, kappa: float,
               p: float, B0=None, max_iters: int = 4000, tol_obj: float = 1e-12,
               tol_dual: float = 1e-6) -> np.ndarray:
    """Convex B-subproblem at fixed theta by monotone accelerated proximal gradient.

    This is the oracle-mode solver: with theta frozen it is a convex weighted
    group lasso whose solution is certified by the group dual conditions.
    """
    Y = np.asarray(Y, dtype=float)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    n, k = Y.shape[0], theta.shape[0]
    if k == 0:
        return np.zeros((n, 0))
    kappa_nu = kappa * nu.mass
    G, Cmat = _scaled_pieces(Y, theta, model)
    yy2 = 0.5 * float(np.einsum("z,zt,zt->", nu.weights, Y, Y))

    # Lipschitz upper estimate from the Gram sup-norm (>= its spectral norm)
    L = max(op_norm_inf(G), 1e-12)
    if p == 1:
        L *= max(nu.max_weight, 1e-12)
    step = 1.0 / L
    pos_rows = nu.positive[:, None]

    B = np.zeros((n, k)) if B0 is None else np.array(B0, dtype=float)
    best_B = B.copy()
    best_obj = _scaled_objective_gram(B, G, Cmat, yy2, nu, kappa_nu, p)
    Z = B.copy()
    t_mom = 1.0
    prev_obj = best_obj
    check_obj = math.inf
    for it in range(max_iters):
        corr = Z @ G - Cmat
        grad = np.where(pos_rows, corr, 0.0) if p == 2 \
            else nu.weights[:, None] * corr
        B_new = group_prox_step(Z, grad, step, kappa_nu, p, nu)
        obj = _scaled_objective_gram(B_new, G, Cmat, yy2, nu, kappa_nu, p)
        if obj > prev_obj:                      # adaptive restart keeps monotonicity
            t_mom = 1.0
            Z = B.copy()
            prev_obj = best_obj
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom**2))
        Z = B_new + ((t_mom - 1.0) / t_next) * (B_new - B)
        B, t_mom = B_new, t_next
        if obj < best_obj:
            best_obj, best_B = obj, B_new.copy()
        if it % 25 == 24:
            plateau = abs(check_obj - obj) <= tol_obj * max(1.0, abs(obj))
            check_obj = obj
            if plateau or kkt_residual(best_B, G, Cmat, nu, kappa_nu, p) <= tol_dual:
                break
        prev_obj = obj
    return best_B


def refine_theta(Y, B, theta, dic, nu: DiscreteMeasure,
                 halfwidth: float | None = None) -> np.ndarray:
    """One coordinate pass of bounded line searches on the data-fidelity term.

    For fixed B the penalty is theta-free and the coordinate objective reduces
    to maximizing <u_k, phi(t)> with u_k the weighted residual profile of atom
    k, since the features have unit norm.  Each update is projected into the
    domain and accepted only if the fidelity strictly decreases, so boundary
    atoms with outward-pointing gradients stay put.
    """
    Y = np.asarray(Y, dtype=float)
    B = np.asarray(B, dtype=float)
    theta = np.array(np.atleast_1d(theta), dtype=float)
    k = theta.shape[0]
    if k == 0 or B.size == 0:
        return theta
    dom = dic.domain
    w = 0.1 * dom.width if halfwidth is None else halfwidth
    aB = nu.weights[:, None] * B
    for j in range(k):
        Phi = dic.features(theta)
        others = [i for i in range(k) if i != j]
        E = Y - B[:, others] @ Phi[others] if others else Y
        u = E.T @ aB[:, j]
        cur = float(u @ Phi[j])
        lo = max(dom.lo, theta[j] - w)
        hi = min(dom.hi, theta[j] + w)
        if hi <= lo:
            continue
        res = optimize.minimize_scalar(
            lambda t: -float(u @ dic.features(np.array([t]))[0]),
            bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10 * max(1.0, dom.width)})
        if -res.fun > cur:
            theta[j] = float(res.x)
    return theta


def _merge_close(B, theta, model, radius):
    """Merge atoms closer than ``radius`` in metric; weights summed."""
    theta = np.asarray(theta, dtype=float)
    order = np.argsort(theta)
    theta, B = theta[order], B[:, order]
    s_pos = model.arclength_of(theta)
    keep_theta, keep_cols = [], []
    i = 0
    while i < len(theta):
        j = i
        while j + 1 < len(theta) and s_pos[j + 1] - s_pos[j] < radius:
            j += 1
        cols = B[:, i:j + 1].sum(axis=1)
        norms = np.linalg.norm(B[:, i:j + 1], axis=0)
        pick = i + int(np.argmax(norms))
        keep_theta.append(theta[pick])
        keep_cols.append(cols)
        i = j + 1
    return np.array(keep_cols).T, np.array(keep_theta)


def solve(Y, dic, nu: DiscreteMeasure, config: SolverConfig,
          model: KernelModel | None = None) -> tuple[MixtureParams, SolveTrace]:
    """Greedy minimization of the penalized objective.

    Repeats insert -> convex B-step -> joint refinement -> prune/merge until
    the residual dual correlation drops below kappa nu(Z) (1 + tol_dual) or
    the capacity K_max is reached.  Returns the best iterate with a
    convergence flag in the trace.
    """
    Y = np.asarray(Y, dtype=float)
    if model is None:
        model = KernelModel(dic)
    n = Y.shape[0]
    p = float(config.p)
    q = conjugate_exponent(p)
    kappa_nu = config.kappa * nu.mass
    stop_level = kappa_nu * (1.0 + config.tol_dual)

    theta = np.empty(0)
    B = np.zeros((n, 0))
    trace = SolveTrace()
    obj = objective(Y, B, theta, dic, nu, config.kappa, p)
    trace.objectives.append(obj)
    trace.log(0, "init", math.nan, obj)

    merge_radius = config.merge_radius_factor * config.insertion_grid_step
    inner_tol = 0.1 * config.tol_dual

    def refit(th, B0):
        return fit_groups(Y, th, model, nu, config.kappa, p, B0=B0,
                          max_iters=config.max_inner_iters,
                          tol_obj=config.tol_obj, tol_dual=inner_tol)

    def refine_block(th, Bcur):
        w = 2.0 * config.insertion_grid_step / math.sqrt(
            float(np.min(dic.metric_density(th))))
        prev = math.inf
        for _ in range(config.refine_rounds):
            th = refine_theta(Y, Bcur, th, dic, nu, halfwidth=w)
            Bcur = refit(th, Bcur)
            cur = objective(Y, Bcur, th, dic, nu, config.kappa, p)
            if prev - cur <= config.tol_obj * max(1.0, abs(cur)):
                break
            prev = cur
        return th, Bcur

    for outer in range(1, config.max_outer_iters + 1):
        Phi = dic.features(theta) if theta.size else np.zeros((0, dic.T))
        R = Y - B @ Phi
        dual, th_new = dual_sup(R, model, nu, q, config.insertion_grid_step)
        if dual <= stop_level:
            trace.converged = True
            trace.final_dual_sup = dual
            trace.log(outer, "stop", dual, obj)
            break
        if theta.size >= config.K_max:
            trace.final_dual_sup = dual
            trace.log(outer, "capacity", dual, obj)
            break
        if theta.size and np.min(np.abs(model.arclength_of(th_new)
                                        - model.arclength_of(theta))) < merge_radius:
            # candidate duplicates an active atom: polish instead of inserting,
            # and stop (stalled) if the dual excess persists
            if config.refine:
                theta, B = refine_block(theta, B)
            else:
                B = refit(theta, B)
            Phi = dic.features(theta)
            dual, _ = dual_sup(Y - B @ Phi, model, nu, q, config.insertion_grid_step)
            trace.final_dual_sup = dual
            trace.converged = dual <= stop_level
            obj = min(obj, objective(Y, B, theta, dic, nu, config.kappa, p))
            trace.objectives.append(obj)
            trace.log(outer, "stop" if trace.converged else "stall", dual, obj)
            break
        theta = np.append(theta, th_new)
        B = np.hstack([B, np.zeros((n, 1))])
        trace.log(outer, f"insert:{th_new:.6g}", dual, obj)

        B = refit(theta, B)
        if config.refine:
            theta, B = refine_block(theta, B)

        keep = lq_norm(B.T, nu, 2) > 0
        if not np.all(keep):
            trace.log(outer, f"prune:{int(np.sum(~keep))}", dual, obj)
        B, theta = B[:, keep], theta[keep]
        new_obj = objective(Y, B, theta, dic, nu, config.kappa, p)

        if theta.size > 1:
            B_m, theta_m = _merge_close(B, theta, model, merge_radius)
            if theta_m.size < theta.size:
                B_try = refit(theta_m, B_m)
                obj_try = objective(Y, B_try, theta_m, dic, nu, config.kappa, p)
                if obj_try <= min(new_obj, obj):
                    B, theta, new_obj = B_try, theta_m, obj_try
                    trace.log(outer, "merge", dual, new_obj)

        if new_obj > obj:
            trace.log(outer, "no-progress", dual, new_obj)
            trace.objectives.append(obj)
            break
        obj = new_obj
        trace.objectives.append(obj)
    else:
        Phi = dic.features(theta) if theta.size else np.zeros((0, dic.T))
        dual, _ = dual_sup(Y - B @ Phi, model, nu, q, config.insertion_grid_step)
        trace.final_dual_sup = dual
        trace.log(config.max_outer_iters, "max-outer", dual, obj)

    if math.isnan(trace.final_dual_sup):
        Phi = dic.features(theta) if theta.size else np.zeros((0, dic.T))
        trace.final_dual_sup, _ = dual_sup(Y - B @ Phi, model, nu, q,
                                           config.insertion_grid_step)

    K = max(config.K_max, theta.size)
    params = MixtureParams.build(B if theta.size else np.zeros((n, 0)),
                                 theta, nu, K=K)
    return params, trace
