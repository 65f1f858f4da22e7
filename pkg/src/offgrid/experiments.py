"""Configuration-driven experiments: certificate reports, single trials, Monte Carlo studies.

Config files are TOML.  A study sweeps exactly one of T, s or n, runs R
replicates per sweep point with independent counter-based noise streams, and
emits a summary CSV, a plot-data CSV (``x,y,lo,hi``) and a key-value meta CSV
with the fitted log-log slope and the theoretical failure probability.  All
outputs are byte-deterministic given the config and seed.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import certificates as cert
from . import solver as slv
from . import tails
from .dictionaries import Dictionary, make_dictionary
from .kernels import KernelModel, LimitKernelSpec, limit_for
from .measures import (DiscreteMeasure, MixtureParams, lq_norm, prediction_error,
                       synthesize)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    dictionary: dict
    measure: dict
    truth: dict
    noise: dict
    certificate: dict
    solver: dict
    study: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        def section(name, defaults):
            out = dict(defaults)
            out.update(raw.get(name, {}))
            return out

        cfg = cls(
            dictionary=section("dictionary", {
                "kind": "gaussian_location", "T": 512,
                "domain": [-4.0, 4.0], "params": {"sigma": 0.3}}),
            measure=section("measure", {"n": 4, "weights": "uniform"}),
            truth=section("truth", {
                "s": 2, "amplitude": 1.0, "separation_multiplier": 1.0,
                "theta": [], "random_signs": True}),
            noise=section("noise", {"sigma": 0.5, "delta_T": 1.0, "seed": 0}),
            certificate=section("certificate", {
                "r": 0.5, "rho": 1.02, "grid_step": 0.02,
                "proximity_grid_step": 0.02, "delta_grid_step": 0.02,
                "restarts": 32, "safety": 0.9}),
            solver=section("solver", {
                "p": 2, "K_max": 6, "insertion_grid_step": 0.05,
                "max_outer_iters": 25, "max_inner_iters": 2000,
                "tol_obj": 1e-12, "tol_dual": 1e-4, "refine": True,
                "refine_rounds": 6, "kappa_override": 0.0}),
            study=section("study", {
                "tau": 100.0, "T_sweep": [], "s_sweep": [], "n_sweep": [],
                "replicates": 8, "seed": 0, "constants": "theoretical",
                "C1": 1.0, "C3": 1.0, "C4_prime": 1.0,
                "sup_grid_step": 0.05}))
        cfg.validate()
        return cfg

    def validate(self):
        if self.truth["separation_multiplier"] < 1.0:
            raise ConfigError("separation_multiplier must be >= 1")
        if self.study["replicates"] < 1:
            raise ConfigError("replicates must be >= 1")
        if int(self.solver["p"]) not in (1, 2):
            raise ConfigError("solver p must be 1 or 2")
        sweeps = [bool(self.study[k]) for k in ("T_sweep", "s_sweep", "n_sweep")]
        if sum(sweeps) > 1:
            raise ConfigError("at most one of T_sweep, s_sweep, n_sweep may be set")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        study = dict(self.study)
        study["seed"] = int(seed)
        return replace(self, study=study)


def _resolve_delta(noise_spec: dict, T: int) -> float:
    d = noise_spec["delta_T"]
    if isinstance(d, str):
        if d.replace(" ", "") == "1/T":
            return 1.0 / T
        raise ConfigError(f"unknown delta_T rule {d!r}")
    return float(d)


def _resolve_tau(study: dict, T: int) -> float:
    tau = study["tau"]
    if isinstance(tau, str):
        if tau.strip() == "T":
            return float(T)
        raise ConfigError(f"unknown tau rule {tau!r}")
    return float(tau)


@dataclass
class Instance:
    """Everything a trial needs at one sweep point, built once and reused."""

    config: ExperimentConfig
    T: int
    n: int
    s: int
    dic: Dictionary
    model: KernelModel
    limit: LimitKernelSpec
    nu: DiscreteMeasure
    truth: MixtureParams
    noise_model: tails.NoiseModel
    kappa: float
    tau: float
    delta_T: float
    constants: tails.TheoreticalConstants
    separation: float


def _build_dictionary(cfg: ExperimentConfig, T: int) -> Dictionary:
    d = cfg.dictionary
    params = dict(d.get("params", {}))
    try:
        if d["kind"] == "fourier_lowpass":
            params.setdefault("f_c", (T - 1) // 2)
            return make_dictionary(d["kind"], d["domain"], **params)
        return make_dictionary(d["kind"], d["domain"], T=T, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"dictionary spec invalid: {exc}") from exc


def _truth_thetas(cfg: ExperimentConfig, model: KernelModel,
                  limit: LimitKernelSpec, s: int) -> tuple[np.ndarray, float]:
    """Anchor placement: explicit, or equispaced in arclength at a multiple of
    the certificate separation threshold."""
    explicit = list(cfg.truth.get("theta", []))
    if explicit:
        th = np.asarray(explicit, dtype=float)
        if len(th) != s:
            raise ConfigError(f"explicit truth theta has {len(th)} entries, s = {s}")
        seps = [model.dist(a, b) for i, a in enumerate(th) for b in th[i + 1:]]
        return th, (min(seps) if seps else math.inf)
    c = cfg.certificate
    cc = cert.certificate_constants(limit, c["r"], c["rho"], c["safety"])
    if s > 1:
        d1 = cert.delta_search(limit, cc.u_inf, s, grid_step=c["delta_grid_step"],
                               restarts=c["restarts"])
        d2 = cert.delta_search(limit, cc.u_inf_prime, s, grid_step=c["delta_grid_step"],
                               restarts=c["restarts"])
        delta = max(d1, d2)
    else:
        delta = 0.0
    if not math.isfinite(delta):
        raise ConfigError("separation threshold infinite: domain too small for s atoms")
    threshold = 2.0 * max(c["r"], c["rho"] * delta)
    sep = cfg.truth["separation_multiplier"] * threshold
    S = model.metric_diameter
    span = (s - 1) * sep
    if span > S:
        raise ConfigError(f"anchors need metric span {span:.3g} > diameter {S:.3g}")
    start = 0.5 * (S - span)
    return model.theta_of_arclength(start + sep * np.arange(s)), sep


def build_instance(cfg: ExperimentConfig, T: int | None = None,
                   n: int | None = None, s: int | None = None) -> Instance:
    T = int(T if T is not None else cfg.dictionary["T"])
    n = int(n if n is not None else cfg.measure["n"])
    s = int(s if s is not None else cfg.truth["s"])

    dic = _build_dictionary(cfg, T)
    model = KernelModel(dic)
    limit = limit_for(dic)

    w = cfg.measure["weights"]
    nu = DiscreteMeasure.counting(n) if isinstance(w, str) and w == "uniform" \
        else DiscreteMeasure.from_weights(np.resize(np.asarray(w, dtype=float), n))

    theta_star, separation = _truth_thetas(cfg, model, limit, s)
    amp = float(cfg.truth["amplitude"])
    if cfg.truth.get("random_signs", True):
        rng = np.random.Generator(np.random.Philox(
            key=np.array([int(cfg.study["seed"]) % (1 << 64), 0xB0], dtype=np.uint64)))
        signs = rng.choice([-1.0, 1.0], size=(n, s))
    else:
        signs = np.ones((n, s))
    truth = MixtureParams.build(amp * signs, theta_star, nu)

    delta_T = _resolve_delta(cfg.noise, T)
    tau = _resolve_tau(cfg.study, T)
    noise_model = tails.NoiseModel(float(cfg.noise["sigma"]), delta_T,
                                  seed=int(cfg.study["seed"]))

    c = cfg.certificate
    cc = cert.certificate_constants(limit, c["r"], c["rho"], c["safety"])
    constants = tails.event_constants(cc, limit.L(2, 2), limit.L3)

    kappa = float(cfg.solver.get("kappa_override", 0.0))
    if kappa <= 0.0:
        p = int(cfg.solver["p"])
        if cfg.study["constants"] == "theoretical":
            C1, C3 = constants.C1, constants.C3
        else:
            C1, C3 = float(cfg.study["C1"]), float(cfg.study["C3"])
        if p == 2:
            kappa = tails.kappa_p2(tau, n, noise_model.sigma, delta_T,
                                   nu.max_weight, nu.mass, C1)
        else:
            kappa = tails.kappa_p1(tau, noise_model.sigma, delta_T, nu.mass, C3)
    if kappa <= 0.0:
        kappa = 1e-8  # noiseless exploration still needs a positive penalty

    return Instance(cfg, T, n, s, dic, model, limit, nu, truth, noise_model,
                    kappa, tau, delta_T, constants, separation)


@dataclass(frozen=True)
class TrialResult:
    rep: int
    R_hat: float
    bound: float
    M0: float
    M1: float
    M2: float
    event_ok: bool
    kappa: float
    runtime_ms: int
    converged: bool
    bound_ok: bool
    support: int

    HEADER = ["rep", "R_hat", "bound", "M0", "M1", "M2", "event_ok", "kappa",
              "runtime_ms", "converged", "bound_ok", "support"]
    HEADER_DETERMINISTIC = [h for h in HEADER if h != "runtime_ms"]

    def row(self, deterministic: bool = False):
        vals = [self.rep, repr(self.R_hat), repr(self.bound), repr(self.M0),
                repr(self.M1), repr(self.M2), int(self.event_ok),
                repr(self.kappa), self.runtime_ms, int(self.converged),
                int(self.bound_ok), self.support]
        if deterministic:
            del vals[8]  # wall-clock time is not reproducible byte-for-byte
        return vals


BOUND_SLACK = 0.05  # grid-estimated constants get 5% headroom in the coherence check


def run_trial(inst: Instance, rep: int, trace_path=None) -> TrialResult:
    """synthesize -> solve -> prediction error -> suprema statistics -> event check."""
    cfg = inst.config
    t0 = time.perf_counter()
    W = tails.sample_noise(inst.noise_model, inst.nu.n, inst.dic.T, replicate=rep)
    Y = synthesize(inst.truth, inst.dic, inst.nu, W).data

    p = int(cfg.solver["p"])
    scfg = slv.SolverConfig(
        kappa=inst.kappa, p=float(p), K_max=int(cfg.solver["K_max"]),
        insertion_grid_step=float(cfg.solver["insertion_grid_step"]),
        max_outer_iters=int(cfg.solver["max_outer_iters"]),
        max_inner_iters=int(cfg.solver["max_inner_iters"]),
        tol_obj=float(cfg.solver["tol_obj"]),
        tol_dual=float(cfg.solver["tol_dual"]),
        refine=bool(cfg.solver["refine"]),
        refine_rounds=int(cfg.solver["refine_rounds"]))
    est, trace = slv.solve(Y, inst.dic, inst.nu, scfg, model=inst.model)
    if trace_path is not None:
        trace.to_csv(trace_path)

    r_hat = prediction_error(est, inst.truth, inst.dic, inst.nu)
    q = math.inf if p == 1 else 2.0
    step = float(cfg.study["sup_grid_step"])
    M = [tails.sup_stat(W, inst.model, inst.nu, i, q, step) for i in range(3)]
    level = inst.constants.C_cal * inst.kappa * inst.nu.mass
    event_ok = all(m <= level for m in M)
    bound = inst.constants.C0 * math.sqrt(inst.s) \
        * inst.nu.mass ** (1.0 / p) * inst.kappa
    bound_ok = (not event_ok) or (r_hat <= bound * (1.0 + BOUND_SLACK))
    ms = int(round(1000.0 * (time.perf_counter() - t0)))
    return TrialResult(rep, r_hat, bound, M[0], M[1], M[2], event_ok,
                       inst.kappa, ms, trace.converged, bound_ok,
                       len(est.support))


# -- study ---------------------------------------------------------------------

_WORKER_INSTANCE: Instance | None = None


def _worker_init(cfg_dict, T, n, s):
    global _WORKER_INSTANCE
    _WORKER_INSTANCE = build_instance(ExperimentConfig.from_dict(cfg_dict), T, n, s)


def _worker_run(rep: int) -> TrialResult:
    return run_trial(_WORKER_INSTANCE, rep)


def _sweep_points(cfg: ExperimentConfig):
    st = cfg.study
    if st["T_sweep"]:
        return "T", [int(v) for v in st["T_sweep"]]
    if st["s_sweep"]:
        return "s", [int(v) for v in st["s_sweep"]]
    if st["n_sweep"]:
        return "n", [int(v) for v in st["n_sweep"]]
    return "T", [int(cfg.dictionary["T"])]


@dataclass
class StudyResult:
    sweep: str
    values: list
    summaries: list            # one dict per sweep point
    results: dict              # value -> list[TrialResult]
    slope_loglog: float | None
    meta: list                 # key/value rows

    def summary_rows(self):
        head = ["sweep", "value", "n", "s", "T", "p", "kappa", "tau", "delta_T",
                "median_Rhat2", "q25_Rhat2", "q75_Rhat2", "frac_event_ok",
                "frac_converged", "frac_bound_ok", "failure_prob", "replicates"]
        rows = [[s[k] if k in ("sweep", "value", "n", "s", "T", "p", "replicates")
                 else repr(s[k]) for k in head] for s in self.summaries]
        return head, rows

    def plot_rows(self):
        return [["x", "y", "lo", "hi"]] + [
            [s["value"], repr(s["median_Rhat2"]), repr(s["q25_Rhat2"]),
             repr(s["q75_Rhat2"])] for s in self.summaries]


def run_study(cfg: ExperimentConfig, threads: int = 1,
              progress=None) -> StudyResult:
    sweep, values = _sweep_points(cfg)
    R = int(cfg.study["replicates"])
    p = int(cfg.solver["p"])
    summaries, results = [], {}

    for v in values:
        T = v if sweep == "T" else int(cfg.dictionary["T"])
        n = v if sweep == "n" else int(cfg.measure["n"])
        s = v if sweep == "s" else int(cfg.truth["s"])
        inst = build_instance(cfg, T, n, s)

        if threads > 1:
            import concurrent.futures as cf
            cfg_dict = {k: getattr(cfg, k) for k in
                        ("dictionary", "measure", "truth", "noise",
                         "certificate", "solver", "study")}
            with cf.ProcessPoolExecutor(max_workers=threads,
                                        initializer=_worker_init,
                                        initargs=(cfg_dict, T, n, s)) as pool:
                res = list(pool.map(_worker_run, range(R)))
        else:
            res = [run_trial(inst, rep) for rep in range(R)]
        res.sort(key=lambda t: t.rep)
        results[v] = res

        r2 = np.array([t.R_hat**2 for t in res])
        diam = inst.model.metric_diameter
        if p == 2:
            fprob = tails.failure_prob_p2(inst.tau, n, diam)
        else:
            fprob = tails.failure_prob_p1(inst.tau, n, diam,
                                          3.0 * float(cfg.study["C4_prime"]))
        summaries.append({
            "sweep": sweep, "value": v, "n": n, "s": s, "T": T, "p": p,
            "kappa": inst.kappa, "tau": inst.tau, "delta_T": inst.delta_T,
            "median_Rhat2": float(np.median(r2)),
            "q25_Rhat2": float(np.quantile(r2, 0.25)),
            "q75_Rhat2": float(np.quantile(r2, 0.75)),
            "frac_event_ok": float(np.mean([t.event_ok for t in res])),
            "frac_converged": float(np.mean([t.converged for t in res])),
            "frac_bound_ok": float(np.mean([t.bound_ok for t in res])),
            "failure_prob": fprob, "replicates": R})
        if progress is not None:
            progress(sweep, v, summaries[-1])

    slope = None
    if sweep == "T" and len(values) >= 2:
        x = np.log([s["value"] for s in summaries])
        y = np.log([s["median_Rhat2"] for s in summaries])
        slope = float(np.polyfit(x, y, 1)[0])

    meta = [("sweep", sweep), ("p", p), ("replicates", R),
            ("seed", int(cfg.study["seed"])),
            ("constants", cfg.study["constants"]),
            ("bound_slack", BOUND_SLACK)]
    if slope is not None:
        meta.append(("slope_loglog", repr(slope)))
    return StudyResult(sweep, values, summaries, results, slope, meta)


def write_study_csvs(study: StudyResult, outdir):
    import os
    os.makedirs(outdir, exist_ok=True)
    head, rows = study.summary_rows()
    with open(os.path.join(outdir, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        w.writerows(rows)
    with open(os.path.join(outdir, "plotdata.csv"), "w", newline="") as fh:
        csv.writer(fh).writerows(study.plot_rows())
    with open(os.path.join(outdir, "meta.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerows(study.meta)
    with open(os.path.join(outdir, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_value"] + TrialResult.HEADER_DETERMINISTIC)
        for v in study.values:
            for t in study.results[v]:
                w.writerow([v] + t.row(deterministic=True))


# -- certificate report ----------------------------------------------------------


def run_certificate_report(cfg: ExperimentConfig, outdir=None, seed: int = 0):
    """Proximity diagnostics, thresholds, separation estimate and verification margins.

    Returns (diagnostics rows, VerificationReport).  Raises SeparationError if
    the configured truth violates the 2r separation precondition.
    """
    c = cfg.certificate
    inst = build_instance(cfg)
    model, limit, nu, s = inst.model, inst.limit, inst.nu, inst.s

    prox = model.proximity(limit, grid_step=c["proximity_grid_step"])
    if prox.rho_T > c["rho"]:
        raise ConfigError(f"configured rho {c['rho']} below measured rho_T {prox.rho_T:.6g}")
    H1, H2 = cert.thresholds(limit, c["r"], c["rho"])
    cc = cert.certificate_constants(limit, c["r"], c["rho"], c["safety"])
    d_int = cert.delta_search(limit, cc.u_inf, s, grid_step=c["delta_grid_step"],
                              restarts=c["restarts"])
    d_der = cert.delta_search(limit, cc.u_inf_prime, s,
                              grid_step=c["delta_grid_step"], restarts=c["restarts"])
    u_measured = cert.a_inf(model, inst.truth.theta)

    rows = list(prox.rows())
    rows += [("m_g", limit.m_g, 0.0), ("L_3", limit.L3, 0.0)]
    rows += [(f"L_{i}{j}", limit.L(i, j), 0.0)
             for i in range(3) for j in range(i, 3)]
    rows += [("eps_far", limit.eps_far(c["r"] / c["rho"]), 0.0),
             ("nu_near", limit.nu_near(c["rho"] * c["r"]), 0.0),
             ("H1", H1, 0.0), ("H2", H2, 0.0),
             ("delta_interp", d_int, c["delta_grid_step"]),
             ("delta_deriv", d_der, c["delta_grid_step"]),
             ("separation", inst.separation, 0.0),
             ("A_inf_truth", u_measured, 0.0),
             ("C_cal", inst.constants.C_cal, 0.0),
             ("C0", inst.constants.C0, 0.0)]
    feas_interp = prox.V_T <= H1 and (s - 1) * prox.V_T <= H2 - cc.u_inf
    feas_deriv = prox.V_T <= 1.0 and (s - 1) * prox.V_T + cc.u_inf_prime <= 1.0 / 6.0
    rows += [("feasible_interp", float(feas_interp), 0.0),
             ("feasible_deriv", float(feas_deriv), 0.0)]

    q = math.inf if int(cfg.solver["p"]) == 1 else 2.0
    rng = np.random.Generator(np.random.Philox(
        key=np.array([seed % (1 << 64), 0xCE], dtype=np.uint64)))
    V = rng.normal(size=(nu.n, s))
    V /= lq_norm(V.T, nu, q)[None, :]
    interp = cert.build_certificate(model, inst.truth.theta, V, "interpolating", nu, q)
    deriv = cert.build_certificate(model, inst.truth.theta, V, "derivative", nu, q)
    report = cert.verify_assumptions(interp, deriv, model, nu, q, c["r"], cc,
                                     grid_step=c["grid_step"])
    rows.append(("verification_pass", float(report.all_pass), report.grid_step))

    if outdir is not None:
        import os
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "diagnostics.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value", "grid_step"])
            for name, val, step in rows:
                w.writerow([name, repr(float(val)), repr(float(step))])
        report.to_csv(os.path.join(outdir, "verification.csv"))
    return rows, report
