import subprocess
import sys

import numpy as np
import pytest

from offgrid import cli
from offgrid.experiments import (ConfigError, ExperimentConfig, build_instance,
                                 run_certificate_report, run_study, run_trial,
                                 write_study_csvs)

BASE = {
    "dictionary": {"kind": "gaussian_location", "T": 128,
                   "domain": [-4.0, 4.0], "params": {"sigma": 0.3}},
    "measure": {"n": 3, "weights": "uniform"},
    "truth": {"s": 2, "amplitude": 1.0, "separation_multiplier": 1.0},
    "noise": {"sigma": 0.4, "delta_T": "1/T"},
    "solver": {"p": 1, "K_max": 4, "insertion_grid_step": 0.1,
               "tol_dual": 1e-3, "refine_rounds": 3},
    "study": {"tau": "T", "T_sweep": [], "replicates": 3, "seed": 99,
              "constants": "practical", "C3": 2.0, "C1": 1.5,
              "sup_grid_step": 0.1},
}


def write_config(tmp_path, overrides=None):
    import copy
    cfg = copy.deepcopy(BASE)
    for key, val in (overrides or {}).items():
        cfg.setdefault(key, {}).update(val)
    lines = []
    for sec, body in cfg.items():
        lines.append(f"[{sec}]")
        for k, v in body.items():
            if isinstance(v, dict):
                continue
            if isinstance(v, str):
                lines.append(f'{k} = "{v}"')
            elif isinstance(v, bool):
                lines.append(f"{k} = {str(v).lower()}")
            elif isinstance(v, list):
                lines.append(f"{k} = {v}")
            else:
                lines.append(f"{k} = {v}")
        for k, v in body.items():
            if isinstance(v, dict):
                lines.append(f"[{sec}.{k}]")
                for kk, vv in v.items():
                    lines.append(f"{kk} = {vv}")
    path = tmp_path / "config.toml"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestConfig:
    def test_parse_roundtrip(self, tmp_path):
        path = write_config(tmp_path)
        cfg = ExperimentConfig.from_file(path)
        assert cfg.dictionary["kind"] == "gaussian_location"
        assert cfg.noise["delta_T"] == "1/T"
        assert cfg.study["seed"] == 99

    def test_validation(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"truth": {"separation_multiplier": 0.5}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"study": {"T_sweep": [64], "s_sweep": [1]}})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"solver": {"p": 3}})

    def test_delta_and_tau_rules(self):
        cfg = ExperimentConfig.from_dict(BASE)
        inst = build_instance(cfg, T=256)
        assert inst.delta_T == pytest.approx(1.0 / 256)
        assert inst.tau == 256.0

    def test_explicit_truth_and_infeasible_span(self):
        import copy
        raw = copy.deepcopy(BASE)
        raw["truth"]["theta"] = [-1.0, 1.0]
        inst = build_instance(ExperimentConfig.from_dict(raw))
        assert np.allclose(inst.truth.theta, [-1.0, 1.0])
        raw2 = copy.deepcopy(BASE)
        raw2["truth"]["s"] = 9  # cannot fit nine separated anchors
        with pytest.raises(ConfigError):
            build_instance(ExperimentConfig.from_dict(raw2))


class TestTrial:
    def test_deterministic_given_seed_and_rep(self):
        cfg = ExperimentConfig.from_dict(BASE)
        inst1 = build_instance(cfg)
        inst2 = build_instance(cfg)
        a = run_trial(inst1, 2)
        b = run_trial(inst2, 2)
        assert a.row(deterministic=True) == b.row(deterministic=True)
        c = run_trial(inst1, 3)
        assert c.R_hat != a.R_hat

    def test_noiseless_recovery(self):
        import copy
        raw = copy.deepcopy(BASE)
        raw["noise"]["sigma"] = 0.0
        raw["solver"].update({"kappa_override": 1e-8, "p": 2, "tol_dual": 1e-6})
        inst = build_instance(ExperimentConfig.from_dict(raw))
        res = run_trial(inst, 0)
        assert res.R_hat <= 1e-6
        assert res.M0 == 0.0 and res.event_ok

    def test_event_definition(self):
        cfg = ExperimentConfig.from_dict(BASE)
        inst = build_instance(cfg)
        res = run_trial(inst, 0)
        level = inst.constants.C_cal * inst.kappa * inst.nu.mass
        assert res.event_ok == (res.M0 <= level and res.M1 <= level
                                and res.M2 <= level)
        assert res.bound == pytest.approx(
            inst.constants.C0 * np.sqrt(inst.s) * inst.nu.mass ** (1.0 / 1) * inst.kappa)


class TestStudy:
    def test_sweep_and_outputs(self, tmp_path):
        import copy
        raw = copy.deepcopy(BASE)
        raw["study"]["T_sweep"] = [64, 128]
        cfg = ExperimentConfig.from_dict(raw)
        study = run_study(cfg)
        assert study.sweep == "T" and study.values == [64, 128]
        assert study.slope_loglog is not None
        outdir = tmp_path / "out"
        write_study_csvs(study, outdir)
        for name in ("summary.csv", "plotdata.csv", "meta.csv", "trials.csv"):
            assert (outdir / name).exists()
        lines = (outdir / "plotdata.csv").read_text().splitlines()
        assert lines[0] == "x,y,lo,hi"
        assert len(lines) == 3

    def test_single_point_degenerate_quantiles(self):
        import copy
        raw = copy.deepcopy(BASE)
        raw["study"]["replicates"] = 1
        study = run_study(ExperimentConfig.from_dict(raw))
        s = study.summaries[0]
        assert s["median_Rhat2"] == s["q25_Rhat2"] == s["q75_Rhat2"]

    def test_bound_coherence_all_rows(self):
        # the prediction bound must hold whenever the probability event holds
        import copy
        raw = copy.deepcopy(BASE)
        raw["study"].update({"constants": "theoretical", "tau": 100.0,
                             "replicates": 6})
        raw["truth"]["theta"] = [-1.5, 1.5]
        study = run_study(ExperimentConfig.from_dict(raw))
        for res in study.results[study.values[0]]:
            assert res.bound_ok

    def test_byte_identical_reruns_and_threads(self, tmp_path):
        import copy
        raw = copy.deepcopy(BASE)
        raw["study"]["T_sweep"] = [64, 96]
        cfg = ExperimentConfig.from_dict(raw)
        outs = []
        for tag, threads in (("a", 1), ("b", 1), ("c", 2)):
            study = run_study(cfg, threads=threads)
            outdir = tmp_path / tag
            write_study_csvs(study, outdir)
            outs.append({n: (outdir / n).read_bytes()
                         for n in ("summary.csv", "plotdata.csv", "meta.csv",
                                   "trials.csv")})
        assert outs[0] == outs[1] == outs[2]


class TestCertificateReport:
    def test_report_and_refusal(self, tmp_path):
        import copy
        raw = copy.deepcopy(BASE)
        raw["dictionary"].update({"T": 256, "domain": [-3.0, 3.0],
                                  "params": {"sigma": 0.1}})
        raw["truth"].update({"s": 2, "separation_multiplier": 2.0})
        raw["certificate"] = {"grid_step": 0.05, "proximity_grid_step": 0.05,
                              "delta_grid_step": 0.05, "restarts": 4}
        cfg = ExperimentConfig.from_dict(raw)
        rows, report = run_certificate_report(cfg, outdir=tmp_path / "cert")
        names = [r[0] for r in rows]
        assert {"V_T", "rho_T", "H1", "H2", "delta_interp",
                "verification_pass"} <= set(names)
        assert report.all_pass
        assert (tmp_path / "cert" / "diagnostics.csv").exists()
        header = (tmp_path / "cert" / "diagnostics.csv").read_text().splitlines()[0]
        assert header == "quantity,value,grid_step"

        # near-coincident anchors are refused with the separation message
        raw2 = copy.deepcopy(raw)
        raw2["truth"]["theta"] = [0.0, 0.02]
        from offgrid.certificates import ConditioningError, SeparationError
        with pytest.raises((SeparationError, ConditioningError)):
            run_certificate_report(ExperimentConfig.from_dict(raw2))


class TestCli:
    def test_study_cli_and_figures(self, tmp_path):
        path = write_config(tmp_path, {"study": {"replicates": 2}})
        out = tmp_path / "out"
        rc = cli.main(["study", "--config", str(path), "--out", str(out)])
        assert rc == 0
        assert (out / "summary.csv").exists()
        assert (out / "study.png").exists() and (out / "events.png").exists()

    def test_trial_cli(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "t"
        rc = cli.main(["trial", "--config", str(path), "--rep", "1",
                       "--out", str(out), "--no-figures"])
        assert rc == 0
        assert (out / "trial_0001.csv").exists()
        assert (out / "trace_0001.csv").exists()

    def test_refusal_exit_code(self, tmp_path):
        path = write_config(tmp_path, {"truth": {"s": 9}})
        rc = cli.main(["study", "--config", str(path), "--out",
                       str(tmp_path / "x"), "--no-figures"])
        assert rc == 2

    def test_missing_config(self, tmp_path):
        rc = cli.main(["study", "--config", str(tmp_path / "nope.toml"),
                       "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_seed_override_changes_output(self, tmp_path):
        path = write_config(tmp_path)
        outs = []
        for seed, tag in ((99, "s1"), (100, "s2")):
            out = tmp_path / tag
            rc = cli.main(["study", "--config", str(path), "--out", str(out),
                           "--seed", str(seed), "--no-figures"])
            assert rc == 0
            outs.append((out / "trials.csv").read_bytes())
        assert outs[0] != outs[1]

    def test_console_entry_point(self, tmp_path):
        path = write_config(tmp_path)
        proc = subprocess.run(
            [sys.executable, "-m", "offgrid.cli", "trial", "--config", str(path),
             "--rep", "0", "--out", str(tmp_path / "sp"), "--no-figures"],
            capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        assert "R_hat" in proc.stdout


class TestSweepVariants:
    S_SWEEP = {
        "dictionary": {"kind": "gaussian_location", "T": 384,
                       "domain": [-4.0, 4.0], "params": {"sigma": 0.15}},
        "measure": {"n": 3, "weights": "uniform"},
        "truth": {"s": 2, "amplitude": 1.0, "separation_multiplier": 1.0},
        "noise": {"sigma": 0.5, "delta_T": "1/T"},
        "solver": {"p": 2, "K_max": 6, "insertion_grid_step": 0.1,
                   "tol_dual": 1e-3, "refine_rounds": 3},
        "study": {"tau": "T", "s_sweep": [1, 2, 4], "replicates": 24,
                  "seed": 99, "constants": "practical", "C1": 1.5,
                  "sup_grid_step": 0.1},
    }

    def test_s_sweep_median_nondecreasing(self):
        study = run_study(ExperimentConfig.from_dict(self.S_SWEEP))
        meds = [s["median_Rhat2"] for s in study.summaries]
        assert study.sweep == "s" and study.values == [1, 2, 4]
        assert all(b >= a for a, b in zip(meds, meds[1:]))

    def test_n_sweep_builds_matching_shapes(self):
        import copy
        raw = copy.deepcopy(self.S_SWEEP)
        raw["study"].update({"s_sweep": [], "n_sweep": [2, 5], "replicates": 2})
        study = run_study(ExperimentConfig.from_dict(raw))
        assert study.sweep == "n" and study.values == [2, 5]


def test_certificate_report_single_anchor(tmp_path):
    import copy
    raw = copy.deepcopy(BASE)
    raw["dictionary"].update({"T": 256, "domain": [-3.0, 3.0],
                              "params": {"sigma": 0.1}})
    raw["truth"].update({"s": 1})
    raw["certificate"] = {"grid_step": 0.05, "proximity_grid_step": 0.05,
                          "delta_grid_step": 0.05, "restarts": 4}
    rows, report = run_certificate_report(ExperimentConfig.from_dict(raw),
                                          outdir=tmp_path / "c1")
    assert report.all_pass
    # the anchor row itself is an exact interpolation node
    node_rows = [r for r in report.rows if r.point == "node-identity"]
    assert node_rows and all(r.ok for r in node_rows)


def test_unknown_dictionary_kind_is_refused(tmp_path):
    path = write_config(tmp_path, {"dictionary": {"kind": "mystery"}})
    rc = cli.main(["study", "--config", str(path), "--out",
                   str(tmp_path / "x"), "--no-figures"])
    assert rc == 2
