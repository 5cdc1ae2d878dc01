"""Config parsing, presets, run directories, and the simlab entry point."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from simlab.cli import (
    ExperimentConfig,
    config_from_mapping,
    config_to_mapping,
    load_config,
    main,
    preset_config,
    run_experiment,
)

GAMMA1 = 1.0 / 30.0


def particle_cfg(**over):
    base = dict(
        engine="particle1",
        N=300,
        lam=20.0,
        gamma=GAMMA1,
        R0_radius=15.0,
        dt=0.05,
        T=6.0,
        sample_every=1.5,
        seed=7,
    )
    base.update(over)
    return ExperimentConfig(**base)


def write_json(path: Path, mapping: dict) -> Path:
    path.write_text(json.dumps(mapping))
    return path


class TestConfigParsing:
    def test_unknown_engine_rejected(self):
        with pytest.raises(ValueError, match="engine"):
            config_from_mapping({"engine": "particle3"})

    def test_unknown_key_rejected_by_name(self):
        with pytest.raises(ValueError, match="lamda"):
            config_from_mapping({"engine": "ode", "lamda": 2.0})

    def test_missing_required_field_named(self):
        raw = {"engine": "particle1", "lambda": 20.0, "gamma": GAMMA1,
               "R0_radius": 15.0, "dt": 0.05, "T": 6.0, "sample_every": 1.5}
        with pytest.raises(ValueError, match="N"):
            config_from_mapping(raw)

    def test_lambda_key_maps_to_lam(self):
        raw = {"engine": "ode", "lambda": 2.5, "gamma": GAMMA1,
               "R0_radius": 15.0, "dt": 0.05, "T": 6.0}
        cfg = config_from_mapping(raw)
        assert cfg.lam == 2.5
        assert config_to_mapping(cfg)["lambda"] == 2.5

    def test_lam_is_not_a_file_key(self):
        raw = {"engine": "ode", "lam": 2.5, "gamma": GAMMA1,
               "R0_radius": 15.0, "dt": 0.05, "T": 6.0}
        with pytest.raises(ValueError, match="lam"):
            config_from_mapping(raw)

    def test_bad_init_rejected(self):
        with pytest.raises(ValueError, match="init"):
            config_from_mapping(
                {"engine": "ode", "lambda": 1.0, "gamma": 1.0, "R0_radius": 15.0,
                 "dt": 0.05, "T": 6.0, "init": "clustered"})

    def test_negative_rate_names_json_key(self):
        with pytest.raises(ValueError, match="lambda"):
            config_from_mapping(
                {"engine": "ode", "lambda": -1.0, "gamma": 1.0, "R0_radius": 15.0,
                 "dt": 0.05, "T": 6.0})

    def test_config_echo_round_trips(self):
        cfg = particle_cfg()
        again = config_from_mapping(config_to_mapping(cfg))
        assert again == cfg

    def test_load_config_rejects_non_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="object"):
            load_config(path)


class TestPresets:
    def test_all_variants_build(self):
        for name in ("fig1", "fig2", "fig3"):
            for variant in ("homog", "conc", "ode"):
                cfg = preset_config(name, variant)
                assert cfg.i0 == pytest.approx(math.pi / 100)

    def test_fig1_binds_pairwise_model(self):
        cfg = preset_config("fig1", "homog")
        assert cfg.engine == "particle1"
        assert (cfg.N, cfg.lam, cfg.R0_radius) == (50000, 20.0, 15.0)
        assert cfg.gamma == pytest.approx(1.0 / 30.0)

    def test_fig2_binds_crowd_model(self):
        cfg = preset_config("fig2", "conc")
        assert cfg.engine == "particle2"
        assert cfg.init == "concentrated"
        assert cfg.R0_radius == pytest.approx(15.0 / math.sqrt(10.0))

    def test_presets_take_200_samples(self):
        for name in ("fig1", "fig2", "fig3"):
            cfg = preset_config(name, "homog")
            assert cfg.T / cfg.sample_every == pytest.approx(200.0)

    def test_ode_variant_records_beta_in_manifest(self, tmp_path):
        cfg = preset_config("fig1", "ode")
        cfg.T = 30.0  # shorten; beta does not depend on the horizon
        manifest = run_experiment(cfg, tmp_path / "ode")
        assert manifest["beta"] == pytest.approx(0.018 * math.pi, rel=1e-15)
        assert manifest["config"]["gamma"] == pytest.approx(1.0 / 30.0)

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError, match="preset"):
            preset_config("fig9", "ode")


class TestRunDirectories:
    def test_same_seed_reruns_byte_identical(self, tmp_path):
        cfg = particle_cfg()
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        a = (tmp_path / "a" / "fractions.csv").read_bytes()
        b = (tmp_path / "b" / "fractions.csv").read_bytes()
        assert a == b

    def test_existing_output_needs_overwrite(self, tmp_path):
        cfg = particle_cfg()
        out = tmp_path / "r"
        run_experiment(cfg, out)
        with pytest.raises(FileExistsError, match="overwrite"):
            run_experiment(cfg, out)
        run_experiment(cfg, out, overwrite=True)

    def test_manifest_lists_outputs_and_seed(self, tmp_path):
        out = tmp_path / "r"
        manifest = run_experiment(particle_cfg(seed=11), out)
        assert manifest["seeds"] == [11]
        for name in manifest["outputs"]:
            assert (out / name).exists()
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["config"] == config_to_mapping(particle_cfg(seed=11))

    def test_failed_run_leaves_no_manifest(self, tmp_path):
        cfg = particle_cfg(sample_every=0.07)  # not a multiple of dt
        out = tmp_path / "r"
        with pytest.raises(ValueError):
            run_experiment(cfg, out)
        assert not (out / "manifest.json").exists()

    def test_csv_times_are_the_sample_grid(self, tmp_path):
        out = tmp_path / "r"
        run_experiment(particle_cfg(), out)
        rows = (out / "fractions.csv").read_text().strip().splitlines()
        assert rows[0] == "t,S,I,R"
        times = [float(row.split(",")[0]) for row in rows[1:]]
        assert times == [k * (30 * 0.05) for k in range(len(times))]

    def test_csv_fractions_sum_to_one(self, tmp_path):
        out = tmp_path / "r"
        run_experiment(particle_cfg(), out)
        data = np.loadtxt(out / "fractions.csv", delimiter=",", skiprows=1)
        assert np.allclose(data[:, 1:].sum(axis=1), 1.0, atol=1e-12)

    def test_report_is_flat_key_value(self, tmp_path):
        out = tmp_path / "r"
        run_experiment(particle_cfg(), out)
        lines = (out / "report.txt").read_text().strip().splitlines()
        assert all("=" in line for line in lines)
        keys = [line.split("=", 1)[0] for line in lines]
        assert "peak_i" in keys and "beta" in keys


class TestEngines:
    def test_ode_thinning_obeys_sample_every(self, tmp_path):
        cfg = ExperimentConfig(engine="ode", lam=20.0, gamma=GAMMA1,
                               R0_radius=15.0, dt=0.05, T=30.0, sample_every=1.5)
        out = tmp_path / "o"
        run_experiment(cfg, out)
        data = np.loadtxt(out / "fractions.csv", delimiter=",", skiprows=1)
        assert np.allclose(np.diff(data[:, 0]), 1.5)

    def test_kinetic_reports_discrete_beta(self, tmp_path):
        cfg = ExperimentConfig(engine="kinetic", lam=20.0, gamma=GAMMA1,
                               R0_radius=15.0, dt=0.05, T=2.0, sample_every=0.5,
                               nx=8, nv=4)
        manifest = run_experiment(cfg, tmp_path / "k")
        assert manifest["beta_discrete"] > 0

    def test_mixing_writes_tv_series(self, tmp_path):
        cfg = ExperimentConfig(engine="mixing", N=500, D=8.0, dt=0.05, T=5.0,
                               sample_every=0.5, bins_x=4, bins_v=2)
        out = tmp_path / "m"
        run_experiment(cfg, out)
        rows = (out / "tv.csv").read_text().strip().splitlines()
        assert rows[0] == "t,TV"
        assert len(rows) == 12  # t = 0, 0.5, ..., 5.0
        report = dict(
            line.split("=", 1) for line in (out / "report.txt").read_text().splitlines()
        )
        assert float(report["tv_first"]) > float(report["tv_final"])

    def test_chaos_sweep_rows_cover_the_grid(self, tmp_path):
        cfg = ExperimentConfig(engine="chaos-sweep", lam=20.0, gamma=GAMMA1,
                               R0_radius=15.0, dt=0.05, T=6.0, sample_every=1.5,
                               N_list=[200, 400], seed_list=[0, 1])
        out = tmp_path / "s"
        run_experiment(cfg, out)
        rows = (out / "chaos.csv").read_text().strip().splitlines()
        assert rows[0] == "N,seed,peak_t,chi"
        seen = [tuple(map(float, r.split(",")[:2])) for r in rows[1:]]
        assert seen == [(200, 0), (200, 1), (400, 0), (400, 1)]


class TestMain:
    def test_run_round_trip(self, tmp_path, capsys):
        cfg_path = write_json(tmp_path / "c.json", {
            "engine": "ode", "lambda": 20.0, "gamma": GAMMA1, "R0_radius": 15.0,
            "dt": 0.05, "T": 30.0})
        assert main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "manifest.json").exists()
        assert "ok:" in capsys.readouterr().out

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg_path = write_json(tmp_path / "c.json", config_to_mapping(particle_cfg()))
        assert main(["run", str(cfg_path), "--out", str(tmp_path / "a"),
                     "--seed", "5"]) == 0
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["seeds"] == [5]

    def test_bad_engine_exits_nonzero(self, tmp_path, capsys):
        cfg_path = write_json(tmp_path / "c.json", {"engine": "particle3"})
        assert main(["run", str(cfg_path)]) == 1
        assert "particle3" in capsys.readouterr().err

    def test_existing_output_exits_nonzero(self, tmp_path):
        cfg_path = write_json(tmp_path / "c.json", config_to_mapping(particle_cfg()))
        out = tmp_path / "o"
        assert main(["run", str(cfg_path), "--out", str(out)]) == 0
        assert main(["run", str(cfg_path), "--out", str(out)]) == 1
        assert main(["run", str(cfg_path), "--out", str(out), "--overwrite"]) == 0

    def test_sweep_rejects_single_run_engine(self, tmp_path, capsys):
        cfg_path = write_json(tmp_path / "c.json", config_to_mapping(particle_cfg()))
        assert main(["sweep", str(cfg_path)]) == 1
        assert "chaos-sweep" in capsys.readouterr().err

    def test_preset_with_overrides(self, tmp_path):
        out = tmp_path / "p"
        code = main(["preset", "fig1", "--variant", "homog", "--n", "400",
                     "--t-final", "6.0", "--out", str(out)])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["N"] == 400
        assert manifest["config"]["lambda"] == 20.0


def test_simulation_code_never_touches_plotting():
    # figures are a separate package fed by CSV files; the simulation side
    # must stay importable on a machine with no plotting stack at all
    root = Path(__file__).resolve().parent.parent / "src" / "simlab"
    offenders = [
        p.name
        for p in sorted(root.glob("*.py"))
        if "matplotlib" in p.read_text() or "pyplot" in p.read_text()
    ]
    assert offenders == []
