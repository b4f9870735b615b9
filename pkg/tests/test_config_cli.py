"""Config parsing, TOML round-trips and the command-line interface."""
import json
from pathlib import Path

import numpy as np
import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from coreshell.cli import main
from coreshell.config import dump_toml, load_config, parse_config, set_by_path
from coreshell.errors import ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def reference_cfg():
    return load_config(CONFIG_DIR / "reference.toml")


class TestParsing:
    def test_reference_config_resolves(self, reference_cfg):
        cfg = reference_cfg
        assert np.isclose(cfg.spec.core_radius, 4e-6)
        assert np.isclose(cfg.spec.hbar, 0.2)
        assert cfg.spec.crack.location == "surface"
        assert np.isclose(cfg.core.gc, 0.299, rtol=0.02)
        assert np.isclose(cfg.shell.ell, 0.27e-6, rtol=0.02)
        assert cfg.core.ocp is not None

    def test_unknown_keys_are_listed(self, reference_cfg):
        data = json.loads(json.dumps(reference_cfg.effective))
        data["protocol"]["c_rte"] = 2.0
        with pytest.raises(ConfigError, match="c_rte"):
            parse_config(data)

    def test_missing_required_key(self, reference_cfg):
        data = json.loads(json.dumps(reference_cfg.effective))
        del data["materials"]["core"]["c_max"]
        with pytest.raises(ConfigError, match="materials.core.c_max"):
            parse_config(data)

    def test_fracture_inputs_required(self, reference_cfg):
        data = json.loads(json.dumps(reference_cfg.effective))
        data["materials"]["shell"].pop("fracture_toughness_mpa_sqrt_m")
        data["materials"]["shell"].pop("gc", None)
        with pytest.raises(ConfigError, match="gc"):
            parse_config(data)

    def test_roundtrip_is_identical(self, reference_cfg):
        text = dump_toml(reference_cfg.effective)
        again = parse_config(tomllib.loads(text))
        assert again.effective == reference_cfg.effective
        assert dump_toml(again.effective) == text

    def test_set_by_path(self, reference_cfg):
        data = json.loads(json.dumps(reference_cfg.effective))
        set_by_path(data, "interface.bonding_ratio", 0.5)
        assert data["interface"]["bonding_ratio"] == 0.5
        with pytest.raises(ConfigError):
            set_by_path(data, "nosuch.key", 1.0)


@pytest.fixture()
def null_config(tmp_path):
    """Zero C-rate, no crack: immediate clean termination."""
    cfg = load_config(CONFIG_DIR / "reference.toml")
    data = json.loads(json.dumps(cfg.effective))
    data["protocol"]["c_rate"] = 0.0
    data["particle"]["crack"] = {"location": "none"}
    data["output"]["directory"] = str(tmp_path / "null_run")
    data["output"]["write_plots"] = False
    path = tmp_path / "null.toml"
    dump_toml(data, path)
    return path, tmp_path / "null_run"


class TestCli:
    def test_run_null_protocol(self, null_config, capsys):
        path, outdir = null_config
        code = main(["run", str(path), "--output-dir", str(outdir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "termination null" in out
        assert (outdir / "metrics.csv").exists()
        assert (outdir / "pattern.json").exists()
        assert (outdir / "config_effective.toml").exists()
        # SOL unchanged: single record at t=0
        lines = (outdir / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 2

    def test_effective_config_reruns_identically(self, null_config):
        path, outdir = null_config
        assert main(["run", str(path), "--output-dir", str(outdir)]) == 0
        echoed = outdir / "config_effective.toml"
        second = outdir.parent / "again"
        assert main(["run", str(echoed), "--output-dir", str(second)]) == 0
        a = (outdir / "metrics.csv").read_text()
        b = (second / "metrics.csv").read_text()
        assert a == b

    def test_derive_prints_fracture_parameters(self, capsys):
        code = main(["derive", str(CONFIG_DIR / "reference.toml")])
        assert code == 0
        out = capsys.readouterr().out
        gc_line = next(l for l in out.splitlines() if l.startswith("G_c (N/m)"))
        vals = [float(tok) for tok in gc_line.split()[-2:]]
        assert abs(vals[0] - 0.299) / 0.299 < 0.02
        assert abs(vals[1] - 0.408) / 0.408 < 0.02
        ell_line = next(l for l in out.splitlines() if l.startswith("l (um)"))
        ells = [float(tok) for tok in ell_line.split()[-2:]]
        assert abs(ells[0] - 0.23) / 0.23 < 0.02
        assert abs(ells[1] - 0.27) / 0.27 < 0.02

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[particle]\ncore_radius_um = -1.0\n")
        assert main(["run", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "configuration error" in err

    def test_missing_file_exit_code(self):
        assert main(["derive", "/nonexistent/config.toml"]) == 1

    def test_sweep_null_runs(self, null_config, capsys):
        path, outdir = null_config
        root = outdir.parent / "sweep"
        code = main(
            [
                "sweep",
                str(path),
                "--vary",
                "protocol.x_cv=0.97,0.98",
                "--output-dir",
                str(root),
            ]
        )
        assert code == 0
        assert (root / "sweep_summary.csv").exists()
        members = sorted(p.name for p in root.iterdir() if p.is_dir())
        assert len(members) == 2
        # members differ only in the varied key
        cfgs = [
            tomllib.loads((root / m / "config_effective.toml").read_text()) for m in members
        ]
        assert cfgs[0]["protocol"]["x_cv"] != cfgs[1]["protocol"]["x_cv"]
        cfgs[0]["protocol"]["x_cv"] = cfgs[1]["protocol"]["x_cv"]
        assert cfgs[0] == cfgs[1]
