import re
import subprocess
import sys

import pytest

from hardylab.cli import CONFIG_KEYS, ConfigError, _fmt, parse_config


def hardylab(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "hardylab", *args], capture_output=True,
                          text=True, cwd=cwd)


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SHOOT_CFG = "N = 3\ntail = r^-4\nepsilon = 0.25*eps0, 1.1*eps0\n"


def test_help_lists_keys_and_criteria():
    res = hardylab("--help")
    assert res.returncode == 0
    for key in CONFIG_KEYS:
        assert re.search(rf"\b{re.escape(key)}\b", res.stdout)
    for n in range(1, 11):
        assert re.search(rf"^\s*{n} ", res.stdout, re.M)
    assert "exit codes" in res.stdout


def test_no_arguments_is_usage_error():
    res = hardylab()
    assert res.returncode == 1
    assert "usage" in res.stderr


def test_empty_config_exit_1(tmp_path):
    res = hardylab("rayleigh", "--config", write_cfg(tmp_path, "# nothing\n"), "--out", str(tmp_path))
    assert res.returncode == 1
    assert "usage" in res.stderr


def test_missing_config_file(tmp_path):
    res = hardylab("rayleigh", "--config", str(tmp_path / "absent.cfg"))
    assert res.returncode == 1


@pytest.mark.parametrize("text,needle", [
    ("N = 3\nwibble = 1\n", "wibble"),
    ("N = 3\ngrid_sizes = 801,401\n", "grid_sizes"),
    ("N = 3\ngrid_sizes = 401,900\n", "nest"),
    ("N = 3\nN = 4\n", "N"),
    ("N = 3\ntol = -1\n", "tol"),
    ("N = 2\n", "N"),
    ("N = 3\ndomain = torus\n", "domain"),
    ("N = 3\nnot a pair\n", "line"),
])
def test_invalid_configs_name_the_invariant(tmp_path, text, needle):
    res = hardylab("rayleigh", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path))
    assert res.returncode == 1
    assert needle in res.stderr


def test_parse_config_values():
    cfg = parse_config("N = 3,4\nlambda = -0.75\nepsilon = 0.5*eps0\ntail = r^-4, r^-3\n",
                       "heat-bound")
    assert cfg.values["N"] == [3, 4]
    assert cfg.values["lambda"] == -0.75
    with pytest.raises(ConfigError):
        parse_config("tmin = 0\n", "heat-bound")


def test_under_resolved_is_a_solver_fault(tmp_path):
    text = "N = 3\ndomain = ball\nlambda = 0.25\ngrid_sizes = 64\ntmin = 1e-6\ntmax = 1e-3\n"
    res = hardylab("heat-bound", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path))
    assert res.returncode == 2
    assert "UnderResolved" in res.stderr


def test_failed_check_exit_3(tmp_path):
    text = "N = 3\ndomain = ball\nalpha = 0.2,0.4\ngrid_sizes = 401\ntol = 1e-12\n"
    res = hardylab("rayleigh", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path))
    assert res.returncode == 3
    assert "FAIL" in (tmp_path / "summary.txt").read_text()


def test_shoot_outputs_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, SHOOT_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert hardylab("shoot", "--config", cfg, "--out", str(a)).returncode == 0
    assert hardylab("shoot", "--config", cfg, "--out", str(b)).returncode == 0
    first = (a / "shoot.csv").read_bytes()
    assert first == (b / "shoot.csv").read_bytes()
    lines = first.decode().splitlines()
    assert lines[0] == "epsilon,r,psi,flux"
    assert len(lines) == 1 + 2 * 41
    summary = (a / "summary.txt").read_text().splitlines()
    assert summary and all(ln.startswith("shoot: PASS ") for ln in summary)
    # atomic writes leave no temporaries behind
    assert sorted(p.name for p in a.iterdir()) == ["shoot.csv", "summary.txt"]


def test_summary_keeps_other_scenarios(tmp_path):
    (tmp_path / "summary.txt").write_text("mazya: PASS closed form (x)\nshoot: FAIL stale (y)\n")
    cfg = write_cfg(tmp_path, SHOOT_CFG)
    assert hardylab("shoot", "--config", cfg, "--out", str(tmp_path)).returncode == 0
    lines = (tmp_path / "summary.txt").read_text().splitlines()
    assert lines[0] == "mazya: PASS closed form (x)"
    assert not any("stale" in ln for ln in lines)


def test_number_format():
    assert _fmt(1 / 3) == "0.333333333333333"
    assert _fmt(1e-300) == "1e-300"
    assert _fmt(3) == "3"
    assert _fmt(True) == "1" and _fmt(False) == "0"
