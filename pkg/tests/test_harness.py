import subprocess
import sys

import pytest

from disp2d.harness import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_REGULARITY,
    format_fixtures,
    list_fixtures,
    load_config,
    main,
    read_scan_csv,
    run,
)

FREE_CONFIG = """
[potential]
form = free

[cutoff]
L_list = 1 2 5 10 20 50 100 200

[quadrature]
lambda_max = 20

[scan]
t_min = 100
t_max = 10000
n_points = 12
pairs = 0 0 0 0; 0 0 1 0
models = pure_power single_log2
certificate_times = 100 1000

[run]
stages = regularity kernel scan fit certify
"""

RADIAL_CONFIG = """
[potential]
amplitude = 0.5

[grid]
machinery = radial
radial_order = 48

[scan]
t_min = 100
t_max = 10000
n_points = 10
models = single_log2 two_term

[run]
stages = regularity scan fit
"""


def write(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_free_pipeline_fit(tmp_path):
    cfg = write(tmp_path, FREE_CONFIG)
    assert run(cfg, "all", tmp_path / "out") == EXIT_OK
    report = (tmp_path / "out" / "fit_report.txt").read_text()
    blocks = report.split("model: ")
    pure = [b for b in blocks if b.startswith("pure_power")]
    assert len(pure) == 2
    for b in pure:
        vals = dict(line.strip().split(": ") for line in b.splitlines()[1:] if ": " in line)
        assert 0.98 <= float(vals["p"]) <= 1.02
        assert 0.245 <= float(vals["C"]) <= 0.255


def test_outputs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, FREE_CONFIG)
    run(cfg, "all", tmp_path / "a")
    run(cfg, "all", tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "manifest.txt" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_outputs_carry_resolved_config(tmp_path):
    cfg = write(tmp_path, FREE_CONFIG)
    run(cfg, "kernel", tmp_path / "out")
    text = (tmp_path / "out" / "kernels.csv").read_text()
    assert "# potential.form = free" in text
    assert "# quadrature.lambda_max = 20" in text


def test_scan_csv_round_trip(tmp_path):
    cfg = write(tmp_path, FREE_CONFIG)
    run(cfg, "scan", tmp_path / "out")
    scans = read_scan_csv(tmp_path / "out" / "scan.csv")
    assert len(scans) == 2
    assert all(len(v) == 12 for v in scans.values())


def test_radial_standard_well_pipeline(tmp_path):
    cfg = write(tmp_path, RADIAL_CONFIG)
    assert run(cfg, "all", tmp_path / "out") == EXIT_OK
    reg = (tmp_path / "out" / "regularity.txt").read_text()
    assert "verdict: regular" in reg
    assert "model: two_term" in (tmp_path / "out" / "fit_report.txt").read_text()


def test_missing_config_exit_code(tmp_path):
    assert run(tmp_path / "missing.ini") == EXIT_CONFIG


@pytest.mark.parametrize("text", [
    "[potential]\nform = wiggly\n",
    "[potential]\nshape = round\n",
    "[mystery]\nkey = 1\n",
    "[scan]\nt_min = 1\n",
    "[quadrature]\nfilon_order = 5\n",
    "[scan]\npairs = 0 0 1\n",
])
def test_invalid_configs(tmp_path, text):
    assert run(write(tmp_path, text)) == EXIT_CONFIG


def test_nonregular_fixture_stops_pipeline(tmp_path):
    resonant = [f for f in list_fixtures() if f[0] == "gaussian_resonant"][0]
    text = f"[potential]\namplitude = {resonant[1].amplitude!r}\n[grid]\nradial_order = 24\nangular_order = 48\n"
    text += f"radius = {resonant[1].effective_radius()!r}\n[run]\nstages = regularity kernel\n"
    out = tmp_path / "out"
    assert run(write(tmp_path, text), "all", out) == EXIT_REGULARITY
    assert not (out / "kernels.csv").exists()


def test_fixture_listing():
    fixtures = list_fixtures()
    verdicts = {name: verdict for name, _, _, verdict in fixtures}
    assert verdicts["free"] == "regular"
    assert verdicts["gaussian_repulsive_0.5"] == "regular"
    assert verdicts["gaussian_attractive_0.5"] == "regular"
    assert verdicts["gaussian_resonant"] == "non_regular"
    assert format_fixtures(fixtures).startswith("name,amplitude,sigma_min,verdict\n")


def test_defaults_fill_in(tmp_path):
    cfg = load_config(write(tmp_path, "[potential]\namplitude = 0.5\n"))
    assert cfg["grid"]["radius"] > 0
    assert cfg["scan"]["alpha"] == 0.125
    assert cfg["oracle"]["absorber_strength"] == 20.0


def test_cli_entry_point(tmp_path):
    assert main(["fixtures"]) == EXIT_OK
    out = subprocess.run([sys.executable, "-m", "disp2d.harness", "kernel", "--config", str(tmp_path / "x.ini")],
                         capture_output=True, text=True)
    assert out.returncode == EXIT_CONFIG
    assert "not found" in out.stderr
