import json
import subprocess
import sys
from pathlib import Path

import pytest

from cone_walker import __version__
from cone_walker.cli import config_from_args, main
from cone_walker.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
LAZY = str(CONFIGS / "lazy.json")
NSEW = str(CONFIGS / "nsew.json")
SIMPLE = str(CONFIGS / "simple1d.json")
QUAD = str(CONFIGS / "orthant2.json")
HALFLINE = str(CONFIGS / "halfline.json")
WEDGE = str(CONFIGS / "wedge120.json")


def _run(tmp_path, *args, fmt=None):
    out = tmp_path / ("out." + (fmt or "txt"))
    argv = [*args, "-o", str(out)] + (["--format", fmt] if fmt else [])
    code = main(argv)
    return code, (out.read_text() if out.exists() else None)


def _csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def test_exact_survival_rows(tmp_path):
    code, text = _run(tmp_path, "exact", "survival", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "64")
    assert code == 0
    header, rows = _csv_rows(text)
    assert header == ["n", "value", "truncation_loss"]
    assert len(rows) == 65
    assert float(rows[1][1]) == pytest.approx(0.6)


def test_report_embeds_config_and_version(tmp_path):
    code, text = _run(tmp_path, "exact", "survival", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "3",
                      fmt="json")
    assert code == 0
    body = json.loads(text)
    assert body["version"] == __version__
    assert body["config"]["n"] == 3 and body["config"]["start"] == [1, 1]
    assert body["config"]["model"] == LAZY
    assert body["schema"].startswith("cone-walker-report/")


def test_rational_mode_prints_fractions(tmp_path):
    code, text = _run(tmp_path, "exact", "survival", "--model", SIMPLE, "--cone", HALFLINE, "--start", "1",
                      "--n", "3", "--mode", "rational")
    assert code == 0
    _, rows = _csv_rows(text)
    assert [r[1] for r in rows] == ["1", "1/2", "1/2", "3/8"]


def test_missing_model_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    code = main(["exact", "survival", "--model", missing, "--cone", QUAD, "--start", "1,1", "--n", "4"])
    assert code == 1
    assert missing in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["bogus"]) == 1
    assert main(["exact", "survival", "--model", LAZY, "--cone", QUAD, "--n", "4"]) == 1
    assert main(["mc", "survival", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "4", "--epsilon", "0.7"]) == 1
    assert main(["exact", "survival", "--model", LAZY, "--cone", QUAD, "--start", "0,1", "--n", "4"]) == 1


def test_config_validation():
    with pytest.raises(ConfigError):
        config_from_args(["mc", "survival", "--samples", "0"])
    cfg = config_from_args(["verify", "survival", "--tolerance", "0", "--threads", "4"])
    assert cfg.params["tolerance"] == 0.0
    assert "threads" not in cfg.resolved()


def test_verify_forced_failure(tmp_path):
    args = ["verify", "survival", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--window-n", "64,512"]
    assert _run(tmp_path, *args, "--tolerance", "0")[0] == 2
    code, text = _run(tmp_path, *args, fmt="json")
    assert code == 0
    assert json.loads(text)["result"]["passed"] is True


def test_series_csv(tmp_path):
    series = tmp_path / "series.csv"
    code, _ = _run(tmp_path, "verify", "survival", "--model", SIMPLE, "--cone", HALFLINE, "--start", "1",
                   "--window-n", "64,1024", "--series-csv", str(series))
    assert code == 0
    lines = series.read_text().splitlines()
    assert lines[0] == "n,value"
    assert all(int(ln.split(",")[0]) % 2 == 0 for ln in lines[1:])


SMOKE = [
    ["model", "validate", "--model", NSEW, "--cone", QUAD],
    ["model", "decorrelate", "--model", LAZY],
    ["cone", "info", "--cone", QUAD, "--point", "10,10", "--n", "100", "--epsilon", "0.1"],
    ["reduite", "eval", "--cone", WEDGE, "--point", "0,2"],
    ["reduite", "check", "--cone", QUAD, "--samples", "20"],
    ["exact", "local", "--model", NSEW, "--cone", QUAD, "--start", "1,1", "--end", "1,1", "--n", "6", "--mode", "rational"],
    ["exact", "green", "--model", SIMPLE, "--cone", HALFLINE, "--start", "1", "--end", "1", "--n", "2", "--mode", "rational"],
    ["exact", "harmonic-v", "--model", NSEW, "--cone", QUAD, "--start", "1,1", "--n", "8"],
    ["exact", "count", "--steps", "1,0;-1,0;0,1;0,-1", "--cone", QUAD, "--start", "0,0", "--end", "0,0", "--n", "4", "--closed"],
    ["mc", "survival", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "10", "--samples", "1000"],
    ["mc", "boundary-functional", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "100", "--samples", "1000"],
    ["mc", "stopping-tail", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "100", "--epsilon", "0.2", "--samples", "1000"],
    ["mc", "fuk-nagaev", "--model", LAZY, "--n", "50", "--x-thresh", "10", "--y-thresh", "2", "--samples", "1000"],
    ["mc", "max-moment", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "100", "--alpha", "1", "--samples", "1000"],
    ["bm", "kernel", "--cone", WEDGE, "--xf", "0,1", "--yf", "0.2,1.3", "--t", "0.5,1,2"],
    ["bm", "survival", "--cone", QUAD, "--xf", "1,1", "--t", "1"],
    ["bm", "fit-constants", "--cone", HALFLINE],
    ["bm", "check-bounds", "--cone", QUAD, "--samples", "40"],
    ["verify", "llt-exponent", "--model", SIMPLE, "--cone", HALFLINE, "--start", "1", "--window-n", "64,1024"],
    ["verify", "interior", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n", "200"],
    ["verify", "boundary", "--model", LAZY, "--cone", QUAD, "--start", "1,1", "--n-grid", "100", "--calibration-n", "200",
     "--samples", "2000", "--tolerance", "0.5"],
    ["verify", "harmonic-v", "--model", NSEW, "--cone", QUAD, "--points", "1,1;2,3", "--n", "32"],
    ["verify", "lower-bound", "--model", LAZY, "--cone", QUAD, "--points", "1,50", "--n-grid", "64,256", "--samples", "2000"],
]


@pytest.mark.parametrize("argv", SMOKE, ids=lambda a: " ".join(a[:2]))
def test_subcommand_smoke(tmp_path, argv):
    for fmt in ("csv", "json"):
        code, text = _run(tmp_path, *argv, fmt=fmt)
        assert code == 0, text
        if fmt == "json":
            assert json.loads(text)["config"]["command"] == " ".join(argv[:2])
        else:
            assert text.startswith("# cone-walker-report/")


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "cone_walker.cli", "exact", "survival", "--model", LAZY, "--cone", QUAD,
         "--start", "1,1", "--n", "2", "-o", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "P(tau > 2)" in proc.stdout
    assert len(_csv_rows(out.read_text())[1]) == 3
