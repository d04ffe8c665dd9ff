"""
Tests for the command line: exit codes, reports and written artifacts.
"""

import json
import time
from pathlib import Path

import pytest

from atcws.main import main

LOUD_MODEL = """\
def Tock() = sleep.Tock()
def Shout() = out(hello).Tock()

network loud { node m [ Shout() ] nbr {obs} }
network quiet { node m [ Tock() ] nbr {obs} }
"""


@pytest.fixture(scope="function")
def loud_model(workdir: Path) -> Path:
    """
    A model with a broadcasting node and a silent one.

    Args:
        workdir: Isolated working directory fixture.

    Returns:
        Path to the written model file.
    """
    path = workdir / "loud.atcws"
    path.write_text(LOUD_MODEL)
    return path


def test_attack_leap_breaks_the_bound(workdir: Path, capsys: pytest.CaptureFixture):
    """Test the LEAP+ replay is reported with its gap and exit code 1."""
    trace_out = workdir / "leap.trace"
    started = time.monotonic()
    assert main(["attack", "leap", "--trace-out", str(trace_out)]) == 1
    assert time.monotonic() - started < 5
    out = capsys.readouterr().out
    assert "verdict: fails" in out
    assert "agreement gap 4 > 2" in out
    assert trace_out.read_text().startswith("out pair(hello,")


def test_attack_report_is_byte_stable(workdir: Path, capsys: pytest.CaptureFixture):
    """Test two runs print the same report."""
    main(["attack", "lisp"])
    first = capsys.readouterr().out
    main(["attack", "lisp"])
    assert capsys.readouterr().out == first
    assert "integrity gap 3 > 2" in first


@pytest.mark.parametrize("query", [
    "mutesla-boot-integrity.q",
    "mutesla-auth-integrity.q",
    "leap-integrity.q",
])
def test_tgndc_integrity_queries_hold(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture, query: str):
    """Test the bundled integrity queries hold at their bound of 10 within two minutes."""
    started = time.monotonic()
    code = main(["tgndc", str(corpus_dir / "queries" / query)])
    elapsed = time.monotonic() - started
    out = capsys.readouterr().out
    assert elapsed < 120, f"{query} took {elapsed:.0f}s"
    assert code == 0, out
    assert "tGNDC holds" in out
    assert "[1] " in out


def test_tgndc_runs_attack_queries(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test a query file of attacks fails as a whole."""
    assert main(["tgndc", str(corpus_dir / "queries" / "attacks.q")]) == 1
    out = capsys.readouterr().out
    assert out.count("check: attack") == 3


def test_tgndc_runs_relay_queries(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test exploration and simulation queries in a model file."""
    assert main(["tgndc", str(corpus_dir / "models" / "relay.atcws")]) == 0
    out = capsys.readouterr().out
    assert "check: explore" in out
    assert "subject: pinging <= forwarding" in out


def test_check_wf_reports_asymmetry(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test the lopsided example fails with the offending pair named."""
    assert main(["check-wf", str(corpus_dir / "models" / "asymmetric.atcws")]) == 1
    out = capsys.readouterr().out
    assert "asymmetric neighbors: p lists q but q does not list p" in out


def test_check_wf_on_protocol_system(workdir: Path, capsys: pytest.CaptureFixture):
    """Test a bundled system is well-formed and well-timed."""
    assert main(["check-wf", "--protocol", "leap"]) == 0
    out = capsys.readouterr().out
    assert "check: well-timedness" in out


def test_explore_writes_dot(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test exploration prints counts and writes the graph."""
    dot = workdir / "pinging.dot"
    code = main(["explore", str(corpus_dir / "models" / "relay.atcws"),
                 "--network", "pinging", "--max-sigma", "3", "--dot", str(dot)])
    assert code == 0
    out = capsys.readouterr().out
    assert "bounds: max_sigma=3" in out
    assert "states: " in out
    assert dot.read_text().startswith("digraph lts {")


def test_trace_runs_on_attacked_system(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test the golden trace runs with the replayers and is refused by the abstraction."""
    trace = str(corpus_dir / "traces" / "mutesla-boot-agreement.trace")
    args = ["trace", trace, "--protocol", "mutesla-boot", "--variant", "agreement"]
    assert main(args + ["--network", "attacked"]) == 0
    assert "runs, " in capsys.readouterr().out
    assert main(args + ["--network", "abstraction", "--expect-refused"]) == 0
    assert "refused" in capsys.readouterr().out
    assert main(args + ["--network", "abstraction"]) == 1


def test_sim_counterexample_is_written(loud_model: Path, workdir: Path, capsys: pytest.CaptureFixture):
    """Test a failing simulation prints and writes its counterexample."""
    trace_out = workdir / "ce.trace"
    assert main(["sim", "loud", "quiet", str(loud_model), "--trace-out", str(trace_out)]) == 1
    out = capsys.readouterr().out
    assert "unmatched label: out hello > {obs}" in out
    assert trace_out.read_text() == "out hello > {obs}\n"
    assert main(["sim", "quiet", "quiet", str(loud_model)]) == 0


def test_time_props_on_random_networks(workdir: Path, capsys: pytest.CaptureFixture):
    """Test a short random suite holds."""
    assert main(["time-props", "--count", "20", "--seed", "3"]) == 0
    assert "subject: 20 random networks (seed 3)" in capsys.readouterr().out


def test_list_protocols(workdir: Path, capsys: pytest.CaptureFixture):
    """Test every protocol is listed with its variants."""
    assert main(["list-protocols"]) == 0
    out = capsys.readouterr().out
    assert "mutesla-boot: " in out
    assert "  variants: integrity, agreement" in out


def test_usage_errors_exit_3(workdir: Path, capsys: pytest.CaptureFixture):
    """Test bad flags, a missing subcommand and a missing file exit with 3."""
    assert main([]) == 3
    assert main(["explore", "--bogus"]) == 3
    assert main(["attack", "tinysec"]) == 3
    capsys.readouterr()
    assert main(["explore", "absent.atcws"]) == 3
    assert "error: cannot read" in capsys.readouterr().err


def test_parse_error_exits_3(workdir: Path, capsys: pytest.CaptureFixture):
    """Test a syntax error names its line."""
    bad = workdir / "bad.atcws"
    bad.write_text("def P() = nil\ndef Q() = sleep nil\n")
    assert main(["check-wf", str(bad)]) == 3
    assert "error: line 2, column 17" in capsys.readouterr().err


def test_help_exits_0(workdir: Path, capsys: pytest.CaptureFixture):
    """Test --help is not an error."""
    assert main(["--help"]) == 0
    assert "usage: atcws" in capsys.readouterr().out


def test_config_file_sets_bounds(workdir: Path, corpus_dir: Path, capsys: pytest.CaptureFixture):
    """Test ./atcws.json is read and flags override it."""
    (workdir / "atcws.json").write_text(json.dumps({"max_sigma": 2}))
    relay = str(corpus_dir / "models" / "relay.atcws")
    assert main(["explore", relay, "--network", "pinging"]) == 0
    assert "bounds: max_sigma=2" in capsys.readouterr().out
    assert main(["explore", relay, "--network", "pinging", "--max-sigma", "1"]) == 0
    assert "bounds: max_sigma=1" in capsys.readouterr().out


def test_invalid_config_exits_3(workdir: Path, capsys: pytest.CaptureFixture):
    """Test a config value out of range is a usage error."""
    (workdir / "atcws.json").write_text(json.dumps({"max_sigma": -1}))
    assert main(["list-protocols"]) == 3
    assert "Invalid settings: max_sigma" in capsys.readouterr().err
