"""End-to-end tests of the command-line interface.

Each test drives ``main(argv)`` in process and inspects stdout/stderr plus
the exit code.  The output contract under test: primary result on stdout
(or in ``--out FILE`` byte-for-byte), exactly one run manifest per
successful run (a JSON line on stderr, or a ``.manifest.json`` sibling of
``--out``) whose digest re-hashes the primary output, exit code 2 for
validation errors with a one-line diagnostic, and 64 for usage errors.
"""

import hashlib
import json
import subprocess
import sys
from fractions import Fraction

import pytest

import sphbispec.cli as cli
from sphbispec import __version__
from sphbispec.fieldsim import HarmonicCoefficients
from sphbispec.wigner import SignedSqrtRational


def run_cli(capsys, args):
    code = cli.main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def manifest_of(err_text):
    lines = [line for line in err_text.splitlines() if line.strip()]
    assert len(lines) == 1, f"expected exactly one manifest line, got {lines!r}"
    return json.loads(lines[0])


# --------------------------------------------------------------------------
# scalar symbol commands
# --------------------------------------------------------------------------


def test_wigner3j_exact_output_and_manifest(capsys):
    code, out, err = run_cli(
        capsys,
        ["wigner3j", "--l", "1", "1", "2", "--m", "0", "0", "0", "--format", "exact"],
    )
    assert code == 0
    assert out == "+sqrt(2/15)\n"
    parsed = SignedSqrtRational.parse_exact(out.strip())
    assert parsed.signed_square() == Fraction(2, 15)
    manifest = manifest_of(err)
    assert manifest["tool_version"] == __version__
    assert manifest["subcommand"] == "wigner3j"
    assert manifest["argv"][0] == "wigner3j"
    assert manifest["seed"] is None
    assert manifest["output_path"] is None
    assert manifest["artifacts"] == []
    assert manifest["output_sha256"] == hashlib.sha256(b"+sqrt(2/15)").hexdigest()


def test_wigner3j_decimal_default_digits(capsys):
    code, out, _ = run_cli(capsys, ["wigner3j", "--l", "1", "1", "2", "--m", "0", "0", "0"])
    assert code == 0
    assert out == "0.36514837167011074\n"


def test_wigner3j_zero_for_odd_sum(capsys):
    code, out, _ = run_cli(
        capsys,
        ["wigner3j", "--l", "1", "1", "3", "--m", "0", "0", "0", "--format", "exact"],
    )
    assert code == 0
    assert out == "0\n"


def test_wigner3j_invalid_arguments_exit_2(capsys):
    code, _, err = run_cli(capsys, ["wigner3j", "--l", "1", "1", "--m", "0", "0", "0"])
    assert code == 2
    assert err.startswith("sphbispec wigner3j:")
    assert len(err.strip().splitlines()) == 1
    code, _, err = run_cli(
        capsys, ["wigner3j", "--l", "-1", "1", "2", "--m", "0", "0", "0"]
    )
    assert code == 2
    code, _, err = run_cli(
        capsys,
        ["wigner3j", "--l", "1", "1", "2", "--m", "0", "0", "0", "--digits", "0"],
    )
    assert code == 2


def test_wigner6j_exact_values(capsys):
    code, out, _ = run_cli(
        capsys,
        ["wigner6j", "--upper", "1", "1", "2", "--lower", "1", "1", "2", "--format", "exact"],
    )
    assert code == 0
    assert out == "+sqrt(1/900)\n"
    code, out, _ = run_cli(
        capsys,
        ["wigner6j", "--upper", "2", "2", "2", "--lower", "2", "2", "2", "--format", "exact"],
    )
    assert out == "-sqrt(9/4900)\n"


def test_clebsch_decimal_value(capsys):
    code, out, _ = run_cli(
        capsys,
        ["clebsch", "--l1", "1", "--m1", "0", "--l2", "1", "--m2", "0", "--l", "2", "--m", "0"],
    )
    assert code == 0
    assert out == "0.81649658092772603\n"  # sqrt(2/3)


def test_gaunt_formats(capsys):
    code, out, _ = run_cli(
        capsys, ["gaunt", "--l", "1", "1", "2", "--m", "0", "0", "0", "--format", "exact"]
    )
    assert code == 0
    assert out == "+sqrt(4/5)/sqrt(4*pi)\n"
    code, out, _ = run_cli(capsys, ["gaunt", "--l", "1", "1", "2", "--m", "0", "0", "0"])
    assert out == "0.25231325220201600\n"
    code, out, _ = run_cli(capsys, ["gaunt", "--l", "1", "1", "3", "--m", "0", "0", "0"])
    assert out == "0\n"


# --------------------------------------------------------------------------
# moment commands
# --------------------------------------------------------------------------


def test_moments_closed_forms(capsys):
    code, out, err = run_cli(capsys, ["moments", "--triple", "4", "4", "4", "--power", "2"])
    assert code == 0
    doc = json.loads(out)
    assert doc["triple"] == [4, 4, 4]
    assert doc["exponent"] == 4
    assert doc["delta"] == 6
    assert doc["leading"] == "108"
    assert doc["prediction"] == "290700/1001"
    assert doc["prediction_float"] == pytest.approx(290700 / 1001)
    assert doc["per_multipole_g"] == {"4": "9/11"}
    manifest_of(err)


def test_moments_rejects_bad_triple(capsys):
    code, _, err = run_cli(capsys, ["moments", "--triple", "1", "1", "4"])
    assert code == 2
    assert err.startswith("sphbispec moments:")


def test_oracle_moment_diagram_sum(capsys):
    code, out, _ = run_cli(
        capsys, ["oracle-moment", "--triple", "1", "2", "3", "--power", "2"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["assignments"] == [{"triple": [1, 2, 3], "power": 2, "exponent": 4}]
    assert doc["total_diagrams"] == 10395
    assert doc["classes"]["flat"]["count"] == 7047
    assert doc["classes"]["paired"]["count"] == 108
    assert doc["classes"]["connected_nonpaired"]["count"] == 3240
    assert doc["classes"]["mixed"]["count"] == 0
    # E I^4 = 249/35 to the default 30 digits
    assert doc["value"].startswith("7.1142857142857142857142857142")


def test_oracle_moment_mixed_factors(capsys):
    code, out, _ = run_cli(
        capsys,
        ["oracle-moment", "--factor", "1", "2", "3", "1", "--factor", "1", "1", "2", "1"],
    )
    assert code == 0
    doc = json.loads(out)
    assert [a["exponent"] for a in doc["assignments"]] == [2, 2]
    # E I^2_(1,2,3) I^2_(1,1,2) = 106/15
    assert doc["value"].startswith("7.0666666666666666666666666666")


def test_oracle_moment_requires_input(capsys):
    code, _, err = run_cli(capsys, ["oracle-moment"])
    assert code == 2
    assert "triple" in err or "factor" in err


def test_oracle_moment_budget_exceeded_exits_2(capsys):
    code, _, err = run_cli(
        capsys, ["oracle-moment", "--triple", "5", "6", "7", "--power", "2", "--budget", "3"]
    )
    assert code == 2
    assert err.startswith("sphbispec oracle-moment:")


# --------------------------------------------------------------------------
# simulation commands
# --------------------------------------------------------------------------


def test_simulate_round_trips_and_is_deterministic(capsys):
    code, out, err = run_cli(capsys, ["simulate", "--lmax", "3", "--seed", "7"])
    assert code == 0
    a = HarmonicCoefficients.from_json(out)
    assert a.lmax == 3
    assert manifest_of(err)["seed"] == 7
    code, out2, _ = run_cli(capsys, ["simulate", "--lmax", "3", "--seed", "7"])
    assert out2 == out
    code, out3, _ = run_cli(capsys, ["simulate", "--lmax", "3", "--seed", "8"])
    assert out3 != out


def test_simulate_validates_lmax(capsys):
    code, _, err = run_cli(capsys, ["simulate", "--lmax", "0"])
    assert code == 2
    assert err.startswith("sphbispec simulate:")


def test_mc_requires_seed(capsys):
    code, _, err = run_cli(capsys, ["mc", "--triple", "1", "2", "3", "--n", "10"])
    assert code == 2
    assert err.startswith("sphbispec mc:")
    assert len(err.strip().splitlines()) == 1


def test_mc_stdout_report(capsys):
    code, out, err = run_cli(
        capsys, ["mc", "--triple", "1", "2", "3", "--n", "50", "--seed", "1"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["replications"] == 50
    assert [m["power"] for m in doc["moments"]] == [1, 2]
    assert doc["moments"][1]["predicted"]["value_used"] == pytest.approx(249 / 35)
    manifest = manifest_of(err)
    assert manifest["seed"] == 1
    assert manifest["output_sha256"] == hashlib.sha256(out[:-1].encode()).hexdigest()


def test_mc_with_out_writes_files_and_sibling_manifest(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    csv_path = tmp_path / "samples.csv"
    code, out, err = run_cli(
        capsys,
        [
            "mc", "--triple", "1", "2", "3", "--triple", "2", "2", "2",
            "--n", "40", "--seed", "3",
            "--out", str(out_path), "--csv", str(csv_path),
        ],
    )
    assert code == 0
    assert out == ""
    assert err == ""  # manifest went to the sibling file instead
    report_bytes = out_path.read_bytes()
    doc = json.loads(report_bytes)
    assert doc["all_pass"] in (True, False)
    manifest = json.loads((tmp_path / "report.json.manifest.json").read_text())
    assert manifest["output_path"] == str(out_path)
    assert manifest["output_sha256"] == hashlib.sha256(report_bytes).hexdigest()
    # figure and csv artifacts land next to the report and are recorded
    figure = tmp_path / "report_hist.png"
    assert figure.exists() and figure.stat().st_size > 0
    assert set(manifest["artifacts"]) == {str(csv_path), str(figure)}
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "replication,I_1_2_3,I_2_2_2"
    assert len(lines) == 41


def test_mc_triples_file(tmp_path, capsys):
    triples = tmp_path / "triples.json"
    triples.write_text(json.dumps([[1, 2, 3], [1, 1, 2]]))
    code, out, _ = run_cli(
        capsys, ["mc", "--triples", str(triples), "--n", "20", "--seed", "4"]
    )
    assert code == 0
    doc = json.loads(out)
    assert [m["triple"] for m in doc["moments"]][::2] == [[1, 2, 3], [1, 1, 2]]
    code, _, err = run_cli(
        capsys, ["mc", "--triples", str(tmp_path / "absent.json"), "--n", "20", "--seed", "4"]
    )
    assert code == 2


def test_rate_sweep_csv(capsys):
    code, out, err = run_cli(capsys, ["rate-sweep", "--lmin", "2", "--lmax", "5"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "l,l1,l2,l3,known_scaled_deviation,estimated_scaled_deviation"
    assert len(lines) == 5
    assert lines[1] == "2,2,3,4,14.595238095238095,1.5476190476190477"
    manifest = manifest_of(err)
    assert manifest["subcommand"] == "rate-sweep"


def test_rate_sweep_rejects_empty_range(capsys):
    code, _, err = run_cli(capsys, ["rate-sweep", "--lmin", "6", "--lmax", "5"])
    assert code == 2


def test_rate_sweep_figure(tmp_path, capsys):
    out_path = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, ["rate-sweep", "--lmin", "2", "--lmax", "6", "--out", str(out_path)]
    )
    assert code == 0
    assert (tmp_path / "sweep.png").exists()
    manifest = json.loads((tmp_path / "sweep.csv.manifest.json").read_text())
    assert manifest["artifacts"] == [str(tmp_path / "sweep.png")]


def test_clt_validates_replication_count(capsys):
    code, _, err = run_cli(
        capsys, ["clt", "--triple", "1", "2", "3", "--n", "999"]
    )
    assert code == 2
    assert err.startswith("sphbispec clt:")


def test_clt_report(tmp_path, capsys):
    out_path = tmp_path / "clt.json"
    code, _, _ = run_cli(
        capsys,
        ["clt", "--triple", "1", "2", "3", "--n", "1000", "--out", str(out_path)],
    )
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["replications"] == 1000
    assert doc["seed"] == 0  # default
    assert doc["ks_critical_1pct"] == pytest.approx(1.63 / 1000**0.5)
    assert 0.0 < doc["triples"][0]["ks_statistic"] < 1.0
    assert (tmp_path / "clt_cdf.png").exists()


# --------------------------------------------------------------------------
# top-level behavior
# --------------------------------------------------------------------------


def test_bare_invocation_prints_usage(capsys):
    code, out, err = run_cli(capsys, [])
    assert code == 64
    assert out == ""
    assert "subcommands:" in err


def test_unknown_subcommand(capsys):
    code, _, err = run_cli(capsys, ["frobnicate"])
    assert code == 64
    assert "unknown subcommand" in err


def test_help_and_version(capsys):
    code, out, _ = run_cli(capsys, ["--help"])
    assert code == 0
    assert "subcommands:" in out
    code, out, _ = run_cli(capsys, ["--version"])
    assert code == 0
    assert out.strip() == __version__


def test_internal_errors_exit_70(capsys, monkeypatch):
    def boom(argv):
        raise RuntimeError("wires crossed")

    monkeypatch.setitem(cli._COMMANDS, "moments", boom)
    code, _, err = run_cli(capsys, ["moments", "--triple", "1", "2", "3"])
    assert code == 70
    assert "internal error" in err


def test_console_script_is_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "sphbispec.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == __version__
    proc = subprocess.run(["sphbispec", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == __version__
