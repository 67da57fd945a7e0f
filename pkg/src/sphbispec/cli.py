"""Command-line entry point: every library operation as a subcommand.

Output contract: the primary result goes to stdout, or to ``--out FILE``
when given.  Every successful run emits exactly one run manifest carrying
the tool version, argument vector, seed, timestamps and a SHA-256 digest of
the primary output bytes — as a single JSON line on stderr, or as a
``FILE.manifest.json`` sibling when ``--out`` is used.  Exit codes: 0
success, 2 validation error (single-line diagnostic on stderr), 64 unknown
subcommand or usage, 70 internal error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Callable, Sequence

from . import __version__
from .bispectrum import (
    MultipoleTriple,
    delta_factor,
    g_factor,
    kappa4_closed_form,
    moment_expansion,
)
from .diagrams import BudgetExceededError, moment_breakdown
from .fieldsim import AngularPowerSpectrum, sample_alms
from .montecarlo import (
    ExperimentConfig,
    clt_report_from_samples,
    collect_samples,
    rate_sweep,
    report_from_samples,
)
from .wigner import SignedSqrtRational, clebsch_gordan, gaunt, wigner3j, wigner6j

_PI_60 = Decimal("3.14159265358979323846264338327950288419716939937510582097494")

_USAGE = """usage: sphbispec <subcommand> [options]

subcommands:
  wigner3j      exact or decimal Wigner 3j symbol
  wigner6j      exact or decimal Wigner 6j symbol
  clebsch       exact or decimal Clebsch-Gordan coefficient
  gaunt         Gaunt integral of three spherical harmonics
  oracle-moment brute-force diagram-sum moment of normalized bispectra
  moments       closed-form moment predictions for one triple
  simulate      draw harmonic coefficients of a Gaussian isotropic field
  mc            replication experiment: sample moments vs. predictions
  rate-sweep    exact (2l+1)-scaled moment deviations along (l, l+1, l+2)
  clt           Kolmogorov-Smirnov normality check of the statistic

run `sphbispec <subcommand> --help` for options."""


class _CliError(Exception):
    """Validation failure: single-line diagnostic, exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _CliError(message)


@dataclass
class _CmdResult:
    text: str
    seed: int | None = None
    out: str | None = None
    artifact_jobs: tuple[Callable[[], str], ...] = ()


# --------------------------------------------------------------------------
# scalar symbol commands
# --------------------------------------------------------------------------


def _add_format_flags(parser: _Parser):
    parser.add_argument("--format", choices=("exact", "decimal"), default="decimal")
    parser.add_argument("--digits", type=int, default=17, help="significant digits (decimal format)")


def _format_ssr(value: SignedSqrtRational, fmt: str, digits: int) -> str:
    if fmt == "exact":
        return value.format_exact()
    if digits < 1:
        raise _CliError(f"--digits must be positive, got {digits}")
    return str(value.to_decimal(digits))


def _cmd_wigner3j(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec wigner3j")
    parser.add_argument("--l", nargs=3, type=int, required=True, metavar=("L1", "L2", "L3"))
    parser.add_argument("--m", nargs=3, type=int, required=True, metavar=("M1", "M2", "M3"))
    _add_format_flags(parser)
    ns = parser.parse_args(argv)
    value = wigner3j(*ns.l, *ns.m)
    return _CmdResult(_format_ssr(value, ns.format, ns.digits))


def _cmd_wigner6j(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec wigner6j")
    parser.add_argument("--upper", nargs=3, type=int, required=True, metavar=("A", "B", "E"))
    parser.add_argument("--lower", nargs=3, type=int, required=True, metavar=("C", "D", "F"))
    _add_format_flags(parser)
    ns = parser.parse_args(argv)
    value = wigner6j(*ns.upper, *ns.lower)
    return _CmdResult(_format_ssr(value, ns.format, ns.digits))


def _cmd_clebsch(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec clebsch")
    parser.add_argument("--l1", type=int, required=True)
    parser.add_argument("--m1", type=int, required=True)
    parser.add_argument("--l2", type=int, required=True)
    parser.add_argument("--m2", type=int, required=True)
    parser.add_argument("--l", type=int, required=True)
    parser.add_argument("--m", type=int, required=True)
    _add_format_flags(parser)
    ns = parser.parse_args(argv)
    value = clebsch_gordan(ns.l1, ns.m1, ns.l2, ns.m2, ns.l, ns.m)
    return _CmdResult(_format_ssr(value, ns.format, ns.digits))


def _cmd_gaunt(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec gaunt")
    parser.add_argument("--l", nargs=3, type=int, required=True, metavar=("L1", "L2", "L3"))
    parser.add_argument("--m", nargs=3, type=int, required=True, metavar=("M1", "M2", "M3"))
    _add_format_flags(parser)
    ns = parser.parse_args(argv)
    value = gaunt(*ns.l, *ns.m)
    if ns.format == "exact":
        text = value.algebraic.format_exact()
        if text != "0" and value.inv_sqrt_4pi:
            text += "/sqrt(4*pi)"
        return _CmdResult(text)
    if ns.digits < 1:
        raise _CliError(f"--digits must be positive, got {ns.digits}")
    if value.algebraic.is_zero():
        return _CmdResult("0")
    with localcontext() as ctx:
        ctx.prec = ns.digits + 12
        out = value.algebraic.to_decimal(ns.digits + 12)
        if value.inv_sqrt_4pi:
            out /= (4 * _PI_60).sqrt()
    with localcontext() as ctx:
        ctx.prec = ns.digits
        return _CmdResult(str(+out))


# --------------------------------------------------------------------------
# moment commands
# --------------------------------------------------------------------------


def _cmd_oracle_moment(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec oracle-moment")
    parser.add_argument("--triple", nargs=3, type=int, metavar=("L1", "L2", "L3"))
    parser.add_argument("--power", type=int, default=1, help="half-exponent p: computes E I^(2p)")
    parser.add_argument(
        "--factor",
        nargs=4,
        type=int,
        action="append",
        metavar=("L1", "L2", "L3", "P"),
        help="extra factor I_(l1,l2,l3)^(2p) for mixed moments; repeatable",
    )
    parser.add_argument("--digits", type=int, default=30)
    parser.add_argument("--budget", type=int, default=10**8)
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(argv)
    assignments = []
    if ns.triple is not None:
        assignments.append((tuple(ns.triple), 2 * ns.power))
    for row in ns.factor or ():
        assignments.append((tuple(row[:3]), 2 * row[3]))
    if not assignments:
        raise _CliError("need --triple or at least one --factor")
    breakdown = moment_breakdown(assignments, budget=ns.budget, digits=ns.digits)
    doc = {
        "assignments": [
            {"triple": list(t), "power": n // 2, "exponent": n} for t, n in assignments
        ],
        "digits": ns.digits,
        "total_diagrams": breakdown["total_diagrams"],
        "classes": {
            name: {"count": c["count"], "value": str(c["value"])}
            for name, c in breakdown["classes"].items()
        },
        "value": str(breakdown["value"]),
    }
    return _CmdResult(json.dumps(doc, indent=2), out=ns.out)


def _cmd_moments(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec moments")
    parser.add_argument("--triple", nargs=3, type=int, required=True, metavar=("L1", "L2", "L3"))
    parser.add_argument("--power", type=int, default=2, help="half-exponent p: predicts E I^(2p)")
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(argv)
    t = MultipoleTriple.from_multipoles(ns.triple)
    pred = moment_expansion(t, ns.power)
    doc = {
        "triple": list(t.astuple()),
        "power": ns.power,
        "exponent": 2 * ns.power,
        "delta": delta_factor(t),
        "kappa4": str(kappa4_closed_form(t)),
        "leading": str(pred.leading),
        "kappa4_correction": str(pred.kappa4_correction),
        "prediction": str(pred.prediction),
        "prediction_float": float(pred.prediction),
        "g_correction": str(pred.g_correction),
        "feasible_prediction": str(pred.feasible_prediction),
        "feasible_prediction_float": float(pred.feasible_prediction),
        "order_bound": pred.order_bound,
        "per_multipole_g": {
            str(l): str(g_factor(l, ns.power)) for l in sorted(set(t.astuple()))
        },
    }
    return _CmdResult(json.dumps(doc, indent=2), out=ns.out)


# --------------------------------------------------------------------------
# simulation commands
# --------------------------------------------------------------------------


def _add_spectrum_flags(parser: _Parser):
    parser.add_argument("--spectrum", choices=("flat", "power-law"), default="flat")
    parser.add_argument("--alpha", type=float, default=1.0, help="power-law exponent")


def _cmd_simulate(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec simulate")
    parser.add_argument("--lmax", type=int, required=True)
    parser.add_argument("--seed", type=int, default=0)
    _add_spectrum_flags(parser)
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(argv)
    if ns.lmax < 1:
        raise _CliError(f"--lmax must be >= 1, got {ns.lmax}")
    if ns.spectrum == "flat":
        spec = AngularPowerSpectrum.flat(ns.lmax)
    else:
        spec = AngularPowerSpectrum.power_law(ns.lmax, ns.alpha)
    a = sample_alms(spec, seed=ns.seed)
    return _CmdResult(a.to_json(), seed=ns.seed, out=ns.out)


def _parse_triples(ns) -> list[tuple[int, int, int]]:
    triples: list[tuple[int, int, int]] = []
    if getattr(ns, "triples", None):
        try:
            with open(ns.triples, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _CliError(f"cannot read triples file {ns.triples}: {exc}") from exc
        if not isinstance(data, list):
            raise _CliError(f"triples file {ns.triples} must hold a JSON list of 3-lists")
        for row in data:
            if not isinstance(row, list) or len(row) != 3 or not all(isinstance(v, int) for v in row):
                raise _CliError(f"bad triple in {ns.triples}: {row!r}")
            triples.append(tuple(row))
    for row in getattr(ns, "triple", None) or ():
        triples.append(tuple(row))
    if not triples:
        raise _CliError("need --triples FILE or at least one --triple L1 L2 L3")
    return triples


def _figure_stem(out: str) -> str:
    return os.path.splitext(out)[0]


def _samples_csv(triples, values) -> str:
    header = "replication," + ",".join(f"I_{t[0]}_{t[1]}_{t[2]}" for t in triples)
    lines = [header]
    for r in range(values.shape[0]):
        lines.append(str(r) + "," + ",".join(f"{v:.17g}" for v in values[r]))
    return "\n".join(lines) + "\n"


def _cmd_mc(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec mc")
    parser.add_argument("--triples", default=None, help="JSON file with a list of [l1,l2,l3]")
    parser.add_argument("--triple", nargs=3, type=int, action="append", metavar=("L1", "L2", "L3"))
    parser.add_argument("--n", type=int, required=True, help="replications")
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--mode", choices=("known-cl", "estimated-cl"), default="known-cl")
    parser.add_argument("--powers", nargs="+", type=int, default=[1, 2])
    _add_spectrum_flags(parser)
    parser.add_argument("--threshold", type=float, default=4.0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None)
    parser.add_argument("--csv", default=None, help="write per-replication statistic values")
    ns = parser.parse_args(argv)
    cfg = ExperimentConfig(
        triples=tuple(_parse_triples(ns)),
        replications=ns.n,
        seed=ns.seed,
        spectrum=ns.spectrum,
        alpha=ns.alpha,
        mode=ns.mode,
        powers=tuple(ns.powers),
    )
    values = collect_samples(cfg, workers=ns.workers)
    report = report_from_samples(cfg, values, threshold=ns.threshold)
    jobs = []
    if ns.csv:
        def _write_csv(path=ns.csv):
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(_samples_csv([t.astuple() for t in cfg.triples], values))
            return path

        jobs.append(_write_csv)
    if ns.out:
        def _render(path=_figure_stem(ns.out) + "_hist.png"):
            from . import _figures

            return _figures.render_histograms(cfg, values, path)

        jobs.append(_render)
    return _CmdResult(report.to_json(), seed=ns.seed, out=ns.out, artifact_jobs=tuple(jobs))


def _cmd_rate_sweep(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec rate-sweep")
    parser.add_argument("--lmin", type=int, default=2)
    parser.add_argument("--lmax", type=int, default=50)
    parser.add_argument("--power", type=int, default=2, help="half-exponent p (1 or 2)")
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(argv)
    if ns.lmin > ns.lmax:
        raise _CliError(f"--lmin {ns.lmin} exceeds --lmax {ns.lmax}")
    rows = rate_sweep(range(ns.lmin, ns.lmax + 1), ns.power)
    lines = ["l,l1,l2,l3,known_scaled_deviation,estimated_scaled_deviation"]
    for r in rows:
        lines.append(
            f"{r.l},{r.triple.l1},{r.triple.l2},{r.triple.l3},"
            f"{float(r.known_scaled_deviation):.17g},{float(r.estimated_scaled_deviation):.17g}"
        )
    text = "\n".join(lines) + "\n"
    jobs = []
    if ns.out:
        def _render(path=_figure_stem(ns.out) + ".png"):
            from . import _figures

            return _figures.render_rate_sweep(rows, ns.power, path)

        jobs.append(_render)
    return _CmdResult(text, out=ns.out, artifact_jobs=tuple(jobs))


def _cmd_clt(argv: Sequence[str]) -> _CmdResult:
    parser = _Parser(prog="sphbispec clt")
    parser.add_argument("--triples", default=None, help="JSON file with a list of [l1,l2,l3]")
    parser.add_argument("--triple", nargs=3, type=int, action="append", metavar=("L1", "L2", "L3"))
    parser.add_argument("--n", type=int, required=True, help="replications (>= 1000)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=("known-cl", "estimated-cl"), default="known-cl")
    _add_spectrum_flags(parser)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None)
    ns = parser.parse_args(argv)
    cfg = ExperimentConfig(
        triples=tuple(_parse_triples(ns)),
        replications=ns.n,
        seed=ns.seed,
        spectrum=ns.spectrum,
        alpha=ns.alpha,
        mode=ns.mode,
    )
    values = collect_samples(cfg, workers=ns.workers)
    report = clt_report_from_samples(cfg, values)
    jobs = []
    if ns.out:
        def _render(path=_figure_stem(ns.out) + "_cdf.png"):
            from . import _figures

            return _figures.render_cdf_comparison(report, values, path)

        jobs.append(_render)
    return _CmdResult(report.to_json(), seed=ns.seed, out=ns.out, artifact_jobs=tuple(jobs))


_COMMANDS = {
    "wigner3j": _cmd_wigner3j,
    "wigner6j": _cmd_wigner6j,
    "clebsch": _cmd_clebsch,
    "gaunt": _cmd_gaunt,
    "oracle-moment": _cmd_oracle_moment,
    "moments": _cmd_moments,
    "simulate": _cmd_simulate,
    "mc": _cmd_mc,
    "rate-sweep": _cmd_rate_sweep,
    "clt": _cmd_clt,
}


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="microseconds")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if not argv:
        print(_USAGE, file=sys.stderr)
        return 64
    if argv[0] in ("-h", "--help"):
        print(_USAGE)
        return 0
    if argv[0] == "--version":
        print(__version__)
        return 0
    name = argv[0]
    command = _COMMANDS.get(name)
    if command is None:
        print(f"sphbispec: unknown subcommand {name!r}", file=sys.stderr)
        return 64
    started = _utcnow()
    try:
        result = command(argv[1:])
        output_bytes = result.text.encode("utf-8")
        if result.out is not None:
            with open(result.out, "wb") as fh:
                fh.write(output_bytes)
        else:
            sys.stdout.write(result.text)
            if not result.text.endswith("\n"):
                sys.stdout.write("\n")
        artifacts = [job() for job in result.artifact_jobs]
    except _CliError as exc:
        print(f"sphbispec {name}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, BudgetExceededError) as exc:
        print(f"sphbispec {name}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"sphbispec {name}: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help inside a subcommand
        return int(exc.code or 0)
    except Exception as exc:  # pragma: no cover - defensive
        print(f"sphbispec {name}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 70
    manifest = {
        "tool_version": __version__,
        "subcommand": name,
        "argv": argv,
        "seed": result.seed,
        "started_at": started,
        "finished_at": _utcnow(),
        "output_sha256": hashlib.sha256(output_bytes).hexdigest(),
        "output_path": result.out,
        "artifacts": artifacts,
    }
    if result.out is not None:
        with open(result.out + ".manifest.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=2) + "\n")
    else:
        print(json.dumps(manifest), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
