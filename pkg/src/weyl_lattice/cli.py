"""weyl-lattice command line.

Exit codes: 0 success, 1 invalid input, 2 conditions A) to E) violated,
3 numerical rejection (residual, certificate or comparison failure).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .classical import ScatteringError
from .factor import FactorizationError
from .kernels import QuadratureError
from .lattice import LatticeSpec, SpecError
from .pipeline import (ConditionsError, NumericalRejection, data_report, direct_table,
                       factorize_report, invert_report, isp_report, partition_report, roundtrip,
                       selfcheck, toda_report)
from .solver import SolverError
from .spectral import SCHEMA, ReducedSpectralData, SpectralDataError
from .toda import TodaError

log = logging.getLogger("weyl_lattice")

EXIT_OK, EXIT_INPUT, EXIT_CONDITIONS, EXIT_NUMERICAL = 0, 1, 2, 3
SUBCOMMANDS = ("direct", "partition", "factorize", "data", "invert", "isp", "roundtrip", "toda",
               "selfcheck")

CSV_HELP = """\
CSV columns:
  direct     theta, function (n | N | rho_right | rho_left), side (+1 inner, -1 outer,
             0 real axis at 2 cos theta), re, im, error_est
  invert     k, a, b, solve_residual   (b is b_k; a blank where not reconstructed)
  isp        k, a, b
  roundtrip  check, value, tolerance, pass
  toda       t, k, a, b, oracle_a, oracle_b, max_deviation
  selfcheck  check, value, tolerance, pass
Other subcommands emit JSON only. Every JSON artifact carries "schema": 1.
Set WEYL_LATTICE_LOG to DEBUG, INFO, WARNING or ERROR for log output on stderr.
"""


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    spec: str | None
    data: str | None
    out: str
    grid_circle: int
    grading: int
    panels: int
    tol: float
    k_range: tuple[int, int]
    times: list
    threads: int
    seed: int

    def validate(self) -> None:
        for name in ("grid_circle", "panels"):
            v = getattr(self, name)
            if v < 2 or v & (v - 1):
                raise InputError(f"--{name.replace('_', '-')} must be a power of two, got {v}")
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.grading not in (0, 2, 4):
            raise InputError("--grading must be 0, 2 or 4")
        if self.k_range[0] > self.k_range[1]:
            raise InputError("--k-range needs lo <= hi")
        if self.threads < 1:
            raise InputError("--threads must be at least 1")
        if any(t < 0 for t in self.times):
            raise InputError("--t values must be non-negative")


def parse_k_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise InputError(f"--k-range expects lo:hi, got {text!r}") from exc


def parse_times(text: str) -> list:
    """'0.3', '0.1,0.3,0.5' or 'start:stop:step' (stop included)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise InputError("--t step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9))
            return [round(start + i * step, 12) for i in range(n + 1)]
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse --t {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="weyl-lattice",
        description="Direct and inverse spectral problem for doubly-infinite Jacobi matrices.",
        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--spec", help="lattice spec JSON")
    p.add_argument("--data", help="reduced spectral data JSON (invert)")
    p.add_argument("--out", default="json",
                   help="'json' or 'csv' for stdout, or a file path (.csv selects CSV)")
    p.add_argument("--grid-circle", type=int, default=512, metavar="M", help="circle nodes (power of two)")
    p.add_argument("--grading", type=int, default=4, help="circle grid grading order (0, 2, 4)")
    p.add_argument("--panels", type=int, default=64, metavar="P",
                   help="nodes per doubly covered component (power of two)")
    p.add_argument("--tol", type=float, default=1e-4, metavar="T", help="entry tolerance for pass/fail")
    p.add_argument("--k-range", default="-5:5", metavar="LO:HI")
    p.add_argument("--t", default="0", metavar="SPEC", help="time, list a,b,c or range start:stop:step")
    p.add_argument("--threads", type=int, default=1, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S", help="seed of the coercivity probes")
    return p


def _config(ns) -> RunConfig:
    cfg = RunConfig(ns.subcommand, ns.spec, ns.data, ns.out, ns.grid_circle, ns.grading, ns.panels,
                    ns.tol, parse_k_range(ns.k_range), parse_times(ns.t), ns.threads, ns.seed)
    cfg.validate()
    return cfg


def _load_spec(cfg: RunConfig) -> LatticeSpec:
    if not cfg.spec:
        raise InputError(f"{cfg.subcommand} needs --spec")
    try:
        with open(cfg.spec) as fh:
            return LatticeSpec.from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read spec: {exc}") from exc


def _load_data(cfg: RunConfig) -> ReducedSpectralData:
    if not cfg.data:
        raise InputError("invert needs --data")
    try:
        with open(cfg.data) as fh:
            data = ReducedSpectralData.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"cannot read data: {exc}") from exc
    data.validate()
    return data


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _emit(cfg: RunConfig, report: dict, rows: list[dict] | None) -> None:
    target = cfg.out
    fmt = "csv" if target == "csv" or target.endswith(".csv") else "json"
    if fmt == "csv":
        if rows is None:
            raise InputError(f"{cfg.subcommand} has no CSV form; use --out json")
        text = _csv(rows)
    else:
        text = json.dumps(_jsonable(report), indent=1) + "\n"
    if target in ("json", "csv", "-"):
        sys.stdout.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)


def _entry_rows(rep: dict) -> list[dict]:
    ks = sorted({int(k) for k in rep["a"]} | {int(k) for k in rep["b"]})
    res = rep.get("solve_residuals", {})
    rows = []
    for k in ks:
        row = {"k": k, "a": rep["a"].get(str(k), ""), "b": rep["b"].get(str(k), "")}
        if res:
            row["solve_residual"] = res.get(str(k), "")
        rows.append(row)
    return rows


def run(cfg: RunConfig) -> int:
    sub = cfg.subcommand
    lo, hi = cfg.k_range
    M, gr = cfg.grid_circle, cfg.grading
    code = EXIT_OK
    if sub == "direct":
        spec = _load_spec(cfg)
        rows = direct_table(spec, M)
        report = {"schema": SCHEMA, "rows": rows}
    elif sub == "partition":
        report, rows = partition_report(_load_spec(cfg)), None
    elif sub == "factorize":
        _, report = factorize_report(_load_spec(cfg), cfg.seed)
        rows = None
    elif sub == "data":
        _, data = data_report(_load_spec(cfg), M, gr, cfg.seed)
        report, rows = data.to_dict(), None
    elif sub == "invert":
        report = invert_report(_load_data(cfg), lo, hi, cfg.times[0], cfg.threads, cfg.seed)
        rows = _entry_rows(report)
    elif sub == "isp":
        spec = _load_spec(cfg)
        report = isp_report(spec, lo, hi, M, gr)
        rows = _entry_rows(report)
        if report["max_entry_error"] >= cfg.tol:
            code = EXIT_NUMERICAL
    elif sub == "roundtrip":
        report = roundtrip(_load_spec(cfg), lo, hi, M, gr, cfg.tol, cfg.threads, cfg.seed)
        rows = report["table"]
        for r in rows:
            log.info("%-20s %-12.3e tol %-8.1e %s", r["check"], r["value"], r["tolerance"],
                     "PASS" if r["pass"] else "FAIL")
        if not report["passed"]:
            code = EXIT_NUMERICAL
    elif sub == "toda":
        spec = _load_spec(cfg)
        report = toda_report(spec, cfg.times, lo, hi, M, gr, cfg.threads, cfg.seed)
        rows = []
        for s in report["snapshots"]:
            for k in sorted(int(x) for x in s["a"]):
                rows.append({"t": s["t"], "k": k, "a": s["a"][str(k)], "b": s["b"][str(k)],
                             "oracle_a": s["oracle_a"][str(k)], "oracle_b": s["oracle_b"][str(k)],
                             "max_deviation": s["max_deviation"]})
        if report["max_deviation"] >= cfg.tol:
            code = EXIT_NUMERICAL
    else:  # selfcheck
        report = selfcheck(cfg.seed, cfg.panels)
        rows = report["table"]
        if not report["passed"]:
            code = EXIT_NUMERICAL
    report.setdefault("schema", SCHEMA)
    _emit(cfg, report, rows)
    return code


def _setup_logging() -> None:
    level = os.environ.get("WEYL_LATTICE_LOG", "WARNING").strip().upper()
    value = int(level) if level.isdigit() else getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=value, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # let negative values such as --k-range -8:8 through
    for i in range(len(argv) - 1):
        if argv[i] in ("--k-range", "--t") and argv[i + 1].startswith("-"):
            argv[i], argv[i + 1] = f"{argv[i]}={argv[i + 1]}", ""
    argv = [a for a in argv if a != ""]
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return run(_config(ns))
    except (InputError, SpecError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except ConditionsError as exc:
        log.error("%s", exc)
        _emit_failure(ns, {"schema": SCHEMA, "error": str(exc), "conditions": exc.report.to_dict()})
        return EXIT_CONDITIONS
    except (NumericalRejection, FactorizationError, SpectralDataError, SolverError, ScatteringError,
            QuadratureError, TodaError, np.linalg.LinAlgError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


def _emit_failure(ns, report: dict) -> None:
    if ns.out not in ("json", "csv", "-") and not ns.out.endswith(".csv"):
        with open(ns.out, "w") as fh:
            json.dump(_jsonable(report), fh, indent=1)


if __name__ == "__main__":
    sys.exit(main())
