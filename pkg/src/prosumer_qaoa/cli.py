"""Command-line entry point: ``prosumer-qaoa {transform,solve,enumerate,bench,verify}``.

Exit codes: 0 ok, 2 invalid instance, 3 I/O error, 4 size/qubit cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from typing import Any, Sequence

from . import __version__
from .exact_solver import (
    MAX_ENUM_LOAD_VARS,
    ProblemSizeError,
    enumerate_feasible,
    records_to_csv,
    records_to_rows,
    records_to_table,
    verify_reduction,
)
from .problem_model import InstanceError, read_instance, widened_fixture
from .qaoa_sim import QaoaConfig, QubitCapError, check_cap, default_max_qubits, solve_qaoa
from .reduction import (
    build_ilp,
    hamiltonian_terms,
    ilp_to_dict,
    ising_from_qubo,
    ising_to_dict,
    penalty_coefficient,
    qubo_from_ilp,
    qubo_to_dict,
)

log = logging.getLogger("prosumer_qaoa")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_CAP = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def atomic_write(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _load(path: str):
    try:
        return read_instance(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc
    except InstanceError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INVALID) from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        atomic_write(out, text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}", EXIT_IO) from exc


class Manifest:
    """Run record: inputs, config echo and per-phase wall times."""

    def __init__(self, command: str, instance: str | None, config: dict[str, Any]):
        self.data: dict[str, Any] = {
            "command": command,
            "instance": instance,
            "config": config,
            "timing": {},
            "outputs": {},
        }

    def timed(self, phase: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                manifest.data["timing"][phase] = round(time.perf_counter() - self.t0, 6)

        return _Timer()

    def write(self, path: str | None) -> None:
        text = json.dumps(self.data, sort_keys=True)
        if path:
            _emit(text + "\n", path)
        else:
            print(f"manifest: {text}", file=sys.stderr)


# -- commands ------------------------------------------------------------------


def cmd_transform(args: argparse.Namespace) -> int:
    manifest = Manifest("transform", args.instance, {"emit": args.emit})
    with manifest.timed("load"):
        instance = _load(args.instance)
    with manifest.timed("reduce"):
        ilp = build_ilp(instance)
        A = penalty_coefficient(instance) if args.penalty is None else args.penalty
        qubo = qubo_from_ilp(ilp, A)
        ising = ising_from_qubo(qubo)
    summary = (
        f"{ilp.num_vars} variables ({ilp.num_load_vars} load + {ilp.num_slack_vars} slack), "
        f"{ilp.num_constraints} constraints, penalty A = {A:g}"
    )
    if args.emit == "ilp":
        doc = ilp_to_dict(ilp)
    elif args.emit == "qubo":
        doc = qubo_to_dict(qubo)
    else:
        doc = ising_to_dict(ising)
    if args.hamiltonian and args.emit == "ising":
        doc["hamiltonian"] = hamiltonian_terms(ising)
    _emit(_dumps(doc), args.out)
    print(summary, file=sys.stdout if args.out else sys.stderr)
    manifest.data["outputs"] = {"emit": args.emit, "path": args.out, "num_vars": ilp.num_vars,
                                "num_constraints": ilp.num_constraints, "penalty": A}
    manifest.write(args.manifest)
    return EXIT_OK


def _format_samples(samples: list[dict[str, Any]], fmt: str) -> str:
    fields = ["rank", "bits", "count", "energy", "cost_cents", "cost_eur", "feasible"]
    rows = [
        {
            "rank": i,
            "bits": s["bits"],
            "count": s["count"],
            "energy": s["energy"],
            "cost_cents": s["cost"],
            "cost_eur": f"{s['cost'] / 100:.2f}",
            "feasible": s["feasible"],
        }
        for i, s in enumerate(samples, start=1)
    ]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    table = [[str(r[f]) for f in fields] for r in rows]
    widths = [max([len(f)] + [len(t[i]) for t in table]) for i, f in enumerate(fields)]
    lines = ["  ".join(f.rjust(w) for f, w in zip(fields, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(t, widths)) for t in table]
    return "\n".join(lines) + "\n"


def cmd_solve(args: argparse.Namespace) -> int:
    config = QaoaConfig(
        reps=args.reps,
        shots=args.shots,
        max_evals=args.max_evals,
        restarts=args.restarts,
        seed=args.seed,
        max_qubits=args.max_qubits,
    )
    manifest = Manifest("solve", args.instance, {"method": args.method, **config.to_dict()})
    with manifest.timed("load"):
        instance = _load(args.instance)

    if args.method == "exact":
        try:
            with manifest.timed("solve"):
                records = enumerate_feasible(instance)
        except ProblemSizeError as exc:
            raise CliError(str(exc), EXIT_CAP) from exc
        if args.format == "json":
            text = _dumps({"method": "exact", "solutions": records_to_rows(instance, records)})
        elif args.format == "csv":
            text = records_to_csv(instance, records)
        else:
            text = records_to_table(instance, records)
        manifest.data["outputs"] = {"solutions": len(records),
                                    "best_cost": records[0].cost if records else None}
    else:
        n = build_ilp(instance).num_vars
        try:
            check_cap(n, config.max_qubits)
            with manifest.timed("solve"):
                result = solve_qaoa(instance, config)
        except QubitCapError as exc:
            raise CliError(str(exc), EXIT_CAP) from exc
        doc = result.to_dict()
        if instance.num_load_vars <= MAX_ENUM_LOAD_VARS:
            with manifest.timed("oracle"):
                exact = enumerate_feasible(instance)
            doc["exact_best_cost"] = exact[0].cost if exact else None
        if args.top:
            doc["samples"] = doc["samples"][: args.top]
        if args.format == "json":
            text = _dumps(doc)
        else:
            text = _format_samples(doc["samples"], args.format)
            if args.format == "table":
                text = (
                    f"expectation {result.expectation:.6g} "
                    f"(baseline {result.baseline_expectation:.6g})\n" + text
                )
        best = result.best_feasible
        manifest.data["outputs"] = {
            "num_qubits": n,
            "expectation": result.expectation,
            "best_feasible_cost": best.cost if best else None,
            "exact_best_cost": doc.get("exact_best_cost"),
            "evaluations": len(result.trace),
        }
    _emit(text, args.out)
    manifest.write(args.manifest)
    return EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    manifest = Manifest("enumerate", args.instance, {"format": args.format})
    instance = _load(args.instance)
    try:
        with manifest.timed("enumerate"):
            records = enumerate_feasible(instance)
    except ProblemSizeError as exc:
        raise CliError(str(exc), EXIT_CAP) from exc
    if args.format == "json":
        text = _dumps(records_to_rows(instance, records))
    elif args.format == "csv":
        text = records_to_csv(instance, records)
    else:
        text = records_to_table(instance, records)
    _emit(text, args.out)
    manifest.data["outputs"] = {"solutions": len(records)}
    manifest.write(args.manifest)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    instance = _load(args.instance)
    report = verify_reduction(instance, penalty=args.penalty)
    print(report)
    return EXIT_OK if report.passed else 1


def run_bench(
    hours: Sequence[int], reps: Sequence[int], config: QaoaConfig
) -> list[dict[str, Any]]:
    """Time QAOA on the widened reference family; over-cap cells are marked ``"cap"``."""
    rows = []
    for n_hours in hours:
        instance = widened_fixture(n_hours)
        ilp = build_ilp(instance)
        for p in reps:
            row: dict[str, Any] = {
                "hours": n_hours,
                "reps": p,
                "qubits": ilp.num_vars,
                "variables": f"{ilp.num_load_vars}+{ilp.num_slack_vars}",
            }
            try:
                check_cap(ilp.num_vars, config.max_qubits)
                cell = QaoaConfig(**{**config.to_dict(), "reps": p})
                t0 = time.perf_counter()
                result = solve_qaoa(instance, cell)
                row["seconds"] = round(time.perf_counter() - t0, 3)
                best = result.best_feasible
                row["best_feasible_cost"] = best.cost if best else None
            except QubitCapError:
                row["seconds"] = "cap"
                row["best_feasible_cost"] = None
            log.info("bench %s", row)
            rows.append(row)
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    config = QaoaConfig(
        shots=args.shots,
        max_evals=args.max_evals,
        restarts=args.restarts,
        seed=args.seed,
        max_qubits=args.max_qubits,
    )
    manifest = Manifest("bench", None, {"hours": args.hours, "reps": args.reps, **config.to_dict()})
    with manifest.timed("bench"):
        rows = run_bench(args.hours, args.reps, config)
    if args.format == "json":
        text = _dumps(rows)
    else:
        fields = ["hours", "reps", "qubits", "variables", "seconds", "best_feasible_cost"]
        buf = io.StringIO()
        if args.format == "csv":
            writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        else:
            buf.write("  ".join(f"{f:>18}" for f in fields) + "\n")
            for r in rows:
                buf.write("  ".join(f"{str(r[f]):>18}" for f in fields) + "\n")
        text = buf.getvalue()
    _emit(text, args.out)
    manifest.data["outputs"] = {"rows": len(rows)}
    manifest.write(args.manifest)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("values must be positive integers")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prosumer-qaoa",
        description="Prosumer load scheduling via QUBO/Ising reduction, brute force and QAOA simulation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, formats: Sequence[str] | None = ("table", "json", "csv")) -> None:
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--manifest", help="write the run manifest here (default: stderr)")
        if formats:
            p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("transform", help="emit the ILP, QUBO or Ising model of an instance")
    p.add_argument("instance")
    p.add_argument("--emit", choices=("qubo", "ising", "ilp"), default="ising")
    p.add_argument("--penalty", type=float, help="override the penalty coefficient A")
    p.add_argument("--hamiltonian", action="store_true", help="add a Pauli-Z string to the Ising document")
    common(p, formats=None)
    p.set_defaults(func=cmd_transform)

    def qaoa_opts(p: argparse.ArgumentParser) -> None:
        p.add_argument("--shots", type=int, default=1024)
        p.add_argument("--restarts", type=int, default=10)
        p.add_argument("--max-evals", type=int, default=400, help="objective evaluations per restart")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-qubits", type=int, default=default_max_qubits(),
                       help="statevector qubit cap (default from $PROSUMER_QAOA_MAX_QUBITS or 24)")

    p = sub.add_parser("solve", help="rank schedules with QAOA or the exact oracle")
    p.add_argument("instance")
    p.add_argument("--method", choices=("qaoa", "exact"), default="qaoa")
    p.add_argument("--reps", type=int, default=1)
    qaoa_opts(p)
    p.add_argument("--top", type=int, default=0, help="keep only the first N ranked samples")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("enumerate", help="list all feasible schedules with their cost")
    p.add_argument("instance")
    common(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", help="cross-check the reduction by exhaustive evaluation")
    p.add_argument("instance")
    p.add_argument("--penalty", type=float)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time QAOA on the reference instance widened to more hours")
    p.add_argument("--hours", type=_int_list, default=[3, 4, 5])
    p.add_argument("--reps", type=_int_list, default=[1, 2, 3, 4, 5])
    qaoa_opts(p)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        for name in ("reps", "shots", "restarts", "max_evals", "max_qubits"):
            value = getattr(args, name, 1)
            if isinstance(value, int) and value < 1:
                raise CliError(f"--{name.replace('_', '-')} must be >= 1", EXIT_INVALID)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
