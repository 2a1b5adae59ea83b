"""Command-line interface: ``adhoccloud {run,baseline,sweep,validate,trace-check}``.

Exit codes: 0 ok, 1 usage, 2 validation, 3 infeasible scenario, 4 invariant breach.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from .engine import SimulationError
from .model import Scenario, ValidationError
from .scenario_io import ScenarioSyntaxError, loads_scenario, parse_scenario, with_input_size, with_seed
from .sim import baseline_makespan, simulate
from .tracecheck import TraceFormatError, check_trace_text

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3, 4
OUT_ENV = "ADHOCCLOUD_OUT"
DEFAULT_SCENARIO = "table2_threenode"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def shipped_scenarios() -> list[str]:
    root = resources.files("adhoccloud") / "data" / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_scenario(ref: str, strict: bool = True) -> Scenario:
    """``ref`` is a file path or the name of a shipped scenario."""
    path = Path(ref)
    if not path.exists() and ref in shipped_scenarios():
        text = (resources.files("adhoccloud") / "data" / "scenarios" / f"{ref}.toml").read_text()
        return loads_scenario(text, strict)
    if not path.is_file():
        raise UsageError(f"no such scenario file: {ref}")
    return parse_scenario(path, strict)


def write_atomic(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "out")


def _prepare(args) -> Scenario:
    s = load_scenario(args.scenario, strict=not args.lenient)
    if args.seed is not None:
        s = with_seed(s, args.seed)
    if getattr(args, "input_mb", None) is not None:
        try:
            s = with_input_size(s, args.input_mb)
        except ValueError as e:
            raise UsageError(str(e)) from None
    return s


def cmd_run(args) -> int:
    s = _prepare(args)
    run = simulate(s, trace=not args.no_trace)
    out = _out_dir(args)
    write_atomic(out / "report.json", _json(run.report.to_dict()))
    status = EXIT_OK
    if not args.no_trace:
        text = run.trace.dump()
        write_atomic(out / "trace.txt", text)
        errs = check_trace_text(text)
        if errs:
            print("\n".join(errs), file=sys.stderr)
            status = EXIT_INVARIANT
    r = run.report
    print(f"makespan {r.makespan:.6f} s  baseline {r.baseline_makespan:.6f} s  "
          f"improvement {100 * r.improvement:.6f} %")
    if status == EXIT_OK and not r.feasible:
        bad = {t.task: t.reason for t in r.per_task if t.status != "done"}
        print(f"infeasible: {bad}", file=sys.stderr)
        status = EXIT_INFEASIBLE
    return status


def cmd_baseline(args) -> int:
    s = _prepare(args)
    b = baseline_makespan(s)
    write_atomic(_out_dir(args) / "baseline.json", _json({"baseline_makespan": b, "source_node": s.source_node}))
    print(f"baseline {b:.6f} s on {s.source_node}")
    return EXIT_OK


def parse_sizes(text: str) -> list[float]:
    try:
        sizes = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"sizes must be comma-separated numbers, got {text!r}") from None
    if not sizes or any(x <= 0 for x in sizes):
        raise UsageError("sizes must be positive")
    return sizes


SWEEP_HEADER = f"{'input_mb':>10} {'makespan_s':>12} {'baseline_s':>12} {'improvement_pct':>16} feasible"


def sweep_rows(s: Scenario, sizes: list[float], jobs: int = 1) -> list[dict]:
    def one(mb):
        r = simulate(with_input_size(s, mb), trace=False).report
        return {"input_mb": mb, "makespan": r.makespan, "baseline_makespan": r.baseline_makespan,
                "improvement": r.improvement, "feasible": r.feasible}

    # engines share nothing, so sizes can run on separate threads; output order follows ``sizes``
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(one, sizes))


def format_sweep(rows: list[dict]) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(f"{r['input_mb']:>10.6f} {r['makespan']:>12.6f} {r['baseline_makespan']:>12.6f} "
                     f"{100 * r['improvement']:>16.6f} {'yes' if r['feasible'] else 'no'}")
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    s = _prepare(args)
    if s.workload_source is None:
        raise UsageError("sweep needs a profile-based workload")
    rows = sweep_rows(s, parse_sizes(args.sizes), args.jobs)
    table = format_sweep(rows)
    out = _out_dir(args)
    write_atomic(out / "sweep.txt", table)
    write_atomic(out / "sweep.json", _json(rows))
    print(table, end="")
    return EXIT_OK if all(r["feasible"] for r in rows) else EXIT_INFEASIBLE


def cmd_validate(args) -> int:
    s = load_scenario(args.scenario, strict=not args.lenient)
    print(f"ok: {len(s.nodes)} nodes, {len(s.workload.tasks)} tasks, source {s.source_node}")
    return EXIT_OK


def cmd_trace_check(args) -> int:
    path = Path(args.trace)
    if not path.is_file():
        raise UsageError(f"no such trace file: {path}")
    try:
        errs = check_trace_text(path.read_text(encoding="utf-8"))
    except TraceFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    if errs:
        print("\n".join(errs), file=sys.stderr)
        return EXIT_INVARIANT
    print("trace ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adhoccloud", description="Mobile ad hoc cloud simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp, sizes=False):
        sp.add_argument("--scenario", default=DEFAULT_SCENARIO,
                        help=f"scenario file or shipped name (default {DEFAULT_SCENARIO})")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--lenient", action="store_true", help="warn on unknown keys instead of failing")
        if not sizes:
            sp.add_argument("--input-mb", type=float, help="rebuild the profile workload at this input size")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")

    run = sub.add_parser("run", help="simulate a scenario; write report.json and trace.txt")
    scenario_args(run)
    run.add_argument("--no-trace", action="store_true", help="skip trace collection")
    run.set_defaults(fn=cmd_run)

    base = sub.add_parser("baseline", help="single-node makespan on the source node")
    scenario_args(base)
    base.set_defaults(fn=cmd_baseline)

    sw = sub.add_parser("sweep", help="compare cluster and baseline over input sizes")
    sw.add_argument("sizes", help="comma-separated input sizes in MB, e.g. 30,50")
    scenario_args(sw, sizes=True)
    sw.add_argument("--jobs", type=int, default=1, help="worker threads")
    sw.set_defaults(fn=cmd_sweep)

    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("scenario")
    val.add_argument("--lenient", action="store_true")
    val.set_defaults(fn=cmd_validate)

    tc = sub.add_parser("trace-check", help="re-verify causality and loop freedom in a trace")
    tc.add_argument("trace")
    tc.set_defaults(fn=cmd_trace_check)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioSyntaxError as e:
        print(f"syntax error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SimulationError, AssertionError) as e:
        print(f"invariant breach: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
