"""Command-line entry point.

Subcommands cover the whole toolchain: instance generation and import,
the exact routing solver, the neighborhood search, the assignment
models, investment planning by column generation, the end-to-end
pipeline, and MPS export for cross-checking against external solvers.

Exit codes: 0 success, 1 input problem, 2 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

from .alns import AlnsConfig, run_alns, setcover_finalize
from .assign import TRAVEL_SCALE, build_assignment, build_assignment_invest
from .backend import export_mps, mangle_names, read_external_solution, solve_mip
from .catalog import InvestmentBudgets, build_catalog
from .colgen import ColgenConfig, run_colgen
from .instances import gen_synthetic, parse_canonical, write_canonical
from .mathlouthi import import_mathlouthi
from .reports import write_duration_curve, write_report, write_solution
from .scenario import PipelineConfig, capex_breakdown, extract_investments, run_pipeline
from .trsp_mip import solve_trsp

log = logging.getLogger(__name__)

SOLVER_ENV = "TECHPLAN_SOLVER_CMD"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(doc, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_alns_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--retries", type=int, default=3, help="search restarts (default: %(default)s)")
    p.add_argument(
        "--seconds-per-retry",
        type=float,
        default=100.0,
        help="wall-clock budget per restart (default: %(default)s)",
    )
    p.add_argument(
        "--iters",
        type=int,
        default=None,
        help="iterations per restart instead of wall clock; makes runs reproducible",
    )
    p.add_argument(
        "--setcover-seconds",
        type=float,
        default=60.0,
        help="budget for the set-cover recombination (default: %(default)s)",
    )
    p.add_argument(
        "--no-finalize",
        action="store_true",
        help="skip the set-cover recombination step",
    )


def _add_colgen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--cg-iters", type=int, default=75, help="column-generation iterations (default: %(default)s)"
    )
    p.add_argument(
        "--subproblem-time",
        type=float,
        default=3.0,
        help="pricing budget per technician in seconds (default: %(default)s)",
    )
    p.add_argument(
        "--master-lp-time", type=float, default=30.0, help="master LP budget (default: %(default)s)"
    )
    p.add_argument(
        "--final-ip-time",
        type=float,
        default=60.0,
        help="final integer solve budget (default: %(default)s)",
    )


def _add_catalog_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--profile",
        choices=["mathlouthi", "tdc", "large"],
        default="mathlouthi",
        help="investment profile; 'large' is the tdc catalog with scaled-up "
        "solver budgets (500 technicians per pricing round, 120s master LP, "
        "1200s final IP) (default: %(default)s)",
    )
    p.add_argument(
        "--n-bundles",
        type=int,
        default=None,
        help="skill bundles via k-means (default: 5 mathlouthi / 10 tdc)",
    )
    p.add_argument(
        "--charge-once",
        action="store_true",
        help="charge each new technician once instead of per working day",
    )
    p.add_argument("--budget-ot", type=int, default=None, help="max overtime purchases")
    p.add_argument("--budget-dig", type=int, default=None, help="max digitized tasks")
    p.add_argument("--budget-skill", type=int, default=None, help="max bundle upgrades")
    p.add_argument("--budget-nt", type=int, default=None, help="max new technicians")


def _catalog_from_args(instance, args):
    budgets = InvestmentBudgets(
        overtime=args.budget_ot,
        digitization=args.budget_dig,
        skill=args.budget_skill,
        hire=args.budget_nt,
    )
    profile = "tdc" if args.profile == "large" else args.profile
    catalog = build_catalog(
        instance,
        profile=profile,
        n_bundles=args.n_bundles,
        bundle_seed=args.seed,
        budgets=budgets,
    )
    if args.charge_once:
        catalog = dataclasses.replace(catalog, charge_per_master_once=True)
    return catalog


def _colgen_config(args) -> ColgenConfig:
    if args.profile == "large":
        cfg = ColgenConfig.large()
        cfg.max_iters = args.cg_iters
        cfg.subproblem_time = args.subproblem_time
        return cfg
    return ColgenConfig(
        max_iters=args.cg_iters,
        subproblem_time=args.subproblem_time,
        master_lp_time=args.master_lp_time,
        final_ip_time=args.final_ip_time,
    )


def _alns_config(args) -> AlnsConfig:
    return AlnsConfig(
        retries=args.retries,
        seconds_per_retry=args.seconds_per_retry,
        iters_per_retry=args.iters,
        setcover_seconds=args.setcover_seconds,
    )


def _decision_doc(decision, catalog) -> dict:
    ot, dig, skill, nt = capex_breakdown(decision, catalog)
    return {
        "overtime": sorted(decision.overtime_daily_techs),
        "new_masters": sorted(decision.new_masters),
        "skill_upgrades": [[m, b] for m, b in sorted(decision.skill_upgrades)],
        "digitized": sorted(decision.digitized_tasks),
        "capex": {"overtime": ot, "digitization": dig, "skill": skill, "new_tech": nt,
                  "total": ot + dig + skill + nt},
    }


def _write_trace(trace, path: Path, timing: str, master_lp_time: float) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "lp_obj", "n_new_cols", "seconds"])
        for iteration, lp_obj, n_new, seconds in trace:
            if timing == "budget":
                seconds = master_lp_time
            writer.writerow([iteration, f"{lp_obj:.6f}", n_new, f"{seconds:.3f}"])


def cmd_gen(args) -> int:
    out = _out_dir(args)
    for i in range(args.count):
        instance = gen_synthetic(
            seed=args.seed + i,
            n_tasks=args.n_tasks,
            n_masters=args.n_masters,
            n_days=args.n_days,
            n_skills=args.n_skills,
            geometry=args.geometry,
            window_style=args.window_style,
            travel_cap=args.travel_cap,
        )
        path = out / f"{instance.name}.json"
        write_canonical(instance, str(path))
        print(path)
    return 0


def cmd_import_mathlouthi(args) -> int:
    instance = import_mathlouthi(args.src, name=args.name)
    out = _out_dir(args)
    path = out / f"{instance.name}.json"
    write_canonical(instance, str(path))
    print(path)
    return 0


def cmd_solve_mip(args) -> int:
    instance = parse_canonical(args.instance)
    solution, mip = solve_trsp(instance, time_limit=args.time_limit)
    out = _out_dir(args)
    path = out / f"{Path(args.instance).stem}.solution.json"
    write_solution(solution, str(path))
    print(f"{mip.status} objective={solution.objective} nodes={mip.nodes} -> {path}")
    return 0


def cmd_solve_alns(args) -> int:
    instance = parse_canonical(args.instance)
    cfg = _alns_config(args)
    solution, stats, pool = run_alns(instance, cfg, seed=args.seed)
    if not args.no_finalize:
        solution = setcover_finalize(instance, pool, solution, time_limit=cfg.setcover_seconds)
    out = _out_dir(args)
    path = out / f"{Path(args.instance).stem}.solution.json"
    write_solution(solution, str(path))
    print(
        f"objective={solution.objective} unserved={len(solution.unserved)} "
        f"iterations={stats.iterations} -> {path}"
    )
    return 0


def cmd_solve_assign(args) -> int:
    instance = parse_canonical(args.instance)
    model, index = build_assignment(instance, travel_scale=args.scale)
    mip = solve_mip(model, time_limit=args.time_limit, integral_objective=True)
    if mip.x is None:
        raise RuntimeError(f"assignment solve ended {mip.status} without a solution")
    chosen: dict[str, list[str]] = {}
    for (tech_id, task_id), v in sorted(index["assign"].items()):
        if mip.x[v] > 0.5:
            chosen.setdefault(tech_id, []).append(task_id)
    unserved = sorted(t for t, v in index["y"].items() if mip.x[v] > 1e-6)
    out = _out_dir(args)
    path = out / f"{Path(args.instance).stem}.assign.json"
    _write_json(
        {"objective": mip.objective, "assignment": chosen, "unserved": unserved,
         "status": mip.status},
        path,
    )
    print(f"{mip.status} objective={mip.objective} -> {path}")
    return 0


def cmd_invest(args) -> int:
    instance = parse_canonical(args.instance)
    catalog = _catalog_from_args(instance, args)
    result = run_colgen(instance, catalog, _colgen_config(args))
    decision = extract_investments(result)
    out = _out_dir(args)
    stem = Path(args.instance).stem
    doc = _decision_doc(decision, catalog)
    doc["objective"] = result.mip.objective
    doc["cg_optimal"] = result.cg_optimal
    doc["iterations"] = len(result.trace)
    _write_json(doc, out / f"{stem}.decision.json")
    _write_trace(
        result.trace, out / f"{stem}.trace.csv", args.timing, args.master_lp_time
    )
    print(
        f"columns={len(result.columns)} iterations={len(result.trace)} "
        f"capex={doc['capex']['total']} -> {out / (stem + '.decision.json')}"
    )
    return 0


def _pipeline_one(task):
    path, seed, alns_cfg, cg_cfg, timing, catalog_args = task
    instance = parse_canonical(path)
    catalog = _catalog_from_args(instance, catalog_args)
    config = PipelineConfig(seed=seed, alns=alns_cfg, colgen=cg_cfg, timing=timing)
    return run_pipeline(instance, catalog, config)


def cmd_pipeline(args) -> int:
    out = _out_dir(args)
    tasks = [
        (path, args.seed + i, _alns_config(args), _colgen_config(args), args.timing, args)
        for i, path in enumerate(args.instances)
    ]
    if args.jobs > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_pipeline_one, tasks))
    else:
        reports = [_pipeline_one(t) for t in tasks]

    rows = [r.row for r in reports]
    write_report(rows, str(out / "report.csv"))
    for column in ("business_case", "obj_noinv", "obj_inv"):
        write_duration_curve(rows, column, str(out / f"curve_{column}.csv"))
    for report in reports:
        stem = report.row.instance_id
        _write_json(
            {
                "overtime": sorted(report.decision.overtime_daily_techs),
                "new_masters": sorted(report.decision.new_masters),
                "skill_upgrades": [[m, b] for m, b in sorted(report.decision.skill_upgrades)],
                "digitized": sorted(report.decision.digitized_tasks),
                "seeds": report.seeds,
            },
            out / f"{stem}.decision.json",
        )
    positive = sum(1 for r in rows if r.business_case > 0)
    print(f"{len(rows)} instance(s), business case positive on {positive} -> {out / 'report.csv'}")
    return 0


def cmd_export_mps(args) -> int:
    instance = parse_canonical(args.instance)
    if args.model == "trsp":
        from .trsp_mip import build_trsp

        model, _ = build_trsp(instance)
    elif args.model == "assign":
        model, _ = build_assignment(instance)
    else:
        catalog = _catalog_from_args(instance, args)
        model, _ = build_assignment_invest(instance, catalog)
    out = _out_dir(args)
    stem = Path(args.instance).stem
    mps_path = out / f"{stem}.{args.model}.mps"
    export_mps(model, str(mps_path))
    var_map, row_map = mangle_names(model)
    _write_json({"variables": var_map, "rows": row_map}, out / f"{stem}.{args.model}.names.json")
    print(mps_path)
    if args.check:
        template = os.environ.get(SOLVER_ENV)
        if not template:
            raise ValueError(f"--check needs the {SOLVER_ENV} environment variable")
        sol_path = out / f"{stem}.{args.model}.extsol"
        cmd = template.format(mps=mps_path, sol=sol_path)
        subprocess.run(cmd, shell=True, check=True)
        external = read_external_solution(model, str(sol_path))
        ours = solve_mip(model, time_limit=args.time_limit)
        print(f"external={external.objective} ours={ours.objective}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="techplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="generate synthetic instances")
    _add_common(p)
    p.add_argument("--count", type=int, default=1, help="instances to generate (default: %(default)s)")
    p.add_argument("--n-tasks", type=int, default=12, help="tasks (default: %(default)s)")
    p.add_argument("--n-masters", type=int, default=3, help="master technicians (default: %(default)s)")
    p.add_argument("--n-days", type=int, default=1, help="horizon days (default: %(default)s)")
    p.add_argument("--n-skills", type=int, default=4, help="skill universe size (default: %(default)s)")
    p.add_argument(
        "--geometry", choices=["uniform", "clustered"], default="uniform",
        help="task layout (default: %(default)s)",
    )
    p.add_argument(
        "--window-style", choices=["narrow", "wide"], default="narrow",
        help="time-window tightness (default: %(default)s)",
    )
    p.add_argument(
        "--travel-cap", type=int, default=100,
        help="max depot-to-task travel for eligibility (default: %(default)s)",
    )
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser(
        "import-mathlouthi", help="convert a Mathlouthi-layout file"
    )
    _add_common(p)
    p.add_argument("src", help="source file")
    p.add_argument("--name", default=None, help="instance name (default: from file)")
    p.set_defaults(func=cmd_import_mathlouthi)

    p = sub.add_parser("solve-mip", help="exact routing solve")
    _add_common(p)
    p.add_argument("instance", help="canonical instance file")
    p.add_argument(
        "--time-limit", type=float, default=30.0, help="seconds (default: %(default)s)"
    )
    p.set_defaults(func=cmd_solve_mip)

    p = sub.add_parser("solve-alns", help="neighborhood-search solve")
    _add_common(p)
    p.add_argument("instance", help="canonical instance file")
    _add_alns_flags(p)
    p.set_defaults(func=cmd_solve_alns)

    p = sub.add_parser("solve-assign", help="assignment-model solve")
    _add_common(p)
    p.add_argument("instance", help="canonical instance file")
    p.add_argument(
        "--scale", type=int, default=TRAVEL_SCALE,
        help="travel estimate multiplier k (default: %(default)s)",
    )
    p.add_argument(
        "--time-limit", type=float, default=60.0, help="seconds (default: %(default)s)"
    )
    p.set_defaults(func=cmd_solve_assign)

    p = sub.add_parser("invest", help="plan investments by column generation")
    _add_common(p)
    p.add_argument("instance", help="canonical instance file")
    _add_catalog_flags(p)
    _add_colgen_flags(p)
    p.add_argument(
        "--timing", choices=["budget", "measured"], default="budget",
        help="trace seconds column: configured budgets (reproducible) or wall clock",
    )
    p.set_defaults(func=cmd_invest)

    p = sub.add_parser("pipeline", help="full investment study")
    _add_common(p)
    p.add_argument("instances", nargs="+", help="canonical instance files")
    _add_catalog_flags(p)
    _add_alns_flags(p)
    _add_colgen_flags(p)
    p.add_argument(
        "--timing", choices=["budget", "measured"], default="budget",
        help="report seconds columns: configured budgets (reproducible) or wall clock",
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default: %(default)s)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("export-mps", help="write a model as fixed MPS")
    _add_common(p)
    p.add_argument("instance", help="canonical instance file")
    p.add_argument(
        "--model", choices=["trsp", "assign", "assign-invest"], default="trsp",
        help="which formulation (default: %(default)s)",
    )
    _add_catalog_flags(p)
    p.add_argument(
        "--check", action="store_true",
        help=f"solve via the {SOLVER_ENV} command template and compare",
    )
    p.add_argument(
        "--time-limit", type=float, default=60.0,
        help="budget for the comparison solve (default: %(default)s)",
    )
    p.set_defaults(func=cmd_export_mps)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the contract wants a clean exit code
        logging.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
