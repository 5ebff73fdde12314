"""Command-line entry point: generate scenarios, solve one, validate a schedule, run sweeps.

Exit codes: 0 success, 2 infeasible scenario, 3 invalid arguments or input
files, 4 I/O failure.  The default output directory comes from the
``EOSCHED_OUT`` environment variable, falling back to ``./eosched_out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .confgraph import build_conflict_graph, dump_graph
from .edo import GaParams, RunResult, run_baseline_ga, run_baseline_random, run_edo
from .evaluation import (ScheduleError, format_report, load_schedule, objective, save_schedule,
                         validate_schedule)
from .power import InfeasibleError
from .scenario import (AUTO, GeneratorConfig, Scenario, ScenarioError, generate_synthetic, load_scenario,
                       save_scenario)

log = logging.getLogger("eosched")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_IO = 0, 2, 3, 4
SOLVERS = ("edo", "ga", "random")
RESULT_COLUMNS = ("solver", "lambda", "task_count", "seed", "objective_max_form", "weight_total",
                  "energy_total", "generations", "wall_time")
DEFAULT_SWEEPS = {"lambda": "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "tasks": "10,20,30,40", "none": ""}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_out_dir() -> Path:
    return Path(os.environ.get("EOSCHED_OUT", "eosched_out"))


# ---------------------------------------------------------------------------
# argument helpers

def _norm_arg(text: str):
    if text == AUTO:
        return AUTO
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("normalizer must be positive")
    return v


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}")


def _add_ga_flags(p: argparse.ArgumentParser):
    d = GaParams()
    g = p.add_argument_group("genetic search")
    g.add_argument("--population", type=int, default=d.population_size, help="population size (default %(default)s)")
    g.add_argument("--generations", type=int, default=d.generations, help="generations (default %(default)s)")
    g.add_argument("--crossover", type=float, default=d.crossover_prob, help="crossover probability")
    g.add_argument("--mutation", type=float, default=d.mutation_prob, help="per-chromosome mutation probability")
    g.add_argument("--tournament", type=int, default=d.tournament_size)
    g.add_argument("--elite", type=int, default=d.elite_count)
    g.add_argument("--levels", type=int, default=d.level_count, help="number of discrete power levels")
    g.add_argument("--samples", type=int, default=1, help="draws for the random baseline (default 1)")


def _add_objective_flags(p: argparse.ArgumentParser):
    p.add_argument("--lambda", dest="lam", type=float, help="energy/weight trade-off in [0, 1)")
    p.add_argument("--weight-norm", type=_norm_arg, help="weight normalizer: 'auto' or a number")
    p.add_argument("--energy-norm", type=_norm_arg, help="energy normalizer (J): 'auto' or a number")


def _add_generator_flags(p: argparse.ArgumentParser):
    d = GeneratorConfig()
    g = p.add_argument_group("synthetic scenario")
    g.add_argument("--config", type=Path, help="generator config (JSON); flags below override it")
    g.add_argument("--eoses", type=int, help=f"satellites (default {d.eoses})")
    g.add_argument("--antennas", type=int, help=f"ground antennas (default {d.antennas})")
    g.add_argument("--tasks", type=int, help=f"tasks (default {d.tasks})")
    g.add_argument("--num-slots", type=int, help=f"slots in the horizon (default {d.num_slots})")
    g.add_argument("--slot-duration", type=float, help=f"seconds per slot (default {d.slot_duration})")


def _ga_params(a, seed: int) -> GaParams:
    try:
        return GaParams(population_size=a.population, generations=a.generations, crossover_prob=a.crossover,
                        mutation_prob=a.mutation, tournament_size=a.tournament, elite_count=a.elite,
                        seed=seed, level_count=a.levels)
    except ValueError as exc:
        raise UsageError(str(exc))


def _generator_config(a) -> GeneratorConfig:
    base = {}
    if a.config is not None:
        base = json.loads(Path(a.config).read_text())
        if not isinstance(base, dict):
            raise ScenarioError(f"{a.config}: generator config must be a JSON object")
    for flag, key in (("eoses", "eoses"), ("antennas", "antennas"), ("tasks", "tasks"),
                      ("num_slots", "num_slots"), ("slot_duration", "slot_duration")):
        v = getattr(a, flag, None)
        if v is not None:
            base[key] = v
    for flag, key in (("lam", "lam"), ("weight_norm", "weight_norm"), ("energy_norm", "energy_norm")):
        v = getattr(a, flag, None)
        if v is not None:
            base.pop("lambda" if key == "lam" else key, None)
            base[key] = v
    return GeneratorConfig.from_dict(base)


def _apply_objective_overrides(sc: Scenario, a) -> Scenario:
    changes = {}
    if getattr(a, "lam", None) is not None:
        changes["lam"] = a.lam
    if a.weight_norm is not None:
        changes["weight_norm"] = a.weight_norm
    if a.energy_norm is not None:
        changes["energy_norm"] = a.energy_norm
    return sc.with_globals(**changes).validate() if changes else sc


def run_solver(solver: str, scenario: Scenario, params: GaParams, samples: int = 1) -> RunResult:
    if solver == "edo":
        return run_edo(scenario, params)
    if solver == "ga":
        return run_baseline_ga(scenario, params)
    if solver == "random":
        return run_baseline_random(scenario, seed=params.seed, samples=samples, level_count=params.level_count)
    raise UsageError(f"unknown solver {solver!r}")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# gen / solve / validate

def cmd_gen(a) -> int:
    cfg = _generator_config(a)
    sc = generate_synthetic(cfg, a.seed)
    a.output.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, a.output)
    print(f"wrote {a.output}: {len(sc.eoses)} eos, {len(sc.antennas)} antennas, "
          f"{len(sc.ttws)} ttws, {len(sc.tasks)} tasks")
    return EXIT_OK


def cmd_solve(a) -> int:
    sc = _apply_objective_overrides(load_scenario(a.scenario), a)
    params = _ga_params(a, a.seed)
    res = run_solver(a.solver, sc, params, a.samples)
    out = Path(a.out) if a.out else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)

    violations = validate_schedule(res.schedule, sc)
    ob = objective(res.schedule, sc)
    save_schedule(res.schedule, out / "schedule.json")
    ob_dict = asdict(ob)
    ob_dict["lambda"] = ob_dict.pop("lam")
    _write(out / "objective.json", json.dumps(ob_dict, indent=2) + "\n")
    _write(out / "violations.txt", format_report(violations))
    manifest = res.manifest()
    if not a.no_timing:
        manifest["wall_time"] = res.wall_time
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    _write(out / "convergence.csv", res.trace_csv())
    if a.dump_graph:
        g = build_conflict_graph(sc, res.schedule.powers, skip_infeasible=True)
        dump_graph(g, out / "graph.txt")

    print(f"solver={res.solver} tasks_scheduled={len(res.schedule.assignments)}/{len(sc.tasks)} "
          f"objective={ob.max_form_value!r} weight={ob.weight_total!r} energy={ob.energy_total!r}")
    if res.unservable:
        print(f"unservable tasks dropped: {', '.join(sorted(map(str, res.unservable)))}")
    print(f"outputs in {out}")
    if violations:
        log.error("schedule failed validation:\n%s", format_report(violations))
        return 1
    return EXIT_OK


def cmd_validate(a) -> int:
    sc = load_scenario(a.scenario)
    sched = load_schedule(a.schedule)
    violations = validate_schedule(sched, sc)
    sys.stdout.write(format_report(violations))
    return 1 if violations else EXIT_OK


# ---------------------------------------------------------------------------
# sweep

@dataclass(frozen=True)
class Cell:
    solver: str
    value: float  # lambda or task count; 0 when not sweeping
    seed: int
    scenario: Scenario
    params: GaParams
    samples: int

    @property
    def run_name(self) -> str:
        return f"{self.solver}_v{self.value:g}_seed{self.seed}"


@dataclass
class CellResult:
    row: Dict[str, object]
    schedule_json: str
    trace_csv: str


def run_cell(cell: Cell) -> CellResult:
    res = run_solver(cell.solver, cell.scenario, cell.params, cell.samples)
    violations = validate_schedule(res.schedule, cell.scenario)
    if violations:
        raise RuntimeError(f"{cell.run_name}: schedule violates constraints:\n{format_report(violations)}")
    s = res.schedule
    row = {
        "solver": cell.solver,
        "lambda": s.lam,
        "task_count": len(cell.scenario.tasks),
        "seed": cell.seed,
        "objective_max_form": s.objective_max_form,
        "weight_total": s.weight_total,
        "energy_total": s.energy_total,
        "generations": 0 if cell.solver == "random" else cell.params.generations,
        "wall_time": res.wall_time,
    }
    return CellResult(row, s.to_json(), res.trace_csv())


def _csv_text(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def summarize(rows: Sequence[dict], sweep: str) -> List[dict]:
    """Median objective, weight and energy per (solver, sweep value)."""
    key = {"lambda": "lambda", "tasks": "task_count", "none": None}[sweep]
    groups: Dict[Tuple, List[dict]] = {}
    for r in rows:
        groups.setdefault((r["solver"], r[key] if key else 0), []).append(r)
    out = []
    for (solver, v), rs in sorted(groups.items()):
        out.append({
            "solver": solver, "value": v, "runs": len(rs),
            "median_objective": statistics.median(r["objective_max_form"] for r in rs),
            "median_weight": statistics.median(r["weight_total"] for r in rs),
            "median_energy": statistics.median(r["energy_total"] for r in rs),
        })
    return out


def build_cells(a) -> List[Cell]:
    solvers = [s.strip() for s in a.solvers.split(",") if s.strip()]
    bad = [s for s in solvers if s not in SOLVERS]
    if not solvers or bad:
        raise UsageError(f"--solvers must be a non-empty subset of {','.join(SOLVERS)}")
    if a.sweep == "lambda" and a.lam is not None:
        raise UsageError("--lambda conflicts with --sweep lambda")
    if a.runs < 1:
        raise UsageError("--runs must be >= 1")
    seeds = list(range(a.seed, a.seed + a.runs))
    values = _float_list(a.values if a.values is not None else DEFAULT_SWEEPS[a.sweep])
    if a.sweep == "none":
        values = [0.0]
    elif not values:
        raise UsageError("--values is empty")
    if a.sweep == "tasks" and any(v != int(v) or v < 0 for v in values):
        raise UsageError("task counts must be non-negative integers")

    file_sc = _apply_objective_overrides(load_scenario(a.scenario), a) if a.scenario else None
    cfg = None if file_sc else _generator_config(a)
    cache: Dict[Tuple[int, int], Scenario] = {}

    def scenario_for(seed: int, value: float) -> Scenario:
        if file_sc is not None:
            sc = file_sc
            if a.sweep == "tasks":
                if int(value) > len(sc.tasks):
                    raise UsageError(f"task count {int(value)} exceeds the scenario's {len(sc.tasks)} tasks")
                sc = replace(sc, tasks=sc.tasks[:int(value)])
        else:
            n = int(value) if a.sweep == "tasks" else cfg.tasks
            sseed = seed if a.scenario_seed is None else a.scenario_seed
            if (sseed, n) not in cache:
                cache[(sseed, n)] = generate_synthetic(replace(cfg, tasks=n), sseed)
            sc = cache[(sseed, n)]
        if a.sweep == "lambda":
            if not 0.0 <= value < 1.0:
                raise UsageError(f"lambda must lie in [0, 1), got {value}")
            sc = sc.with_lambda(value)
        return sc

    cells = [Cell(s, v, seed, scenario_for(seed, v), _ga_params(a, seed), a.samples)
             for s in solvers for v in values for seed in seeds]
    return sorted(cells, key=lambda c: (c.solver, c.value, c.seed))


def cmd_sweep(a) -> int:
    cells = build_cells(a)
    out = Path(a.out) if a.out else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d cells with %d job(s)", len(cells), a.jobs)
    if a.jobs > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = []
        for c in cells:
            log.info("cell %s", c.run_name)
            results.append(run_cell(c))

    rows = []
    for c, r in zip(cells, results):
        if a.no_timing:
            r.row["wall_time"] = ""
        rows.append(r.row)
        _write(out / "runs" / c.run_name / "schedule.json", r.schedule_json)
        if c.solver != "random":
            _write(out / "runs" / c.run_name / "convergence.csv", r.trace_csv)
    _write(out / "results.csv", _csv_text(rows, RESULT_COLUMNS))
    summary = summarize(rows, a.sweep)
    _write(out / "summary.csv", _csv_text(summary, ("solver", "value", "runs", "median_objective",
                                                     "median_weight", "median_energy")))
    manifest = {
        "version": __version__,
        "sweep": a.sweep,
        "values": sorted({c.value for c in cells}),
        "solvers": sorted({c.solver for c in cells}),
        "seeds": sorted({c.seed for c in cells}),
        "params": {k: v for k, v in asdict(cells[0].params).items() if k != "seed"},
        "samples": a.samples,
        "scenario_hashes": {c.run_name: c.scenario.content_hash() for c in cells},
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    for s in summary:
        print(f"{s['solver']:>6} value={s['value']!r:<6} median objective={s['median_objective']:.6f} "
              f"weight={s['median_weight']:.3f} energy={s['median_energy']:.4g}")
    print(f"{len(rows)} rows written to {out / 'results.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eosched", description="Joint power allocation and downlink scheduling for "
                                            "Earth-observation satellites.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded synthetic scenario")
    _add_generator_flags(g)
    _add_objective_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", type=Path, required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one scenario with one solver")
    s.add_argument("scenario", type=Path)
    s.add_argument("--solver", choices=SOLVERS, default="edo")
    s.add_argument("--seed", type=int, default=0)
    _add_ga_flags(s)
    _add_objective_flags(s)
    s.add_argument("--out", type=Path, help="output directory (default $EOSCHED_OUT or ./eosched_out)")
    s.add_argument("--no-timing", action="store_true", help="omit wall time so outputs are byte-reproducible")
    s.add_argument("--dump-graph", action="store_true", help="also write the conflict graph at the final powers")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="check a schedule file against a scenario")
    v.add_argument("scenario", type=Path)
    v.add_argument("schedule", type=Path)
    v.set_defaults(func=cmd_validate)

    w = sub.add_parser("sweep", help="run solvers over lambda values or task counts and several seeds")
    w.add_argument("--sweep", choices=tuple(DEFAULT_SWEEPS), default="lambda")
    w.add_argument("--values", help="comma-separated sweep values (defaults depend on --sweep)")
    w.add_argument("--solvers", default="edo", help="comma-separated subset of edo,ga,random")
    w.add_argument("--seed", type=int, default=0, help="first run seed")
    w.add_argument("--runs", type=int, default=5, help="number of consecutive seeds (default 5)")
    w.add_argument("--scenario", type=Path, help="scenario file; otherwise one is generated per seed")
    w.add_argument("--scenario-seed", type=int, help="use one generated scenario for every run seed")
    _add_generator_flags(w)
    _add_ga_flags(w)
    _add_objective_flags(w)
    w.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    w.add_argument("--out", type=Path, help="output directory (default $EOSCHED_OUT or ./eosched_out)")
    w.add_argument("--no-timing", action="store_true", help="leave wall_time blank so CSVs are byte-reproducible")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(a.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(a, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return a.func(a)
    except InfeasibleError as exc:
        print(f"eosched: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, ScenarioError, ScheduleError, json.JSONDecodeError) as exc:
        print(f"eosched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"eosched: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
