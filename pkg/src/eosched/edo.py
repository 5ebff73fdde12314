"""Two-layer joint power/scheduling search: a genetic algorithm over (power level, candidate set),
with greedy MWIS repair as the fitness function.  Also hosts the GA and Random baselines.

Genome layout is task-major.  For each servable task, in scenario order, the
block holds ``ceil(log2(level_count))`` power bits (big-endian level index,
wrapped modulo level_count) followed by one inclusion bit per feasible
(window, start slot) pair of that task.  Feasibility is enumerated at the
task's minimum feasible power, where transmissions are longest.
Single-point crossover therefore swaps whole task blocks around the cut.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from ._greedy import gwmin_arrays
from .channel import link_params, meets_rate, proc_slots, processing_time
from .confgraph import Vertex, vertex_weight
from .evaluation import Assignment, Schedule, make_schedule, normalizers
from .power import InfeasibleError, power_levels, task_min_power
from .scenario import Ident, Scenario, feasible_slots

log = logging.getLogger(__name__)

REDUCED = "reduced"  # levels span [task minimum power, max power)
FULL = "full"  # levels span [0, Pmax)


@dataclass
class GaParams:
    population_size: int = 60
    generations: int = 200
    crossover_prob: float = 0.5
    mutation_prob: float = 0.8
    tournament_size: int = 2
    elite_count: int = 2
    seed: int = 0
    level_count: int = 8

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        if not 0 <= self.elite_count <= self.population_size:
            raise ValueError("elite_count must lie in [0, population_size]")
        if self.level_count < 1:
            raise ValueError("level_count must be >= 1")


@dataclass
class Chromosome:
    genes: np.ndarray  # uint8 0/1
    fitness: Optional[float] = None
    selected: Optional[np.ndarray] = None  # triple indices kept by the repair
    levels: Optional[np.ndarray] = None  # decoded power level per task


class OffloadContext:
    """Everything the genetic layer needs about one scenario, precomputed into arrays."""

    def __init__(self, scenario: Scenario, level_count: int = 8, grid: str = REDUCED,
                 lam: Optional[float] = None):
        self.scenario = scenario
        self.lam = scenario.globals.lam if lam is None else lam
        self.level_count = level_count
        self.grid = grid
        self.norms = normalizers(scenario)
        w_max, e_max = self.norms
        slot = scenario.grid.slot_duration

        ant_idx = {h: i for i, h in enumerate(scenario.antennas)}
        eos_idx = {e.id: i for i, e in enumerate(scenario.eoses)}
        ttw_idx = {k.id: i for i, k in enumerate(scenario.ttws)}

        self.tasks = []
        self.unservable: Dict[Ident, str] = {}
        self.p_star = []
        levels = []
        tri_task, tri_ttw, tri_start = [], [], []
        feas, ps, wgt = [], [], []
        for t in scenario.tasks:
            p_min, usable, bad = task_min_power(t, scenario)
            for kid, exc in bad.items():
                log.warning("task %r cannot use ttw %r: %s", t.id, kid, exc)
            if not usable:
                self.unservable[t.id] = "no window meets the rate requirement" if bad else "no contact window"
                continue
            ti = len(self.tasks)
            self.tasks.append(t)
            self.p_star.append(p_min)
            pmax = scenario.eos(t.eos).max_power
            lv = power_levels(p_min if grid == REDUCED else 0.0, pmax, level_count)
            levels.append(lv)
            for k in usable:
                lp = link_params(t, k, scenario)
                n_min = proc_slots(processing_time(t, p_min, lp), slot)
                starts = feasible_slots(t, k, n_min)
                if not starts:
                    continue
                row_f, row_n, row_w = [], [], []
                for p in lv:
                    if meets_rate(p, lp):
                        secs = processing_time(t, p, lp)
                        row_f.append(True)
                        row_n.append(proc_slots(secs, slot))
                        row_w.append(vertex_weight(t.weight, p, secs, self.lam, w_max, e_max))
                    else:
                        row_f.append(False)
                        row_n.append(0)
                        row_w.append(0.0)
                for s in starts:
                    tri_task.append(ti)
                    tri_ttw.append(ttw_idx[k.id])
                    tri_start.append(s)
                    feas.append([f and s + n - 1 <= k.end_slot for f, n in zip(row_f, row_n)])
                    ps.append(row_n)
                    wgt.append(row_w)
        if self.unservable:
            log.warning("dropping %d unservable task(s): %s", len(self.unservable), sorted(map(str, self.unservable)))

        n_lv = level_count
        self.levels = np.array(levels, dtype=float).reshape(len(self.tasks), n_lv)
        self.tri_task = np.array(tri_task, dtype=np.int64)
        self.tri_ttw = np.array(tri_ttw, dtype=np.int64)
        self.tri_start = np.array(tri_start, dtype=np.int64)
        ttw_ant = np.array([ant_idx[k.antenna] for k in scenario.ttws], dtype=np.int64)
        ttw_eos = np.array([eos_idx[k.eos] for k in scenario.ttws], dtype=np.int64)
        self.tri_ant = ttw_ant[self.tri_ttw] if len(tri_ttw) else np.zeros(0, np.int64)
        self.tri_eos = ttw_eos[self.tri_ttw] if len(tri_ttw) else np.zeros(0, np.int64)
        self.feas = np.array(feas, dtype=bool).reshape(-1, n_lv)
        self.ps = np.array(ps, dtype=np.int64).reshape(-1, n_lv)
        self.wgt = np.array(wgt, dtype=float).reshape(-1, n_lv)

        # genome layout
        self.power_bits = (n_lv - 1).bit_length()
        per_task = np.bincount(self.tri_task, minlength=len(self.tasks)) if len(self.tasks) else np.zeros(0, int)
        block = self.power_bits + per_task
        offsets = np.concatenate([[0], np.cumsum(block)]).astype(np.int64)
        self.genome_length = int(offsets[-1])
        self.power_pos = (offsets[:-1, None] + np.arange(self.power_bits)[None, :]).astype(np.int64)
        first_tri = np.concatenate([[0], np.cumsum(per_task)]).astype(np.int64)
        self.incl_pos = (offsets[self.tri_task] + self.power_bits
                         + np.arange(len(self.tri_task)) - first_tri[self.tri_task]).astype(np.int64)
        self._bit_weights = (1 << np.arange(self.power_bits)[::-1]).astype(np.int64)
        self.evaluations = 0

    @property
    def triple_count(self) -> int:
        return len(self.tri_task)

    # -- decoding ----------------------------------------------------------

    def power_genes(self, genes: np.ndarray) -> np.ndarray:
        return genes[self.power_pos]

    def inclusion_genes(self, genes: np.ndarray) -> np.ndarray:
        return genes[self.incl_pos]

    def encode(self, level_idx: Sequence[int], included: Sequence[int]) -> np.ndarray:
        genes = np.zeros(self.genome_length, dtype=np.uint8)
        for b in range(self.power_bits):
            genes[self.power_pos[:, b]] = (np.asarray(level_idx, dtype=np.int64) >> (self.power_bits - 1 - b)) & 1
        genes[self.incl_pos[np.asarray(included, dtype=np.int64)]] = 1
        return genes

    def decode_levels(self, genes: np.ndarray) -> np.ndarray:
        if self.power_bits == 0:
            return np.zeros(len(self.tasks), dtype=np.int64)
        return (genes[self.power_pos].astype(np.int64) @ self._bit_weights) % self.level_count

    def decode(self, genes: np.ndarray) -> Tuple[np.ndarray, Dict[Ident, float]]:
        """(candidate triple indices, per-task powers); included triples infeasible at the decoded power are dropped."""
        lvl = self.decode_levels(genes)
        inc = np.flatnonzero(genes[self.incl_pos])
        cand = inc[self.feas[inc, lvl[self.tri_task[inc]]]]
        powers = {t.id: float(self.levels[i, lvl[i]]) for i, t in enumerate(self.tasks)}
        return cand, powers

    def candidate_vertices(self, genes: np.ndarray) -> List[Vertex]:
        """Decoded candidates as explicit conflict-graph vertices (reference path)."""
        lvl = self.decode_levels(genes)
        cand, _ = self.decode(genes)
        sc = self.scenario
        out = []
        for i in cand:
            ti, l = self.tri_task[i], lvl[self.tri_task[i]]
            k = sc.ttws[self.tri_ttw[i]]
            out.append(Vertex(self.tasks[ti].id, k.id, int(self.tri_start[i]), float(self.wgt[i, l]),
                              int(self.ps[i, l]), k.antenna, k.eos))
        return out

    # -- fitness -------------------------------------------------------------

    def evaluate(self, ch: Chromosome) -> float:
        """Repair by greedy MWIS over the decoded candidates, write the repair back, return the objective."""
        genes = ch.genes
        lvl = self.decode_levels(genes)
        cand, _ = self.decode(genes)
        cl = lvl[self.tri_task[cand]]
        w = self.wgt[cand, cl]
        sel_local = gwmin_arrays(self.tri_task[cand], self.tri_ant[cand], self.tri_eos[cand],
                                 self.tri_start[cand], self.ps[cand, cl], w,
                                 self.scenario.grid.num_slots, len(self.scenario.antennas),
                                 len(self.scenario.eoses))
        sel = cand[sel_local]
        genes[self.incl_pos] = 0
        genes[self.incl_pos[sel]] = 1
        ch.selected = sel
        ch.levels = lvl
        ch.fitness = math.fsum(w[sel_local])
        self.evaluations += 1
        return ch.fitness

    def schedule(self, ch: Chromosome) -> Schedule:
        if ch.selected is None:
            self.evaluate(ch)
        powers = {t.id: float(self.levels[i, ch.levels[i]]) for i, t in enumerate(self.tasks)}
        assigns = [Assignment(self.tasks[self.tri_task[i]].id, self.scenario.ttws[self.tri_ttw[i]].id,
                              int(self.tri_start[i])) for i in ch.selected]
        return make_schedule(assigns, powers, self.scenario, self.lam, self.norms)

    def random_chromosome(self, rng: np.random.Generator) -> Chromosome:
        return Chromosome(rng.integers(0, 2, size=self.genome_length, dtype=np.uint8))


# ---------------------------------------------------------------------------
# Genetic operators

def _fitness_key(pool: Sequence[Chromosome], i: int):
    return (-pool[i].fitness, i)


def evolve(population: List[Chromosome], params: GaParams, ctx: OffloadContext,
           rng: np.random.Generator) -> List[Chromosome]:
    """One generation: clone, cross, mutate, evaluate, merge with parents, then elitism + tournaments."""
    size = len(population)
    n_genes = ctx.genome_length
    offspring = [Chromosome(p.genes.copy()) for p in population]

    order = rng.permutation(size)
    for a, b in zip(order[0::2], order[1::2]):
        if rng.random() < params.crossover_prob and n_genes >= 2:
            cut = int(rng.integers(1, n_genes))
            ga, gb = offspring[a].genes, offspring[b].genes
            tail = ga[cut:].copy()
            ga[cut:] = gb[cut:]
            gb[cut:] = tail

    for ch in offspring:
        if rng.random() < params.mutation_prob and n_genes >= 1:
            n_flip = int(rng.binomial(n_genes, 1.0 / n_genes))
            if n_flip:
                pos = rng.choice(n_genes, size=n_flip, replace=False)
                ch.genes[pos] ^= 1

    for ch in offspring:
        ctx.evaluate(ch)

    pool = population + offspring
    ranked = sorted(range(len(pool)), key=lambda i: _fitness_key(pool, i))
    chosen = ranked[:params.elite_count]
    for _ in range(size - len(chosen)):
        entrants = rng.integers(0, len(pool), size=params.tournament_size)
        chosen.append(min(entrants.tolist(), key=lambda i: _fitness_key(pool, i)))
    return [pool[i] for i in chosen]


@dataclass
class TraceRow:
    generation: int
    best_fitness: float
    mean_fitness: float


@dataclass
class RunResult:
    solver: str
    schedule: Schedule
    trace: List[TraceRow]
    evaluations: int
    unservable: Dict[Ident, str]
    best: Chromosome
    params: dict
    scenario_hash: str
    wall_time: float = 0.0

    def manifest(self) -> dict:
        return {
            "solver": self.solver,
            "version": __version__,
            "params": self.params,
            "scenario_hash": self.scenario_hash,
            "lambda": self.schedule.lam,
            "evaluations": self.evaluations,
            "unservable_tasks": sorted(map(str, self.unservable)),
        }

    def trace_csv(self) -> str:
        lines = ["generation,best_fitness,mean_fitness"]
        lines += [f"{r.generation},{r.best_fitness!r},{r.mean_fitness!r}" for r in self.trace]
        return "\n".join(lines) + "\n"


def _check_servable(ctx: OffloadContext):
    if ctx.scenario.tasks and not ctx.tasks:
        raise InfeasibleError(f"no task is servable: {ctx.unservable}")


def _row(gen: int, pop: Sequence[Chromosome]) -> TraceRow:
    fits = [c.fitness for c in pop]
    return TraceRow(gen, max(fits), math.fsum(fits) / len(fits))


def _run_ga(solver: str, scenario: Scenario, params: GaParams, grid: str, lam: Optional[float]) -> RunResult:
    t0 = time.perf_counter()
    ctx = OffloadContext(scenario, params.level_count, grid, lam)
    _check_servable(ctx)
    rng = np.random.default_rng(params.seed)
    pop = [ctx.random_chromosome(rng) for _ in range(params.population_size)]
    for ch in pop:
        ctx.evaluate(ch)
    trace = [_row(0, pop)]
    for gen in range(1, params.generations + 1):
        pop = evolve(pop, params, ctx, rng)
        trace.append(_row(gen, pop))
    best = pop[min(range(len(pop)), key=lambda i: _fitness_key(pop, i))]
    return RunResult(solver, ctx.schedule(best), trace, ctx.evaluations, ctx.unservable, best,
                     asdict(params), scenario.content_hash(), time.perf_counter() - t0)


def run_edo(scenario: Scenario, params: GaParams, lam: Optional[float] = None) -> RunResult:
    """Genetic search over the reduced power grid [task minimum power, max power) with MWIS repair."""
    return _run_ga("edo", scenario, params, REDUCED, lam)


def run_baseline_ga(scenario: Scenario, params: GaParams, lam: Optional[float] = None) -> RunResult:
    """Same search, but power levels span [0, Pmax) without the minimum-power reduction."""
    return _run_ga("ga", scenario, params, FULL, lam)


def run_baseline_random(scenario: Scenario, seed: int = 0, samples: int = 1, level_count: int = 8,
                        lam: Optional[float] = None) -> RunResult:
    """Best of ``samples`` uniformly random chromosomes over the [0, Pmax) grid, each repaired."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t0 = time.perf_counter()
    ctx = OffloadContext(scenario, level_count, FULL, lam)
    _check_servable(ctx)
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(samples):
        ch = ctx.random_chromosome(rng)
        ctx.evaluate(ch)
        draws.append(ch)
    best = draws[min(range(samples), key=lambda i: _fitness_key(draws, i))]
    params = {"seed": seed, "samples": samples, "level_count": level_count}
    return RunResult("random", ctx.schedule(best), [_row(0, draws)], ctx.evaluations, ctx.unservable,
                     best, params, scenario.content_hash(), time.perf_counter() - t0)
