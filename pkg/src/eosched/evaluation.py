"""Schedules, the weighted energy/weight objective, and a standalone constraint checker.

The checker simulates slot occupancy directly from the scenario and the
schedule's powers.  It shares nothing with the conflict-graph code, which is
what makes it usable as an oracle for every solver.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

from .channel import link_params, proc_slots, processing_time, sgl_rate, task_energy
from .power import task_min_power
from .scenario import AUTO, Ident, Scenario, feasible_slots

RATE_RTOL = 1e-9
POWER_RTOL = 1e-12


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Assignment:
    task: Ident
    ttw: Ident
    start_slot: int


@dataclass(frozen=True)
class Schedule:
    assignments: Tuple[Assignment, ...]
    powers: Mapping[Ident, float]
    objective_max_form: float = 0.0
    energy_total: float = 0.0
    weight_total: float = 0.0
    lam: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "objective_max_form": self.objective_max_form,
            "weight_total": self.weight_total,
            "energy_total": self.energy_total,
            "assignments": [{"task": a.task, "ttw": a.ttw, "start_slot": a.start_slot}
                            for a in self.assignments],
            "powers": [{"task": j, "power": p} for j, p in self.powers.items()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        try:
            return cls(
                assignments=tuple(Assignment(a["task"], a["ttw"], int(a["start_slot"]))
                                  for a in d["assignments"]),
                powers={p["task"]: float(p["power"]) for p in d["powers"]},
                objective_max_form=float(d.get("objective_max_form", 0.0)),
                energy_total=float(d.get("energy_total", 0.0)),
                weight_total=float(d.get("weight_total", 0.0)),
                lam=float(d.get("lambda", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScheduleError(f"malformed schedule: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def save_schedule(schedule: Schedule, path) -> None:
    Path(path).write_text(schedule.to_json())


def load_schedule(path) -> Schedule:
    try:
        return Schedule.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ScheduleError(f"{path}: not valid JSON ({exc})") from exc


@dataclass(frozen=True)
class ObjectiveBreakdown:
    energy_total: float
    weight_total: float
    p0_value: float
    max_form_value: float
    lam: float


def energy_norm(scenario: Scenario) -> float:
    """Energy normalizer: explicit value, or in auto mode the sum over tasks of their worst-case energy.

    Energy grows with power, so a task's worst case is max power in its
    costliest usable window.
    """
    g = scenario.globals
    if g.energy_norm != AUTO:
        return float(g.energy_norm)
    total = 0.0
    for t in scenario.tasks:
        _, usable, _ = task_min_power(t, scenario)
        pmax = scenario.eos(t.eos).max_power
        worst = [task_energy(t, pmax, link_params(t, k, scenario)) for k in usable]
        if worst:
            total += max(worst)
    return total if total > 0 else 1.0


def normalizers(scenario: Scenario) -> Tuple[float, float]:
    """(weight normalizer, energy normalizer) with auto modes resolved."""
    return scenario.weight_norm(), energy_norm(scenario)


def _lookup(scenario: Scenario):
    return {t.id: t for t in scenario.tasks}, {k.id: k for k in scenario.ttws}


def objective(schedule: Schedule, scenario: Scenario, lam: Optional[float] = None,
              norms: Optional[Tuple[float, float]] = None) -> ObjectiveBreakdown:
    lam = scenario.globals.lam if lam is None else lam
    w_max, e_max = norms if norms is not None else normalizers(scenario)
    tasks, ttws = _lookup(scenario)
    energies, weights = [], []
    for a in schedule.assignments:
        if a.task not in tasks or a.ttw not in ttws:
            raise ScheduleError(f"assignment {a} references an unknown task or ttw")
        if a.task not in schedule.powers:
            raise ScheduleError(f"no power given for scheduled task {a.task!r}")
        t = tasks[a.task]
        energies.append(task_energy(t, schedule.powers[a.task], link_params(t, ttws[a.ttw], scenario)))
        weights.append(t.weight)
    e = math.fsum(energies)
    w = math.fsum(weights)
    p0 = lam / e_max * e - (1.0 - lam) / w_max * w
    return ObjectiveBreakdown(e, w, p0, -p0, lam)


def make_schedule(assignments: Iterable[Assignment], powers: Mapping[Ident, float], scenario: Scenario,
                  lam: Optional[float] = None, norms: Optional[Tuple[float, float]] = None) -> Schedule:
    lam = scenario.globals.lam if lam is None else lam
    sched = Schedule(tuple(sorted(assignments, key=_order_key(scenario))), dict(powers), lam=lam)
    ob = objective(sched, scenario, lam, norms)
    return Schedule(sched.assignments, sched.powers, ob.max_form_value, ob.energy_total,
                    ob.weight_total, lam)


def _order_key(scenario: Scenario):
    tpos = {t.id: i for i, t in enumerate(scenario.tasks)}
    kpos = {k.id: i for i, k in enumerate(scenario.ttws)}
    return lambda a: (tpos.get(a.task, len(tpos)), kpos.get(a.ttw, len(kpos)), a.start_slot)


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Violation:
    constraint: str  # POWER, RATE, WINDOW, DUPLICATE, ANTENNA, EOS, or REF for dangling references
    entities: Tuple
    slots: Optional[Tuple[int, int]] = None
    detail: str = ""

    def __str__(self):
        ents = ",".join(str(e) for e in self.entities)
        s = f"{self.constraint} [{ents}]"
        if self.slots is not None:
            s += f" slots={self.slots[0]}..{self.slots[1]}"
        if self.detail:
            s += f" {self.detail}"
        return s


def format_report(violations: Sequence[Violation]) -> str:
    if not violations:
        return "OK: no constraint violations\n"
    return "".join(f"{v}\n" for v in violations)


def validate_schedule(schedule: Schedule, scenario: Scenario) -> List[Violation]:
    """Every violated constraint with the entities involved; empty iff the schedule is feasible."""
    tasks, ttws = _lookup(scenario)
    out: List[Violation] = []

    for j, p in schedule.powers.items():
        if j not in tasks:
            out.append(Violation("REF", (j,), detail="power given for unknown task"))
            continue
        pmax = scenario.eos(tasks[j].eos).max_power
        if not (0.0 <= p <= pmax * (1 + POWER_RTOL)):
            out.append(Violation("POWER", (j,), detail=f"power {p!r} outside [0, {pmax!r}]"))

    per_task = defaultdict(list)
    antenna_busy = defaultdict(lambda: defaultdict(list))
    eos_busy = defaultdict(lambda: defaultdict(list))
    for idx, a in enumerate(schedule.assignments):
        if a.task not in tasks or a.ttw not in ttws:
            out.append(Violation("REF", (a.task, a.ttw), detail="unknown task or ttw"))
            continue
        t, k = tasks[a.task], ttws[a.ttw]
        per_task[a.task].append(idx)
        if k.eos != t.eos:
            out.append(Violation("WINDOW", (a.task, a.ttw), detail="window belongs to another satellite"))
            continue
        p = schedule.powers.get(a.task)
        if p is None:
            out.append(Violation("POWER", (a.task,), detail="scheduled task has no power"))
            continue
        lp = link_params(t, k, scenario)
        rate = sgl_rate(max(p, 0.0), lp)
        if rate < k.rate_requirement * (1 - RATE_RTOL):
            out.append(Violation("RATE", (a.task, a.ttw),
                                 detail=f"rate {rate:.6g} < required {k.rate_requirement:.6g}"))
        if rate <= 0:
            continue
        n = proc_slots(processing_time(t, p, lp), scenario.grid.slot_duration)
        if a.start_slot not in feasible_slots(t, k, n):
            out.append(Violation("WINDOW", (a.task, a.ttw), (a.start_slot, a.start_slot + n - 1),
                                 detail="start slot not feasible for this window"))
        for s in range(a.start_slot, a.start_slot + n):
            antenna_busy[k.antenna][s].append(idx)
            eos_busy[t.eos][s].append(idx)

    for j, idxs in per_task.items():
        if len(idxs) > 1:
            out.append(Violation("DUPLICATE", (j,), detail=f"offloaded {len(idxs)} times"))

    for tag, busy, kind in (("ANTENNA", antenna_busy, "antenna"), ("EOS", eos_busy, "eos")):
        for res in busy:
            clashes = defaultdict(list)
            for s, idxs in busy[res].items():
                for i1 in range(len(idxs)):
                    for i2 in range(i1 + 1, len(idxs)):
                        clashes[(idxs[i1], idxs[i2])].append(s)
            for (i1, i2), slots in sorted(clashes.items()):
                a1, a2 = schedule.assignments[i1], schedule.assignments[i2]
                out.append(Violation(tag, (a1.task, a2.task), (min(slots), max(slots)),
                                     detail=f"{kind} {res!r} shared"))
    return out
