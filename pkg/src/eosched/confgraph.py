"""Conflict graph over candidate assignments and maximum-weight independent sets.

A vertex is one (task, window, start slot) choice.  Two vertices are joined
when they cannot both be chosen: same task, or overlapping slots on the same
ground antenna, or overlapping slots on the same satellite.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .channel import link_params, meets_rate, proc_slots, processing_time
from .evaluation import Assignment, Schedule, make_schedule, normalizers
from .power import InfeasibleError
from .scenario import Ident, Scenario, feasible_slots

EXACT_LIMIT = 25


class GraphTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Vertex:
    task: Ident
    ttw: Ident
    start_slot: int
    weight: float
    proc_slots: int
    antenna: Ident
    eos: Ident

    @property
    def last_slot(self) -> int:
        return self.start_slot + self.proc_slots - 1


@dataclass(frozen=True)
class ConflictGraph:
    vertices: Tuple[Vertex, ...]
    neighbors: Tuple[Tuple[int, ...], ...]  # sorted, symmetric

    def __len__(self):
        return len(self.vertices)

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u, nb in enumerate(self.neighbors) for v in nb if u < v]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def is_independent(self, chosen: Iterable[int]) -> bool:
        chosen = set(chosen)
        return all(not (set(self.neighbors[i]) & chosen) for i in chosen)

    def weight_of(self, chosen: Iterable[int]) -> float:
        return math.fsum(self.vertices[i].weight for i in chosen)


def conflicts(u: Vertex, v: Vertex) -> bool:
    if u.task == v.task:
        return True
    overlap = u.start_slot <= v.last_slot and v.start_slot <= u.last_slot
    return overlap and (u.antenna == v.antenna or u.eos == v.eos)


def graph_from_vertices(vertices: Sequence[Vertex]) -> ConflictGraph:
    """Join vertices sharing a task or a (resource, slot) cell, using buckets instead of all pairs."""
    buckets: Dict[tuple, List[int]] = defaultdict(list)
    for i, v in enumerate(vertices):
        buckets[("task", v.task)].append(i)
        for s in range(v.start_slot, v.last_slot + 1):
            buckets[("ant", v.antenna, s)].append(i)
            buckets[("eos", v.eos, s)].append(i)
    nbrs: List[Set[int]] = [set() for _ in vertices]
    for members in buckets.values():
        for a in members:
            nbrs[a].update(members)
    for i, nb in enumerate(nbrs):
        nb.discard(i)
    return ConflictGraph(tuple(vertices), tuple(tuple(sorted(nb)) for nb in nbrs))


def vertex_weight(weight: float, power: float, seconds: float, lam: float, w_max: float, e_max: float) -> float:
    return (1.0 - lam) * weight / w_max - lam * power * seconds / e_max


def enumerate_vertices(scenario: Scenario, powers: Mapping[Ident, float], lam: Optional[float] = None,
                       skip_infeasible: bool = False,
                       norms: Optional[Tuple[float, float]] = None) -> List[Vertex]:
    """All feasible (task, window, start) triples at the given powers.

    Tasks absent from ``powers`` contribute nothing.  A window whose rate
    requirement the task's power misses raises, unless ``skip_infeasible``.
    """
    lam = scenario.globals.lam if lam is None else lam
    w_max, e_max = norms if norms is not None else normalizers(scenario)
    out = []
    for t in scenario.tasks:
        if t.id not in powers:
            continue
        p = powers[t.id]
        for k in scenario.ttws_for_eos(t.eos):
            lp = link_params(t, k, scenario)
            if not meets_rate(p, lp):
                if skip_infeasible:
                    continue
                raise InfeasibleError(f"power {p!r} W misses the rate requirement of task {t.id!r} "
                                      f"in ttw {k.id!r}")
            secs = processing_time(t, p, lp)
            n = proc_slots(secs, scenario.grid.slot_duration)
            w = vertex_weight(t.weight, p, secs, lam, w_max, e_max)
            for s in feasible_slots(t, k, n):
                out.append(Vertex(t.id, k.id, s, w, n, k.antenna, k.eos))
    return out


def build_conflict_graph(scenario: Scenario, powers: Mapping[Ident, float], lam: Optional[float] = None,
                         skip_infeasible: bool = False) -> ConflictGraph:
    return graph_from_vertices(enumerate_vertices(scenario, powers, lam, skip_infeasible))


def greedy_mwis(graph: ConflictGraph) -> List[int]:
    """GWMIN: repeatedly take the live vertex maximising weight/(degree+1), drop its closed neighbourhood.

    Degrees are taken in the remaining graph.  Non-positive vertices still
    count towards degrees but are never taken.  Ties go to the lowest index.
    """
    n = len(graph)
    alive = [True] * n
    deg = [len(nb) for nb in graph.neighbors]
    w = [v.weight for v in graph.vertices]
    chosen = []
    while True:
        best, best_r = -1, 0.0
        for i in range(n):
            if alive[i] and w[i] > 0:
                r = w[i] / (deg[i] + 1)
                if best < 0 or r > best_r:
                    best, best_r = i, r
        if best < 0:
            break
        chosen.append(best)
        dead = [best] + [u for u in graph.neighbors[best] if alive[u]]
        for u in dead:
            alive[u] = False
        for u in dead:
            for x in graph.neighbors[u]:
                if alive[x]:
                    deg[x] -= 1
    return sorted(chosen)


def exact_mwis(graph: ConflictGraph) -> List[int]:
    """Branch and bound over bitmasks; exact for graphs up to EXACT_LIMIT vertices."""
    n = len(graph)
    if n > EXACT_LIMIT:
        raise GraphTooLarge(f"exact MWIS limited to {EXACT_LIMIT} vertices, got {n}")
    w = [v.weight for v in graph.vertices]
    nbr = [sum(1 << j for j in nb) for nb in graph.neighbors]
    order = sorted((i for i in range(n) if w[i] > 0), key=lambda i: (-w[i], i))
    best_w, best_mask = 0.0, 0

    def rec(cand: int, cur: float, chosen: int):
        nonlocal best_w, best_mask
        if cur > best_w:
            best_w, best_mask = cur, chosen
        if not cand:
            return
        if cur + sum(w[i] for i in order if cand >> i & 1) <= best_w:
            return
        i = next(i for i in order if cand >> i & 1)
        bit = 1 << i
        rec(cand & ~nbr[i] & ~bit, cur + w[i], chosen | bit)
        rec(cand & ~bit, cur, chosen)

    rec(sum(1 << i for i in order), 0.0, 0)
    return [i for i in range(n) if best_mask >> i & 1]


def schedule_from_set(graph: ConflictGraph, chosen: Iterable[int], powers: Mapping[Ident, float],
                      scenario: Scenario, lam: Optional[float] = None) -> Schedule:
    chosen = sorted(set(chosen))
    if not graph.is_independent(chosen):
        raise ValueError("vertex set is not independent")
    assigns = [Assignment(graph.vertices[i].task, graph.vertices[i].ttw, graph.vertices[i].start_slot)
               for i in chosen]
    return make_schedule(assigns, powers, scenario, lam)


# ---------------------------------------------------------------------------
# Edge-list dump

def dump_graph(graph: ConflictGraph, path) -> None:
    """Text dump: ``n <|V|>``, one ``w <i> <weight> <task> <ttw> <slot>`` line per vertex, then ``u v`` edges."""
    lines = [f"n {len(graph)}"]
    for i, v in enumerate(graph.vertices):
        lines.append(f"w {i} {v.weight!r} {v.task} {v.ttw} {v.start_slot}")
    lines.extend(f"{u} {v}" for u, v in graph.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph_dump(path) -> Tuple[List[float], List[Tuple[int, int]]]:
    weights: List[float] = []
    edges = []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "n":
            weights = [0.0] * int(parts[1])
        elif parts[0] == "w":
            weights[int(parts[1])] = float(parts[2])
        else:
            edges.append((int(parts[0]), int(parts[1])))
    return weights, edges
