"""Problem instance: slot grid, satellites, antennas, contact windows and tasks.

A scenario is stored as JSON with top-level keys ``grid``, ``globals``,
``eoses``, ``antennas``, ``ttws`` and ``tasks``.  Contact windows carry slot
indices (inclusive on both ends); ``grid.slot_duration`` anchors them to
seconds.  See README.md for the full schema.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np

Ident = Union[int, str]
Norm = Union[float, str]

AUTO = "auto"


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or breaks an invariant."""


@dataclass(frozen=True)
class SlotGrid:
    num_slots: int
    slot_duration: float  # seconds


@dataclass(frozen=True)
class Eos:
    id: Ident
    max_power: float  # W
    transmit_gain_db: float


@dataclass(frozen=True)
class Ttw:
    """Contact window between one satellite and one ground antenna."""

    id: Ident
    eos: Ident
    antenna: Ident
    begin_slot: int
    end_slot: int
    path_loss_db: float
    antenna_gain_db: float
    rate_requirement: float  # bits/s


@dataclass(frozen=True)
class Task:
    id: Ident
    eos: Ident
    data_bits: float
    weight: float
    earliest_start: int
    latest_start: int


@dataclass(frozen=True)
class Globals:
    bandwidth: float  # Hz
    free_space_loss: float  # linear
    noise_power: float  # linear
    lam: float = 0.3
    energy_norm: Norm = AUTO
    weight_norm: Norm = AUTO


@dataclass(frozen=True)
class Scenario:
    grid: SlotGrid
    eoses: Tuple[Eos, ...]
    antennas: Tuple[Ident, ...]
    ttws: Tuple[Ttw, ...]
    tasks: Tuple[Task, ...]
    globals: Globals
    _eos_index: Dict[Ident, Eos] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_eos_index", {e.id: e for e in self.eoses})

    def eos(self, eos_id: Ident) -> Eos:
        return self._eos_index[eos_id]

    def ttws_for_eos(self, eos_id: Ident) -> List[Ttw]:
        return [k for k in self.ttws if k.eos == eos_id]

    def with_lambda(self, lam: float) -> "Scenario":
        return replace(self, globals=replace(self.globals, lam=lam))

    def with_globals(self, **changes) -> "Scenario":
        return replace(self, globals=replace(self.globals, **changes))

    def weight_norm(self) -> float:
        """Weight normalizer: explicit value, or the sum of all task weights in auto mode."""
        if self.globals.weight_norm == AUTO:
            total = math.fsum(t.weight for t in self.tasks)
            return total if total > 0 else 1.0
        return float(self.globals.weight_norm)

    def validate(self) -> "Scenario":
        _validate(self)
        return self

    def to_dict(self) -> dict:
        g = self.globals
        return {
            "grid": asdict(self.grid),
            "globals": {
                "bandwidth": g.bandwidth,
                "free_space_loss": g.free_space_loss,
                "noise_power": g.noise_power,
                "lambda": g.lam,
                "energy_norm": g.energy_norm,
                "weight_norm": g.weight_norm,
            },
            "eoses": [asdict(e) for e in self.eoses],
            "antennas": list(self.antennas),
            "ttws": [asdict(k) for k in self.ttws],
            "tasks": [asdict(t) for t in self.tasks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def content_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _require(cond: bool, msg: str):
    if not cond:
        raise ScenarioError(msg)


def _check_unique(ids: Iterable[Ident], kind: str):
    seen = set()
    for i in ids:
        _require(i not in seen, f"duplicate {kind} id {i!r}")
        seen.add(i)


def _validate(sc: Scenario):
    T = sc.grid.num_slots
    _require(isinstance(T, int) and T >= 1, f"grid.num_slots must be >= 1, got {T!r}")
    _require(sc.grid.slot_duration > 0, f"grid.slot_duration must be > 0, got {sc.grid.slot_duration!r}")

    g = sc.globals
    _require(g.bandwidth > 0, "globals.bandwidth must be > 0")
    _require(g.free_space_loss > 0, "globals.free_space_loss must be > 0")
    _require(0.0 <= g.lam < 1.0, f"globals.lambda must lie in [0, 1), got {g.lam!r}")
    for name in ("energy_norm", "weight_norm"):
        v = getattr(g, name)
        _require(v == AUTO or (isinstance(v, (int, float)) and v > 0),
                 f"globals.{name} must be 'auto' or a positive number, got {v!r}")

    _check_unique((e.id for e in sc.eoses), "eos")
    for e in sc.eoses:
        _require(e.max_power > 0, f"eos {e.id!r}: max_power must be > 0")
    _check_unique(sc.antennas, "antenna")
    antennas = set(sc.antennas)
    eos_ids = {e.id for e in sc.eoses}

    _check_unique((k.id for k in sc.ttws), "ttw")
    by_pair: Dict[tuple, List[Ttw]] = {}
    for k in sc.ttws:
        _require(k.eos in eos_ids, f"ttw {k.id!r} references unknown eos {k.eos!r}")
        _require(k.antenna in antennas, f"ttw {k.id!r} references unknown antenna {k.antenna!r}")
        _require(0 <= k.begin_slot <= k.end_slot < T,
                 f"ttw {k.id!r}: need 0 <= begin_slot <= end_slot < {T}, got [{k.begin_slot}, {k.end_slot}]")
        _require(k.rate_requirement > 0, f"ttw {k.id!r}: rate_requirement must be > 0")
        by_pair.setdefault((k.eos, k.antenna), []).append(k)
    for (s, h), ks in by_pair.items():
        ks = sorted(ks, key=lambda k: k.begin_slot)
        for a, b in zip(ks, ks[1:]):
            _require(b.begin_slot > a.end_slot,
                     f"ttw {b.id!r} overlaps ttw {a.id!r} on (eos {s!r}, antenna {h!r}) "
                     f"at slot {b.begin_slot}")

    _check_unique((t.id for t in sc.tasks), "task")
    for t in sc.tasks:
        _require(t.eos in eos_ids, f"task {t.id!r} references unknown eos {t.eos!r}")
        _require(t.data_bits > 0, f"task {t.id!r}: data_bits must be > 0")
        _require(t.weight > 0, f"task {t.id!r}: weight must be > 0")
        _require(0 <= t.earliest_start <= t.latest_start,
                 f"task {t.id!r}: need 0 <= earliest_start <= latest_start")


def scenario_from_dict(d: dict) -> Scenario:
    try:
        grid = SlotGrid(int(d["grid"]["num_slots"]), float(d["grid"]["slot_duration"]))
        gd = d["globals"]
        glob = Globals(
            bandwidth=float(gd["bandwidth"]),
            free_space_loss=float(gd["free_space_loss"]),
            noise_power=float(gd["noise_power"]),
            lam=float(gd.get("lambda", 0.3)),
            energy_norm=_norm(gd.get("energy_norm", AUTO)),
            weight_norm=_norm(gd.get("weight_norm", AUTO)),
        )
        eoses = tuple(Eos(e["id"], float(e["max_power"]), float(e.get("transmit_gain_db", 0.0)))
                      for e in d["eoses"])
        antennas = tuple(d["antennas"])
        ttws = tuple(
            Ttw(k["id"], k["eos"], k["antenna"], int(k["begin_slot"]), int(k["end_slot"]),
                float(k.get("path_loss_db", 0.0)), float(k.get("antenna_gain_db", 0.0)),
                float(k["rate_requirement"]))
            for k in d["ttws"])
        tasks = tuple(
            Task(t["id"], t["eos"], float(t["data_bits"]), float(t["weight"]),
                 int(t.get("earliest_start", 0)), int(t.get("latest_start", grid.num_slots - 1)))
            for t in d["tasks"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc
    return Scenario(grid, eoses, antennas, ttws, tasks, glob).validate()


def _norm(v) -> Norm:
    return AUTO if v == AUTO else float(v)


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario.to_json())


# ---------------------------------------------------------------------------
# Slot sets

def feasible_slots(task: Task, ttw: Ttw, proc_slots: int) -> range:
    """Start slots t with the whole transmission inside the window and t in the task's start window."""
    lo = max(ttw.begin_slot, task.earliest_start)
    hi = min(ttw.end_slot - proc_slots + 1, task.latest_start)
    return range(lo, hi + 1) if hi >= lo else range(0)


def _occupancy(task: Task, ttw: Ttw, start_slot: int, proc_slots: int) -> range:
    lo = max(start_slot, ttw.begin_slot, task.earliest_start)
    # latest_start bounds only the start slot; the transmission may run past it
    hi = min(start_slot + proc_slots - 1, ttw.end_slot)
    return range(lo, hi + 1) if hi >= lo else range(0)


def antenna_occupancy(task: Task, ttw: Ttw, start_slot: int, proc_slots: int) -> range:
    """Slots during which ``ttw.antenna`` is busy receiving ``task`` started at ``start_slot``."""
    return _occupancy(task, ttw, start_slot, proc_slots)


def eos_occupancy(task: Task, start_slot: int, proc_slots: int, ttw: Ttw) -> range:
    """Slots during which the task's own satellite is busy transmitting it."""
    return _occupancy(task, ttw, start_slot, proc_slots)


# ---------------------------------------------------------------------------
# Synthetic generation

@dataclass
class GeneratorConfig:
    eoses: int = 4
    antennas: int = 4
    tasks: int = 40
    num_slots: int = 4320  # 12 h at 10 s
    slot_duration: float = 10.0
    passes: Tuple[int, int] = (2, 6)  # per (eos, antenna) pair
    pass_slots: Tuple[int, int] = (30, 90)
    data_bits: Tuple[float, float] = (500e6, 1500e6)
    weight: Tuple[float, float] = (1.0, 5.0)
    path_loss_db: Tuple[float, float] = (0.0, 0.0)
    transmit_gain_db: float = 36.0
    antenna_gain_db: float = 36.0
    max_power: float = 100.0
    rate_requirement: float = 250e6
    bandwidth: float = 2.2e9
    free_space_loss: float = 1e-23
    noise_power: float = 5.16e-20
    lam: float = 0.3
    energy_norm: Norm = AUTO
    weight_norm: Norm = AUTO

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ScenarioError(f"unknown generator option(s): {sorted(unknown)}")
        for k, v in d.items():
            if isinstance(v, list):
                d[k] = tuple(v)
        return cls(**d)


_MAX_PLACEMENT_TRIES = 10_000


def generate_synthetic(cfg: GeneratorConfig, seed: int) -> Scenario:
    """Draw a random instance with non-overlapping passes on every (eos, antenna) pair.

    Windows are drawn before tasks, so for a fixed seed the contact plan does
    not depend on ``cfg.tasks`` and the first n tasks agree across task counts.
    """
    T = cfg.num_slots
    pmin, pmax = cfg.pass_slots
    if pmin < 1 or pmin > pmax:
        raise ScenarioError(f"invalid pass_slots range {cfg.pass_slots}")
    if pmin > T:
        raise ScenarioError(f"pass duration {pmin} slots exceeds the {T}-slot horizon")
    pmax = min(pmax, T)
    rng = np.random.default_rng(seed)

    eoses = tuple(Eos(f"eos{i}", cfg.max_power, cfg.transmit_gain_db) for i in range(cfg.eoses))
    antennas = tuple(f"gs{i}" for i in range(cfg.antennas))

    raw = []
    for si, e in enumerate(eoses):
        for hi, h in enumerate(antennas):
            count = int(rng.integers(cfg.passes[0], cfg.passes[1] + 1))
            placed: List[Tuple[int, int]] = []
            for _ in range(count):
                for _try in range(_MAX_PLACEMENT_TRIES):
                    dur = int(rng.integers(pmin, pmax + 1))
                    a = int(rng.integers(0, T - dur + 1))
                    b = a + dur - 1
                    if all(b < a2 or a > b2 for a2, b2 in placed):
                        placed.append((a, b))
                        break
                else:
                    raise ScenarioError(
                        f"cannot place {count} non-overlapping passes on (eos {e.id}, antenna {h}) "
                        f"within {T} slots")
            for a, b in placed:
                loss = float(rng.uniform(*cfg.path_loss_db)) if cfg.path_loss_db[1] > cfg.path_loss_db[0] \
                    else float(cfg.path_loss_db[0])
                raw.append((si, a, hi, b, loss))
    raw.sort()
    ttws = tuple(
        Ttw(f"ttw{i:04d}", eoses[si].id, antennas[hi], a, b, loss, cfg.antenna_gain_db, cfg.rate_requirement)
        for i, (si, a, hi, b, loss) in enumerate(raw))

    tasks = []
    for i in range(cfg.tasks):
        si = int(rng.integers(0, cfg.eoses)) if cfg.eoses else 0
        d = float(rng.uniform(*cfg.data_bits))
        w = float(rng.uniform(*cfg.weight))
        tasks.append(Task(f"task{i:04d}", eoses[si].id, d, w, 0, T - 1))

    glob = Globals(cfg.bandwidth, cfg.free_space_loss, cfg.noise_power, cfg.lam,
                   cfg.energy_norm, cfg.weight_norm)
    return Scenario(SlotGrid(T, cfg.slot_duration), eoses, antennas, ttws, tuple(tasks), glob).validate()
