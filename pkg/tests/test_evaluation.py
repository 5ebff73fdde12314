from pathlib import Path

import numpy as np
import pytest

from eosched.confgraph import build_conflict_graph, schedule_from_set
from eosched.evaluation import (Assignment, Schedule, ScheduleError, energy_norm, format_report, load_schedule,
                                make_schedule, objective, save_schedule, validate_schedule)
from eosched.scenario import Eos, Globals, Scenario, SlotGrid, Task, Ttw, load_scenario

from builders import REF_GLOBALS, random_feasible_powers, small_scenario
from test_channel import PSTAR_REF

DATA = Path(__file__).parent / "data"


def reference_norm_scenario():
    sc = load_scenario(DATA / "minimal.json")
    return sc.with_globals(energy_norm=2.5e5, weight_norm=400.0)


def shared_antenna_scenario():
    return Scenario(SlotGrid(20, 10.0), (Eos("s0", 100.0, 36.0), Eos("s1", 100.0, 36.0)), ("h",),
                    (Ttw("k0", "s0", "h", 0, 9, 0.0, 36.0, 2.5e8), Ttw("k1", "s1", "h", 10, 19, 0.0, 36.0, 2.5e8)),
                    (Task("a", "s0", 1e9, 1.0, 0, 19), Task("b", "s1", 1e9, 1.0, 0, 19)),
                    Globals(lam=0.3, **REF_GLOBALS))


def test_empty_schedule():
    sc = reference_norm_scenario()
    ob = objective(Schedule((), {}), sc)
    assert (ob.energy_total, ob.weight_total, ob.p0_value, ob.max_form_value) == (0, 0, 0, 0)
    assert validate_schedule(Schedule((), {}), sc) == []
    assert format_report([]) == "OK: no constraint violations\n"


def test_objective_single_task_at_minimum_power():
    sc = reference_norm_scenario()
    s = make_schedule([Assignment("j0", "k0", 0)], {"j0": PSTAR_REF}, sc)
    assert s.energy_total == pytest.approx(1.067256286833951770e-4, rel=1e-12)
    # 0.7*4/400 - 0.3*1.0672562868e-4/2.5e5
    assert s.objective_max_form == pytest.approx(0.006999999871929245578, rel=1e-12)
    ob = objective(s, sc)
    assert ob.max_form_value == -ob.p0_value
    assert validate_schedule(s, sc) == []


def test_lambda_zero_is_pure_weight():
    sc = reference_norm_scenario()
    s = make_schedule([Assignment("j0", "k0", 0)], {"j0": 50.0}, sc, lam=0.0)
    assert s.objective_max_form == 4.0 / 400.0


def test_objective_rejects_unknown_reference():
    sc = reference_norm_scenario()
    with pytest.raises(ScheduleError):
        objective(Schedule((Assignment("zz", "k0", 0),), {"zz": 1.0}), sc)


def test_auto_energy_norm_is_worst_case_energy():
    sc = load_scenario(DATA / "minimal.json")
    assert energy_norm(sc) == pytest.approx(2.49358567455557547, rel=1e-12)


def test_c5_and_c6_from_overlapping_intervals():
    sc = Scenario(SlotGrid(20, 10.0), (Eos("s0", 100.0, 36.0), Eos("s1", 100.0, 36.0)), ("h", "i"),
                  (Ttw("k0", "s0", "h", 0, 9, 0.0, 36.0, 2.5e8), Ttw("k1", "s1", "h", 0, 9, 0.0, 36.0, 2.5e8),
                   Ttw("k2", "s0", "i", 0, 9, 0.0, 36.0, 2.5e8)),
                  (Task("a", "s0", 1e9, 1.0, 0, 19), Task("b", "s1", 1e9, 1.0, 0, 19),
                   Task("c", "s0", 3e9, 1.0, 0, 19)),
                  Globals(lam=0.3, **REF_GLOBALS))
    p = PSTAR_REF
    s = Schedule((Assignment("a", "k0", 2), Assignment("b", "k1", 2)), {"a": p, "b": p})
    vs = validate_schedule(s, sc)
    assert len(vs) == 1 and vs[0].constraint == "ANTENNA" and set(vs[0].entities) == {"a", "b"}
    assert vs[0].slots == (2, 2) and "'h'" in str(vs[0])
    # c at the minimum power needs 12 s, i.e. slots 1-2, overlapping a at slot 2 on the same satellite
    s2 = Schedule((Assignment("a", "k0", 2), Assignment("c", "k2", 1)), {"a": p, "c": p})
    vs2 = validate_schedule(s2, sc)
    assert [v.constraint for v in vs2] == ["EOS"] and vs2[0].slots == (2, 2)


def test_c1_c2_c4_and_references():
    sc = shared_antenna_scenario()
    assert [v.constraint for v in validate_schedule(
        Schedule((Assignment("a", "k0", 0),), {"a": 150.0}), sc)] == ["POWER"]
    assert [v.constraint for v in validate_schedule(
        Schedule((Assignment("a", "k0", 0),), {"a": PSTAR_REF / 2}), sc)] == ["RATE"]
    assert [v.constraint for v in validate_schedule(
        Schedule((Assignment("a", "k0", 0), Assignment("a", "k0", 5)), {"a": 1.0}), sc)] == ["DUPLICATE"]
    assert [v.constraint for v in validate_schedule(
        Schedule((Assignment("a", "k1", 12),), {"a": 1.0}), sc)] == ["WINDOW"]
    assert [v.constraint for v in validate_schedule(
        Schedule((Assignment("q", "k0", 0),), {"q": 1.0}), sc)] == ["REF", "REF"]


def test_schedule_round_trip(tmp_path):
    sc = shared_antenna_scenario()
    s = make_schedule([Assignment("b", "k1", 12), Assignment("a", "k0", 3)], {"a": 1.0, "b": 2.0}, sc)
    assert [a.task for a in s.assignments] == ["a", "b"]
    save_schedule(s, tmp_path / "s.json")
    assert load_schedule(tmp_path / "s.json") == s
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(ScheduleError):
        load_schedule(tmp_path / "bad.json")


@pytest.mark.parametrize("seed", range(25))
def test_oracle_agreement_on_random_subsets(seed):
    sc = small_scenario(seed)
    rng = np.random.default_rng(seed)
    powers = random_feasible_powers(sc, rng)
    g = build_conflict_graph(sc, powers, skip_infeasible=True)
    n = len(g)
    if n == 0:
        return
    for _ in range(40):
        subset = [i for i in range(n) if rng.random() < rng.uniform(0.1, 0.6)]
        assigns = [Assignment(g.vertices[i].task, g.vertices[i].ttw, g.vertices[i].start_slot) for i in subset]
        vs = validate_schedule(Schedule(tuple(assigns), powers), sc)
        assert not [v for v in vs if v.constraint in ("POWER", "RATE")]
        assert (not vs) == g.is_independent(subset)


@pytest.mark.parametrize("seed", range(25))
def test_objective_linear_in_assignments(seed):
    sc = small_scenario(seed)
    rng = np.random.default_rng(seed)
    powers = random_feasible_powers(sc, rng)
    g = build_conflict_graph(sc, powers, skip_infeasible=True)
    chosen = []
    for v in rng.permutation(len(g)):
        if g.is_independent(chosen + [int(v)]):
            before = schedule_from_set(g, chosen, powers, sc).objective_max_form
            chosen.append(int(v))
            after = schedule_from_set(g, chosen, powers, sc).objective_max_form
            assert after - before == pytest.approx(g.vertices[v].weight, rel=1e-9, abs=1e-15)
