"""Minimum-energy transmit power for a fixed schedule, and its discretisation.

Writing y for seconds-per-bit scaled by bandwidth, y = 1/log2(1 + gain * power),
the per-task energy is proportional to g(y) = y (2^(1/y) - 1).  The optimum
over the feasible y-interval follows a three-case rule around the stationary
point of g, located by bisection.

g is strictly decreasing for every finite y > 0, so in practice the stationary
point never lies inside the interval and the optimum sits at the rate bound
(the lowest power meeting the rate requirement).  The full case analysis is
kept regardless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .channel import LinkParams, link_params, sgl_rate
from .scenario import Scenario, Task, Ttw

LN2 = math.log(2.0)

BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200
DEFAULT_LEVEL_COUNT = 8

CLIPPED_AT_PMAX = "clipped_at_pmax"
INTERIOR_EXTREMUM = "interior_extremum"
RATE_BOUND = "rate_bound"


class InfeasibleError(ValueError):
    """The rate requirement cannot be met even at maximum power."""

    def __init__(self, msg: str, shortfall: float = float("nan")):
        super().__init__(msg)
        self.shortfall = shortfall


@dataclass(frozen=True)
class PowerSolution:
    y_star: float
    power_star: float  # W
    energy: float  # J for the data_bits passed to optimal_power
    case_tag: str


@dataclass(frozen=True)
class PowerGrid:
    levels: Tuple[float, ...]

    @property
    def level_count(self) -> int:
        return len(self.levels)


def g(y: float) -> float:
    return y * math.expm1(LN2 / y)


def grad_g(y: float) -> float:
    # 2^(1/y) (1 - ln2/y) - 1, rearranged to avoid cancellation at large y
    v = LN2 / y
    return math.expm1(v) * (1.0 - v) - v


def hess_g(y: float) -> float:
    return 2.0 ** (1.0 / y) * LN2 ** 2 / y ** 3


def y_bounds(lp: LinkParams) -> Tuple[float, float]:
    """Feasible y-interval: from full power up to the rate requirement (bandwidth / required rate)."""
    lo = LN2 / math.log1p(lp.beta * lp.max_power)
    hi = lp.bandwidth / lp.rate_requirement
    return lo, hi


def _bisect_root(f, lo: float, hi: float) -> float:
    flo = f(lo)
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimal_y(lp: LinkParams) -> Tuple[float, str]:
    lo, hi = y_bounds(lp)
    if lo > hi * (1.0 + 1e-12):
        shortfall = lp.rate_requirement - sgl_rate(lp.max_power, lp)
        raise InfeasibleError(
            f"rate requirement {lp.rate_requirement:.6g} bit/s unreachable at max power "
            f"{lp.max_power:.6g} W (short by {shortfall:.6g} bit/s)", shortfall)
    if lo >= hi:
        return hi, RATE_BOUND
    # grad_g is increasing (g convex), so its sign at the ends locates the extremum
    if grad_g(lo) >= 0:
        return lo, CLIPPED_AT_PMAX
    if grad_g(hi) <= 0:
        return hi, RATE_BOUND
    return _bisect_root(grad_g, lo, hi), INTERIOR_EXTREMUM


def power_from_y(y: float, lp: LinkParams) -> float:
    return math.expm1(LN2 / y) / lp.beta


def optimal_power(lp: LinkParams, data_bits: float = 1.0) -> PowerSolution:
    y, tag = optimal_y(lp)
    if tag == CLIPPED_AT_PMAX:
        p = lp.max_power
    else:
        p = min(power_from_y(y, lp), lp.max_power)
    rate = sgl_rate(p, lp)
    assert rate >= lp.rate_requirement * (1 - 1e-9), (rate, lp)
    return PowerSolution(y, p, p * data_bits / rate, tag)


def discretize_power(ps: PowerSolution, lp: LinkParams, level_count: int = DEFAULT_LEVEL_COUNT) -> PowerGrid:
    return PowerGrid(power_levels(ps.power_star, lp.max_power, level_count))


def power_levels(p_low: float, p_max: float, level_count: int) -> Tuple[float, ...]:
    if level_count < 1:
        raise ValueError("level_count must be >= 1")
    step = (p_max - p_low) / level_count
    return tuple(p_low + k * step for k in range(level_count))


def task_min_power(task: Task, scenario: Scenario) -> Tuple[float, List[Ttw], Dict]:
    """Lowest single power meeting the rate requirement in every usable window of the task.

    Returns (power, usable windows, {ttw id: InfeasibleError}) where windows
    whose requirement is out of reach even at max power are excluded.  Power
    is ``nan`` when no window is usable.
    """
    usable, bad = [], {}
    best = 0.0
    for k in scenario.ttws_for_eos(task.eos):
        lp = link_params(task, k, scenario)
        try:
            best = max(best, optimal_power(lp).power_star)
        except InfeasibleError as exc:
            bad[k.id] = exc
            continue
        usable.append(k)
    return (best if usable else float("nan")), usable, bad
