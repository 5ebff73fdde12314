"""Satellite-ground link arithmetic: SNR slope, Shannon rate, transmit time, energy."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import Scenario, Task, Ttw


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class LinkParams:
    beta: float  # SNR per Watt, linear
    bandwidth: float  # Hz
    rate_requirement: float  # bits/s
    max_power: float  # W

    def __post_init__(self):
        if not (self.beta > 0 and self.bandwidth > 0 and self.rate_requirement > 0 and self.max_power > 0):
            raise ChannelError(f"link parameters must be positive: {self}")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def link_params(task: Task, ttw: Ttw, scenario: Scenario) -> LinkParams:
    """Channel constants for sending ``task`` through window ``ttw``.

    ``path_loss_db`` is the total attenuation of the window and enters the
    product as a loss, so 0 dB reproduces a unit path-loss factor.
    """
    if ttw.eos != task.eos:
        raise ChannelError(f"ttw {ttw.id!r} belongs to eos {ttw.eos!r}, task {task.id!r} to {task.eos!r}")
    g = scenario.globals
    if not g.noise_power > 0:
        raise ChannelError(f"noise power must be positive, got {g.noise_power!r}")
    eos = scenario.eos(task.eos)
    beta = (db_to_linear(eos.transmit_gain_db) * db_to_linear(ttw.antenna_gain_db)
            * g.free_space_loss * db_to_linear(-ttw.path_loss_db) / g.noise_power)
    return LinkParams(beta, g.bandwidth, ttw.rate_requirement, eos.max_power)


def sgl_rate(power: float, lp: LinkParams) -> float:
    if power < 0:
        raise ChannelError(f"negative transmit power {power!r}")
    return lp.bandwidth * math.log1p(lp.beta * power) / math.log(2.0)


def processing_time(task: Task, power: float, lp: LinkParams) -> float:
    """Seconds needed to send the task's data at ``power``."""
    rate = sgl_rate(power, lp)
    if rate <= 0:
        raise ChannelError(f"task {task.id!r}: zero link rate at power {power!r}, processing time undefined")
    return task.data_bits / rate


def task_energy(task: Task, power: float, lp: LinkParams) -> float:
    if power <= 0:
        raise ChannelError(f"task {task.id!r}: energy needs positive power, got {power!r}")
    return power * processing_time(task, power, lp)


def proc_slots(seconds: float, slot_duration: float) -> int:
    """Whole slots blocked by a transmission of ``seconds``; at least one."""
    # tolerate round-off just above an integer number of slots
    return max(1, math.ceil(seconds / slot_duration - 1e-9))


def meets_rate(power: float, lp: LinkParams, rtol: float = 1e-9) -> bool:
    return power > 0 and sgl_rate(power, lp) >= lp.rate_requirement * (1.0 - rtol)
