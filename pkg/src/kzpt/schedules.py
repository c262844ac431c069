"""Row-selection rules: the order in which one Kaczmarz epoch visits the rows.

Orders are 0-based integer arrays of length ``m``. The schedule for epoch
``k`` depends only on ``(seed, k)``, never on how many schedules were drawn
before it, so reruns and out-of-order evaluation reproduce the same rows.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "RESHUFFLE",
    "RESHUFFLE_ONCE",
    "CYCLIC",
    "REPLACEMENT",
    "RULES",
    "RowSchedule",
    "next_epoch_schedule",
    "validate_schedule",
    "ScheduleStream",
    "is_permutation_rule",
]

RESHUFFLE = "reshuffle"
RESHUFFLE_ONCE = "reshuffle-once"
CYCLIC = "cyclic"
REPLACEMENT = "replacement"
RULES = (RESHUFFLE, RESHUFFLE_ONCE, CYCLIC, REPLACEMENT)


def is_permutation_rule(rule):
    return rule in (RESHUFFLE, RESHUFFLE_ONCE, CYCLIC)


def _check_rule(rule):
    if rule not in RULES:
        raise InvalidArgument(f"unknown row rule {rule!r}; expected one of {', '.join(RULES)}")


@dataclass(frozen=True)
class RowSchedule:
    order: np.ndarray
    rule: str


def _epoch_rng(seed, epoch_index):
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy,
                                    spawn_key=tuple(seed.spawn_key) + (int(epoch_index),))
    else:
        ss = np.random.SeedSequence([0 if seed is None else int(seed), int(epoch_index)])
    return np.random.default_rng(ss)


def next_epoch_schedule(rule, m, epoch_index, seed=None):
    """Row order for epoch ``epoch_index``.

    ``reshuffle`` draws a fresh uniform permutation every epoch,
    ``reshuffle-once`` reuses the epoch-0 permutation, ``cyclic`` is
    ``0..m-1`` and ``replacement`` draws ``m`` i.i.d. uniform indices.
    ``seed`` is an int or a :class:`numpy.random.SeedSequence`.
    """
    _check_rule(rule)
    if m < 1:
        raise InvalidArgument(f"m must be positive, got {m}")
    if rule == CYCLIC:
        order = np.arange(m)
    elif rule == RESHUFFLE:
        order = _epoch_rng(seed, epoch_index).permutation(m)
    elif rule == RESHUFFLE_ONCE:
        order = _epoch_rng(seed, 0).permutation(m)
    else:
        order = _epoch_rng(seed, epoch_index).integers(0, m, size=m)
    return RowSchedule(order=order, rule=rule)


def validate_schedule(schedule, m):
    """True iff the order is consistent with its rule for an ``m``-row operator."""
    order = np.asarray(schedule.order)
    if schedule.rule not in RULES or order.ndim != 1 or order.shape[0] != m:
        return False
    if not np.issubdtype(order.dtype, np.integer):
        return False
    if m and (order.min() < 0 or order.max() >= m):
        return False
    if schedule.rule == CYCLIC:
        return bool(np.array_equal(order, np.arange(m)))
    if schedule.rule in (RESHUFFLE, RESHUFFLE_ONCE):
        return bool(np.array_equal(np.sort(order), np.arange(m)))
    return True


class ScheduleStream:
    """Per-run source of epoch schedules for one rule, ``m`` and seed."""

    def __init__(self, rule, m, seed=None):
        _check_rule(rule)
        self.rule = rule
        self.m = m
        self.seed = seed

    def epoch(self, k):
        return next_epoch_schedule(self.rule, self.m, k, self.seed)

    def __iter__(self):
        k = 0
        while True:
            yield self.epoch(k)
            k += 1
