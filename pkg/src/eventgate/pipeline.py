"""End-to-end replay: trace -> gateway -> platform -> commands.

Modes:
  baseline      every event of every authorized device goes to the
                platform untouched ("no gateway" reference)
  filter        redundancy filtering only
  fuzz-ideal    filtering plus pseudo-events toward a uniform target
  fuzz-gaussian filtering plus pseudo-events toward a Gaussian target
  fuzz-naive    filtering plus constant-rate pseudo-events (negative
                control: ignores the user's pattern)

Two registries are kept on purpose. The filter's own registry evolves
predictively (the gateway knows the rules, so it applies consequential
states the moment it forwards an event), while the world registry tracks
what actually happened to actuators: trace-recorded manual operations
plus commands the platform really sent and the gateway delivered. The
delivered log records, per command, whether it changed actuator state;
functional-equivalence checks compare exactly those state-changing
sequences across modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .catalog import Catalog
from .filtering import FilterStats, Forward, filter_event, filter_trace
from .fuzzing import (
    FuzzState,
    Gaussian,
    PseudoPool,
    TargetDistribution,
    Uniform,
    run_exchange,
)
from .model import SECONDS_PER_DAY, Command, Event, StateRegistry
from .ta import TAPlatform
from .wire import event_to_wire

MODES = ("baseline", "filter", "fuzz-ideal", "fuzz-gaussian", "fuzz-naive")


@dataclass
class RunResult:
    mode: str
    seed: int
    days: int
    input_count: int
    forwarded: list[Event]
    filter_stats: FilterStats | None
    platform: TAPlatform
    delivered: list[tuple[Command, bool]]  # (command, changed actuator state)
    fuzz_states: dict[str, FuzzState] = field(default_factory=dict)

    @property
    def adversary_log(self):
        return self.platform.log

    def state_changing_commands(self) -> list[Command]:
        return [cmd for cmd, changed in self.delivered if changed]

    def overhead_ratios(self) -> dict[str, float]:
        return {user: st.counters.overhead_ratio() for user, st in self.fuzz_states.items()}


def trace_day_span(events: Sequence[Event]) -> int:
    if not events:
        return 0
    return max(ev.timestamp for ev in events) // SECONDS_PER_DAY + 1


def run_pipeline(
    events: Sequence[Event],
    catalog: Catalog,
    mode: str,
    seed: int,
    days: int | None = None,
    n: int = 24,
    m: int = 0,
    window_days: int = 7,
    sigma: float | None = None,
    naive_rate: float = 0.0015,
    primed: bool = False,
    platform: TAPlatform | None = None,
) -> RunResult:
    """Replay one trace (all users mixed, timestamp-sorted) in one mode.

    `primed` starts each fuzz state from the pattern of the full filtered
    stream instead of a cold bootstrap; use it when evaluating a
    steady-state deployment over a recorded trace.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    events = sorted(events, key=lambda e: e.timestamp)
    if days is None:
        days = trace_day_span(events)
    if platform is None:
        platform = TAPlatform(catalog.applets, catalog.devices)
    world = StateRegistry(catalog.devices)
    actuators = catalog.actuator_device_ids
    delivered: list[tuple[Command, bool]] = []

    def deliver(cmd: Command) -> None:
        changed = world.apply(cmd)
        delivered.append((cmd, changed))

    if mode == "baseline":
        for ev in events:
            if ev.device in actuators:
                world.apply(ev)
            for item in platform.evaluate_batch([event_to_wire(ev)]):
                deliver(Command(item["ts"], item["user"], item["device"], item["command"]))
        return RunResult(mode, seed, days, len(events), list(events), None, platform, delivered)

    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if mode == "filter":
        # Sequential semantics: each forwarded event is uploaded and its
        # commands are delivered before the next event is examined.
        filter_registry = StateRegistry(catalog.devices)
        stats = FilterStats()
        forwarded: list[Event] = []
        for ev in events:
            if ev.device in actuators:
                filter_registry.apply(ev)
                world.apply(ev)
            decision = filter_event(ev, catalog, filter_registry, rng)
            stats.record(decision)
            if isinstance(decision, Forward):
                forwarded.append(decision.event)
                for actuator, csv in catalog.actions_for(ev.device, ev.value).pairs:
                    filter_registry.apply(Command(ev.timestamp, ev.user, actuator, csv))
                for item in platform.evaluate_batch([event_to_wire(decision.event)]):
                    deliver(Command(item["ts"], item["user"], item["device"], item["command"]))
        return RunResult(mode, seed, days, len(events), forwarded, stats, platform, delivered)

    # fuzz-* modes: filter first, then run the per-user exchange protocol.
    forwarded, stats = filter_trace(events, catalog, rng)

    if mode == "fuzz-gaussian":
        dist: TargetDistribution = Gaussian(sigma if sigma is not None else n / 6)
    else:
        dist = Uniform()

    pool = PseudoPool.from_catalog(catalog)
    users = sorted({ev.user for ev in events})
    by_user: dict[str, list[Event]] = {user: [] for user in users}
    for ev in forwarded:
        by_user[ev.user].append(ev)
    manual_by_user: dict[str, list[Event]] = {user: [] for user in users}
    for ev in events:
        if ev.device in actuators:
            manual_by_user[ev.user].append(ev)

    states: dict[str, FuzzState] = {}
    user_seeds = np.random.SeedSequence(seed).spawn(len(users))
    for user, user_seed in zip(users, user_seeds):
        state = FuzzState(
            user=user,
            pool=pool,
            rng=np.random.default_rng(user_seed),
            n=n,
            m=m,
            window_days=window_days,
            dist=dist,
            naive_rate=naive_rate if mode == "fuzz-naive" else None,
        )
        states[user] = state
        if primed:
            state.prime(by_user[user], days)
        outcomes = run_exchange(
            by_user[user], state, platform, world, catalog, days,
            manual_ops=manual_by_user[user],
        )
        for outcome in outcomes:
            delivered.extend(outcome.delivered)

    result = RunResult(mode, seed, days, len(events), forwarded, stats, platform, delivered)
    result.fuzz_states = states
    return result
