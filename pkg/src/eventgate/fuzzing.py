"""Pseudo-event injection: shape what the remote platform observes.

Filtering alone leaves the per-hour frequency of the surviving events
strongly correlated with the user's routine. This module flattens that
signal by mixing in pseudo-events the remote side cannot distinguish
from real ones:

  * estimate the per-bucket pattern F of the filtered stream over a
    trailing window,
  * pick a target shape D (uniform at max(F), or a Gaussian bump with
    its peak at F's argmax and sigma >= n/6),
  * compute the per-bucket deficit Y = max(D - F, 0),
  * on every protocol tick (1 simulated second) that carries no real
    event, emit a pseudo-event with probability y_i / m, where m is the
    number of ticks per bucket,
  * keep a ledger of injected (timestamp, user, device) keys so the
    platform's replies to pseudo-events are discarded while replies to
    real events are delivered.

Buckets where D dips below F cannot be masked; the shortfall is tracked
as a per-refresh leak budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .catalog import Catalog
from .model import SECONDS_PER_DAY, Command, Device, Event, StateRegistry
from .wire import event_to_wire

log = logging.getLogger(__name__)


class FuzzConfigError(ValueError):
    pass


def bucket_of(timestamp: int, n: int = 24) -> int:
    """Time-of-day bucket index for a timestamp (n buckets per day)."""
    return (timestamp % SECONDS_PER_DAY) * n // SECONDS_PER_DAY


def ticks_per_bucket(n: int = 24) -> int:
    if SECONDS_PER_DAY % n != 0:
        raise FuzzConfigError(f"bucket count {n} must divide {SECONDS_PER_DAY}")
    return SECONDS_PER_DAY // n


def estimate_pattern(
    events: Iterable[Event],
    n: int = 24,
    window_days: int = 7,
    end_day: int | None = None,
    start_day: int = 0,
) -> np.ndarray:
    """Mean event count per bucket per day over the trailing window.

    The window covers the last `window_days` whole days before `end_day`
    (default: the day after the last event), clamped to `start_day` when
    less history exists; the divisor is the actual window length, so a
    short bootstrap history still yields a per-day mean. Pseudo events
    are ignored. An empty window gives the all-zero vector.
    """
    counts = np.zeros(n)
    days = []
    buckets = []
    for ev in events:
        if ev.pseudo:
            continue
        days.append(ev.timestamp // SECONDS_PER_DAY)
        buckets.append(bucket_of(ev.timestamp, n))
    if not days:
        return counts
    if end_day is None:
        end_day = max(days) + 1
    start = max(start_day, end_day - window_days)
    span = end_day - start
    if span <= 0:
        return counts
    for day, bucket in zip(days, buckets):
        if start <= day < end_day:
            counts[bucket] += 1
    return counts / span


@dataclass(frozen=True)
class Uniform:
    """Flat target: every bucket at max(F). Kills the correlation entirely."""


@dataclass(frozen=True)
class Gaussian:
    """Bell-shaped target peaking at F's argmax; cheaper, leaks the tails."""

    sigma: float


TargetDistribution = Union[Uniform, Gaussian]


def build_target(
    f: np.ndarray, dist: TargetDistribution
) -> tuple[np.ndarray, np.ndarray]:
    """Materialize the target vector D and the deficit vector Y.

    Uniform: d_i = max(f). Gaussian: d_i = max(f) * exp(-(i - mu)^2 /
    (2 sigma^2)) with mu at the argmax bucket; sigma must be at least
    n/6 so the curve covers the whole day within three sigma.
    Y = max(D - F, 0) elementwise.
    """
    f = np.asarray(f, dtype=float)
    n = len(f)
    peak = float(f.max()) if n else 0.0
    if peak == 0.0:
        log.debug("all-zero pattern vector; target and deficit degenerate to zero")
        return np.zeros(n), np.zeros(n)
    if isinstance(dist, Uniform):
        d = np.full(n, peak)
    else:
        if dist.sigma < n / 6 - 1e-9:
            raise FuzzConfigError(f"sigma {dist.sigma} below minimum {n / 6}")
        mu = int(np.argmax(f))
        idx = np.arange(n)
        d = peak * np.exp(-((idx - mu) ** 2) / (2 * dist.sigma**2))
    y = np.maximum(d - f, 0.0)
    return d, y


# ---------------------------------------------------------------------------
# Pseudo-event generation


@dataclass(frozen=True)
class PoolEntry:
    device: Device
    labels: tuple[str, ...] = ()
    ranges: tuple[tuple[int, int], ...] = ()

    @property
    def numeric_size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.ranges)


@dataclass
class PseudoPool:
    """Trigger devices with their trigger values; pseudo-events draw a
    device uniformly, then a value uniformly from that device's trigger
    set, so the remote side always sees a plausible trigger."""

    entries: tuple[PoolEntry, ...]

    @classmethod
    def from_catalog(cls, catalog: Catalog) -> "PseudoPool":
        entries = []
        for device_id, table in catalog.discrete.items():
            labels = tuple(table.trigger_values())
            if labels:
                entries.append(PoolEntry(catalog.devices.require(device_id), labels=labels))
        for device_id, ntable in catalog.numeric.items():
            ranges = tuple(ntable.trigger_ranges())
            if ranges:
                entries.append(PoolEntry(catalog.devices.require(device_id), ranges=ranges))
        return cls(tuple(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def sample(self, rng: np.random.Generator) -> tuple[str, str, object]:
        entry = self.entries[int(rng.integers(len(self.entries)))]
        if entry.labels:
            value: object = entry.labels[int(rng.integers(len(entry.labels)))]
        else:
            offset = int(rng.integers(entry.numeric_size))
            for lo, hi in entry.ranges:
                size = hi - lo + 1
                if offset < size:
                    value = lo + offset
                    break
                offset -= size
        return entry.device.id, entry.device.attribute, value


def maybe_pseudo(
    bucket: int,
    m: int,
    y: np.ndarray,
    rng: np.random.Generator,
    pool: PseudoPool,
) -> tuple[str, str, object] | None:
    """One Bernoulli(y_i / m) trial; on success, a (device, attribute,
    value) draw from the pool. Returns None when nothing is emitted."""
    quota = float(y[bucket])
    if quota <= 0.0:
        return None
    if len(pool) == 0:
        raise FuzzConfigError("pseudo-event deficit is positive but the device pool is empty")
    p = min(quota / m, 1.0)
    if rng.random() < p:
        return pool.sample(rng)
    return None


class PseudoLedger:
    """Gateway-private record of injected events, keyed per batch."""

    def __init__(self) -> None:
        self._entries: dict[tuple[int, str, str], tuple[object, bool]] = {}

    def add(self, ev: Event) -> None:
        key = (ev.timestamp, ev.user, ev.device)
        if key in self._entries:
            raise FuzzConfigError(f"duplicate ledger key {key}")
        self._entries[key] = (ev.value, True)

    def matches(self, timestamp: int, user: str, device: str) -> bool:
        return (timestamp, user, device) in self._entries

    def purge(self, keys: Iterable[tuple[int, str, str]]) -> None:
        for key in keys:
            self._entries.pop(key, None)

    def __len__(self) -> int:
        return len(self._entries)


# ---------------------------------------------------------------------------
# Exchange protocol


@dataclass
class FuzzCounters:
    real_sent: int = 0
    pseudo_sent: int = 0
    delivered: int = 0
    discarded_pseudo: int = 0
    protocol_errors: int = 0
    leak_budget_total: float = 0.0
    refreshes: int = 0

    def overhead_ratio(self) -> float:
        if self.real_sent == 0:
            return float("inf") if self.pseudo_sent else 1.0
        return (self.real_sent + self.pseudo_sent) / self.real_sent


@dataclass
class RoundOutcome:
    """What one exchange round did, for callers that audit the protocol.

    `delivered` pairs each delivered command with whether it actually
    changed the actuator's state in the world registry.
    """

    batch: list[Event]
    commands: list[Command]
    delivered: list[tuple[Command, bool]]
    discarded: list[Command]


@dataclass
class FuzzState:
    """Per-user protocol state: pattern estimate, target, deficit, ledger."""

    user: str
    pool: PseudoPool
    rng: np.random.Generator
    n: int = 24
    m: int = 0  # 0 -> ticks per bucket
    window_days: int = 7
    dist: TargetDistribution = field(default_factory=Uniform)
    naive_rate: float | None = None  # constant per-tick probability, ignores Y

    def __post_init__(self) -> None:
        if self.m == 0:
            self.m = ticks_per_bucket(self.n)
        self.f = np.zeros(self.n)
        self.d = np.zeros(self.n)
        self.y = np.zeros(self.n)
        self.ledger = PseudoLedger()
        self.history: list[Event] = []
        self.counters = FuzzCounters()
        self.primed = False

    def emission_prob(self, bucket: int) -> float:
        if self.naive_rate is not None:
            return min(self.naive_rate, 1.0)
        return min(float(self.y[bucket]) / self.m, 1.0)

    def refresh(self, end_day: int) -> None:
        """Re-estimate F on the trailing window and rebuild D and Y."""
        self.f, self.d, self.y = refresh_cycle(
            self.history, self.window_days, self.dist, self.n, end_day=end_day
        )
        self.counters.refreshes += 1
        self.counters.leak_budget_total += float(np.maximum(self.f - self.d, 0.0).sum())

    def prime(self, events: Sequence[Event], days: int) -> None:
        """Initialize F, D, Y from an already-observed stream, as if the
        protocol had been running before the replay starts. A cold start
        instead leaves the first day uncovered while F bootstraps, which
        hands the platform one day of raw pattern."""
        self.f = estimate_pattern(events, n=self.n, window_days=days, end_day=days)
        self.d, self.y = build_target(self.f, self.dist)
        self.primed = True


def refresh_cycle(
    history: Sequence[Event],
    window_days: int,
    dist: TargetDistribution,
    n: int = 24,
    end_day: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recompute (F, D, Y) from the trailing window of forwarded events."""
    f = estimate_pattern(history, n=n, window_days=window_days, end_day=end_day)
    d, y = build_target(f, dist)
    return f, d, y


def exchange_round(
    real_events: Sequence[Event],
    state: FuzzState,
    platform,
    registry: StateRegistry,
    catalog: Catalog,
    tick: int | None = None,
) -> RoundOutcome:
    """Run one protocol tick.

    With real events present the batch is exactly those events (no
    injection); on an empty tick a single pseudo-event may be emitted.
    An empty batch is not sent at all: the platform hears nothing.
    """
    batch: list[Event] = list(real_events)
    if batch:
        tick = batch[0].timestamp
    elif tick is None:
        raise ValueError("an empty round needs an explicit tick timestamp")
    if not batch:
        if state.naive_rate is not None:
            draw = None
            if len(state.pool) and state.rng.random() < state.naive_rate:
                draw = state.pool.sample(state.rng)
        else:
            draw = maybe_pseudo(bucket_of(tick, state.n), state.m, state.y, state.rng, state.pool)
        if draw is not None:
            device, attribute, value = draw
            batch = [Event(tick, state.user, device, attribute, value, pseudo=True)]
    if not batch:
        return RoundOutcome([], [], [], [])
    return _exchange_batch(batch, state, platform, registry, catalog)


def _exchange_batch(
    batch: list[Event],
    state: FuzzState,
    platform,
    registry: StateRegistry,
    catalog: Catalog,
) -> RoundOutcome:
    real_keys = {(e.timestamp, e.user, e.device) for e in batch if not e.pseudo}
    kept: list[Event] = []
    for ev in batch:
        if ev.pseudo:
            key = (ev.timestamp, ev.user, ev.device)
            if key in real_keys or state.ledger.matches(*key):
                continue  # colliding key would make reply matching ambiguous
            state.ledger.add(ev)
            state.counters.pseudo_sent += 1
        else:
            state.counters.real_sent += 1
        kept.append(ev)
    batch = kept
    if not batch:
        return RoundOutcome([], [], [], [])

    commands = platform.evaluate_batch([event_to_wire(ev) for ev in batch])

    delivered: list[tuple[Command, bool]] = []
    discarded: list[Command] = []
    parsed: list[Command] = []
    for item in commands:
        cmd = Command(item["ts"], item["user"], item["device"], item["command"])
        parsed.append(cmd)
        causes = [
            ev
            for ev in batch
            if ev.timestamp == cmd.timestamp
            and ev.user == cmd.user
            and (cmd.device, cmd.command) in catalog.actions_for(ev.device, ev.value).pairs
        ]
        if not causes:
            state.counters.protocol_errors += 1
            log.warning("command with no matching event in batch, discarding: %s", cmd)
            continue
        if any(not ev.pseudo for ev in causes):
            changed = registry.apply(cmd)
            state.counters.delivered += 1
            delivered.append((cmd, changed))
        else:
            assert all(
                state.ledger.matches(ev.timestamp, ev.user, ev.device) for ev in causes
            )
            state.counters.discarded_pseudo += 1
            discarded.append(cmd)

    state.ledger.purge((e.timestamp, e.user, e.device) for e in batch if e.pseudo)
    return RoundOutcome(batch, parsed, delivered, discarded)


def run_exchange(
    forwarded: Sequence[Event],
    state: FuzzState,
    platform,
    registry: StateRegistry,
    catalog: Catalog,
    days: int,
    manual_ops: Sequence[Event] = (),
) -> list[RoundOutcome]:
    """Drive the exchange for one user over `days` simulated days.

    Real ticks come from the forwarded stream; silent ticks are not
    enumerated one by one. Because the deficit is constant within a
    (day, bucket) cell, the number of emitting silent ticks is drawn
    from the equivalent binomial and their positions sampled uniformly,
    which is distribution-identical to a Bernoulli trial per tick.

    `manual_ops` are timestamp-sorted actuator operations recorded in the
    trace; they are applied to the world registry as the clock reaches
    them, so delivered-command change flags reflect the true actuator
    state at delivery time.

    F, D, Y refresh at day boundaries: daily while bootstrap history is
    shorter than the window, every `window_days` afterwards.
    """
    by_tick: dict[int, list[Event]] = {}
    for ev in forwarded:
        by_tick.setdefault(ev.timestamp, []).append(ev)
    tick_keys = np.array(sorted(by_tick), dtype=np.int64)

    manual = sorted(manual_ops, key=lambda e: e.timestamp)
    manual_idx = 0

    def advance_world(up_to: int) -> None:
        nonlocal manual_idx
        while manual_idx < len(manual) and manual[manual_idx].timestamp <= up_to:
            registry.apply(manual[manual_idx])
            manual_idx += 1

    bucket_len = ticks_per_bucket(state.n)
    outcomes: list[RoundOutcome] = []

    for day in range(days):
        bootstrap_refresh = not state.primed and day <= state.window_days
        if day > 0 and (bootstrap_refresh or day % state.window_days == 0):
            state.refresh(end_day=day)
        for bucket in range(state.n):
            start = day * SECONDS_PER_DAY + bucket * bucket_len
            end = start + bucket_len
            left, right = np.searchsorted(tick_keys, [start, end])
            real_ticks = [int(t) for t in tick_keys[left:right]]

            p = state.emission_prob(bucket)
            pseudo_ticks: list[int] = []
            silent = bucket_len - len(real_ticks)
            if p > 0.0 and silent > 0:
                if len(state.pool) == 0:
                    raise FuzzConfigError(
                        "pseudo-event deficit is positive but the device pool is empty"
                    )
                count = int(state.rng.binomial(silent, p))
                if count:
                    picks = np.sort(state.rng.choice(silent, size=count, replace=False))
                    offsets = [int(t) - start for t in real_ticks]
                    pseudo_ticks = [start + j for j in _skip_occupied(picks, offsets)]

            for tick in sorted(real_ticks + pseudo_ticks):
                advance_world(tick)
                if tick in by_tick:
                    events = by_tick[tick]
                    state.history.extend(events)
                    outcome = _exchange_batch(list(events), state, platform, registry, catalog)
                else:
                    device, attribute, value = state.pool.sample(state.rng)
                    pseudo = Event(tick, state.user, device, attribute, value, pseudo=True)
                    outcome = _exchange_batch([pseudo], state, platform, registry, catalog)
                if outcome.batch:
                    outcomes.append(outcome)
    advance_world(days * SECONDS_PER_DAY)
    return outcomes


def _skip_occupied(picks: np.ndarray, occupied: list[int]) -> list[int]:
    """Map indices among silent slots to absolute slot offsets, skipping
    the sorted occupied offsets."""
    out = []
    for j in picks:
        pos = int(j)
        for occ in occupied:
            if occ <= pos:
                pos += 1
            else:
                break
        out.append(pos)
    return out
