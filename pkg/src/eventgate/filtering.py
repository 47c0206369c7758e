"""Event filter: drop what no rule needs, randomize what survives.

Every incoming event runs through four checks, in order:

  1. device fires no rule at all           -> drop (untrigger device)
  2. value maps to no action               -> drop (untrigger state)
  3. every mapped actuator already holds
     its consequential state, and there is
     no external action                    -> drop (no-op trigger)
  4. numeric survivors get their value
     resampled uniformly within the same
     sub-range before forwarding

Step 3 consults the live state registry; an unknown actuator state never
suppresses (dropping on unknown state could break a rule). With several
actuators mapped to one value, the event is forwarded if at least one of
them would change state. External actions have no state to compare and
are never suppressed by step 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

from .catalog import Catalog
from .model import Command, DeviceRole, Event, StateRegistry


class DropReason(Enum):
    UNTRIGGER_DEVICE = "untrigger_device"
    UNTRIGGER_STATE = "untrigger_state"
    ACTUATOR_ALREADY_IN_CSV = "actuator_csv"


@dataclass(frozen=True)
class Drop:
    reason: DropReason


@dataclass(frozen=True)
class Forward:
    event: Event


FilterDecision = Union[Drop, Forward]


@dataclass
class FilterStats:
    input_count: int = 0
    forwarded_count: int = 0
    drops: dict[DropReason, int] = field(
        default_factory=lambda: {reason: 0 for reason in DropReason}
    )

    def record(self, decision: FilterDecision) -> None:
        self.input_count += 1
        if isinstance(decision, Forward):
            self.forwarded_count += 1
        else:
            self.drops[decision.reason] += 1

    def to_json(self) -> dict:
        return {
            "input_count": self.input_count,
            "forwarded_count": self.forwarded_count,
            "drops": {reason.value: count for reason, count in self.drops.items()},
        }


def filter_event(
    ev: Event,
    catalog: Catalog,
    registry: StateRegistry,
    rng: np.random.Generator,
) -> FilterDecision:
    """Decide one (real) event. Total: every input yields a decision."""
    if catalog.role(ev.device) is not DeviceRole.TRIGGER:
        return Drop(DropReason.UNTRIGGER_DEVICE)

    actions = catalog.actions_for(ev.device, ev.value)
    if not actions:
        return Drop(DropReason.UNTRIGGER_STATE)

    if not actions.external and all(
        registry.get(ev.user, actuator) == csv for actuator, csv in actions.pairs
    ):
        return Drop(DropReason.ACTUATOR_ALREADY_IN_CSV)

    table = catalog.numeric.get(ev.device)
    if table is not None:
        lo, hi = table.subrange(ev.value)
        fuzzed = int(rng.integers(lo, hi + 1))
        return Forward(replace(ev, value=fuzzed))
    return Forward(ev)


def filter_trace(
    events: Sequence[Event],
    catalog: Catalog,
    rng: np.random.Generator,
    registry: StateRegistry | None = None,
) -> tuple[list[Event], FilterStats]:
    """Replay a timestamp-ordered trace through the filter.

    The registry evolves inline: actuator events in the trace are applied
    as manual operations, and each forwarded event's consequential states
    are applied immediately (the platform is deterministic, so the
    commands it will send are known the moment the event is forwarded).
    """
    if registry is None:
        registry = StateRegistry(catalog.devices)
    actuators = catalog.actuator_device_ids
    stats = FilterStats()
    forwarded: list[Event] = []
    last_ts = None
    for ev in events:
        if last_ts is not None and ev.timestamp < last_ts:
            raise ValueError(f"trace not sorted: {ev.timestamp} after {last_ts}")
        last_ts = ev.timestamp
        if ev.device in actuators:
            registry.apply(ev)
        decision = filter_event(ev, catalog, registry, rng)
        stats.record(decision)
        if isinstance(decision, Forward):
            forwarded.append(decision.event)
            for actuator, csv in catalog.actions_for(ev.device, ev.value).pairs:
                registry.apply(Command(ev.timestamp, ev.user, actuator, csv))
    return forwarded, stats
