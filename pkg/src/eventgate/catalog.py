"""Trigger-action rule catalog.

Rules arrive as one-sentence descriptions in a fixed grammar:

    If <trigger-clause> by <DeviceId>, then <action-clause>

    trigger-clause:  Any new motion detected
                   | <attribute> is <label>
                   | <attribute> [is] above|below <integer>
    action-clause:   Switch on|Switch off|Lock|Unlock <DeviceId>
                   | log <free text>

`parse_description` turns a sentence into an `Applet` (trigger device,
trigger value or half-range, actuator plus its consequential state, or
an external action). `merge_applets` groups applets by trigger device
into per-device lookup tables: discrete devices get a state -> actions
row per state, numeric devices get an exact partition of [min, max]
into sub-ranges with the actions applying to each.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

from .model import (
    Device,
    DeviceRegistry,
    DeviceRole,
    Discrete,
    DomainError,
    Numeric,
    UnknownDeviceError,
    Value,
)


class AppletParseError(ValueError):
    def __init__(self, message: str, offset: int = 0, line: int | None = None):
        self.offset = offset
        self.line = line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{where}offset {offset}: {message}")


class ConsistencyError(ValueError):
    """Applets that contradict each other or the device registry."""


class Comparator(Enum):
    ABOVE = "above"
    BELOW = "below"


@dataclass(frozen=True)
class DiscreteTrigger:
    value: str


@dataclass(frozen=True)
class NumericTrigger:
    comparator: Comparator
    threshold: int


TriggerSpec = Union[DiscreteTrigger, NumericTrigger]

# Action verb -> consequential state of the actuator after the command.
CSV_BY_VERB = {
    "Switch on": "on",
    "Switch off": "off",
    "Lock": "locked",
    "Unlock": "unlocked",
}
VERB_BY_CSV = {csv: verb for verb, csv in CSV_BY_VERB.items()}


@dataclass(frozen=True)
class Applet:
    """One trigger-action rule. Exactly one of (actuator, csv) / external_action."""

    id: str
    trigger_device: str
    trigger_attribute: str
    trigger: TriggerSpec
    actuator: str | None = None
    csv: str | None = None
    external_action: str | None = None

    def __post_init__(self) -> None:
        has_device_action = self.actuator is not None and self.csv is not None
        if has_device_action == (self.external_action is not None):
            raise ConsistencyError(
                f"applet {self.id!r} needs exactly one of actuator+csv or external action"
            )
        if (self.actuator is None) != (self.csv is None):
            raise ConsistencyError(f"applet {self.id!r} has actuator without csv or vice versa")

    def key_information(self) -> dict:
        """The items that fully determine the rule (used by the CLI dump)."""
        info: dict = {
            "id": self.id,
            "trigger_device": self.trigger_device,
            "trigger_attribute": self.trigger_attribute,
        }
        if isinstance(self.trigger, DiscreteTrigger):
            info["trigger_state"] = self.trigger.value
        else:
            info["trigger_range"] = {
                "comparator": self.trigger.comparator.value,
                "threshold": self.trigger.threshold,
            }
        if self.actuator is not None:
            info["actuator"] = self.actuator
            info["csv"] = self.csv
        else:
            info["external_action"] = self.external_action
        return info


_SENTENCE_RE = re.compile(
    r"^If (?P<trigger>.+?) by (?P<tdev>[A-Za-z0-9_]+), then (?P<action>.+)$"
)
_MOTION_RE = re.compile(r"^Any new motion detected$")
_NUMERIC_RE = re.compile(r"^(?P<attr>[A-Za-z][A-Za-z0-9_]*) (?:is )?(?P<cmp>above|below) (?P<thr>-?\d+)$")
_DISCRETE_RE = re.compile(r"^(?P<attr>[A-Za-z][A-Za-z0-9_]*) is (?P<label>[A-Za-z0-9_-]+)$")
_ACTION_RE = re.compile(r"^(?P<verb>Switch on|Switch off|Lock|Unlock) (?P<adev>[A-Za-z0-9_]+)$")
_LOG_RE = re.compile(r"^log (?P<text>\S.*)$")


def parse_description(
    sentence: str,
    devices: DeviceRegistry,
    applet_id: str | None = None,
    line: int | None = None,
) -> Applet:
    """Parse one description sentence against the device registry.

    Raises AppletParseError (with character offset) for grammar trouble,
    UnknownDeviceError for unregistered ids, DomainError when the trigger
    value or threshold does not fit the device.
    """
    text = sentence.strip()
    m = _SENTENCE_RE.match(text)
    if m is None:
        raise AppletParseError("expected 'If <trigger> by <device>, then <action>'", 0, line)

    trigger_clause = m.group("trigger")
    trigger_dev_id = m.group("tdev")
    action_clause = m.group("action")
    action_offset = m.start("action")

    trigger_device = devices.require(trigger_dev_id)

    if _MOTION_RE.match(trigger_clause):
        attribute, spec = "motion", DiscreteTrigger("active")
    elif (nm := _NUMERIC_RE.match(trigger_clause)) is not None:
        attribute = nm.group("attr")
        spec = NumericTrigger(Comparator(nm.group("cmp")), int(nm.group("thr")))
    elif (dm := _DISCRETE_RE.match(trigger_clause)) is not None:
        attribute = dm.group("attr")
        spec = DiscreteTrigger(dm.group("label"))
    else:
        raise AppletParseError(
            f"unrecognized trigger clause {trigger_clause!r}", m.start("trigger"), line
        )

    _check_trigger_domain(spec, trigger_device)

    actuator = csv = external = None
    if (am := _ACTION_RE.match(action_clause)) is not None:
        actuator = am.group("adev")
        csv = CSV_BY_VERB[am.group("verb")]
        actuator_device = devices.require(actuator)
        if not isinstance(actuator_device.kind, Discrete):
            raise DomainError(f"actuator {actuator!r} must be a discrete device")
        if csv not in actuator_device.kind.states:
            raise DomainError(f"actuator {actuator!r} has no state {csv!r}")
    elif (lm := _LOG_RE.match(action_clause)) is not None:
        external = "log " + lm.group("text")
    else:
        raise AppletParseError(f"unrecognized action clause {action_clause!r}", action_offset, line)

    return Applet(
        id=applet_id if applet_id is not None else f"a{line if line is not None else 0}",
        trigger_device=trigger_dev_id,
        trigger_attribute=attribute,
        trigger=spec,
        actuator=actuator,
        csv=csv,
        external_action=external,
    )


def _check_trigger_domain(spec: TriggerSpec, device: Device) -> None:
    if isinstance(spec, DiscreteTrigger):
        if not isinstance(device.kind, Discrete):
            raise ConsistencyError(f"device {device.id!r} is numeric but trigger is a state label")
        if spec.value not in device.kind.states:
            raise DomainError(f"device {device.id!r} has no state {spec.value!r}")
    else:
        if not isinstance(device.kind, Numeric):
            raise ConsistencyError(f"device {device.id!r} is discrete but trigger is numeric")
        if not (device.kind.min < spec.threshold < device.kind.max):
            raise DomainError(
                f"threshold {spec.threshold} outside ({device.kind.min}, {device.kind.max}) "
                f"of device {device.id!r}"
            )


def render_description(applet: Applet) -> str:
    """Canonical sentence for an applet; parse_description(render(a)) == a
    up to the applet id (key information round-trips exactly)."""
    if isinstance(applet.trigger, DiscreteTrigger):
        trigger = f"{applet.trigger_attribute} is {applet.trigger.value}"
    else:
        trigger = (
            f"{applet.trigger_attribute} is {applet.trigger.comparator.value} "
            f"{applet.trigger.threshold}"
        )
    if applet.external_action is not None:
        action = applet.external_action
    else:
        action = f"{VERB_BY_CSV[applet.csv]} {applet.actuator}"
    return f"If {trigger} by {applet.trigger_device}, then {action}"


def load_applets(path: str | Path, devices: DeviceRegistry) -> list[Applet]:
    """Read a definitions file: one sentence per line, '#' comments allowed."""
    applets = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            applets.append(parse_description(text, devices, applet_id=f"a{lineno}", line=lineno))
    return applets


# ---------------------------------------------------------------------------
# Merged per-device lookup tables


@dataclass(frozen=True)
class ActionSet:
    """Device commands plus external actions mapped to one trigger value."""

    pairs: tuple[tuple[str, str], ...] = ()  # (actuator, csv)
    external: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.pairs or self.external)


EMPTY_ACTIONS = ActionSet()


@dataclass
class DiscreteTable:
    """state label -> actions; states with an empty set are untrigger states."""

    device: str
    rows: dict[str, ActionSet]

    def actions_for(self, value: Value) -> ActionSet:
        if not isinstance(value, str):
            return EMPTY_ACTIONS
        return self.rows.get(value, EMPTY_ACTIONS)

    def trigger_values(self) -> list[str]:
        return [state for state, acts in self.rows.items() if acts]


@dataclass
class NumericTable:
    """Partition of [min, max] into sub-ranges, each with its action set.

    `cuts` are the interior cut points c_1 <= ... <= c_k producing
    sub-ranges [min, c_1], [c_1+1, c_2], ..., [c_k+1, max]. A value v
    falls in sub-range index bisect_left(cuts, v).
    """

    device: str
    cuts: tuple[int, ...]
    ranges: tuple[tuple[int, int], ...]
    actions: tuple[ActionSet, ...]

    def index_of(self, value: int) -> int:
        return bisect_left(self.cuts, value)

    def subrange(self, value: int) -> tuple[int, int]:
        return self.ranges[self.index_of(value)]

    def actions_for(self, value: Value) -> ActionSet:
        if isinstance(value, bool) or not isinstance(value, int):
            return EMPTY_ACTIONS
        return self.actions[self.index_of(value)]

    def trigger_ranges(self) -> list[tuple[int, int]]:
        return [rng for rng, acts in zip(self.ranges, self.actions) if acts]


@dataclass
class Catalog:
    """Everything the gateway knows about the installed rules."""

    devices: DeviceRegistry
    applets: tuple[Applet, ...]
    discrete: dict[str, DiscreteTable]
    numeric: dict[str, NumericTable]
    roles: dict[str, DeviceRole]

    def role(self, device_id: str) -> DeviceRole:
        return self.roles.get(device_id, DeviceRole.IDLE)

    @property
    def trigger_device_ids(self) -> set[str]:
        return set(self.discrete) | set(self.numeric)

    @property
    def actuator_device_ids(self) -> set[str]:
        return {a.actuator for a in self.applets if a.actuator is not None}

    def actions_for(self, device_id: str, value: Value) -> ActionSet:
        table = self.discrete.get(device_id)
        if table is not None:
            return table.actions_for(value)
        ntable = self.numeric.get(device_id)
        if ntable is not None:
            return ntable.actions_for(value)
        return EMPTY_ACTIONS

    def to_json(self) -> dict:
        return {
            "applets": [a.key_information() for a in self.applets],
            "discrete_tables": {
                dev: {
                    state: {"actions": list(map(list, acts.pairs)), "external": list(acts.external)}
                    for state, acts in table.rows.items()
                }
                for dev, table in self.discrete.items()
            },
            "numeric_tables": {
                dev: [
                    {
                        "range": list(rng),
                        "actions": list(map(list, acts.pairs)),
                        "external": list(acts.external),
                    }
                    for rng, acts in zip(table.ranges, table.actions)
                ]
                for dev, table in self.numeric.items()
            },
            "roles": {dev: role.value for dev, role in self.roles.items()},
        }


def _trigger_interval(spec: NumericTrigger, kind: Numeric) -> tuple[int, int]:
    """Half-range an applet fires on: above X -> [X+1, max], below X -> [min, X-1]."""
    if spec.comparator is Comparator.ABOVE:
        return (spec.threshold + 1, kind.max)
    return (kind.min, spec.threshold - 1)


def merge_applets(applets: Iterable[Applet], devices: DeviceRegistry) -> Catalog:
    """Group applets by trigger device into per-device tables and assign roles.

    Numeric devices collect every cut point implied by their applets
    (above X cuts at X, below X cuts at X-1); the resulting sub-ranges
    partition [min, max] exactly, and each sub-range takes the union of
    the actions of every applet whose half-range covers it.
    """
    applets = tuple(applets)
    by_device: dict[str, list[Applet]] = {}
    for applet in applets:
        device = devices.require(applet.trigger_device)
        _check_trigger_domain(applet.trigger, device)
        if applet.actuator is not None:
            actuator = devices.require(applet.actuator)
            if not isinstance(actuator.kind, Discrete) or applet.csv not in actuator.kind.states:
                raise ConsistencyError(
                    f"applet {applet.id!r}: actuator {applet.actuator!r} cannot hold {applet.csv!r}"
                )
        by_device.setdefault(applet.trigger_device, []).append(applet)

    discrete_tables: dict[str, DiscreteTable] = {}
    numeric_tables: dict[str, NumericTable] = {}

    for device_id, group in by_device.items():
        kind = devices.require(device_id).kind
        if isinstance(kind, Discrete):
            rows = {
                state: _actions_where(group, lambda a, s=state: a.trigger.value == s)
                for state in kind.states
            }
            discrete_tables[device_id] = DiscreteTable(device_id, rows)
        else:
            cuts = set()
            for applet in group:
                spec = applet.trigger
                cut = spec.threshold if spec.comparator is Comparator.ABOVE else spec.threshold - 1
                cuts.add(cut)
            ordered = tuple(sorted(cuts))
            assert all(kind.min <= c <= kind.max - 1 for c in ordered)
            bounds = [kind.min] + [c + 1 for c in ordered]
            ranges = tuple(
                (lo, hi)
                for lo, hi in zip(bounds, list(ordered) + [kind.max])
            )
            actions = tuple(
                _actions_where(
                    group,
                    lambda a, lo=lo, hi=hi: _covers(_trigger_interval(a.trigger, kind), lo, hi),
                )
                for lo, hi in ranges
            )
            numeric_tables[device_id] = NumericTable(device_id, ordered, ranges, actions)

    roles: dict[str, DeviceRole] = {}
    trigger_ids = set(by_device)
    actuator_ids = {a.actuator for a in applets if a.actuator is not None}
    for device in devices:
        if device.id in trigger_ids:
            roles[device.id] = DeviceRole.TRIGGER
        elif device.id in actuator_ids:
            roles[device.id] = DeviceRole.ACTUATOR
        else:
            roles[device.id] = DeviceRole.IDLE

    return Catalog(devices, applets, discrete_tables, numeric_tables, roles)


def _covers(interval: tuple[int, int], lo: int, hi: int) -> bool:
    return interval[0] <= lo and hi <= interval[1]


def _actions_where(group: list[Applet], predicate) -> ActionSet:
    pairs: list[tuple[str, str]] = []
    external: list[str] = []
    for applet in group:
        if not predicate(applet):
            continue
        if applet.actuator is not None:
            pair = (applet.actuator, applet.csv)
            if pair not in pairs:
                pairs.append(pair)
        elif applet.external_action not in external:
            external.append(applet.external_action)
    return ActionSet(tuple(pairs), tuple(external))
