"""Trace ingestion and synthesis.

Real traces arrive in the CASAS text layout, one record per line:

    YYYY-MM-DD HH:MM:SS[.ffffff] SENSOR VALUE [annotation]

Sensor ids map to device categories by prefix (M -> motion, D ->
contact, T -> temperature, L/LL -> switch, BAT -> battery); the mapping
is a documented assumption and can be overridden per dataset. Battery
records are dropped, motion ON/OFF becomes active/inactive, contact
OPEN/CLOSE becomes open/closed, temperature readings are rounded
half-up to integers. Timestamps become integer seconds from midnight of
the first record's date, so time-of-day structure survives ingestion.

Synthetic traces are driven by per-user profiles: a per-device rate
vector over the day's buckets (events per hour) feeding independent
Poisson draws, plus a value emission rule (cycle through labels, uniform
choice, or an integer random walk). Generation is bit-reproducible for
a fixed seed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .model import (
    SECONDS_PER_DAY,
    Device,
    DeviceRegistry,
    Discrete,
    Event,
    Numeric,
)

log = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    pass


# prefix -> category, longest prefix wins
DEFAULT_PREFIX_MAP: tuple[tuple[str, str], ...] = (
    ("BAT", "battery"),
    ("M", "motion"),
    ("D", "contact"),
    ("T", "temperature"),
    ("L", "switch"),
)

_DISCRETE_VALUES = {
    "motion": {"ON": "active", "OFF": "inactive"},
    "contact": {"OPEN": "open", "CLOSE": "closed", "CLOSED": "closed"},
    "switch": {"ON": "on", "OFF": "off"},
}
_RENDER_VALUES = {
    "motion": {"active": "ON", "inactive": "OFF"},
    "contact": {"open": "OPEN", "closed": "CLOSE"},
    "switch": {"on": "ON", "off": "OFF"},
}
CATEGORY_STATES = {
    "motion": ("active", "inactive"),
    "contact": ("open", "closed"),
    "switch": ("on", "off"),
}


def sensor_category(sensor: str, prefix_map=DEFAULT_PREFIX_MAP) -> str | None:
    best = None
    best_len = 0
    for prefix, category in prefix_map:
        if sensor.startswith(prefix) and len(prefix) > best_len:
            best, best_len = category, len(prefix)
    return best


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def parse_casas(
    source: str | Path | Iterable[str],
    user: str = "resident",
    prefix_map=DEFAULT_PREFIX_MAP,
    max_malformed_frac: float = 0.01,
) -> list[Event]:
    """Parse a CASAS-style log into a timestamp-sorted event list.

    Malformed lines are skipped with a warning; more than
    `max_malformed_frac` of them fails the whole file. Lines for battery
    sensors or unmapped sensor ids are excluded categories, not errors.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)

    records: list[tuple[date, int, str, str]] = []  # (day, second-of-day, sensor, value)
    malformed = 0
    considered = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        considered += 1
        parts = line.split()
        if len(parts) < 4:
            malformed += 1
            log.warning("line %d: expected 'date time sensor value', got %r", lineno, line)
            continue
        date_s, time_s, sensor, value_s = parts[0], parts[1], parts[2], parts[3]
        try:
            day = date.fromisoformat(date_s)
            clock = time_s.split(".", 1)[0]
            hh, mm, ss = (int(p) for p in clock.split(":"))
            second = hh * 3600 + mm * 60 + ss
            if not (0 <= second < SECONDS_PER_DAY):
                raise ValueError(time_s)
        except ValueError:
            malformed += 1
            log.warning("line %d: bad timestamp in %r", lineno, line)
            continue
        records.append((day, second, sensor, value_s))

    if considered and malformed / considered > max_malformed_frac:
        raise TraceFormatError(
            f"{malformed} of {considered} lines malformed (> {max_malformed_frac:.0%})"
        )

    records.sort(key=lambda r: (r[0], r[1]))
    events: list[Event] = []
    epoch: date | None = None
    for day, second, sensor, value_s in records:
        category = sensor_category(sensor, prefix_map)
        if category is None or category == "battery":
            continue
        if category == "temperature":
            try:
                value: object = round_half_up(float(value_s))
            except ValueError:
                log.warning("unparseable temperature reading %r from %s", value_s, sensor)
                continue
            attribute = "temperature"
        else:
            mapped = _DISCRETE_VALUES[category].get(value_s.upper())
            if mapped is None:
                log.warning("unexpected %s value %r from %s", category, value_s, sensor)
                continue
            value = mapped
            attribute = category
        if epoch is None:
            epoch = day
        ts = (day - epoch).days * SECONDS_PER_DAY + second
        events.append(Event(ts, user, sensor, attribute, value))
    return events


def infer_devices(events: Sequence[Event], pad: int = 1) -> DeviceRegistry:
    """Build a device registry from an ingested trace.

    Discrete categories get their fixed state sets; numeric devices get
    the observed range padded by `pad` on both sides so any threshold
    derived from the data sits strictly inside the range.
    """
    reg = DeviceRegistry()
    numeric_span: dict[str, tuple[int, int]] = {}
    attrs: dict[str, str] = {}
    for ev in events:
        attrs[ev.device] = ev.attribute
        if isinstance(ev.value, int):
            lo, hi = numeric_span.get(ev.device, (ev.value, ev.value))
            numeric_span[ev.device] = (min(lo, ev.value), max(hi, ev.value))
    for device_id, attribute in sorted(attrs.items()):
        if device_id in numeric_span:
            lo, hi = numeric_span[device_id]
            kind: object = Numeric(lo - pad, hi + pad)
        else:
            kind = Discrete(CATEGORY_STATES[attribute])
        reg.add(Device(device_id, kind, attribute))
    return reg


def write_casas(
    events: Sequence[Event], path: str | Path | None = None, epoch: date = date(2011, 6, 15)
) -> str:
    """Render events back to the CASAS text layout (inverse of parse_casas
    for traces whose first event falls on day zero)."""
    out_lines = []
    for ev in events:
        day, second = divmod(ev.timestamp, SECONDS_PER_DAY)
        hh, rem = divmod(second, 3600)
        mm, ss = divmod(rem, 60)
        stamp = f"{epoch + timedelta(days=day)} {hh:02d}:{mm:02d}:{ss:02d}.000000"
        if isinstance(ev.value, int):
            rendered = str(ev.value)
        else:
            rendered = _RENDER_VALUES[ev.attribute][ev.value]
        out_lines.append(f"{stamp} {ev.device} {rendered}")
    text = "\n".join(out_lines) + ("\n" if out_lines else "")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# Newline-delimited JSON cache for event lists


def write_events_ndjson(events: Iterable[Event], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(
                json.dumps(
                    {
                        "ts": ev.timestamp,
                        "user": ev.user,
                        "device": ev.device,
                        "attribute": ev.attribute,
                        "value": ev.value,
                        "pseudo": ev.pseudo,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def read_events_ndjson(path: str | Path) -> list[Event]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            events.append(
                Event(d["ts"], d["user"], d["device"], d["attribute"], d["value"], d.get("pseudo", False))
            )
    return events


# ---------------------------------------------------------------------------
# Synthetic trace generation


@dataclass(frozen=True)
class Cycle:
    """Step through labels in order, one per event (toggling when len==2)."""

    states: tuple[str, ...]


@dataclass(frozen=True)
class UniformChoice:
    states: tuple[str, ...]


@dataclass(frozen=True)
class RandomWalk:
    """Integer random walk: value += round(N(0, step)), clamped to range."""

    start: int
    step: float


Emission = Union[Cycle, UniformChoice, RandomWalk]


@dataclass(frozen=True)
class DeviceActivity:
    device: Device
    rates: tuple[float, ...]  # events per bucket (= per hour when n == 24)
    emission: Emission

    def __post_init__(self) -> None:
        if any(r < 0 for r in self.rates):
            raise ValueError(f"negative rate for device {self.device.id}")


@dataclass(frozen=True)
class UserProfile:
    user: str
    activities: tuple[DeviceActivity, ...]
    n: int = 24


def generate_synthetic(
    profiles: Sequence[UserProfile], days: int, seed: int
) -> dict[str, list[Event]]:
    """Per-user traces with Poisson per-bucket counts; deterministic under seed."""
    if days < 1:
        raise ValueError("days must be >= 1")
    root = np.random.SeedSequence(seed)
    user_seeds = root.spawn(len(profiles))
    out: dict[str, list[Event]] = {}
    for profile, user_seed in zip(profiles, user_seeds):
        device_seeds = user_seed.spawn(len(profile.activities))
        per_device: list[list[Event]] = []
        bucket_len = SECONDS_PER_DAY // profile.n
        for activity, dev_seed in zip(profile.activities, device_seeds):
            rng = np.random.default_rng(dev_seed)
            times: list[int] = []
            for day in range(days):
                counts = rng.poisson(np.asarray(activity.rates))
                for bucket, k in enumerate(counts):
                    if k:
                        base = day * SECONDS_PER_DAY + bucket * bucket_len
                        times.extend(int(base + t) for t in rng.integers(0, bucket_len, size=int(k)))
            times.sort()
            values = _emit_values(activity, len(times), rng)
            per_device.append(
                [
                    Event(ts, profile.user, activity.device.id, activity.device.attribute, v)
                    for ts, v in zip(times, values)
                ]
            )
        merged = [ev for dev_events in per_device for ev in dev_events]
        merged.sort(key=lambda e: (e.timestamp, e.device))
        out[profile.user] = merged
    return out


def _emit_values(activity: DeviceActivity, count: int, rng: np.random.Generator) -> list:
    emission = activity.emission
    if isinstance(emission, Cycle):
        return [emission.states[i % len(emission.states)] for i in range(count)]
    if isinstance(emission, UniformChoice):
        return [emission.states[int(i)] for i in rng.integers(len(emission.states), size=count)]
    kind = activity.device.kind
    assert isinstance(kind, Numeric)
    values = []
    current = emission.start
    for _ in range(count):
        current = int(np.clip(current + round(rng.normal(0.0, emission.step)), kind.min, kind.max))
        values.append(current)
    return values


# ---------------------------------------------------------------------------
# Profile JSON schema (documented in the README)


def profile_to_json(profile: UserProfile) -> dict:
    acts = []
    for act in profile.activities:
        kind = act.device.kind
        entry: dict = {
            "device": act.device.id,
            "attribute": act.device.attribute,
            "rates": list(act.rates),
        }
        if isinstance(kind, Discrete):
            entry["kind"] = {"type": "discrete", "states": list(kind.states)}
        else:
            entry["kind"] = {"type": "numeric", "min": kind.min, "max": kind.max, "unit": kind.unit}
        em = act.emission
        if isinstance(em, Cycle):
            entry["emission"] = {"type": "cycle", "states": list(em.states)}
        elif isinstance(em, UniformChoice):
            entry["emission"] = {"type": "choice", "states": list(em.states)}
        else:
            entry["emission"] = {"type": "walk", "start": em.start, "step": em.step}
        acts.append(entry)
    return {"user": profile.user, "n": profile.n, "activities": acts}


def profile_from_json(data: dict) -> UserProfile:
    activities = []
    for entry in data["activities"]:
        kind_spec = entry["kind"]
        if kind_spec["type"] == "discrete":
            kind: object = Discrete(tuple(kind_spec["states"]))
        else:
            kind = Numeric(kind_spec["min"], kind_spec["max"], kind_spec.get("unit", ""))
        device = Device(entry["device"], kind, entry["attribute"])
        em_spec = entry["emission"]
        if em_spec["type"] == "cycle":
            emission: Emission = Cycle(tuple(em_spec["states"]))
        elif em_spec["type"] == "choice":
            emission = UniformChoice(tuple(em_spec["states"]))
        else:
            emission = RandomWalk(em_spec["start"], em_spec["step"])
        activities.append(DeviceActivity(device, tuple(entry["rates"]), emission))
    return UserProfile(data["user"], tuple(activities), n=data.get("n", 24))
