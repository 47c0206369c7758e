"""Core domain types: devices, events, commands, and the live state registry.

Everything downstream (rule catalog, filter, fuzzer, platform simulator)
shares these types. Values are plain Python: a discrete state is a string
label, a numeric reading is an int. Timestamps are integer seconds from
the trace epoch; sub-second resolution in source logs is truncated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Union

SECONDS_PER_DAY = 86400

Value = Union[str, int]


class DomainError(ValueError):
    """A value fell outside the domain defined by a device's kind."""


class UnknownDeviceError(KeyError):
    """A device id that is not present in the device registry."""


@dataclass(frozen=True)
class Discrete:
    """Device with a fixed, ordered set of at least two named states."""

    states: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.states) < 2:
            raise DomainError(f"discrete device needs >= 2 states, got {self.states!r}")
        if len(set(self.states)) != len(self.states):
            raise DomainError(f"duplicate states in {self.states!r}")

    def contains(self, value: Value) -> bool:
        return isinstance(value, str) and value in self.states


@dataclass(frozen=True)
class Numeric:
    """Device reporting integer readings in the inclusive range [min, max]."""

    min: int
    max: int
    unit: str = ""

    def __post_init__(self) -> None:
        if self.min >= self.max:
            raise DomainError(f"numeric range must satisfy min < max, got [{self.min}, {self.max}]")

    def contains(self, value: Value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool) and self.min <= value <= self.max


DeviceKind = Union[Discrete, Numeric]


class DeviceRole(Enum):
    """How a device relates to the installed rule set.

    TRIGGER: fires at least one rule (kept even if it is also some
    rule's actuator). ACTUATOR: appears only as an action target.
    IDLE: appears in no rule at all.
    """

    TRIGGER = "trigger"
    ACTUATOR = "actuator"
    IDLE = "idle"


@dataclass(frozen=True)
class Device:
    id: str
    kind: DeviceKind
    attribute: str = "state"

    def __post_init__(self) -> None:
        if not self.id:
            raise DomainError("device id must be non-empty")


@dataclass
class DeviceRegistry:
    """All devices known to one installation, keyed by id."""

    devices: dict[str, Device] = field(default_factory=dict)

    def add(self, device: Device) -> None:
        if device.id in self.devices:
            raise DomainError(f"duplicate device id {device.id!r}")
        self.devices[device.id] = device

    def __contains__(self, device_id: str) -> bool:
        return device_id in self.devices

    def __iter__(self):
        return iter(self.devices.values())

    def __len__(self) -> int:
        return len(self.devices)

    def get(self, device_id: str) -> Device | None:
        return self.devices.get(device_id)

    def require(self, device_id: str) -> Device:
        try:
            return self.devices[device_id]
        except KeyError:
            raise UnknownDeviceError(device_id) from None

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "DeviceRegistry":
        """Parse the device definition format, one record per line:

            <device_id> discrete states=a,b,c [attr=<label>]
            <device_id> numeric range=<min>..<max> [unit=<label>] [attr=<label>]

        Blank lines and `#` comments are skipped.
        """
        reg = cls()
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) < 3:
                raise DomainError(f"line {lineno}: expected 'id kind spec', got {line!r}")
            device_id, kind_name, *rest = tokens
            opts: dict[str, str] = {}
            for tok in rest:
                if "=" not in tok:
                    raise DomainError(f"line {lineno}: bad token {tok!r}")
                key, val = tok.split("=", 1)
                opts[key] = val
            attribute = opts.pop("attr", "state")
            if kind_name == "discrete":
                spec = opts.pop("states", None)
                if spec is None:
                    raise DomainError(f"line {lineno}: discrete device needs states=...")
                kind: DeviceKind = Discrete(tuple(s for s in spec.split(",") if s))
            elif kind_name == "numeric":
                spec = opts.pop("range", None)
                if spec is None or ".." not in spec:
                    raise DomainError(f"line {lineno}: numeric device needs range=min..max")
                lo_s, hi_s = spec.split("..", 1)
                kind = Numeric(int(lo_s), int(hi_s), unit=opts.pop("unit", ""))
            else:
                raise DomainError(f"line {lineno}: unknown kind {kind_name!r}")
            if opts:
                raise DomainError(f"line {lineno}: unknown options {sorted(opts)!r}")
            reg.add(Device(device_id, kind, attribute))
        return reg

    @classmethod
    def load(cls, path: str | Path) -> "DeviceRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_lines(fh)

    def dump_lines(self) -> list[str]:
        out = []
        for dev in self.devices.values():
            if isinstance(dev.kind, Discrete):
                spec = "discrete states=" + ",".join(dev.kind.states)
            else:
                spec = f"numeric range={dev.kind.min}..{dev.kind.max}"
                if dev.kind.unit:
                    spec += f" unit={dev.kind.unit}"
            out.append(f"{dev.id} {spec} attr={dev.attribute}")
        return out


@dataclass(frozen=True, slots=True)
class Event:
    """One device state report.

    `pseudo` marks gateway-injected cover events; it exists only inside
    the gateway and never appears on the wire. Trace ingestion always
    produces pseudo=False.
    """

    timestamp: int
    user: str
    device: str
    attribute: str
    value: Value
    pseudo: bool = False


@dataclass(frozen=True, slots=True)
class Command:
    """A platform reply addressed to an actuator (e.g. "on", "locked")."""

    timestamp: int
    user: str
    device: str
    command: str


class StateRegistry:
    """Live (user, device) -> value map consulted by the filter.

    Unknown devices read as None, which callers must treat as "state does
    not match anything" (never suppress on unknown state). Applying a
    command writes the command label as the actuator's new state; writes
    are validated against the device kind and are idempotent.
    """

    def __init__(self, devices: DeviceRegistry):
        self._devices = devices
        self._state: dict[tuple[str, str], Value] = {}

    def get(self, user: str, device: str) -> Value | None:
        return self._state.get((user, device))

    def apply(self, item: Event | Command) -> bool:
        """Record a state change; returns True iff the stored value changed."""
        device = self._devices.require(item.device)
        if isinstance(item, Command):
            if not isinstance(device.kind, Discrete):
                raise DomainError(f"actuator {item.device!r} is not a discrete device")
            value: Value = item.command
        else:
            value = item.value
        if not device.kind.contains(value):
            raise DomainError(f"value {value!r} outside domain of device {item.device!r}")
        key = (item.user, item.device)
        changed = self._state.get(key) != value
        self._state[key] = value
        return changed

    def snapshot(self) -> dict[tuple[str, str], Value]:
        return dict(self._state)

    def __len__(self) -> int:
        return len(self._state)
