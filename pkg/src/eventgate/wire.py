"""Wire format between the gateway (S) and the trigger-action platform (T).

Events travel as JSON objects {ts, user, device, attribute, value};
commands come back as {ts, user, device, command}. The schema is the one
thing both sides agree on, and it is identical for real and injected
events: nothing on the wire marks an event as pseudo. One batch (or one
command list) is serialized as a single JSON array, newline-delimited
when spoken over a socket.
"""

from __future__ import annotations

import json
from typing import Any

from .model import Command, Event

WireDict = dict[str, Any]

_EVENT_KEYS = ("ts", "user", "device", "attribute", "value")
_COMMAND_KEYS = ("ts", "user", "device", "command")


def event_to_wire(ev: Event) -> WireDict:
    return {
        "ts": ev.timestamp,
        "user": ev.user,
        "device": ev.device,
        "attribute": ev.attribute,
        "value": ev.value,
    }


def wire_to_event(item: WireDict) -> Event:
    return Event(
        timestamp=int(item["ts"]),
        user=item["user"],
        device=item["device"],
        attribute=item["attribute"],
        value=item["value"],
    )


def is_well_formed_event(item: Any) -> bool:
    if not isinstance(item, dict) or set(item) != set(_EVENT_KEYS):
        return False
    if not isinstance(item["ts"], int) or isinstance(item["ts"], bool) or item["ts"] < 0:
        return False
    for key in ("user", "device", "attribute"):
        if not isinstance(item[key], str) or not item[key]:
            return False
    value = item["value"]
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        return False
    return True


def command_to_wire(cmd: Command) -> WireDict:
    return {
        "ts": cmd.timestamp,
        "user": cmd.user,
        "device": cmd.device,
        "command": cmd.command,
    }


def wire_to_command(item: WireDict) -> Command:
    return Command(
        timestamp=int(item["ts"]),
        user=item["user"],
        device=item["device"],
        command=item["command"],
    )


def encode_batch(items: list[WireDict]) -> str:
    """One batch per line; compact separators keep the framing unambiguous."""
    return json.dumps(items, separators=(",", ":"))


def decode_batch(line: str) -> list[WireDict]:
    data = json.loads(line)
    if not isinstance(data, list):
        raise ValueError(f"expected a JSON array, got {type(data).__name__}")
    return data
