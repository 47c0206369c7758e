"""Simulated stateless trigger-action platform (the remote side, T).

T holds its own copy of the rule definitions and answers each uploaded
batch with the commands those rules produce, scanning the raw applet
list per event (deliberately not sharing the gateway's merged tables, so
the two sides check each other). It is honest but curious: functionality
is correct, and every wire event it ever sees is appended to an
adversary log for the evaluation harness.

The platform can also run as a standalone process over a local TCP
socket speaking newline-delimited JSON (one event batch in, one command
list out per line).
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .catalog import Applet, Comparator, DiscreteTrigger, NumericTrigger
from .model import SECONDS_PER_DAY, DeviceRegistry, Discrete, Numeric
from .wire import WireDict, decode_batch, encode_batch, is_well_formed_event

log = logging.getLogger(__name__)


def value_triggers(applet: Applet, device: str, value) -> bool:
    """Does one wire event (device, value) satisfy an applet's trigger?"""
    if applet.trigger_device != device:
        return False
    trig = applet.trigger
    if isinstance(trig, DiscreteTrigger):
        return value == trig.value
    if isinstance(value, bool) or not isinstance(value, int):
        return False
    if trig.comparator is Comparator.ABOVE:
        return value > trig.threshold
    return value < trig.threshold


class TAPlatform:
    """Stateless rule evaluator plus append-only adversary log."""

    def __init__(self, applets: Iterable[Applet], devices: DeviceRegistry):
        self.applets = tuple(applets)
        self.devices = devices
        self.log: list[WireDict] = []
        self.external_actions: list[tuple[int, str, str]] = []  # (ts, user, action)

    def evaluate_batch(self, batch: Sequence[WireDict]) -> list[WireDict]:
        """Reply to one uploaded batch with the full command list.

        Output depends only on the batch and the rule set, never on
        history; the log is write-only here. Malformed items are skipped
        with a warning instead of failing the whole batch.
        """
        commands: list[WireDict] = []
        for item in batch:
            if not is_well_formed_event(item):
                log.warning("skipping malformed wire event: %r", item)
                continue
            self.log.append(item)
            for applet in self.applets:
                if not value_triggers(applet, item["device"], item["value"]):
                    continue
                if applet.actuator is not None:
                    commands.append(
                        {
                            "ts": item["ts"],
                            "user": item["user"],
                            "device": applet.actuator,
                            "command": applet.csv,
                        }
                    )
                else:
                    self.external_actions.append(
                        (item["ts"], item["user"], applet.external_action)
                    )
        return commands


# ---------------------------------------------------------------------------
# Adversary-side statistics (computed from the wire log only)


def log_day_span(wire_log: Sequence[WireDict]) -> int:
    if not wire_log:
        return 0
    return max(item["ts"] for item in wire_log) // SECONDS_PER_DAY + 1


def adversary_snapshot(
    wire_log: Sequence[WireDict], n: int = 24, days: int | None = None
) -> dict[str, np.ndarray]:
    """Per-user mean events per time-of-day bucket per day, from T's view."""
    if days is None:
        days = log_day_span(wire_log)
    if days <= 0:
        raise ValueError("empty adversary log")
    vectors: dict[str, np.ndarray] = {}
    for item in wire_log:
        vec = vectors.setdefault(item["user"], np.zeros(n))
        vec[(item["ts"] % SECONDS_PER_DAY) * n // SECONDS_PER_DAY] += 1
    return {user: vec / days for user, vec in vectors.items()}


def adversary_daily_vectors(
    wire_log: Sequence[WireDict], n: int = 24, days: int | None = None
) -> dict[str, np.ndarray]:
    """Per-user (days, n) count matrices; days with no events stay zero."""
    if days is None:
        days = log_day_span(wire_log)
    out: dict[str, np.ndarray] = {}
    for item in wire_log:
        mat = out.setdefault(item["user"], np.zeros((days, n)))
        day, tod = divmod(item["ts"], SECONDS_PER_DAY)
        if day < days:
            mat[day, tod * n // SECONDS_PER_DAY] += 1
    return out


# ---------------------------------------------------------------------------
# Socket transport (newline-delimited JSON, one batch/reply per line)


class _TAHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        platform: TAPlatform = self.server.platform  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            try:
                batch = decode_batch(line)
            except ValueError as exc:
                log.warning("bad request line: %s", exc)
                self.wfile.write(b"[]\n")
                continue
            commands = platform.evaluate_batch(batch)
            self.wfile.write((encode_batch(commands) + "\n").encode("utf-8"))


class TAServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, platform: TAPlatform, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _TAHandler)
        self.platform = platform

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class RemoteTA:
    """Client handle with the same evaluate_batch surface as TAPlatform."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rwb")

    def evaluate_batch(self, batch: Sequence[WireDict]) -> list[WireDict]:
        self._file.write((encode_batch(list(batch)) + "\n").encode("utf-8"))
        self._file.flush()
        reply = self._file.readline()
        if not reply:
            raise ConnectionError("platform closed the connection")
        return decode_batch(reply.decode("utf-8"))

    def close(self) -> None:
        self._file.close()
        self._sock.close()

    def __enter__(self) -> "RemoteTA":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
