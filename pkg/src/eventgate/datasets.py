"""Committed synthetic datasets for the evaluation experiments.

Two builders:

* `two_user_dataset` - two residents in apartments with an identical
  device layout and identical rule sets, differing only in the shape of
  their daily routine. The routine shapes share the same peak bucket and
  peak height (so the uniform and Gaussian cover targets coincide across
  users) but differ in evening-peak width, morning activity, and volume;
  the perturbation constants are calibrated so the two mean filtered
  pattern vectors correlate at about 0.93.

* `hh104_like_dataset` - a single-resident home at the scale of a
  two-month CASAS recording (26 devices, ~126k events) with the seeded
  rule assignment used for the record-reduction experiment: one rule per
  switch, trigger devices sampled without replacement from the sensors,
  motion firing on "active", contacts on "open", temperature sensors
  above their whole-trace mean.

All generation is seeded and bit-reproducible; the committed default
seeds are the ones the shipped experiment configs reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import Applet, Catalog, load_applets, merge_applets, parse_description
from .model import Device, DeviceRegistry, Discrete, Event, Numeric
from .traceio import (
    Cycle,
    DeviceActivity,
    RandomWalk,
    UniformChoice,
    UserProfile,
    generate_synthetic,
    round_half_up,
)

# Committed generation seeds; the evaluation configs and the acceptance
# suite reference exactly these.
TWO_USER_TRACE_SEED = 20110615
HH104_LIKE_TRACE_SEED = 104
HH104_LIKE_ASSIGNMENT_SEED = 11

# Calibrated two-user routine constants (see calibrate_evening_width):
# the two residents share the peak hour, peak height, and the sharp
# after-peak falloff (everyone goes to bed), and differ in how early the
# evening activity ramps up and how busy the morning is. These widths
# put the mean filtered-vector correlation at ~0.93 for the committed
# trace seed.
EVENING_CENTER = 19
EVENING_AMPLITUDE = 16.0
EVENING_WIDTH_A = 1.6
EVENING_WIDTH_B = 2.35
EVENING_WIDTH_RIGHT = 0.8
MORNING_CENTER = 8
MORNING_WIDTH = 1.3
MORNING_AMPLITUDE_A = 6.4
MORNING_AMPLITUDE_B = 3.2
BASE_RATE = 1.0
DOOR_RATE_SCALE = 3.0  # door events per bucket = routine shape * this


def _bump(center: float, width: float, amplitude: float, n: int = 24) -> np.ndarray:
    idx = np.arange(n)
    return amplitude * np.exp(-((idx - center) ** 2) / (2 * width**2))


def _asym_bump(
    center: float, width_left: float, width_right: float, amplitude: float, n: int = 24
) -> np.ndarray:
    idx = np.arange(n)
    width = np.where(idx <= center, width_left, width_right)
    return amplitude * np.exp(-((idx - center) ** 2) / (2 * width**2))


def routine_shape(
    evening_width: float, morning_amplitude: float, n: int = 24
) -> np.ndarray:
    """Daily door-activity rate vector: an evening peak that ramps up with
    user-specific width and drops off sharply at bedtime, plus a morning
    bump and a base level."""
    return (
        BASE_RATE
        + _asym_bump(EVENING_CENTER, evening_width, EVENING_WIDTH_RIGHT, EVENING_AMPLITUDE, n)
        + _bump(MORNING_CENTER, MORNING_WIDTH, morning_amplitude, n)
    )


def apartment_devices() -> DeviceRegistry:
    reg = DeviceRegistry()
    reg.add(Device("door_main", Discrete(("open", "closed")), "contact"))
    reg.add(Device("motion_bath", Discrete(("active", "inactive")), "motion"))
    reg.add(Device("light_bath", Discrete(("on", "off")), "switch"))
    reg.add(Device("temp_living", Numeric(-20, 80, unit="C"), "temperature"))
    reg.add(Device("heater", Discrete(("on", "off")), "switch"))
    reg.add(Device("motion_hall", Discrete(("active", "inactive")), "motion"))
    reg.add(Device("humidity_bath", Numeric(0, 100, unit="%"), "humidity"))
    return reg


APARTMENT_RULES = (
    "If contact is open by door_main, then log front-door-visit",
    "If motion is active by motion_bath, then Switch on light_bath",
    "If temperature is above 28 by temp_living, then Switch on heater",
)


def apartment_catalog() -> Catalog:
    devices = apartment_devices()
    applets = [
        parse_description(sentence, devices, applet_id=f"a{i}")
        for i, sentence in enumerate(APARTMENT_RULES, start=1)
    ]
    return merge_applets(applets, devices)


def _apartment_profile(user: str, evening_width: float, morning_amplitude: float) -> UserProfile:
    devices = apartment_devices()
    shape = routine_shape(evening_width, morning_amplitude)
    # The door carries the user-specific routine; every other device runs
    # the same auxiliary schedule for both residents, so the cover-target
    # peak (max of the filtered pattern) matches across users.
    aux_motion = tuple([0.6] * 24)
    aux_switch = tuple([0.15] * 24)
    aux_temp = tuple([0.8] * 24)
    idle_motion = tuple([1.2] * 24)
    idle_humidity = tuple([0.5] * 24)
    return UserProfile(
        user,
        (
            DeviceActivity(
                devices.require("door_main"),
                tuple(shape * DOOR_RATE_SCALE),
                UniformChoice(("open", "closed")),
            ),
            DeviceActivity(devices.require("motion_bath"), aux_motion, Cycle(("active", "inactive"))),
            DeviceActivity(devices.require("light_bath"), aux_switch, Cycle(("off", "on"))),
            DeviceActivity(devices.require("temp_living"), aux_temp, RandomWalk(26, 0.8)),
            DeviceActivity(devices.require("heater"), aux_switch, Cycle(("off", "on"))),
            DeviceActivity(devices.require("motion_hall"), idle_motion, Cycle(("active", "inactive"))),
            DeviceActivity(devices.require("humidity_bath"), idle_humidity, RandomWalk(55, 2.0)),
        ),
    )


def two_user_profiles(
    evening_width_b: float = EVENING_WIDTH_B,
    morning_amplitude_b: float = MORNING_AMPLITUDE_B,
) -> tuple[UserProfile, UserProfile]:
    return (
        _apartment_profile("alice", EVENING_WIDTH_A, MORNING_AMPLITUDE_A),
        _apartment_profile("bob", evening_width_b, morning_amplitude_b),
    )


def two_user_dataset(
    days: int = 100, seed: int = TWO_USER_TRACE_SEED
) -> tuple[Catalog, dict[str, list[Event]]]:
    catalog = apartment_catalog()
    traces = generate_synthetic(two_user_profiles(), days, seed)
    return catalog, traces


# ---------------------------------------------------------------------------
# CASAS-scale single-resident home


def hh104_like_devices() -> DeviceRegistry:
    reg = DeviceRegistry()
    for i in range(1, 14):
        reg.add(Device(f"M{i:03d}", Discrete(("active", "inactive")), "motion"))
    for i in range(1, 5):
        reg.add(Device(f"D{i:03d}", Discrete(("open", "closed")), "contact"))
    for i in range(1, 4):
        reg.add(Device(f"T{i:03d}", Numeric(0, 50, unit="C"), "temperature"))
    for i in range(1, 7):
        reg.add(Device(f"L{i:03d}", Discrete(("on", "off")), "switch"))
    return reg


def hh104_like_trace(
    days: int = 61, seed: int = HH104_LIKE_TRACE_SEED
) -> tuple[DeviceRegistry, list[Event]]:
    """~2k events/day across 26 devices, single resident."""
    devices = hh104_like_devices()
    # Motion follows a waking-hours shape; everything else runs flat.
    day_shape = BASE_RATE + _bump(19, 3.0, 7.0) + _bump(8, 2.0, 4.5)
    day_shape = day_shape / day_shape.mean()  # mean 1.0, peaks ~3x
    activities = []
    for i in range(1, 14):
        scale = 100 / 24 * (0.7 + 0.05 * i)  # sensors differ in traffic volume
        activities.append(
            DeviceActivity(
                devices.require(f"M{i:03d}"), tuple(day_shape * scale), Cycle(("active", "inactive"))
            )
        )
    for i in range(1, 5):
        activities.append(
            DeviceActivity(
                devices.require(f"D{i:03d}"), tuple(day_shape * 20 / 24), Cycle(("open", "closed"))
            )
        )
    for i in range(1, 4):
        activities.append(
            DeviceActivity(
                devices.require(f"T{i:03d}"), tuple([200 / 24] * 24), RandomWalk(22 + 2 * i, 0.5)
            )
        )
    for i in range(1, 7):
        activities.append(
            DeviceActivity(
                devices.require(f"L{i:03d}"), tuple(day_shape * 14 / 24), Cycle(("on", "off"))
            )
        )
    profile = UserProfile("resident", tuple(activities))
    traces = generate_synthetic([profile], days, seed)
    return devices, traces["resident"]


def casas_applet_assignment(
    events: list[Event], devices: DeviceRegistry, seed: int = HH104_LIKE_ASSIGNMENT_SEED
) -> list[Applet]:
    """Deterministic seeded version of the record-reduction rule setup.

    One rule per switch; trigger devices are drawn without replacement
    from the motion/contact/temperature sensors. Motion rules fire on
    "active", contact rules on "open", temperature rules above that
    sensor's whole-trace mean reading.
    """
    switches = sorted(d.id for d in devices if d.attribute == "switch")
    pool = sorted(d.id for d in devices if d.attribute in ("motion", "contact", "temperature"))
    if len(pool) < len(switches):
        raise ValueError("not enough trigger candidates for one rule per switch")
    rng = np.random.default_rng(seed)
    chosen = [pool[i] for i in rng.choice(len(pool), size=len(switches), replace=False)]

    temp_sums: dict[str, tuple[float, int]] = {}
    for ev in events:
        if isinstance(ev.value, int):
            total, count = temp_sums.get(ev.device, (0.0, 0))
            temp_sums[ev.device] = (total + ev.value, count + 1)

    applets = []
    for idx, (switch, trigger) in enumerate(zip(switches, chosen), start=1):
        attribute = devices.require(trigger).attribute
        if attribute == "motion":
            sentence = f"If motion is active by {trigger}, then Switch on {switch}"
        elif attribute == "contact":
            sentence = f"If contact is open by {trigger}, then Switch on {switch}"
        else:
            total, count = temp_sums.get(trigger, (0.0, 0))
            if count == 0:
                raise ValueError(f"no readings to average for {trigger}")
            mean = round_half_up(total / count)
            sentence = f"If temperature is above {mean} by {trigger}, then Switch on {switch}"
        applets.append(parse_description(sentence, devices, applet_id=f"a{idx}"))
    return applets


def hh104_like_dataset(
    days: int = 61,
    trace_seed: int = HH104_LIKE_TRACE_SEED,
    assignment_seed: int = HH104_LIKE_ASSIGNMENT_SEED,
) -> tuple[Catalog, list[Event]]:
    devices, events = hh104_like_trace(days, trace_seed)
    applets = casas_applet_assignment(events, devices, assignment_seed)
    return merge_applets(applets, devices), events
