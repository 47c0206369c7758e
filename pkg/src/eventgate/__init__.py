"""eventgate: a privacy gateway for smart-home event streams.

The gateway sits between a smart-home platform and a stateless
trigger-action service. It drops events no installed rule needs,
randomizes surviving numeric readings within their trigger sub-range,
and injects indistinguishable pseudo-events so the per-hour frequency
the remote service observes carries no behavioral signal. The package
also ships the remote-side simulator and the adversary evaluation
harness (correlation, KNN/SVM re-identification) used to measure the
protection.
"""

from .catalog import (
    ActionSet,
    Applet,
    AppletParseError,
    Catalog,
    Comparator,
    ConsistencyError,
    DiscreteTrigger,
    NumericTrigger,
    load_applets,
    merge_applets,
    parse_description,
    render_description,
)
from .filtering import Drop, DropReason, FilterStats, Forward, filter_event, filter_trace
from .fuzzing import (
    FuzzState,
    Gaussian,
    PseudoLedger,
    PseudoPool,
    Uniform,
    bucket_of,
    build_target,
    estimate_pattern,
    exchange_round,
    maybe_pseudo,
    refresh_cycle,
    run_exchange,
)
from .model import (
    Command,
    Device,
    DeviceRegistry,
    DeviceRole,
    Discrete,
    DomainError,
    Event,
    Numeric,
    StateRegistry,
    UnknownDeviceError,
)
from .pipeline import MODES, RunResult, run_pipeline
from .ta import RemoteTA, TAPlatform, TAServer, adversary_snapshot

__version__ = "0.1.0"
