"""Power meter abstraction: a smart-plug HTTP client and two mocks.

Every meter answers ``poll()`` with a :class:`PowerSample` carrying the
instantaneous draw and the device's cumulative watt-hour counter.  A
failed poll yields a sample flagged missing rather than an exception, so
sampling sessions survive transient outages.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import requests

from wattrec.errors import ConfigError

log = logging.getLogger(__name__)

METER_KINDS = ("shelly-gen2", "mock-constant", "mock-trace")


@dataclass(frozen=True)
class PowerSample:
    timestamp: float  # unix seconds, millisecond precision
    power_w: float
    cumulative_wh: float
    missing: bool = False


@dataclass(frozen=True)
class MeterConfig:
    kind: str = "mock-constant"
    endpoint: Optional[str] = None  # host[:port] for shelly
    poll_interval_s: float = 0.5
    rotation_interval_s: float = 300.0
    constant_watts: float = 71.2
    trace_path: Optional[str] = None
    switch_id: int = 0
    timeout_s: float = 2.0
    device_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in METER_KINDS:
            raise ConfigError(f"unknown meter kind {self.kind!r}")
        if self.poll_interval_s <= 0:
            raise ConfigError("poll_interval_s must be positive")
        if self.kind == "shelly-gen2" and not self.endpoint:
            raise ConfigError("shelly-gen2 meter needs an endpoint")
        if self.kind == "mock-trace" and not self.trace_path:
            raise ConfigError("mock-trace meter needs a trace_path")

    @property
    def device(self) -> str:
        if self.device_id:
            return self.device_id
        if self.kind == "shelly-gen2":
            return self.endpoint.replace(":", "-")
        return self.kind

    @classmethod
    def from_dict(cls, raw: dict) -> "MeterConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown meter settings: {sorted(unknown)}")
        return cls(**raw)


class MockConstantMeter:
    """Reports a fixed power draw, integrating energy at poll cadence."""

    def __init__(self, watts: float, clock: Callable[[], float] = time.time,
                 start_wh: float = 0.0):
        self.watts = watts
        self._clock = clock
        self._cumulative = start_wh
        self._last_ts: Optional[float] = None

    def poll(self) -> PowerSample:
        now = self._clock()
        if self._last_ts is not None:
            self._cumulative += self.watts * (now - self._last_ts) / 3600.0
        self._last_ts = now
        return PowerSample(now, self.watts, self._cumulative)


class MockTraceMeter:
    """Replays recorded samples verbatim; repeats the final row when drained."""

    def __init__(self, samples: Union[List[PowerSample], str, Path]):
        if isinstance(samples, (str, Path)):
            samples = load_trace(samples)
        if not samples:
            raise ConfigError("mock trace must contain at least one sample")
        self._samples = list(samples)
        self._pos = 0

    def poll(self) -> PowerSample:
        sample = self._samples[min(self._pos, len(self._samples) - 1)]
        self._pos += 1
        return sample


class ShellyGen2Meter:
    """Client for the Shelly Gen-2 RPC status endpoint.

    Maps the switch status fields (``apower`` watts, ``aenergy.total``
    lifetime watt-hours) onto a :class:`PowerSample`.  Timeouts and
    transport failures produce missing samples.
    """

    def __init__(self, endpoint: str, switch_id: int = 0, timeout_s: float = 2.0,
                 clock: Callable[[], float] = time.time):
        self.url = f"http://{endpoint}/rpc/Switch.GetStatus"
        self.switch_id = switch_id
        self.timeout_s = timeout_s
        self._clock = clock

    def poll(self) -> PowerSample:
        now = self._clock()
        try:
            resp = requests.get(
                self.url, params={"id": self.switch_id}, timeout=self.timeout_s
            )
            resp.raise_for_status()
            status = resp.json()
            return PowerSample(now, float(status["apower"]),
                               float(status["aenergy"]["total"]))
        except (requests.RequestException, KeyError, TypeError, ValueError) as exc:
            log.warning("meter poll failed: %s", exc)
            return PowerSample(now, math.nan, math.nan, missing=True)


def create_meter(cfg: MeterConfig, clock: Callable[[], float] = time.time):
    if cfg.kind == "mock-constant":
        return MockConstantMeter(cfg.constant_watts, clock)
    if cfg.kind == "mock-trace":
        return MockTraceMeter(cfg.trace_path)
    return ShellyGen2Meter(cfg.endpoint, cfg.switch_id, cfg.timeout_s, clock)


def load_trace(path: Union[str, Path]) -> List[PowerSample]:
    """Read samples from a measurement CSV (same columns the sessions write)."""
    samples = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            missing = row["missing_flag"] in ("1", "true", "True")
            samples.append(
                PowerSample(
                    _parse_iso(row["timestamp_iso"]),
                    math.nan if missing else float(row["power_w"]),
                    math.nan if missing else float(row["cumulative_wh"]),
                    missing,
                )
            )
    return samples


def _parse_iso(text: str) -> float:
    from datetime import datetime

    return datetime.fromisoformat(text).timestamp()
