"""Background sampling sessions and the idle-baseline procedure.

A session polls its meter from a daemon thread at a fixed interval,
appending samples to rotated CSV logs under
``measurements/<device>/<experiment>/part-<n>.csv``.  Session energy is
the delta of the device's cumulative counter between the first and last
valid samples; nothing is ever integrated or interpolated.

Time is injectable: :class:`WallClock` for real runs,
:class:`SimulatedClock` to drive long sessions instantly in tests.
"""

from __future__ import annotations

import csv
import logging
import math
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Union

from wattrec.energy.meters import MeterConfig, PowerSample, create_meter, load_trace
from wattrec.errors import BaselineDriftError, ConfigError, MeterBusyError, UndefinedEnergyError

log = logging.getLogger(__name__)

CSV_COLUMNS = ("timestamp_iso", "power_w", "cumulative_wh", "missing_flag")


class WallClock:
    def now(self) -> float:
        return time.time()

    def wait(self, seconds: float, stop: threading.Event) -> bool:
        return stop.wait(seconds)


class SimulatedClock:
    """Advances instantly on wait; lets a 12-minute session run in tests."""

    def __init__(self, start: float = 0.0):
        self.t = start

    def now(self) -> float:
        return self.t

    def wait(self, seconds: float, stop: threading.Event) -> bool:
        if stop.is_set():
            return True
        self.t += seconds
        return stop.is_set()


@dataclass(frozen=True)
class EnergyResult:
    e_start_wh: float
    e_end_wh: float
    e_experiment_wh: float
    sample_count: int
    duration_s: float
    mean_power_w: float
    missing_count: int = 0


_active_devices: dict = {}
_registry_lock = threading.Lock()


def _isoformat(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat(timespec="milliseconds")


class MeasurementSession:
    """One metered experiment: a sampler thread plus rotated CSV logs."""

    def __init__(
        self,
        model: str,
        dataset: str,
        cfg: MeterConfig,
        base_dir: Union[str, Path] = "measurements",
        clock=None,
        meter=None,
        threaded: bool = True,
    ):
        self.cfg = cfg
        self.clock = clock or WallClock()
        self.meter = meter or create_meter(cfg, self.clock.now)
        self.device = cfg.device
        stamp = datetime.fromtimestamp(self.clock.now(), tz=timezone.utc)
        self.experiment_name = (
            f"EXPERIMENT_{model}_{dataset}_{stamp.strftime('%Y%m%d-%H%M%S')}"
        )
        self.directory = Path(base_dir) / self.device / self.experiment_name
        self.samples: List[PowerSample] = []
        self._threaded = threaded
        self._started = False
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._part = -1
        self._writer = None
        self._file = None
        self._part_started = 0.0
        self._last_written_ts = -math.inf

    def start(self) -> "MeasurementSession":
        with _registry_lock:
            if _active_devices.get(self.device) is not None:
                raise MeterBusyError(f"device {self.device!r} already has an active session")
            _active_devices[self.device] = self
        try:
            self.directory.mkdir(parents=True, exist_ok=False)
        except OSError:
            with _registry_lock:
                _active_devices.pop(self.device, None)
            raise
        self._rotate()
        self._started = True
        if self._threaded:
            self._thread = threading.Thread(target=self._run, daemon=True,
                                            name=f"sampler-{self.device}")
            self._thread.start()
        return self

    def run_for(self, duration_s: float) -> None:
        """Drive the sampling loop synchronously (non-threaded sessions).

        Used with :class:`SimulatedClock` to exercise long sessions
        instantly; each iteration polls once and advances the clock by the
        poll interval.
        """
        if self._threaded:
            raise ConfigError("run_for is only valid for threaded=False sessions")
        started = self.clock.now()
        while self.clock.now() - started < duration_s:
            self._record(self.meter.poll())
            self.clock.wait(self.cfg.poll_interval_s, self._stop)

    def _rotate(self):
        if self._file:
            self._file.close()
        self._part += 1
        path = self.directory / f"part-{self._part:04d}.csv"
        self._file = open(path, "w", newline="")
        self._writer = csv.writer(self._file)
        self._writer.writerow(CSV_COLUMNS)
        self._part_started = self.clock.now()

    def _record(self, sample: PowerSample):
        if self.clock.now() - self._part_started >= self.cfg.rotation_interval_s:
            self._rotate()
        if sample.missing:
            self._writer.writerow([_isoformat(sample.timestamp), "", "", 1])
        else:
            if sample.timestamp <= self._last_written_ts:
                return  # drained trace repeats its last row; log each sample once
            self._last_written_ts = sample.timestamp
            self._writer.writerow(
                [_isoformat(sample.timestamp), repr(sample.power_w),
                 repr(sample.cumulative_wh), 0]
            )
        self.samples.append(sample)

    def _run(self):
        while True:
            self._record(self.meter.poll())
            if self.clock.wait(self.cfg.poll_interval_s, self._stop):
                return

    def stop(self) -> EnergyResult:
        if not self._started:
            raise ConfigError("session was never started")
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self._file.close()
        with _registry_lock:
            _active_devices.pop(self.device, None)

        valid = [s for s in self.samples if not s.missing]
        if len(valid) < 2:
            raise UndefinedEnergyError(
                f"{self.experiment_name}: only {len(valid)} valid samples, "
                "energy delta is undefined"
            )
        first, last = valid[0], valid[-1]
        energy = last.cumulative_wh - first.cumulative_wh
        if energy < 0:
            raise UndefinedEnergyError(
                f"{self.experiment_name}: cumulative counter decreased "
                f"({first.cumulative_wh} -> {last.cumulative_wh})"
            )
        return EnergyResult(
            e_start_wh=first.cumulative_wh,
            e_end_wh=last.cumulative_wh,
            e_experiment_wh=energy,
            sample_count=len(valid),
            duration_s=last.timestamp - first.timestamp,
            mean_power_w=sum(s.power_w for s in valid) / len(valid),
            missing_count=len(self.samples) - len(valid),
        )


def start_session(
    model: str,
    dataset: str,
    cfg: MeterConfig,
    base_dir: Union[str, Path] = "measurements",
    clock=None,
    meter=None,
    threaded: bool = True,
) -> MeasurementSession:
    return MeasurementSession(model, dataset, cfg, base_dir, clock, meter, threaded).start()


def stop_session(session: MeasurementSession) -> EnergyResult:
    return session.stop()


def read_session_samples(directory: Union[str, Path]) -> List[PowerSample]:
    """Concatenate all rotated CSV parts of a session, in order."""
    parts = sorted(Path(directory).glob("part-*.csv"))
    samples: List[PowerSample] = []
    for part in parts:
        samples.extend(load_trace(part))
    return samples


def measure_idle_baseline(
    cfg: MeterConfig,
    duration_s: float = 600.0,
    base_dir: Union[str, Path] = "measurements",
    clock=None,
) -> float:
    """Mean power over an idle period with logging enabled."""
    if duration_s <= 0:
        raise ConfigError("baseline duration must be positive")
    clock = clock or WallClock()
    synchronous = isinstance(clock, SimulatedClock)
    session = start_session("idle", "baseline", cfg, base_dir, clock,
                            threaded=not synchronous)
    if synchronous:
        session.run_for(duration_s)
    else:
        started = clock.now()
        pause = threading.Event()
        while clock.now() - started < duration_s:
            pause.wait(min(1.0, duration_s / 10))
    result = session.stop()
    return result.mean_power_w


def check_baseline(measured_w: float, expected_w: float, tolerance_w: float) -> float:
    """Refuse to proceed when idle power drifted out of the accepted band."""
    if abs(measured_w - expected_w) > tolerance_w:
        raise BaselineDriftError(
            f"idle baseline {measured_w:.1f} W outside "
            f"{expected_w:.1f} +/- {tolerance_w:.1f} W"
        )
    return measured_w
