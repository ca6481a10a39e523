"""Power metering, measurement sessions, and carbon accounting."""

from wattrec.energy.carbon import CarbonReport, carbon, load_emission_factor
from wattrec.energy.meters import (
    MeterConfig,
    MockConstantMeter,
    MockTraceMeter,
    PowerSample,
    ShellyGen2Meter,
    create_meter,
)
from wattrec.energy.session import (
    EnergyResult,
    MeasurementSession,
    SimulatedClock,
    WallClock,
    check_baseline,
    measure_idle_baseline,
    read_session_samples,
    start_session,
    stop_session,
)

__all__ = [
    "CarbonReport",
    "carbon",
    "load_emission_factor",
    "MeterConfig",
    "MockConstantMeter",
    "MockTraceMeter",
    "PowerSample",
    "ShellyGen2Meter",
    "create_meter",
    "EnergyResult",
    "MeasurementSession",
    "SimulatedClock",
    "WallClock",
    "check_baseline",
    "measure_idle_baseline",
    "read_session_samples",
    "start_session",
    "stop_session",
]
