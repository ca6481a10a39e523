"""Energy-to-carbon conversion with grid-specific emission factors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from wattrec.errors import ConfigError

# common grid factors, gCO2e per kWh
GERMANY_G_PER_KWH = 420.0
EU_AVERAGE_G_PER_KWH = 275.0


@dataclass(frozen=True)
class CarbonReport:
    emission_factor: float  # gCO2e/kWh
    grams_co2e: float


def carbon(energy, factor: float) -> CarbonReport:
    """grams = (E_wh / 1000) * factor; energy may be an EnergyResult or Wh."""
    if factor <= 0:
        raise ConfigError(f"emission factor must be positive, got {factor}")
    wh = getattr(energy, "e_experiment_wh", energy)
    return CarbonReport(factor, (wh / 1000.0) * factor)


def load_emission_factor(path: Union[str, Path]) -> float:
    """Read the emission factor from a monitor-settings JSON file."""
    raw = json.loads(Path(path).read_text())
    try:
        return float(raw["emission_factor_g_per_kwh"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: missing or invalid emission_factor_g_per_kwh") from exc
