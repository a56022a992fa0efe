"""Steerable antenna model, beam grid, link budget, and MCS selection.

The base-station pattern is a parametric Gaussian main lobe without
significant side lobes: gain rolls off quadratically in half-power
beamwidths and clamps at a configurable floor below the peak. Steering is
horizontal only; the elevation boresight stays at 0 degrees.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle_deg

THERMAL_NOISE_DBM_PER_HZ = -174.0

# Single-carrier PHY net data rates [Mbps] for the 12 mandatory 60 GHz WLAN
# modulation and coding schemes at the native 1760 MHz chip rate.
SC_PHY_RATES_1760MHZ = (385.0, 770.0, 962.5, 1155.0, 1251.25, 1540.0,
                        1925.0, 2310.0, 2502.5, 3080.0, 3850.0, 4620.0)


@dataclass(frozen=True)
class AntennaPattern:
    """Parametric steerable beam: Gaussian main lobe, floored side level."""

    max_gain_dbi: float
    hpbw_az_deg: float
    hpbw_el_deg: float | None = None
    floor_db: float = 40.0
    steering_resolution_deg: float | None = None

    def __post_init__(self):
        if self.hpbw_az_deg <= 0:
            raise ValueError("hpbw_az_deg must be > 0")
        if self.hpbw_el_deg is None:
            object.__setattr__(self, "hpbw_el_deg", self.hpbw_az_deg)
        if self.hpbw_el_deg <= 0:
            raise ValueError("hpbw_el_deg must be > 0")
        if self.floor_db <= 0:
            raise ValueError("floor_db must be > 0")
        if self.steering_resolution_deg is None:
            object.__setattr__(self, "steering_resolution_deg", self.hpbw_az_deg / 2.0)
        if self.steering_resolution_deg <= 0:
            raise ValueError("steering_resolution_deg must be > 0")


# The two measured-antenna presets used throughout: a 22 degree HPBW horn
# steered on an 11 degree grid, and a narrower 15 degree horn on a 6 degree
# grid. Transmit power is derived from the EIRP cap, so the higher-gain
# antenna transmits less.
PATTERN_22DEG = AntennaPattern(max_gain_dbi=18.5, hpbw_az_deg=22.0,
                               steering_resolution_deg=11.0)
PATTERN_15DEG = AntennaPattern(max_gain_dbi=21.9, hpbw_az_deg=15.0,
                               steering_resolution_deg=6.0)


@dataclass(frozen=True)
class LinkBudget:
    bandwidth_mhz: float = 200.0
    noise_figure_db: float = 7.0
    impairment_db: float = 8.0
    eirp_dbm: float = 40.0

    def __post_init__(self):
        for name in ("bandwidth_mhz", "noise_figure_db", "impairment_db", "eirp_dbm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class McsEntry:
    index: int              # 1-based
    sensitivity_dbm: float
    sinr_req_db: float
    rate_mbps: float
    spectral_efficiency: float   # [b/s/Hz]


@dataclass(frozen=True)
class McsTable:
    entries: tuple

    def __post_init__(self):
        if len(self.entries) == 0:
            raise ValueError("MCS table is empty")
        sinrs = [e.sinr_req_db for e in self.entries]
        rates = [e.rate_mbps for e in self.entries]
        if sorted(set(sinrs)) != sinrs or sorted(set(rates)) != rates:
            raise ValueError("MCS entries must be strictly increasing in "
                             "SINR requirement and rate")

    def __len__(self):
        return len(self.entries)


def tx_power_for_eirp(eirp_dbm: float, pattern: AntennaPattern) -> float:
    """Transmit power that hits the EIRP cap at boresight [dBm]."""
    return eirp_dbm - pattern.max_gain_dbi


def pattern_gain(pattern: AntennaPattern, steer_az_deg: float, direction) -> float:
    """Gain toward (azimuth, elevation) for a beam steered at steer_az [dBi]."""
    az, el = direction
    d_az = wrap_angle_deg(az - steer_az_deg)
    roll = 12.0 * (d_az / pattern.hpbw_az_deg) ** 2 \
        + 12.0 * (el / pattern.hpbw_el_deg) ** 2
    return pattern.max_gain_dbi - min(roll, pattern.floor_db)


def pattern_gain_matrix(pattern: AntennaPattern, steer_az_deg: np.ndarray,
                        aod_az_deg: np.ndarray, aod_el_deg: np.ndarray) -> np.ndarray:
    """(paths, beams) gain matrix for vectorized beam evaluation [dBi]."""
    d_az = wrap_angle_deg(aod_az_deg[:, None] - steer_az_deg[None, :])
    roll = 12.0 * (d_az / pattern.hpbw_az_deg) ** 2 \
        + 12.0 * (aod_el_deg[:, None] / pattern.hpbw_el_deg) ** 2
    return pattern.max_gain_dbi - np.minimum(roll, pattern.floor_db)


def beam_grid(pattern: AntennaPattern) -> np.ndarray:
    """Steering azimuths covering [0, 360) at the pattern's resolution."""
    return np.arange(0.0, 360.0, pattern.steering_resolution_deg)


def noise_floor(budget: LinkBudget) -> float:
    """Thermal noise power plus noise figure over the bandwidth [dBm]."""
    return (THERMAL_NOISE_DBM_PER_HZ
            + 10.0 * math.log10(budget.bandwidth_mhz * 1e6)
            + budget.noise_figure_db)


def beam_power_vector(paths, tx_power_dbm: float, pattern: AntennaPattern,
                      steer_az, rx_gain_dbi: float, impairment_db: float) -> np.ndarray:
    """Received power [mW] for each steering azimuth in ``steer_az``."""
    steer = np.atleast_1d(np.asarray(steer_az, dtype=float))
    if not paths:
        return np.zeros(len(steer))
    aod_az = np.array([p.aod_az_deg for p in paths])
    aod_el = np.array([p.aod_el_deg for p in paths])
    loss = np.array([p.total_isotropic_loss for p in paths])
    gains = pattern_gain_matrix(pattern, steer, aod_az, aod_el)
    level = tx_power_dbm + gains + rx_gain_dbi - loss[:, None] - impairment_db
    return np.sum(10.0 ** (level / 10.0), axis=0)


def received_power(paths, tx_power_dbm: float, pattern: AntennaPattern,
                   steer_az_deg: float, rx_gain_dbi: float,
                   impairment_db: float) -> float:
    """Non-coherent power sum over paths through the steered beam [dBm]."""
    mw = beam_power_vector(paths, tx_power_dbm, pattern, [steer_az_deg],
                           rx_gain_dbi, impairment_db)[0]
    return 10.0 * math.log10(mw) if mw > 0 else float("-inf")


def best_beam(paths, tx_power_dbm: float, pattern: AntennaPattern,
              rx_gain_dbi: float, impairment_db: float) -> tuple:
    """Exhaustive search over the beam grid; ties go to the smaller azimuth.

    Returns (steer_az_deg, received_power_dbm).
    """
    if not paths:
        raise ValueError("no paths to steer at")
    grid = beam_grid(pattern)
    mw = beam_power_vector(paths, tx_power_dbm, pattern, grid,
                           rx_gain_dbi, impairment_db)
    i = int(np.argmax(mw))
    power = 10.0 * math.log10(mw[i]) if mw[i] > 0 else float("-inf")
    return float(grid[i]), power


def default_mcs_table(budget: LinkBudget) -> McsTable:
    """The 12-scheme table scaled from the 1760 MHz single-carrier rates.

    Rates scale by bandwidth (200/1760 by default) and round to 0.1 Mbps;
    receiver sensitivities span -79 to -64 dBm in even steps, and each SINR
    requirement is that sensitivity referred to the noise floor.
    """
    sens = np.linspace(-79.0, -64.0, len(SC_PHY_RATES_1760MHZ))
    rates = [round(r * budget.bandwidth_mhz / 1760.0, 1) for r in SC_PHY_RATES_1760MHZ]
    return build_mcs_table(sens, rates, budget)


def build_mcs_table(sensitivities_dbm, rates_mbps, budget: LinkBudget) -> McsTable:
    floor = noise_floor(budget)
    entries = tuple(
        McsEntry(index=i + 1, sensitivity_dbm=float(s),
                 sinr_req_db=float(s) - floor, rate_mbps=float(r),
                 spectral_efficiency=float(r) / budget.bandwidth_mhz)
        for i, (s, r) in enumerate(zip(sensitivities_dbm, rates_mbps)))
    return McsTable(entries=entries)


def load_mcs_csv(text: str, budget: LinkBudget) -> McsTable:
    """MCS override: CSV rows ``index,sensitivity_dbm,rate_mbps``."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"index", "sensitivity_dbm", "rate_mbps"}
    if reader.fieldnames is None or set(reader.fieldnames) != required:
        raise ValueError("MCS CSV header must be: index,sensitivity_dbm,rate_mbps")
    rows = sorted(reader, key=lambda r: int(r["index"]))
    if [int(r["index"]) for r in rows] != list(range(1, len(rows) + 1)):
        raise ValueError("MCS indices must be 1..N without gaps")
    return build_mcs_table([float(r["sensitivity_dbm"]) for r in rows],
                           [float(r["rate_mbps"]) for r in rows], budget)


def select_mcs(sinr_db: float, table: McsTable):
    """Highest entry whose requirement is met (inclusive); None if below all."""
    chosen = None
    for entry in table.entries:
        if sinr_db >= entry.sinr_req_db:
            chosen = entry
        else:
            break
    return chosen
