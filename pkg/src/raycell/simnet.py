"""Monte-Carlo downlink system simulator.

Each iteration drops users on the breaklines, attaches every user to the
cell and beam maximizing its SNR, then iterates a load/interference fixed
point under non-full-buffer traffic: users request a finite rate, cells
allocate fractional resources, and the expected interference at a user is
the load-weighted power received from every other cell over the beams it
actually serves. Iterations use seeds seed0 + i and are independent, so
campaigns parallelize across workers without changing any result.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .radio import (
    AntennaPattern,
    LinkBudget,
    McsTable,
    PATTERN_22DEG,
    beam_grid,
    beam_power_vector,
    default_mcs_table,
    noise_floor,
    select_mcs,
    tx_power_for_eirp,
)
from .raytrace import RayTracer, TraceConfig
from .scene import Scene, drop_users

FIXED_POINT_TOL = 1e-3
FIXED_POINT_MAX_ROUNDS = 10


def order_percentile(values, q: float) -> float:
    """Order-statistic percentile: the smallest sample at or above rank
    ceil(q * (n - 1)). Matches the 'higher' interpolation convention."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan")
    return float(np.percentile(arr, q, method="higher"))


def mean_dbm(linear_mw) -> float:
    """Linear-domain mean converted to dBm; -inf when everything is zero."""
    arr = np.asarray(linear_mw, dtype=float)
    if arr.size == 0:
        return float("-inf")
    m = float(arr.mean())
    return 10.0 * math.log10(m) if m > 0 else float("-inf")


@dataclass
class SimConfig:
    frequency_ghz: float = 60.0
    budget: LinkBudget = field(default_factory=LinkBudget)
    pattern: AntennaPattern = PATTERN_22DEG
    rx_gain_dbi: float = 5.0
    demand_mbps: float = 15.0
    density_per_km2: float = 200.0
    iterations: int = 30
    seed: int = 1
    trace: TraceConfig | None = None
    mcs_table: McsTable | None = None
    workers: int = 1

    def effective_trace(self) -> TraceConfig:
        base = self.trace or TraceConfig()
        return replace(base, frequency_ghz=self.frequency_ghz)

    def effective_mcs(self) -> McsTable:
        return self.mcs_table or default_mcs_table(self.budget)

    def validate(self) -> list:
        problems = []
        if self.frequency_ghz <= 0:
            problems.append("frequency must be > 0")
        if self.demand_mbps <= 0:
            problems.append("demand_mbps must be > 0")
        if self.density_per_km2 <= 0:
            problems.append("density_per_km2 must be > 0")
        if self.iterations < 1:
            problems.append("iterations must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        return problems


@dataclass(frozen=True)
class Attachment:
    """Serving decision for one user plus every link actually evaluated."""

    user_index: int
    cell_index: int
    steer_az_deg: float
    snr_db: float
    outage_candidate: bool
    cell_paths: dict           # cell index -> list of PathContribution
    beam_index: int = 0


@dataclass(frozen=True)
class CellState:
    cell_index: int
    load: float
    allocations: dict          # user index -> resource fraction


@dataclass(frozen=True)
class UserRecord:
    user_index: int
    x: float
    y: float
    cell_index: int
    steer_az_deg: float
    snr_db: float
    interference_dbm: float
    sinr_db: float
    mcs_index: int | None
    rate_mbps: float
    served_mbps: float
    se_bps_hz: float
    outage: bool
    unsatisfied: bool
    signal_mw: float
    interference_mw: float


@dataclass(frozen=True)
class IterationResult:
    seed: int
    records: tuple
    cell_loads: np.ndarray
    converged: bool


@dataclass
class SimulationReport:
    config_echo: dict
    iterations: int
    seed0: int
    records: tuple             # (iteration, UserRecord) pooled, stable order
    cell_loads: np.ndarray     # (iterations, cells)
    interference_cdf_dbm: np.ndarray
    sinr_cdf_db: np.ndarray
    outage_pct: float
    unsatisfied_pct: float
    mean_se: float
    cell_edge_se: float
    mean_load: float
    max_load: float
    p90_interference_dbm: float
    mean_interference_dbm: float
    mean_received_power_dbm: float
    mean_sinr_db: float
    all_converged: bool


# ---------------------------------------------------------------------------
# Link evaluation
# ---------------------------------------------------------------------------

def _normalize_patterns(patterns, scene: Scene) -> list:
    """Resolve one AntennaPattern per cell from a pattern or an id map."""
    if isinstance(patterns, AntennaPattern):
        return [patterns] * len(scene.cells)
    return [patterns[c.pattern_id] for c in scene.cells]


class _LinkMap:
    """Per-iteration cache: every (cell, user) path list and the received
    power over the full steering grid of each cell [mW]."""

    def __init__(self, scene, users, cell_patterns, budget, rx_gain_dbi, trace_config):
        tracer = RayTracer(scene, trace_config)
        self.grids = [beam_grid(p) for p in cell_patterns]
        self.paths = {}
        self.power_mw = []
        for ci, (cell, pattern) in enumerate(zip(scene.cells, cell_patterns)):
            tx3 = np.array([cell.position[0], cell.position[1], cell.height])
            tx_power = tx_power_for_eirp(budget.eirp_dbm, pattern)
            grid = self.grids[ci]
            power = np.zeros((len(users), len(grid)))
            for ui, user in enumerate(users):
                rx3 = np.array([user.position[0], user.position[1], user.height])
                paths = tracer.trace(tx3, rx3)
                self.paths[(ci, ui)] = paths
                if paths:
                    power[ui] = beam_power_vector(
                        paths, tx_power, pattern, grid,
                        rx_gain_dbi, budget.impairment_db)
            self.power_mw.append(power)


def attach_users(scene: Scene, users, patterns, budget: LinkBudget,
                 rx_gain_dbi: float = 5.0, trace_config: TraceConfig | None = None,
                 mcs_table: McsTable | None = None,
                 _link_map: "_LinkMap | None" = None) -> list:
    """Attach each user to the (cell, beam) pair maximizing its SNR.

    Ties break toward the lower cell index and the smaller steering
    azimuth. Users with no path anywhere, or with a best SNR below the
    lowest MCS requirement, still attach but are flagged outage candidates.
    """
    if not scene.cells:
        raise ValueError("scene has no cells")
    if not users:
        raise ValueError("no users to attach")
    cell_patterns = _normalize_patterns(patterns, scene)
    link = _link_map or _LinkMap(scene, users, cell_patterns, budget,
                                 rx_gain_dbi, trace_config or TraceConfig())
    table = mcs_table or default_mcs_table(budget)
    noise_mw = 10.0 ** (noise_floor(budget) / 10.0)
    attachments = []
    for ui in range(len(users)):
        best = None   # (power_mw, cell, beam_idx)
        for ci in range(len(scene.cells)):
            row = link.power_mw[ci][ui]
            bi = int(np.argmax(row))
            if best is None or row[bi] > best[0]:
                best = (row[bi], ci, bi)
        power_mw, ci, bi = best
        snr_db = 10.0 * math.log10(power_mw / noise_mw) if power_mw > 0 else float("-inf")
        attachments.append(Attachment(
            user_index=ui, cell_index=ci,
            steer_az_deg=float(link.grids[ci][bi]),
            snr_db=snr_db,
            outage_candidate=snr_db < table.entries[0].sinr_req_db,
            cell_paths={c: link.paths[(c, ui)] for c in range(len(scene.cells))},
            beam_index=bi))
    return attachments


@dataclass(frozen=True)
class SystemState:
    cell_states: tuple
    sinr_db: np.ndarray
    signal_mw: np.ndarray
    interference_mw: np.ndarray
    mcs_index: tuple            # per user, None for outage
    rate_mbps: np.ndarray
    tau: np.ndarray
    converged: bool


def compute_system_state(attachments, budget: LinkBudget, mcs_table: McsTable,
                         demand_mbps: float, patterns=PATTERN_22DEG,
                         rx_gain_dbi: float = 5.0,
                         _link_map: "_LinkMap | None" = None) -> SystemState:
    """Fixed point of the load/interference coupling.

    Starting from SINR = SNR: allocate resources from the per-user MCS rate
    (scaling proportionally when a cell would exceed full load), compute
    expected interference from every other cell's load-weighted beams, and
    update SINR, until no cell load moves by more than 1e-3 or ten rounds
    pass. Non-convergence is flagged, not fatal.
    """
    n_users = len(attachments)
    cells = sorted({c for a in attachments for c in a.cell_paths})
    n_cells = len(cells)
    serving = np.array([a.cell_index for a in attachments])
    beam_idx = np.array([a.beam_index for a in attachments])
    noise_mw = 10.0 ** (noise_floor(budget) / 10.0)

    if _link_map is not None:
        power = _link_map.power_mw
        grids = _link_map.grids
    else:
        if isinstance(patterns, AntennaPattern):
            cell_patterns = [patterns] * n_cells
        else:
            cell_patterns = [patterns[c] for c in cells]
        grids = [beam_grid(p) for p in cell_patterns]
        power = []
        for ci in range(n_cells):
            pattern = cell_patterns[ci]
            tx_power = tx_power_for_eirp(budget.eirp_dbm, pattern)
            mat = np.zeros((n_users, len(grids[ci])))
            for a in attachments:
                paths = a.cell_paths.get(ci, [])
                if paths:
                    mat[a.user_index] = beam_power_vector(
                        paths, tx_power, pattern, grids[ci],
                        rx_gain_dbi, budget.impairment_db)
            power.append(mat)

    signal_mw = np.array([power[serving[u]][u, beam_idx[u]] for u in range(n_users)])
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(signal_mw / noise_mw)

    def allocate(sinr):
        mcs = [select_mcs(s, mcs_table) for s in sinr]
        rate = np.array([m.rate_mbps if m else 0.0 for m in mcs])
        with np.errstate(divide="ignore", invalid="ignore"):
            tau_raw = np.where(rate > 0, demand_mbps / np.maximum(rate, 1e-12), 0.0)
        tau = tau_raw.copy()
        loads = np.zeros(n_cells)
        for ci in range(n_cells):
            sel = serving == ci
            cell_sum = tau_raw[sel].sum()
            if cell_sum > 1.0:
                tau[sel] = tau_raw[sel] / cell_sum
            loads[ci] = min(tau[sel].sum(), 1.0)
        return mcs, rate, tau, loads

    def interference(tau):
        # expected value over each interfering cell's scheduling
        contrib = np.zeros((n_cells, n_users))
        for ci in range(n_cells):
            load_by_beam = np.zeros(len(grids[ci]))
            sel = serving == ci
            np.add.at(load_by_beam, beam_idx[sel], tau[sel])
            contrib[ci] = power[ci] @ load_by_beam
        total = contrib.sum(axis=0)
        return total - contrib[serving, np.arange(n_users)]

    prev_loads = np.zeros(n_cells)
    converged = False
    mcs = rate = tau = loads = None
    for _ in range(FIXED_POINT_MAX_ROUNDS):
        mcs, rate, tau, loads = allocate(sinr_db)
        i_mw = interference(tau)
        with np.errstate(divide="ignore", invalid="ignore"):
            sinr_db = 10.0 * np.log10(signal_mw / (noise_mw + i_mw))
        delta = np.max(np.abs(loads - prev_loads))
        prev_loads = loads
        if delta < FIXED_POINT_TOL:
            converged = True
            break
    # final allocation consistent with the converged SINR
    mcs, rate, tau, loads = allocate(sinr_db)
    i_mw = interference(tau)

    cell_states = tuple(
        CellState(cell_index=ci, load=float(loads[ci]),
                  allocations={int(u): float(tau[u])
                               for u in np.nonzero(serving == ci)[0]})
        for ci in range(n_cells))
    return SystemState(
        cell_states=cell_states, sinr_db=sinr_db, signal_mw=signal_mw,
        interference_mw=i_mw,
        mcs_index=tuple(m.index if m else None for m in mcs),
        rate_mbps=rate, tau=tau, converged=converged)


def run_iteration(scene: Scene, config: SimConfig, seed: int) -> IterationResult:
    """One Monte-Carlo iteration: drop, attach, converge, record."""
    users = drop_users(scene, config.density_per_km2, seed,
                       demand_mbps=config.demand_mbps,
                       antenna_gain_dbi=config.rx_gain_dbi)
    cell_patterns = _normalize_patterns(config.pattern, scene)
    link = _LinkMap(scene, users, cell_patterns, config.budget,
                    config.rx_gain_dbi, config.effective_trace())
    table = config.effective_mcs()
    attachments = attach_users(scene, users, config.pattern, config.budget,
                               rx_gain_dbi=config.rx_gain_dbi,
                               mcs_table=table, _link_map=link)
    state = compute_system_state(attachments, config.budget, table,
                                 config.demand_mbps, patterns=config.pattern,
                                 rx_gain_dbi=config.rx_gain_dbi, _link_map=link)
    records = []
    for a in attachments:
        u = a.user_index
        mcs_index = state.mcs_index[u]
        outage = mcs_index is None
        served = 0.0 if outage else float(state.tau[u] * state.rate_mbps[u])
        se = 0.0 if outage else float(state.rate_mbps[u] / config.budget.bandwidth_mhz)
        i_mw = float(state.interference_mw[u])
        records.append(UserRecord(
            user_index=u,
            x=float(users[u].position[0]), y=float(users[u].position[1]),
            cell_index=a.cell_index, steer_az_deg=a.steer_az_deg,
            snr_db=a.snr_db,
            interference_dbm=10.0 * math.log10(i_mw) if i_mw > 0 else float("-inf"),
            sinr_db=float(state.sinr_db[u]),
            mcs_index=mcs_index,
            rate_mbps=float(state.rate_mbps[u]) if not outage else 0.0,
            served_mbps=served,
            se_bps_hz=se,
            outage=outage,
            unsatisfied=(not outage) and served < config.demand_mbps - 1e-9,
            signal_mw=float(state.signal_mw[u]),
            interference_mw=i_mw))
    loads = np.array([cs.load for cs in state.cell_states])
    return IterationResult(seed=seed, records=tuple(records),
                           cell_loads=loads, converged=state.converged)


def _iteration_task(args):
    scene, config, seed = args
    return run_iteration(scene, config, seed)


def run_campaign(scene: Scene, config: SimConfig) -> SimulationReport:
    """Full Monte-Carlo campaign with per-iteration seeds seed0 + i.

    Results are a pure function of (scene, config, seed0); the worker count
    only changes wall-clock time.
    """
    problems = config.validate()
    if problems:
        raise ValueError("; ".join(problems))
    seeds = [config.seed + i for i in range(config.iterations)]
    tasks = [(scene, config, s) for s in seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_iteration_task, tasks))
    else:
        results = [run_iteration(scene, config, s) for s in seeds]
    return summarize_results(scene, config, results)


def summarize_results(scene: Scene, config: SimConfig, results) -> SimulationReport:
    pooled = tuple((it, rec) for it, res in enumerate(results) for rec in res.records)
    records = [rec for _, rec in pooled]
    n = len(records)
    interference_dbm = np.array([r.interference_dbm for r in records])
    sinr_db = np.array([r.sinr_db for r in records])
    se = np.array([r.se_bps_hz for r in records])
    outage = np.array([r.outage for r in records])
    unsatisfied = np.array([r.unsatisfied for r in records])
    loads = np.vstack([res.cell_loads for res in results])

    k_edge = max(1, int(math.floor(0.10 * n)))
    worst = np.sort(se)[:k_edge]
    finite_sinr = sinr_db[np.isfinite(sinr_db)]

    return SimulationReport(
        config_echo=config_to_dict(config),
        iterations=config.iterations,
        seed0=config.seed,
        records=pooled,
        cell_loads=loads,
        interference_cdf_dbm=np.sort(interference_dbm),
        sinr_cdf_db=np.sort(sinr_db),
        outage_pct=100.0 * float(outage.mean()),
        unsatisfied_pct=100.0 * float(unsatisfied.mean()),
        mean_se=float(se.mean()),
        cell_edge_se=float(worst.mean()),
        mean_load=float(loads.mean()),
        max_load=float(loads.max()),
        p90_interference_dbm=order_percentile(interference_dbm, 90.0),
        mean_interference_dbm=mean_dbm([r.interference_mw for r in records]),
        mean_received_power_dbm=mean_dbm([r.signal_mw for r in records]),
        mean_sinr_db=float(finite_sinr.mean()) if finite_sinr.size else float("-inf"),
        all_converged=all(res.converged for res in results))


@dataclass
class AntennaComparison:
    report_a: SimulationReport
    report_b: SimulationReport
    tx_power_a_dbm: float
    tx_power_b_dbm: float
    deltas: dict   # b minus a


def compare_antennas(scene: Scene, config: SimConfig,
                     pattern_a: AntennaPattern,
                     pattern_b: AntennaPattern) -> AntennaComparison:
    """Run the same campaign (same seeds) under two antennas at equal EIRP."""
    config_a = replace_pattern(config, pattern_a)
    config_b = replace_pattern(config, pattern_b)
    report_a = run_campaign(scene, config_a)
    report_b = run_campaign(scene, config_b)
    deltas = {
        "mean_received_power_db": report_b.mean_received_power_dbm
                                  - report_a.mean_received_power_dbm,
        "mean_interference_db": report_b.mean_interference_dbm
                                - report_a.mean_interference_dbm,
        "mean_sinr_db": report_b.mean_sinr_db - report_a.mean_sinr_db,
        "outage_pct": report_b.outage_pct - report_a.outage_pct,
    }
    return AntennaComparison(
        report_a=report_a, report_b=report_b,
        tx_power_a_dbm=tx_power_for_eirp(config.budget.eirp_dbm, pattern_a),
        tx_power_b_dbm=tx_power_for_eirp(config.budget.eirp_dbm, pattern_b),
        deltas=deltas)


def replace_pattern(config: SimConfig, pattern: AntennaPattern) -> SimConfig:
    clone = SimConfig(**{**config.__dict__})
    clone.pattern = pattern
    return clone


def config_to_dict(config: SimConfig) -> dict:
    return {
        "frequency": config.frequency_ghz,
        "bandwidth_mhz": config.budget.bandwidth_mhz,
        "eirp_dbm": config.budget.eirp_dbm,
        "noise_figure_db": config.budget.noise_figure_db,
        "impairment_db": config.budget.impairment_db,
        "pattern": {
            "max_gain_dbi": config.pattern.max_gain_dbi,
            "hpbw_deg": config.pattern.hpbw_az_deg,
            "steering_resolution_deg": config.pattern.steering_resolution_deg,
        },
        "rx_gain_dbi": config.rx_gain_dbi,
        "demand_mbps": config.demand_mbps,
        "density_per_km2": config.density_per_km2,
        "iterations": config.iterations,
        "seed": config.seed,
    }
