"""zedloc: link-level and map-level simulator for indoor localization with
passive backscatter beacons riding on ambient OFDM pilots."""

__version__ = "0.1.0"

from .channel import (
    PilotChannel, build_pilot_channel, compose, compose_at, effective, zed_delta_norm2,
)
from .link import (
    BEP_LAW_NOISE_FACTOR, DetectorState, NoiseModel, add_noise, analytic_bep,
    analytic_bep_from_snr, complex_awgn, detect_bit, detect_training,
    estimate_states, monte_carlo_ber, q_function, sync_metric, transmit_pilots,
    zed_snr,
)
from .locmap import (
    BeaconSignal, CoverageMap, Deployment, RoomAccuracy, Schedule, ZedBeacon,
    build_schedule, compare_ntti, coverage_area, decode_id, encode_id,
    evaluate_pixel, grids_for_ntti, make_beacon, rank_positions_by_illumination,
    room_accuracy, sweep, sweep_multi,
)
from .params import (
    LinkBudget, PilotGrid, PilotSlot, SystemParams, build_pilot_grid,
    db_to_linear, dbm_to_watt, derive_link_budget, linear_to_db, watt_to_dbm,
)
from .raytrace import (
    FloorPlan, Ray, Room, TraceOptions, Tracer, Wall, load_rays, save_rays, trace,
)
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario, save_scenario

__all__ = [
    "BeaconSignal", "CoverageMap", "Deployment", "DetectorState", "FloorPlan",
    "LinkBudget", "NoiseModel", "PilotChannel", "PilotGrid", "PilotSlot", "Ray",
    "Room", "RoomAccuracy", "Scenario", "ScenarioError", "Schedule", "SystemParams",
    "TraceOptions", "Tracer", "Wall", "ZedBeacon", "BEP_LAW_NOISE_FACTOR",
    "add_noise", "analytic_bep", "analytic_bep_from_snr", "complex_awgn",
    "build_pilot_channel", "build_pilot_grid",
    "build_schedule", "compare_ntti", "compose", "compose_at", "coverage_area",
    "db_to_linear", "dbm_to_watt", "decode_id", "derive_link_budget", "detect_bit",
    "detect_training", "effective", "encode_id", "estimate_states", "evaluate_pixel",
    "grids_for_ntti", "linear_to_db", "load_rays", "load_scenario", "make_beacon",
    "monte_carlo_ber", "parse_scenario", "q_function", "rank_positions_by_illumination",
    "room_accuracy", "save_rays", "save_scenario", "sweep", "sweep_multi",
    "sync_metric", "trace", "transmit_pilots", "watt_to_dbm", "zed_delta_norm2",
    "zed_snr",
]
