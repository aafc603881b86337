"""Scenario files: JSON descriptions of the plan, base station, beacons,
radio parameters, and tracing options.

Loading either succeeds completely or fails with a diagnostic naming the
offending field path. Radio parameters use configuration units (dBm, dB);
omitted values fall back to the standard macro-cell defaults.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .locmap import Deployment, ZedBeacon, make_beacon
from .params import SystemParams, linear_to_db, watt_to_dbm
from .raytrace import FloorPlan, Room, TraceOptions, Wall

SCHEMA_VERSION = 1

_PARAM_KEYS = {
    "n_rb", "n_tti", "k_pilots", "f_rb_hz", "scs_hz", "tti_s", "bw_hz",
    "p_bs_dbm", "n_th_dbm_hz", "nf_db", "f0_hz", "n_zed", "bep_threshold",
    "pixel_size_m", "l_train", "n_bits_id",
}
_INT_PARAM_KEYS = {"n_rb", "n_tti", "k_pilots", "n_zed", "l_train", "n_bits_id"}
_TOP_KEYS = {"schema", "seed", "params", "plan", "bs", "beacons", "raytrace"}
_WALL_KEYS = {"p1", "p2", "transmission_loss_db", "reflection_coeff"}
_RT_KEYS = {"max_reflections", "gain_floor_db", "min_distance_m"}


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate; message carries the
    field path."""


def _fail(path: str, msg: str) -> None:
    raise ScenarioError(f"{path}: {msg}")


def _point(value: Any, path: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        _fail(path, f"expected [x, y] in meters, got {value!r}")
    return float(value[0]), float(value[1])


def _number(value: Any, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        _fail(path, f"unknown field(s) {sorted(unknown)}; allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class Scenario:
    params: SystemParams
    plan: FloorPlan
    bs_position: tuple[float, float]
    beacons: tuple[ZedBeacon, ...]
    trace_options: TraceOptions
    seed: int

    def deployment(self) -> Deployment:
        return Deployment(
            plan=self.plan, bs_position=self.bs_position,
            beacons=self.beacons, params=self.params,
        )

    def to_dict(self) -> dict:
        """Canonical form: every field materialized, geometry verbatim,
        radio values back in configuration units."""
        p = self.params
        return {
            "schema": SCHEMA_VERSION,
            "seed": self.seed,
            "params": {
                "n_rb": p.n_rb, "n_tti": p.n_tti, "k_pilots": p.k_pilots,
                "f_rb_hz": p.f_rb, "scs_hz": p.scs, "tti_s": p.tti, "bw_hz": p.bw,
                "p_bs_dbm": round(watt_to_dbm(p.p_bs), 9),
                "n_th_dbm_hz": round(watt_to_dbm(p.n_th), 9),
                "nf_db": round(linear_to_db(p.nf), 9),
                "f0_hz": p.f0, "n_zed": p.n_zed,
                "bep_threshold": p.bep_threshold, "pixel_size_m": p.pixel_size,
                "l_train": p.l_train, "n_bits_id": p.n_bits_id,
            },
            "plan": {
                "bounds": [list(self.plan.bounds[0]), list(self.plan.bounds[1])],
                "walls": [
                    {
                        "p1": list(w.p1), "p2": list(w.p2),
                        "transmission_loss_db": w.transmission_loss_db,
                        "reflection_coeff": [w.reflection_coeff.real, w.reflection_coeff.imag],
                    }
                    for w in self.plan.walls
                ],
                "rooms": [
                    {"name": r.name, "polygon": [list(v) for v in r.vertices]}
                    for r in self.plan.rooms
                ],
            },
            "bs": list(self.bs_position),
            "beacons": [{"id": b.id, "position": list(b.position)} for b in self.beacons],
            "raytrace": {
                "max_reflections": self.trace_options.max_reflections,
                "gain_floor_db": self.trace_options.gain_floor_db,
                "min_distance_m": self.trace_options.min_distance_m,
            },
        }


def _parse_params(data: dict, n_beacons: int) -> SystemParams:
    raw = data.get("params", {})
    if not isinstance(raw, dict):
        _fail("params", f"expected an object, got {type(raw).__name__}")
    _check_keys(raw, _PARAM_KEYS, "params")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _INT_PARAM_KEYS:
            if not isinstance(value, int) or isinstance(value, bool):
                _fail(f"params.{key}", f"expected an integer, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = _number(value, f"params.{key}")
    if "n_zed" not in kwargs:
        kwargs["n_zed"] = max(n_beacons, 1)
    try:
        return SystemParams.from_config(**kwargs)
    except ValueError as exc:
        _fail("params", str(exc))
        raise  # unreachable


def _parse_plan(data: dict) -> FloorPlan:
    raw = data.get("plan")
    if not isinstance(raw, dict):
        _fail("plan", "required object is missing or not an object")
    _check_keys(raw, {"bounds", "walls", "rooms"}, "plan")

    walls = []
    for i, w in enumerate(raw.get("walls", [])):
        path = f"plan.walls[{i}]"
        if not isinstance(w, dict):
            _fail(path, "expected an object")
        _check_keys(w, _WALL_KEYS, path)
        if "p1" not in w or "p2" not in w:
            _fail(path, "p1 and p2 are required")
        refl = w.get("reflection_coeff", [0.0, 0.0])
        if isinstance(refl, (int, float)) and not isinstance(refl, bool):
            refl = [float(refl), 0.0]
        rx, ry = _point(refl, f"{path}.reflection_coeff")
        try:
            walls.append(
                Wall(
                    p1=_point(w["p1"], f"{path}.p1"),
                    p2=_point(w["p2"], f"{path}.p2"),
                    transmission_loss_db=_number(
                        w.get("transmission_loss_db", 10.0), f"{path}.transmission_loss_db"
                    ),
                    reflection_coeff=complex(rx, ry),
                )
            )
        except ScenarioError:
            raise
        except ValueError as exc:
            _fail(path, str(exc))

    rooms = []
    names = {}
    for i, r in enumerate(raw.get("rooms", [])):
        path = f"plan.rooms[{i}]"
        if not isinstance(r, dict):
            _fail(path, "expected an object")
        _check_keys(r, {"name", "polygon"}, path)
        name = r.get("name")
        if not isinstance(name, str) or not name:
            _fail(f"{path}.name", f"expected a non-empty string, got {name!r}")
        if name in names:
            _fail(f"{path}.name", f"room name {name!r} already used by plan.rooms[{names[name]}]")
        names[name] = i
        poly = r.get("polygon")
        if not isinstance(poly, list) or len(poly) < 3:
            _fail(f"{path}.polygon", "expected a list of at least 3 [x, y] vertices")
        vertices = tuple(_point(v, f"{path}.polygon[{j}]") for j, v in enumerate(poly))
        try:
            rooms.append(Room(name=name, vertices=vertices))
        except ValueError as exc:
            _fail(path, str(exc))

    bounds = None
    if "bounds" in raw:
        b = raw["bounds"]
        if not isinstance(b, list) or len(b) != 2:
            _fail("plan.bounds", f"expected [[x0, y0], [x1, y1]], got {b!r}")
        bounds = (_point(b[0], "plan.bounds[0]"), _point(b[1], "plan.bounds[1]"))
    try:
        return FloorPlan(walls=tuple(walls), rooms=tuple(rooms), bounds=bounds)
    except ValueError as exc:
        _fail("plan", str(exc))
        raise  # unreachable


def _parse_beacons(data: dict, plan: FloorPlan, n_bits: int) -> tuple[ZedBeacon, ...]:
    raw = data.get("beacons", [])
    if not isinstance(raw, list):
        _fail("beacons", f"expected a list, got {type(raw).__name__}")
    beacons = []
    seen: dict[int, int] = {}
    for i, b in enumerate(raw):
        path = f"beacons[{i}]"
        if not isinstance(b, dict):
            _fail(path, "expected an object")
        _check_keys(b, {"id", "position"}, path)
        ident = b.get("id")
        if not isinstance(ident, int) or isinstance(ident, bool):
            _fail(f"{path}.id", f"expected an integer, got {ident!r}")
        if ident in seen:
            _fail(
                f"{path}.id",
                f"beacon id {ident} duplicates beacons[{seen[ident]}] "
                f"(positions {raw[seen[ident]].get('position')} and {b.get('position')})",
            )
        seen[ident] = i
        pos = _point(b.get("position"), f"{path}.position")
        if not plan.contains(pos):
            _fail(f"{path}.position", f"{pos} lies outside plan bounds {plan.bounds}")
        try:
            beacons.append(make_beacon(ident, pos, n_bits))
        except ValueError as exc:
            _fail(path, str(exc))
    return tuple(beacons)


def _parse_trace_options(data: dict) -> TraceOptions:
    raw = data.get("raytrace", {})
    if not isinstance(raw, dict):
        _fail("raytrace", f"expected an object, got {type(raw).__name__}")
    _check_keys(raw, _RT_KEYS, "raytrace")
    kwargs: dict[str, Any] = {}
    if "max_reflections" in raw:
        v = raw["max_reflections"]
        if not isinstance(v, int) or isinstance(v, bool):
            _fail("raytrace.max_reflections", f"expected an integer, got {v!r}")
        kwargs["max_reflections"] = v
    for key in ("gain_floor_db", "min_distance_m"):
        if key in raw:
            kwargs[key] = _number(raw[key], f"raytrace.{key}")
    try:
        return TraceOptions(**kwargs)
    except ValueError as exc:
        _fail("raytrace", str(exc))
        raise  # unreachable


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(f"scenario root must be an object, got {type(data).__name__}")
    _check_keys(data, _TOP_KEYS, "scenario")
    if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        _fail("schema", f"unsupported schema version {data.get('schema')!r}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        _fail("seed", f"expected an integer, got {seed!r}")

    plan = _parse_plan(data)
    raw_beacons = data.get("beacons", [])
    n_beacons = len(raw_beacons) if isinstance(raw_beacons, list) else 0
    params = _parse_params(data, n_beacons)
    beacons = _parse_beacons(data, plan, params.n_bits_id)
    if "bs" not in data:
        _fail("bs", "base-station position is required")
    bs = _point(data["bs"], "bs")
    opts = _parse_trace_options(data)

    scenario = Scenario(
        params=params, plan=plan, bs_position=bs,
        beacons=beacons, trace_options=opts, seed=seed,
    )
    try:
        scenario.deployment()  # cross-field validation
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return scenario


def load_scenario(path) -> Scenario:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    try:
        return parse_scenario(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
