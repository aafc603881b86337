"""Beacon deployment, transmission scheduling, per-pixel SNR/BEP maps,
and room-level accuracy metrics.

A pixel is covered when at least one beacon decodes below the BEP
threshold; the location estimate is the position of the strongest-SNR
beacon among those, ties broken by lowest id.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .channel import build_pilot_channel, compose_at, zed_delta_norm2
from .link import analytic_bep_from_snr
from .params import LinkBudget, PilotGrid, SystemParams, build_pilot_grid
from .raytrace import FloorPlan, TraceOptions, Tracer


def encode_id(ident: int, n_bits: int) -> tuple[int, ...]:
    """Fixed-width big-endian binary codeword for a beacon identifier."""
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    if not 1 <= ident <= 2**n_bits - 1:
        raise ValueError(f"id {ident} outside [1, {2**n_bits - 1}] for {n_bits} bits")
    return tuple((ident >> (n_bits - 1 - i)) & 1 for i in range(n_bits))


def decode_id(bits: Sequence[int]) -> int:
    """Inverse of encode_id (no range check: noisy decodes may yield 0)."""
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"codeword bits must be 0/1, got {b!r}")
        value = (value << 1) | b
    return value


@dataclass(frozen=True)
class ZedBeacon:
    id: int
    position: tuple[float, float]
    codeword: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValueError(f"beacon id must be >= 1, got {self.id}")
        if not any(self.codeword):
            raise ValueError(f"beacon {self.id}: codeword must be nonzero")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


def make_beacon(ident: int, position: Sequence[float], n_bits: int) -> ZedBeacon:
    return ZedBeacon(ident, (position[0], position[1]), encode_id(ident, n_bits))


@dataclass(frozen=True)
class Deployment:
    plan: FloorPlan
    bs_position: tuple[float, float]   # may lie outside the plan bounds
    beacons: tuple[ZedBeacon, ...]
    params: SystemParams
    allow_count_mismatch: bool = False

    def __post_init__(self) -> None:
        ids = [b.id for b in self.beacons]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate beacon ids: {dup}")
        codewords = {b.codeword for b in self.beacons}
        if len(codewords) != len(self.beacons):
            raise ValueError("beacon codewords must be distinct")
        for b in self.beacons:
            if not self.plan.contains(b.position):
                raise ValueError(f"beacon {b.id} at {b.position} lies outside the plan bounds")
        if not self.allow_count_mismatch and len(self.beacons) != self.params.n_zed:
            raise ValueError(
                f"{len(self.beacons)} beacons deployed but params.n_zed = "
                f"{self.params.n_zed} (set allow_count_mismatch to override)"
            )

    def beacons_by_id(self) -> tuple[ZedBeacon, ...]:
        return tuple(sorted(self.beacons, key=lambda b: b.id))


@dataclass(frozen=True)
class Schedule:
    """One TDM frame: every beacon transmits once, in its own slot of
    (2L + n_bits_id) bit periods."""

    frame: tuple[int, ...]
    slot_duration: float

    def __post_init__(self) -> None:
        if len(set(self.frame)) != len(self.frame):
            raise ValueError("schedule frame repeats a beacon")
        if not self.slot_duration > 0:
            raise ValueError("slot_duration must be > 0")

    @property
    def frame_period(self) -> float:
        return len(self.frame) * self.slot_duration

    def slot_start(self, ident: int) -> float:
        return self.frame.index(ident) * self.slot_duration


def build_schedule(dep: Deployment) -> Schedule:
    """Round-robin by ascending beacon id."""
    p = dep.params
    slot = (2 * p.l_train + p.n_bits_id) * p.bit_period
    return Schedule(frame=tuple(b.id for b in dep.beacons_by_id()), slot_duration=slot)


class BeaconSignal(NamedTuple):
    snr: float  # linear
    bep: float


def _locmap_tracer(dep: Deployment, opts: TraceOptions) -> Tracer:
    return Tracer(
        dep.plan,
        dep.params.f0,
        opts.max_reflections,
        gain_floor_db=opts.gain_floor_db,
        min_path_length=opts.min_distance_m,
    )


def evaluate_pixel(
    pos: Sequence[float],
    dep: Deployment,
    grid: PilotGrid,
    budget: LinkBudget,
    opts: TraceOptions = TraceOptions(),
) -> dict[int, BeaconSignal]:
    """Per-beacon SNR and BEP for a receiver at `pos`.

    Traces the direct link and, per beacon, the feeder and backscatter
    links; the backscatter path length is clamped below at
    `opts.min_distance_m`.
    """
    if not dep.plan.contains(pos):
        raise ValueError(f"position {tuple(pos)} lies outside the plan bounds")
    tracer = _locmap_tracer(dep, opts)
    gamma_rays = tracer.trace(dep.bs_position, pos)
    out: dict[int, BeaconSignal] = {}
    for b in dep.beacons_by_id():
        if math.dist(pos, b.position) < opts.min_distance_m:
            warnings.warn(
                f"receiver within {opts.min_distance_m} m of beacon {b.id}; "
                f"backscatter path clamped",
                stacklevel=2,
            )
        phi_rays = tracer.trace(dep.bs_position, b.position)
        lambda_rays = tracer.trace(b.position, pos)
        chan = build_pilot_channel(gamma_rays, phi_rays, lambda_rays, grid)
        snr = budget.p_u * zed_delta_norm2(chan) / budget.n0
        out[b.id] = BeaconSignal(snr, float(analytic_bep_from_snr(snr, grid.n_total)))
    return out


@dataclass(frozen=True)
class CoverageMap:
    origin: tuple[float, float]
    pixel_size: float
    bep_threshold: float
    beacon_ids: tuple[int, ...]
    beacon_positions: tuple[tuple[float, float], ...]
    snr: np.ndarray        # (ny, nx, n_beacons), linear
    bep: np.ndarray        # (ny, nx, n_beacons)
    best_zed: np.ndarray   # (ny, nx), 0 where uncovered
    covered: np.ndarray    # (ny, nx), bool
    room: np.ndarray       # (ny, nx), room name or None

    @property
    def ny(self) -> int:
        return self.snr.shape[0]

    @property
    def nx(self) -> int:
        return self.snr.shape[1]

    @property
    def x_centers(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.pixel_size

    @property
    def y_centers(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.pixel_size


def _pixel_centers(plan: FloorPlan, pixel_size: float) -> tuple[np.ndarray, np.ndarray]:
    (x0, y0), (x1, y1) = plan.bounds
    nx = max(1, math.ceil((x1 - x0) / pixel_size - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / pixel_size - 1e-9))
    xs = x0 + (np.arange(nx) + 0.5) * pixel_size
    ys = y0 + (np.arange(ny) + 0.5) * pixel_size
    return xs, ys


def _room_labels(plan: FloorPlan, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    import shapely

    labels = np.full((ys.size, xs.size), None, dtype=object)
    gx, gy = np.meshgrid(xs, ys)
    unassigned = np.ones(gx.shape, dtype=bool)
    for room in plan.rooms:
        hit = shapely.intersects_xy(room.polygon, gx, gy) & unassigned
        labels[hit] = room.name
        unassigned &= ~hit
    return labels


# worker state for parallel sweeps (populated by the pool initializer)
_WORKER: dict = {}


def _init_sweep_worker(state: dict) -> None:
    _WORKER.clear()
    _WORKER.update(state)
    _WORKER["tracer"] = Tracer(
        state["plan"],
        state["f0"],
        state["opts"].max_reflections,
        gain_floor_db=state["opts"].gain_floor_db,
        min_path_length=state["opts"].min_distance_m,
    )


def _sweep_row(iy: int) -> np.ndarray:
    """Linear SNR for one pixel row, shape (nx, n_beacons)."""
    tracer: Tracer = _WORKER["tracer"]
    xs, y = _WORKER["xs"], _WORKER["ys"][iy]
    freqs = _WORKER["freqs"]
    phi_u = _WORKER["phi_u"]
    positions = _WORKER["beacon_positions"]
    scale = _WORKER["p_u"] / _WORKER["n0"]
    out = np.empty((xs.size, len(positions)))
    for ix, x in enumerate(xs):
        for ib, bpos in enumerate(positions):
            lam_u = compose_at(tracer.trace(bpos, (x, y)), freqs)
            out[ix, ib] = scale * np.mean(np.abs(phi_u[ib] * lam_u) ** 2)
    return out


def _sweep_snr(
    dep: Deployment,
    budget: LinkBudget,
    opts: TraceOptions,
    freqs: np.ndarray,
    workers: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel per-beacon linear SNR on the plan's pixel lattice.

    The SNR needs only the feeder and backscatter links; coefficients are
    evaluated on the unique pilot frequencies (the static channel repeats
    across subframes), which keeps the result independent of n_tti.
    """
    xs, ys = _pixel_centers(dep.plan, dep.params.pixel_size)
    beacons = dep.beacons_by_id()
    tracer = _locmap_tracer(dep, opts)
    phi_u = np.stack(
        [compose_at(tracer.trace(dep.bs_position, b.position), freqs) for b in beacons]
    ) if beacons else np.zeros((0, freqs.size), dtype=complex)
    state = {
        "plan": dep.plan,
        "f0": dep.params.f0,
        "opts": opts,
        "xs": xs,
        "ys": ys,
        "freqs": freqs,
        "phi_u": phi_u,
        "beacon_positions": tuple(b.position for b in beacons),
        "p_u": budget.p_u,
        "n0": budget.n0,
    }
    if workers <= 1:
        _init_sweep_worker(state)
        rows = [_sweep_row(iy) for iy in range(ys.size)]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_sweep_worker, initargs=(state,)
        ) as pool:
            rows = list(pool.map(_sweep_row, range(ys.size)))
    snr = np.stack(rows) if rows else np.zeros((0, xs.size, len(beacons)))
    return xs, ys, snr


def _finish_map(
    dep: Deployment,
    grid: PilotGrid,
    xs: np.ndarray,
    ys: np.ndarray,
    snr: np.ndarray,
    room: np.ndarray,
) -> CoverageMap:
    beacons = dep.beacons_by_id()
    thr = dep.params.bep_threshold
    if len(beacons) == 0:
        ny, nx = ys.size, xs.size
        return CoverageMap(
            origin=dep.plan.bounds[0], pixel_size=dep.params.pixel_size,
            bep_threshold=thr, beacon_ids=(), beacon_positions=(),
            snr=snr, bep=np.zeros_like(snr),
            best_zed=np.zeros((ny, nx), dtype=int),
            covered=np.zeros((ny, nx), dtype=bool), room=room,
        )
    bep = analytic_bep_from_snr(snr, grid.n_total)
    passing = bep < thr
    covered = passing.any(axis=-1)
    masked = np.where(passing, snr, -np.inf)
    # argmax returns the first maximum, and beacons are sorted by id,
    # so ties resolve to the lowest id
    best_col = np.argmax(masked, axis=-1)
    ids = np.array([b.id for b in beacons])
    best = np.where(covered, ids[best_col], 0)
    return CoverageMap(
        origin=dep.plan.bounds[0], pixel_size=dep.params.pixel_size,
        bep_threshold=thr, beacon_ids=tuple(ids),
        beacon_positions=tuple(b.position for b in beacons),
        snr=snr, bep=bep, best_zed=best, covered=covered, room=room,
    )


def sweep_multi(
    dep: Deployment,
    grids: Mapping[int, PilotGrid],
    budget: LinkBudget,
    opts: TraceOptions = TraceOptions(),
    workers: int = 1,
) -> dict[int, CoverageMap]:
    """Coverage maps for several n_tti grid variants from one ray sweep.

    All variants share the per-pixel SNR (identical unique frequencies);
    only the pilot count entering the BEP differs.
    """
    if not grids:
        raise ValueError("need at least one pilot grid")
    grid_list = sorted(grids.items())
    base = grid_list[0][1]
    for _, g in grid_list[1:]:
        if not np.array_equal(g.unique_freq_offsets, base.unique_freq_offsets):
            raise ValueError("grid variants must share the same pilot frequencies")
    xs, ys, snr = _sweep_snr(dep, budget, opts, base.unique_freq_offsets, workers)
    room = _room_labels(dep.plan, xs, ys)
    return {t: _finish_map(dep, g, xs, ys, snr, room) for t, g in grid_list}


def sweep(
    dep: Deployment,
    grid: PilotGrid,
    budget: LinkBudget,
    opts: TraceOptions = TraceOptions(),
    workers: int = 1,
) -> CoverageMap:
    """Evaluate every pixel center and fill covered/best-beacon flags."""
    return sweep_multi(dep, {dep.params.n_tti: grid}, budget, opts, workers)[dep.params.n_tti]


def coverage_area(cov: CoverageMap, zed_id: int) -> tuple[int, float]:
    """Pixels (and m^2) where this beacon's BEP beats the threshold."""
    try:
        col = cov.beacon_ids.index(zed_id)
    except ValueError:
        raise ValueError(f"unknown beacon id {zed_id}") from None
    count = int(np.sum(cov.bep[:, :, col] < cov.bep_threshold))
    return count, count * cov.pixel_size**2


class RoomAccuracy(NamedTuple):
    accuracy: float | None   # None when no covered in-room pixels exist
    matched: int
    evaluated: int           # covered pixels inside a room
    outside_room: int        # covered pixels outside every room


def room_accuracy(cov: CoverageMap, plan: FloorPlan) -> RoomAccuracy:
    """Fraction of covered pixels whose selected beacon sits in the same
    room as the pixel center; pixels outside all rooms are excluded and
    counted separately."""
    beacon_room = {
        ident: plan.room_of(pos)
        for ident, pos in zip(cov.beacon_ids, cov.beacon_positions)
    }
    matched = evaluated = outside = 0
    for iy in range(cov.ny):
        for ix in range(cov.nx):
            if not cov.covered[iy, ix]:
                continue
            label = cov.room[iy, ix]
            if label is None:
                outside += 1
                continue
            evaluated += 1
            if beacon_room[int(cov.best_zed[iy, ix])] == label:
                matched += 1
    accuracy = matched / evaluated if evaluated else None
    return RoomAccuracy(accuracy, matched, evaluated, outside)


def compare_ntti(
    dep: Deployment,
    grids: Mapping[int, PilotGrid],
    budget: LinkBudget,
    opts: TraceOptions = TraceOptions(),
    workers: int = 1,
) -> dict[int, dict[int, tuple[int, float]]]:
    """Coverage-area table: beacon id -> n_tti -> (pixels, m^2)."""
    maps = sweep_multi(dep, grids, budget, opts, workers)
    table: dict[int, dict[int, tuple[int, float]]] = {}
    for b in dep.beacons_by_id():
        table[b.id] = {t: coverage_area(m, b.id) for t, m in sorted(maps.items())}
    return table


def grids_for_ntti(params: SystemParams, n_ttis: Sequence[int]) -> dict[int, PilotGrid]:
    return {t: build_pilot_grid(params.with_n_tti(t)) for t in n_ttis}


def rank_positions_by_illumination(
    plan: FloorPlan,
    bs_position: Sequence[float],
    candidates: Sequence[Sequence[float]],
    f0_hz: float,
    opts: TraceOptions = TraceOptions(),
) -> list[tuple[tuple[float, float], float]]:
    """Heuristic placement aid: candidate positions ranked by total
    received feeder power (sum of squared ray amplitudes), strongest
    first. Placement itself remains the operator's call."""
    tracer = Tracer(
        plan, f0_hz, opts.max_reflections,
        gain_floor_db=opts.gain_floor_db, min_path_length=opts.min_distance_m,
    )
    ranked = []
    for pos in candidates:
        rays = tracer.trace(bs_position, pos)
        power = float(sum(abs(r.gain) ** 2 for r in rays))
        ranked.append(((float(pos[0]), float(pos[1])), power))
    ranked.sort(key=lambda item: -item[1])
    return ranked
