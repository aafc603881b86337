"""Image-source ray tracing over a 2D floor plan, plus ray file I/O.

Walls are plain segments with a transmission loss (applied once per
crossing) and a complex specular reflection coefficient. Paths are
enumerated with the image-source method up to a bounce limit; every ray
carries its complex amplitude at the carrier and its propagation delay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from shapely.geometry import Polygon
import shapely

from .params import SPEED_OF_LIGHT

_EPS = 1e-9  # parametric tolerance for intersection tests


class Ray(NamedTuple):
    """One propagation path: complex amplitude at the carrier, delay in s."""

    gain: complex
    delay: float


@dataclass(frozen=True)
class Wall:
    """Segment with a one-crossing transmission loss (dB, power) and a
    specular reflection coefficient (amplitude, |r| <= 1)."""

    p1: tuple[float, float]
    p2: tuple[float, float]
    transmission_loss_db: float = 10.0
    reflection_coeff: complex = 0.0

    def __post_init__(self) -> None:
        if math.dist(self.p1, self.p2) <= 0.0:
            raise ValueError(f"degenerate wall of zero length at {self.p1}")
        if self.transmission_loss_db < 0:
            raise ValueError("transmission_loss_db must be >= 0")
        if abs(self.reflection_coeff) > 1.0 + 1e-12:
            raise ValueError("reflection coefficient magnitude must be <= 1")


@dataclass(frozen=True)
class Room:
    """Named simple polygon (vertices in order, implicitly closed)."""

    name: str
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"room {self.name!r} needs at least 3 vertices")
        if not self.polygon.is_valid or not self.polygon.is_simple:
            raise ValueError(f"room {self.name!r} polygon is not simple")

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)


@dataclass(frozen=True)
class FloorPlan:
    walls: tuple[Wall, ...] = ()
    rooms: tuple[Room, ...] = ()
    bounds: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self) -> None:
        if self.bounds is None:
            object.__setattr__(self, "bounds", self._derive_bounds())
        (x0, y0), (x1, y1) = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"bounds must span a nonempty box, got {self.bounds}")

    def _derive_bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        xs, ys = [], []
        for w in self.walls:
            xs += [w.p1[0], w.p2[0]]
            ys += [w.p1[1], w.p2[1]]
        for r in self.rooms:
            xs += [v[0] for v in r.vertices]
            ys += [v[1] for v in r.vertices]
        if not xs:
            raise ValueError("cannot derive bounds from an empty plan")
        return ((min(xs), min(ys)), (max(xs), max(ys)))

    def contains(self, point: Sequence[float]) -> bool:
        (x0, y0), (x1, y1) = self.bounds
        return x0 <= point[0] <= x1 and y0 <= point[1] <= y1

    def room_of(self, point: Sequence[float]) -> str | None:
        """Name of the first room containing the point (boundary counts)."""
        for room in self.rooms:
            if shapely.intersects_xy(room.polygon, point[0], point[1]):
                return room.name
        return None


@dataclass(frozen=True)
class TraceOptions:
    max_reflections: int = 2
    gain_floor_db: float = -180.0
    min_distance_m: float = 0.1  # shortest path length used for amplitude/delay

    def __post_init__(self) -> None:
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be >= 0")
        if self.min_distance_m < 0:
            raise ValueError("min_distance_m must be >= 0")


def _mirror(points: np.ndarray, a: np.ndarray, n_hat: np.ndarray) -> np.ndarray:
    # reflect points across the line through a with unit normal n_hat
    # (all arguments row-wise (n, 2))
    proj = np.sum((points - a) * n_hat, axis=-1)
    return points - 2.0 * proj[..., None] * n_hat


class Tracer:
    """Image-source path enumerator for a fixed plan/carrier/bounce budget.

    Candidate wall sequences are precomputed once; transmitter images are
    cached per tx position, which makes repeated traces from the same
    transmitter (coverage sweeps) cheap.
    """

    def __init__(
        self,
        plan: FloorPlan,
        f0_hz: float,
        max_reflections: int = 2,
        gain_floor_db: float = -180.0,
        min_path_length: float = 0.0,
        extra_gain: complex = 1.0,
    ):
        if f0_hz <= 0:
            raise ValueError("f0_hz must be > 0")
        self.plan = plan
        self.wavelength = SPEED_OF_LIGHT / f0_hz
        self.max_reflections = int(max_reflections)
        if self.max_reflections < 0:
            raise ValueError("max_reflections must be >= 0")
        self.floor_amp = 10.0 ** (gain_floor_db / 20.0)
        self.min_path_length = float(min_path_length)
        self.extra_gain = complex(extra_gain)

        walls = plan.walls
        self._n_walls = len(walls)
        self._wa = np.array([w.p1 for w in walls], dtype=float).reshape(-1, 2)
        self._wb = np.array([w.p2 for w in walls], dtype=float).reshape(-1, 2)
        self._wd = self._wb - self._wa
        lengths = np.hypot(self._wd[:, 0], self._wd[:, 1]) if self._n_walls else np.zeros(0)
        normals = np.stack([-self._wd[:, 1], self._wd[:, 0]], axis=-1) if self._n_walls \
            else np.zeros((0, 2))
        self._wn = normals / lengths[:, None] if self._n_walls else normals
        self._refl = np.array([w.reflection_coeff for w in walls], dtype=complex)
        self._trans_amp = np.array(
            [10.0 ** (-w.transmission_loss_db / 20.0) for w in walls], dtype=float
        )
        self._sequences = self._enumerate_sequences()
        self._image_cache: dict[tuple[float, float], list[np.ndarray]] = {}

    def _enumerate_sequences(self) -> list[np.ndarray]:
        """Wall-index sequences grouped by bounce count; index 0 holds the
        (empty) direct-path group."""
        groups: list[np.ndarray] = [np.zeros((1, 0), dtype=int)]
        for k in range(1, self.max_reflections + 1):
            prev = groups[k - 1]
            seqs = []
            for seq in prev:
                for w in range(self._n_walls):
                    if k > 1 and seq[-1] == w:
                        continue  # consecutive bounces off one wall are impossible
                    seqs.append(np.append(seq, w))
            groups.append(
                np.array(seqs, dtype=int).reshape(-1, k) if seqs else np.zeros((0, k), int)
            )
        return groups

    def _images(self, tx: np.ndarray) -> list[np.ndarray]:
        """Per group k: array (n_seq, k, 2) of successive mirror images of tx."""
        key = (float(tx[0]), float(tx[1]))
        cached = self._image_cache.get(key)
        if cached is not None:
            return cached
        images: list[np.ndarray] = [np.zeros((1, 0, 2))]
        for k in range(1, self.max_reflections + 1):
            seqs = self._sequences[k]
            imgs = np.empty((seqs.shape[0], k, 2))
            if seqs.shape[0]:
                prev = np.broadcast_to(tx, (seqs.shape[0], 2))
                for j in range(k):
                    w = seqs[:, j]
                    prev = _mirror(prev, self._wa[w], self._wn[w])
                    imgs[:, j] = prev
            images.append(imgs)
        self._image_cache[key] = images
        return images

    def _leg_crossings(
        self, p: np.ndarray, q: np.ndarray, skip: list[np.ndarray | None]
    ) -> np.ndarray:
        """Amplitude attenuation from wall crossings on legs p->q.

        p, q: (n, 2) leg endpoints; skip: per-endpoint wall indices (n,) to
        exclude (the walls being reflected off at that endpoint).
        """
        n = p.shape[0]
        if self._n_walls == 0 or n == 0:
            return np.ones(n)
        d = (q - p)[:, None, :]                      # (n, 1, 2)
        e = self._wd[None, :, :]                     # (1, W, 2)
        ap = self._wa[None, :, :] - p[:, None, :]    # (n, W, 2)
        denom = d[..., 0] * e[..., 1] - d[..., 1] * e[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (ap[..., 0] * e[..., 1] - ap[..., 1] * e[..., 0]) / denom
            t = (ap[..., 0] * d[..., 1] - ap[..., 1] * d[..., 0]) / denom
        crossing = (
            (np.abs(denom) > _EPS)
            & (s > _EPS) & (s < 1.0 - _EPS)
            & (t > _EPS) & (t < 1.0 - _EPS)
        )
        rows = np.arange(n)
        for walls in skip:
            if walls is not None:
                crossing[rows, walls] = False
        return np.prod(np.where(crossing, self._trans_amp[None, :], 1.0), axis=1)

    def trace(self, tx: Sequence[float], rx: Sequence[float]) -> list[Ray]:
        tx = np.asarray(tx, dtype=float)
        rx = np.asarray(rx, dtype=float)
        if np.array_equal(tx, rx) and self.min_path_length == 0.0:
            raise ValueError("tx and rx coincide (set a minimum path length to allow this)")

        images = self._images(tx)
        found: list[tuple[float, complex]] = []

        # direct path
        d0 = float(np.linalg.norm(rx - tx))
        att = self._leg_crossings(tx[None, :], rx[None, :], [None])[0]
        self._emit(found, np.array([d0]), np.array([att], dtype=complex))

        for k in range(1, self.max_reflections + 1):
            seqs = self._sequences[k]
            if seqs.shape[0] == 0:
                break
            imgs = images[k]
            n = seqs.shape[0]
            valid = np.ones(n, dtype=bool)
            # backtrace rx -> q_k -> ... -> q_1, using images I_k ... I_1
            pts = np.empty((k + 2, n, 2))
            pts[k + 1] = rx
            cur = np.broadcast_to(rx, (n, 2)).copy()
            for j in range(k, 0, -1):
                target = imgs[:, j - 1]
                w = seqs[:, j - 1]
                a, e = self._wa[w], self._wd[w]
                dseg = target - cur
                ap = a - cur
                denom = dseg[:, 0] * e[:, 1] - dseg[:, 1] * e[:, 0]
                with np.errstate(divide="ignore", invalid="ignore"):
                    s = (ap[:, 0] * e[:, 1] - ap[:, 1] * e[:, 0]) / denom
                    t = (ap[:, 0] * dseg[:, 1] - ap[:, 1] * dseg[:, 0]) / denom
                valid &= (
                    (np.abs(denom) > _EPS)
                    & (s > _EPS) & (s < 1.0 - _EPS)
                    & (t > _EPS) & (t < 1.0 - _EPS)
                )
                cur = cur + s[:, None] * dseg
                pts[j] = cur
            pts[0] = tx
            if not valid.any():
                continue

            idx = np.flatnonzero(valid)
            seqs_v = seqs[idx]
            pts_v = pts[:, idx]
            # unfolded length: distance from rx to the deepest image
            dist = np.linalg.norm(rx - imgs[idx, k - 1], axis=1)
            amp = np.prod(self._refl[seqs_v], axis=1)
            # transmission through walls crossed on each leg, excluding the
            # walls being reflected off at the leg endpoints
            for leg in range(k + 1):
                start_w = seqs_v[:, leg - 1] if leg >= 1 else None
                end_w = seqs_v[:, leg] if leg <= k - 1 else None
                amp = amp * self._leg_crossings(pts_v[leg], pts_v[leg + 1], [start_w, end_w])
            self._emit(found, dist, amp)

        found.sort(key=lambda ray: (ray[0], -abs(ray[1])))
        return [Ray(gain, delay) for delay, gain in found]

    def _emit(self, out: list, dists: np.ndarray, amps: np.ndarray) -> None:
        dists = np.maximum(dists, self.min_path_length)
        gains = self.extra_gain * amps * (self.wavelength / (4.0 * math.pi * dists))
        keep = np.abs(gains) >= self.floor_amp
        delays = dists / SPEED_OF_LIGHT
        for dly, g in zip(delays[keep], gains[keep]):
            out.append((float(dly), complex(g)))


def trace(
    plan: FloorPlan,
    tx: Sequence[float],
    rx: Sequence[float],
    max_reflections: int = 2,
    *,
    f0_hz: float,
    gain_floor_db: float = -180.0,
    min_path_length: float = 0.0,
    extra_gain: complex = 1.0,
) -> list[Ray]:
    """Enumerate specular paths tx -> rx up to `max_reflections` bounces.

    Each ray's amplitude is (wavelength / 4*pi*d) times the product of wall
    reflection coefficients and per-crossing transmission attenuations; its
    delay is d / c with d the unfolded path length.
    """
    tracer = Tracer(
        plan, f0_hz, max_reflections,
        gain_floor_db=gain_floor_db,
        min_path_length=min_path_length,
        extra_gain=extra_gain,
    )
    return tracer.trace(tx, rx)


def save_rays(rays: Sequence[Ray], path) -> None:
    """Write rays as CSV lines ``re(gain),im(gain),delay_seconds``."""
    with open(path, "w") as f:
        f.write(format_rays(rays))


def format_rays(rays: Sequence[Ray]) -> str:
    lines = ["# re(gain),im(gain),delay_seconds"]
    for r in rays:
        lines.append(f"{r.gain.real!r},{r.gain.imag!r},{r.delay!r}")
    return "\n".join(lines) + "\n"


def load_rays(path) -> list[Ray]:
    """Read a ray CSV (``re,im,delay`` per line, '#' comments allowed)."""
    rays: list[Ray] = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 're,im,delay', got {line!r}"
                )
            try:
                re_g, im_g, delay = (float(p) for p in parts)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in (re_g, im_g, delay)):
                raise ValueError(f"{path}:{lineno}: non-finite value in {line!r}")
            if delay < 0:
                raise ValueError(f"{path}:{lineno}: negative delay {delay!r}")
            rays.append(Ray(complex(re_g, im_g), delay))
    return rays
