"""Frequency-domain pilot channels from multipath rays.

The per-pilot coefficient is the delay-phase-weighted sum of ray gains,
evaluated at each pilot's frequency offset from the carrier. The beacon's
two states give the two-hypothesis channel: `gamma` alone (transparent)
or `gamma + phi * lambda` (reflecting).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .params import PilotGrid
from .raytrace import Ray


def compose_at(rays: Sequence[Ray], freq_offsets: np.ndarray) -> np.ndarray:
    """Channel coefficients at the given frequency offsets (Hz from f0):
    c(f) = sum_p gain_p * exp(-j*2*pi*f*delay_p)."""
    freqs = np.asarray(freq_offsets, dtype=float)
    if len(rays) == 0:
        return np.zeros(freqs.shape, dtype=complex)
    gains = np.array([r.gain for r in rays], dtype=complex)
    delays = np.array([r.delay for r in rays], dtype=float)
    phases = np.exp(-2j * np.pi * np.outer(freqs, delays))
    return phases @ gains


def compose(rays: Sequence[Ray], grid: PilotGrid) -> np.ndarray:
    """Length-N coefficient vector over the pilot grid.

    The channel is static, so pilots sharing a frequency offset get the
    same coefficient; values are computed once per unique offset and
    broadcast across subframes.
    """
    if grid.n_total < 1:
        raise ValueError("pilot grid must not be empty")
    unique, inverse = np.unique(grid.freq_offsets, return_inverse=True)
    return compose_at(rays, unique)[inverse]


@dataclass(frozen=True)
class PilotChannel:
    """Per-pilot coefficients of the three links; `g` is the
    reflecting-mode channel gamma + phi * lambda."""

    gamma: np.ndarray
    phi: np.ndarray
    lambda_: np.ndarray

    def __post_init__(self) -> None:
        for name in ("gamma", "phi", "lambda_"):
            v = np.asarray(getattr(self, name), dtype=complex)
            object.__setattr__(self, name, v)
        if not (self.gamma.shape == self.phi.shape == self.lambda_.shape):
            raise ValueError("gamma, phi, lambda_ must share one length")
        if self.gamma.ndim != 1 or self.gamma.size < 1:
            raise ValueError("channel vectors must be non-empty 1-D")

    @cached_property
    def g(self) -> np.ndarray:
        return self.gamma + self.phi * self.lambda_

    @property
    def n(self) -> int:
        return self.gamma.size


def build_pilot_channel(
    gamma_rays: Sequence[Ray],
    phi_rays: Sequence[Ray],
    lambda_rays: Sequence[Ray],
    grid: PilotGrid,
) -> PilotChannel:
    """Compose the direct, feeder, and backscatter links on the grid."""
    return PilotChannel(
        gamma=compose(gamma_rays, grid),
        phi=compose(phi_rays, grid),
        lambda_=compose(lambda_rays, grid),
    )


def effective(chan: PilotChannel, bit: int) -> np.ndarray:
    """Channel seen by the receiver for the given beacon bit:
    transparent (0) -> gamma, reflecting (1) -> g."""
    if bit == 0:
        return chan.gamma
    if bit == 1:
        return chan.g
    raise ValueError(f"bit must be 0 or 1, got {bit!r}")


def zed_delta_norm2(chan: PilotChannel) -> float:
    """Mean squared backscatter coefficient, ||phi * lambda||^2 / N."""
    return float(np.mean(np.abs(chan.phi * chan.lambda_) ** 2))
