"""System parameters, link budget, and the pilot time-frequency grid.

All quantities are stored in linear SI units (W, W/Hz, Hz, s, m).
dB/dBm values are converted exactly once, at the configuration boundary
(`SystemParams.from_config` or the scenario loader).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s

# Downlink reference-symbol layout per resource block and subframe
# (antenna port 0, cell-specific frequency shift 0): OFDM symbols 0 and 7
# carry subcarrier offsets {0, 6}, symbols 4 and 11 carry {3, 9}.
CRS_PATTERN: tuple[tuple[int, int], ...] = (
    (0, 0), (0, 6), (4, 3), (4, 9), (7, 0), (7, 6), (11, 3), (11, 9),
)
SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SUBFRAME = 14


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Radio and evaluation constants; defaults are the 4G macro-cell setup.

    `t_ofdm` is derived (`tti / 14`) and cannot be set independently.
    """

    n_rb: int = 50                               # resource blocks
    n_tti: int = 1                               # subframes per beacon bit
    k_pilots: int = 8                            # pilots per RB per subframe
    f_rb: float = 180e3                          # RB bandwidth, Hz
    scs: float = 15e3                            # subcarrier spacing, Hz
    tti: float = 1e-3                            # subframe duration, s
    bw: float = 9e6                              # system bandwidth, Hz
    p_bs: float = dbm_to_watt(46.0)              # BS transmit power, W
    n_th: float = dbm_to_watt(-174.0)            # thermal noise density, W/Hz
    nf: float = db_to_linear(9.0)                # receiver noise figure, linear
    f0: float = 857e6                            # carrier frequency, Hz
    n_zed: int = 127                             # beacon count
    bep_threshold: float = 0.01                  # decodability threshold
    pixel_size: float = 0.4                      # map pixel edge, m
    l_train: int = 8                             # training half-length L
    n_bits_id: int = 7                           # identifier length, bits
    t_ofdm: float = field(init=False)            # OFDM symbol duration, s

    def __post_init__(self) -> None:
        for name in ("n_rb", "n_tti", "k_pilots", "n_zed", "l_train", "n_bits_id"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("f_rb", "scs", "tti", "bw", "p_bs", "n_th", "nf", "f0", "pixel_size"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be > 0, got {v!r}")
        if not 0.0 < self.bep_threshold < 0.5:
            raise ValueError(f"bep_threshold must lie in (0, 0.5), got {self.bep_threshold!r}")
        if 2 ** self.n_bits_id - 1 < self.n_zed:
            raise ValueError(
                f"n_bits_id={self.n_bits_id} cannot encode {self.n_zed} distinct "
                f"nonzero identifiers (max {2 ** self.n_bits_id - 1})"
            )
        object.__setattr__(self, "t_ofdm", self.tti / SYMBOLS_PER_SUBFRAME)

    @classmethod
    def from_config(
        cls,
        *,
        n_rb: int = 50,
        n_tti: int = 1,
        k_pilots: int = 8,
        f_rb_hz: float = 180e3,
        scs_hz: float = 15e3,
        tti_s: float = 1e-3,
        bw_hz: float = 9e6,
        p_bs_dbm: float = 46.0,
        n_th_dbm_hz: float = -174.0,
        nf_db: float = 9.0,
        f0_hz: float = 857e6,
        n_zed: int = 127,
        bep_threshold: float = 0.01,
        pixel_size_m: float = 0.4,
        l_train: int = 8,
        n_bits_id: int = 7,
    ) -> "SystemParams":
        """Build from configuration units (dBm, dB); this is the only place
        dB values enter the model."""
        return cls(
            n_rb=n_rb, n_tti=n_tti, k_pilots=k_pilots, f_rb=f_rb_hz, scs=scs_hz,
            tti=tti_s, bw=bw_hz, p_bs=dbm_to_watt(p_bs_dbm),
            n_th=dbm_to_watt(n_th_dbm_hz), nf=db_to_linear(nf_db), f0=f0_hz,
            n_zed=n_zed, bep_threshold=bep_threshold, pixel_size=pixel_size_m,
            l_train=l_train, n_bits_id=n_bits_id,
        )

    def with_n_tti(self, n_tti: int) -> "SystemParams":
        return replace(self, n_tti=n_tti)

    @property
    def bit_period(self) -> float:
        """Beacon bit duration T = n_tti * tti, s."""
        return self.n_tti * self.tti

    @property
    def bit_rate(self) -> float:
        return 1.0 / self.bit_period

    @property
    def pilots_per_bit(self) -> int:
        """N = n_rb * n_tti * k_pilots."""
        return self.n_rb * self.n_tti * self.k_pilots


@dataclass(frozen=True)
class LinkBudget:
    """Per-pilot transmit PSD and receiver noise PSD, W/Hz."""

    p_u: float
    n0: float

    def __post_init__(self) -> None:
        if not self.p_u > 0:
            raise ValueError(f"p_u must be > 0, got {self.p_u!r}")
        if not self.n0 > 0:
            raise ValueError(f"n0 must be > 0, got {self.n0!r}")


def derive_link_budget(params: SystemParams) -> LinkBudget:
    """Spread the BS power over the band and stack noise figure on the
    thermal floor: p_u = p_bs / bw, n0 = n_th * nf."""
    return LinkBudget(p_u=params.p_bs / params.bw, n0=params.n_th * params.nf)


class PilotSlot(NamedTuple):
    tti_index: int          # 1..n_tti
    rb_index: int           # 1..n_rb
    k_index: int            # 1..k_pilots
    freq_offset: float      # Hz relative to f0
    symbol_time_index: int  # 0..13 within the subframe


@dataclass(frozen=True)
class PilotGrid:
    """The N pilot resource elements of one bit period, ordered
    subframe-major, then RB, then pilot index within the RB."""

    entries: tuple[PilotSlot, ...]
    n_total: int

    def __post_init__(self) -> None:
        if self.n_total != len(self.entries):
            raise ValueError("n_total does not match entry count")
        if self.n_total < 1:
            raise ValueError("pilot grid must not be empty")

    @cached_property
    def freq_offsets(self) -> np.ndarray:
        """Per-entry frequency offsets from f0, Hz (length n_total)."""
        a = np.array([e.freq_offset for e in self.entries], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def unique_freq_offsets(self) -> np.ndarray:
        a = np.unique(self.freq_offsets)
        a.flags.writeable = False
        return a


def build_pilot_grid(params: SystemParams) -> PilotGrid:
    """Lay out the n_rb*n_tti*k_pilots reference symbols of one bit period.

    RB 1 starts at f0 - bw/2 snapped to the subcarrier lattice, so the grid
    spans the band symmetrically around the carrier.
    """
    if params.n_rb * params.f_rb > params.bw * (1 + 1e-12):
        raise ValueError(
            f"n_rb * f_rb = {params.n_rb * params.f_rb:g} Hz exceeds bw = {params.bw:g} Hz"
        )
    spr = params.f_rb / params.scs
    if abs(spr - SUBCARRIERS_PER_RB) > 1e-9:
        raise ValueError(
            f"pilot pattern requires f_rb == {SUBCARRIERS_PER_RB} * scs "
            f"(got f_rb/scs = {spr:g})"
        )
    if params.k_pilots != len(CRS_PATTERN):
        raise ValueError(
            f"pilot pattern provides exactly {len(CRS_PATTERN)} pilots per RB "
            f"per subframe, got k_pilots = {params.k_pilots}"
        )

    # lowest subcarrier index, snapped inward so offsets stay inside the band
    start = math.ceil(-params.bw / (2.0 * params.scs) - 1e-9)
    entries = []
    for tti_i in range(1, params.n_tti + 1):
        for rb_i in range(1, params.n_rb + 1):
            base = start + (rb_i - 1) * SUBCARRIERS_PER_RB
            for k_i, (sym, sc_off) in enumerate(CRS_PATTERN, start=1):
                freq = (base + sc_off) * params.scs
                entries.append(PilotSlot(tti_i, rb_i, k_i, freq, sym))

    grid = PilotGrid(entries=tuple(entries), n_total=len(entries))
    half = params.bw / 2.0 + 1e-6
    if np.any(np.abs(grid.freq_offsets) > half):
        raise ValueError("pilot frequency offsets exceed the band edges")
    return grid
