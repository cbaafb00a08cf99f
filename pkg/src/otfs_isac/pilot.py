"""Pilot placement, spreading codes, block assembly, preamble, PAPR.

Pilots are an impulse train along the delay axis (period m_tau/mu) on a single
Doppler column, so their TF image occupies every mu-th subcarrier.  Effective
data fills one delay sub-band and is replicated over all kappa sub-bands by a
constant-modulus spreading code; pilots are superimposed on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SystemConfig
from . import mapping
from .otfs import TimeSignal, modulate, time_vector


@dataclass(frozen=True)
class SpreadCode:
    """Constant-modulus spreading sequence over the kappa delay sub-bands."""

    root: int
    length: int
    values: np.ndarray


def zadoff_chu(root: int, length: int) -> SpreadCode:
    """S_n = exp(-j pi r n (n+1) / length) for n = 1..length."""
    n = np.arange(1, length + 1)
    values = np.exp(-1j * np.pi * root * n * (n + 1) / length)
    return SpreadCode(root=root, length=length, values=values)


def pilot_energy(config: SystemConfig, data_symbol_energy: float = 1.0) -> float:
    """Per-impulse pilot energy from the configured pilot-to-data ratio."""
    return config.pilot_energy_ratio * data_symbol_energy


def make_pilot_grid(config: SystemConfig, e_p: Optional[float] = None) -> np.ndarray:
    """DD grid with mu impulses of amplitude sqrt(e_p) on one Doppler column."""
    if e_p is None:
        e_p = pilot_energy(config)
    grid = np.zeros((config.m_tau, config.n_nu), dtype=complex)
    grid[:: config.pilot_delay_period, config.pilot_doppler_index] = np.sqrt(e_p)
    return grid


def spread(x_e: np.ndarray, code: SpreadCode, config: SystemConfig) -> np.ndarray:
    """Replicate the effective grid over all delay sub-bands, scaled per slice.

    Slice j of the output (rows j*B .. (j+1)*B-1, B = m_tau/kappa) equals
    S_j * x_e.
    """
    x_e = np.asarray(x_e)
    b = config.n_folded_bins
    if code.length != config.kappa:
        raise ValueError(f"code length {code.length} != kappa {config.kappa}")
    if x_e.shape != (b, config.n_nu):
        raise ValueError(f"effective grid shape {x_e.shape} != {(b, config.n_nu)}")
    return (code.values[:, None, None] * x_e[None, :, :]).reshape(
        config.m_tau, config.n_nu
    )


def despread_slice(x: np.ndarray, j: int, code: SpreadCode, config: SystemConfig) -> np.ndarray:
    """Recover the effective grid from delay slice j (unit-modulus code)."""
    b = config.n_folded_bins
    return np.conj(code.values[j]) * np.asarray(x)[j * b : (j + 1) * b, :]


def assemble_block(
    x_e: np.ndarray, code: SpreadCode, pilot: np.ndarray, config: SystemConfig
) -> np.ndarray:
    """One ISAC block: spread data plus superimposed pilot grid."""
    return spread(x_e, code, config) + np.asarray(pilot)


def random_effective_grid(
    config: SystemConfig, modulation: str, rng: np.random.Generator
):
    """Random unit-energy QAM effective grid; returns (grid, bits)."""
    order = mapping.order_of(modulation)
    n_sym = config.n_folded_bins * config.n_nu
    bits = mapping.random_bits(n_sym * mapping.bits_per_symbol(order), rng)
    syms = mapping.bits_to_symbols(bits, order)
    return syms.reshape((config.n_folded_bins, config.n_nu), order="F"), bits


def linear_chirp(length: int, rate_hz: float) -> TimeSignal:
    """Unit-amplitude chirp sweeping the whole band, -fs/2 to fs/2."""
    n = np.arange(length)
    return TimeSignal(np.exp(1j * np.pi * (n - length / 2) ** 2 / length), rate_hz)


@dataclass
class Preamble:
    """Chirp for synchronization plus a full-band training block.

    The training block is a seeded pseudo-random QPSK frame occupying all
    subcarriers, so delay estimates from it carry no ambiguity.
    """

    chirp: TimeSignal
    training_dd: np.ndarray
    training: TimeSignal

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate([self.chirp.samples, self.training.samples])

    def __len__(self) -> int:
        return len(self.chirp.samples) + len(self.training.samples)


def build_preamble(
    config: SystemConfig, chirp_len: int = 2048, seed: int = 0x5EED
) -> Preamble:
    rng = np.random.default_rng(seed)
    order = 4
    n_sym = config.frame_len
    bits = mapping.random_bits(n_sym * 2, rng)
    grid = mapping.bits_to_symbols(bits, order).reshape(
        (config.m_tau, config.n_nu), order="F"
    )
    return Preamble(
        chirp=linear_chirp(chirp_len, config.f_s),
        training_dd=grid,
        training=modulate(grid, config.f_s),
    )


@dataclass
class Frame:
    """A preamble followed by ISAC blocks (pilot + spread data DD grids)."""

    preamble: Preamble
    blocks: list

    def time_signal(self, config: SystemConfig) -> TimeSignal:
        parts = [self.preamble.samples]
        parts += [time_vector(b) for b in self.blocks]
        return TimeSignal(np.concatenate(parts), config.f_s)


def papr(signal: TimeSignal) -> float:
    """Peak-to-average power ratio of a sample stream (linear)."""
    p = np.abs(np.asarray(signal.samples)) ** 2
    return float(p.max() / p.mean())


def papr_bound(block: np.ndarray) -> float:
    """Upper bound n_nu * max|X|^2 / E|X|^2 for rectangular-pulse frames."""
    block = np.asarray(block)
    p = np.abs(block) ** 2
    return float(block.shape[1] * p.max() / p.mean())
