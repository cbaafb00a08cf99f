"""Sub-Nyquist mechanics: downsampling, aliasing map, unfolding.

Downsampling a full-rate frame by kappa folds each symbol's M subcarriers
onto M/kappa bins (m -> m mod M/kappa).  Because the pilot occupies every
mu-th subcarrier and mu == kappa with a collision-free fold, the folded grid
still carries one pilot subcarrier per bin; ``unfold`` re-expands it onto the
full grid by zero insertion and the recorded permutation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .otfs import TimeSignal, time_vector, unvec


class AliasCollisionError(ValueError):
    """Two active subcarriers fold onto the same reduced-rate bin."""


def alias_frequency(f0: float, fs_prime: float) -> float:
    """Fold a frequency into [0, fs_prime) under sampling at fs_prime."""
    if fs_prime <= 0:
        raise ValueError("fs_prime must be positive")
    return float(np.mod(f0, fs_prime))


def downsample(signal: TimeSignal, kappa: int) -> TimeSignal:
    """Keep samples 0, kappa, 2*kappa, ...; output rate divides by kappa."""
    s = np.asarray(signal.samples)
    if len(s) % kappa != 0:
        raise ValueError(f"length {len(s)} not divisible by kappa={kappa}")
    return TimeSignal(s[::kappa].copy(), signal.rate_hz / kappa)


@dataclass(frozen=True)
class AliasPlan:
    """Where each active subcarrier lands after the fold, and how to undo it.

    row_of_bin[b] is the original active subcarrier that folded bin b carries;
    it is a permutation of the active set exactly when the configuration is
    collision-free.
    """

    kappa: int
    mu: int
    subband_size: int
    active_subcarriers: np.ndarray
    folded_bins: np.ndarray
    row_of_bin: np.ndarray


def build_alias_plan(config: SystemConfig) -> AliasPlan:
    """Fold every active subcarrier through alias_frequency and invert the map."""
    if config.mu != config.kappa:
        raise ValueError("mu != kappa")
    m, kappa, mu = config.m_tau, config.kappa, config.mu
    n_bins = m // kappa
    active = np.arange(0, m, mu)
    fs_prime = config.f_s / kappa
    folded = np.array(
        [round(alias_frequency(a * config.delta_f, fs_prime) / config.delta_f) for a in active],
        dtype=int,
    )
    row_of_bin = np.full(n_bins, -1, dtype=int)
    for a, b in zip(active, folded):
        if row_of_bin[b] != -1:
            raise AliasCollisionError(
                f"subcarriers {row_of_bin[b]} and {a} both fold to bin {b}"
            )
        row_of_bin[b] = a
    return AliasPlan(
        kappa=kappa,
        mu=mu,
        subband_size=n_bins,
        active_subcarriers=active,
        folded_bins=folded,
        row_of_bin=row_of_bin,
    )


def _reduced_blocks(y_reduced, config: SystemConfig) -> np.ndarray:
    y = np.asarray(y_reduced.samples if isinstance(y_reduced, TimeSignal) else y_reduced)
    n_bins = config.n_folded_bins
    if y.size != n_bins * config.n_nu:
        raise ValueError(f"reduced frame length {y.size} != {n_bins * config.n_nu}")
    return y.reshape((n_bins, config.n_nu), order="F")


def unfold(y_reduced, plan: AliasPlan, config: SystemConfig) -> np.ndarray:
    """Reduced-rate frame -> unfolded full DD grid.

    Per-symbol DFT gives the folded TF grid; each folded bin is placed (scaled
    by sqrt(kappa) so pilot levels match the full-rate receiver) onto its
    original subcarrier row; the SFFT of that zero-inserted grid is the
    unfolded DD grid.
    """
    blocks = _reduced_blocks(y_reduced, config)
    folded_tf = np.fft.fft(blocks, axis=0, norm="ortho")
    full_tf = np.zeros((config.m_tau, config.n_nu), dtype=complex)
    full_tf[plan.row_of_bin, :] = np.sqrt(plan.kappa) * folded_tf
    return np.fft.fft(np.fft.ifft(full_tf, axis=0, norm="ortho"), axis=1, norm="ortho")


def unfold_adjoint(y_uf_grid: np.ndarray, plan: AliasPlan, config: SystemConfig) -> np.ndarray:
    """Adjoint of ``unfold`` as a map from reduced samples, zero-stuffed to full rate.

    Gives <unfold(x), g> == <x_fullrate_grid, unfold_adjoint(g)> where the
    reduced samples sit at indices 0, kappa, ... of the returned vector; used
    to evaluate matched-filter correlations against unfolded observations with
    full-rate references.
    """
    grid = np.asarray(y_uf_grid)
    tf = np.fft.fft(np.fft.ifft(grid, axis=1, norm="ortho"), axis=0, norm="ortho")
    folded = np.sqrt(plan.kappa) * tf[plan.row_of_bin, :]
    reduced = np.fft.ifft(folded, axis=0, norm="ortho").flatten(order="F")
    z = np.zeros(config.frame_len, dtype=complex)
    z[:: plan.kappa] = reduced
    return z


def reduced_dd_vector(y_reduced, config: SystemConfig) -> np.ndarray:
    """Folded DD-domain vector of a reduced-rate frame (no unfolding).

    Doppler DFT across symbols of the reduced blocks; this is the observation
    the reduced-rate data detector works on.
    """
    blocks = _reduced_blocks(y_reduced, config)
    return np.fft.fft(blocks, axis=1, norm="ortho").flatten(order="F")


def reduced_path_observation(
    s_time: np.ndarray, delay_tap: int, doppler_tap: int, config: SystemConfig
) -> np.ndarray:
    """Folded DD observation of a unit-gain integer-tap path, matrix-free.

    Gathers the downsampled samples of the shifted/ramped full-rate signal and
    applies the Doppler DFT; equivalent to (F_N (x) I) D_kappa Pi^l Delta^k s.
    """
    s = np.asarray(s_time)
    mn = config.frame_len
    q = np.arange(mn // config.kappa)
    idx = (q * config.kappa - delay_tap) % mn
    gathered = s[idx] * np.exp(2j * np.pi * doppler_tap * (q * config.kappa - delay_tap) / mn)
    blocks = gathered.reshape((config.n_folded_bins, config.n_nu), order="F")
    return np.fft.fft(blocks, axis=1, norm="ortho").flatten(order="F")


def reduced_path_response(
    x_dd: np.ndarray, delay_tap: int, doppler_tap: int, plan: AliasPlan, config: SystemConfig
) -> np.ndarray:
    """Unfolded DD response of a unit-gain integer-tap path to DD grid ``x_dd``.

    Modulate, shift/ramp, downsample, unfold: the per-path forward model of
    the reduced-rate receiver.
    """
    s = time_vector(np.asarray(x_dd))
    mn = config.frame_len
    q = np.arange(mn // config.kappa)
    idx = (q * config.kappa - delay_tap) % mn
    gathered = s[idx] * np.exp(2j * np.pi * doppler_tap * (q * config.kappa - delay_tap) / mn)
    return unfold(gathered, plan, config)
