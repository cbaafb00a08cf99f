"""Reduced-rate communication receiver.

Synchronization correlates the reduced samples against the known full-band
preamble on the full-rate lag grid (zero-stuffed observation), which is the
exact matched filter of the sub-sampled stream; lowpass interpolation first
would discard the aliased bands and widen the timing peak to ~kappa samples.
Detection solves the folded-DD linear model y = G x_e + pilot + w with a
regularized least-squares (MMSE) equalizer, inside an iterative channel
estimation / data cancellation loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.signal

from .config import SystemConfig
from .otfs import TimeSignal, time_vector
from .channel import SINC_HALF_WIDTH, KAISER_BETA
from . import mapping
from .subnyq import AliasPlan, build_alias_plan, unfold, reduced_dd_vector, reduced_path_observation
from .pilot import SpreadCode, spread


class SyncError(RuntimeError):
    """Preamble correlation too weak to trust."""


@dataclass
class SyncResult:
    timing_offset_s: float
    cfo_hz: float
    correlation_peak: float
    confidence: float  # peak-to-sidelobe ratio, dB

    timing_offset_samples: int = 0


@dataclass
class EffectiveChannel:
    """Dense reduced-rate channel matrix and the taps/gains/code it encodes."""

    g_tilde: np.ndarray
    delay_taps: np.ndarray
    doppler_taps: np.ndarray
    gains: np.ndarray
    code: SpreadCode


def interpolate_full_rate(
    signal: TimeSignal, kappa: int, half_width: int = SINC_HALF_WIDTH
) -> TimeSignal:
    """Windowed-sinc reconstruction of the full-rate waveform.

    y[k] = sum_m y_red[m] sinc((k - m kappa)/kappa), Hann-windowed at
    half_width low-rate taps.  Only the sub-band below the reduced Nyquist
    rate is recoverable; use for waveform inspection, not for sync.
    """
    if kappa == 1:
        return TimeSignal(np.asarray(signal.samples).copy(), signal.rate_hz)
    y = np.asarray(signal.samples)
    z = np.zeros(len(y) * kappa, dtype=complex)
    z[::kappa] = y
    t = np.arange(-half_width * kappa, half_width * kappa + 1)
    arg = t / kappa
    window = np.i0(KAISER_BETA * np.sqrt(np.maximum(0.0, 1.0 - (arg / (half_width + 1)) ** 2)))
    kernel = np.sinc(arg) * window / np.i0(KAISER_BETA)
    out = scipy.signal.fftconvolve(z, kernel, mode="same")
    return TimeSignal(out, signal.rate_hz * kappa)


def zero_stuff(signal: TimeSignal, kappa: int) -> TimeSignal:
    """Place reduced samples on the full-rate grid with zeros in between."""
    y = np.asarray(signal.samples)
    z = np.zeros(len(y) * kappa, dtype=complex)
    z[::kappa] = y
    return TimeSignal(z, signal.rate_hz * kappa)


def _circular_xcorr(y: np.ndarray, ref: np.ndarray) -> np.ndarray:
    n = len(y)
    ref_pad = np.zeros(n, dtype=complex)
    ref_pad[: len(ref)] = ref
    return np.fft.ifft(np.fft.fft(y) * np.conj(np.fft.fft(ref_pad)))


def estimate_timing(y_full_grid, x_ref: np.ndarray) -> int:
    """Arg-max of the circular cross-correlation magnitude, in full-rate samples."""
    y = np.asarray(y_full_grid.samples if isinstance(y_full_grid, TimeSignal) else y_full_grid)
    return int(np.argmax(np.abs(_circular_xcorr(y, np.asarray(x_ref)))))


def _segmented_timing(y: np.ndarray, ref: np.ndarray, chunk: int) -> int:
    """Non-coherent segmented correlation; robust to CFO across the preamble."""
    acc = np.zeros(len(y))
    for start in range(0, len(ref) - chunk + 1, chunk):
        seg = np.zeros(len(y), dtype=complex)
        seg[start : start + chunk] = ref[start : start + chunk]
        acc += np.abs(_circular_xcorr(y, seg))
    return int(np.argmax(acc))


def estimate_cfo(
    y_reduced: TimeSignal,
    x_ref_full: np.ndarray,
    tau_samples: int,
    kappa: int,
    f_init: float = 0.0,
    lags: Sequence[int] = (1, 4, 16, 64, 128),
) -> float:
    """Frequency offset from products of received samples and the known reference.

    z[m] = y[m] conj(x_ref[m kappa - tau]) is a noisy tone at the offset; its
    frequency is read off autocorrelation phases at a ladder of lags, each
    one refining the previous estimate within its own unambiguous range.
    Valid for offsets below half the reduced sampling rate.
    """
    y = np.asarray(y_reduced.samples)
    fs = y_reduced.rate_hz * kappa
    return _cfo_ladder(y, np.asarray(x_ref_full), tau_samples, kappa, fs, f_init, lags)


def synchronize(
    y_reduced: TimeSignal,
    preamble_samples: np.ndarray,
    training_time: np.ndarray,
    training_offset: int,
    kappa: int,
    confidence_db: float = 6.0,
    search_chunk: int = 256,
    lags: Sequence[int] = (1, 4, 16, 64, 128),
) -> SyncResult:
    """Two-pass timing + CFO recovery from a reduced-rate capture.

    Pass 1 finds coarse timing by CFO-tolerant segmented correlation; the CFO
    is then estimated on the training section and the timing refined by a
    coherent correlation of the derotated stream near the coarse peak.
    Raises SyncError when the final peak-to-sidelobe ratio falls below
    confidence_db.
    """
    y = np.asarray(y_reduced.samples)
    fs = y_reduced.rate_hz * kappa
    n_full = len(y) * kappa
    z = np.zeros(n_full, dtype=complex)
    z[::kappa] = y
    ref = np.asarray(preamble_samples)

    tau0 = _segmented_timing(z, ref, search_chunk)
    f0 = _cfo_ladder(y, training_time, tau0 + training_offset, kappa, fs, 0.0, lags)
    n = np.arange(n_full)
    z_derot = z * np.exp(-2j * np.pi * f0 * n / fs)
    xc = np.abs(_circular_xcorr(z_derot, ref))
    window = (tau0 + np.arange(-2 * kappa, 2 * kappa + 1)) % n_full
    tau = int(window[np.argmax(xc[window])])
    f_hat = _cfo_ladder(y, training_time, tau + training_offset, kappa, fs, f0, lags)

    sidelobes = xc.copy()
    sidelobes[(tau + np.arange(-2, 3)) % n_full] = 0.0
    confidence = 20.0 * np.log10(xc[tau] / max(sidelobes.max(), 1e-300))
    if confidence < confidence_db:
        raise SyncError(f"peak-to-sidelobe {confidence:.1f} dB below {confidence_db} dB")
    return SyncResult(
        timing_offset_s=tau / fs,
        cfo_hz=f_hat,
        correlation_peak=float(xc[tau]),
        confidence=float(confidence),
        timing_offset_samples=tau,
    )


def _cfo_ladder(
    y_red: np.ndarray,
    ref_full: np.ndarray,
    start_full: int,
    kappa: int,
    fs: float,
    f_init: float,
    lags: Sequence[int],
) -> float:
    """Lag-ladder phase-slope estimate of the CFO against a known reference."""
    n_ref = len(ref_full)
    n_full = len(y_red) * kappa
    m0 = int(np.ceil(start_full / kappa))
    m = np.arange(m0, m0 + n_ref // kappa)
    ridx = m * kappa - start_full
    keep = (ridx >= 0) & (ridx < n_ref)
    m, ridx = m[keep], ridx[keep]
    zt = y_red[m % len(y_red)] * np.conj(ref_full[ridx])
    t_red = kappa / fs
    mm = np.arange(len(zt))
    f_hat = f_init
    for lag in lags:
        if lag >= len(zt) // 2:
            break
        zz = zt * np.exp(-2j * np.pi * f_hat * mm * t_red)
        acc = np.sum(zz[lag:] * np.conj(zz[:-lag]))
        f_hat += np.angle(acc) / (2 * np.pi * lag * t_red)
    return float(f_hat)


def compensate_cfo(signal: TimeSignal, cfo_hz: float) -> TimeSignal:
    n = np.arange(len(signal.samples))
    return TimeSignal(
        np.asarray(signal.samples) * np.exp(-2j * np.pi * cfo_hz * n / signal.rate_hz),
        signal.rate_hz,
    )


# ---------------------------------------------------------------------------
# channel estimation and detection


def estimate_coefficients(
    y_uf: np.ndarray,
    taps: Sequence[tuple],
    pilot_grid: np.ndarray,
    config: SystemConfig,
    plan: Optional[AliasPlan] = None,
    full_rate: bool = False,
) -> np.ndarray:
    """Per-path gains by averaging the DD grid over all mu pilot copies.

    For each path the unit-gain model response of the pilot is computed at
    the path's taps (through the reduced pipeline, or the full-rate one with
    ``full_rate``); the gain is the mean of observation/model over the pilot
    support cells, which compensates the channel phase exactly.  At full rate
    the mu copies carry independent noise and averaging reduces the estimator
    variance by mu; after downsampling the copies are replicas of one another
    and the averaging gain is gone (the mu-fold pilot SINR loss of the
    reduced receiver).
    """
    if plan is None and not full_rate:
        plan = build_alias_plan(config)
    pilot_grid = np.asarray(pilot_grid)
    peak = np.abs(pilot_grid).max()
    if peak < 1e-12:
        raise ValueError("pilot grid has no energy")
    y = np.asarray(y_uf)
    s_pilot = time_vector(pilot_grid)
    mn = config.frame_len
    gains = np.zeros(len(taps), dtype=complex)
    for i, (l, k) in enumerate(taps):
        if full_rate:
            n_idx = np.arange(mn)
            shifted = np.roll(s_pilot * np.exp(2j * np.pi * k * n_idx / mn), l)
            model = np.fft.fft(
                shifted.reshape((config.m_tau, config.n_nu), order="F"),
                axis=1, norm="ortho",
            )
        else:
            q = np.arange(mn // config.kappa)
            idx = (q * config.kappa - l) % mn
            gathered = s_pilot[idx] * np.exp(2j * np.pi * k * (q * config.kappa - l) / mn)
            model = unfold(gathered, plan, config)
        support = np.abs(model) > 1e-6 * np.abs(model).max()
        gains[i] = np.mean(y[support] / model[support])
    return gains


def build_effective_channel(
    taps: Sequence[tuple],
    gains: Sequence[complex],
    code: SpreadCode,
    config: SystemConfig,
) -> EffectiveChannel:
    """Materialize the reduced-rate channel matrix over effective symbols.

    For one path the downsampled response of effective symbol (p', n) has a
    closed form: reduced sample q picks full-rate sample (q kappa - l), which
    lives in delay slice j and sub-band row a of the spread grid; assembling
    those entries and applying the Doppler DFT across symbols yields the
    (MN/kappa) x ((M/kappa) N) matrix without any per-basis pipeline runs.
    """
    m, n, kappa = config.m_tau, config.n_nu, config.kappa
    b = config.n_folded_bins
    mn = m * n
    n_red = mn // kappa
    dim = b * n
    q = np.arange(n_red)
    mcol = np.arange(n)
    g_rows = np.zeros((n_red, n, b), dtype=complex)
    for (l, k), h in zip(taps, gains):
        r = (q * kappa - l) % mn
        p_r = r % m
        n_r = r // m
        slice_j = p_r // b
        a = p_r % b
        rowphase = h * np.exp(2j * np.pi * k * (q * kappa - l) / mn) * code.values[slice_j]
        colblock = np.exp(2j * np.pi * np.outer(n_r, mcol) / n) / np.sqrt(n)
        part = np.zeros((n_red, n, b), dtype=complex)
        part[q, :, a] = rowphase[:, None] * colblock
        g_rows += part
    g_rows = g_rows.reshape(n, b, dim)
    g_rows = np.fft.fft(g_rows, axis=0, norm="ortho")
    return EffectiveChannel(
        g_tilde=g_rows.reshape(n_red, dim),
        delay_taps=np.array([t[0] for t in taps]),
        doppler_taps=np.array([t[1] for t in taps]),
        gains=np.asarray(gains, dtype=complex),
        code=code,
    )


def pilot_observation(
    pilot_grid: np.ndarray,
    taps: Sequence[tuple],
    gains: Sequence[complex],
    config: SystemConfig,
) -> np.ndarray:
    """Folded-DD contribution of the superimposed pilot under the given channel."""
    s_pilot = time_vector(np.asarray(pilot_grid))
    out = np.zeros(config.frame_len // config.kappa, dtype=complex)
    for (l, k), h in zip(taps, gains):
        out += h * reduced_path_observation(s_pilot, l, k, config)
    return out


def mmse_detect(
    y_reduced_dd: np.ndarray,
    channel: EffectiveChannel,
    noise_var: float,
    modulation: Optional[str] = None,
):
    """Regularized LS estimate of the effective symbols, plus hard decisions.

    Solves (G^H G + noise_var I) x = G^H y.  With noise_var == 0 the solve
    falls back to a pseudo-inverse and a rank-deficient G raises LinAlgError.
    """
    g = channel.g_tilde
    y = np.asarray(y_reduced_dd)
    if noise_var > 0:
        gram = g.conj().T @ g + noise_var * np.eye(g.shape[1])
        x_soft = np.linalg.solve(gram, g.conj().T @ y)
    else:
        x_soft, _, rank, _ = np.linalg.lstsq(g, y, rcond=None)
        if rank < g.shape[1]:
            raise np.linalg.LinAlgError(
                f"effective channel rank {rank} < {g.shape[1]} with zero noise variance"
            )
    if modulation is None:
        return x_soft, None
    order = mapping.order_of(modulation)
    idx, points, bits = mapping.demodulate_symbols(x_soft, order)
    return x_soft, (idx, points, bits)


def cancel_interference(
    y_reduced_dd: np.ndarray, channel: EffectiveChannel, x_hat: np.ndarray
) -> np.ndarray:
    """Residual after removing the detected data: y - G x_hat."""
    return np.asarray(y_reduced_dd) - channel.g_tilde @ np.asarray(x_hat)


def estimate_gains_ls(
    y_reduced,
    ref_time_full: np.ndarray,
    taps: Sequence[tuple],
    config: SystemConfig,
) -> np.ndarray:
    """Least-squares path gains from a known full-band reference frame.

    Stacks the reduced-rate observations of the unit-gain per-path responses
    of the reference and solves for the gains jointly; used on the preamble
    training block where no data interference is present.
    """
    y = np.asarray(y_reduced.samples if isinstance(y_reduced, TimeSignal) else y_reduced)
    y_dd = reduced_dd_vector(y, config)
    cols = [reduced_path_observation(ref_time_full, l, k, config) for l, k in taps]
    a = np.stack(cols, axis=1)
    g, *_ = np.linalg.lstsq(a, y_dd, rcond=None)
    return g


@dataclass
class DecodeResult:
    bits: np.ndarray
    symbols: np.ndarray
    gains: np.ndarray
    iterations: int
    converged: bool
    residual_energy: list


def iterative_decode(
    y_reduced,
    taps: Sequence[tuple],
    pilot_grid: np.ndarray,
    code: SpreadCode,
    config: SystemConfig,
    noise_var: float,
    modulation: str,
    eps: float = 1e-3,
    max_iter: int = 10,
    initial_gains: Optional[np.ndarray] = None,
    plan: Optional[AliasPlan] = None,
) -> DecodeResult:
    """Iterative channel estimation and data detection on one ISAC block.

    The first gain estimate comes from the unfolded superimposed pilots (or
    ``initial_gains``, e.g. from the preamble training block).  Each round
    then rebuilds the effective channel, subtracts the pilot contribution,
    MMSE-detects the data, and refreshes the gains with a data-aided least
    squares against the per-path response of the full detected frame.  The
    data-aided refresh is what makes the loop contract: a pilot-only
    re-estimate concentrates any symbol error from the handful of cells the
    folded pilot shares with the data, while the joint fit dilutes it across
    the whole frame.  Terminates when the gains move by at most eps
    (relative) and the hard decisions repeat.
    """
    if plan is None:
        plan = build_alias_plan(config)
    y = np.asarray(y_reduced.samples if isinstance(y_reduced, TimeSignal) else y_reduced)
    y_dd = reduced_dd_vector(y, config)
    order = mapping.order_of(modulation)
    s_pilot = time_vector(np.asarray(pilot_grid))

    if initial_gains is not None:
        gains = np.asarray(initial_gains, dtype=complex)
    else:
        y_uf = unfold(y, plan, config)
        gains = estimate_coefficients(y_uf, taps, pilot_grid, config, plan)

    prev_idx = None
    residuals = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        channel = build_effective_channel(taps, gains, code, config)
        y_data = y_dd - pilot_observation(pilot_grid, taps, gains, config)
        _, hard = mmse_detect(y_data, channel, noise_var, modulation)
        idx, points, bits = hard
        # data-aided gain refresh on the full detected frame
        x_hat_grid = points.reshape((config.n_folded_bins, config.n_nu), order="F")
        s_frame = s_pilot + time_vector(spread(x_hat_grid, code, config))
        cols = np.stack(
            [reduced_path_observation(s_frame, l, k, config) for l, k in taps], axis=1
        )
        new_gains, *_ = np.linalg.lstsq(cols, y_dd, rcond=None)
        gain_step = float(
            np.max(np.abs(new_gains - gains)) / max(np.max(np.abs(gains)), 1e-300)
        )
        residuals.append(float(np.linalg.norm(y_dd - cols @ new_gains) ** 2))
        gains = new_gains
        if prev_idx is not None and gain_step <= eps and np.array_equal(idx, prev_idx):
            prev_idx = idx
            converged = True
            break
        prev_idx = idx
    return DecodeResult(
        bits=mapping.symbols_to_bits(prev_idx, order),
        symbols=mapping.constellation(order)[prev_idx],
        gains=gains,
        iterations=iterations,
        converged=converged,
        residual_energy=residuals,
    )


def _dd_to_reduced_time(y_dd: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Invert the Doppler DFT of reduced_dd_vector back to reduced samples."""
    b = config.n_folded_bins
    grid = np.asarray(y_dd).reshape((b, config.n_nu), order="F")
    return np.fft.ifft(grid, axis=1, norm="ortho").flatten(order="F")
