"""Core OTFS transforms: DD <-> TF <-> time, with rectangular pulses.

DD grids are complex (m_tau, n_nu) arrays indexed (delay, Doppler); TF grids
are (subcarrier, symbol).  All transforms are unitary, so Parseval holds
exactly and modulate/demodulate are mutual inverses.  Vectorized grids use
column-major (delay-fastest) ordering throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TimeSignal:
    """Complex baseband sample stream tagged with its sampling rate."""

    samples: np.ndarray
    rate_hz: float

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate_hz

    def write_iq(self, path) -> None:
        """Dump as interleaved little-endian float64 (re, im)."""
        out = np.empty(2 * len(self.samples))
        out[0::2] = self.samples.real
        out[1::2] = self.samples.imag
        out.astype("<f8").tofile(path)

    @classmethod
    def read_iq(cls, path, rate_hz: float) -> "TimeSignal":
        raw = np.fromfile(path, dtype="<f8")
        return cls(raw[0::2] + 1j * raw[1::2], rate_hz)


def _check_2d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {x.shape}")
    return x


def isfft(x_dd: np.ndarray) -> np.ndarray:
    """DD -> TF: X_tf = F_M X_dd F_N^H with unitary DFT matrices."""
    x_dd = _check_2d(x_dd)
    return np.fft.fft(np.fft.ifft(x_dd, axis=1, norm="ortho"), axis=0, norm="ortho")


def sfft(y_tf: np.ndarray) -> np.ndarray:
    """TF -> DD, exact inverse of isfft: Y_dd = F_M^H Y_tf F_N."""
    y_tf = _check_2d(y_tf)
    return np.fft.fft(np.fft.ifft(y_tf, axis=0, norm="ortho"), axis=1, norm="ortho")


def heisenberg(x_tf: np.ndarray, rate_hz: float) -> TimeSignal:
    """TF -> time with rectangular pulses.

    Symbol n occupies samples [n*M, (n+1)*M) and equals the unitary inverse
    DFT of TF column n.
    """
    x_tf = _check_2d(x_tf)
    blocks = np.fft.ifft(x_tf, axis=0, norm="ortho")
    return TimeSignal(blocks.flatten(order="F"), rate_hz)


def wigner(signal: TimeSignal, m_tau: int) -> np.ndarray:
    """Time -> TF: per-symbol M-point unitary DFT; inverse of heisenberg."""
    s = np.asarray(signal.samples)
    if len(s) % m_tau != 0:
        raise ValueError(f"signal length {len(s)} not divisible into blocks of {m_tau}")
    blocks = s.reshape((m_tau, -1), order="F")
    return np.fft.fft(blocks, axis=0, norm="ortho")


def vec(x: np.ndarray) -> np.ndarray:
    """Column-major stacking: delay index fastest within each Doppler column."""
    return _check_2d(x).flatten(order="F")


def unvec(v: np.ndarray, m_tau: int, n_nu: int) -> np.ndarray:
    v = np.asarray(v)
    if v.size != m_tau * n_nu:
        raise ValueError(f"vector length {v.size} != {m_tau}*{n_nu}")
    return v.reshape((m_tau, n_nu), order="F")


def modulate(x_dd: np.ndarray, rate_hz: float) -> TimeSignal:
    """Full DD -> time chain (heisenberg of the ISFFT).

    Reduces to an inverse Doppler DFT of the grid, i.e. the time frame is
    vec(X_dd F_N^H).
    """
    x_dd = _check_2d(x_dd)
    return TimeSignal(
        np.fft.ifft(x_dd, axis=1, norm="ortho").flatten(order="F"), rate_hz
    )


def demodulate(signal: TimeSignal, m_tau: int) -> np.ndarray:
    """Full time -> DD chain (SFFT of the Wigner transform)."""
    s = np.asarray(signal.samples)
    if len(s) % m_tau != 0:
        raise ValueError(f"signal length {len(s)} not divisible by m_tau={m_tau}")
    return np.fft.fft(s.reshape((m_tau, -1), order="F"), axis=1, norm="ortho")


def time_vector(x_dd: np.ndarray) -> np.ndarray:
    """Bare modulate: the full-rate sample vector of a DD grid."""
    return np.fft.ifft(_check_2d(x_dd), axis=1, norm="ortho").flatten(order="F")


def dd_grid_of_time(s: np.ndarray, m_tau: int) -> np.ndarray:
    """Bare demodulate for a full-rate sample vector."""
    s = np.asarray(s)
    return np.fft.fft(s.reshape((m_tau, -1), order="F"), axis=1, norm="ortho")
