"""Gray-coded square QAM with unit average symbol energy (QPSK/16/64-QAM)."""

from __future__ import annotations

import numpy as np

MODULATIONS = {"QPSK": 4, "16QAM": 16, "64QAM": 64}


def order_of(modulation: str) -> int:
    try:
        return MODULATIONS[modulation.upper()]
    except KeyError:
        raise ValueError(f"unknown modulation {modulation!r}") from None


def bits_per_symbol(order: int) -> int:
    b = int(np.log2(order))
    if 2 ** b != order or b % 2 != 0:
        raise ValueError(f"order {order} is not an even power of two")
    return b


def _gray_levels(m: int) -> np.ndarray:
    """PAM levels ordered so adjacent Gray codes sit on adjacent amplitudes."""
    pam = 2 * np.arange(m) - (m - 1)
    gray = np.arange(m) ^ (np.arange(m) >> 1)
    levels = np.empty(m)
    levels[gray] = pam
    return levels


def constellation(order: int) -> np.ndarray:
    """Constellation points indexed by symbol value, E{|c|^2} == 1.

    The symbol's high bits select the I level, low bits the Q level, each
    half Gray-coded.
    """
    b = bits_per_symbol(order)
    m = 2 ** (b // 2)
    lv = _gray_levels(m)
    scale = np.sqrt(2.0 * np.mean((2 * np.arange(m) - (m - 1)) ** 2))
    return ((lv[:, None] + 1j * lv[None, :]) / scale).flatten()


def bits_to_symbols(bits: np.ndarray, order: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    b = bits_per_symbol(order)
    if bits.size % b != 0:
        raise ValueError(f"bit count {bits.size} not a multiple of {b}")
    groups = bits.reshape(-1, b)
    idx = groups @ (1 << np.arange(b - 1, -1, -1))
    return constellation(order)[idx]


def symbols_to_bits(idx: np.ndarray, order: int) -> np.ndarray:
    b = bits_per_symbol(order)
    idx = np.asarray(idx, dtype=np.int64)
    return ((idx[:, None] >> np.arange(b - 1, -1, -1)) & 1).flatten()


def hard_decision(symbols: np.ndarray, order: int) -> np.ndarray:
    """Nearest-point indices; per-axis slicing is exact for square Gray QAM."""
    b = bits_per_symbol(order)
    m = 2 ** (b // 2)
    lv = _gray_levels(m)
    scale = np.sqrt(2.0 * np.mean((2 * np.arange(m) - (m - 1)) ** 2))
    sym = np.asarray(symbols) * scale
    level_to_gray = np.argsort(lv)  # position of the p-th smallest level -> gray value

    def slice_axis(v):
        # levels are the odd integers -(m-1) .. m-1
        pos = np.clip(np.round((v + m - 1) / 2.0), 0, m - 1).astype(np.int64)
        return level_to_gray[pos]

    return slice_axis(sym.real) * m + slice_axis(sym.imag)


def demodulate_symbols(symbols: np.ndarray, order: int):
    """Hard decisions: returns (symbol indices, sliced constellation points, bits)."""
    idx = hard_decision(symbols, order)
    return idx, constellation(order)[idx], symbols_to_bits(idx, order)


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, n, dtype=np.int64)
