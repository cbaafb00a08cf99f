"""Delay-Doppler channels: exact integer-tap operator and sample-level backend.

The integer-tap path operator works on DD vectors in operator form (inverse
Doppler DFT, frame-level cyclic shift, per-sample phase ramp, Doppler DFT)
and never materializes the MN x MN matrix.  The time backend applies
fractional delays with a Hann-windowed sinc kernel plus CFO / timing offset /
AWGN, and matches the operator backend exactly on integer taps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy.special import j0

from .config import SystemConfig
from .otfs import TimeSignal, time_vector, dd_grid_of_time, unvec

# windowed-sinc fractional-delay kernel; Kaiser(14)/48 keeps the interpolation
# error below 1e-6 through 90% of the Nyquist band
SINC_HALF_WIDTH = 48
KAISER_BETA = 14.0


@dataclass
class Path:
    """One propagation path.

    Delay and Doppler are kept in tap units (delay bins / Doppler bins); float
    values select the fractional time-domain backend, integer values are exact
    in either backend.
    """

    gain: complex
    delay_tap: float
    doppler_tap: float

    @property
    def is_integer(self) -> bool:
        return (
            abs(self.delay_tap - round(self.delay_tap)) < 1e-9
            and abs(self.doppler_tap - round(self.doppler_tap)) < 1e-9
        )

    def delay_seconds(self, config: SystemConfig) -> float:
        return self.delay_tap / (config.m_tau * config.delta_f)

    def doppler_hz(self, config: SystemConfig) -> float:
        return self.doppler_tap * config.delta_f / config.n_nu

    @classmethod
    def from_physical(
        cls, gain: complex, delay_s: float, doppler_hz: float, config: SystemConfig
    ) -> "Path":
        return cls(
            gain=gain,
            delay_tap=delay_s * config.m_tau * config.delta_f,
            doppler_tap=doppler_hz * config.n_nu / config.delta_f,
        )


@dataclass
class AgingModel:
    """Block-to-block gain decorrelation, Jakes style.

    rho is the per-block temporal correlation; beta the variance of the
    innovation.  ``from_doppler`` derives rho = J0(2 pi f_q T_block).
    """

    rho: float
    doppler_hz: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if abs(self.rho) > 1.0:
            raise ValueError("|rho| must be <= 1")

    @classmethod
    def from_doppler(cls, doppler_hz: float, block_duration_s: float, beta: float = 1.0):
        return cls(rho=float(j0(2 * np.pi * doppler_hz * block_duration_s)),
                   doppler_hz=doppler_hz, beta=beta)


@dataclass
class ChannelSpec:
    paths: list
    noise_variance: float = 0.0
    cfo_hz: float = 0.0
    timing_offset_s: float = 0.0
    aging: Optional[AgingModel] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for p in d["paths"]:
            p["gain"] = [complex(p["gain"]).real, complex(p["gain"]).imag]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        d = dict(d)
        paths = [
            Path(gain=complex(p["gain"][0], p["gain"][1]),
                 delay_tap=p["delay_tap"], doppler_tap=p["doppler_tap"])
            for p in d.pop("paths")
        ]
        aging = d.pop("aging", None)
        return cls(paths=paths, aging=AgingModel(**aging) if aging else None, **d)

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_json(cls, path) -> "ChannelSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def complex_awgn(n: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, per-sample variance ``variance``."""
    if variance == 0.0:
        return np.zeros(n, dtype=complex)
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def apply_dd_operator(x: np.ndarray, path: Path, config: SystemConfig) -> np.ndarray:
    """Apply the unit-gain DD path operator for integer taps to a DD vector.

    Operator form of (Doppler DFT) . cyclic-shift^l . phase-ramp^k .
    (inverse Doppler DFT); rejects fractional taps.
    """
    if not path.is_integer:
        raise ValueError("fractional taps: use the time-domain backend")
    m, n = config.m_tau, config.n_nu
    mn = m * n
    x = np.asarray(x)
    if x.size != mn:
        raise ValueError(f"DD vector length {x.size} != {mn}")
    l = int(round(path.delay_tap)) % mn
    k = int(round(path.doppler_tap))
    s = time_vector(unvec(x, m, n))
    ramp = np.exp(2j * np.pi * k * np.arange(mn) / mn)
    shifted = np.roll(s * ramp, l)
    return dd_grid_of_time(shifted, m).flatten(order="F")


def apply_channel(
    x: np.ndarray,
    spec: ChannelSpec,
    config: SystemConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """y = sum_i h_i Gamma_i x + w on DD vectors (integer-tap backend)."""
    y = np.zeros(config.frame_len, dtype=complex)
    for p in spec.paths:
        y += p.gain * apply_dd_operator(x, p, config)
    if spec.noise_variance > 0:
        if rng is None:
            raise ValueError("noise requested but no rng given")
        y += complex_awgn(config.frame_len, spec.noise_variance, rng)
    return y


def sinc_kernel(frac: float, half_width: int = SINC_HALF_WIDTH, beta: float = KAISER_BETA):
    """Kaiser-windowed sinc taps for a sub-sample shift of ``frac`` in [0, 1)."""
    j = np.arange(-half_width, half_width + 1)
    arg = j - frac
    window = np.i0(beta * np.sqrt(np.maximum(0.0, 1.0 - (arg / (half_width + 1)) ** 2)))
    return j, np.sinc(arg) * window / np.i0(beta)


def fractional_delay_cyclic(
    s: np.ndarray, delay_samples: float, half_width: int = SINC_HALF_WIDTH
) -> np.ndarray:
    """Cyclically delay a sample vector by a possibly fractional amount.

    Integer delays reduce to an exact roll; fractional ones apply the
    windowed-sinc kernel circularly.
    """
    s = np.asarray(s)
    n_int = int(np.floor(delay_samples))
    frac = delay_samples - n_int
    if frac < 1e-12:
        return np.roll(s, n_int)
    if frac > 1 - 1e-12:
        return np.roll(s, n_int + 1)
    j, kernel = sinc_kernel(frac, half_width)
    full = np.zeros(len(s))
    np.add.at(full, (n_int + j) % len(s), kernel)
    return np.fft.ifft(np.fft.fft(s) * np.fft.fft(full))


def apply_time_channel(
    signal: TimeSignal,
    spec: ChannelSpec,
    config: SystemConfig,
    rng: Optional[np.random.Generator] = None,
) -> TimeSignal:
    """Sample-level channel: fractional delays, Doppler ramps, CFO, offset, AWGN.

    Per path the phase ramp is referenced to the delayed signal,
    exp(j 2 pi nu (t - tau)), which makes integer-tap paths agree exactly with
    the DD operator backend.  Frame edges wrap cyclically.
    """
    s = np.asarray(signal.samples)
    fs = signal.rate_hz
    n = np.arange(len(s))
    r = np.zeros(len(s), dtype=complex)
    for p in spec.paths:
        d = p.delay_tap * fs / (config.m_tau * config.delta_f)  # samples
        nu = p.doppler_hz(config)
        delayed = fractional_delay_cyclic(s, d)
        r += p.gain * delayed * np.exp(2j * np.pi * nu * (n - d) / fs)
    if spec.timing_offset_s:
        r = fractional_delay_cyclic(r, spec.timing_offset_s * fs)
    if spec.cfo_hz:
        r = r * np.exp(2j * np.pi * spec.cfo_hz * n / fs)
    if spec.noise_variance > 0:
        if rng is None:
            raise ValueError("noise requested but no rng given")
        r = r + complex_awgn(len(s), spec.noise_variance, rng)
    return TimeSignal(r, fs)


def gen_rician(
    config: SystemConfig,
    rng: np.random.Generator,
    k_factor_db: float = 10.0,
    n_paths: int = 4,
    max_delay_tap: Optional[int] = None,
    max_doppler_tap: int = 2,
    distinct_folded: bool = True,
) -> ChannelSpec:
    """Random Rician channel: one LoS path plus Rayleigh scatterers.

    Powers are normalized so sum E{|h_i|^2} = 1.  With ``distinct_folded`` the
    scatterer taps avoid sharing a (delay mod m_tau/mu, doppler) class, which
    keeps the periodic pilots of different paths separable.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    k_lin = 10.0 ** (k_factor_db / 10.0)
    los_power = k_lin / (k_lin + 1.0)
    los = Path(
        gain=np.sqrt(los_power) * np.exp(2j * np.pi * rng.random()),
        delay_tap=0,
        doppler_tap=0,
    )
    paths = [los]
    if n_paths == 1:
        # renormalize the single path to unit power
        paths[0].gain /= np.sqrt(los_power)
        return ChannelSpec(paths=paths)
    if max_delay_tap is None:
        max_delay_tap = config.m_tau - 1
    scatter_power = (1.0 - los_power) / (n_paths - 1)
    period = config.pilot_delay_period
    used = {(0 % period, 0)}
    attempts = 0
    while len(paths) < n_paths:
        attempts += 1
        if attempts > 10000:
            raise RuntimeError("could not place distinct scatterer taps")
        l = int(rng.integers(1, max_delay_tap + 1))
        k = int(rng.integers(-max_doppler_tap, max_doppler_tap + 1))
        key = (l % period, k)
        if distinct_folded and key in used:
            continue
        used.add(key)
        g = np.sqrt(scatter_power / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
        paths.append(Path(gain=g, delay_tap=l, doppler_tap=k))
    return ChannelSpec(paths=paths)


def age_channel(
    spec: ChannelSpec, aging: AgingModel, rng: np.random.Generator
) -> ChannelSpec:
    """One aging step: h <- rho h + sqrt(1 - rho^2) e, e ~ CN(0, beta)."""
    rho = aging.rho
    scale = np.sqrt(max(0.0, 1.0 - rho * rho))
    new_paths = []
    for p in spec.paths:
        e = np.sqrt(aging.beta / 2.0) * (rng.standard_normal() + 1j * rng.standard_normal())
        new_paths.append(Path(gain=rho * p.gain + scale * e,
                              delay_tap=p.delay_tap, doppler_tap=p.doppler_tap))
    return ChannelSpec(
        paths=new_paths,
        noise_variance=spec.noise_variance,
        cfo_hz=spec.cfo_hz,
        timing_offset_s=spec.timing_offset_s,
        aging=spec.aging,
    )
