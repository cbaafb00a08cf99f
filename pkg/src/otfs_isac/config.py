"""System configuration, parameter search, and radar resolution formulas.

The transmitter runs at the full rate f_s = m_tau * delta_f while both
receivers sample at f_s / kappa.  A configuration is usable only when the
pilot impulse train folds injectively under that downsampling, which is what
``validate`` and ``select_params`` enforce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value


class ConfigError(ValueError):
    """Raised when a SystemConfig violates one of its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    """Grid geometry and rate plan for one OTFS ISAC link.

    Attributes:
        m_tau: number of delay bins (== number of subcarriers).
        n_nu: number of Doppler bins (== number of time symbols).
        delta_f: subcarrier spacing in Hz.
        f_c: carrier frequency in Hz.
        kappa: receiver downsampling factor (integer >= 1).
        mu: active-subcarrier spacing of the pilot scheme; must equal kappa.
        f_s: transmitter sampling rate; derived as m_tau * delta_f when 0.
        pilot_power_ratio_db: pilot-to-data per-symbol energy ratio in dB.
        pilot_doppler_index: Doppler bin carrying the pilot impulses.
    """

    m_tau: int
    n_nu: int
    delta_f: float
    f_c: float
    kappa: int = 1
    mu: int = 1
    f_s: float = 0.0
    pilot_power_ratio_db: float = 10.0
    pilot_doppler_index: int = 0

    def __post_init__(self):
        if self.f_s == 0.0:
            object.__setattr__(self, "f_s", self.m_tau * self.delta_f)

    @property
    def f_s_reduced(self) -> float:
        """Receiver sampling rate f_s / kappa."""
        return self.f_s / self.kappa

    @property
    def frame_len(self) -> int:
        return self.m_tau * self.n_nu

    @property
    def n_folded_bins(self) -> int:
        """Delay bins of the folded grid, m_tau / kappa."""
        return self.m_tau // self.kappa

    @property
    def pilot_delay_period(self) -> int:
        """Delay spacing of the pilot impulse train, m_tau / mu."""
        return self.m_tau // self.mu

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.delta_f

    @property
    def pilot_energy_ratio(self) -> float:
        return 10.0 ** (self.pilot_power_ratio_db / 10.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(**d)

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class ResolutionReport:
    range_resolution_m: float
    velocity_resolution_mps: float
    max_unambiguous_range_m: float
    reduced_unambiguous_range_m: float


def validate(config: SystemConfig) -> None:
    """Check all SystemConfig invariants; raise ConfigError on the first violation."""
    if config.m_tau <= 0 or config.n_nu <= 0:
        raise ConfigError("grid dimensions not positive")
    if config.delta_f <= 0 or config.f_c <= 0:
        raise ConfigError("frequencies not positive")
    if config.kappa < 1:
        raise ConfigError("kappa < 1")
    if config.m_tau % config.kappa != 0:
        raise ConfigError("m_tau not divisible by kappa")
    if config.mu != config.kappa:
        raise ConfigError("mu != kappa")
    if abs(config.f_s - config.m_tau * config.delta_f) > 1e-6 * config.f_s:
        raise ConfigError("f_s != m_tau * delta_f")
    if config.m_tau % config.mu != 0:
        raise ConfigError("m_tau not divisible by mu")
    if not 0 <= config.pilot_doppler_index < config.n_nu:
        raise ConfigError("pilot_doppler_index out of range")


def is_valid(config: SystemConfig) -> bool:
    try:
        validate(config)
    except ConfigError:
        return False
    return True


def folded_pilot_occupancy(m_tau: int, kappa: int) -> np.ndarray:
    """Count per folded frequency bin how many active pilot subcarriers land on it.

    Builds the pilot impulse train along the delay axis, takes its DFT to find
    the active subcarriers, and folds those indices modulo m_tau/kappa (the
    aliasing induced by downsampling).  An entry > 1 means an inter-subband
    pilot collision.
    """
    mu = kappa
    period = m_tau // mu
    train = np.zeros(m_tau)
    train[::period] = 1.0
    spectrum = np.fft.fft(train)
    active = np.nonzero(np.abs(spectrum) > 1e-6)[0]
    n_bins = m_tau // kappa
    counts = np.zeros(n_bins, dtype=int)
    np.add.at(counts, active % n_bins, 1)
    return counts


def select_params(
    m_min: int,
    m_max: int,
    kappa_max: int = 2,
    fixed_kappa: Optional[int] = None,
) -> Optional[tuple[int, int]]:
    """Search for the smallest (m_tau, kappa) with collision-free pilot folding.

    Iterates kappa ascending (or uses ``fixed_kappa``) and m_tau ascending;
    a candidate is accepted when every folded frequency bin is occupied by
    exactly one active subcarrier.  Returns None when nothing in range passes.
    """
    if m_min > m_max:
        raise ValueError("m_min > m_max")
    if fixed_kappa is None and kappa_max < 2:
        raise ValueError("kappa_max must be >= 2")
    kappas = [fixed_kappa] if fixed_kappa is not None else range(2, kappa_max + 1)
    for kappa in kappas:
        for m_tau in range(m_min, m_max + 1):
            if m_tau % kappa != 0:
                continue
            counts = folded_pilot_occupancy(m_tau, kappa)
            if np.all(counts == 1):
                return m_tau, kappa
    return None


def resolutions(config: SystemConfig) -> ResolutionReport:
    """Closed-form range/velocity resolution and unambiguous range.

    range resolution   c / (2 delta_f m_tau)
    velocity resolution c delta_f / (2 f_c n_nu)
    max unambiguous range c / (2 delta_f), reduced by mu for pilot-only use.
    """
    c = SPEED_OF_LIGHT
    return ResolutionReport(
        range_resolution_m=c / (2.0 * config.delta_f * config.m_tau),
        velocity_resolution_mps=c * config.delta_f / (2.0 * config.f_c * config.n_nu),
        max_unambiguous_range_m=c / (2.0 * config.delta_f),
        reduced_unambiguous_range_m=c / (2.0 * config.mu * config.delta_f),
    )


def default_config() -> SystemConfig:
    """The 200 MHz / 28 GHz reference configuration (80x80 grid, kappa 16)."""
    return SystemConfig(m_tau=80, n_nu=80, delta_f=2.5e6, f_c=28e9, kappa=16, mu=16)
