"""Experiment harness: scenario files, Monte Carlo sweeps, metrics, CSV export.

Every experiment is driven by a Scenario (JSON-serializable); a (scenario,
seed) pair reproduces its outputs byte for byte.  Trials draw their RNG
streams from spawned seed sequences and are reduced in trial order, so thread
count never changes results.
"""

from __future__ import annotations

import json
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path as FsPath
from typing import Optional

import numpy as np
import scipy
import scipy.signal

from . import __version__
from .config import SystemConfig, ResolutionReport, resolutions, validate, SPEED_OF_LIGHT
from .otfs import TimeSignal, time_vector, dd_grid_of_time, modulate
from .channel import (
    Path,
    ChannelSpec,
    apply_time_channel,
    gen_rician,
    complex_awgn,
    fractional_delay_cyclic,
)
from .subnyq import build_alias_plan, downsample, unfold, unfold_adjoint, reduced_path_observation, reduced_dd_vector
from .pilot import (
    make_pilot_grid,
    zadoff_chu,
    spread,
    assemble_block,
    random_effective_grid,
    papr,
    papr_bound,
)
from . import mapping
from .radar import detect, delay_doppler_xcorr, write_targets_csv, write_surface_csv, default_doppler_taps
from .comm import build_effective_channel, mmse_detect, pilot_observation, estimate_coefficients

EXPERIMENTS = (
    "radar_two_target",
    "radar_resolution",
    "ber_sweep",
    "sinr_check",
    "papr_check",
)


@dataclass
class Scenario:
    experiment: str
    system: SystemConfig
    snr_db_grid: list = field(default_factory=list)
    modulation: str = "QPSK"
    trials: int = 200
    seed: int = 0
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.experiment in ("ber_sweep", "sinr_check") and not self.snr_db_grid:
            raise ValueError(f"{self.experiment} needs a non-empty snr_db_grid")
        validate(self.system)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system"] = self.system.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        d["system"] = SystemConfig.from_dict(d["system"])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def add(self, scenario_id: str, metric: str, value: float,
            ci_low: float = float("nan"), ci_high: float = float("nan"),
            seed: int = 0) -> None:
        self.rows.append(
            dict(scenario_id=scenario_id, metric=metric, value=value,
                 ci_low=ci_low, ci_high=ci_high, seed=seed)
        )

    def get(self, metric: str) -> float:
        for row in self.rows:
            if row["metric"] == metric:
                return row["value"]
        raise KeyError(metric)

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("scenario_id,metric,value,ci_low,ci_high,seed\n")
            for r in self.rows:
                f.write(
                    f"{r['scenario_id']},{r['metric']},{r['value']!r},"
                    f"{r['ci_low']!r},{r['ci_high']!r},{r['seed']}\n"
                )


# ---------------------------------------------------------------------------
# metrics


def ber(bits: np.ndarray, bits_ref: np.ndarray) -> float:
    bits = np.asarray(bits)
    bits_ref = np.asarray(bits_ref)
    if bits.shape != bits_ref.shape:
        raise ValueError("bit streams differ in length")
    return float(np.mean(bits != bits_ref))


def rmse_range(estimates_m, truth_m) -> float:
    e = np.asarray(estimates_m, dtype=float)
    t = np.asarray(truth_m, dtype=float)
    return float(np.sqrt(np.mean((e - t) ** 2)))


def rmse_velocity(estimates_mps, truth_mps) -> float:
    return rmse_range(estimates_mps, truth_mps)


def empirical_sinr(signal: np.ndarray, interference: np.ndarray, noise: np.ndarray) -> float:
    """10 log10( P_signal / (P_interference + P_noise) ) from component arrays."""
    p_s = np.mean(np.abs(np.asarray(signal)) ** 2)
    p_in = np.mean(np.abs(np.asarray(interference)) ** 2) + np.mean(
        np.abs(np.asarray(noise)) ** 2
    )
    return float(10.0 * np.log10(p_s / p_in))


def _mean_ci(values) -> tuple:
    v = np.asarray(values, dtype=float)
    mean = float(v.mean())
    if len(v) < 2:
        return mean, mean, mean
    half = 1.96 * float(v.std(ddof=1)) / np.sqrt(len(v))
    return mean, mean - half, mean + half


# ---------------------------------------------------------------------------
# scene construction helpers


def monostatic_path(
    range_m: float,
    velocity_mps: float,
    config: SystemConfig,
    amplitude: float = 1.0,
    integer_taps: bool = False,
    carrier_phase: bool = True,
) -> Path:
    """Round-trip path for a point target at the given range and radial speed.

    Delay is 2 r / c, Doppler 2 v f_c / c; the complex gain carries the
    round-trip carrier phase exp(-j 2 pi f_c tau) unless disabled.
    """
    res = resolutions(config)
    if integer_taps:
        delay_tap = float(round(range_m / res.range_resolution_m))
        doppler_tap = float(round(velocity_mps / res.velocity_resolution_mps))
        tau = delay_tap / (config.m_tau * config.delta_f)
    else:
        tau = 2.0 * range_m / SPEED_OF_LIGHT
        delay_tap = tau * config.m_tau * config.delta_f
        doppler_tap = (2.0 * velocity_mps * config.f_c / SPEED_OF_LIGHT) * config.n_nu / config.delta_f
    gain = amplitude * (np.exp(-2j * np.pi * config.f_c * tau) if carrier_phase else 1.0)
    return Path(gain=gain, delay_tap=delay_tap, doppler_tap=doppler_tap)


def _isac_block(config: SystemConfig, modulation: str, rng: np.random.Generator):
    """Pilot grid, spread-data grid, and their sum, plus the data bits."""
    code = zadoff_chu(root=1, length=config.kappa)
    pilot = make_pilot_grid(config)
    x_e, bits = random_effective_grid(config, modulation, rng)
    data = spread(x_e, code, config)
    return pilot, data, pilot + data, bits, code, x_e


def _reduced_time_of_paths(s_full: np.ndarray, paths, config: SystemConfig) -> np.ndarray:
    """Reduced-rate samples of a sum of integer-tap paths, matrix-free."""
    mn = config.frame_len
    q = np.arange(mn // config.kappa)
    out = np.zeros(len(q), dtype=complex)
    for p in paths:
        l, k = int(round(p.delay_tap)), int(round(p.doppler_tap))
        idx = (q * config.kappa - l) % mn
        out += p.gain * s_full[idx] * np.exp(2j * np.pi * k * (q * config.kappa - l) / mn)
    return out


# ---------------------------------------------------------------------------
# experiments


def _run_radar_two_target(scn: Scenario, out_dir: FsPath) -> ResultTable:
    cfg = scn.system
    plan = build_alias_plan(cfg)
    res = resolutions(cfg)
    p = scn.params
    targets = p.get(
        "targets",
        [
            {"range_m": 10.0, "velocity_mps": 0.0},
            {"range_m": 30.0, "velocity_mps": 1000.0},
        ],
    )
    snr_db = p.get("snr_db", None)
    max_targets = p.get("max_targets", len(targets))
    true_paths = [
        monostatic_path(t["range_m"], t["velocity_mps"], cfg, integer_taps=True)
        for t in targets
    ]
    true_taps = sorted(
        (int(round(t.delay_tap)), int(round(t.doppler_tap))) for t in true_paths
    )

    seeds = np.random.SeedSequence(scn.seed).spawn(scn.trials)

    def one_trial(seq):
        rng = np.random.default_rng(seq)
        pilot, data, block, _, _, _ = _isac_block(cfg, scn.modulation, rng)
        s_full = time_vector(block)
        paths = [
            Path(gain=t.gain * np.exp(2j * np.pi * rng.random()),
                 delay_tap=t.delay_tap, doppler_tap=t.doppler_tap)
            for t in true_paths
        ]
        y_red = _reduced_time_of_paths(s_full, paths, cfg)
        if snr_db is not None:
            y_red += complex_awgn(len(y_red), 10 ** (-snr_db / 10.0), rng)
        result = detect(y_red, pilot, data, cfg, plan=plan, max_targets=max_targets)
        est_taps = sorted((t.delay_tap, t.doppler_tap) for t in result.targets)
        hit = len(est_taps) == len(true_taps) and all(
            abs(a[0] - b[0]) <= 1 and abs(a[1] - b[1]) <= 1
            for a, b in zip(est_taps, true_taps)
        )
        coarse_ok = len(est_taps) == len(true_taps)
        return hit, result

    hits = []
    last = None
    for seq in seeds:
        h, result = one_trial(seq)
        hits.append(h)
        last = result

    table = ResultTable()
    table.add("radar_two_target", "detection_rate", float(np.mean(hits)), seed=scn.seed)
    for i, t in enumerate(sorted(last.targets, key=lambda t: t.delay_tap)):
        table.add("radar_two_target", f"target{i}_range_m", t.range_m, seed=scn.seed)
        table.add("radar_two_target", f"target{i}_velocity_mps", t.velocity_mps, seed=scn.seed)

    # noise-free reference run for the surface dump and coarse-range rows
    rng = np.random.default_rng(np.random.SeedSequence(scn.seed))
    pilot, data, block, _, _, _ = _isac_block(cfg, scn.modulation, rng)
    s_full = time_vector(block)
    y_red = _reduced_time_of_paths(s_full, true_paths, cfg)
    y_uf = unfold(y_red, plan, cfg)
    z = unfold_adjoint(y_uf, plan, cfg)
    dts = default_doppler_taps(cfg)
    surf = delay_doppler_xcorr(time_vector(pilot), z, np.arange(cfg.pilot_delay_period), dts)
    write_surface_csv(surf, np.arange(cfg.pilot_delay_period), dts, out_dir / "surface_coarse.csv")
    ref = detect(y_red, pilot, data, cfg, plan=plan, max_targets=max_targets)
    write_targets_csv(ref.targets, out_dir / "targets.csv")
    for i, (true_p, t) in enumerate(zip(targets, sorted(ref.targets, key=lambda t: t.delay_tap))):
        coarse_range = (t.delay_tap % cfg.pilot_delay_period) * res.range_resolution_m
        table.add("radar_two_target", f"target{i}_coarse_range_m", coarse_range, seed=scn.seed)
    return table


def _resolution_profile(y_uf, s_pilot, plan, cfg, centre_tap, half_span, step,
                        refs=None):
    taus = np.arange(centre_tap - half_span, centre_tap + half_span + 1e-9, step)
    z = unfold_adjoint(y_uf, plan, cfg)
    if refs is None:
        refs = [fractional_delay_cyclic(s_pilot, t) for t in taus]
    prof = np.array([np.abs(np.vdot(ref, z)) ** 2 for ref in refs])
    return taus, prof


def count_profile_peaks(profile: np.ndarray, min_rel_height: float = 0.2,
                        min_prominence_db: float = 1.0) -> int:
    """Local maxima above a relative floor whose prominence exceeds a dB depth."""
    pk, _ = scipy.signal.find_peaks(profile, height=min_rel_height * profile.max())
    prom = scipy.signal.peak_prominences(profile, pk)[0]
    n = 0
    for p, pr in zip(pk, prom):
        base = max(profile[p] - pr, 1e-300)
        if 10.0 * np.log10(profile[p] / base) >= min_prominence_db:
            n += 1
    return n


def _run_radar_resolution(scn: Scenario, out_dir: FsPath) -> ResultTable:
    cfg = scn.system
    plan = build_alias_plan(cfg)
    res = resolutions(cfg)
    p = scn.params
    r1 = p.get("first_range_m", 10.0)
    sep = p.get("separation_m", 0.8)
    snr_db = p.get("snr_db", 20.0)
    half_span = p.get("half_span_taps", 1.8)
    step = p.get("step_taps", 0.05)
    n_blocks = p.get("blocks_per_trial", 4)
    min_prom_db = p.get("min_prominence_db", 1.5)

    # profile window centred on the scene midpoint, as a resolution figure
    # would plot it; +-1.8 taps keeps both mainlobes in and the half-period
    # sidelobes of the 5-tap-periodic pilot correlation out
    centre = (r1 + sep / 2.0) / res.range_resolution_m
    taus = np.arange(centre - half_span, centre + half_span + 1e-9, step)
    pilot = make_pilot_grid(cfg)
    s_pilot = time_vector(pilot)
    refs = [fractional_delay_cyclic(s_pilot, t) for t in taus]
    code = zadoff_chu(root=1, length=cfg.kappa)
    spec = ChannelSpec(
        paths=[
            monostatic_path(r1, 0.0, cfg),
            monostatic_path(r1 + sep, 0.0, cfg),
        ],
        noise_variance=0.0 if snr_db is None else 10 ** (-snr_db / 10.0),
    )

    seeds = np.random.SeedSequence(scn.seed).spawn(scn.trials)
    counts = []
    first_profile = None
    for seq in seeds:
        rng = np.random.default_rng(seq)
        # integrate the profile over several ISAC blocks: the data ripple is
        # independent per block while the target structure is coherent
        prof = np.zeros(len(taus))
        for _ in range(n_blocks):
            x_e, _ = random_effective_grid(cfg, scn.modulation, rng)
            block = spread(x_e, code, cfg) + pilot
            r = apply_time_channel(modulate(block, cfg.f_s), spec, cfg, rng)
            y_uf = unfold(downsample(r, cfg.kappa), plan, cfg)
            _, one = _resolution_profile(y_uf, s_pilot, plan, cfg, centre,
                                         half_span, step, refs=refs)
            prof += one
        counts.append(count_profile_peaks(prof, min_prominence_db=min_prom_db))
        if first_profile is None:
            first_profile = (taus, prof)

    counts = np.asarray(counts)
    table = ResultTable()
    table.add("radar_resolution", "separation_m", sep, seed=scn.seed)
    table.add("radar_resolution", "fraction_one_peak", float(np.mean(counts == 1)), seed=scn.seed)
    table.add("radar_resolution", "fraction_two_peaks", float(np.mean(counts == 2)), seed=scn.seed)
    table.add("radar_resolution", "range_resolution_m", res.range_resolution_m, seed=scn.seed)
    taus, prof = first_profile
    with open(out_dir / "profile.csv", "w") as f:
        f.write("delay_tap,range_m,value\n")
        for t, v in zip(taus, prof):
            f.write(f"{t!r},{t * res.range_resolution_m!r},{v!r}\n")
    return table


def _rician_from_params(cfg, rng, params) -> ChannelSpec:
    ch = params.get("channel", {})
    return gen_rician(
        cfg,
        rng,
        k_factor_db=ch.get("k_factor_db", 10.0),
        n_paths=ch.get("n_paths", 4),
        max_delay_tap=ch.get("max_delay_tap", None),
        max_doppler_tap=ch.get("max_doppler_tap", 2),
    )


def _run_ber_sweep(scn: Scenario, out_dir: FsPath) -> ResultTable:
    cfg = scn.system
    p = scn.params
    knowledge = p.get("knowledge", "perfect")
    order = mapping.order_of(scn.modulation)
    bps = mapping.bits_per_symbol(order)
    n_sym = cfg.n_folded_bins * cfg.n_nu
    pilot = make_pilot_grid(cfg)
    code = zadoff_chu(root=1, length=cfg.kappa)
    s_pilot = time_vector(pilot)

    table = ResultTable()
    for snr_db in scn.snr_db_grid:
        noise_var = 10 ** (-snr_db / 10.0)
        seeds = np.random.SeedSequence((scn.seed, int(round(snr_db * 1000)))).spawn(scn.trials)

        def one_trial(seq):
            rng = np.random.default_rng(seq)
            spec = _rician_from_params(cfg, rng, p)
            taps = [(int(round(q.delay_tap)), int(round(q.doppler_tap))) for q in spec.paths]
            gains = np.array([q.gain for q in spec.paths])
            bits = mapping.random_bits(n_sym * bps, rng)
            x_e = mapping.bits_to_symbols(bits, order)
            block = spread(x_e.reshape((cfg.n_folded_bins, cfg.n_nu), order="F"), code, cfg) + pilot
            s_full = time_vector(block)
            y_red = _reduced_time_of_paths(s_full, spec.paths, cfg)
            y_red += complex_awgn(len(y_red), noise_var, rng)
            y_dd = reduced_dd_vector(y_red, cfg)
            if knowledge == "perfect":
                est_gains = gains
            else:
                plan = build_alias_plan(cfg)
                y_uf = unfold(y_red, plan, cfg)
                est_gains = estimate_coefficients(y_uf, taps, pilot, cfg, plan)
            channel = build_effective_channel(taps, est_gains, code, cfg)
            y_data = y_dd - pilot_observation(pilot, taps, est_gains, cfg)
            _, hard = mmse_detect(y_data, channel, noise_var, scn.modulation)
            _, _, bits_hat = hard
            return ber(bits_hat, bits)

        bers = [one_trial(seq) for seq in seeds]
        mean, lo, hi = _mean_ci(bers)
        table.add(f"ber_{scn.modulation}", f"ber@{snr_db}dB", mean, lo, hi, seed=scn.seed)
    return table


def _run_sinr_check(scn: Scenario, out_dir: FsPath) -> ResultTable:
    cfg = scn.system
    plan = build_alias_plan(cfg)
    frames = scn.params.get("frames", 1000)
    e_p = cfg.pilot_energy_ratio  # per-impulse pilot energy, E_s = 1
    e_p_total = cfg.mu * e_p
    pilot = make_pilot_grid(cfg)
    code = zadoff_chu(root=1, length=cfg.kappa)
    s_pilot = time_vector(pilot)
    table = ResultTable()

    for snr_db in scn.snr_db_grid:
        n0 = 10 ** (-snr_db / 10.0)
        seeds = np.random.SeedSequence((scn.seed, int(round(snr_db * 1000)))).spawn(frames)
        err_full, err_red = [], []
        err_data_red, err_data_full = [], []
        for seq in seeds:
            rng = np.random.default_rng(seq)
            l = int(rng.integers(0, cfg.m_tau))
            k = int(rng.integers(-2, 3))
            h = np.exp(2j * np.pi * rng.random())
            mn = cfg.frame_len
            n_idx = np.arange(mn)
            pilot_rx_time = np.roll(s_pilot * np.exp(2j * np.pi * k * n_idx / mn), l)

            # reduced-rate system: spread frame, gain estimate from the
            # unfolded pilot, data detection by MMSE with the true channel
            x_e, _ = random_effective_grid(cfg, scn.modulation, rng)
            block = assemble_block(x_e, code, pilot, cfg)
            s_full = time_vector(block)
            r_full = h * np.roll(s_full * np.exp(2j * np.pi * k * n_idx / mn), l)
            r_full += complex_awgn(mn, n0, rng)
            y_red = r_full[:: cfg.kappa]
            y_uf = unfold(y_red, plan, cfg)
            g_red = estimate_coefficients(y_uf, [(l, k)], pilot, cfg, plan)[0]
            err_red.append(g_red - h)
            y_dd = reduced_dd_vector(y_red, cfg)
            chan = build_effective_channel([(l, k)], [h], code, cfg)
            y_data = y_dd - pilot_observation(pilot, [(l, k)], [h], cfg)
            x_soft, _ = mmse_detect(y_data, chan, n0)
            err_data_red.append(x_soft - x_e.flatten(order="F"))

            # full-rate system: conventional unspread frame over the same
            # channel; the mu pilot copies see independent data symbols
            x_full_grid, _ = _full_grid(cfg, scn.modulation, rng)
            s2 = time_vector(x_full_grid + pilot)
            r2 = h * np.roll(s2 * np.exp(2j * np.pi * k * n_idx / mn), l)
            r2 += complex_awgn(mn, n0, rng)
            y_dd_full = dd_grid_of_time(r2, cfg.m_tau)
            model = dd_grid_of_time(pilot_rx_time, cfg.m_tau)
            support = np.abs(model) > 1e-6 * np.abs(model).max()
            err_full.append(np.mean(y_dd_full[support] / model[support]) - h)
            y2 = y_dd_full.flatten(order="F") - h * model.flatten(order="F")
            # single path: unitary channel operator, exact inverse
            x2 = _invert_single_path(y2, h, l, k, cfg)
            err_data_full.append(x2 - x_full_grid.flatten(order="F"))

        sinr_p_full = 1.0 / np.mean(np.abs(np.asarray(err_full)) ** 2)
        sinr_p_red = 1.0 / np.mean(np.abs(np.asarray(err_red)) ** 2)
        pred_full = e_p_total / (n0 + 1.0)
        pred_red = e_p_total / (cfg.mu * (n0 + 1.0))
        sinr_d_red = 1.0 / np.mean(np.abs(np.concatenate(err_data_red)) ** 2)
        sinr_d_full = 1.0 / np.mean(np.abs(np.concatenate(err_data_full)) ** 2)
        s = scn.seed
        table.add("sinr", f"pilot_sinr_full_db@{snr_db}dB", 10 * np.log10(sinr_p_full), seed=s)
        table.add("sinr", f"pilot_sinr_full_pred_db@{snr_db}dB", 10 * np.log10(pred_full), seed=s)
        table.add("sinr", f"pilot_sinr_reduced_db@{snr_db}dB", 10 * np.log10(sinr_p_red), seed=s)
        table.add("sinr", f"pilot_sinr_reduced_pred_db@{snr_db}dB", 10 * np.log10(pred_red), seed=s)
        table.add("sinr", f"data_sinr_reduced_db@{snr_db}dB", 10 * np.log10(sinr_d_red), seed=s)
        table.add("sinr", f"data_sinr_full_db@{snr_db}dB", 10 * np.log10(sinr_d_full), seed=s)
    return table


def _full_grid(cfg, modulation, rng):
    order = mapping.order_of(modulation)
    bits = mapping.random_bits(cfg.frame_len * mapping.bits_per_symbol(order), rng)
    syms = mapping.bits_to_symbols(bits, order)
    return syms.reshape((cfg.m_tau, cfg.n_nu), order="F"), bits


def _invert_single_path(y_dd: np.ndarray, h, l, k, cfg) -> np.ndarray:
    """Exact inverse of a unit single-path DD operator (unitary up to gain)."""
    mn = cfg.frame_len
    grid = y_dd.reshape((cfg.m_tau, cfg.n_nu), order="F")
    s = np.fft.ifft(grid, axis=1, norm="ortho").flatten(order="F")
    s = np.roll(s, -l) * np.exp(-2j * np.pi * k * np.arange(mn) / mn) / h
    return np.fft.fft(s.reshape((cfg.m_tau, cfg.n_nu), order="F"), axis=1, norm="ortho").flatten(order="F")


def _run_papr_check(scn: Scenario, out_dir: FsPath) -> ResultTable:
    cfg = scn.system
    code = zadoff_chu(root=1, length=cfg.kappa)
    pilot = make_pilot_grid(cfg)
    table = ResultTable()
    for modulation in ("QPSK", "16QAM", "64QAM"):
        seeds = np.random.SeedSequence(
            (scn.seed, mapping.order_of(modulation))
        ).spawn(scn.trials)
        violations = 0
        worst_margin = np.inf
        paprs = []
        for seq in seeds:
            rng = np.random.default_rng(seq)
            x_e, _ = random_effective_grid(cfg, modulation, rng)
            block = assemble_block(x_e, code, pilot, cfg)
            value = papr(modulate(block, cfg.f_s))
            bound = papr_bound(block)
            paprs.append(value)
            worst_margin = min(worst_margin, bound - value)
            if value > bound:
                violations += 1
        table.add("papr", f"violations_{modulation}", violations, seed=scn.seed)
        table.add("papr", f"mean_papr_db_{modulation}", 10 * np.log10(np.mean(paprs)), seed=scn.seed)
        table.add("papr", f"worst_margin_{modulation}", worst_margin, seed=scn.seed)
    return table


_RUNNERS = {
    "radar_two_target": _run_radar_two_target,
    "radar_resolution": _run_radar_resolution,
    "ber_sweep": _run_ber_sweep,
    "sinr_check": _run_sinr_check,
    "papr_check": _run_papr_check,
}


def run(scenario: Scenario, out_dir, threads: int = 1) -> ResultTable:
    """Execute a scenario, writing results.csv and manifest.json to out_dir."""
    scenario.validate()
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = _RUNNERS[scenario.experiment](scenario, out)
    table.to_csv(out / "results.csv")
    _write_manifest(scenario, out)
    return table


def _write_manifest(scenario: Scenario, out: FsPath) -> None:
    res = resolutions(scenario.system)
    manifest = {
        "scenario": scenario.to_dict(),
        "seed": scenario.seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "otfs_isac": __version__,
        },
        "resolutions": {
            "range_resolution_m": res.range_resolution_m,
            "velocity_resolution_mps": res.velocity_resolution_mps,
            "max_unambiguous_range_m": res.max_unambiguous_range_m,
            "reduced_unambiguous_range_m": res.reduced_unambiguous_range_m,
        },
        "notes": {
            "velocity_resolution": (
                "velocity_resolution_mps follows c*delta_f/(2*f_c*n_nu); for the "
                "reference 80x80 / 2.5 MHz / 28 GHz configuration this evaluates "
                "to 167.295 m/s. A figure of ~523 m/s sometimes quoted for the "
                "same parameters is inconsistent with that formula and is not used."
            ),
        },
    }
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
