import numpy as np
import pytest

from otfs_isac.config import SystemConfig, resolutions
from otfs_isac.otfs import vec, unvec, time_vector
from otfs_isac.channel import Path, ChannelSpec, apply_dd_operator, apply_channel, complex_awgn
from otfs_isac.pilot import make_pilot_grid, zadoff_chu, spread, random_effective_grid
from otfs_isac.subnyq import build_alias_plan, unfold
from otfs_isac.radar import (
    TargetEstimate,
    matched_surface,
    delay_doppler_xcorr,
    estimate_coefficient,
    sic_estimate,
    resolve_ambiguity,
    detect,
    default_doppler_taps,
    write_targets_csv,
    write_surface_csv,
)


def rand_vec(mn, rng):
    return rng.standard_normal(mn) + 1j * rng.standard_normal(mn)


@pytest.fixture
def cfg8():
    return SystemConfig(m_tau=8, n_nu=8, delta_f=1e6, f_c=1e9)


def reduced_rx(block, paths, cfg, rng=None, noise_var=0.0):
    """Reduced-rate samples of an integer-tap multipath channel."""
    s = time_vector(block)
    mn = cfg.frame_len
    q = np.arange(mn // cfg.kappa)
    out = np.zeros(len(q), dtype=complex)
    for h, l, k in paths:
        idx = (q * cfg.kappa - l) % mn
        out += h * s[idx] * np.exp(2j * np.pi * k * (q * cfg.kappa - l) / mn)
    if noise_var > 0:
        out += complex_awgn(len(q), noise_var, rng)
    return out


class TestMatchedSurface:
    def test_unique_peak_at_true_taps(self, cfg8, rng):
        x = rand_vec(64, rng)
        y = apply_dd_operator(x, Path(1.0, 3, 2), cfg8)
        surf = matched_surface(y, x, cfg8)
        i, j = np.unravel_index(np.argmax(surf), surf.shape)
        ks = default_doppler_taps(cfg8)
        assert (int(i), int(ks[j])) == (3, 2)

    def test_identity_peak_at_origin(self, cfg8, rng):
        x = rand_vec(64, rng)
        surf = matched_surface(x, x, cfg8)
        i, j = np.unravel_index(np.argmax(surf), surf.shape)
        assert (int(i), int(default_doppler_taps(cfg8)[j])) == (0, 0)

    def test_global_phase_invariance(self, cfg8, rng):
        x = rand_vec(64, rng)
        y = apply_dd_operator(x, Path(1.0, 5, -1), cfg8)
        np.testing.assert_allclose(
            matched_surface(y, x, cfg8),
            matched_surface(np.exp(1j * 0.8) * y, x, cfg8),
            rtol=1e-10,
        )

    def test_fft_trick_matches_direct(self, cfg8, rng):
        # brute-force oracle for the FFT-based correlation
        x = rand_vec(64, rng)
        y = rand_vec(64, rng)
        surf = matched_surface(y, x, cfg8)
        ks = default_doppler_taps(cfg8)
        for l in range(0, 8, 3):
            for j, k in enumerate(ks):
                gx = apply_dd_operator(x, Path(1.0, l, k), cfg8)
                direct = np.abs(np.vdot(gx, y)) ** 2
                assert surf[l, j] == pytest.approx(direct, rel=1e-9)


class TestEstimateCoefficient:
    def test_recovers_complex_gain(self, cfg8, rng):
        x = rand_vec(64, rng)
        y = (0.5 + 0.5j) * apply_dd_operator(x, Path(1.0, 2, 1), cfg8)
        h = estimate_coefficient(y, x, 2, 1, cfg8)
        assert h == pytest.approx(0.5 + 0.5j, abs=1e-10)

    def test_identity(self, cfg8, rng):
        x = rand_vec(64, rng)
        assert estimate_coefficient(x, x, 0, 0, cfg8) == pytest.approx(1.0)

    def test_scaling_linearity(self, cfg8, rng):
        x = rand_vec(64, rng)
        y = apply_dd_operator(x, Path(1.0, 4, -2), cfg8)
        h1 = estimate_coefficient(y, x, 4, -2, cfg8)
        h2 = estimate_coefficient((2 - 1j) * y, x, 4, -2, cfg8)
        assert h2 == pytest.approx((2 - 1j) * h1)


class TestSic:
    def test_two_paths_recovered(self, cfg8, rng):
        x = rand_vec(64, rng)
        spec = ChannelSpec(paths=[Path(1.0, 3, 0), Path(0.7, 10 % 8, 1)])
        # keep delays within the grid: use 3 and 6
        spec = ChannelSpec(paths=[Path(1.0, 3, 0), Path(0.7, 6, 1)])
        y = apply_channel(x, spec, cfg8)
        found = sic_estimate(y, x, cfg8, max_targets=4)
        got = sorted((t.delay_tap, t.doppler_tap) for t in found)
        assert got == [(3, 0), (6, 1)]
        by_tap = {(t.delay_tap, t.doppler_tap): t.h_hat for t in found}
        assert by_tap[(3, 0)] == pytest.approx(1.0, abs=1e-9)
        assert by_tap[(6, 1)] == pytest.approx(0.7, abs=1e-9)

    def test_single_path(self, cfg8, rng):
        x = rand_vec(64, rng)
        y = 0.9 * apply_dd_operator(x, Path(1.0, 1, -1), cfg8)
        assert len(sic_estimate(y, x, cfg8)) == 1

    def test_pure_noise_false_alarm_rate(self):
        cfg = SystemConfig(m_tau=16, n_nu=16, delta_f=1e6, f_c=1e9)
        rng = np.random.default_rng(2024)
        x = rand_vec(256, rng)
        alarms = 0
        for _ in range(100):
            y = complex_awgn(256, 1.0, rng)
            alarms += bool(sic_estimate(y, x, cfg, max_targets=2))
        assert alarms <= 1


class TestResolveAmbiguity:
    def _setup(self, cfg, rng, l_true, k_true, h=1.0):
        plan = build_alias_plan(cfg)
        pilot = make_pilot_grid(cfg)
        x_e, _ = random_effective_grid(cfg, "QPSK", rng)
        data = spread(x_e, zadoff_chu(1, cfg.kappa), cfg)
        y_red = reduced_rx(pilot + data, [(h, l_true, k_true)], cfg)
        y_uf = unfold(y_red, plan, cfg)
        return plan, pilot, data, y_uf

    def test_wrapped_delay_recovered(self, table_cfg, rng):
        plan, pilot, data, y_uf = self._setup(table_cfg, rng, 13, 0)
        coarse = TargetEstimate.from_taps(1.0, 13 % 5, 0, table_cfg)
        est = resolve_ambiguity(coarse, y_uf, pilot, data, table_cfg, plan)
        assert est.delay_tap == 13
        assert not est.ambiguous

    def test_first_subband_stays(self, table_cfg, rng):
        plan, pilot, data, y_uf = self._setup(table_cfg, rng, 3, 2)
        coarse = TargetEstimate.from_taps(1.0, 3, 2, table_cfg)
        est = resolve_ambiguity(coarse, y_uf, pilot, data, table_cfg, plan)
        assert est.delay_tap == 3

    def test_data_free_frame_flagged(self, table_cfg, rng):
        plan = build_alias_plan(table_cfg)
        pilot = make_pilot_grid(table_cfg)
        zero = np.zeros_like(pilot)
        y_red = reduced_rx(pilot, [(1.0, 23, 0)], table_cfg)
        y_uf = unfold(y_red, plan, table_cfg)
        coarse = TargetEstimate.from_taps(1.0, 23 % 5, 0, table_cfg)
        est = resolve_ambiguity(coarse, y_uf, pilot, zero, table_cfg, plan)
        assert est.ambiguous

    def test_coarse_out_of_range_rejected(self, table_cfg, rng):
        plan, pilot, data, y_uf = self._setup(table_cfg, rng, 3, 0)
        with pytest.raises(ValueError):
            resolve_ambiguity(TargetEstimate.from_taps(1.0, 7, 0, table_cfg),
                              y_uf, pilot, data, table_cfg, plan)


def make_block(cfg, rng):
    pilot = make_pilot_grid(cfg)
    x_e, _ = random_effective_grid(cfg, "QPSK", rng)
    data = spread(x_e, zadoff_chu(1, cfg.kappa), cfg)
    return pilot, data


class TestDetect:
    def test_empty_channel(self, table_cfg, rng):
        pilot, data = make_block(table_cfg, rng)
        y = complex_awgn(table_cfg.frame_len // 16, 1.0, rng)
        result = detect(y, pilot, data, table_cfg)
        assert result.targets == []

    def test_single_target_exact(self, table_cfg, rng):
        pilot, data = make_block(table_cfg, rng)
        h, l, k = 0.8 * np.exp(1j * 1.1), 37, -6
        y = reduced_rx(pilot + data, [(h, l, k)], table_cfg)
        result = detect(y, pilot, data, table_cfg, max_targets=2)
        assert len(result.targets) == 1
        t = result.targets[0]
        assert (t.delay_tap, t.doppler_tap) == (l, k)
        assert abs(t.h_hat - h) < 1e-6
        assert result.iterations <= 2
        assert result.converged

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_noise_free_exactness_random_taps(self, table_cfg, seed):
        rng = np.random.default_rng(seed)
        pilot, data = make_block(table_cfg, rng)
        l = int(rng.integers(0, 80))
        k = int(rng.integers(-40, 40))
        h = complex(rng.standard_normal(), rng.standard_normal()) / np.sqrt(2)
        y = reduced_rx(pilot + data, [(h, l, k)], table_cfg)
        result = detect(y, pilot, data, table_cfg, max_targets=2)
        assert len(result.targets) == 1
        t = result.targets[0]
        assert (t.delay_tap, t.doppler_tap) == (l, k)
        assert abs(t.h_hat - h) < 1e-6

    def test_two_targets_reference_scenario(self, table_cfg, rng):
        # targets on the taps nearest 10 m / 0 m/s and 30 m / 1000 m/s
        pilot, data = make_block(table_cfg, rng)
        paths = [(1.0, 13, 0), (0.8 * np.exp(0.7j), 40, 6)]
        y = reduced_rx(pilot + data, paths, table_cfg)
        result = detect(y, pilot, data, table_cfg, max_targets=2)
        got = sorted((t.delay_tap, t.doppler_tap) for t in result.targets)
        assert got == [(13, 0), (40, 6)]
        res = resolutions(table_cfg)
        ranges = sorted(t.range_m for t in result.targets)
        assert ranges[0] == pytest.approx(13 * res.range_resolution_m)
        assert ranges[1] == pytest.approx(40 * res.range_resolution_m)
        by_tap = {(t.delay_tap, t.doppler_tap): t.h_hat for t in result.targets}
        assert abs(by_tap[(13, 0)] - 1.0) < 1e-6
        assert abs(by_tap[(40, 6)] - 0.8 * np.exp(0.7j)) < 1e-6

    def test_coarse_is_true_mod_period(self, table_cfg):
        # pilot-only estimation wraps the delay into [0, m_tau/mu)
        rng = np.random.default_rng(11)
        pilot, data = make_block(table_cfg, rng)
        plan = build_alias_plan(table_cfg)
        from otfs_isac.radar import _coarse_sic
        for l_true in (0, 7, 33, 79):
            y = reduced_rx(pilot, [(1.0, l_true, 0)], table_cfg)
            y_uf = unfold(y, plan, table_cfg).flatten(order="F")
            found = _coarse_sic(y_uf, time_vector(pilot), plan, table_cfg, 1, 25.0,
                                default_doppler_taps(table_cfg))
            assert found[0][1] == l_true % 5

    def test_monotone_residual_history(self, table_cfg, rng):
        pilot, data = make_block(table_cfg, rng)
        paths = [(1.0, 13, 0), (0.8, 40, 6)]
        y = reduced_rx(pilot + data, paths, table_cfg, rng=rng, noise_var=0.05)
        result = detect(y, pilot, data, table_cfg, max_targets=2)
        hist = result.residual_history
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))

    def test_noisy_detection_rate(self, table_cfg):
        # SNR 10 dB, both targets within +-1 tap in >= 95 % of trials
        hits = 0
        trials = 30
        for t in range(trials):
            rng = np.random.default_rng(300 + t)
            pilot, data = make_block(table_cfg, rng)
            phases = np.exp(2j * np.pi * rng.random(2))
            paths = [(phases[0], 13, 0), (phases[1], 40, 6)]
            y = reduced_rx(pilot + data, paths, table_cfg, rng=rng, noise_var=0.1)
            result = detect(y, pilot, data, table_cfg, max_targets=2)
            got = sorted((t.delay_tap, t.doppler_tap) for t in result.targets)
            if len(got) == 2 and all(
                abs(a - b) <= 1 and abs(c - d) <= 1
                for (a, c), (b, d) in zip(got, [(13, 0), (40, 6)])
            ):
                hits += 1
        assert hits >= int(0.95 * trials)


def test_csv_writers(tmp_path, table_cfg):
    t = TargetEstimate.from_taps(0.5 + 0.5j, 13, 0, table_cfg)
    write_targets_csv([t], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().strip().splitlines()
    assert lines[0] == "range_m,velocity_mps,magnitude,phase_rad"
    assert len(lines) == 2
    surf = np.arange(6.0).reshape(2, 3)
    write_surface_csv(surf, [0, 1], [-1, 0, 1], tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().strip().splitlines()
    assert len(lines) == 7
