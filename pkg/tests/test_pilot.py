import numpy as np
import pytest

from otfs_isac.config import SystemConfig
from otfs_isac.otfs import isfft, modulate, time_vector
from otfs_isac.pilot import (
    zadoff_chu,
    make_pilot_grid,
    pilot_energy,
    spread,
    despread_slice,
    assemble_block,
    random_effective_grid,
    linear_chirp,
    build_preamble,
    papr,
    papr_bound,
)


class TestPilotGrid:
    def test_reference_grid(self, table_cfg):
        grid = make_pilot_grid(table_cfg, e_p=10.0)
        nz = np.nonzero(grid)
        assert len(nz[0]) == 16
        np.testing.assert_array_equal(nz[0], np.arange(0, 80, 5))
        assert set(nz[1]) == {0}
        np.testing.assert_allclose(grid[nz], np.sqrt(10.0))

    def test_tf_occupancy(self, table_cfg):
        grid = make_pilot_grid(table_cfg)
        tf = isfft(grid)
        active = np.nonzero(np.abs(tf).max(axis=1) > 1e-12)[0]
        np.testing.assert_array_equal(active, [0, 16, 32, 48, 64])

    def test_mu_one_single_impulse(self):
        cfg = SystemConfig(m_tau=8, n_nu=8, delta_f=1e6, f_c=1e9, kappa=1, mu=1,
                           pilot_doppler_index=3)
        grid = make_pilot_grid(cfg, e_p=4.0)
        nz = np.nonzero(grid)
        assert len(nz[0]) == 1
        assert (nz[0][0], nz[1][0]) == (0, 3)
        assert grid[0, 3] == pytest.approx(2.0)

    def test_energy_from_ratio(self, table_cfg):
        assert pilot_energy(table_cfg) == pytest.approx(10.0)  # 10 dB over E_s = 1


class TestZadoffChu:
    @pytest.mark.parametrize("root", [0, 1, 3, 7])
    def test_constant_modulus(self, root):
        code = zadoff_chu(root, 16)
        np.testing.assert_allclose(np.abs(code.values), 1.0, atol=1e-12)

    def test_root_zero_all_ones(self):
        np.testing.assert_allclose(zadoff_chu(0, 16).values, 1.0)

    def test_printed_formula_first_element(self):
        # root 1, length 16, n = 1: exp(-j pi * 1 * 2 / 16) = exp(-j pi / 8)
        code = zadoff_chu(1, 16)
        assert code.values[0] == pytest.approx(np.exp(-1j * np.pi / 8))


class TestSpread:
    def test_all_ones_code_stacks(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "QPSK", rng)
        out = spread(x_e, zadoff_chu(0, 16), table_cfg)
        for j in range(16):
            np.testing.assert_allclose(out[5 * j : 5 * (j + 1), :], x_e)

    def test_slice_recovery(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "16QAM", rng)
        code = zadoff_chu(3, 16)
        out = spread(x_e, code, table_cfg)
        for j in (0, 7, 15):
            np.testing.assert_allclose(despread_slice(out, j, code, table_cfg), x_e,
                                       atol=1e-12)

    def test_norm_scaling(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "QPSK", rng)
        out = spread(x_e, zadoff_chu(1, 16), table_cfg)
        assert np.linalg.norm(out) ** 2 == pytest.approx(16 * np.linalg.norm(x_e) ** 2)

    def test_code_length_check(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "QPSK", rng)
        with pytest.raises(ValueError, match="code length"):
            spread(x_e, zadoff_chu(1, 8), table_cfg)


class TestAssemble:
    def test_zero_data_is_pilot(self, table_cfg):
        pilot = make_pilot_grid(table_cfg)
        zero = np.zeros((5, 80), dtype=complex)
        np.testing.assert_array_equal(
            assemble_block(zero, zadoff_chu(1, 16), pilot, table_cfg), pilot
        )

    def test_zero_pilot_is_spread_data(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "QPSK", rng)
        code = zadoff_chu(1, 16)
        got = assemble_block(x_e, code, np.zeros((80, 80)), table_cfg)
        np.testing.assert_array_equal(got, spread(x_e, code, table_cfg))

    def test_energy_decomposition(self, table_cfg, rng):
        x_e, _ = random_effective_grid(table_cfg, "QPSK", rng)
        code = zadoff_chu(1, 16)
        pilot = make_pilot_grid(table_cfg)
        block = assemble_block(x_e, code, pilot, table_cfg)
        s = spread(x_e, code, table_cfg)
        direct = np.linalg.norm(block) ** 2
        expanded = (np.linalg.norm(s) ** 2 + np.linalg.norm(pilot) ** 2
                    + 2 * np.sum(s.conj() * pilot).real)
        assert direct == pytest.approx(expanded, rel=1e-12)


class TestPreamble:
    def test_chirp_instantaneous_frequency(self, table_cfg):
        ch = linear_chirp(2048, table_cfg.f_s)
        phase = np.unwrap(np.angle(ch.samples))
        inst = np.diff(phase) / (2 * np.pi) * table_cfg.f_s
        # linear sweep from -fs/2 towards +fs/2
        assert inst[0] == pytest.approx(-table_cfg.f_s / 2, rel=1e-2)
        slope = np.diff(inst)
        np.testing.assert_allclose(slope, slope[0], rtol=1e-6)

    def test_chirp_autocorrelation_psl(self, table_cfg):
        ch = linear_chirp(2048, table_cfg.f_s).samples
        n = 4096
        pad = np.zeros(n, dtype=complex)
        pad[:2048] = ch
        xc = np.abs(np.fft.ifft(np.fft.fft(pad) * np.conj(np.fft.fft(pad))))
        peak = xc[0]
        xc[:2] = 0
        xc[-1] = 0
        psl_db = 20 * np.log10(peak / xc.max())
        assert psl_db > 13.0

    def test_training_occupies_all_subcarriers(self, table_cfg):
        pre = build_preamble(table_cfg)
        tf = isfft(pre.training_dd)
        assert np.min(np.abs(tf).max(axis=1)) > 1e-6

    def test_deterministic(self, table_cfg):
        a = build_preamble(table_cfg, seed=5)
        b = build_preamble(table_cfg, seed=5)
        np.testing.assert_array_equal(a.samples, b.samples)
        c = build_preamble(table_cfg, seed=6)
        assert np.any(c.training.samples != a.training.samples)


class TestPapr:
    def test_constant_modulus_is_one(self, table_cfg):
        ch = linear_chirp(1024, table_cfg.f_s)
        assert papr(ch) == pytest.approx(1.0)

    def test_dd_impulse_frame_papr_is_m(self, table_cfg):
        # a single DD impulse modulates to an impulse train: peak power M
        # times the mean (the train has one nonzero sample per symbol block)
        grid = np.zeros((80, 80), dtype=complex)
        grid[0, 0] = 1.0
        assert papr(modulate(grid, table_cfg.f_s)) == pytest.approx(80.0)
        assert papr_bound(grid) >= 80.0

    @pytest.mark.parametrize("modulation", ["QPSK", "16QAM", "64QAM"])
    def test_qam_frames_respect_bound(self, table_cfg, modulation):
        rng = np.random.default_rng(hash(modulation) % 2**32)
        code = zadoff_chu(1, 16)
        pilot = make_pilot_grid(table_cfg)
        for _ in range(50):
            x_e, _ = random_effective_grid(table_cfg, modulation, rng)
            block = assemble_block(x_e, code, pilot, table_cfg)
            assert papr(modulate(block, table_cfg.f_s)) <= papr_bound(block)
