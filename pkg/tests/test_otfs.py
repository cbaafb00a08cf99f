import numpy as np
import pytest

from otfs_isac.otfs import (
    TimeSignal,
    isfft,
    sfft,
    heisenberg,
    wigner,
    vec,
    unvec,
    modulate,
    demodulate,
)


def random_grid(m, n, rng):
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


class TestSymplecticPair:
    def test_zeros(self):
        z = np.zeros((4, 4))
        assert np.all(isfft(z) == 0)
        assert np.all(sfft(z) == 0)

    def test_impulse_is_flat(self):
        x = np.zeros((4, 4), dtype=complex)
        x[0, 0] = 1.0
        np.testing.assert_allclose(isfft(x), np.full((4, 4), 0.25), atol=1e-14)

    def test_flat_is_impulse(self):
        y = np.full((4, 4), 0.25, dtype=complex)
        x = sfft(y)
        expect = np.zeros((4, 4), dtype=complex)
        expect[0, 0] = 1.0
        np.testing.assert_allclose(x, expect, atol=1e-14)

    @pytest.mark.parametrize("m,n", [(4, 4), (8, 6), (80, 80)])
    def test_inverse_pair(self, m, n, rng):
        x = random_grid(m, n, rng)
        np.testing.assert_allclose(sfft(isfft(x)), x, atol=1e-12)
        np.testing.assert_allclose(isfft(sfft(x)), x, atol=1e-12)

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            isfft(np.zeros(16))


class TestHeisenbergWigner:
    def test_dc_subcarrier_constant(self):
        x_tf = np.zeros((8, 4), dtype=complex)
        x_tf[0, :] = 1.0
        s = heisenberg(x_tf, 1e6)
        np.testing.assert_allclose(np.abs(s.samples), 1 / np.sqrt(8), atol=1e-13)

    @pytest.mark.parametrize("m,n", [(4, 4), (8, 8), (16, 5)])
    def test_inverse_pair(self, m, n, rng):
        x_tf = random_grid(m, n, rng)
        np.testing.assert_allclose(wigner(heisenberg(x_tf, 1.0), m), x_tf, atol=1e-12)

    def test_parseval(self, rng):
        x_tf = random_grid(8, 8, rng)
        s = heisenberg(x_tf, 1.0)
        assert np.sum(np.abs(s.samples) ** 2) == pytest.approx(
            np.sum(np.abs(x_tf) ** 2), rel=1e-12
        )

    def test_block_length_check(self):
        with pytest.raises(ValueError):
            wigner(TimeSignal(np.zeros(10, dtype=complex), 1.0), 4)


class TestVec:
    def test_roundtrip(self, rng):
        x = random_grid(6, 3, rng)
        np.testing.assert_array_equal(unvec(vec(x), 6, 3), x)

    def test_column_major_order(self):
        a, b, c, d = 1 + 1j, 2.0, 3 - 1j, 4j
        grid = np.array([[a, c], [b, d]])
        np.testing.assert_array_equal(vec(grid), np.array([a, b, c, d]))

    def test_norm_preserved(self, rng):
        x = random_grid(5, 7, rng)
        assert np.linalg.norm(vec(x)) == pytest.approx(np.linalg.norm(x))

    def test_length_check(self):
        with pytest.raises(ValueError):
            unvec(np.zeros(5), 2, 3)


class TestModem:
    @pytest.mark.parametrize("m,n", [(4, 4), (8, 8), (80, 80)])
    def test_modem_identity(self, m, n, rng):
        x = random_grid(m, n, rng)
        back = demodulate(modulate(x, 1e6), m)
        assert np.max(np.abs(back - x)) < 1e-10

    def test_frame_length_and_rate(self, table_cfg, rng):
        x = random_grid(table_cfg.m_tau, table_cfg.n_nu, rng)
        s = modulate(x, table_cfg.f_s)
        assert len(s) == table_cfg.frame_len
        assert s.rate_hz == table_cfg.f_s

    def test_composition_matches_explicit_chain(self, rng):
        x = random_grid(8, 8, rng)
        direct = modulate(x, 1.0).samples
        chained = heisenberg(isfft(x), 1.0).samples
        np.testing.assert_allclose(direct, chained, atol=1e-12)

    def test_dd_impulse_is_modulated_train(self):
        # a DD impulse at (l, k) occupies only time samples l, l+M, l+2M, ...
        # with magnitude 1/sqrt(N): an impulse train, not a flat envelope
        m = n = 8
        x = np.zeros((m, n), dtype=complex)
        x[3, 2] = 1.0
        s = modulate(x, 1.0).samples
        mags = np.abs(s.reshape((m, n), order="F"))
        np.testing.assert_allclose(mags[3, :], 1 / np.sqrt(n), atol=1e-13)
        other = np.delete(mags, 3, axis=0)
        assert np.max(other) < 1e-13


def test_iq_roundtrip(tmp_path, rng):
    s = TimeSignal(rng.standard_normal(64) + 1j * rng.standard_normal(64), 5e6)
    path = tmp_path / "frame.iq"
    s.write_iq(path)
    back = TimeSignal.read_iq(path, 5e6)
    np.testing.assert_array_equal(back.samples, s.samples)
    assert back.rate_hz == 5e6
