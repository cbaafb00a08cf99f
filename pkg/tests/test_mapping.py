import numpy as np
import pytest

from otfs_isac import mapping


@pytest.mark.parametrize("order", [4, 16, 64])
def test_unit_average_energy(order):
    c = mapping.constellation(order)
    assert len(c) == order
    assert np.mean(np.abs(c) ** 2) == pytest.approx(1.0)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_bits_roundtrip(order, rng):
    bits = mapping.random_bits(3000 // mapping.bits_per_symbol(order)
                               * mapping.bits_per_symbol(order), rng)
    syms = mapping.bits_to_symbols(bits, order)
    idx, points, back = mapping.demodulate_symbols(syms, order)
    np.testing.assert_array_equal(back, bits)
    np.testing.assert_allclose(points, syms)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_gray_neighbours_differ_by_one_bit(order):
    # nearest horizontal/vertical neighbours in the constellation differ in
    # exactly one bit: the defining property of the Gray mapping
    c = mapping.constellation(order)
    b = mapping.bits_per_symbol(order)
    m = 2 ** (b // 2)
    spacing = np.sort(np.unique(np.round(c.real, 12)))
    step = spacing[1] - spacing[0]
    for i in range(order):
        for j in range(i + 1, order):
            d = c[i] - c[j]
            if abs(d) < step * 1.0001:
                assert bin(i ^ j).count("1") == 1


def test_hard_decision_with_noise(rng):
    order = 16
    bits = mapping.random_bits(4000, rng)
    syms = mapping.bits_to_symbols(bits, order)
    noisy = syms + 0.01 * (rng.standard_normal(len(syms)) + 1j * rng.standard_normal(len(syms)))
    idx, _, back = mapping.demodulate_symbols(noisy, order)
    np.testing.assert_array_equal(back, bits)


def test_qpsk_points():
    c = mapping.constellation(4)
    np.testing.assert_allclose(np.abs(c), 1.0, atol=1e-12)
    assert set(np.round(c * np.sqrt(2), 6)) == {
        complex(1, 1), complex(1, -1), complex(-1, 1), complex(-1, -1)
    }


def test_order_of():
    assert mapping.order_of("qpsk") == 4
    assert mapping.order_of("16QAM") == 16
    with pytest.raises(ValueError):
        mapping.order_of("8PSK")
