import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hwdshape.constellation import (IDENTITY, Constellation, ShapingParams, apply_shaping,
                                    discrete_circularity, distribution_power, entropy, gray,
                                    make_constellation, read_csv, shape_symbols,
                                    unshape_symbols, write_csv)
from oracles import shaped

ORDERS = [("QAM", 4), ("QAM", 8), ("QAM", 16), ("QAM", 32), ("QAM", 64), ("PSK", 8),
          ("PSK", 16), ("PAM", 4), ("PAM", 8), ("QAM", 2)]
ISOTROPIC = [("QAM", 4), ("QAM", 8), ("QAM", 16), ("QAM", 32), ("QAM", 64), ("PSK", 8)]

shapings = st.builds(ShapingParams, st.floats(0.0, 0.999), st.floats(0.0, 2 * math.pi))


@pytest.mark.parametrize("kind,M", ORDERS)
def test_unit_power_and_labels(kind, M):
    c = make_constellation(kind, M)
    assert c.M == M
    assert distribution_power(c) == pytest.approx(1.0, abs=1e-12)
    assert sorted(c.labels) == list(range(M))
    assert np.allclose(c.priors, 1 / M)
    assert all(len(s) == int(math.log2(M)) for s in c.label_strings)


def test_qpsk_points():
    c = make_constellation("QAM", 4)
    expected = {complex(a, b) / math.sqrt(2) for a in (-1, 1) for b in (-1, 1)}
    assert all(min(abs(x - e) for e in expected) < 1e-15 for x in c.symbols)


@pytest.mark.parametrize("M", [4, 16, 64])
def test_square_qam_gray(M):
    c = make_constellation("QAM", M)
    for m, n in c.nearest_neighbor_pairs():
        assert bin(int(c.labels[m] ^ c.labels[n])).count("1") == 1


@pytest.mark.parametrize("layout", ["pinwheel", "rectangular"])
def test_qam8_layouts_gray(layout):
    c = make_constellation("QAM", 8, layout=layout)
    pairs = c.nearest_neighbor_pairs()
    assert pairs
    for m, n in pairs:
        assert bin(int(c.labels[m] ^ c.labels[n])).count("1") == 1


def test_qam32_cross_quasi_gray():
    c = make_constellation("QAM", 32)
    raw = c.symbols * math.sqrt(20)
    assert np.allclose(np.round(raw), raw, atol=1e-12)
    # 6x6 grid minus the four corners
    assert max(abs(raw.real)) == pytest.approx(5) and max(abs(raw.imag)) == pytest.approx(5)
    assert not any(abs(abs(x.real) - 5) < 1e-9 and abs(abs(x.imag) - 5) < 1e-9 for x in raw)
    for m, n in c.nearest_neighbor_pairs():
        assert bin(int(c.labels[m] ^ c.labels[n])).count("1") <= 2


def test_gray_sequence():
    codes = [gray(i) for i in range(16)]
    assert len(set(codes)) == 16
    assert all(bin(a ^ b).count("1") == 1 for a, b in zip(codes, codes[1:]))


@pytest.mark.parametrize("bad", [dict(M=3), dict(M=128)])
def test_unsupported_order(bad):
    with pytest.raises(ValueError):
        make_constellation("QAM", **bad)


def test_constellation_validation():
    with pytest.raises(ValueError):
        Constellation([1, -1], [0, 0])
    with pytest.raises(ValueError):
        Constellation([1, -1], [0, 1], [0.7, 0.7])
    with pytest.raises(ValueError):
        Constellation([1, -1, 1j], [0, 1, 2])


def test_identity_shaping_is_noop():
    c = make_constellation("QAM", 16)
    assert np.array_equal(apply_shaping(c, IDENTITY).symbols, c.symbols)


def test_parallelogram_example():
    c = make_constellation("QAM", 16)
    v = apply_shaping(c, ShapingParams(0.5, math.pi / 2)).symbols
    # rotation by pi/2 maps the grid to itself; A then stretches I by sqrt(1.5), Q by sqrt(0.5)
    x = c.symbols
    assert np.allclose(sorted(v.real), sorted(math.sqrt(1.5) * (-x.imag)))
    assert np.allclose(sorted(v.imag), sorted(math.sqrt(0.5) * x.real))


@given(shapings)
def test_shaping_matches_matrix_oracle(s):
    c = make_constellation("QAM", 16)
    assert np.allclose(shape_symbols(c.symbols, s), shaped(c.symbols, s.zeta, s.theta), atol=1e-13)
    assert np.allclose(s.matrix, np.diag([math.sqrt(1 + s.zeta), math.sqrt(1 - s.zeta)])
                       @ np.array([[math.cos(s.theta), -math.sin(s.theta)],
                                   [math.sin(s.theta), math.cos(s.theta)]]))


@given(shapings)
def test_shaping_roundtrip(s):
    c = make_constellation("QAM", 32)
    back = unshape_symbols(shape_symbols(c.symbols, s), s)
    assert np.max(np.abs(back - c.symbols)) < 1e-12


@pytest.mark.parametrize("kind,M", ISOTROPIC)
@given(s=shapings)
def test_power_invariance_and_circularity(kind, M, s):
    c = make_constellation(kind, M)
    v = apply_shaping(c, s)
    assert abs(distribution_power(v) - distribution_power(c)) < 1e-12
    assert abs(discrete_circularity(v) - s.zeta) < 1e-12


def test_rectangular_qam8_is_not_power_invariant():
    # a 4x2 grid has E[x^2] != 0, so translation changes its power
    c = make_constellation("QAM", 8, layout="rectangular")
    assert abs(distribution_power(apply_shaping(c, ShapingParams(0.5, 0.0))) - 1.0) > 0.1


def test_distribution_power_examples():
    c = make_constellation("QAM", 8)
    low = np.argmin(c.energies)
    p = np.zeros(8)
    p[low] = 1
    assert distribution_power(c.with_priors(p)) == pytest.approx(c.energies[low])
    p = np.array([0.25, 0, 0.25, 0, 0, 0.25, 0, 0.25])
    assert distribution_power(c.with_priors(p)) <= 1 + 1e-12


@pytest.mark.parametrize("p,H", [(np.full(8, 1 / 8), 3.0), ([0.25, 0, 0.25, 0, 0.25, 0, 0.25, 0], 2.0),
                                 ([1, 0, 0, 0], 0.0)])
def test_entropy_examples(p, H):
    assert entropy(p) == pytest.approx(H, abs=1e-15)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=64).filter(lambda v: sum(v) > 1e-6))
def test_entropy_range(w):
    p = np.array(w) / sum(w)
    assert -1e-12 <= entropy(p) <= math.log2(len(p)) + 1e-12


def test_discrete_circularity_square_qam_zero():
    assert discrete_circularity(make_constellation("QAM", 16)) == pytest.approx(0.0, abs=1e-15)


def test_csv_roundtrip(tmp_path):
    c = make_constellation("QAM", 8).with_priors([0.2, 0.1, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1])
    path = tmp_path / "c.csv"
    write_csv(c, path)
    assert path.read_text().splitlines()[0] == "index,re,im,label,prior"
    back = read_csv(path)
    assert np.array_equal(back.symbols, c.symbols)
    assert np.array_equal(back.labels, c.labels)
    assert np.array_equal(back.priors, c.priors)


def test_arrays_are_read_only():
    c = make_constellation("QAM", 4)
    with pytest.raises(ValueError):
        c.priors[0] = 1.0
