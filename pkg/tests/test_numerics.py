"""Transform correctness against independent references.

Two oracles keep the in-package FFT honest: a local O(n^2) direct sum
written here (no shared code with the package) and numpy's pocketfft.
"""

import numpy as np
import pytest

from stepcarve import numerics


def direct_dft(x, inverse=False):
    # textbook sum, deliberately slow and independent of the package
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    sign = 1.0 if inverse else -1.0
    out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        for t in range(n):
            out[k] += x[t] * np.exp(sign * 2j * np.pi * k * t / n)
    if inverse:
        out /= n
    return out


def random_signal(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


# -- 1-d ---------------------------------------------------------------


def test_impulse_has_flat_spectrum():
    x = np.zeros(16)
    x[0] = 1.0
    assert np.allclose(numerics.fft_1d(x), np.ones(16), atol=1e-12)


def test_constant_concentrates_at_dc():
    x = np.full(12, 3.5)
    spec = numerics.fft_1d(x)
    assert abs(spec[0] - 42.0) < 1e-12
    assert np.all(np.abs(spec[1:]) < 1e-12)


def test_single_tone_lands_in_one_bin():
    n = 32
    t = np.arange(n)
    x = np.exp(2j * np.pi * 5 * t / n)
    spec = numerics.fft_1d(x)
    expected = np.zeros(n, dtype=complex)
    expected[5] = n
    assert np.allclose(spec, expected, atol=1e-9)


@pytest.mark.parametrize("n", list(range(1, 65)))
def test_matches_direct_dft_small_lengths(n):
    rng = np.random.default_rng(100 + n)
    x = random_signal(rng, n)
    assert np.max(np.abs(numerics.fft_1d(x) - direct_dft(x))) < 1e-9
    assert np.max(np.abs(numerics.fft_1d(x, inverse=True) - direct_dft(x, inverse=True))) < 1e-9


def test_matches_numpy_on_awkward_lengths():
    # primes, prime powers, and mixed composites exercise the chirp-z path
    rng = np.random.default_rng(7)
    for n in (1, 2, 3, 5, 7, 11, 13, 17, 31, 61, 97, 101, 113, 127, 128, 96, 100):
        x = random_signal(rng, n)
        assert np.max(np.abs(numerics.fft_1d(x) - np.fft.fft(x))) < 1e-9, n


def test_naive_dft_agrees_with_direct_sum():
    rng = np.random.default_rng(11)
    for n in (1, 4, 9, 23):
        x = random_signal(rng, n)
        assert np.max(np.abs(numerics.naive_dft(x) - direct_dft(x))) < 1e-9
        assert np.max(np.abs(numerics.naive_dft(x, inverse=True) - direct_dft(x, inverse=True))) < 1e-9


def test_round_trip_and_parseval():
    rng = np.random.default_rng(19)
    for n in (2, 5, 16, 48, 121):
        x = random_signal(rng, n)
        back = numerics.fft_1d(numerics.fft_1d(x), inverse=True)
        assert np.max(np.abs(back - x)) < 1e-9
        spec = numerics.fft_1d(x)
        lhs = np.sum(np.abs(spec) ** 2)
        rhs = n * np.sum(np.abs(x) ** 2)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, rhs)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        numerics.fft_1d(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        numerics.fft_1d(np.zeros(0))


# -- n-d ---------------------------------------------------------------


def test_nd_matches_numpy_fftn():
    rng = np.random.default_rng(23)
    for dims in ((4,), (3, 5), (8, 8), (2, 3, 4), (8, 8, 8), (5, 7, 3)):
        x = rng.normal(size=dims) + 1j * rng.normal(size=dims)
        got = numerics.fft_nd(x)
        assert np.max(np.abs(got - np.fft.fftn(x))) < 1e-9, dims
        back = numerics.fft_nd(got, inverse=True)
        assert np.max(np.abs(back - x)) < 1e-9, dims


def test_nd_inverse_normalization():
    # inverse carries the full 1/prod(dims) factor
    x = np.zeros((4, 4))
    x[0, 0] = 16.0
    spec = numerics.fft_nd(x)
    assert np.allclose(spec, 16.0)
    assert np.allclose(numerics.fft_nd(spec, inverse=True), x, atol=1e-12)


def test_power_at():
    x = np.arange(8.0)
    spec = numerics.fft_1d(x)
    assert abs(numerics.power_at(spec, (0,)) - abs(spec[0]) ** 2) < 1e-12
    with pytest.raises(ValueError):
        numerics.power_at(spec, (8,))
    with pytest.raises(ValueError):
        numerics.power_at(spec, (0, 0))


# -- frequency geometry -------------------------------------------------


def test_centered_frequencies():
    assert np.array_equal(numerics.centered_frequencies(8), [0, 1, 2, 3, 4, 3, 2, 1])
    assert np.array_equal(numerics.centered_frequencies(7), [0, 1, 2, 3, 3, 2, 1])
    assert np.array_equal(numerics.centered_frequencies(1), [0])


def test_radial_frequencies_small_grid():
    radial = numerics.radial_frequencies((2, 3))
    expected = np.array(
        [
            [0.0, 1.0, 1.0],
            [1.0, np.sqrt(2.0), np.sqrt(2.0)],
        ]
    )
    assert np.allclose(radial, expected)


def test_max_radius():
    assert abs(numerics.max_radius((8, 8, 8)) - np.sqrt(48.0)) < 1e-12
    assert abs(numerics.max_radius((4, 6)) - np.sqrt(13.0)) < 1e-12


def test_highpass_mask_strictly_above_cutoff():
    dims = (8, 8)
    mask = numerics.highpass_mask(dims, 0.5)
    radial = numerics.radial_frequencies(dims)
    threshold = 0.5 * numerics.max_radius(dims)
    assert np.array_equal(mask, radial > threshold)
    # bins exactly on the cutoff stay low-pass
    boundary = np.isclose(radial, threshold)
    assert not mask[boundary].any()
    with pytest.raises(ValueError):
        numerics.highpass_mask(dims, 0.0)
    with pytest.raises(ValueError):
        numerics.highpass_mask(dims, 1.0)
