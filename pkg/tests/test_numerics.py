import numpy as np
import pytest

from cfconv.numerics import (
    ComplexGrid,
    EmptyInputError,
    RealGrid,
    ShapeMismatchError,
    complex_mul_accumulate,
    fft_1d,
    fft_2d,
    fft_frequencies,
    ifft_2d_real,
    radial_band_masks,
)


def naive_dft_1d(x, inverse=False):
    """O(N^2) DFT sum, the independent oracle."""
    n = len(x)
    sign = 1.0 if inverse else -1.0
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        for m in range(n):
            out[k] += x[m] * np.exp(sign * 2j * np.pi * k * m / n)
    return out / n if inverse else out


def naive_dft_2d(x, inverse=False):
    """Quadruple-loop 2D DFT oracle."""
    h, w = x.shape
    sign = 1.0 if inverse else -1.0
    out = np.zeros((h, w), dtype=complex)
    for u in range(h):
        for v in range(w):
            for a in range(h):
                for b in range(w):
                    out[u, v] += x[a, b] * np.exp(
                        sign * 2j * np.pi * (u * a / h + v * b / w)
                    )
    return out / (h * w) if inverse else out


def circular_convolve_2d(x, k):
    """Brute-force circular convolution with wrapped indices."""
    h, w = x.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(h):
                for b in range(w):
                    acc += x[(i - a) % h, (j - b) % w] * k[a, b]
            out[i, j] = acc
    return out


def cgrid(arr):
    return ComplexGrid.from_complex(np.asarray(arr, dtype=complex))


class TestFFT1D:
    def test_impulse(self):
        out = fft_1d(cgrid([1, 0, 0, 0]))
        assert np.allclose(out.to_complex(), np.ones(4))

    def test_constant(self):
        out = fft_1d(cgrid([1, 1, 1, 1]))
        assert np.allclose(out.to_complex(), [4, 0, 0, 0])

    def test_length_7_matches_naive(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        got = fft_1d(cgrid(x)).to_complex()
        assert np.abs(got - naive_dft_1d(x)).max() < 1e-10

    def test_empty_errors(self):
        with pytest.raises(EmptyInputError):
            fft_1d(ComplexGrid((0,), np.array([]), np.array([])))

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 8, 13, 16, 150])
    def test_inverse_round_trip(self, n):
        rng = np.random.default_rng(n)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        back = fft_1d(fft_1d(cgrid(x)), inverse=True).to_complex()
        assert np.abs(back - x).max() < 1e-9


class TestFFT2D:
    def test_impulse(self):
        grid = cgrid([[1, 0], [0, 0]])
        assert np.allclose(fft_2d(grid).to_complex(), np.ones((2, 2)))

    def test_round_trip_5x6(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((5, 6)) + 1j * rng.standard_normal((5, 6))
        back = fft_2d(fft_2d(cgrid(x)), inverse=True).to_complex()
        assert np.abs(back - x).max() < 1e-10

    def test_matches_naive_3x3(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        got = fft_2d(cgrid(x)).to_complex()
        assert np.abs(got - naive_dft_2d(x)).max() < 1e-10

    def test_linearity(self):
        rng = np.random.default_rng(3)
        for h, w in [(4, 4), (7, 5), (13, 3)]:
            x = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
            y = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
            a, b = 2.5, -1.25
            lhs = fft_2d(cgrid(a * x + b * y)).to_complex()
            rhs = a * fft_2d(cgrid(x)).to_complex() + b * fft_2d(cgrid(y)).to_complex()
            assert np.abs(lhs - rhs).max() < 1e-9


class TestIFFT2DReal:
    def test_round_trip_real_input(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((6, 5))
        spec = fft_2d(cgrid(x))
        assert np.abs(ifft_2d_real(spec).to_array() - x).max() < 1e-10

    def test_pure_imaginary_constant(self):
        spec = ComplexGrid((3, 3), np.zeros(9), np.full(9, 2.0))
        assert np.abs(ifft_2d_real(spec).to_array()).max() < 1e-12

    def test_matches_real_part_of_naive_inverse(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        got = ifft_2d_real(cgrid(z)).to_array()
        assert np.abs(got - naive_dft_2d(z, inverse=True).real).max() < 1e-10


class TestComplexMulAccumulate:
    def test_identity_kernel(self):
        rng = np.random.default_rng(6)
        f = rng.standard_normal((3, 4, 1)) + 1j * rng.standard_normal((3, 4, 1))
        k = np.ones((3, 4, 1, 1), dtype=complex)
        got = complex_mul_accumulate(cgrid(f), cgrid(k)).to_complex()
        assert np.allclose(got, f)

    def test_conjugate_product(self):
        f = np.full((2, 2, 1), 1 + 1j)
        k = np.full((2, 2, 1, 1), 1 - 1j)
        got = complex_mul_accumulate(cgrid(f), cgrid(k)).to_complex()
        assert np.allclose(got, 2.0)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(7)
        f = rng.standard_normal((2, 2, 3)) + 1j * rng.standard_normal((2, 2, 3))
        k = rng.standard_normal((2, 2, 3, 2)) + 1j * rng.standard_normal((2, 2, 3, 2))
        expected = np.zeros((2, 2, 2), dtype=complex)
        for h in range(2):
            for w in range(2):
                for o in range(2):
                    for i in range(3):
                        expected[h, w, o] += f[h, w, i] * k[h, w, i, o]
        got = complex_mul_accumulate(cgrid(f), cgrid(k)).to_complex()
        assert np.abs(got - expected).max() < 1e-12

    def test_shape_mismatch_names_axis(self):
        f = cgrid(np.zeros((2, 2, 3)))
        k = cgrid(np.zeros((2, 2, 4, 2)))
        with pytest.raises(ShapeMismatchError, match="C_in"):
            complex_mul_accumulate(f, k)


class TestProperties:
    def test_round_trip_all_small_shapes(self):
        rng = np.random.default_rng(8)
        for h in range(1, 17):
            for w in range(1, 17):
                x = rng.standard_normal((h, w)) + 1j * rng.standard_normal((h, w))
                back = fft_2d(fft_2d(cgrid(x)), inverse=True).to_complex()
                assert np.abs(back - x).max() < 1e-9, (h, w)

    @pytest.mark.parametrize("shape", [(2, 2), (3, 5), (4, 4), (7, 7), (8, 8),
                                       (5, 8), (7, 13), (13, 2)])
    def test_convolution_theorem(self, shape):
        rng = np.random.default_rng(sum(shape))
        x = rng.standard_normal(shape)
        k = rng.standard_normal(shape)
        spec = fft_2d(cgrid(x)).to_complex() * fft_2d(cgrid(k)).to_complex()
        via_fft = ifft_2d_real(ComplexGrid.from_complex(spec)).to_array()
        assert np.abs(via_fft - circular_convolve_2d(x, k)).max() < 1e-8

    def test_convolution_theorem_150(self):
        # loop oracle is infeasible at 150x150; rolled shifts are still
        # FFT-free and exercise the arbitrary-size (Bluestein) path
        rng = np.random.default_rng(9)
        x = rng.standard_normal((150, 150))
        k = np.zeros((150, 150))
        taps = [(0, 0, 1.0), (1, 4, -0.5), (149, 149, 2.0), (75, 10, 0.25)]
        expected = np.zeros((150, 150))
        for a, b, v in taps:
            k[a, b] = v
            expected += v * np.roll(x, (a, b), axis=(0, 1))
        spec = fft_2d(cgrid(x)).to_complex() * fft_2d(cgrid(k)).to_complex()
        via_fft = ifft_2d_real(ComplexGrid.from_complex(spec)).to_array()
        assert np.abs(via_fft - expected).max() < 1e-8

    @pytest.mark.parametrize("shape", [(4, 4), (7, 13), (150, 3), (150, 150)])
    def test_parseval(self, shape):
        rng = np.random.default_rng(shape[0])
        x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        spec = fft_2d(cgrid(x)).to_complex()
        energy = (np.abs(x) ** 2).sum()
        spectral = (np.abs(spec) ** 2).sum() / (shape[0] * shape[1])
        assert abs(energy - spectral) / energy < 1e-8

    def test_finite_validation(self):
        with pytest.raises(ValueError, match="non-finite"):
            ComplexGrid((2,), np.array([1.0, np.nan]), np.zeros(2))


class TestFrequencyHelpers:
    def test_fft_frequencies_match_definition(self):
        # wraps to signed frequencies: k/n for k < n/2, (k-n)/n above
        assert np.allclose(fft_frequencies(4), [0, 0.25, -0.5, -0.25])
        assert np.allclose(fft_frequencies(5), [0, 0.2, 0.4, -0.4, -0.2])

    def test_band_masks_partition(self):
        low, mid, high = radial_band_masks(6, 7)
        total = low.astype(int) + mid.astype(int) + high.astype(int)
        assert np.all(total == 1)
        assert low[0, 0]  # DC is in the low band
