import math

import numpy as np
import pytest

from fringelab.errors import IllPosedError
from fringelab.spectral import (
    HomDipFit,
    JsaGrid,
    SchmidtSpectrum,
    double_gaussian_jsa,
    exchange_symmetry,
    fit_hom_dip,
    indistinguishability_from_coincidence,
    lambda4,
    quartic_gaussian_overlap,
    schmidt_spectrum_of,
)


def overlap_oracle(x, sigma, n=1_000_001):
    """Brute-force trapezoid quadrature of the quartic-Gaussian transform."""
    from scipy.special import gamma

    y = np.linspace(-8.0, 8.0, n)
    f = np.exp(-(y**4)) * np.cos(y * x / sigma)
    return 2.0 / gamma(0.25) * np.trapezoid(f, y)


class TestQuarticGaussianOverlap:
    def test_zero_delay_is_one(self):
        assert quartic_gaussian_overlap(0.0, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_even_in_x(self):
        assert quartic_gaussian_overlap(-3.0, 1.0) == quartic_gaussian_overlap(3.0, 1.0)

    def test_against_trapezoid_oracle(self):
        assert quartic_gaussian_overlap(5.0, 1.0) == pytest.approx(
            overlap_oracle(5.0, 1.0), abs=1e-8
        )

    def test_evenness_on_grid(self):
        xs = np.linspace(0.05, 12.0, 100)
        for x in xs:
            assert quartic_gaussian_overlap(-x, 2.3) == pytest.approx(
                quartic_gaussian_overlap(x, 2.3), abs=1e-12
            )

    def test_bounded_and_envelope_decays(self):
        xs = np.linspace(0.0, 13.0, 131)
        vals = np.array([quartic_gaussian_overlap(x, 1.0) for x in xs])
        assert np.all(np.abs(vals) <= 1.0 + 1e-12)
        # The oscillation envelope decays by windows: peak over [5,7] beats
        # [7,9] beats [9,11]; the tail is small in absolute terms.
        windows = [(5.0, 7.0), (7.0, 9.0), (9.0, 11.0)]
        peaks = [
            np.abs(vals[(xs >= lo) & (xs < hi)]).max() for lo, hi in windows
        ]
        assert peaks[0] > peaks[1] > peaks[2]
        assert np.all(np.abs(vals[xs >= 9.0]) < 0.005)

    @pytest.mark.parametrize("x,sigma", [(math.inf, 1.0), (math.nan, 1.0), (1.0, 0.0), (1.0, -2.0)])
    def test_invalid_arguments(self, x, sigma):
        with pytest.raises(ValueError):
            quartic_gaussian_overlap(x, sigma)


class TestIndistinguishability:
    @pytest.mark.parametrize("p,expected", [(0.0, 1.0), (0.5, 0.0), (0.25, 0.5)])
    def test_linear_formula(self, p, expected):
        assert indistinguishability_from_coincidence(p) == pytest.approx(expected)

    def test_no_clamp_beyond_half(self):
        assert indistinguishability_from_coincidence(0.75) == pytest.approx(-0.5)

    @pytest.mark.parametrize("p", [-0.1, 1.1])
    def test_out_of_range(self, p):
        with pytest.raises(ValueError):
            indistinguishability_from_coincidence(p)


def random_jsa(rng, n=24):
    axis = np.linspace(-2.0, 2.0, n)
    values = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return JsaGrid(values, axis)


class TestExchangeSymmetry:
    def test_separable_symmetric_product(self):
        axis = np.linspace(-3.0, 3.0, 41)
        f = np.exp(-(axis**2))
        grid = JsaGrid(np.outer(f, f), axis)
        assert exchange_symmetry(grid) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_modes_overlap_zero(self):
        axis = np.linspace(-3.0, 3.0, 41)
        f = np.exp(-(axis**2))
        g = axis * np.exp(-(axis**2))  # odd against even: discretely orthogonal
        grid = JsaGrid(np.outer(f, g), axis)
        assert exchange_symmetry(grid) == pytest.approx(0.0, abs=1e-12)

    def test_against_double_loop_oracle(self):
        rng = np.random.default_rng(5)
        grid = random_jsa(rng)
        acc = 0.0 + 0.0j
        m = grid.values.shape[0]
        for i in range(m):
            for j in range(m):
                acc += grid.values[i, j] * np.conj(grid.values[j, i])
        acc *= grid.step**2
        assert exchange_symmetry(grid) == pytest.approx(acc.real, abs=1e-10)

    def test_exchange_symmetric_real_grid_gives_one(self):
        rng = np.random.default_rng(6)
        axis = np.linspace(-1.0, 1.0, 20)
        raw = rng.normal(size=(20, 20))
        grid = JsaGrid(raw + raw.T, axis)
        assert exchange_symmetry(grid) == pytest.approx(1.0, abs=1e-9)

    def test_in_unit_interval(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            val = exchange_symmetry(random_jsa(rng))
            assert -1.0 - 1e-12 <= val <= 1.0 + 1e-12

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            JsaGrid(np.ones((3, 4)), np.linspace(0, 1, 3))

    def test_all_zero_grid_rejected(self):
        with pytest.raises(ValueError):
            JsaGrid(np.zeros((5, 5)), np.linspace(0, 1, 5))


class TestSchmidtSpectrum:
    def test_separable_is_rank_one(self):
        axis = np.linspace(-3.0, 3.0, 41)
        f = np.exp(-(axis**2))
        spec = schmidt_spectrum_of(JsaGrid(np.outer(f, f), axis))
        assert spec.lambdas == pytest.approx((1.0,), abs=1e-12)

    def test_two_equal_orthogonal_pairs(self):
        axis = np.linspace(-3.0, 3.0, 41)
        f = np.exp(-(axis**2))
        g = axis * np.exp(-(axis**2))
        fn = f / math.sqrt(np.sum(f**2))
        gn = g / math.sqrt(np.sum(g**2))
        grid = JsaGrid(np.outer(fn, fn) + np.outer(gn, gn), axis)
        spec = schmidt_spectrum_of(grid)
        root_half = 1.0 / math.sqrt(2.0)
        assert spec.lambdas == pytest.approx((root_half, root_half), abs=1e-9)

    def test_against_gram_matrix_oracle(self):
        rng = np.random.default_rng(11)
        grid = random_jsa(rng)
        gram = (grid.values * grid.step) @ (grid.values.conj().T * grid.step)
        eigs = np.sort(np.linalg.eigvalsh(gram))[::-1]
        eigs = np.clip(eigs, 0.0, None)
        expected = np.sqrt(eigs)
        spec = schmidt_spectrum_of(grid)
        assert np.allclose(spec.lambdas, expected[: len(spec.lambdas)], atol=1e-9)

    def test_reassembly_preserves_exchange_symmetry(self):
        rng = np.random.default_rng(12)
        grid = random_jsa(rng)
        u, s, vh = np.linalg.svd(grid.values)
        rebuilt = JsaGrid((u * s) @ vh, grid.axis)
        assert exchange_symmetry(rebuilt) == pytest.approx(
            exchange_symmetry(grid), abs=1e-8
        )

    def test_double_gaussian_entanglement(self):
        axis = np.linspace(-4.0, 4.0, 64)
        grid = double_gaussian_jsa(axis, sum_width=0.4, diff_width=1.6)
        spec = schmidt_spectrum_of(grid)
        assert lambda4(spec) < 1.0  # widths differ, so more than one mode
        assert exchange_symmetry(grid) == pytest.approx(1.0, abs=1e-9)

    def test_spectrum_validation(self):
        with pytest.raises(ValueError):
            SchmidtSpectrum([0.5, 0.5])  # squares sum to 0.5
        with pytest.raises(ValueError):
            SchmidtSpectrum([])
        with pytest.raises(ValueError):
            SchmidtSpectrum([1.2, -0.66332495807108])


class TestLambda4:
    @pytest.mark.parametrize(
        "lams,expected",
        [
            ([1.0], 1.0),
            ([2**-0.5, 2**-0.5], 0.5),
            ([0.5**0.5, 0.3**0.5, 0.2**0.5], 0.38),
        ],
    )
    def test_examples(self, lams, expected):
        assert lambda4(SchmidtSpectrum(lams)) == pytest.approx(expected, abs=1e-12)

    def test_bounds_for_k_modes(self):
        rng = np.random.default_rng(3)
        for k in (2, 3, 5, 8):
            equal = SchmidtSpectrum([1.0 / math.sqrt(k)] * k)
            assert lambda4(equal) == pytest.approx(1.0 / k, abs=1e-12)
            for _ in range(10):
                raw = rng.uniform(0.1, 1.0, size=k)
                lams = np.sqrt(raw / raw.sum())
                val = lambda4(SchmidtSpectrum(lams.tolist()))
                assert 1.0 / k - 1e-12 <= val <= 1.0 + 1e-12


def synthetic_dip(a, b, sigma, xs, rng=None, counts_per_point=None):
    points = []
    for x in xs:
        p = a + b * quartic_gaussian_overlap(x, sigma)
        if rng is not None:
            n = rng.poisson(counts_per_point * p) if p > 0 else 0
            p = n / counts_per_point
            w = counts_per_point / max(p, 1.0 / counts_per_point)  # ~1/var weight
        else:
            w = 1.0
        points.append((x, p, w))
    return points


class TestHomDipFit:
    def test_noiseless_recovery(self):
        xs = np.linspace(-8.0, 8.0, 33)
        points = synthetic_dip(0.5, -0.5, 2.0, xs)
        fit = fit_hom_dip(points, init=(0.4, -0.4, 1.5))
        assert not fit.ill_posed
        assert fit.a == pytest.approx(0.5, abs=1e-6)
        assert fit.b == pytest.approx(-0.5, abs=1e-6)
        assert fit.sigma == pytest.approx(2.0, abs=1e-6)
        assert fit.residual < 1e-12

    def test_poisson_noise_sigma_within_bootstrap_error(self):
        # Monte-Carlo calibration: bootstrap standard error from refits of
        # resampled datasets brackets the true sigma at 3 standard errors.
        rng = np.random.default_rng(21)
        xs = np.linspace(-9.0, 9.0, 25)
        counts = 10_000
        points = synthetic_dip(0.5, -0.45, 2.0, xs, rng=rng, counts_per_point=counts)
        fit = fit_hom_dip(points, init=(0.45, -0.4, 1.6))
        assert not fit.ill_posed
        sigmas = []
        for trial in range(60):
            trial_rng = np.random.default_rng(1000 + trial)
            resampled = synthetic_dip(
                fit.a, fit.b, fit.sigma, xs, rng=trial_rng, counts_per_point=counts
            )
            refit = fit_hom_dip(resampled, init=(fit.a, fit.b, fit.sigma), restarts=3)
            sigmas.append(refit.sigma)
        se = float(np.std(sigmas, ddof=1))
        assert abs(fit.sigma - 2.0) < 3.0 * se

    def test_flat_data_flagged_ill_posed(self):
        xs = np.linspace(-5.0, 5.0, 12)
        points = [(x, 0.5, 1.0) for x in xs]
        fit = fit_hom_dip(points, init=(0.5, -0.1, 2.0))
        assert fit.ill_posed

    def test_identical_delays_rejected(self):
        points = [(1.0, 0.4, 1.0)] * 6
        with pytest.raises(IllPosedError):
            fit_hom_dip(points, init=(0.5, -0.5, 2.0))

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_hom_dip([(0, 0.1, 1), (1, 0.2, 1), (2, 0.3, 1)], init=(0.5, -0.5, 2.0))

    def test_fit_report_keys(self):
        import json

        fit = HomDipFit(a=0.5, b=-0.4, sigma=2.0, residual=0.0)
        assert set(json.loads(fit.to_json())) == {"a", "b", "sigma", "residual", "ill_posed"}

    def test_unphysical_zero_delay_probability_rejected(self):
        with pytest.raises(ValueError):
            HomDipFit(a=0.2, b=-0.4, sigma=1.0, residual=0.0)
