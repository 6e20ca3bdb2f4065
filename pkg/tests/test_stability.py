"""Floquet-Hill assembly, eigensolves, sweeps and instability classification."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from flexwave.core import (
    INFINITE_DEPTH,
    IceModel,
    PhysicalParams,
    SpectralProfile,
    TravelingWave,
    eval_profile,
    grid_points,
    p_flex_grid,
)
from flexwave.solver import SolverConfig, bifurcation_speed, continue_branch
from flexwave.stability import (
    FloquetSpectrum,
    InstabilityKind,
    assemble_matrices,
    classify,
    linearized_flex,
    nls_overlay,
    solve_spectrum,
    sweep_floquet,
)
from flexwave.theory import flat_eigenvalues, nls_coefficients

LIN = IceModel.LINEAR_BIHARMONIC
NL = IceModel.NONLINEAR_COSSERAT


def flat_wave(params, c, model=LIN, n=4):
    return TravelingWave(profile=SpectralProfile(np.zeros(n)), c=c, params=params, model=model)


def cosine_wave(coeffs, c, params, model=NL):
    return TravelingWave(profile=SpectralProfile(np.array(coeffs)), c=c, params=params, model=model)


def modes(n):
    return np.arange(-n, n + 1)


class TestLinearizedFlex:
    def test_flat_linear_is_biharmonic_symbol(self):
        base = flat_wave(PhysicalParams(D=1.0), 1.0)
        mu = 0.3
        g = linearized_flex(base, LIN, mu, 6)
        assert_allclose(g, np.diag((mu + modes(6)) ** 4).astype(complex), atol=1e-14)

    def test_flat_nonlinear_reduces_to_linear(self):
        base = flat_wave(PhysicalParams(D=1.0), 1.0)
        mu = 0.21
        g_lin = linearized_flex(base, LIN, mu, 8)
        g_nl = linearized_flex(base, NL, mu, 8)
        assert_allclose(g_nl, g_lin, atol=1e-12)

    def test_model_difference_vanishes_with_amplitude(self):
        p = PhysicalParams(D=0.5)
        mu = 0.17
        norms = {}
        for a in (1e-3, 1e-4):
            base = cosine_wave([a], 1.0, p)
            diff = linearized_flex(base, NL, mu, 8) - linearized_flex(base, LIN, mu, 8)
            norms[a] = np.linalg.norm(diff, ord=2)
        bound = norms[1e-3] / 1e-3  # fitted C at the larger amplitude
        assert norms[1e-4] <= bound * 1e-4 * 1.1

    def test_frechet_derivative_against_finite_differences(self):
        # directional derivative of the Toland pressure at a non-flat profile
        prof = SpectralProfile(np.array([0.08, 0.02, -0.01]))
        base = TravelingWave(profile=prof, c=1.0, params=PhysicalParams(D=0.3), model=NL)
        n_modes = 12
        m_grid = 128
        eta = eval_profile(prof, m_grid)
        g_mat = linearized_flex(base, NL, 0.0, n_modes)
        rng = np.random.default_rng(3)
        delta = 1e-6
        x = grid_points(m_grid)
        for _ in range(5):
            amp_c = rng.normal(size=5) / (1 + np.arange(5)) ** 2
            amp_s = rng.normal(size=5) / (1 + np.arange(5)) ** 2
            v = sum(a * np.cos((j + 1) * x) for j, a in enumerate(amp_c))
            v += sum(b * np.sin((j + 1) * x) for j, b in enumerate(amp_s))
            fd = (p_flex_grid(eta + delta * v, NL) - p_flex_grid(eta - delta * v, NL)) / (2 * delta)
            v_hat = np.fft.fft(v) / m_grid
            v_modes = np.concatenate([v_hat[-n_modes:], v_hat[: n_modes + 1]])
            w_modes = g_mat @ np.fft.fftshift(np.fft.fft(v) / m_grid)[
                m_grid // 2 - n_modes : m_grid // 2 + n_modes + 1
            ]
            fd_hat = np.fft.fftshift(np.fft.fft(fd) / m_grid)[
                m_grid // 2 - n_modes : m_grid // 2 + n_modes + 1
            ]
            scale = np.max(np.abs(fd_hat))
            assert np.max(np.abs(w_modes - fd_hat)) / scale < 1e-5


class TestFlatOracle:
    @pytest.mark.parametrize("d", [0.1, 25.0])
    @pytest.mark.parametrize("h", [INFINITE_DEPTH, 0.05])
    def test_matches_closed_form(self, d, h):
        p = PhysicalParams(D=d, h=h)
        c = bifurcation_speed(p)
        base = flat_wave(p, c)
        for mu in (0.0, 0.25):
            l1, l2 = assemble_matrices(base, mu, n_modes=8)
            lams = solve_spectrum(l1, l2)
            for m in range(-6, 7):
                for lam in flat_eigenvalues(mu, m, c, p):
                    assert np.min(np.abs(lams - lam)) < 1e-8

    def test_rest_frame_has_no_doppler_shift(self):
        p = PhysicalParams(D=0.1)
        base = flat_wave(p, 0.0)
        l1, l2 = assemble_matrices(base, 0.3, n_modes=6)
        lams = solve_spectrum(l1, l2)
        for m in range(-4, 5):
            lam_p, lam_m = flat_eigenvalues(0.3, m, 0.0, p)
            assert np.min(np.abs(lams - lam_p)) < 1e-9
            assert np.min(np.abs(lams - lam_m)) < 1e-9

    def test_flat_blocks_are_diagonal(self):
        p = PhysicalParams(D=0.2, h=0.7)
        base = flat_wave(p, 1.1)
        n = 5
        l1, l2 = assemble_matrices(base, 0.2, n_modes=n)
        dim = 2 * n + 1
        a_blk = l1[:dim, :dim]
        c_blk = l1[dim:, :dim]
        assert np.max(np.abs(a_blk)) == 0.0  # f vanishes on flat water
        off_diag = c_blk - np.diag(np.diag(c_blk))
        assert np.max(np.abs(off_diag)) < 1e-15


class TestSolveSpectrum:
    def test_identity_pencil_reduces_to_plain_eigenvalues(self):
        rng = np.random.default_rng(11)
        m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        lams = solve_spectrum(np.eye(8, dtype=complex), m)
        expected = np.linalg.eigvals(m)
        for lam in expected:
            assert np.min(np.abs(lams - lam)) < 1e-10

    def test_infinite_eigenvalues_are_filtered(self):
        l1 = np.diag([1.0, 1.0, 0.0]).astype(complex)
        l2 = np.diag([2.0, 3.0, 1.0]).astype(complex)
        lams = solve_spectrum(l1, l2)
        assert sorted(lams.real) == pytest.approx([2.0, 3.0])


class TestSweep:
    def test_flat_water_is_spectrally_stable(self):
        p = PhysicalParams(D=0.1)
        base = flat_wave(p, bifurcation_speed(p))
        spec = sweep_floquet(base, mu_count=21, n_modes=8)
        assert spec.max_growth() < 1e-8

    def test_results_keyed_by_mu_not_completion_order(self, small_wave_d001):
        mus = np.array([0.3, -0.1, 0.02])
        a = sweep_floquet(small_wave_d001, 0, n_modes=12, mu_values=mus)
        b = sweep_floquet(small_wave_d001, 0, n_modes=12, mu_values=mus, workers=3)
        for x, y in zip(a.eigenvalues, b.eigenvalues):
            assert_allclose(np.sort_complex(x), np.sort_complex(y), rtol=0, atol=0)

    def test_quadruple_symmetry_for_converged_wave(self, small_wave_d001):
        mus = np.array([-0.25, -0.1, 0.0, 0.1, 0.25])
        spec = sweep_floquet(small_wave_d001, 0, n_modes=16, mu_values=mus)
        lams = np.concatenate(spec.eigenvalues)
        for target in (-lams.conj(), lams.conj()):
            dist = np.abs(lams[None, :] - target[:, None]).min(axis=1)
            assert dist.max() < 1e-8

    def test_truncation_robustness(self, small_wave_d001):
        mus = np.linspace(0.0, 0.05, 11)  # covers the unstable band
        growth = {}
        for n in (16, 32):
            spec = sweep_floquet(small_wave_d001, 0, n_modes=n, mu_values=mus)
            growth[n] = spec.max_growth()
        assert abs(growth[32] - growth[16]) < 1e-6


class TestClassify:
    def synthetic(self, points):
        """points: list of (mu, [lambda, ...]) pairs."""
        mus = np.array([mu for mu, _ in points])
        eigs = [np.array(lams, dtype=complex) for _, lams in points]
        return FloquetSpectrum(mu_values=mus, eigenvalues=eigs, n_modes=4)

    def test_flat_spectrum_has_empty_classification(self):
        p = PhysicalParams(D=0.1)
        base = flat_wave(p, bifurcation_speed(p))
        spec = sweep_floquet(base, mu_count=11, n_modes=8)
        report = classify(spec)
        assert report.clusters == ()
        assert report.max_growth == 0.0

    def test_modulational_cluster_touches_origin(self):
        step = 0.01
        pts = []
        for i in range(-5, 6):
            mu = step * i
            growth = max(0.0, 4e-4 * (1 - (mu / 0.04) ** 2)) if mu else 0.0
            lams = [complex(growth, 0.5 * mu)] if growth else []
            pts.append((mu, lams))
        report = classify(self.synthetic(pts))
        assert {c.kind for c in report.clusters} == {InstabilityKind.MODULATIONAL}

    def test_bubble_away_from_origin_is_high_frequency(self):
        pts = [(0.01 * i, []) for i in range(-5, 6)]
        pts[8] = (0.03, [complex(1e-4, 0.8)])
        pts[9] = (0.04, [complex(2e-4, 0.81)])
        report = classify(self.synthetic(pts))
        assert {c.kind for c in report.clusters} == {InstabilityKind.HIGH_FREQUENCY}

    def test_lambda_cutoff_drops_truncation_noise(self):
        pts = [(0.01 * i, []) for i in range(-5, 6)]
        pts[7] = (0.02, [complex(1e-5, 2.6e4)])  # edge-mode artifact
        report = classify(self.synthetic(pts), lambda_cutoff=100.0)
        assert report.clusters == ()


class TestOverlay:
    def coeffs(self, d, model=LIN):
        return nls_coefficients(model, 1, PhysicalParams(D=d))

    def test_endpoints_reach_origin(self):
        curve = nls_overlay(self.coeffs(0.01), 0.005, 1.005, mu_grid=31)
        assert abs(curve[0, 0]) < 1e-10 and abs(curve[-1, 0]) < 1e-10  # band edges
        center = curve[len(curve) // 2]  # mu = 0 maps to the spectral origin
        assert np.max(np.abs(center)) < 1e-12

    def test_max_extent_is_peak_growth(self):
        co = self.coeffs(0.01)
        a = 0.005
        curve = nls_overlay(co, a, 1.005, mu_grid=4001)
        assert curve[:, 0].max() == pytest.approx(abs(co.M) * a**2, rel=1e-4)

    def test_containment_order_follows_rigidity(self):
        # linear-model curve encloses the nonlinear one at D=0.01 and the
        # containment flips at D=0.1
        for d, lin_outside in ((0.01, True), (0.1, False)):
            ext = {}
            for model in (LIN, NL):
                co = nls_coefficients(model, 1, PhysicalParams(D=d))
                curve = nls_overlay(co, 0.005, 1.0, mu_grid=801)
                ext[model] = (curve[:, 0].max(), np.abs(curve[:, 1]).max())
            lin_bigger = all(ext[LIN][i] > ext[NL][i] for i in range(2))
            assert lin_bigger is lin_outside

    def test_defocusing_curve_is_empty(self):
        assert nls_overlay(self.coeffs(0.05), 0.01, 1.0).size == 0

    def test_sign_convention_switch(self):
        co = self.coeffs(0.01)
        a, c = 0.005, 1.005
        base = nls_overlay(co, a, c, mu_grid=51)
        flipped = nls_overlay(co, a, c, mu_grid=51, convention="c_minus_vg")
        assert_allclose(flipped[:, 1], -base[:, 1], atol=0)
        with pytest.raises(ValueError):
            nls_overlay(co, a, c, convention="upside_down")
