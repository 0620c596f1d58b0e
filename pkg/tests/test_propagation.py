"""Tests for wavefront propagation and PSF-stack computation."""

import numpy as np
import pytest

from nirsnap.doe import (
    DoeFabSpec,
    HeightMap,
    MaterialModel,
    RadialProfile,
    quantize_height,
    refractive_index,
    rotate_radial_profile,
)
from nirsnap.errors import BadMagicError, SizeMismatchError, ValidationError
from nirsnap.grid import point_reflect, quarter_turn, squared_radius_grid
from nirsnap.propagation import (
    ComplexField,
    OpticalConfig,
    PSFStack,
    apply_doe,
    centered_fft2,
    compute_psf_stack,
    load_psf_stack,
    point_source_field,
    propagate_to_sensor,
    psf_output_pitch,
    save_psf_stack,
)

from oracles import matrix_centered_dft, naive_centered_dft

PITCH = 4e-6


def small_config(n=64, **kw):
    defaults = dict(
        grid_size=n,
        pixel_pitch=PITCH,
        lambda_min=700e-9,
        lambda_max=1000e-9,
        lambda_step=100e-9,
    )
    defaults.update(kw)
    return OpticalConfig(**defaults)


def random_height_map(n=64, seed=0):
    rng = np.random.default_rng(seed)
    spec = DoeFabSpec()
    profile = RadialProfile(rng.uniform(0, spec.total_depth, 512), sample_pitch=PITCH)
    hm = rotate_radial_profile(profile, n, PITCH, n // 2 * PITCH)
    return quantize_height(hm, spec)


class TestPointSource:
    def test_center_pixel_is_one(self):
        field = point_source_field(small_config(), 800e-9)
        c = field.grid_size // 2
        assert field.values[c, c] == 1.0 + 0.0j

    def test_unit_modulus_everywhere(self):
        field = point_source_field(small_config(), 800e-9)
        assert np.allclose(np.abs(field.values), 1.0, atol=1e-12)

    def test_phase_one_pixel_off_axis(self):
        # x = 4 um, y = 0, lambda = 800 nm, z0 = 1 m:
        # phase = 2*pi * (4e-6)^2 / (800e-9 * 1) = 2*pi * 2e-5
        field = point_source_field(small_config(), 800e-9)
        c = field.grid_size // 2
        expected = np.exp(1j * 2 * np.pi * (PITCH**2) / (800e-9 * 1.0))
        assert field.values[c, c + 1] == pytest.approx(expected, rel=1e-12)
        assert np.angle(field.values[c, c + 1]) == pytest.approx(
            2 * np.pi * 2e-5, rel=1e-9
        )

    def test_half_factor_flag(self):
        full = point_source_field(small_config(), 800e-9)
        half = point_source_field(small_config(paraxial_half_factor=True), 800e-9)
        c = full.grid_size // 2
        assert np.angle(half.values[c, c + 1]) == pytest.approx(
            np.angle(full.values[c, c + 1]) / 2, rel=1e-9
        )

    def test_rejects_nonpositive_wavelength(self):
        with pytest.raises(ValidationError):
            point_source_field(small_config(), 0.0)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValidationError):
            OpticalConfig(source_distance=0.0)


class TestApplyDoe:
    def test_zero_height_map_passes_field_through(self):
        cfg = small_config()
        field = point_source_field(cfg, 800e-9)
        hm = HeightMap(np.zeros((64, 64)), PITCH, 32 * PITCH)
        out = apply_doe(field, hm, MaterialModel())
        mask = hm.mask()
        assert np.array_equal(out.values[mask], field.values[mask])
        assert np.all(out.values[~mask] == 0.0)

    def test_full_wave_height_is_invisible(self):
        cfg = small_config()
        lam = 800e-9
        mat = MaterialModel(mode="constant", constant_index=1.5)
        field = point_source_field(cfg, lam)
        flat = HeightMap(np.zeros((64, 64)), PITCH, 32 * PITCH)
        step_h = np.where(flat.mask(), lam / 0.5, 0.0)
        stepped = HeightMap(step_h, PITCH, 32 * PITCH)
        a = apply_doe(field, flat, mat)
        b = apply_doe(field, stepped, mat)
        assert np.allclose(a.values, b.values, atol=1e-12)

    def test_amplitude_scales_modulus(self):
        cfg = small_config()
        field = point_source_field(cfg, 800e-9)
        hm = random_height_map()
        hm = HeightMap(hm.heights, hm.pixel_pitch, hm.aperture_radius, amplitude=0.7)
        out = apply_doe(field, hm, MaterialModel())
        mask = hm.mask()
        assert np.allclose(np.abs(out.values[mask]), 0.7, atol=1e-12)

    def test_rejects_grid_mismatch(self):
        field = point_source_field(small_config(n=32), 800e-9)
        hm = random_height_map(n=64)
        with pytest.raises(ValidationError):
            apply_doe(field, hm, MaterialModel())


class TestCenteredTransform:
    @pytest.mark.parametrize("n", [8, 16])
    def test_matches_naive_loop_dft(self, n):
        rng = np.random.default_rng(n)
        u = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        ref = naive_centered_dft(u)
        fast = centered_fft2(u)
        assert np.abs(fast - ref).max() / np.abs(ref).max() < 1e-9

    @pytest.mark.parametrize("n", [8, 16, 24, 32])
    def test_matches_matrix_dft(self, n):
        rng = np.random.default_rng(100 + n)
        u = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        ref = matrix_centered_dft(u)
        fast = centered_fft2(u)
        assert np.abs(fast - ref).max() / np.abs(ref).max() < 1e-9


class TestPropagate:
    def test_matches_direct_dft_oracle(self):
        n = 16
        rng = np.random.default_rng(21)
        values = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        field = ComplexField(values, PITCH, 800e-9)
        out = propagate_to_sensor(field, 0.05)
        rsq = squared_radius_grid(n, PITCH)
        chirp = np.exp(1j * (2 * np.pi / 800e-9) * rsq / (2 * 0.05))
        ref = np.abs(naive_centered_dft(values * chirp)) ** 2
        ref /= ref.sum()
        assert np.abs(out - ref).max() / ref.max() < 1e-9

    def test_unit_sum_and_nonnegative(self):
        field = point_source_field(small_config(), 800e-9)
        out = propagate_to_sensor(field, 0.05)
        assert abs(out.sum() - 1.0) < 1e-6
        assert np.all(out >= 0.0)

    def test_flat_element_pattern_is_centro_symmetric(self):
        # nearly planar illumination through a plain circular aperture
        cfg = small_config(source_distance=1e9)
        field = point_source_field(cfg, 800e-9)
        hm = HeightMap(np.zeros((64, 64)), PITCH, 32 * PITCH)
        out = propagate_to_sensor(apply_doe(field, hm, MaterialModel()), 0.05)
        rel = np.linalg.norm(out - point_reflect(out)) / np.linalg.norm(out)
        assert rel < 1e-6

    def test_rejects_nonpositive_distance(self):
        field = point_source_field(small_config(), 800e-9)
        with pytest.raises(ValidationError):
            propagate_to_sensor(field, -0.05)


class TestPsfStack:
    def test_default_band_grid_is_31_slices(self):
        cfg = OpticalConfig()
        assert cfg.band_count == 31
        waves = cfg.wavelengths
        assert waves[0] == pytest.approx(700e-9, rel=1e-12)
        assert waves[-1] == pytest.approx(1000e-9, rel=1e-12)
        assert np.allclose(np.diff(waves), 10e-9, rtol=1e-9)

    def test_stack_slices_normalized(self):
        stack = compute_psf_stack(small_config(), random_height_map(), MaterialModel())
        assert stack.band_count == 4
        sums = stack.kernels.sum(axis=(1, 2))
        assert np.all(np.abs(sums - 1.0) < 1e-6)
        assert np.all(stack.kernels >= 0.0)

    def test_slices_differ_across_wavelength(self):
        stack = compute_psf_stack(small_config(), random_height_map(), MaterialModel())
        a, b = stack.kernels[0], stack.kernels[-1]
        rel = np.linalg.norm(a - b) / np.linalg.norm(a)
        assert rel > 0.01

    def test_slices_invariant_under_quarter_turn(self):
        stack = compute_psf_stack(small_config(), random_height_map(), MaterialModel())
        for sl in stack.kernels:
            rel = np.linalg.norm(sl - quarter_turn(sl)) / np.linalg.norm(sl)
            assert rel < 1e-6

    def test_phase_wrap_invariance(self):
        cfg = small_config()
        hm = random_height_map()
        for mat in (MaterialModel(), MaterialModel(mode="constant", constant_index=1.5)):
            for lam in (700e-9, 1000e-9):
                n_lam = refractive_index(mat, lam)
                shifted = np.where(hm.mask(), hm.heights + lam / (n_lam - 1.0), 0.0)
                hm2 = HeightMap(shifted, hm.pixel_pitch, hm.aperture_radius)
                base = propagate_to_sensor(
                    apply_doe(point_source_field(cfg, lam), hm, mat), 0.05
                )
                wrapped = propagate_to_sensor(
                    apply_doe(point_source_field(cfg, lam), hm2, mat), 0.05
                )
                rel = np.linalg.norm(base - wrapped) / np.linalg.norm(base)
                assert rel < 1e-9

    def test_bit_identical_recomputation(self):
        cfg = small_config()
        hm = random_height_map()
        a = compute_psf_stack(cfg, hm, MaterialModel())
        b = compute_psf_stack(cfg, hm, MaterialModel())
        assert np.array_equal(a.kernels, b.kernels)

    def test_rejects_grid_mismatch(self):
        with pytest.raises(ValidationError):
            compute_psf_stack(small_config(n=32), random_height_map(n=64), MaterialModel())

    def test_physical_rescale_keeps_reference_slice(self):
        cfg = small_config()
        cfg_rescaled = small_config(physical_rescale=True)
        hm = random_height_map()
        plain = compute_psf_stack(cfg, hm, MaterialModel())
        rescaled = compute_psf_stack(cfg_rescaled, hm, MaterialModel())
        # shortest wavelength defines the common pitch, so slice 0 is untouched
        assert np.array_equal(plain.kernels[0], rescaled.kernels[0])
        assert not np.array_equal(plain.kernels[-1], rescaled.kernels[-1])
        sums = rescaled.kernels.sum(axis=(1, 2))
        assert np.all(np.abs(sums - 1.0) < 1e-6)

    def test_output_pitch_scales_with_wavelength(self):
        cfg = small_config()
        p700 = psf_output_pitch(cfg, 700e-9)
        p1000 = psf_output_pitch(cfg, 1000e-9)
        assert p1000 / p700 == pytest.approx(1000 / 700, rel=1e-12)


class TestOpticalConfigValidation:
    def test_rejects_non_integral_span(self):
        with pytest.raises(ValidationError):
            OpticalConfig(lambda_min=700e-9, lambda_max=1000e-9, lambda_step=7e-9)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValidationError):
            OpticalConfig(lambda_min=1000e-9, lambda_max=700e-9)

    def test_rejects_odd_grid(self):
        with pytest.raises(ValidationError):
            OpticalConfig(grid_size=1023)


class TestPsfStackType:
    def test_rejects_unnormalized_slices(self):
        kernels = np.full((2, 8, 8), 1.0)
        with pytest.raises(ValidationError):
            PSFStack(kernels, np.array([700e-9, 800e-9]))

    def test_rejects_negative_entries(self):
        kernels = np.zeros((1, 8, 8))
        kernels[0, 0, 0] = 1.5
        kernels[0, 0, 1] = -0.5
        with pytest.raises(ValidationError):
            PSFStack(kernels, np.array([700e-9]))


class TestPsfIo:
    def test_roundtrip(self, tmp_path):
        stack = compute_psf_stack(small_config(n=32), random_height_map(n=32), MaterialModel())
        path = tmp_path / "stack.npsf"
        save_psf_stack(stack, path)
        loaded = load_psf_stack(path)
        assert loaded.band_count == stack.band_count
        assert np.allclose(loaded.wavelengths, stack.wavelengths, rtol=1e-12)
        assert np.array_equal(
            loaded.kernels.astype(np.float32), stack.kernels.astype(np.float32)
        )

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.npsf"
        path.write_bytes(b"JUNK" + b"\0" * 32)
        with pytest.raises(BadMagicError):
            load_psf_stack(path)

    def test_payload_size_mismatch(self, tmp_path):
        stack = compute_psf_stack(small_config(n=16), random_height_map(n=16), MaterialModel())
        path = tmp_path / "stack.npsf"
        save_psf_stack(stack, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(SizeMismatchError):
            load_psf_stack(path)
