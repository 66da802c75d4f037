import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisolp.errors import InvalidDirectionError, InvalidGridError, MeanViolationError
from anisolp.sampling import random_smooth_field
from anisolp.spectral import (
    VOLUME,
    SpectralField,
    dealias,
    directional_derivative,
    divergence,
    from_physical,
    gradient,
    inv_laplacian,
    l2_inner,
    l2_norm,
    leray_project,
    make_grid,
    multiply,
    read_field,
    sobolev_norm,
    to_physical,
    write_field,
)


class TestGrid:
    def test_wavenumber_layout(self):
        g = make_grid(32)
        assert set(g.k1.tolist()) == set(range(-16, 16))

    def test_mode_count(self):
        assert make_grid(8).n_modes == 512

    @pytest.mark.parametrize("bad", [12, 6, 0, 20])
    def test_rejects_non_power_of_two(self, bad):
        with pytest.raises(InvalidGridError):
            make_grid(bad)

    def test_non_strict_admits_even_sizes(self):
        g = make_grid(48, strict=False)
        assert g.n_per_axis == 48
        with pytest.raises(InvalidGridError):
            make_grid(13, strict=False)

    def test_dealias_mask_definition(self):
        g = make_grid(32)
        kcut = (2.0 / 3.0) * 16
        expected = (
            (np.abs(g.kx) <= kcut) & (np.abs(g.ky) <= kcut) & (np.abs(g.kz) <= kcut)
        )
        assert np.array_equal(g.dealias_mask, expected)


class TestTransforms:
    @pytest.mark.parametrize("n", [8, 16, 32])
    def test_round_trip(self, n):
        g = make_grid(n)
        rng = np.random.default_rng(n)
        vals = rng.normal(size=g.shape)
        # remove Nyquist content first: it is zeroed by construction
        f = from_physical(g, vals)
        back = to_physical(f)
        again = to_physical(from_physical(g, back))
        assert np.max(np.abs(again - back)) <= 1e-13 * max(1.0, np.abs(back).max())

    def test_parseval(self, grid32):
        for seed in range(20):
            f = random_smooth_field(grid32, seed)
            phys = to_physical(f)
            phys_norm = np.sqrt((phys**2).sum() * grid32.dx**3)
            assert abs(phys_norm - l2_norm(f)) <= 1e-12 * phys_norm

    def test_nyquist_zeroed_on_construction(self, grid16):
        rng = np.random.default_rng(3)
        f = from_physical(grid16, rng.normal(size=grid16.shape))
        assert np.all(f.coeffs[grid16.nyquist_mask] == 0)


class TestDirectionalDerivative:
    def test_single_mode_along_axis(self, grid16):
        x1, _, _ = grid16.mesh()
        f = from_physical(grid16, np.cos(x1))
        df = directional_derivative(f, np.array([1.0, 0, 0]))
        assert np.allclose(to_physical(df), -np.sin(x1), atol=1e-13)

    def test_orthogonal_direction_kills(self, grid16):
        x1, _, _ = grid16.mesh()
        f = from_physical(grid16, np.cos(x1))
        df = directional_derivative(f, np.array([0.0, 1.0, 0]))
        assert np.max(np.abs(df.coeffs)) <= 1e-15

    def test_oblique_multiplier(self, grid16):
        # xi.e = 2*0.6 + 1*0.8 = 2 on the (2,1,0) mode
        x1, x2, _ = grid16.mesh()
        f = from_physical(grid16, np.cos(2 * x1 + x2))
        df = directional_derivative(f, np.array([0.6, 0.8, 0.0]))
        assert np.allclose(to_physical(df), -2.0 * np.sin(2 * x1 + x2), atol=1e-12)

    def test_non_unit_rejected(self, grid16):
        f = random_smooth_field(grid16, 0)
        with pytest.raises(InvalidDirectionError):
            directional_derivative(f, np.array([1.0, 1.0, 0.0]))

    @settings(max_examples=20, deadline=None)
    @given(
        a=st.floats(-3, 3, allow_nan=False),
        b=st.floats(-3, 3, allow_nan=False),
        seed=st.integers(0, 50),
    )
    def test_linear_and_antisymmetric(self, a, b, seed):
        g = make_grid(8)
        e = np.array([0.6, 0.0, 0.8])
        f1 = random_smooth_field(g, seed)
        f2 = random_smooth_field(g, seed + 1000)
        combo = directional_derivative(
            SpectralField(g, a * f1.coeffs + b * f2.coeffs), e
        )
        split = a * directional_derivative(f1, e) + b * directional_derivative(f2, e)
        assert np.allclose(combo.coeffs, split.coeffs, atol=1e-12)
        flipped = directional_derivative(f1, -e)
        assert np.allclose(flipped.coeffs, -directional_derivative(f1, e).coeffs)


class TestLeray:
    def test_annihilates_gradients(self, grid16):
        x1, _, _ = grid16.mesh()
        u = gradient(from_physical(grid16, np.sin(x1)))
        assert l2_norm(leray_project(u)) <= 1e-13

    def test_divergence_free_unchanged(self, grid16):
        u = random_smooth_field(grid16, 4, vector=True, divergence_free=True)
        assert l2_norm(leray_project(u) - u) <= 1e-14 * l2_norm(u)

    def test_transverse_mode_unchanged(self, grid16):
        _, x2, _ = grid16.mesh()
        z = np.zeros(grid16.shape)
        u = from_physical(grid16, np.stack([np.cos(x2), z, z]))
        assert l2_norm(leray_project(u) - u) <= 1e-14 * l2_norm(u)

    def test_idempotent_and_self_adjoint(self, grid16):
        u = random_smooth_field(grid16, 5, vector=True)
        v = random_smooth_field(grid16, 6, vector=True)
        pu = leray_project(u)
        assert l2_norm(leray_project(pu) - pu) <= 1e-12 * l2_norm(pu)
        assert abs(l2_inner(pu, v) - l2_inner(u, leray_project(v))) <= 1e-12 * (
            l2_norm(u) * l2_norm(v)
        )

    def test_mean_violation(self, grid16):
        c = np.zeros((3, *grid16.shape), dtype=complex)
        c[0, 0, 0, 0] = 1.0
        with pytest.raises(MeanViolationError):
            leray_project(SpectralField(grid16, c))


class TestInvLaplacian:
    def test_eigenfunction(self, grid16):
        x1, _, _ = grid16.mesh()
        f = from_physical(grid16, -np.cos(x1))
        assert np.allclose(to_physical(inv_laplacian(f)), np.cos(x1), atol=1e-13)

    def test_mixed_mode(self, grid16):
        x1, x2, _ = grid16.mesh()
        f = from_physical(grid16, -5.0 * np.cos(x1 + 2 * x2))
        assert np.allclose(to_physical(inv_laplacian(f)), np.cos(x1 + 2 * x2), atol=1e-13)

    def test_round_trip_oracle(self, grid32):
        f = random_smooth_field(grid32, 7)
        lap = inv_laplacian(f).apply_multiplier(-grid32.k_sq)
        assert l2_norm(lap - f) <= 1e-13 * l2_norm(f)

    def test_mean_violation(self, grid16):
        c = np.zeros(grid16.shape, dtype=complex)
        c[0, 0, 0] = 2.0
        with pytest.raises(MeanViolationError):
            inv_laplacian(SpectralField(grid16, c))


class TestSobolevNorm:
    def test_single_mode_three_halves(self, grid16):
        x1, _, _ = grid16.mesh()
        f = from_physical(grid16, np.cos(2 * x1))
        expected = 2**1.5 * np.sqrt(VOLUME / 2.0)
        assert abs(sobolev_norm(f, 1.5) - expected) <= 1e-12 * expected

    def test_s_zero_is_l2(self, grid32):
        f = random_smooth_field(grid32, 9)
        assert abs(sobolev_norm(f, 0.0) - l2_norm(f)) <= 1e-13 * l2_norm(f)

    @pytest.mark.parametrize("s", [-1.0, 0.5, 1.5, 2.0])
    def test_unit_mode_any_s(self, grid16, s):
        x1, _, _ = grid16.mesh()
        f = from_physical(grid16, np.cos(x1)).with_zero_mean()
        assert abs(sobolev_norm(f, s) - l2_norm(f)) <= 1e-12 * l2_norm(f)

    def test_negative_s_needs_mean_zero(self, grid16):
        c = np.zeros(grid16.shape, dtype=complex)
        c[0, 0, 0] = 1.0
        c[1, 0, 0] = c[-1, 0, 0] = 0.5
        with pytest.raises(MeanViolationError):
            sobolev_norm(SpectralField(grid16, c), -0.5)


class TestProducts:
    def test_multiply_matches_pointwise(self, grid32):
        f = random_smooth_field(grid32, 11)
        g = random_smooth_field(grid32, 12)
        prod = multiply(f, g)
        direct = to_physical(f) * to_physical(g)
        # band-limited factors: product stays inside the dealias range
        assert np.allclose(to_physical(prod), direct, atol=1e-12 * np.abs(direct).max())

    def test_dealias_removes_outer_modes(self, grid16):
        rng = np.random.default_rng(1)
        f = from_physical(grid16, rng.normal(size=grid16.shape))
        d = dealias(f)
        assert np.all(d.coeffs[~grid16.dealias_mask] == 0)


class TestSnapshotFormat:
    def test_round_trip_scalar_and_vector(self, grid16, tmp_path):
        for vector in (False, True):
            f = random_smooth_field(grid16, 21, vector=vector)
            path = tmp_path / ("v.alp1" if vector else "s.alp1")
            write_field(f, path)
            back = read_field(path, grid16)
            assert back.rank == f.rank
            assert np.array_equal(back.coeffs, f.coeffs)

    def test_header_layout(self, grid16, tmp_path):
        f = random_smooth_field(grid16, 22)
        path = tmp_path / "f.alp1"
        write_field(f, path)
        raw = path.read_bytes()
        assert raw[:4] == b"ALP1"
        dims = np.frombuffer(raw[4:16], dtype="<u4")
        assert dims.tolist() == [16, 16, 16]
        assert raw[16] == 0  # scalar rank tag
        first = np.frombuffer(raw[17:33], dtype="<f8")
        assert first[0] == f.coeffs[0, 0, 0].real
        assert first[1] == f.coeffs[0, 0, 0].imag

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.alp1"
        path.write_bytes(b"NOPE" + b"\0" * 32)
        with pytest.raises(ValueError):
            read_field(path)


def test_divergence_of_gradient_is_laplacian(grid16):
    f = random_smooth_field(grid16, 30)
    lap = divergence(gradient(f))
    assert np.allclose(lap.coeffs, -grid16.k_sq * f.coeffs, atol=1e-12)
