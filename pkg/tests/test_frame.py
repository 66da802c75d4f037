import numpy as np
import pytest

from anisolp.errors import DegenerateSegmentError, InvalidPathError, PartitionError
from anisolp.frame import (
    SEGMENT_MASS_BOUND,
    Frame,
    PathSegment,
    UnitPath,
    build_frame,
    constant_frame,
    frame_derivatives,
    partition_path,
    random_unit_path,
    read_frame_csv,
    read_unit_path_csv,
    validate_frame,
    write_frame_csv,
    write_unit_path_csv,
)


def circle_path(t_final=2.0, n=2001, speed=1.0):
    t = np.linspace(0.0, t_final, n)
    vals = np.stack([np.cos(speed * t), np.sin(speed * t), np.zeros_like(t)], axis=1)
    return UnitPath(t, vals)


class TestUnitPath:
    def test_rejects_non_unit(self):
        t = np.linspace(0, 1, 10)
        vals = np.ones((10, 3))
        with pytest.raises(InvalidPathError):
            UnitPath(t, vals)

    def test_rejects_decreasing_times(self):
        t = np.array([0.0, 0.5, 0.4])
        vals = np.tile([1.0, 0, 0], (3, 1))
        with pytest.raises(InvalidPathError):
            UnitPath(t, vals)

    def test_rejects_nonfinite(self):
        t = np.linspace(0, 1, 4)
        vals = np.tile([1.0, 0, 0], (4, 1))
        vals[2, 0] = np.nan
        with pytest.raises(InvalidPathError):
            UnitPath(t, vals)

    def test_jump_cell_excluded_from_derivative(self):
        t = np.linspace(0, 1, 11)
        vals = np.tile([1.0, 0, 0], (11, 1))
        vals[5:] = [0.0, 1.0, 0.0]
        p = UnitPath(t, vals, jump_indices=(5,))
        d = p.forward_differences()
        assert np.all(d[4] == 0)
        assert np.all(d[:4] == 0) and np.all(d[5:] == 0)


class TestPartition:
    def test_constant_path_single_segment(self):
        t = np.linspace(0, 1, 50)
        p = UnitPath(t, np.tile([0.0, 1.0, 0.0], (50, 1)))
        segs = partition_path(p)
        assert len(segs) == 1
        assert segs[0].t0 == 0.0 and segs[0].t1 == 1.0

    def test_circle_segment_condition(self):
        """Unit-speed circle: the discrete mass condition forces every
        segment length below 1/5 (length^(1/2) * length^(1/2) < 1/5)."""
        p = circle_path()
        segs = partition_path(p)
        t = p.times
        d = p.forward_differences()
        cell = np.sum(d**2, axis=1) * np.diff(t)
        for s in segs:
            length = t[s.stop] - t[s.start]
            mass = cell[s.start : s.stop].sum()
            assert np.sqrt(length * mass) < SEGMENT_MASS_BOUND
            assert length < 0.2 + 1e-12
        # coverage without gaps
        assert segs[0].t0 == 0.0 and segs[-1].t1 == t[-1]
        for a, b in zip(segs[:-1], segs[1:]):
            assert a.t1 == b.t0 or a.stop == b.start

    def test_jump_is_boundary(self):
        t = np.linspace(0, 2, 401)
        vals = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1)
        j = 200  # t = 1.0
        vals[j:] = vals[j:][:, [1, 0, 2]] * np.array([1, -1, 1.0])
        p = UnitPath(t, vals, jump_indices=(j,))
        segs = partition_path(p)
        assert any(s.start == j for s in segs)
        assert any(s.stop == j - 1 or s.t1 == t[j] for s in segs)

    def test_single_cell_violation_raises(self):
        # two samples a quarter-turn apart: one cell carries too much mass
        t = np.array([0.0, 1.0])
        vals = np.array([[1.0, 0, 0], [0.0, 1.0, 0]])
        with pytest.raises(PartitionError):
            partition_path(UnitPath(t, vals))


class TestBuildFrame:
    def test_axis_example(self):
        p = UnitPath(np.linspace(0, 1, 20), np.tile([1.0, 0, 0], (20, 1)))
        fr = build_frame(p)
        assert np.allclose(fr.path_nu.values[0], [0.0, 1.0, 0.0])
        assert np.allclose(fr.path_tau.values[0], [0.0, 0.0, -1.0])

    def test_permuted_example(self):
        p = UnitPath(np.linspace(0, 1, 20), np.tile([0.0, 0.6, 0.8], (20, 1)))
        fr = build_frame(p)
        assert np.allclose(fr.path_nu.values[0], [0.0, -0.8, 0.6])
        assert np.allclose(fr.path_tau.values[0], [-1.0, 0.0, 0.0])

    def test_circle_closed_form(self):
        p = circle_path()
        fr = build_frame(p)
        t = p.times
        assert np.allclose(fr.path_nu.values, np.stack([-np.sin(t), np.cos(t), 0 * t], axis=1), atol=1e-12)
        assert np.allclose(fr.path_tau.values, np.tile([0.0, 0.0, -1.0], (len(t), 1)), atol=1e-12)
        dt_, dn_, db_ = frame_derivatives(fr)
        mid = len(t) // 2
        ratio = (np.linalg.norm(dt_[mid]) + np.linalg.norm(dn_[mid])) / np.linalg.norm(db_[mid])
        assert abs(ratio - 1.0) <= 1e-6

    def test_orthonormality_and_orientation(self):
        for seed in range(20):
            fr = build_frame(random_unit_path(seed, n_jumps=seed % 3))
            t, n, b = fr.path_tau.values, fr.path_nu.values, fr.path_beta.values
            assert np.max(np.abs(np.sum(t * n, axis=1))) <= 1e-10
            assert np.max(np.abs(np.sum(n * b, axis=1))) <= 1e-10
            assert np.max(np.abs(np.sum(b * t, axis=1))) <= 1e-10
            vol = np.sum(t * np.cross(n, b), axis=1)
            assert np.max(np.abs(vol - 1.0)) <= 1e-10
            det = np.linalg.det(np.stack([t, n, b], axis=1))
            assert np.max(np.abs(det - 1.0)) <= 1e-10

    def test_derivative_ratio_bound(self):
        for seed in range(50):
            fr = build_frame(random_unit_path(100 + seed, n_samples=800, wobble=0.6))
            dt_, dn_, db_ = frame_derivatives(fr)
            num = np.linalg.norm(dt_, axis=1) + np.linalg.norm(dn_, axis=1)
            den = np.linalg.norm(db_, axis=1)
            ok = den > 1e-12
            assert np.all(num[ok] <= 10.0 * den[ok] + 1e-9)

    def test_permutation_change_recorded_as_jump(self):
        # great-circle drift whose smallest |component| moves from the
        # equal horizontal pair to the vertical axis
        t = np.linspace(0, 3.0, 2400)
        theta = 0.3 + t / 3.0
        vals = np.stack(
            [np.sin(theta) / np.sqrt(2), np.sin(theta) / np.sqrt(2), np.cos(theta)],
            axis=1,
        )
        fr = build_frame(UnitPath(t, vals))
        axes = {s.axis for s in fr.segment_table}
        assert len(axes) > 1
        assert len(fr.path_tau.jump_indices) > 0
        validate_frame(fr)


class TestFrameDerivatives:
    def test_constant_zero(self):
        p = UnitPath(np.linspace(0, 1, 30), np.tile([0.0, 1.0, 0.0], (30, 1)))
        fr = build_frame(p)
        dt_, dn_, db_ = frame_derivatives(fr)
        assert np.all(dt_ == 0) and np.all(dn_ == 0) and np.all(db_ == 0)

    def test_circle_speed(self):
        p = circle_path(t_final=2.0, n=2001)  # dt = 1e-3
        fr = build_frame(p)
        _, _, db_ = frame_derivatives(fr)
        speeds = np.linalg.norm(db_, axis=1)
        interior = speeds[5:-5]
        assert np.max(np.abs(interior - 1.0)) <= 1e-6

    def test_degenerate_segment_error(self):
        # hand-built frame whose only segment owns two samples
        t = np.linspace(0, 1, 2)
        vals = np.tile([0.0, 1.0, 0.0], (2, 1))
        path = UnitPath(t, vals)
        seg = PathSegment(start=0, stop=1, t0=0.0, t1=1.0, piece_final=True)
        fr = Frame(path_tau=UnitPath(t, np.tile([0.0, 0.0, 1.0], (2, 1))),
                   path_nu=UnitPath(t, np.tile([1.0, 0.0, 0.0], (2, 1))),
                   path_beta=path, segment_table=[seg])
        with pytest.raises(DegenerateSegmentError):
            frame_derivatives(fr)


class TestFrameIO:
    def test_unit_path_round_trip(self, tmp_path):
        p = random_unit_path(3, n_jumps=2)
        f = tmp_path / "path.csv"
        write_unit_path_csv(p, f)
        back = read_unit_path_csv(f)
        assert np.array_equal(back.times, p.times)
        assert np.array_equal(back.values, p.values)
        assert back.jump_indices == p.jump_indices

    def test_frame_round_trip(self, tmp_path):
        fr = build_frame(random_unit_path(4))
        f = tmp_path / "frame.csv"
        write_frame_csv(fr, f)
        back = read_frame_csv(f)
        assert np.array_equal(back.path_tau.values, fr.path_tau.values)
        assert np.array_equal(back.path_beta.values, fr.path_beta.values)
        assert len(back.segment_table) == len(fr.segment_table)


class TestFrameSampling:
    def test_at_time_exact_sample(self):
        fr = build_frame(circle_path())
        fs = fr.at_time(1.0)
        assert np.allclose(fs.beta, [np.cos(1.0), np.sin(1.0), 0.0], atol=1e-12)

    def test_at_time_interpolated_orthonormal(self):
        fr = build_frame(circle_path(n=201))
        fs = fr.at_time(0.7501234)
        m = np.stack([fs.tau, fs.nu, fs.beta])
        assert np.max(np.abs(m @ m.T - np.eye(3))) <= 1e-12

    def test_constant_frame_orthonormal(self, generic_beta):
        fs = constant_frame(generic_beta)
        m = np.stack([fs.tau, fs.nu, fs.beta])
        assert np.max(np.abs(m @ m.T - np.eye(3))) <= 1e-12
        assert np.linalg.det(m) > 0.99
