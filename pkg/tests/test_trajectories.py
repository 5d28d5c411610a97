import numpy as np
import pytest

from eskin.trajectories import (
    FOOTPRINT_SIGMA,
    FRAMES_PER_SAMPLE,
    StrokePoint,
    accumulate_pressure_map,
    gen_digit_trajectory,
    render_pressure,
)


class TestTrajectories:
    def test_invalid_digit_rejected(self):
        for digit in (0, 10, -3):
            with pytest.raises(ValueError):
                gen_digit_trajectory(digit)

    def test_deterministic(self):
        a = gen_digit_trajectory(5, style_seed=2, rng_seed=7)
        b = gen_digit_trajectory(5, style_seed=2, rng_seed=7)
        assert a == b

    def test_distinct_samples_differ(self):
        a = gen_digit_trajectory(5, style_seed=2, rng_seed=7)
        b = gen_digit_trajectory(5, style_seed=2, rng_seed=8)
        assert a != b

    def test_digit_one_is_near_vertical(self):
        for style in range(13):
            pts = gen_digit_trajectory(1, style_seed=style)
            xs = np.array([p.x for p in pts])
            ys = np.array([p.y for p in pts])
            assert np.ptp(xs) < 0.2
            assert np.ptp(ys) > 0.6

    def test_digit_five_region_order(self):
        # top bar, then left vertical, then the bottom bowl
        pts = gen_digit_trajectory(5, style_seed=0)
        times = np.array([p.time for p in pts])
        ys = np.array([p.y for p in pts])
        xs = np.array([p.x for p in pts])
        top = times[ys < 0.25]
        left = times[(xs < 0.45) & (0.3 < ys) & (ys < 0.55)]
        bowl = times[ys > 0.55]
        assert top.size and left.size and bowl.size
        assert top.mean() < left.mean() < bowl.mean()

    def test_timing_and_pressure_in_range(self):
        for digit in range(1, 10):
            pts = gen_digit_trajectory(digit, style_seed=digit, rng_seed=3)
            for p in pts:
                assert 0.0 <= p.time < 2.0
                assert 0.0 < p.pressure <= 500.0

    def test_frame_clock_alignment(self):
        pts = gen_digit_trajectory(4, rng_seed=1)
        for p in pts:
            assert p.time * 120 == pytest.approx(round(p.time * 120))


class TestRenderPressure:
    def test_empty_trajectory_all_zero(self):
        assert not render_pressure([]).any()

    def test_output_shape(self):
        frames = render_pressure(gen_digit_trajectory(3))
        assert frames.shape == (FRAMES_PER_SAMPLE, 16, 16)

    def test_gaussian_footprint_values(self):
        center = StrokePoint(time=0.5, x=8 / 15, y=8 / 15, pressure=300.0)
        frames = render_pressure([center])
        f = frames[60]
        assert f[8, 8] == pytest.approx(300.0)
        expected = 300.0 * np.exp(-1.0 / (2 * FOOTPRINT_SIGMA ** 2))
        for r, c in ((7, 8), (9, 8), (8, 7), (8, 9)):
            assert f[r, c] == pytest.approx(expected)

    def test_no_contact_frames_stay_zero(self):
        pts = gen_digit_trajectory(1, rng_seed=0)
        frames = render_pressure(pts)
        touched = {int(round(p.time * 120)) for p in pts}
        untouched = set(range(FRAMES_PER_SAMPLE)) - touched
        assert untouched
        assert not frames[sorted(untouched)].any()

    def test_energy_is_continuous(self):
        # smooth envelope: adjacent contact frames carry similar total energy
        frames = render_pressure(gen_digit_trajectory(8, rng_seed=5))
        energy = frames.sum(axis=(1, 2))
        active = np.flatnonzero(energy)
        runs = np.split(active, np.where(np.diff(active) > 1)[0] + 1)
        peak = energy.max()
        for run in runs:
            jumps = np.abs(np.diff(energy[run]))
            assert np.all(jumps < 0.5 * peak)


class TestAccumulateMap:
    def test_all_zero(self):
        assert not accumulate_pressure_map(np.zeros((10, 16, 16))).any()

    def test_peak_at_touch(self):
        pt = StrokePoint(time=0.1, x=3 / 15, y=11 / 15, pressure=200.0)
        acc = accumulate_pressure_map(render_pressure([pt]))
        assert np.unravel_index(acc.argmax(), acc.shape) == (11, 3)
        assert acc.max() == 1.0

    def test_linear_before_normalization(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(0, 100, (20, 16, 16))
        b = rng.uniform(0, 100, (20, 16, 16))
        raw = lambda x: np.asarray(x).sum(axis=0)
        assert np.allclose(raw(a) + raw(b), raw(a + b))

    def test_digit_one_occupies_fewer_taxels_than_eight(self):
        ratios = []
        for style in range(6):
            occ = []
            for digit in (1, 8):
                frames = render_pressure(gen_digit_trajectory(digit, style))
                acc = accumulate_pressure_map(frames)
                occ.append(np.count_nonzero(acc > 0.02))
            ratios.append(occ[1] / occ[0])
        assert np.mean(ratios) >= 2.0
