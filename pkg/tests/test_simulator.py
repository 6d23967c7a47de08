import math

import numpy as np
import pytest
from scipy.stats import kstest

from evolvekit.density import ac_mass
from evolvekit.geometry import EvolutionParams, support_margins, vertices_at_time
from evolvekit.simulator import (
    PathDataset,
    SimulationConfig,
    histogram_fit,
    simplex_cells,
    simulate_batch,
    simulate_path,
)


def params(n, lam=1.0, v=1.0):
    return EvolutionParams(n=n, lam=lam, v=v)


class TestSimulatePath:
    def test_unswitched_paths_land_on_vertices(self):
        p = params(2, v=1.5)
        t = 1.0
        config = SimulationConfig(seed=1, samples=1, horizon=t)
        rng = np.random.default_rng(0)
        verts = vertices_at_time(p, t)
        seen = 0
        for _ in range(400):
            s = simulate_path(p, config, rng)
            if s.switches == 0:
                seen += 1
                target = verts[s.initial_direction]
                assert np.max(np.abs(s.position - target)) <= 1e-12 * p.v * t
                assert s.current_direction == s.initial_direction
        assert seen > 0

    def test_single_switch_kinematics_on_line(self):
        # one switch at time s from direction 0 puts the endpoint at v(2s - t)
        p = params(1)
        t = 1.0
        config = SimulationConfig(seed=0, samples=1, horizon=t, initial_direction=0)
        rng = np.random.default_rng(42)
        positions = []
        for _ in range(40_000):
            s = simulate_path(p, config, rng)
            if s.switches == 1:
                positions.append(s.position[0])
        positions = np.asarray(positions)
        # a uniform event time makes the endpoint uniform on (-vt, vt)
        res = kstest(positions, lambda x: (x + t) / (2 * t))
        assert res.pvalue > 1e-3

    def test_start_point_translates(self):
        p = params(2)
        start = np.array([5.0, -3.0])
        config = SimulationConfig(seed=0, samples=1, horizon=1.0, start_point=start)
        rng = np.random.default_rng(1)
        s = simulate_path(p, config, rng)
        margins = support_margins(p, (s.position - start)[None, :], 1.0)
        assert margins.min() >= -1e-9 * p.v

    def test_rejects_bad_direction(self):
        with pytest.raises(ValueError):
            simulate_path(
                params(2),
                SimulationConfig(seed=0, samples=1, horizon=1.0, initial_direction=3),
                np.random.default_rng(0),
            )


class TestSimulateBatch:
    def test_same_seed_identical(self):
        p = params(2)
        config = SimulationConfig(seed=7, samples=70_000, horizon=1.0)
        a = simulate_batch(p, config)
        b = simulate_batch(p, config)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.switches, b.switches)
        assert np.array_equal(a.initial_direction, b.initial_direction)

    def test_worker_count_invariance(self):
        p = params(2)
        config = SimulationConfig(seed=3, samples=150_000, horizon=1.0)
        serial = simulate_batch(p, config, workers=1)
        parallel = simulate_batch(p, config, workers=2)
        assert np.array_equal(serial.positions, parallel.positions)
        assert np.array_equal(serial.switches, parallel.switches)
        assert np.array_equal(serial.current_direction, parallel.current_direction)

    def test_switch_counts_poisson_mean(self):
        p = params(2, lam=1.3)
        t = 1.7
        config = SimulationConfig(seed=11, samples=1_000_000, horizon=t)
        data = simulate_batch(p, config)
        mean = data.switches.mean()
        sigma = math.sqrt(p.lam * t / len(data))
        assert abs(mean - p.lam * t) <= 3.0 * sigma

    def test_endpoints_in_closure(self):
        for n in (1, 2, 3):
            p = params(n)
            t = 1.2
            config = SimulationConfig(seed=n, samples=50_000, horizon=t)
            data = simulate_batch(p, config)
            margins = support_margins(p, data.positions, t)
            assert margins.min() >= -1e-9 * p.v * t

    def test_cyclic_bookkeeping(self):
        p = params(3)
        config = SimulationConfig(seed=5, samples=50_000, horizon=2.0)
        data = simulate_batch(p, config)
        expected = (data.initial_direction + data.switches) % (p.n + 1)
        assert np.array_equal(data.current_direction, expected)

    def test_uniform_policy_counts(self):
        p = params(2)
        config = SimulationConfig(seed=9, samples=300_000, horizon=0.5)
        data = simulate_batch(p, config)
        counts = np.bincount(data.initial_direction, minlength=3)
        assert np.all(np.abs(counts / len(data) - 1 / 3) < 0.01)

    def test_fixed_policy(self):
        p = params(2)
        config = SimulationConfig(seed=9, samples=1000, horizon=0.5, initial_direction=1)
        data = simulate_batch(p, config)
        assert np.all(data.initial_direction == 1)

    def test_boundary_mass_split(self):
        p = params(3, lam=1.0)
        t = 1.0
        config = SimulationConfig(seed=21, samples=400_000, horizon=t)
        data = simulate_batch(p, config)
        for k in range(p.n):
            target = math.exp(-t) * t**k / math.factorial(k)
            frac = float(np.mean(data.switches == k))
            sigma = math.sqrt(target * (1 - target) / len(data))
            assert abs(frac - target) <= 3.0 * sigma

    def test_sample_accessor(self):
        p = params(2)
        config = SimulationConfig(seed=2, samples=10, horizon=1.0)
        data = simulate_batch(p, config)
        s = data.sample(3)
        assert np.array_equal(s.position, data.positions[3])
        assert s.switches == data.switches[3]
        assert len(data) == 10


class TestSimplexCells:
    def test_line_cells(self):
        p = params(1)
        cells = simplex_cells(p, 1.0, 10)
        assert cells.count == 10
        idx = cells.assign(np.array([[-0.999], [0.0], [0.999]]))
        assert list(idx) == [0, 5, 9]

    def test_plane_cells_partition(self):
        p = params(2)
        t = 1.0
        m = 5
        cells = simplex_cells(p, t, m)
        assert cells.count == m * m  # up and down triangles
        rng = np.random.default_rng(0)
        w = rng.dirichlet(np.ones(3), size=20_000)
        pts = w @ vertices_at_time(p, t)
        idx = cells.assign(pts)
        assert idx.min() >= 0 and idx.max() < cells.count
        assert len(np.unique(idx)) == cells.count

    def test_three_dim_cell_count(self):
        p = params(3)
        cells = simplex_cells(p, 1.0, 4)
        # compositions of 3, 2, 1 into four nonnegative parts
        assert cells.count == 20 + 10 + 4


class TestHistogramFit:
    def test_line_fit_passes(self):
        p = params(1)
        t = 1.0
        config = SimulationConfig(seed=31, samples=200_000, horizon=t)
        data = simulate_batch(p, config)
        fit = histogram_fit(p, data, bins=20)
        assert fit.n_cells == 20
        assert fit.dof == 19
        assert fit.p_value > 0.001
        assert 0.5 < fit.reduced < 1.6
        assert fit.expected.sum() == pytest.approx(fit.n_conditioned, rel=1e-9)
        assert fit.observed.sum() == fit.n_conditioned

    def test_plane_fit_passes(self):
        p = params(2)
        t = 2.0
        config = SimulationConfig(seed=37, samples=200_000, horizon=t)
        data = simulate_batch(p, config)
        fit = histogram_fit(p, data, bins=8, quad_points=2_000_000)
        assert fit.p_value > 0.001

    def test_empty_conditional_is_error(self):
        p = params(2)
        config = SimulationConfig(seed=0, samples=100, horizon=1e-7)
        data = simulate_batch(p, config)
        with pytest.raises(ValueError, match="switches"):
            histogram_fit(p, data, bins=4)

    def test_small_expected_counts_rejected(self):
        p = params(1)
        config = SimulationConfig(seed=0, samples=200, horizon=1.0)
        data = simulate_batch(p, config)
        with pytest.raises(ValueError, match="coarsen"):
            histogram_fit(p, data, bins=50)

    def test_translated_start_rejected(self):
        p = params(1)
        config = SimulationConfig(
            seed=0, samples=100, horizon=1.0, start_point=np.array([1.0])
        )
        data = simulate_batch(p, config)
        with pytest.raises(ValueError, match="origin"):
            histogram_fit(p, data, bins=5)


class TestConfigValidation:
    def test_bad_samples(self):
        with pytest.raises(ValueError):
            SimulationConfig(seed=0, samples=0, horizon=1.0)

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            SimulationConfig(seed=0, samples=1, horizon=-1.0)

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            SimulationConfig(seed=0, samples=1, horizon=1.0, initial_direction=-2)
