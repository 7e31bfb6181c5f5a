"""Seeded sampling, batch evolution, distribution comparison, and the
constraint-time analysis."""

import csv
import math

import numpy as np
import pytest
from scipy import stats

from bohmpair.ensemble import (build_ensemble, compare_distribution, evolve_ensemble,
                               global_constraint_analysis, ks_critical_value,
                               ks_statistic, ks_two_sample, quadrature_cdf,
                               sample_configurations, separation_marginal,
                               write_ensemble_csv, write_metadata)
from bohmpair.errors import (ConfigurationError, DegenerateParametersError,
                             InsufficientSampleError)
from bohmpair.numerics import IntegratorConfig
from bohmpair.planewave import PlaneWavePair
from bohmpair.spherical import SlitPair


@pytest.fixture(scope="module")
def mild():
    return PlaneWavePair(a=1.0, b=0.2)


class TestKsHelpers:
    def test_one_sample_matches_scipy(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=500)
        ours = ks_statistic(x, lambda q: np.clip(q, 0, 1))
        ref = stats.kstest(x, "uniform").statistic
        assert ours == pytest.approx(ref, abs=1e-12)

    def test_two_sample_matches_scipy(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=400)
        y = rng.normal(0.3, size=300)
        assert ks_two_sample(x, y) == pytest.approx(
            stats.ks_2samp(x, y, method="asymp").statistic, abs=1e-12)

    def test_critical_value(self):
        assert ks_critical_value(100_000) == pytest.approx(1.63 / math.sqrt(100_000))

    def test_quadrature_cdf_uniform(self):
        cdf = quadrature_cdf(lambda x: np.ones_like(x), 0.0, 2.0)
        qs = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
        assert np.allclose(cdf(qs), [0.0, 0.25, 0.5, 1.0, 1.0])


class TestSampling:
    def test_deterministic(self, mild):
        a, rate_a = sample_configurations(mild, 5000, seed=123)
        b, rate_b = sample_configurations(mild, 5000, seed=123)
        assert np.array_equal(a, b) and rate_a == rate_b

    def test_seed_changes_sample(self, mild):
        a, _ = sample_configurations(mild, 1000, seed=1)
        b, _ = sample_configurations(mild, 1000, seed=2)
        assert not np.array_equal(a, b)

    def test_inside_box(self, mild):
        pts, rate = sample_configurations(mild, 2000, seed=7)
        assert pts.shape == (2000, 2)
        assert np.all(pts >= 0.0) and np.all(pts <= mild.box_length)
        assert 0.0 < rate <= 1.0

    def test_flat_density_separation_marginal(self):
        # With b = 0 the configuration density is flat: each coordinate is
        # uniform on the box and the separation follows the pure box-overlap
        # (triangular) law.
        m = PlaneWavePair(a=1.0, b=0.0)
        pts, _ = sample_configurations(m, 20_000, seed=11)
        deltas = pts[:, 0] - pts[:, 1]
        cdf = quadrature_cdf(separation_marginal(m), -m.box_length, m.box_length)
        assert ks_statistic(deltas, cdf) < ks_critical_value(len(deltas))
        uniform = lambda q: np.clip(q / m.box_length, 0.0, 1.0)
        assert ks_statistic(pts[:, 0], uniform) < ks_critical_value(len(pts))
        assert ks_statistic(pts[:, 1], uniform) < ks_critical_value(len(pts))

    def test_structured_density_separation_marginal(self, mild):
        pts, _ = sample_configurations(mild, 20_000, seed=13)
        deltas = pts[:, 0] - pts[:, 1]
        cdf = quadrature_cdf(separation_marginal(mild), -mild.box_length, mild.box_length)
        assert ks_statistic(deltas, cdf) < ks_critical_value(len(deltas))

    def test_interference_nodes_avoided(self):
        # For a = b the density vanishes quadratically at cos(theta) = 0, so
        # the sampled mass near the nodes is far below the uniform share.
        m = PlaneWavePair(a=1.0, b=1.0)
        pts, _ = sample_configurations(m, 20_000, seed=17)
        thetas = m.momentum * (pts[:, 0] - pts[:, 1]) / m.hbar
        near_node = np.abs(np.cos(thetas)) < 0.05
        assert np.mean(near_node) < 0.005  # uniform share would be ~0.032

    def test_pathological_envelope_rejected(self, mild):
        with pytest.raises(ConfigurationError):
            sample_configurations(mild, 100, seed=3,
                                  density_bound=mild.density_bound() * 1e6)

    def test_spherical_sampling(self):
        m = SlitPair(wavenumber=5.0, slit_offset=0.5)
        pts, rate = sample_configurations(m, 500, seed=29)
        assert pts.shape == (500, 6)
        r1a, r1b, r2a, r2b = m.distances_of(pts[:, :3], pts[:, 3:])
        assert min(r1a.min(), r1b.min(), r2a.min(), r2b.min()) > m.slit_exclusion
        again, _ = sample_configurations(m, 500, seed=29)
        assert np.array_equal(pts, again)
        # Exchange symmetry: both particles' x coordinates follow one law.
        assert ks_two_sample(pts[:, 0], pts[:, 3]) < 0.1


class TestEvolution:
    def test_user_supplied_initial_states(self, mild):
        states = np.array([[0.4, -0.1], [1.0, 0.5]])
        ens = build_ensemble(mild, 2, seed=0, initial_states=states)
        assert ens.sampling == "user"
        assert ens.acceptance_rate is None
        assert np.array_equal(ens.initial_states(), states)

    def test_static_ensemble_unchanged(self):
        m = PlaneWavePair(a=1.0, b=1.0)
        ens = build_ensemble(m, 200, seed=5)
        evolved = evolve_ensemble(ens, 4.0)
        for before, after in zip(ens.members, evolved.members):
            assert np.array_equal(after.states[-1], before.states[0])
        assert evolved.survival_fraction == 1.0

    def test_single_wave_linear_motion(self):
        m = PlaneWavePair(a=1.0, b=0.0)
        ens = build_ensemble(m, 100, seed=19)
        evolved = evolve_ensemble(ens, 2.5)
        start = ens.initial_states()
        end = evolved.states_at(2.5)
        assert np.max(np.abs(end[:, 0] - (start[:, 0] + m.speed * 2.5))) < 1e-9
        assert np.max(np.abs(end[:, 1] - (start[:, 1] - m.speed * 2.5))) < 1e-9

    def test_conservation_audit(self, mild):
        ens = build_ensemble(mild, 500, seed=23)
        evolved = evolve_ensemble(ens, 3.0, sample_times=[0.0, 1.5, 3.0])
        assert evolved.survival_fraction == 1.0
        for m in evolved.members:
            assert mild.residual_drift(m) < 1e-6
            assert mild.cm_drift(m) < 1e-8

    def test_members_carry_velocities(self, mild):
        ens = build_ensemble(mild, 10, seed=31)
        evolved = evolve_ensemble(ens, 1.0)
        member = evolved.members[0]
        v1 = mild.velocity_of_separation(member.states[-1, 0] - member.states[-1, 1])
        assert member.velocities[-1, 0] == pytest.approx(v1, rel=1e-12)


class TestCompareDistribution:
    def test_flat_density_any_time(self):
        m = PlaneWavePair(a=1.0, b=0.0)
        ens = build_ensemble(m, 5000, seed=37)
        evolved = evolve_ensemble(ens, 2.0)
        report = compare_distribution(evolved, 2.0)
        assert report.below_critical
        assert report.method == "pullback-quadrature"

    def test_static_density_any_time(self):
        m = PlaneWavePair(a=1.0, b=1.0)
        ens = build_ensemble(m, 5000, seed=41)
        evolved = evolve_ensemble(ens, 1.0)
        report = compare_distribution(evolved, 1.0)
        assert report.below_critical

    def test_structured_flow(self, mild):
        ens = build_ensemble(mild, 5000, seed=43)
        evolved = evolve_ensemble(ens, 3.0)
        report = compare_distribution(evolved, 3.0)
        assert 0.0 <= report.ks_statistic <= 1.0
        assert report.sample_size == 5000
        assert report.survival_fraction == 1.0
        assert report.t == 3.0
        assert len(report.histogram) == len(report.reference_density)

    def test_insufficient_sample(self, mild):
        ens = build_ensemble(mild, 50, seed=47)
        with pytest.raises(InsufficientSampleError):
            compare_distribution(ens, 0.0)

    def test_spherical_two_sample(self):
        m = SlitPair(wavenumber=5.0, slit_offset=0.5)
        ens = build_ensemble(m, 300, seed=53)
        report = compare_distribution(ens, 0.0, min_survivors=100)
        assert report.method == "two-sample"
        assert 0.0 <= report.ks_statistic < 0.2


class TestGlobalConstraint:
    def test_zero_time_depends_on_separation_only(self, mild):
        # Dyadic coordinates: shifting both particles preserves the
        # separation bitwise, so the zero time is identical.
        from bohmpair.planewave import PairState1D
        t1 = mild.zero_separation_time(PairState1D(0.75, -0.5, 0.0))
        t2 = mild.zero_separation_time(PairState1D(0.75 + 8.0, -0.5 + 8.0, 0.0))
        assert t1 == t2

    def test_single_wave_zero_time_exact(self):
        m = PlaneWavePair(a=1.0, b=0.0)
        ens = build_ensemble(m, 500, seed=59)
        report = global_constraint_analysis(ens)
        init = ens.initial_states()
        expected = -(init[:, 0] - init[:, 1]) / (2.0 * m.speed)
        assert np.max(np.abs(report.zero_times - expected)) < 1e-12

    def test_point_mass_distance_for_symmetric_marginal(self, mild):
        ens = build_ensemble(mild, 300, seed=61)
        report = global_constraint_analysis(ens)
        # The separation marginal is symmetric, so its CDF at zero is 1/2.
        assert report.point_mass_ks == pytest.approx(0.5, abs=1e-9)
        assert report.zero_time_std > 0.1

    def test_requires_unequal_amplitudes(self):
        m = PlaneWavePair(a=1.0, b=1.0)
        ens = build_ensemble(m, 200, seed=67)
        with pytest.raises(DegenerateParametersError):
            global_constraint_analysis(ens)


class TestSerialization:
    def test_csv_round_trip_and_determinism(self, mild, tmp_path):
        ens = build_ensemble(mild, 50, seed=71)
        evolved = evolve_ensemble(ens, 1.0, sample_times=[0.0, 0.5, 1.0])
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_ensemble_csv(p1, evolved)
        write_ensemble_csv(p2, evolved)
        assert p1.read_bytes() == p2.read_bytes()

        with open(p1) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 50 * 3
        first = evolved.members[0]
        got = [float(r["x1"]) for r in rows if r["member_id"] == "0"]
        assert got == [float(v) for v in first.states[:, 0]]  # exact round trip
        assert all(r["y1"] == "" for r in rows[:5])
        assert all(r["truncated"] == "0" for r in rows)

    def test_spherical_csv_columns(self, tmp_path):
        m = SlitPair(wavenumber=5.0, slit_offset=0.5)
        ens = build_ensemble(m, 5, seed=73)
        path = tmp_path / "s.csv"
        write_ensemble_csv(path, ens)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["y1"] != "" and rows[0]["v2z"] != ""

    def test_metadata(self, mild, tmp_path):
        import json
        ens = build_ensemble(mild, 20, seed=79)
        path = tmp_path / "meta.json"
        write_metadata(path, ens, extra={"note": 1})
        meta = json.loads(path.read_text())
        assert meta["model"] == "planewave"
        assert meta["prng"] == "numpy-philox-4x64"
        assert meta["seed"] == 79
        assert meta["params"]["a"] == 1.0
        assert "created_utc" in meta and meta["note"] == 1
