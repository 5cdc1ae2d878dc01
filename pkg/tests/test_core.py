import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simlab.core import (
    InitialData,
    Label,
    ParticleState,
    Placement,
    FractionSeries,
    RngStream,
    SimParams,
    beta_from_params,
    init_particles,
    torus_distance,
    torus_wrap,
)

D = 500.0

finite_coord = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestTorusWrap:
    def test_reduces_into_box(self):
        assert np.allclose(torus_wrap(np.array([501.0, -1.0]), D), [1.0, 499.0])

    def test_identity_inside(self):
        assert np.allclose(torus_wrap(np.array([0.0, 0.0]), D), [0.0, 0.0])

    def test_exact_multiples(self):
        assert np.allclose(torus_wrap(np.array([1000.0, 500.0]), D), [0.0, 0.0])

    @pytest.mark.parametrize("bad", [np.inf, -np.inf, np.nan])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            torus_wrap(np.array([bad, 0.0]), D)

    @given(x=finite_coord, y=finite_coord)
    def test_lands_in_box_and_is_idempotent(self, x, y):
        w = torus_wrap(np.array([x, y]), D)
        assert np.all(w >= 0) and np.all(w < D)
        assert np.allclose(torus_wrap(w, D), w)


class TestTorusDistance:
    def test_wraparound_shortest_image(self):
        assert torus_distance(np.array([0.0, 0.0]), np.array([499.0, 0.0]), D) == pytest.approx(1.0)

    def test_maximal_distance(self):
        d = torus_distance(np.array([0.0, 0.0]), np.array([250.0, 250.0]), D)
        assert d == pytest.approx(250.0 * math.sqrt(2.0))

    def test_identity(self):
        p = np.array([10.0, 10.0])
        assert torus_distance(p, p, D) == 0.0

    @given(
        px=st.floats(0, D, exclude_max=True),
        py=st.floats(0, D, exclude_max=True),
        qx=st.floats(0, D, exclude_max=True),
        qy=st.floats(0, D, exclude_max=True),
    )
    def test_metric_properties(self, px, py, qx, qy):
        p = np.array([px, py])
        q = np.array([qx, qy])
        d = torus_distance(p, q, D)
        assert d == torus_distance(q, p, D)
        assert 0 <= d <= D / math.sqrt(2.0) + 1e-9
        if np.array_equal(p, q):
            assert d == 0.0

    def test_grid_of_pairs_bounded(self):
        pts = np.stack(np.meshgrid(np.linspace(0, D, 11, endpoint=False),
                                   np.linspace(0, D, 11, endpoint=False)), axis=-1).reshape(-1, 2)
        d = torus_distance(pts[:, None, :], pts[None, :, :], D)
        assert d.max() <= D / math.sqrt(2.0) + 1e-9
        assert np.allclose(d, d.T)


class TestBetaFromParams:
    def test_three_parameter_sets(self):
        assert beta_from_params(20.0, 15.0, D) == pytest.approx(0.018 * math.pi, rel=1e-14)
        assert beta_from_params(2.0, 15.0 / math.sqrt(10.0), D) == pytest.approx(0.00018 * math.pi, rel=1e-13)
        assert beta_from_params(200.0, 1.5, D) == pytest.approx(0.0018 * math.pi, rel=1e-14)

    def test_beta_over_gamma_identical_across_presets(self):
        ratios = [
            beta_from_params(20.0, 15.0, D) / (1.0 / 30.0),
            beta_from_params(2.0, 15.0 / math.sqrt(10.0), D) / (1.0 / 3000.0),
            beta_from_params(200.0, 1.5, D) / (1.0 / 300.0),
        ]
        for r in ratios:
            assert abs(r - 0.54 * math.pi) <= 1e-14 * 0.54 * math.pi
            assert r == pytest.approx(1.696460, abs=1e-6)


class TestSimParams:
    def test_accepts_figure_one_values(self):
        p = SimParams(N=50000, D=D, lam=20.0, gamma=1 / 30, R0_radius=15.0, dt=0.05, seed=0)
        assert p.beta == pytest.approx(0.018 * math.pi)

    @pytest.mark.parametrize(
        "kw",
        [
            dict(N=0),
            dict(D=-1.0),
            dict(lam=-0.1),
            dict(gamma=-0.1),
            dict(mu=-0.1),
            dict(R0_radius=0.0),
            dict(R0_radius=250.0),
            dict(R0_radius=400.0),
            dict(dt=0.0),
        ],
    )
    def test_rejects_bad_values(self, kw):
        base = dict(N=100, D=D, lam=1.0, gamma=0.1, R0_radius=15.0, dt=0.1, seed=0)
        base.update(kw)
        with pytest.raises(ValueError):
            SimParams(**base)


class TestInitialData:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            InitialData(0.5, 0.4, 0.2, Placement.HOMOGENEOUS)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            InitialData(1.1, -0.1, 0.0, Placement.HOMOGENEOUS)

    def test_concentrated_requires_zero_recovered(self):
        with pytest.raises(ValueError):
            InitialData(0.8, 0.1, 0.1, Placement.CONCENTRATED_DISK)


class TestRngStream:
    def test_same_seed_same_draws(self):
        a = RngStream(42, ("motion",)).gen.uniform(size=5)
        b = RngStream(42, ("motion",)).gen.uniform(size=5)
        assert np.array_equal(a, b)

    def test_distinct_tags_distinct_draws(self):
        a = RngStream(42, ("motion",)).gen.uniform(size=5)
        b = RngStream(42, ("recovery",)).gen.uniform(size=5)
        assert not np.array_equal(a, b)

    def test_derive_is_deterministic(self):
        a = RngStream(7).derive("init").gen.uniform(size=3)
        b = RngStream(7, ("init",)).gen.uniform(size=3)
        assert np.array_equal(a, b)


def _params(n, seed=0, r0=15.0):
    return SimParams(N=n, D=D, lam=20.0, gamma=1 / 30, R0_radius=r0, dt=0.05, seed=seed)


class TestInitParticles:
    def test_zero_infected_all_susceptible(self):
        st_ = init_particles(_params(300), InitialData(1.0, 0.0, 0.0, Placement.HOMOGENEOUS), RngStream(1))
        assert np.all(st_.labels == Label.S)

    def test_concentrated_disk_radius_fifty(self):
        i0 = math.pi / 100
        st_ = init_particles(_params(5000), InitialData(1 - i0, i0, 0.0, Placement.CONCENTRATED_DISK), RngStream(1))
        center = np.array([D / 2, D / 2])
        dist = torus_distance(st_.positions, center, D)
        assert np.all(st_.labels[dist < 50.0] == Label.I)
        assert np.all(st_.labels[dist >= 50.0] == Label.S)
        assert np.any(st_.labels == Label.I)

    def test_homogeneous_count_for_figure_one_population(self):
        i0 = math.pi / 100
        st_ = init_particles(_params(50000), InitialData(1 - i0, i0, 0.0, Placement.HOMOGENEOUS), RngStream(1))
        counts = st_.counts()
        assert counts[Label.I] == 1571
        assert counts[Label.R] == 0
        assert counts.sum() == 50000

    def test_bit_reproducible(self):
        init = InitialData(0.9, 0.06, 0.04, Placement.HOMOGENEOUS)
        a = init_particles(_params(777, seed=5), init, RngStream(5, ("init",)))
        b = init_particles(_params(777, seed=5), init, RngStream(5, ("init",)))
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.angles, b.angles)
        assert np.array_equal(a.labels, b.labels)

    def test_ranges(self):
        init = InitialData(0.7, 0.2, 0.1, Placement.HOMOGENEOUS)
        st_ = init_particles(_params(2000), init, RngStream(3))
        assert np.all((st_.positions >= 0) & (st_.positions < D))
        assert np.all((st_.angles >= 0) & (st_.angles < 2 * math.pi))

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(1, 100_000),
        a=st.floats(0, 1),
        b=st.floats(0, 1),
        seed=st.integers(0, 2**31),
    )
    def test_label_counts_follow_rounding_rule(self, n, a, b, seed):
        i0 = a
        r0 = (1.0 - a) * b
        s0 = 1.0 - i0 - r0
        if s0 < 0:
            s0 = 0.0
            r0 = 1.0 - i0
        init = InitialData(s0, i0, r0, Placement.HOMOGENEOUS)
        want_i = math.floor(n * i0 + 0.5)
        want_r = math.floor(n * r0 + 0.5)
        if want_i + want_r > n:
            with pytest.raises(ValueError):
                init_particles(_params(n, seed=seed), init, RngStream(seed))
            return
        st_ = init_particles(_params(n, seed=seed), init, RngStream(seed))
        counts = st_.counts()
        assert counts[Label.I] == want_i
        assert counts[Label.R] == want_r
        assert counts.sum() == n


class TestParticleState:
    def test_counts_and_fractions(self):
        st_ = ParticleState(
            0.0,
            np.zeros((4, 2)),
            np.zeros(4),
            np.array([Label.S, Label.I, Label.I, Label.R], dtype=np.int8),
        )
        assert np.array_equal(st_.counts(), [1, 2, 1])
        assert np.allclose(st_.fractions(), [0.25, 0.5, 0.25])

    def test_copy_is_independent(self):
        st_ = ParticleState(0.0, np.zeros((2, 2)), np.zeros(2), np.zeros(2, dtype=np.int8))
        cp = st_.copy()
        cp.labels[0] = Label.I
        assert st_.labels[0] == Label.S


class TestFractionSeries:
    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            FractionSeries(np.array([0.0, 1.0]), np.array([1.0]), np.array([0.0]), np.array([0.0]))

    def test_rejects_nonincreasing_times(self):
        z = np.zeros(2)
        with pytest.raises(ValueError):
            FractionSeries(np.array([1.0, 1.0]), z, z, z)

    def test_stacked_shape(self):
        t = np.array([0.0, 1.0, 2.0])
        s = FractionSeries(t, np.ones(3), np.zeros(3), np.zeros(3))
        assert s.stacked().shape == (3, 3)
