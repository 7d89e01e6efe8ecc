import numpy as np
import pytest
from scipy.stats import chisquare

from tsdetect.degradation import (DegradationConfig, choose_columns,
                                  choose_interval, degrade, length_adjustment,
                                  peak_noise, soft_replacement,
                                  uniform_replacement)


def make_rng(seed=0):
    return np.random.default_rng(seed)


def check_invariants(dw, window, config, n):
    """Full DegradedWindow contract; pass config=None to skip the length cap
    (direct routine calls are not bound by choose_interval's cap)."""
    if dw.interval is None:
        assert dw.outlier_kind is None
        assert np.array_equal(dw.values, window)
        assert not dw.labels.any()
        return
    t0, t1 = dw.interval
    assert 0 <= t0 <= t1 < n
    if config is not None:
        assert t1 - t0 + 1 <= int(config.max_len_frac * n)
    # labels are exactly one contiguous run matching the interval
    expected = np.zeros(n, dtype=np.int8)
    expected[t0:t1 + 1] = 1
    assert np.array_equal(dw.labels, expected)
    # locality: untouched outside the interval, untouched columns everywhere
    outside = np.ones(n, dtype=bool)
    outside[t0:t1 + 1] = False
    assert np.array_equal(dw.values[outside], window[outside])
    untouched = [c for c in range(window.shape[1])
                 if c not in dw.degraded_columns]
    assert np.array_equal(dw.values[:, untouched], window[:, untouched])


class TestChooseInterval:
    def test_length_capped(self):
        config = DegradationConfig(max_len_frac=0.2)
        rng = make_rng()
        for _ in range(500):
            t0, t1 = choose_interval(100, config, rng)
            assert t1 - t0 + 1 <= 20
            assert 0 <= t0 <= t1 < 100

    def test_fixed_length_when_min_equals_max(self):
        config = DegradationConfig(max_len_frac=0.1, min_len=10)
        rng = make_rng()
        for _ in range(50):
            t0, t1 = choose_interval(100, config, rng)
            assert t1 - t0 + 1 == 10

    def test_start_distribution_uniform(self):
        config = DegradationConfig(max_len_frac=0.1, min_len=10)
        rng = make_rng(7)
        starts = [choose_interval(100, config, rng)[0] for _ in range(10000)]
        counts = np.bincount(starts, minlength=91)
        assert chisquare(counts).pvalue > 0.01

    def test_infeasible_config_rejected(self):
        with pytest.raises(ValueError):
            choose_interval(100, DegradationConfig(max_len_frac=0.05, min_len=10),
                            make_rng())


class TestChooseColumns:
    def test_rate_one_selects_all(self):
        assert choose_columns(5, 1.0, make_rng()) == frozenset(range(5))

    def test_binomial_mean(self):
        rng = make_rng(11)
        counts = [len(choose_columns(100, 0.3, rng)) for _ in range(10000)]
        assert abs(np.mean(counts) - 30) < 2

    def test_never_empty(self):
        rng = make_rng(5)
        for _ in range(2000):
            assert len(choose_columns(3, 0.01, rng)) >= 1


class TestSoftReplacement:
    def test_full_weight_copies_external(self, rng):
        window = rng.normal(size=(20, 3))
        external = rng.normal(size=(5, 3))
        dw = soft_replacement(window, external, (4, 8), {0, 2}, 1.0)
        assert np.allclose(dw.values[4:9][:, [0, 2]], external[:, [0, 2]])
        check_invariants(dw, window, None, 20)

    def test_zero_weight_keeps_values_but_labels(self, rng):
        window = rng.normal(size=(20, 2))
        dw = soft_replacement(window, rng.normal(size=(5, 2)), (4, 8), {1}, 0.0)
        assert np.array_equal(dw.values, window)
        assert dw.labels[4:9].all()

    def test_midpoint(self):
        window = np.zeros((10, 1))
        external = np.full((4, 1), 2.0)
        dw = soft_replacement(window, external, (2, 5), {0}, 0.5)
        assert np.allclose(dw.values[2:6, 0], 1.0)

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            soft_replacement(rng.normal(size=(10, 1)),
                             rng.normal(size=(3, 1)), (2, 5), {0}, 0.5)


class TestUniformReplacement:
    def test_constant_per_column(self, rng):
        window = rng.normal(size=(30, 4))
        dw = uniform_replacement(window, (10, 19), {1, 3})
        assert np.ptp(dw.values[10:20][:, [1, 3]], axis=0).max() == 0.0
        check_invariants(dw, window, None, 30)

    def test_already_constant_column(self):
        window = np.ones((10, 1))
        dw = uniform_replacement(window, (2, 6), {0})
        assert np.array_equal(dw.values, window)
        assert dw.labels[2:7].all()

    def test_ramp_hold_first(self):
        window = np.arange(5.0)[:, None]
        dw = uniform_replacement(window, (1, 3), {0})
        assert np.array_equal(dw.values[:, 0], [0.0, 1.0, 1.0, 1.0, 4.0])


class TestPeakNoise:
    def test_single_label(self, rng):
        window = rng.normal(size=(40, 2))
        dw = peak_noise(window, (10, 20), {0, 1}, make_rng(3))
        assert dw.labels.sum() == 1
        t = dw.interval[0]
        assert dw.interval == (t, t) and 10 <= t <= 20

    def test_only_spike_timestamp_changed(self, rng):
        window = rng.normal(size=(40, 2))
        dw = peak_noise(window, (10, 20), {0}, make_rng(3))
        t = dw.interval[0]
        mask = np.ones(40, dtype=bool)
        mask[t] = False
        assert np.array_equal(dw.values[mask], window[mask])

    def test_constant_column_floor(self):
        window = np.zeros((20, 1))
        dw = peak_noise(window, (5, 10), {0}, make_rng(0), scale_range=(1.0, 1.0))
        t = dw.interval[0]
        assert abs(dw.values[t, 0]) == pytest.approx(1e-8)
        assert dw.labels[t] == 1


class TestLengthAdjustment:
    def test_stretch_repeats_first_half(self):
        window = np.arange(10.0)[:, None]
        dw = length_adjustment(window, (4, 7), {0}, make_rng(0), stretch_prob=1.0)
        assert np.array_equal(dw.values[4:8, 0], [4.0, 4.0, 5.0, 5.0])

    def test_shorten_takes_every_second(self):
        window = np.arange(20.0)[:, None]
        # interval [12, 15]: source is the 8 points ending at 15, i.e. 8..15
        dw = length_adjustment(window, (12, 15), {0}, make_rng(0), stretch_prob=0.0)
        assert np.array_equal(dw.values[12:16, 0], [8.0, 10.0, 12.0, 14.0])

    def test_outside_unchanged(self, rng):
        window = rng.normal(size=(30, 2))
        dw = length_adjustment(window, (10, 15), {0}, make_rng(1))
        mask = np.ones(30, dtype=bool)
        mask[10:16] = False
        assert np.array_equal(dw.values[mask], window[mask])

    def test_shorten_without_history_falls_back_to_uniform(self):
        window = np.arange(20.0)[:, None]
        dw = length_adjustment(window, (0, 5), {0}, make_rng(0), stretch_prob=0.0)
        assert np.ptp(dw.values[0:6, 0]) == 0.0


class TestDegrade:
    def test_all_probabilities_zero(self, rng):
        window = rng.normal(size=(50, 2))
        config = DegradationConfig(p_soft=0.0, p_uniform=0.0, p_peak=0.0,
                                   p_length=0.0)
        dw = degrade(window, window, config, make_rng(0))
        assert np.array_equal(dw.values, window)
        assert not dw.labels.any() and dw.interval is None

    def test_kind_frequencies(self, rng):
        window = rng.normal(size=(100, 3))
        config = DegradationConfig()
        counter = {}
        r = make_rng(42)
        n = 10000
        for _ in range(n):
            dw = degrade(window, window, config, r)
            counter[dw.outlier_kind] = counter.get(dw.outlier_kind, 0) + 1
        expected = {"soft": 0.5, "uniform": 0.15, "peak": 0.15,
                    "length": 0.1, None: 0.1}
        for kind, p in expected.items():
            assert abs(counter.get(kind, 0) / n - p) < 0.02, (kind, counter)

    def test_invariant_sweep(self, rng):
        window = rng.normal(size=(100, 4))
        data = rng.normal(size=(500, 4))
        config = DegradationConfig()
        r = make_rng(9)
        for _ in range(2000):
            dw = degrade(window, data, config, r)
            check_invariants(dw, window, config, 100)

    def test_seed_determinism(self, rng):
        window = rng.normal(size=(80, 2))
        data = rng.normal(size=(300, 2))
        config = DegradationConfig()
        a = degrade(window, data, config, make_rng(123))
        b = degrade(window, data, config, make_rng(123))
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.labels, b.labels)
        assert a.interval == b.interval and a.outlier_kind == b.outlier_kind

    def test_invalid_probabilities_rejected(self):
        with pytest.raises(ValueError):
            DegradationConfig(p_soft=0.9, p_uniform=0.2)
        with pytest.raises(ValueError):
            DegradationConfig(p_soft=-0.1)

    def test_only_helper_redistributes_mass(self):
        config = DegradationConfig().only("peak", total=0.8)
        assert config.p_peak == 0.8
        assert config.p_soft == config.p_uniform == config.p_length == 0.0
        assert config.p_none == pytest.approx(0.2)
