"""Synthetic outlier injection for self-supervised training.

A random interval of a window is replaced (in a random subset of columns)
with one of four synthetic outliers; the returned label vector marks the
replaced interval and serves as the training target.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

KINDS = ("soft", "uniform", "peak", "length")


@dataclass
class DegradationConfig:
    p_soft: float = 0.5
    p_uniform: float = 0.15
    p_peak: float = 0.15
    p_length: float = 0.1
    max_len_frac: float = 0.2
    min_len: int = 2
    column_rate: float = 0.3
    soft_weight_range: tuple = (0.5, 1.0)
    peak_scale_range: tuple = (0.5, 2.0)
    length_mode_prob: float = 0.5  # probability of stretch (vs shorten)

    def __post_init__(self):
        probs = (self.p_soft, self.p_uniform, self.p_peak, self.p_length)
        if any(p < 0 for p in probs) or sum(probs) > 1.0 + 1e-12:
            raise ValueError("outlier probabilities must be >= 0 and sum to <= 1")
        if not 0 < self.column_rate <= 1:
            raise ValueError("column_rate must be in (0, 1]")
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")

    @property
    def p_none(self):
        return 1.0 - (self.p_soft + self.p_uniform + self.p_peak + self.p_length)

    def only(self, kind, total=None):
        """Copy with a single outlier kind carrying the whole probability mass."""
        if total is None:
            total = self.p_soft + self.p_uniform + self.p_peak + self.p_length
        probs = {f"p_{k}": (total if k == kind else 0.0) for k in KINDS}
        return DegradationConfig(**probs, max_len_frac=self.max_len_frac,
                                 min_len=self.min_len, column_rate=self.column_rate,
                                 soft_weight_range=self.soft_weight_range,
                                 peak_scale_range=self.peak_scale_range,
                                 length_mode_prob=self.length_mode_prob)


@dataclass
class DegradedWindow:
    """Window values plus the artificial labels marking the degraded interval.

    `interval` is inclusive (t0, t1), or None when nothing was degraded.
    """

    values: np.ndarray
    labels: np.ndarray
    interval: tuple | None
    outlier_kind: str | None
    degraded_columns: frozenset = field(default_factory=frozenset)


def _labels_for(n, interval):
    labels = np.zeros(n, dtype=np.int8)
    if interval is not None:
        labels[interval[0]:interval[1] + 1] = 1
    return labels


def choose_interval(n, config, rng):
    """Sample an inclusive interval: uniform length then uniform start."""
    max_len = int(config.max_len_frac * n)
    if config.min_len > max_len:
        raise ValueError(
            f"min_len {config.min_len} exceeds max interval length {max_len}")
    length = int(rng.integers(config.min_len, max_len + 1))
    start = int(rng.integers(0, n - length + 1))
    return start, start + length - 1


def choose_columns(d, column_rate, rng):
    """Each column independently with probability column_rate; never empty.

    An empty draw is resampled once, then one uniformly-chosen column is forced.
    """
    if not 0 < column_rate <= 1:
        raise ValueError("column_rate must be in (0, 1]")
    for _ in range(2):
        mask = rng.random(d) < column_rate
        if mask.any():
            return frozenset(np.flatnonzero(mask).tolist())
    return frozenset([int(rng.integers(0, d))])


def soft_replacement(window, external, interval, columns, weight):
    """Blend the interval with an external segment: x' = (1-w)*x + w*ext."""
    t0, t1 = interval
    cols = sorted(columns)
    external = np.asarray(external, dtype=np.float64)
    if external.shape[0] != t1 - t0 + 1:
        raise ValueError(
            f"external segment length {external.shape[0]} != interval length {t1 - t0 + 1}")
    out = np.array(window, dtype=np.float64)
    out[t0:t1 + 1, cols] = (1.0 - weight) * out[t0:t1 + 1, cols] \
        + weight * external[:, cols]
    return DegradedWindow(out, _labels_for(len(out), interval), interval,
                          "soft", frozenset(cols))


def uniform_replacement(window, interval, columns):
    """Hold each degraded column flat at its value at the interval start."""
    t0, t1 = interval
    cols = sorted(columns)
    out = np.array(window, dtype=np.float64)
    out[t0:t1 + 1, cols] = out[t0, cols]
    return DegradedWindow(out, _labels_for(len(out), interval), interval,
                          "uniform", frozenset(cols))


def peak_noise(window, interval, columns, rng, scale_range=(0.5, 2.0)):
    """Add a single spike at a random timestamp inside the interval.

    Spike magnitude is the column's in-window value range (floored at 1e-8)
    times a random scale, with random sign. Only the spiked timestamp is
    labeled; the interval collapses to a point.
    """
    t0, t1 = interval
    cols = sorted(columns)
    t_star = int(rng.integers(t0, t1 + 1))
    out = np.array(window, dtype=np.float64)
    col_range = np.maximum(out[:, cols].max(axis=0) - out[:, cols].min(axis=0), 1e-8)
    scale = rng.uniform(scale_range[0], scale_range[1], size=len(cols))
    sign = rng.choice([-1.0, 1.0], size=len(cols))
    out[t_star, cols] += sign * scale * col_range
    return DegradedWindow(out, _labels_for(len(out), (t_star, t_star)),
                          (t_star, t_star), "peak", frozenset(cols))


def length_adjustment(window, interval, columns, rng, stretch_prob=0.5):
    """Replace the interval with a frequency-halved or -doubled resampling.

    Stretch repeats each of the interval's first ceil(L/2) points twice;
    shorten takes every second point of the 2L points ending at the interval
    end. Infeasible cases fall back to uniform replacement.
    """
    t0, t1 = interval
    length = t1 - t0 + 1
    if length < 2:
        logger.info("length_adjustment interval too short, using uniform replacement")
        return uniform_replacement(window, interval, columns)
    stretch = rng.random() < stretch_prob
    if not stretch and t1 - 2 * length + 1 < 0:
        logger.info("length_adjustment lacks history to shorten, "
                    "using uniform replacement")
        return uniform_replacement(window, interval, columns)
    cols = sorted(columns)
    out = np.array(window, dtype=np.float64)
    if stretch:
        src = out[t0:t0 + (length + 1) // 2, cols]
        resampled = np.repeat(src, 2, axis=0)[:length]
    else:
        src = out[t1 - 2 * length + 1:t1 + 1, cols]
        resampled = src[::2]
    out[t0:t1 + 1, cols] = resampled
    return DegradedWindow(out, _labels_for(len(out), interval), interval,
                          "length", frozenset(cols))


def degrade(window, training_data, config, rng):
    """Apply one randomly chosen synthetic outlier to a training window.

    `training_data` (T x D) supplies external segments for soft replacement.
    The reported outlier_kind is the drawn kind even if length adjustment
    fell back to a uniform fill internally.
    """
    window = np.asarray(window, dtype=np.float64)
    n, d = window.shape
    u = rng.random()
    kind = None
    edge = 0.0
    for name, p in (("soft", config.p_soft), ("uniform", config.p_uniform),
                    ("peak", config.p_peak), ("length", config.p_length)):
        edge += p
        if u < edge:
            kind = name
            break
    if kind is None:
        return DegradedWindow(window.copy(), np.zeros(n, dtype=np.int8), None, None)

    interval = choose_interval(n, config, rng)
    columns = choose_columns(d, config.column_rate, rng)
    if kind == "soft":
        length = interval[1] - interval[0] + 1
        training_data = np.asarray(training_data, dtype=np.float64)
        start = int(rng.integers(0, len(training_data) - length + 1))
        external = training_data[start:start + length]
        weight = rng.uniform(*config.soft_weight_range)
        return soft_replacement(window, external, interval, columns, weight)
    if kind == "uniform":
        return uniform_replacement(window, interval, columns)
    if kind == "peak":
        return peak_noise(window, interval, columns, rng, config.peak_scale_range)
    result = length_adjustment(window, interval, columns, rng,
                               config.length_mode_prob)
    result.outlier_kind = "length"
    return result
