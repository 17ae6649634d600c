"""Speed/adjacency CSV ingestion, max scaling, sliding windows, noise injection and the HA baseline."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .tensor import DataError


@dataclass
class RawDataset:
    speeds: np.ndarray  # T_total x N, rows are timestamps
    adjacency: np.ndarray  # N x N
    interval_minutes: int = 15

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=np.float64)
        self.adjacency = np.asarray(self.adjacency, dtype=np.float64)
        if self.speeds.ndim != 2:
            raise DataError(f"speed matrix must be 2-D, got shape {self.speeds.shape}")
        n = self.speeds.shape[1]
        if self.adjacency.shape != (n, n):
            raise DataError(
                f"adjacency shape {self.adjacency.shape} does not match {n} speed columns"
            )

    @property
    def n_nodes(self):
        return self.speeds.shape[1]

    @property
    def n_steps(self):
        return self.speeds.shape[0]


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_numeric_csv(path, header=None):
    """Read a comma-separated numeric matrix; ``header=None`` auto-detects one header row."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(tok.strip() for tok in row)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    if header is None:
        header = not _is_number(rows[0][0].strip())
    start = 1 if header else 0
    width = None
    values = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        parsed = []
        for j, tok in enumerate(row, start=1):
            try:
                parsed.append(float(tok))
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j}: cannot parse {tok!r}") from None
        values.append(parsed)
    if not values:
        raise DataError(f"{path}: no data rows")
    out = np.array(values, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(out))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"{path}: row {r + start + 1}, column {c + 1}: non-finite value")
    return out


def load_dataset(speed_path, adjacency_path, interval_minutes=15, header=None):
    speeds = read_numeric_csv(speed_path, header)
    adjacency = read_numeric_csv(adjacency_path, header)
    if np.any(speeds < 0):
        r, c = np.argwhere(speeds < 0)[0]
        raise DataError(f"{speed_path}: negative speed at data row {r + 1}, column {c + 1}")
    if adjacency.shape[0] != adjacency.shape[1]:
        raise DataError(f"{adjacency_path}: adjacency is {adjacency.shape[0]}x{adjacency.shape[1]}, not square")
    if adjacency.shape[0] != speeds.shape[1]:
        raise DataError(
            f"{adjacency_path}: adjacency has {adjacency.shape[0]} nodes but {speed_path} has {speeds.shape[1]} columns"
        )
    return RawDataset(speeds, adjacency, int(interval_minutes))


@dataclass(frozen=True)
class MaxScaler:
    max_value: float

    def scale(self, values):
        return np.asarray(values) / self.max_value

    def descale(self, values):
        return np.asarray(values) * self.max_value


@dataclass
class WindowSet:
    """Scaled sliding windows.

    Inputs are stacked as ``(S, N, 1, t_in)`` so ``train_inputs[i]`` is one
    ``N×1×T`` tensor; targets are ``(S, N, t_out)``.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    test_inputs: np.ndarray
    test_targets: np.ndarray
    scaler: MaxScaler
    t_in: int
    t_out: int
    train_target_rows: np.ndarray = None
    test_target_rows: np.ndarray = None

    @property
    def n_train(self):
        return self.train_inputs.shape[0]

    @property
    def n_test(self):
        return self.test_inputs.shape[0]


def window_count(length, t_in, t_out):
    return max(0, length - t_in - t_out + 1)


def _segment_windows(scaled, start, stop, t_in, t_out):
    n_nodes = scaled.shape[1]
    count = window_count(stop - start, t_in, t_out)
    inputs = np.empty((count, n_nodes, 1, t_in))
    targets = np.empty((count, n_nodes, t_out))
    target_rows = np.empty((count, t_out), dtype=np.int64)
    for i in range(count):
        end = start + i + t_in  # first target row
        inputs[i, :, 0, :] = scaled[end - t_in:end].T
        targets[i] = scaled[end:end + t_out].T
        target_rows[i] = np.arange(end, end + t_out)
    return inputs, targets, target_rows


def prepare_windows(raw, t_in=12, t_out=1, train_fraction=0.8):
    """Chronological split at ``floor(fraction * T_total)``, stride-1 windows per segment."""
    total = raw.n_steps
    if t_in < 1 or t_out < 1:
        raise ValueError("t_in and t_out must be >= 1")
    if t_in + t_out > total:
        raise ValueError(f"need at least {t_in + t_out} rows, dataset has {total}")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    split = int(math.floor(train_fraction * total))
    peak = float(np.max(raw.speeds[:split])) if split > 0 else 0.0
    scaler = MaxScaler(peak if peak > 0 else 1.0)
    scaled = scaler.scale(raw.speeds)
    tr = _segment_windows(scaled, 0, split, t_in, t_out)
    te = _segment_windows(scaled, split, total, t_in, t_out)
    return WindowSet(tr[0], tr[1], te[0], te[1], scaler, t_in, t_out, tr[2], te[2])


def add_gaussian_noise(raw, sigma, seed=0):
    """Add independent N(0, sigma²) noise to every speed entry."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    speeds = raw.speeds.copy()
    if sigma > 0:
        rng = np.random.default_rng(seed)
        speeds = speeds + rng.normal(0.0, sigma, size=speeds.shape)
    return RawDataset(speeds, raw.adjacency.copy(), raw.interval_minutes)


def ha_baseline(windows):
    """Historical average: each node's mean input speed, repeated over the horizon (original units)."""
    if windows.n_test == 0:
        raise ValueError("no test windows")
    means = windows.test_inputs[:, :, 0, :].mean(axis=2)
    return windows.scaler.descale(np.repeat(means[:, :, None], windows.t_out, axis=2))


def horizon_steps(minutes, interval_minutes):
    if minutes % interval_minutes:
        raise ValueError(f"{minutes} min is not a multiple of the {interval_minutes} min interval")
    return minutes // interval_minutes


def ring_adjacency(n_nodes):
    a = np.zeros((n_nodes, n_nodes))
    for k in range(n_nodes):
        a[k, (k + 1) % n_nodes] = a[(k + 1) % n_nodes, k] = 1.0
    if n_nodes <= 2:
        np.fill_diagonal(a, 0.0)
    return a


def synthetic_ring_dataset(n_nodes=20, steps=2000, noise_std=0.05, period=48, seed=0,
                           base=45.0, amplitude=15.0, interval_minutes=15):
    """Phase-shifted sinusoids on a ring graph plus Gaussian noise.

    Node ``k`` carries ``base + amplitude*sin(2π t/period + 2π k/n_nodes)``,
    so neighbours on the ring are similar and the pattern travels round it.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(steps)[:, None]
    phase = 2.0 * np.pi * np.arange(n_nodes)[None, :] / n_nodes
    clean = base + amplitude * np.sin(2.0 * np.pi * t / period + phase)
    speeds = clean + rng.normal(0.0, noise_std, size=clean.shape)
    return RawDataset(np.maximum(speeds, 0.0), ring_adjacency(n_nodes), interval_minutes)


def write_csv(path, matrix, header=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        for row in np.asarray(matrix):
            writer.writerow([repr(float(v)) for v in row])
