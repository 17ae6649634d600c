"""RMSE, MAE, Accuracy, R² and explained variance over flattened predictions."""
from dataclasses import dataclass, fields

import numpy as np

from .tensor import DataError


@dataclass(frozen=True)
class MetricsReport:
    """The five forecasting scores. Scores undefined for the given targets are ``None``."""

    rmse: float
    mae: float
    accuracy: float | None
    r2: float | None
    var: float | None

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_kv(self, prefix=""):
        lines = []
        for key, value in self.as_dict().items():
            shown = "undefined" if value is None else repr(float(value))
            lines.append(f"{prefix}{key}={shown}")
        return "\n".join(lines)

    def to_table(self, title=None):
        rows = [(k.upper() if k in ("rmse", "mae") else k, v) for k, v in self.as_dict().items()]
        width = max(len(k) for k, _ in rows)
        out = [title] if title else []
        for key, value in rows:
            shown = "undefined" if value is None else f"{value:.4f}"
            out.append(f"  {key:<{width}}  {shown:>10}")
        return "\n".join(out)


def compute_metrics(y, y_hat):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.size == 0 or y.size != y_hat.size:
        raise ValueError(f"need equal nonzero lengths, got {y.size} and {y_hat.size}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise DataError("metrics inputs contain non-finite values")

    resid = y - y_hat
    sse = float(np.dot(resid, resid))
    rmse = float(np.sqrt(sse / y.size))
    mae = float(np.mean(np.abs(resid)))

    y_norm = float(np.linalg.norm(y))
    accuracy = 1.0 - float(np.sqrt(sse)) / y_norm if y_norm > 0 else None

    centered = y - y.mean()
    sst = float(np.dot(centered, centered))
    if sst > 0:
        r2 = 1.0 - sse / sst
        var = 1.0 - float(np.var(resid)) / float(np.var(y))
    else:
        r2 = var = None
    return MetricsReport(rmse, mae, accuracy, r2, var)
