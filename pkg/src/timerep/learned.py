"""Learnable time representations.

The embedding maps a scaled time t in [0, 1] to a vector of length d: one
linear element (index 0) plus d-1 sine elements, each with its own
frequency/phase pair.  One independent parameter set exists per attention
head.  The triangular-pulse variant replaces the sine activation with a
percentile-based pulse applied to each representation's vector of values
over the day's time points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels

DEFAULT_PEAK_INDEX = 13  # the 1 PM slot on a 0..23 hour grid
DEFAULT_PERCENTILE = 25.0
DEFAULT_INIT_SCALE = 0.01

ACTIVATIONS = ("sine", "pulse")


@dataclass
class TimeEmbeddingParams:
    """(omega, alpha) pairs of one head's embedding function."""

    omega: np.ndarray
    alpha: np.ndarray
    head_index: int = 0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.omega.shape != self.alpha.shape or self.omega.ndim != 1:
            raise ValueError("omega and alpha must be 1D arrays of equal length")

    @property
    def d(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True)
class PulseTransformSpec:
    """Peak slot and percentile of the learnable pulse activation."""

    peak_index: int = DEFAULT_PEAK_INDEX
    percentile: float = DEFAULT_PERCENTILE

    def __post_init__(self):
        if not 0.0 < self.percentile < 100.0:
            raise ValueError(f"percentile must be in (0, 100), got {self.percentile}")


def init_params(
    d: int,
    head_index: int = 0,
    rng: np.random.Generator | None = None,
    scale: float = DEFAULT_INIT_SCALE,
) -> TimeEmbeddingParams:
    """Zero-centered uniform initialization with small scale."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return TimeEmbeddingParams(
        omega=rng.uniform(-scale, scale, size=d),
        alpha=rng.uniform(-scale, scale, size=d),
        head_index=head_index,
    )


def phi(t, params: TimeEmbeddingParams) -> np.ndarray:
    """Evaluate the embedding at time(s) t; scalar t gives a (d,) vector."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = kernels.phi_forward(t_arr, params.omega, params.alpha)
    return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def phi_gradients(t: float, params: TimeEmbeddingParams):
    """Partials of every output element w.r.t. omega_i, alpha_i, and t.

    Returns (d_omega, d_alpha, d_t), each of shape (d,): element i holds the
    derivative of output element i with respect to its own parameter (or t).
    """
    u = params.omega * t + params.alpha
    c = np.cos(u)
    c[0] = 1.0  # linear element
    d_omega = c * t
    d_alpha = c.copy()
    d_t = c * params.omega
    return d_omega, d_alpha, d_t


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Nearest-rank percentile: the value at rank ceil(p/100 * n)."""
    s = np.sort(np.asarray(values, dtype=np.float64))
    k = int(np.ceil(percentile / 100.0 * s.size)) - 1
    return float(s[k])


def pulse_transform(
    time_vectors: np.ndarray, spec: PulseTransformSpec = PulseTransformSpec()
) -> np.ndarray:
    """Per-row percentile pulse peaked at the peak slot.

    Each row is one representation evaluated on the d time points.  Distances
    to the peak element at or beyond the row's percentile map to 0; closer
    ones to 1 - dist/v.  All-equal rows degenerate to the peak indicator.
    """
    x = np.atleast_2d(np.asarray(time_vectors, dtype=np.float64))
    if not 0 <= spec.peak_index < x.shape[1]:
        raise ValueError(
            f"peak_index {spec.peak_index} out of range for d={x.shape[1]}"
        )
    out, _ = kernels.pulse_forward(x, spec.peak_index, spec.percentile)
    return out


def pulse_transform_gradients(
    time_vectors: np.ndarray, spec: PulseTransformSpec = PulseTransformSpec()
):
    """Jacobian diagonals of the pulse under the frozen-percentile convention.

    Returns (d_self, d_peak): d_self[i, j] is the partial of output (i, j)
    w.r.t. input (i, j); d_peak[i, j] the partial w.r.t. the row's peak
    input.  Entries at or beyond the threshold, exactly at it, or at the
    peak itself are 0.
    """
    x = np.atleast_2d(np.asarray(time_vectors, dtype=np.float64))
    _, v = kernels.pulse_forward(x, spec.peak_index, spec.percentile)
    diff = x - x[:, spec.peak_index : spec.peak_index + 1]
    dist = np.abs(diff)
    sign = np.sign(diff)
    vv = np.where(v > 0.0, v, 1.0)[:, None]
    inside = (dist < vv) & (v[:, None] > 0.0)
    inside[:, spec.peak_index] = False
    d_self = np.where(inside, -sign / vv, 0.0)
    d_peak = np.where(inside, sign / vv, 0.0)
    return d_self, d_peak


def params_to_json(params: TimeEmbeddingParams, activation: str = "sine") -> str:
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}")
    return json.dumps(
        {
            "head_index": params.head_index,
            "d": params.d,
            "activation": activation,
            "omega": params.omega.tolist(),
            "alpha": params.alpha.tolist(),
        },
        sort_keys=True,
    )


def params_from_json(text: str) -> tuple[TimeEmbeddingParams, str]:
    obj = json.loads(text)
    params = TimeEmbeddingParams(
        omega=np.asarray(obj["omega"], dtype=np.float64),
        alpha=np.asarray(obj["alpha"], dtype=np.float64),
        head_index=int(obj["head_index"]),
    )
    if params.d != int(obj["d"]):
        raise ValueError("d field disagrees with array length")
    return params, obj["activation"]
