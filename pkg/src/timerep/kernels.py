"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is the default when numba imports cleanly.  Set
``TIMEREP_NUMBA=0`` before importing the package to force the numpy
implementations (``TIMEREP_NUMBA=1`` makes a missing numba an error instead
of a silent fallback).  Both implementations of every kernel stay importable
so the benchmark in ``benchmarks/bench_kernels.py`` and the equivalence
tests can compare them directly.

Kernels here are the ones that dominate training time: row softmax
(attention weights, forward and backward), the sine/linear time-embedding
evaluation, and the percentile-based triangular-pulse activation.
"""

import math
import os

import numpy as np

_FLAG = os.environ.get("TIMEREP_NUMBA", "auto").strip().lower()

NUMBA_ENABLED = False
if _FLAG not in ("0", "off", "false", "no"):
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:
        if _FLAG in ("1", "on", "true", "yes", "force"):
            raise
if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        # identity decorator so the _nb definitions below stay valid
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


# ---------------------------------------------------------------------------
# row softmax
# ---------------------------------------------------------------------------

def softmax_rows_np(x):
    """Softmax over the last axis of a 2D array."""
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=1, keepdims=True)


@njit(cache=True)
def softmax_rows_nb(x):
    n, c = x.shape
    out = np.empty_like(x)
    for i in range(n):
        m = x[i, 0]
        for j in range(1, c):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(c):
            v = math.exp(x[i, j] - m)
            out[i, j] = v
            s += v
        inv = 1.0 / s
        for j in range(c):
            out[i, j] *= inv
    return out


def softmax_rows_grad_np(w, g):
    """VJP of row softmax: w are the softmax outputs, g the upstream grads."""
    dot = (w * g).sum(axis=1, keepdims=True)
    return w * (g - dot)


@njit(cache=True)
def softmax_rows_grad_nb(w, g):
    n, c = w.shape
    out = np.empty_like(w)
    for i in range(n):
        dot = 0.0
        for j in range(c):
            dot += w[i, j] * g[i, j]
        for j in range(c):
            out[i, j] = w[i, j] * (g[i, j] - dot)
    return out


# ---------------------------------------------------------------------------
# time-embedding evaluation: element 0 linear, elements 1..d-1 sine
# ---------------------------------------------------------------------------

def phi_forward_np(t, omega, alpha):
    """Evaluate the linear+sine embedding on times t (n,) -> (n, d)."""
    u = t[:, None] * omega[None, :] + alpha[None, :]
    out = np.sin(u)
    out[:, 0] = u[:, 0]
    return out


@njit(cache=True)
def phi_forward_nb(t, omega, alpha):
    n = t.shape[0]
    d = omega.shape[0]
    out = np.empty((n, d))
    for i in range(n):
        out[i, 0] = omega[0] * t[i] + alpha[0]
        for j in range(1, d):
            out[i, j] = math.sin(omega[j] * t[i] + alpha[j])
    return out


def phi_backward_np(t, omega, alpha, g):
    """VJP of phi_forward: returns (d_t, d_omega, d_alpha)."""
    u = t[:, None] * omega[None, :] + alpha[None, :]
    c = np.cos(u)
    c[:, 0] = 1.0
    gc = g * c
    d_t = gc @ omega
    d_omega = gc.T @ t
    d_alpha = gc.sum(axis=0)
    return d_t, d_omega, d_alpha


@njit(cache=True)
def phi_backward_nb(t, omega, alpha, g):
    n = t.shape[0]
    d = omega.shape[0]
    d_t = np.zeros(n)
    d_omega = np.zeros(d)
    d_alpha = np.zeros(d)
    for i in range(n):
        gc = g[i, 0]
        d_t[i] += gc * omega[0]
        d_omega[0] += gc * t[i]
        d_alpha[0] += gc
        for j in range(1, d):
            c = math.cos(omega[j] * t[i] + alpha[j])
            gc = g[i, j] * c
            d_t[i] += gc * omega[j]
            d_omega[j] += gc * t[i]
            d_alpha[j] += gc
    return d_t, d_omega, d_alpha


# ---------------------------------------------------------------------------
# percentile-based triangular pulse over representation rows
# ---------------------------------------------------------------------------

def _nearest_rank_index(n_values, percentile):
    # nearest-rank: value at rank ceil(p/100 * n) of the ascending sort
    return int(math.ceil(percentile / 100.0 * n_values)) - 1


def pulse_forward_np(x, peak_index, percentile):
    """Pulse activation per row of x (rows are representations over time points).

    Returns (out, v) where v holds each row's nearest-rank percentile of the
    absolute distances to the peak element.  Rows whose percentile is zero
    degenerate to an indicator of the peak.
    """
    dist = np.abs(x - x[:, peak_index : peak_index + 1])
    k = _nearest_rank_index(x.shape[1], percentile)
    v = np.sort(dist, axis=1)[:, k]
    out = np.zeros_like(x)
    pos = v > 0.0
    if np.any(pos):
        vv = np.where(pos, v, 1.0)[:, None]
        inside = dist < vv
        out = np.where(pos[:, None] & inside, 1.0 - dist / vv, 0.0)
    out[:, peak_index] = 1.0
    return out, v


@njit(cache=True)
def pulse_forward_nb(x, peak_index, percentile):
    n, d = x.shape
    k = int(math.ceil(percentile / 100.0 * d)) - 1
    out = np.zeros((n, d))
    v = np.empty(n)
    for i in range(n):
        dist = np.empty(d)
        peak = x[i, peak_index]
        for j in range(d):
            dist[j] = abs(x[i, j] - peak)
        vi = np.sort(dist)[k]
        v[i] = vi
        if vi > 0.0:
            for j in range(d):
                if dist[j] < vi:
                    out[i, j] = 1.0 - dist[j] / vi
        out[i, peak_index] = 1.0
    return out, v


def pulse_backward_np(x, v, peak_index, percentile, g):
    """Subgradient VJP of the pulse, treating each row's percentile as constant."""
    dist = np.abs(x - x[:, peak_index : peak_index + 1])
    sign = np.sign(x - x[:, peak_index : peak_index + 1])
    vv = np.where(v > 0.0, v, 1.0)[:, None]
    inside = (dist < vv) & (v[:, None] > 0.0)
    inside[:, peak_index] = False  # peak output pinned at 1
    dx = np.where(inside, -g * sign / vv, 0.0)
    dx[:, peak_index] += (np.where(inside, g * sign / vv, 0.0)).sum(axis=1)
    return dx


@njit(cache=True)
def pulse_backward_nb(x, v, peak_index, percentile, g):
    n, d = x.shape
    dx = np.zeros((n, d))
    for i in range(n):
        vi = v[i]
        if vi <= 0.0:
            continue
        peak = x[i, peak_index]
        acc = 0.0
        for j in range(d):
            if j == peak_index:
                continue
            diff = x[i, j] - peak
            dist = abs(diff)
            if dist < vi:
                s = 0.0
                if diff > 0.0:
                    s = 1.0
                elif diff < 0.0:
                    s = -1.0
                dx[i, j] = -g[i, j] * s / vi
                acc += g[i, j] * s / vi
        dx[i, peak_index] = acc
    return dx


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

NUMPY_IMPLS = {
    "softmax_rows": softmax_rows_np,
    "softmax_rows_grad": softmax_rows_grad_np,
    "phi_forward": phi_forward_np,
    "phi_backward": phi_backward_np,
    "pulse_forward": pulse_forward_np,
    "pulse_backward": pulse_backward_np,
}

NUMBA_IMPLS = {
    "softmax_rows": softmax_rows_nb,
    "softmax_rows_grad": softmax_rows_grad_nb,
    "phi_forward": phi_forward_nb,
    "phi_backward": phi_backward_nb,
    "pulse_forward": pulse_forward_nb,
    "pulse_backward": pulse_backward_nb,
}

_ACTIVE = NUMBA_IMPLS if NUMBA_ENABLED else NUMPY_IMPLS


def _c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def softmax_rows(x):
    return _ACTIVE["softmax_rows"](_c64(x))


def softmax_rows_grad(w, g):
    return _ACTIVE["softmax_rows_grad"](_c64(w), _c64(g))


def phi_forward(t, omega, alpha):
    return _ACTIVE["phi_forward"](_c64(t), _c64(omega), _c64(alpha))


def phi_backward(t, omega, alpha, g):
    return _ACTIVE["phi_backward"](_c64(t), _c64(omega), _c64(alpha), _c64(g))


def pulse_forward(x, peak_index, percentile):
    return _ACTIVE["pulse_forward"](_c64(x), peak_index, percentile)


def pulse_backward(x, v, peak_index, percentile, g):
    return _ACTIVE["pulse_backward"](_c64(x), _c64(v), peak_index, percentile, _c64(g))
