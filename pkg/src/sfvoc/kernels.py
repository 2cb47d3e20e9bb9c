"""Hot numeric kernels, each with a numba build and a pure-numpy fallback.

The active backend is chosen once at import from the ``SFVOC_NUMBA``
environment variable ("0"/"false"/"off" disables numba) and can be switched
at runtime with :func:`set_backend`, which the benchmark command uses to
time both paths in one process. Both builds accumulate in the same order,
so a given backend is bit-reproducible run to run.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    HAVE_NUMBA = False

_ENV_FLAG = "SFVOC_NUMBA"


def _env_allows_numba() -> bool:
    return os.environ.get(_ENV_FLAG, "1").strip().lower() not in ("0", "false", "off")


_active = "numba" if (HAVE_NUMBA and _env_allows_numba()) else "numpy"


def active_backend() -> str:
    return _active


def available_backends() -> tuple[str, ...]:
    return ("numpy", "numba") if HAVE_NUMBA else ("numpy",)


def set_backend(name: str) -> None:
    global _active
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _active = name


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _frame_window_np(x, w, shift, n_frames):
    m = w.shape[0]
    frames = np.empty((n_frames, m))
    for i in range(n_frames):
        start = i * shift
        np.multiply(x[start : start + m], w, out=frames[i])
    return frames


def _overlap_add_window_np(grads, w, shift, total):
    n_frames, m = grads.shape
    out = np.zeros(total)
    for i in range(n_frames):
        start = i * shift
        out[start : start + m] += grads[i] * w
    return out


def _conv3_forward_np(x, w, b, dilation):
    t = x.shape[0]
    y = np.empty((t, w.shape[2]))
    y[:] = b
    y += x @ w[1]
    if dilation < t:
        y[dilation:] += x[:-dilation] @ w[0]
        y[:-dilation] += x[dilation:] @ w[2]
    return y


def _conv3_backward_np(x, w, dilation, gy):
    t = x.shape[0]
    gx = gy @ w[1].T
    gw = np.zeros_like(w)
    gw[1] = x.T @ gy
    if dilation < t:
        gx[: t - dilation] += gy[dilation:] @ w[0].T
        gx[dilation:] += gy[: t - dilation] @ w[2].T
        gw[0] = x[: t - dilation].T @ gy[dilation:]
        gw[2] = x[dilation:].T @ gy[: t - dilation]
    gb = gy.sum(axis=0)
    return gx, gw, gb


def _gated_forward_np(z, c):
    half = z.shape[1] // 2
    tanh_v = np.tanh(z[:, :half] + c[:, :half])
    sig_v = 1.0 / (1.0 + np.exp(-(z[:, half:] + c[:, half:])))
    return tanh_v * sig_v, tanh_v, sig_v

def _gated_backward_np(gh, tanh_v, sig_v):
    gz = np.empty((gh.shape[0], 2 * gh.shape[1]))
    half = gh.shape[1]
    gz[:, :half] = gh * sig_v * (1.0 - tanh_v * tanh_v)
    gz[:, half:] = gh * tanh_v * sig_v * (1.0 - sig_v)
    return gz


# ---------------------------------------------------------------------------
# numba implementations (compiled lazily on first call)
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _frame_window_nb(x, w, shift, n_frames):
        m = w.shape[0]
        frames = np.empty((n_frames, m))
        for i in range(n_frames):
            start = i * shift
            for j in range(m):
                frames[i, j] = x[start + j] * w[j]
        return frames

    @njit(cache=True)
    def _overlap_add_window_nb(grads, w, shift, total):
        n_frames, m = grads.shape
        out = np.zeros(total)
        for i in range(n_frames):
            start = i * shift
            for j in range(m):
                out[start + j] += grads[i, j] * w[j]
        return out

    @njit(cache=True)
    def _conv3_forward_nb(x, w, b, dilation):
        t = x.shape[0]
        c_out = w.shape[2]
        y = np.empty((t, c_out))
        for i in range(t):
            y[i] = b
        y += np.dot(x, w[1])
        if dilation < t:
            y[dilation:] += np.dot(x[: t - dilation], w[0])
            y[: t - dilation] += np.dot(x[dilation:], w[2])
        return y

    @njit(cache=True)
    def _conv3_backward_nb(x, w, dilation, gy):
        t = x.shape[0]
        w0t = np.ascontiguousarray(w[0].T)
        w1t = np.ascontiguousarray(w[1].T)
        w2t = np.ascontiguousarray(w[2].T)
        xt = np.ascontiguousarray(x.T)
        gx = np.dot(gy, w1t)
        gw = np.zeros_like(w)
        gw[1] = np.dot(xt, gy)
        if dilation < t:
            gx[: t - dilation] += np.dot(gy[dilation:], w0t)
            gx[dilation:] += np.dot(gy[: t - dilation], w2t)
            gw[0] = np.dot(np.ascontiguousarray(x[: t - dilation].T), gy[dilation:])
            gw[2] = np.dot(np.ascontiguousarray(x[dilation:].T), gy[: t - dilation])
        gb = np.zeros(gy.shape[1])
        for i in range(t):
            gb += gy[i]
        return gx, gw, gb

    @njit(cache=True)
    def _gated_forward_nb(z, c):
        t = z.shape[0]
        half = z.shape[1] // 2
        h = np.empty((t, half))
        tanh_v = np.empty((t, half))
        sig_v = np.empty((t, half))
        for i in range(t):
            for j in range(half):
                tv = np.tanh(z[i, j] + c[i, j])
                sv = 1.0 / (1.0 + np.exp(-(z[i, half + j] + c[i, half + j])))
                tanh_v[i, j] = tv
                sig_v[i, j] = sv
                h[i, j] = tv * sv
        return h, tanh_v, sig_v

    @njit(cache=True)
    def _gated_backward_nb(gh, tanh_v, sig_v):
        t, half = gh.shape
        gz = np.empty((t, 2 * half))
        for i in range(t):
            for j in range(half):
                tv = tanh_v[i, j]
                sv = sig_v[i, j]
                gz[i, j] = gh[i, j] * sv * (1.0 - tv * tv)
                gz[i, half + j] = gh[i, j] * tv * sv * (1.0 - sv)
        return gz


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def frame_window(x, w, shift, n_frames):
    """Gather ``n_frames`` strided frames of ``x`` and window each one."""
    if _active == "numba":
        return _frame_window_nb(x, w, shift, n_frames)
    return _frame_window_np(x, w, shift, n_frames)


def overlap_add_window(grads, w, shift, total):
    """Adjoint of :func:`frame_window`: window then scatter-add into ``total`` samples."""
    if _active == "numba":
        return _overlap_add_window_nb(grads, w, shift, total)
    return _overlap_add_window_np(grads, w, shift, total)


def conv3_forward(x, w, b, dilation):
    """Centered width-3 dilated convolution over time, zero padded at the edges."""
    if _active == "numba":
        return _conv3_forward_nb(x, w, b, dilation)
    return _conv3_forward_np(x, w, b, dilation)


def conv3_backward(x, w, dilation, gy):
    if _active == "numba":
        return _conv3_backward_nb(x, w, dilation, gy)
    return _conv3_backward_np(x, w, dilation, gy)


def gated_forward(z, c):
    """tanh/sigmoid gate over channel halves; returns (out, tanh, sigmoid)."""
    if _active == "numba":
        return _gated_forward_nb(z, c)
    return _gated_forward_np(z, c)


def gated_backward(gh, tanh_v, sig_v):
    if _active == "numba":
        return _gated_backward_nb(gh, tanh_v, sig_v)
    return _gated_backward_np(gh, tanh_v, sig_v)
