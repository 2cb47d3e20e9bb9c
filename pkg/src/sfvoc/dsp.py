"""Framing, windowing, DFT and the deframing adjoint.

Everything here is a pure function in double precision. Spectra use the
unnormalized DFT convention (forward e^{-j...}, inverse e^{+j...} with no
1/K factor), so a forward/inverse round trip scales by K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InsufficientLengthError, SymmetryError

EPS = 1e-12
SYMMETRY_RTOL = 1e-9


@dataclass(frozen=True)
class StftConfig:
    """One framing/DFT configuration: K bins, frame length M, shift, window."""

    dft_bins: int
    frame_len: int
    frame_shift: int
    window: str = "hann"

    def __post_init__(self) -> None:
        k, m, s = self.dft_bins, self.frame_len, self.frame_shift
        if k < 2 or k % 2 != 0 or k & (k - 1):
            raise ValueError(f"dft_bins must be an even power of two, got {k}")
        if not 1 <= m <= k:
            raise ValueError(f"frame_len must be in [1, dft_bins], got {m} (K={k})")
        if not 1 <= s <= m:
            raise ValueError(f"frame_shift must be in [1, frame_len], got {s}")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            raise InsufficientLengthError(
                f"need at least {self.frame_len} samples, got {n_samples}"
            )
        return (n_samples - self.frame_len) // self.frame_shift + 1


@dataclass
class WaveformBuffer:
    """Real-valued sample sequence with its sampling rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("samples must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class FrameSet:
    """Windowed frames (n_frames x frame_len) plus the config that made them."""

    data: np.ndarray
    config: StftConfig

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


@dataclass
class SpectralFrameSet:
    """Per-frame complex spectra stored as separate real/imag planes."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self) -> None:
        if self.re.shape != self.im.shape or self.re.ndim != 2:
            raise ValueError("re and im must be matching 2-d arrays")

    @property
    def n_frames(self) -> int:
        return self.re.shape[0]

    @property
    def n_bins(self) -> int:
        return self.re.shape[1]


def hann_window(frame_len: int) -> np.ndarray:
    """Periodic Hann window: w[m] = 0.5 - 0.5 cos(2 pi m / M)."""
    if frame_len < 1:
        raise ValueError("frame_len must be >= 1")
    m = np.arange(frame_len, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * m / frame_len)


def frame_and_window(
    wave: WaveformBuffer, cfg: StftConfig, window: np.ndarray | None = None
) -> FrameSet:
    """Slice the waveform into overlapping frames and apply the window.

    Frame n covers samples [n*shift, n*shift + M); trailing samples that do
    not fill a whole frame are dropped. ``window`` overrides the config's
    Hann window (used by tests and the adjoint checks).
    """
    if window is None:
        window = hann_window(cfg.frame_len)
    elif window.shape != (cfg.frame_len,):
        raise ValueError("window length must equal frame_len")
    n = cfg.frame_count(len(wave))
    frames = kernels.frame_window(wave.samples, window, cfg.frame_shift, n)
    return FrameSet(frames, cfg)


def dft_frames(frames: FrameSet) -> SpectralFrameSet:
    """Zero-pad each frame to K and take the unnormalized K-point DFT.

    Rows are built by mirroring the half spectrum, so conjugate symmetry
    holds exactly (bit for bit), not just to rounding.
    """
    k = frames.config.dft_bins
    half = np.fft.rfft(frames.data, n=k)
    re = np.empty((frames.n_frames, k))
    im = np.empty((frames.n_frames, k))
    re[:, : k // 2 + 1] = half.real
    im[:, : k // 2 + 1] = half.imag
    re[:, k // 2 + 1 :] = half.real[:, -2:0:-1]
    im[:, k // 2 + 1 :] = -half.imag[:, -2:0:-1]
    im[:, 0] = 0.0
    im[:, k // 2] = 0.0
    return SpectralFrameSet(re, im)


def check_hermitian(spec: SpectralFrameSet, rtol: float = SYMMETRY_RTOL) -> None:
    """Raise SymmetryError if any row breaks circular conjugate symmetry.

    Conditions per row (0-based bins): im[0] = im[K/2] = 0, and for
    k in [1, K/2-1]: re[k] = re[K-k], im[k] = -im[K-k]. Violations are
    measured relative to the row's largest magnitude.
    """
    k = spec.n_bins
    scale = np.maximum(
        np.max(np.abs(spec.re), axis=1) + np.max(np.abs(spec.im), axis=1), 1e-300
    )
    mirror = slice(k - 1, k // 2, -1)
    err = np.abs(spec.im[:, 0]) + np.abs(spec.im[:, k // 2])
    err += np.max(np.abs(spec.re[:, 1 : k // 2] - spec.re[:, mirror]), axis=1, initial=0.0)
    err += np.max(np.abs(spec.im[:, 1 : k // 2] + spec.im[:, mirror]), axis=1, initial=0.0)
    worst = np.max(err / scale)
    if worst > rtol:
        raise SymmetryError(
            f"spectrum violates conjugate symmetry (relative error {worst:.3e})"
        )


def idft_hermitian(grad_spec: SpectralFrameSet, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Unnormalized inverse DFT of conjugate-symmetric rows.

    Returns real rows of length K: b[m] = sum_k g[k] e^{+j 2 pi k m / K}.
    Callers differentiating zero-padded frames keep only the first M
    entries; the tail is the gradient w.r.t. the padding.
    """
    check_hermitian(grad_spec, rtol)
    k = grad_spec.n_bins
    half = grad_spec.re[:, : k // 2 + 1] + 1j * grad_spec.im[:, : k // 2 + 1]
    return np.fft.irfft(half, n=k) * k


def deframe_accumulate(
    frame_grads: np.ndarray | FrameSet,
    cfg: StftConfig,
    total_len: int,
    window: np.ndarray | None = None,
) -> np.ndarray:
    """Adjoint of frame_and_window: push per-frame gradients back onto samples.

    grad[t] = sum over frames containing t of frame_grads[n, m] * w[m],
    with m the position of sample t inside frame n. Samples covered by no
    frame get zero.
    """
    grads = frame_grads.data if isinstance(frame_grads, FrameSet) else frame_grads
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[1] != cfg.frame_len:
        raise ValueError(f"frame grads must be (n, {cfg.frame_len}), got {grads.shape}")
    if window is None:
        window = hann_window(cfg.frame_len)
    elif window.shape != (cfg.frame_len,):
        raise ValueError("window length must equal frame_len")
    n = grads.shape[0]
    if n and (n - 1) * cfg.frame_shift + cfg.frame_len > total_len:
        raise ValueError("frame grads extend past the waveform length")
    return kernels.overlap_add_window(grads, window, cfg.frame_shift, total_len)


def spectrogram(wave: WaveformBuffer, cfg: StftConfig, eps: float = EPS) -> np.ndarray:
    """Log power spectrogram, n_frames x (K/2+1): log(re^2 + im^2 + eps)."""
    spec = dft_frames(frame_and_window(wave, cfg))
    half = cfg.dft_bins // 2 + 1
    power = spec.re[:, :half] ** 2 + spec.im[:, :half] ** 2
    return np.log(power + eps)
