"""Sine-excitation source-filter waveform model with spectral training losses."""

from .dsp import (
    EPS,
    FrameSet,
    SpectralFrameSet,
    StftConfig,
    WaveformBuffer,
    deframe_accumulate,
    dft_frames,
    frame_and_window,
    hann_window,
    idft_hermitian,
    spectrogram,
)

__version__ = "0.1.0"

__all__ = [
    "EPS",
    "FrameSet",
    "SpectralFrameSet",
    "StftConfig",
    "WaveformBuffer",
    "deframe_accumulate",
    "dft_frames",
    "frame_and_window",
    "hann_window",
    "idft_hermitian",
    "spectrogram",
    "__version__",
]
