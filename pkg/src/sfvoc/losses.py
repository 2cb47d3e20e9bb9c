"""Spectral training criteria and their analytic waveform gradients.

Two distances per framing/DFT configuration:

* amplitude: 0.5 * sum over frames and all K bins of
  [log((|ref|^2 + eps) / (|gen|^2 + eps))]^2
* phase: sum of 1 - cos(phase difference), written with real/imag parts so
  no angle unwrapping is needed; magnitude denominators are floored at
  sqrt(eps) so silent bins stay finite.

The waveform gradient follows the frame -> DFT -> per-bin gradient ->
Hermitian inverse DFT -> deframe chain; gradients from several enabled
configurations simply add.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import (
    EPS,
    SpectralFrameSet,
    StftConfig,
    WaveformBuffer,
    deframe_accumulate,
    dft_frames,
    frame_and_window,
    idft_hermitian,
)

TABLE_CONFIGS = (
    StftConfig(dft_bins=512, frame_len=320, frame_shift=80),
    StftConfig(dft_bins=128, frame_len=80, frame_shift=40),
    StftConfig(dft_bins=2048, frame_len=1920, frame_shift=640),
)


@dataclass(frozen=True)
class LossConfig:
    """Which distances to compute under which framing configurations."""

    configs: tuple[StftConfig, ...]
    amplitude_terms: tuple[bool, ...]
    phase_terms: tuple[bool, ...]
    eps: float = EPS

    def __post_init__(self) -> None:
        n = len(self.configs)
        if len(self.amplitude_terms) != n or len(self.phase_terms) != n:
            raise ValueError("term flags must have one entry per config")
        if not (any(self.amplitude_terms) or any(self.phase_terms)):
            raise ValueError("at least one loss term must be enabled")
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @classmethod
    def default(
        cls,
        amplitude: tuple[bool, ...] = (True, True, True),
        phase: tuple[bool, ...] = (False, False, False),
    ) -> "LossConfig":
        return cls(TABLE_CONFIGS, tuple(amplitude), tuple(phase))

    def term_names(self) -> list[str]:
        names = []
        for i, on in enumerate(self.amplitude_terms):
            if on:
                names.append(f"Ls{i + 1}")
        for i, on in enumerate(self.phase_terms):
            if on:
                names.append(f"Lp{i + 1}")
        return names

    def min_length(self) -> int:
        """Shortest waveform the enabled configurations can frame."""
        return max(
            cfg.frame_len
            for cfg, a, p in zip(self.configs, self.amplitude_terms, self.phase_terms)
            if a or p
        )


@dataclass
class LossReport:
    total: float
    per_term: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_terms(cls, per_term: dict[str, float]) -> "LossReport":
        return cls(total=float(sum(per_term.values())), per_term=dict(per_term))


def _check_shapes(gen: SpectralFrameSet, ref: SpectralFrameSet) -> None:
    if gen.re.shape != ref.re.shape:
        raise ValueError(
            f"spectral shapes differ: gen {gen.re.shape} vs ref {ref.re.shape}"
        )


def amplitude_distance(gen: SpectralFrameSet, ref: SpectralFrameSet, eps: float = EPS) -> float:
    _check_shapes(gen, ref)
    gen_pow = gen.re**2 + gen.im**2 + eps
    ref_pow = ref.re**2 + ref.im**2 + eps
    log_ratio = np.log(ref_pow) - np.log(gen_pow)
    return 0.5 * float(np.sum(log_ratio**2))


def phase_distance(gen: SpectralFrameSet, ref: SpectralFrameSet, eps: float = EPS) -> float:
    _check_shapes(gen, ref)
    floor = np.sqrt(eps)
    gen_mag = np.maximum(np.hypot(gen.re, gen.im), floor)
    ref_mag = np.maximum(np.hypot(ref.re, ref.im), floor)
    cos_diff = (gen.re * ref.re + gen.im * ref.im) / (gen_mag * ref_mag)
    return float(np.sum(1.0 - cos_diff))


def amplitude_spectral_gradient(
    gen: SpectralFrameSet, ref: SpectralFrameSet, eps: float = EPS
) -> SpectralFrameSet:
    """d(amplitude distance)/d(gen spectrum), one conjugate-symmetric row per frame."""
    _check_shapes(gen, ref)
    gen_pow = gen.re**2 + gen.im**2 + eps
    ref_pow = ref.re**2 + ref.im**2 + eps
    factor = (np.log(gen_pow) - np.log(ref_pow)) * 2.0 / gen_pow
    return SpectralFrameSet(factor * gen.re, factor * gen.im)


def phase_spectral_gradient(
    gen: SpectralFrameSet, ref: SpectralFrameSet, eps: float = EPS
) -> SpectralFrameSet:
    """d(phase distance)/d(gen spectrum); rows stay conjugate-symmetric."""
    _check_shapes(gen, ref)
    floor = np.sqrt(eps)
    gen_mag = np.maximum(np.hypot(gen.re, gen.im), floor)
    ref_mag = np.maximum(np.hypot(ref.re, ref.im), floor)
    cross = ref.re * gen.im - ref.im * gen.re
    scale = cross / (ref_mag * gen_mag**3)
    return SpectralFrameSet(-scale * gen.im, scale * gen.re)


def loss_and_waveform_gradient(
    gen_wave: WaveformBuffer, ref_wave: WaveformBuffer, cfg: LossConfig
) -> tuple[LossReport, np.ndarray]:
    """All enabled losses plus the analytic gradient w.r.t. the generated wave."""
    if len(gen_wave) != len(ref_wave):
        raise ValueError(
            f"waveform lengths differ: {len(gen_wave)} vs {len(ref_wave)}"
        )
    total_len = len(gen_wave)
    if total_len < cfg.min_length():
        raise ValueError(
            f"waveform of {total_len} samples is shorter than the longest "
            f"enabled frame ({cfg.min_length()})"
        )
    grad = np.zeros(total_len)
    per_term: dict[str, float] = {}
    for i, stft in enumerate(cfg.configs):
        want_amp = cfg.amplitude_terms[i]
        want_phase = cfg.phase_terms[i]
        if not (want_amp or want_phase):
            continue
        gen_spec = dft_frames(frame_and_window(gen_wave, stft))
        ref_spec = dft_frames(frame_and_window(ref_wave, stft))
        parts = []
        if want_amp:
            per_term[f"Ls{i + 1}"] = amplitude_distance(gen_spec, ref_spec, cfg.eps)
            parts.append(amplitude_spectral_gradient(gen_spec, ref_spec, cfg.eps))
        if want_phase:
            per_term[f"Lp{i + 1}"] = phase_distance(gen_spec, ref_spec, cfg.eps)
            parts.append(phase_spectral_gradient(gen_spec, ref_spec, cfg.eps))
        for spec_grad in parts:
            frame_grads = idft_hermitian(spec_grad)[:, : stft.frame_len]
            grad += deframe_accumulate(frame_grads, stft, total_len)
    return LossReport.from_terms(per_term), grad
