"""Sine-based excitation generation.

A per-sample F0 sequence drives a noisy sine whose phase is the cumulative
sum of the instantaneous frequency. Voiced samples (f > 0) carry the sine
plus Gaussian noise of std sigma; unvoiced samples carry noise scaled to
std 1/3. Harmonic copies run at integer multiples of F0, and a trainable
feedforward layer merges them into the final excitation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AliasingError


@dataclass(frozen=True)
class SourceConfig:
    sigma: float = 0.003
    alpha: float = 0.1
    num_harmonics: int = 7
    sample_rate: int = 16000
    phase_grid: int = 64

    def __post_init__(self) -> None:
        if self.sigma <= 0 or self.alpha <= 0:
            raise ValueError("sigma and alpha must be positive")
        if self.num_harmonics < 0:
            raise ValueError("num_harmonics must be >= 0")
        if self.sample_rate <= 0 or self.phase_grid <= 0:
            raise ValueError("sample_rate and phase_grid must be positive")


@dataclass
class F0Track:
    """Frame-rate F0 (Hz, 0 = unvoiced) plus optional spectral features."""

    f0: np.ndarray
    frame_shift_samples: int
    spectral_features: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        if self.f0.ndim != 1 or self.f0.size < 1:
            raise ValueError("f0 must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(self.f0)) or np.any(self.f0 < 0):
            raise ValueError("f0 values must be finite and >= 0")
        if self.frame_shift_samples < 1:
            raise ValueError("frame_shift_samples must be positive")
        if self.spectral_features is not None:
            self.spectral_features = np.asarray(self.spectral_features, dtype=np.float64)
            if (
                self.spectral_features.ndim != 2
                or self.spectral_features.shape[0] != self.f0.size
            ):
                raise ValueError("spectral_features must be (n_frames, dim)")

    @property
    def n_frames(self) -> int:
        return self.f0.size

    @property
    def n_samples(self) -> int:
        return self.f0.size * self.frame_shift_samples


@dataclass
class ExcitationSignal:
    base: np.ndarray
    harmonics: np.ndarray  # (num_harmonics, T)
    merged: np.ndarray


def upsample_f0(track: F0Track) -> np.ndarray:
    """Duplicate each frame's F0 across its samples: length B * shift."""
    return np.repeat(track.f0, track.frame_shift_samples)


def _cumulative_phase(f: np.ndarray, sample_rate: int) -> np.ndarray:
    # phase at sample t is the cumulative sum up to and including t
    return np.cumsum(2.0 * np.pi * f / sample_rate)


def _as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def pure_tone(f: np.ndarray, cfg: SourceConfig, phase: float) -> np.ndarray:
    """Noise-free sine: alpha * sin(cumphase + phase) on voiced samples, 0 elsewhere."""
    f = np.asarray(f, dtype=np.float64)
    voiced = f > 0.0
    tone = cfg.alpha * np.sin(_cumulative_phase(f, cfg.sample_rate) + phase)
    return np.where(voiced, tone, 0.0)


def sine_excitation(
    f: np.ndarray,
    cfg: SourceConfig,
    phase: float,
    rng: np.random.Generator | int | None = None,
    noise: bool = True,
) -> np.ndarray:
    """Base excitation: noisy sine when voiced, scaled noise when unvoiced.

    Voiced samples with f >= Nyquist raise AliasingError. With noise=False
    the noise terms are dropped entirely (unvoiced samples become 0).
    """
    f = np.asarray(f, dtype=np.float64)
    voiced = f > 0.0
    nyquist = cfg.sample_rate / 2.0
    if np.any(f[voiced] >= nyquist):
        worst = float(np.max(f))
        raise AliasingError(f"voiced F0 {worst:g} Hz is at/above Nyquist {nyquist:g} Hz")
    tone = cfg.alpha * np.sin(_cumulative_phase(f, cfg.sample_rate) + phase)
    if not noise:
        return np.where(voiced, tone, 0.0)
    n = _as_rng(rng).normal(0.0, cfg.sigma, size=f.size)
    return np.where(voiced, tone + n, n / (3.0 * cfg.sigma))


def harmonic_stack(
    f: np.ndarray,
    cfg: SourceConfig,
    phase: float,
    rng: np.random.Generator | int | None = None,
    noise: bool = True,
) -> np.ndarray:
    """Harmonic copies at (h+1)*f for h = 1..num_harmonics, shape (H, T).

    Samples whose harmonic frequency reaches Nyquist fall back to the
    unvoiced noise branch for that harmonic only.
    """
    f = np.asarray(f, dtype=np.float64)
    gen = _as_rng(rng)
    nyquist = cfg.sample_rate / 2.0
    out = np.empty((cfg.num_harmonics, f.size))
    for h in range(1, cfg.num_harmonics + 1):
        fh = (h + 1) * f
        voiced = (f > 0.0) & (fh < nyquist)
        tone = cfg.alpha * np.sin(_cumulative_phase(fh, cfg.sample_rate) + phase)
        if noise:
            n = gen.normal(0.0, cfg.sigma, size=f.size)
            out[h - 1] = np.where(voiced, tone + n, n / (3.0 * cfg.sigma))
        else:
            out[h - 1] = np.where(voiced, tone, 0.0)
    return out


def best_phase_search(
    f: np.ndarray, target: np.ndarray, cfg: SourceConfig
) -> tuple[float, bool]:
    """Grid-search the initial phase maximizing correlation with the target.

    Correlates the noise-free base excitation against the target over
    cfg.phase_grid uniformly spaced candidates in [-pi, pi); ties keep the
    earliest candidate. A degenerate (zero-variance) target or excitation
    returns (0.0, True).
    """
    f = np.asarray(f, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if f.size != target.size:
        raise ValueError(f"length mismatch: f has {f.size}, target has {target.size}")
    t_centered = target - target.mean()
    t_norm = np.linalg.norm(t_centered)
    if t_norm == 0.0 or not np.any(f > 0.0):
        return 0.0, True
    candidates = -np.pi + 2.0 * np.pi * np.arange(cfg.phase_grid) / cfg.phase_grid
    best_phi = 0.0
    best_corr = -np.inf
    for phi in candidates:
        tone = pure_tone(f, cfg, phi)
        tone -= tone.mean()
        norm = np.linalg.norm(tone)
        if norm == 0.0:
            continue
        corr = float(np.dot(tone, t_centered) / (norm * t_norm))
        if corr > best_corr:
            best_corr = corr
            best_phi = float(phi)
    if best_corr == -np.inf:
        return 0.0, True
    return best_phi, False


def merge_excitation(
    base: np.ndarray, harmonics: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Trainable merge: tanh(weights . [base, harmonics] + bias), plus a cache.

    weights has length num_harmonics + 1 (base first); bias is a length-1
    array. Returns (merged, pre_tanh) where pre_tanh feeds the backward pass.
    """
    if harmonics.ndim != 2 or harmonics.shape[1] != base.shape[0]:
        raise ValueError(
            f"harmonics must be (H, {base.shape[0]}), got {harmonics.shape}"
        )
    if weights.shape != (harmonics.shape[0] + 1,):
        raise ValueError(
            f"weights must have length {harmonics.shape[0] + 1}, got {weights.shape}"
        )
    pre = weights[0] * base + harmonics.T @ weights[1:] + bias[0]
    return np.tanh(pre), pre


def merge_excitation_backward(
    grad_merged: np.ndarray,
    pre: np.ndarray,
    base: np.ndarray,
    harmonics: np.ndarray,
    weights: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_weights, d_bias, d_components) of the merge layer.

    d_components stacks the gradient w.r.t. base (row 0) and each harmonic.
    """
    gpre = grad_merged * (1.0 - np.tanh(pre) ** 2)
    gw = np.empty_like(weights)
    gw[0] = float(np.dot(gpre, base))
    gw[1:] = harmonics @ gpre
    gb = np.array([float(np.sum(gpre))])
    g_components = np.vstack([weights[0] * gpre, np.outer(weights[1:], gpre)])
    return gw, gb, g_components


def build_excitation(
    f: np.ndarray,
    cfg: SourceConfig,
    phase: float,
    weights: np.ndarray,
    bias: np.ndarray,
    rng: np.random.Generator | int | None = None,
) -> tuple[ExcitationSignal, np.ndarray]:
    """Full excitation path: base + harmonics merged through the FF layer.

    Returns the signal bundle and the merge-layer cache for backprop.
    """
    gen = _as_rng(rng)
    base = sine_excitation(f, cfg, phase, gen)
    harmonics = harmonic_stack(f, cfg, phase, gen)
    merged, pre = merge_excitation(base, harmonics, weights, bias)
    return ExcitationSignal(base, harmonics, merged), pre
