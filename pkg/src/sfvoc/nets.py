"""Condition and filter networks with hand-written forward/backward passes.

The filter is a chain of stages. Each stage lifts the scalar signal into C
channels, runs a stack of centered dilated convolutions merged with the
condition features through tanh/sigmoid gates (with residual connections),
projects the hidden state down to per-sample a and b-tilde, and emits
e * exp(b_tilde) + a. Zero-initialized output projections make every stage
start as the identity.

No autodiff: every op stores exactly the activations its backward needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .source import F0Track

F0_SCALE = 500.0  # puts speech-range F0 into tanh's linear region

B_MODES = ("learned", "fixed_one", "fixed_zero")
EXCITATION_MODES = ("full", "no_harmonics", "no_harmonics_no_phase", "noise_only")


@dataclass(frozen=True)
class LayerSpec:
    stages: int = 5
    layers_per_stage: int = 10
    filter_width: int = 3
    channels: int = 64

    def __post_init__(self) -> None:
        if self.stages < 1 or self.layers_per_stage < 1 or self.channels < 1:
            raise ValueError("stages, layers_per_stage and channels must be >= 1")
        if self.filter_width != 3:
            raise ValueError("only filter_width 3 is supported")

    def dilation(self, layer: int) -> int:
        """Dilation of a layer given its 0-based index within the stage."""
        return 2 ** (layer % self.layers_per_stage)


@dataclass(frozen=True)
class AblationSwitches:
    b_mode: str = "learned"
    excitation_mode: str = "full"

    def __post_init__(self) -> None:
        if self.b_mode not in B_MODES:
            raise ValueError(f"b_mode must be one of {B_MODES}, got {self.b_mode!r}")
        if self.excitation_mode not in EXCITATION_MODES:
            raise ValueError(
                f"excitation_mode must be one of {EXCITATION_MODES}, "
                f"got {self.excitation_mode!r}"
            )


class ModelParams:
    """Named parameter tensors plus matching gradient buffers."""

    def __init__(self, tensors: dict[str, np.ndarray]):
        self.tensors = {k: np.asarray(v, dtype=np.float64) for k, v in tensors.items()}
        self.grads = {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.grads.values())))

    def scale_grads(self, factor: float) -> None:
        for g in self.grads.values():
            g *= factor


def init_params(
    layers: LayerSpec, feat_dim: int, num_harmonics: int, seed: int = 0
) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, zero output projections."""
    rng = np.random.default_rng(seed)

    def uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    c = layers.channels
    tensors: dict[str, np.ndarray] = {}
    tensors["cond.w"] = uniform((1 + feat_dim, c), 1 + feat_dim)
    tensors["cond.b"] = np.zeros(c)
    tensors["merge.w"] = uniform((num_harmonics + 1,), num_harmonics + 1)
    tensors["merge.b"] = np.zeros(1)
    for s in range(layers.stages):
        tensors[f"stage{s}.in.w"] = uniform((c,), 1)
        tensors[f"stage{s}.in.b"] = np.zeros(c)
        tensors[f"stage{s}.cond.w"] = uniform((c, 2 * c), c)
        tensors[f"stage{s}.cond.b"] = np.zeros(2 * c)
        for k in range(layers.layers_per_stage):
            tensors[f"stage{s}.conv{k}.w"] = uniform((3, c, 2 * c), 3 * c)
            tensors[f"stage{s}.conv{k}.b"] = np.zeros(2 * c)
        tensors[f"stage{s}.a.w"] = np.zeros(c)
        tensors[f"stage{s}.a.b"] = np.zeros(1)
        tensors[f"stage{s}.bt.w"] = np.zeros(c)
        tensors[f"stage{s}.bt.b"] = np.zeros(1)
    return ModelParams(tensors)


# ---------------------------------------------------------------------------
# condition module
# ---------------------------------------------------------------------------


def condition_features(track: F0Track, expected_dim: int) -> np.ndarray:
    """Per-frame network input: scaled F0 stacked with the spectral features."""
    if expected_dim > 0:
        if track.spectral_features is None:
            raise ValueError(
                f"track has no spectral features but the model expects {expected_dim}"
            )
        if track.spectral_features.shape[1] != expected_dim:
            raise ValueError(
                f"expected {expected_dim} spectral features, "
                f"got {track.spectral_features.shape[1]}"
            )
        return np.column_stack([track.f0 / F0_SCALE, track.spectral_features])
    return (track.f0 / F0_SCALE)[:, None]


def condition_forward(
    track: F0Track, params: ModelParams
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Frame-rate tanh feedforward, then duplication upsampling to sample rate."""
    w, b = params["cond.w"], params["cond.b"]
    feats = condition_features(track, w.shape[0] - 1)
    hidden = np.tanh(feats @ w + b)
    cond = np.repeat(hidden, track.frame_shift_samples, axis=0)
    return cond, (feats, hidden)


def condition_backward(
    grad_cond: np.ndarray,
    cache: tuple[np.ndarray, np.ndarray],
    track: F0Track,
    params: ModelParams,
) -> None:
    feats, hidden = cache
    shift = track.frame_shift_samples
    per_frame = grad_cond.reshape(track.n_frames, shift, -1).sum(axis=1)
    gpre = per_frame * (1.0 - hidden**2)
    params.grads["cond.w"] += feats.T @ gpre
    params.grads["cond.b"] += gpre.sum(axis=0)


# ---------------------------------------------------------------------------
# filter primitives
# ---------------------------------------------------------------------------


def dilated_conv_forward(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, dilation: int
) -> np.ndarray:
    """Centered width-3 convolution with zero padding; output length equals input."""
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if kernel.ndim != 3 or kernel.shape[0] != 3 or kernel.shape[1] != x.shape[1]:
        raise ValueError(f"kernel must be (3, {x.shape[1]}, c_out), got {kernel.shape}")
    return kernels.conv3_forward(x, kernel, bias, dilation)


def dilated_conv_backward(
    grad_out: np.ndarray, x: np.ndarray, kernel: np.ndarray, dilation: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return kernels.conv3_backward(x, kernel, dilation, grad_out)


def gated_merge(
    conv_out: np.ndarray, cond: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """tanh(first half) * sigmoid(second half) of conv_out + cond."""
    if conv_out.shape != cond.shape:
        raise ValueError(f"shape mismatch: {conv_out.shape} vs {cond.shape}")
    if conv_out.shape[1] % 2:
        raise ValueError("channel count must be even to split into gate halves")
    out, tanh_v, sig_v = kernels.gated_forward(conv_out, cond)
    return out, (tanh_v, sig_v)


def gated_merge_backward(
    grad_out: np.ndarray, cache: tuple[np.ndarray, np.ndarray]
) -> np.ndarray:
    """Gradient w.r.t. the pre-activation sum (same for conv_out and cond)."""
    tanh_v, sig_v = cache
    return kernels.gated_backward(grad_out, tanh_v, sig_v)


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


@dataclass
class StageCache:
    signal_in: np.ndarray
    cond_proj: np.ndarray
    layer_inputs: list[np.ndarray]
    gate_caches: list[tuple[np.ndarray, np.ndarray]]
    hidden_out: np.ndarray
    b_tilde: np.ndarray | None


def stage_forward(
    signal: np.ndarray,
    cond: np.ndarray,
    params: ModelParams,
    stage: int,
    layers: LayerSpec,
    switches: AblationSwitches,
) -> tuple[np.ndarray, StageCache]:
    p = f"stage{stage}"
    x = np.outer(signal, params[f"{p}.in.w"]) + params[f"{p}.in.b"]
    cond_proj = cond @ params[f"{p}.cond.w"] + params[f"{p}.cond.b"]
    layer_inputs: list[np.ndarray] = []
    gate_caches: list[tuple[np.ndarray, np.ndarray]] = []
    for k in range(layers.layers_per_stage):
        layer_inputs.append(x)
        z = dilated_conv_forward(
            x, params[f"{p}.conv{k}.w"], params[f"{p}.conv{k}.b"], layers.dilation(k)
        )
        h, gcache = gated_merge(z, cond_proj)
        gate_caches.append(gcache)
        x = x + h
    a = x @ params[f"{p}.a.w"] + params[f"{p}.a.b"][0]
    if switches.b_mode == "learned":
        b_tilde = x @ params[f"{p}.bt.w"] + params[f"{p}.bt.b"][0]
        out = signal * np.exp(b_tilde) + a
    elif switches.b_mode == "fixed_one":
        b_tilde = None
        out = signal + a
    else:  # fixed_zero
        b_tilde = None
        out = a
    return out, StageCache(signal, cond_proj, layer_inputs, gate_caches, x, b_tilde)


def stage_backward(
    grad_out: np.ndarray,
    cache: StageCache,
    cond: np.ndarray,
    params: ModelParams,
    stage: int,
    layers: LayerSpec,
    switches: AblationSwitches,
) -> tuple[np.ndarray, np.ndarray]:
    """Returns (grad_signal, grad_cond) and accumulates parameter gradients."""
    p = f"stage{stage}"
    grad_a = grad_out
    if switches.b_mode == "learned":
        scale = np.exp(cache.b_tilde)
        grad_signal = grad_out * scale
        grad_bt = grad_out * cache.signal_in * scale
    elif switches.b_mode == "fixed_one":
        grad_signal = grad_out.copy()
        grad_bt = None
    else:
        grad_signal = np.zeros_like(grad_out)
        grad_bt = None

    grad_x = np.outer(grad_a, params[f"{p}.a.w"])
    params.grads[f"{p}.a.w"] += cache.hidden_out.T @ grad_a
    params.grads[f"{p}.a.b"] += grad_a.sum()
    if grad_bt is not None:
        grad_x += np.outer(grad_bt, params[f"{p}.bt.w"])
        params.grads[f"{p}.bt.w"] += cache.hidden_out.T @ grad_bt
        params.grads[f"{p}.bt.b"] += grad_bt.sum()

    grad_cond_proj = np.zeros_like(cache.cond_proj)
    for k in reversed(range(layers.layers_per_stage)):
        gz = gated_merge_backward(grad_x, cache.gate_caches[k])
        grad_cond_proj += gz
        gx, gw, gb = dilated_conv_backward(
            gz, cache.layer_inputs[k], params[f"{p}.conv{k}.w"], layers.dilation(k)
        )
        params.grads[f"{p}.conv{k}.w"] += gw
        params.grads[f"{p}.conv{k}.b"] += gb
        grad_x = grad_x + gx

    grad_signal = grad_signal + grad_x @ params[f"{p}.in.w"]
    params.grads[f"{p}.in.w"] += grad_x.T @ cache.signal_in
    params.grads[f"{p}.in.b"] += grad_x.sum(axis=0)

    params.grads[f"{p}.cond.w"] += cond.T @ grad_cond_proj
    params.grads[f"{p}.cond.b"] += grad_cond_proj.sum(axis=0)
    grad_cond = grad_cond_proj @ params[f"{p}.cond.w"].T
    return grad_signal, grad_cond


# ---------------------------------------------------------------------------
# whole model
# ---------------------------------------------------------------------------


@dataclass
class ModelCache:
    cond: np.ndarray
    cond_cache: tuple[np.ndarray, np.ndarray]
    stage_caches: list[StageCache]
    flops: float


def _stage_flops(t: int, c: int, n_layers: int) -> float:
    conv = n_layers * 3 * 2.0 * t * c * (2 * c)
    cond_proj = 2.0 * t * c * (2 * c)
    out_proj = 2 * 2.0 * t * c
    lift = 2.0 * t * c
    return conv + cond_proj + out_proj + lift


def model_forward(
    track: F0Track,
    excitation: np.ndarray,
    params: ModelParams,
    layers: LayerSpec,
    switches: AblationSwitches,
) -> tuple[np.ndarray, ModelCache]:
    """One pass through condition module and all filter stages."""
    if excitation.shape != (track.n_samples,):
        raise ValueError(
            f"excitation length {excitation.shape} does not match "
            f"track samples {track.n_samples}"
        )
    cond, cond_cache = condition_forward(track, params)
    signal = np.asarray(excitation, dtype=np.float64)
    caches: list[StageCache] = []
    for s in range(layers.stages):
        signal, scache = stage_forward(signal, cond, params, s, layers, switches)
        caches.append(scache)
    t, c = cond.shape
    flops = layers.stages * _stage_flops(t, c, layers.layers_per_stage)
    flops += 2.0 * track.n_frames * params["cond.w"].shape[0] * c
    return signal, ModelCache(cond, cond_cache, caches, flops)


def model_backward(
    waveform_grad: np.ndarray,
    cache: ModelCache,
    track: F0Track,
    params: ModelParams,
    layers: LayerSpec,
    switches: AblationSwitches,
) -> np.ndarray:
    """Accumulate parameter gradients; returns the gradient w.r.t. the excitation."""
    if len(cache.stage_caches) != layers.stages:
        raise ValueError("forward cache does not match the layer spec")
    grad_signal = np.asarray(waveform_grad, dtype=np.float64)
    if grad_signal.shape != (track.n_samples,):
        raise ValueError("waveform gradient length does not match the track")
    grad_cond = np.zeros_like(cache.cond)
    for s in reversed(range(layers.stages)):
        grad_signal, gc = stage_backward(
            grad_signal, cache.stage_caches[s], cache.cond, params, s, layers, switches
        )
        grad_cond += gc
    condition_backward(grad_cond, cache.cond_cache, track, params)
    return grad_signal


class Model:
    """Bundles parameters with their layer spec and ablation switches.

    Counts forward passes so the non-autoregressive one-pass-per-utterance
    property can be asserted from outside.
    """

    def __init__(self, params: ModelParams, layers: LayerSpec, switches: AblationSwitches):
        self.params = params
        self.layers = layers
        self.switches = switches
        self.forward_calls = 0
        self._cache: ModelCache | None = None

    def forward(self, track: F0Track, excitation: np.ndarray) -> np.ndarray:
        out, self._cache = model_forward(
            track, excitation, self.params, self.layers, self.switches
        )
        self.forward_calls += 1
        return out

    def backward(self, waveform_grad: np.ndarray, track: F0Track) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        cache, self._cache = self._cache, None
        return model_backward(
            waveform_grad, cache, track, self.params, self.layers, self.switches
        )

    @property
    def last_flops(self) -> float:
        return self._cache.flops if self._cache is not None else 0.0
