"""The two classifier architectures.

PriorTime: input features (observations + a prior time embedding) through a
self-attention encoder, a decoder that reconstructs the original feature
dimensionality, and a single linear classifier per time step.

MTAN: a time-attention module whose keys are the learnable embedding of the
observed time points and whose queries are the same embedding of a fixed,
equally spaced reference grid; attention re-grids the observations onto the
grid, and a single linear classifier maps the re-gridded features to class
logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Tensor
from .learned import DEFAULT_INIT_SCALE, DEFAULT_PEAK_INDEX, DEFAULT_PERCENTILE, PulseTransformSpec
from .priors import SCHEMES as PRIOR_SCHEMES
from .priors import scheme_feature_names

LEARNED_SCHEMES = ("learned_sine", "learned_pulse")
ALL_SCHEMES = PRIOR_SCHEMES + LEARNED_SCHEMES
TIME_NORMALIZATIONS = ("unix", "hour_index")


@dataclass(frozen=True)
class ModelConfig:
    scheme: str
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 128
    n_classes: int = 5
    time_grid: int = 24
    dropout: float = 0.1
    seed: int = 0
    time_normalization: str = "unix"
    peak_index: int = DEFAULT_PEAK_INDEX
    pulse_percentile: float = DEFAULT_PERCENTILE
    init_scale: float = DEFAULT_INIT_SCALE
    recon_weight: float = 0.0
    n_obs_features: int = 2

    def __post_init__(self):
        if self.scheme not in ALL_SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected {ALL_SCHEMES}")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.time_normalization not in TIME_NORMALIZATIONS:
            raise ValueError(f"time_normalization must be one of {TIME_NORMALIZATIONS}")
        if not 0 <= self.peak_index < self.time_grid:
            raise ValueError("peak_index must index a slot of the time grid")

    @property
    def is_learned(self) -> bool:
        return self.scheme in LEARNED_SCHEMES

    @property
    def time_embed_dim(self) -> int:
        # the matrix algebra ties the embedding length to the output grid size
        return self.time_grid


def reference_grid(time_grid: int) -> np.ndarray:
    """Equally spaced reference time points in [0, 1)."""
    return np.arange(time_grid, dtype=np.float64) / time_grid


def attention(queries, keys, values):
    """Scaled dot-product attention; returns (context, weights).

    Accepts 2D (L, d) or batched arrays with matching leading dimensions.
    """
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(
            f"query dim {q.shape[-1]} does not match key dim {k.shape[-1]}"
        )
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(
            f"key length {k.shape[-2]} does not match value length {v.shape[-2]}"
        )
    scores = np.matmul(q, np.swapaxes(k, -1, -2)) / math.sqrt(q.shape[-1])
    w = kernels.softmax_rows(scores.reshape(-1, scores.shape[-1])).reshape(scores.shape)
    return np.matmul(w, v), w


# ---------------------------------------------------------------------------
# parameter plumbing
# ---------------------------------------------------------------------------

class ParamStore:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: dict[str, Tensor] = {}

    def tensor(self, name: str, array: np.ndarray) -> Tensor:
        t = Tensor(np.asarray(array, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def linear(self, name: str, n_in: int, n_out: int):
        w = self.tensor(name + ".w", self.rng.normal(0.0, 1.0 / math.sqrt(n_in), (n_in, n_out)))
        b = self.tensor(name + ".b", np.zeros(n_out))
        return w, b


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return (x @ w) + b


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = (var + eps) ** -0.5
    return xc * inv * gamma + beta


class Model:
    """Shared parameter-dict plumbing for both architectures."""

    config: ModelConfig
    store: ParamStore

    def parameters(self) -> dict[str, Tensor]:
        return self.store.params

    def param_values(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.store.params.items()}

    def load_param_values(self, values: dict[str, np.ndarray]) -> None:
        missing = set(self.store.params) - set(values)
        if missing:
            raise ValueError(f"checkpoint missing parameters: {sorted(missing)}")
        for name, tensor in self.store.params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != tensor.value.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} vs {tensor.value.shape}"
                )
            tensor.value = arr.copy()

    def zero_grad(self) -> None:
        for t in self.store.params.values():
            t.grad = None

    def time_param_names(self) -> set[str]:
        return {n for n in self.store.params if n.startswith("time.")}


def _mask_bias(mask: np.ndarray, shape_prefix: tuple[int, ...]) -> np.ndarray:
    # additive pre-softmax logits: 0 where observed, large negative where masked
    bias = np.where(np.asarray(mask, dtype=bool), 0.0, ad.MASK_NEG)
    return bias.reshape(shape_prefix + (mask.shape[-1],))


class PriorTimeModel(Model):
    """Encoder -> reconstruction decoder -> per-step linear classifier."""

    def __init__(self, config: ModelConfig):
        if config.scheme not in PRIOR_SCHEMES:
            raise ValueError(f"PriorTime requires a prior scheme, got {config.scheme!r}")
        self.config = config
        self.n_in = config.n_obs_features + len(scheme_feature_names(config.scheme))
        rng = np.random.default_rng(config.seed)
        self.store = ParamStore(rng)
        s = self.store
        self.in_proj = s.linear("in_proj", self.n_in, config.d_model)
        self.enc = [self._block(f"enc{i}") for i in range(config.n_encoder_layers)]
        self.dec = [self._block(f"dec{i}") for i in range(config.n_decoder_layers)]
        self.out_proj = s.linear("out_proj", config.d_model, self.n_in)
        self.classifier = s.linear("classifier", self.n_in, config.n_classes)
        self.initial_values = self.param_values()

    def _block(self, name: str) -> dict:
        s, d = self.store, self.config.d_model
        return {
            "wq": s.linear(f"{name}.attn.q", d, d),
            "wk": s.linear(f"{name}.attn.k", d, d),
            "wv": s.linear(f"{name}.attn.v", d, d),
            "wo": s.linear(f"{name}.attn.o", d, d),
            "ln1": (s.tensor(f"{name}.ln1.g", np.ones(d)), s.tensor(f"{name}.ln1.b", np.zeros(d))),
            "ln2": (s.tensor(f"{name}.ln2.g", np.ones(d)), s.tensor(f"{name}.ln2.b", np.zeros(d))),
            "ff1": s.linear(f"{name}.ff1", d, self.config.d_ff),
            "ff2": s.linear(f"{name}.ff2", self.config.d_ff, d),
        }

    def _self_attention(self, x: Tensor, block: dict, key_bias: np.ndarray) -> Tensor:
        cfg = self.config
        b_sz, s_len, _ = x.shape
        h, dh = cfg.n_heads, cfg.d_model // cfg.n_heads

        def split_heads(t):
            return t.reshape((b_sz, s_len, h, dh)).transpose((0, 2, 1, 3))

        q = split_heads(linear(x, *block["wq"]))
        k = split_heads(linear(x, *block["wk"]))
        v = split_heads(linear(x, *block["wv"]))
        scores = (q @ k.swapaxes(2, 3)) * (1.0 / math.sqrt(dh)) + key_bias
        w = ad.softmax_lastaxis(scores)
        ctx = (w @ v).transpose((0, 2, 1, 3)).reshape((b_sz, s_len, cfg.d_model))
        return linear(ctx, *block["wo"])

    def _stack(self, x: Tensor, blocks, key_bias, train, rng) -> Tensor:
        p = self.config.dropout if train else 0.0
        for blk in blocks:
            a = self._self_attention(x, blk, key_bias)
            x = layer_norm(x + ad.dropout(a, p, rng), *blk["ln1"])
            f = linear(ad.relu(linear(x, *blk["ff1"])), *blk["ff2"])
            x = layer_norm(x + ad.dropout(f, p, rng), *blk["ln2"])
        return x

    def forward(
        self,
        features: np.ndarray,
        mask: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ):
        """features (B, S, n_in) with time-embedding columns already attached.

        Returns (logits (B, S, n_classes), reconstruction (B, S, n_in)).
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 3 or features.shape[2] != self.n_in:
            raise ValueError(
                f"expected features (batch, steps, {self.n_in}), got {features.shape}"
            )
        mask = np.asarray(mask, dtype=bool)
        if mask.sum(axis=1).min() == 0:
            raise ValueError("a sample has all observations masked")
        rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        x = Tensor(np.where(mask[:, :, None], features, 0.0))
        key_bias = _mask_bias(mask, (mask.shape[0], 1, 1))
        x = linear(x, *self.in_proj)
        x = self._stack(x, self.enc, key_bias, train, rng)
        x = self._stack(x, self.dec, key_bias, train, rng)
        recon = linear(x, *self.out_proj)
        logits = linear(recon, *self.classifier)
        return logits, recon


class MTANModel(Model):
    """Time-attention re-gridding followed by a single linear classifier."""

    def __init__(self, config: ModelConfig):
        if config.scheme not in LEARNED_SCHEMES:
            raise ValueError(f"MTAN requires a learned scheme, got {config.scheme!r}")
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.store = ParamStore(rng)
        d = config.time_embed_dim
        for h in range(config.n_heads):
            self.store.tensor(f"time.h{h}.omega", rng.uniform(-config.init_scale, config.init_scale, d))
            self.store.tensor(f"time.h{h}.alpha", rng.uniform(-config.init_scale, config.init_scale, d))
        self.classifier = self.store.linear(
            "classifier", config.n_heads * config.n_obs_features, config.n_classes
        )
        self.grid = reference_grid(config.time_grid)
        self.pulse_spec = PulseTransformSpec(config.peak_index, config.pulse_percentile)
        self.initial_values = self.param_values()

    def head_params(self, h: int) -> tuple[Tensor, Tensor]:
        return self.store.params[f"time.h{h}.omega"], self.store.params[f"time.h{h}.alpha"]

    def _embed_keys(self, times_flat: np.ndarray, b_sz: int, s_len: int, h: int) -> Tensor:
        omega, alpha = self.head_params(h)
        if self.config.scheme == "learned_sine":
            return ad.time_embedding(times_flat, omega, alpha).reshape(
                (b_sz, s_len, self.config.time_embed_dim)
            )
        # learned_pulse: raw linear pre-activations, pulse over each
        # representation's vector of values across the day's slots
        u = Tensor(times_flat[:, None]) * omega + alpha
        u = u.reshape((b_sz, s_len, self.config.time_embed_dim))
        lin = u[:, :, 0:1]
        per = u[:, :, 1:].transpose((0, 2, 1))
        per = per.reshape((b_sz * (self.config.time_embed_dim - 1), s_len))
        per = ad.pulse_rows(per, self.pulse_spec)
        per = per.reshape((b_sz, self.config.time_embed_dim - 1, s_len)).transpose((0, 2, 1))
        return ad.concat([lin, per], axis=2)

    def _embed_grid(self, h: int) -> Tensor:
        omega, alpha = self.head_params(h)
        if self.config.scheme == "learned_sine":
            return ad.time_embedding(self.grid, omega, alpha)
        u = Tensor(self.grid[:, None]) * omega + alpha
        lin = u[:, 0:1]
        per = ad.pulse_rows(u[:, 1:].transpose((1, 0)), self.pulse_spec).transpose((1, 0))
        return ad.concat([lin, per], axis=1)

    def time_attention(
        self,
        times: np.ndarray,
        features: np.ndarray,
        mask: np.ndarray,
        return_weights: bool = False,
    ):
        """Re-grid observed (times, features, mask) onto the reference grid.

        Returns the latent (B, G, n_heads * F) tensor, and the per-head
        attention weight arrays if requested.
        """
        times = np.asarray(times, dtype=np.float64)
        features = np.asarray(features, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if times.ndim != 2 or features.shape[:2] != times.shape or mask.shape != times.shape:
            raise ValueError("times (B,S), features (B,S,F) and mask (B,S) must align")
        if mask.sum(axis=1).min() == 0:
            raise ValueError("a sample has all observations masked")
        b_sz, s_len = times.shape
        cfg = self.config
        if cfg.scheme == "learned_pulse" and s_len != cfg.time_grid:
            raise ValueError(
                "learned_pulse keys must cover the full slot grid "
                f"({cfg.time_grid} slots), got {s_len}"
            )
        scale = 1.0 / math.sqrt(cfg.time_embed_dim)
        key_bias = _mask_bias(mask, (b_sz, 1))
        x_vals = Tensor(np.where(mask[:, :, None], features, 0.0))
        heads = []
        weights = []
        for h in range(cfg.n_heads):
            k = self._embed_keys(times.reshape(-1), b_sz, s_len, h)
            q = self._embed_grid(h)
            scores = (q @ k.swapaxes(1, 2)) * scale + key_bias
            w = ad.softmax_lastaxis(scores)
            if return_weights:
                weights.append(w.value.copy())
            heads.append(w @ x_vals)
        latent = ad.concat(heads, axis=2)
        return (latent, weights) if return_weights else latent

    def forward(
        self,
        times: np.ndarray,
        features: np.ndarray,
        mask: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Class logits on the reference grid: (B, time_grid, n_classes)."""
        latent = self.time_attention(times, features, mask)
        if train and self.config.dropout > 0.0:
            rng = rng if rng is not None else np.random.default_rng(self.config.seed)
            latent = ad.dropout(latent, self.config.dropout, rng)
        return linear(latent, *self.classifier)


def build_model(config: ModelConfig):
    if config.scheme in PRIOR_SCHEMES:
        return PriorTimeModel(config)
    return MTANModel(config)
