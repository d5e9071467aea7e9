"""Window-MLP sequence tagger with hand-written backward pass.

Each token is represented by the concatenation of the embeddings of the
``2w + 1`` tokens centred on it (positions outside the sentence read the
reserved boundary row), followed by two ReLU layers and a softmax over the
tag set::

    x_i  = [E[t_{i-w}], ..., E[t_i], ..., E[t_{i+w}]]
    h1   = relu(x W1 + b1)
    h2   = relu(h1 W2 + b2)
    p_i  = softmax(h2 W_out + b_out)

A whole mini-batch is run as one stacked ``N x (2w+1)D`` matrix; the row
order is the sentence order, which is also the row order of the MI matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import StaleCacheError, UnlabeledSentenceError, VocabError

UNK_ID = 0
BOUNDARY_ID = 1
PARAM_NAMES = ("embeddings", "W1", "b1", "W2", "b2", "W_out", "b_out")


@dataclass(frozen=True)
class TaggerConfig:
    vocab_size: int
    num_tags: int
    embed_dim: int = 64
    context_window: int = 1
    hidden_dim: int = 384
    num_layers: int = 2
    max_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.num_layers != 2:
            raise ValueError("the tagger head has exactly two hidden layers")
        for name in ("vocab_size", "num_tags", "embed_dim", "hidden_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must include the UNK and BOUNDARY rows")
        if self.context_window < 0:
            raise ValueError("context_window must be >= 0")

    @property
    def input_dim(self) -> int:
        return (2 * self.context_window + 1) * self.embed_dim

    def to_dict(self) -> dict:
        return asdict(self)


class ModelParams(dict):
    """Parameter arrays by name, plus the config and an update counter.

    ``version`` is bumped by every in-place update so that a forward cache
    can tell whether it was computed with the current values.
    """

    def __init__(self, config: TaggerConfig, arrays=None):
        super().__init__(arrays or {})
        self.config = config
        self.version = 0

    def num_parameters(self) -> int:
        return sum(a.size for a in self.values())

    def copy(self) -> "ModelParams":
        new = ModelParams(self.config, {k: v.copy() for k, v in self.items()})
        new.version = self.version
        return new

    def flat(self) -> np.ndarray:
        return np.concatenate([self[k].ravel() for k in PARAM_NAMES])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for k in PARAM_NAMES:
            n = self[k].size
            self[k][...] = vec[pos : pos + n].reshape(self[k].shape)
            pos += n
        self.version += 1


def init_params(cfg: TaggerConfig, rng: np.random.Generator | None = None) -> ModelParams:
    """Uniform fan-in initialisation; embeddings uniform in [-0.1, 0.1]."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    def affine(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = rng.uniform(-bound, bound, size=fan_out)
        return W, b

    p = ModelParams(cfg)
    p["embeddings"] = rng.uniform(-0.1, 0.1, size=(cfg.vocab_size, cfg.embed_dim))
    p["W1"], p["b1"] = affine(cfg.input_dim, cfg.hidden_dim)
    p["W2"], p["b2"] = affine(cfg.hidden_dim, cfg.hidden_dim)
    p["W_out"], p["b_out"] = affine(cfg.hidden_dim, cfg.num_tags)
    return p


def zeros_like(params: ModelParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    window_ids: np.ndarray
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    probs: np.ndarray
    offsets: np.ndarray
    version: int
    params_id: int

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def split(self, arr: np.ndarray | None = None) -> list[np.ndarray]:
        """Per-sentence views of a row-aligned array (default: the probabilities)."""
        arr = self.probs if arr is None else arr
        return [arr[a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]


def _window_ids(seqs: Sequence[np.ndarray], w: int) -> np.ndarray:
    rows = []
    offs = np.arange(-w, w + 1)
    for ids in seqs:
        padded = np.concatenate([np.full(w, BOUNDARY_ID), ids, np.full(w, BOUNDARY_ID)])
        rows.append(padded[np.arange(len(ids))[:, None] + w + offs[None, :]])
    if not rows:
        return np.zeros((0, 2 * w + 1), dtype=np.int64)
    return np.concatenate(rows, axis=0).astype(np.int64)


def forward_batch(params: ModelParams, seqs: Sequence[Sequence[int]]):
    """Run the tagger on several sentences at once.

    Returns ``(logits, probs, cache)`` where logits and probs are stacked
    ``N x T`` arrays; use ``cache.split`` to recover per-sentence blocks.
    Sentences longer than ``max_len`` are truncated with a warning.
    """
    cfg = params.config
    clean = []
    for ids in seqs:
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
            raise VocabError(f"token id out of range for vocab of size {cfg.vocab_size}")
        if ids.size > cfg.max_len:
            warnings.warn(f"sentence of {ids.size} tokens truncated to {cfg.max_len}", stacklevel=2)
            ids = ids[: cfg.max_len]
        clean.append(ids)
    win = _window_ids(clean, cfg.context_window)
    x = params["embeddings"][win].reshape(len(win), cfg.input_dim)
    h1 = np.maximum(x @ params["W1"] + params["b1"], 0.0)
    h2 = np.maximum(h1 @ params["W2"] + params["b2"], 0.0)
    logits = h2 @ params["W_out"] + params["b_out"]
    probs = softmax(logits)
    offsets = np.concatenate([[0], np.cumsum([len(s) for s in clean])]).astype(np.int64)
    cache = ForwardCache(win, x, h1, h2, probs, offsets, params.version, id(params))
    return logits, probs, cache


def forward(params: ModelParams, tokens: Sequence[int]):
    """Single-sentence forward pass; see :func:`forward_batch`."""
    return forward_batch(params, [tokens])


def cross_entropy(probs, gold, n_total: int | None = None, epsilon: float = 1e-12):
    """Token-mean cross entropy and its gradient w.r.t. the logits.

    ``n_total`` is the number of labelled tokens the mean is taken over; it
    defaults to the number of rows in ``probs``. The logit gradient uses the
    ``probs - onehot`` identity.
    """
    if gold is None:
        raise UnlabeledSentenceError("cross entropy needs gold tags")
    probs = np.asarray(probs, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape[0] != probs.shape[0]:
        raise ValueError(f"gold length {gold.shape[0]} != {probs.shape[0]} predicted rows")
    n = probs.shape[0] if n_total is None else n_total
    rows = np.arange(probs.shape[0])
    loss = float(-np.sum(np.log(np.maximum(probs[rows, gold], epsilon))) / n)
    dlogits = probs.copy()
    dlogits[rows, gold] -= 1.0
    return loss, dlogits / n


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Chain rule through a row-wise softmax: dL/dz from dL/dp."""
    return probs * (dprobs - np.sum(probs * dprobs, axis=1, keepdims=True))


def backward(
    cache: ForwardCache,
    params: ModelParams,
    dlogits: np.ndarray | None = None,
    dprobs: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of the loss w.r.t. every parameter.

    ``dlogits`` and ``dprobs`` are both optional ``N x T`` seeds; the
    probability seed is pushed through the softmax Jacobian and the two are
    summed before back-propagating through the network.
    """
    if cache.version != params.version or cache.params_id != id(params):
        raise StaleCacheError("forward cache was computed with different parameter values")
    N, T = cache.probs.shape
    dz = np.zeros((N, T))
    if dlogits is not None:
        dz += dlogits
    if dprobs is not None:
        dz += softmax_backward(cache.probs, dprobs)

    g = {}
    g["W_out"] = cache.h2.T @ dz
    g["b_out"] = dz.sum(axis=0)
    dh2 = (dz @ params["W_out"].T) * (cache.h2 > 0)
    g["W2"] = cache.h1.T @ dh2
    g["b2"] = dh2.sum(axis=0)
    dh1 = (dh2 @ params["W2"].T) * (cache.h1 > 0)
    g["W1"] = cache.x.T @ dh1
    g["b1"] = dh1.sum(axis=0)
    dx = (dh1 @ params["W1"].T).reshape(-1, params.config.embed_dim)
    emb = np.zeros_like(params["embeddings"])
    np.add.at(emb, cache.window_ids.ravel(), dx)
    g["embeddings"] = emb
    return g


def predict(probs: np.ndarray) -> np.ndarray:
    """Per-token argmax; ties go to the lowest tag index."""
    return np.argmax(np.asarray(probs), axis=-1)
