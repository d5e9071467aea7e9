"""Finite-difference check of the full training loss of a small tagger."""

import numpy as np

from fmim.data import Sentence
from fmim.mi_loss import MiLossConfig, marginal_entropy
from fmim.tagger import PARAM_NAMES, TaggerConfig, forward_batch, init_params
from fmim.train import batch_loss


def small_problem(rng, margin=5e-3, **kw):
    """Random tagger and batch whose ReLU pre-activations all clear ``margin``.

    A central difference straddling a ReLU kink measures nothing useful, so
    draws that come too close to one are rejected.
    """
    while True:
        params, source, target = _draw(rng, **kw)
        if kink_margin(params, source + target) > margin:
            return params, source, target


def kink_margin(params, sentences):
    _, _, cache = forward_batch(params, [s.token_ids for s in sentences])
    pre1 = cache.x @ params["W1"] + params["b1"]
    pre2 = cache.h1 @ params["W2"] + params["b2"]
    return min(np.abs(pre1).min(), np.abs(pre2).min())


def _draw(rng, vocab=12, embed=4, hidden=16, window=1, tags=4, n_src=3, n_tgt=3):
    cfg = TaggerConfig(vocab_size=vocab, num_tags=tags, embed_dim=embed, context_window=window,
                       hidden_dim=hidden, seed=0)
    params = init_params(cfg, rng)
    # spread the outputs so the marginal entropy sits well below ln T
    params["W_out"] *= 4.0
    params["b_out"] += rng.normal(0, 1.5, size=tags)

    def sent(labeled):
        n = int(rng.integers(1, 7))
        ids = rng.integers(0, vocab, size=n).tolist()
        gold = rng.integers(0, tags, size=n).tolist() if labeled else None
        return Sentence([str(i) for i in ids], gold, token_ids=ids)

    return params, [sent(True) for _ in range(n_src)], [sent(False) for _ in range(n_tgt)]


def delta1_of(params, source, target):
    _, probs, _ = forward_batch(params, [s.token_ids for s in source + target])
    return marginal_entropy(probs)


def relative_errors(params, source, target, mi_cfg: MiLossConfig, h=1e-4):
    """Element-wise |analytic - numeric| / max(|analytic| + |numeric|, 1e-7)."""
    analytic = batch_loss(params, source, target, mi_cfg).grads
    flat_a = np.concatenate([analytic[k].ravel() for k in PARAM_NAMES])
    theta = params.flat()
    numeric = np.empty_like(theta)
    for j in range(theta.size):
        old = theta[j]
        theta[j] = old + h
        params.set_flat(theta)
        up = batch_loss(params, source, target, mi_cfg, with_grad=False).total
        theta[j] = old - h
        params.set_flat(theta)
        dn = batch_loss(params, source, target, mi_cfg, with_grad=False).total
        theta[j] = old
        numeric[j] = (up - dn) / (2 * h)
    params.set_flat(theta)
    return np.abs(flat_a - numeric) / np.maximum(np.abs(flat_a) + np.abs(numeric), 1e-7)
