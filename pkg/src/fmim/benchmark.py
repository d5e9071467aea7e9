"""Collapse-and-rescue experiment on the synthetic domain-shift benchmark.

The baseline (``alpha = 0``) is trained on source labels only and tends to
tag unseen target aspects as O; the MI-regularised run should recover
them. Used by the acceptance suite and by ``fmim bench``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .data import SynthConfig, generate_synthetic
from .train import RunConfig, decode, evaluate, train

# desk-scale settings: a from-scratch tagger needs a larger step than a
# pre-trained encoder does
BENCHMARK_RUN = RunConfig(task="ABSA", lr=1e-3, epochs=15, alpha=0.01, rho=0.5)


@dataclass
class BenchResult:
    seed: int
    alpha: float
    rho: float
    precision: float
    recall: float
    micro_f1: float
    ate_f1: float
    o_fraction: float
    seconds: float


def aspect_o_fraction(tags_per_sentence, corpus) -> float:
    """Share of gold aspect tokens that were tagged O."""
    n_aspect = n_o = 0
    for tags, sent in zip(tags_per_sentence, corpus):
        for g, p in zip(sent.gold, tags):
            if g:
                n_aspect += 1
                n_o += p == 0
    return n_o / n_aspect if n_aspect else 0.0


def run_once(seed: int, alpha: float, rho: float, synth: SynthConfig | None = None,
             base: RunConfig = BENCHMARK_RUN) -> BenchResult:
    synth = replace(synth or SynthConfig(), seed=seed)
    source, target, test = generate_synthetic(synth)
    cfg = replace(base, alpha=alpha, rho=rho, seed=seed)
    t0 = time.perf_counter()
    res = train(cfg, source, target)
    absa = evaluate(res.params, res.vocab, test, "ABSA")
    ate = evaluate(res.params, res.vocab, test, "ATE")
    tags = [t for t, _ in decode(res.params, res.vocab, test)]
    return BenchResult(seed, alpha, rho, absa.precision, absa.recall, absa.micro_f1, ate.micro_f1,
                       aspect_o_fraction(tags, test), time.perf_counter() - t0)


def summarize(results: list[BenchResult]) -> dict:
    keys = ("precision", "recall", "micro_f1", "ate_f1", "o_fraction")
    return {k: float(np.mean([getattr(r, k) for r in results])) for k in keys}
