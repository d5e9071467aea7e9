"""Joint source/target training loop, decoding and evaluation."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import optim
from .data import Corpus, Sentence, Vocab, build_vocab, make_batches
from .errors import ConfigError, NonFiniteLossError
from .eval import ScoreReport, score_spans
from .mi_loss import MiLossConfig, MiLossResult, combine_losses, mi_loss_and_grad
from .rng import derive_rng
from .tagger import ModelParams, TaggerConfig, backward, cross_entropy, forward_batch, init_params, predict
from .tagging import TagScheme, extract_spans, scheme_for_task

log = logging.getLogger(__name__)

TASKS = ("ABSA", "ATE", "NER")
DEFAULT_EPOCHS = {"ABSA": 20, "ATE": 20, "NER": 3}


@dataclass
class RunConfig:
    """Every knob of a training run, flat so it maps onto ``key=value`` files."""

    task: str = "ABSA"
    source_train: str | None = None
    target_unlabeled: str | None = None
    target_test: str | None = None
    output_dir: str = "runs/fmim"
    # tagger
    embed_dim: int = 64
    context_window: int = 1
    hidden_dim: int = 384
    max_len: int = 128
    min_count: int = 1
    # optimizer
    lr: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    # MI loss
    alpha: float = 0.01
    rho: float = 0.5
    epsilon: float = 1e-12
    # schedule
    batch_size: int = 16
    epochs: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.task = self.task.upper()
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.epochs is None:
            self.epochs = DEFAULT_EPOCHS[self.task]
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def scheme(self) -> TagScheme:
        return scheme_for_task(self.task)

    def optim_config(self) -> optim.OptimConfig:
        return optim.OptimConfig(self.lr, self.beta1, self.beta2, self.adam_eps, self.weight_decay)

    def mi_config(self) -> MiLossConfig:
        cfg = MiLossConfig(self.alpha, self.rho, self.epsilon)
        cfg.validate(self.scheme.num_tags)
        return cfg

    def tagger_config(self, vocab_size: int) -> TaggerConfig:
        return TaggerConfig(
            vocab_size=vocab_size,
            num_tags=self.scheme.num_tags,
            embed_dim=self.embed_dim,
            context_window=self.context_window,
            hidden_dim=self.hidden_dim,
            max_len=self.max_len,
            seed=self.seed,
        )

    def to_kv(self) -> dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_kv(cls, kv: dict) -> "RunConfig":
        """Build from ``key=value`` strings; missing keys keep their defaults."""
        names = {f.name for f in fields(cls)}
        unknown = set(kv) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        defaults = cls()
        values = {}
        for k, raw in kv.items():
            if not isinstance(raw, str):
                values[k] = raw
                continue
            raw = raw.strip()
            default = getattr(defaults, k)
            try:
                if raw in ("", "None") and k != "task":
                    values[k] = None
                elif isinstance(default, float):
                    values[k] = float(raw)
                elif isinstance(default, int):
                    values[k] = int(raw)
                else:
                    values[k] = raw
            except ValueError:
                raise ConfigError(f"bad value for {k}: {raw!r}") from None
        return cls(**values)


def read_kv(path) -> dict[str, str]:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_kv(path, kv: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in kv.items():
            fh.write(f"{k}={v}\n")


# -- one step ------------------------------------------------------------------


@dataclass
class StepOutput:
    ce: float
    mi: MiLossResult
    total: float
    grads: dict[str, np.ndarray] | None


def batch_loss(
    params: ModelParams,
    source: Sequence[Sentence],
    target: Sequence[Sentence],
    mi_cfg: MiLossConfig,
    with_grad: bool = True,
) -> StepOutput:
    """Combined loss on one ``(B_s, B_t)`` pair and, optionally, its gradients.

    Cross entropy is averaged over the labelled source tokens only; the MI
    term sees the rows of both batches.
    """
    seqs = [s.token_ids for s in source] + [s.token_ids for s in target]
    _, probs, cache = forward_batch(params, seqs)
    lengths = cache.lengths
    n_src = int(cache.offsets[len(source)])
    gold = np.concatenate(
        [np.asarray(s.gold[: n], dtype=np.int64) for s, n in zip(source, lengths[: len(source)])]
    ) if source else np.zeros(0, dtype=np.int64)
    ce, d_ce = cross_entropy(probs[:n_src], gold, epsilon=mi_cfg.epsilon)
    mi = mi_loss_and_grad(probs, mi_cfg)
    total = combine_losses(ce, mi, mi_cfg.alpha)
    grads = None
    if with_grad:
        dlogits = np.zeros_like(probs)
        dlogits[:n_src] = d_ce
        dprobs = mi_cfg.alpha * mi.grad_M if mi_cfg.alpha > 0 else None
        grads = backward(cache, params, dlogits=dlogits, dprobs=dprobs)
    return StepOutput(ce, mi, total, grads)


# -- training ------------------------------------------------------------------


@dataclass
class TrainResult:
    params: ModelParams
    vocab: Vocab
    scheme: TagScheme
    optim_state: optim.OptimState
    log: list[dict] = field(default_factory=list)


def _dump_batch(path, source, target, exc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "error": str(exc),
                "source": [{"tokens": s.tokens, "gold": s.gold} for s in source],
                "target": [{"tokens": s.tokens} for s in target],
            },
            fh,
            indent=1,
        )


def train(
    cfg: RunConfig,
    source: Corpus,
    target: Corpus,
    on_step: Callable[[dict], None] | None = None,
    dump_dir: str | Path | None = None,
) -> TrainResult:
    """Train a fresh tagger on labelled ``source`` and unlabelled ``target``.

    All randomness derives from ``cfg.seed``. Raises
    :class:`NonFiniteLossError` (after writing the offending batch to
    ``dump_dir`` when given) if the loss stops being finite.
    """
    if not source.labeled:
        raise ConfigError("source corpus must be fully labelled")
    mi_cfg = cfg.mi_config()
    opt_cfg = cfg.optim_config()
    vocab = build_vocab([source, target], cfg.min_count)
    for corpus in (source, target):
        vocab.encode_corpus(corpus)
    params = init_params(cfg.tagger_config(len(vocab)), derive_rng(cfg.seed, "init"))
    state = optim.init_state(params)
    batches = make_batches(source.sentences, target.sentences, cfg.batch_size,
                           derive_rng(cfg.seed, "batches"), cfg.epochs)
    steps_per_epoch = math.ceil(len(source) / cfg.batch_size)
    records = []
    for i, (bs, bt) in enumerate(batches):
        try:
            out = batch_loss(params, bs, bt, mi_cfg)
            optim.step(params, out.grads, state, opt_cfg)
        except FloatingPointError as exc:
            if dump_dir is not None:
                _dump_batch(Path(dump_dir) / "nonfinite_batch.json", bs, bt, exc)
            raise NonFiniteLossError(f"step {i + 1}: {exc}") from exc
        rec = {
            "step": i + 1,
            "epoch": i // steps_per_epoch + 1,
            "ce": out.ce,
            "delta1": out.mi.delta1,
            "delta2": out.mi.delta2,
            "mi_loss": out.mi.loss,
            "branch": out.mi.branch.value,
            "total": out.total,
        }
        records.append(rec)
        if on_step is not None:
            on_step(rec)
    return TrainResult(params, vocab, source.scheme, state, records)


# -- decoding and scoring ------------------------------------------------------


def decode(params: ModelParams, vocab: Vocab, corpus: Corpus, batch_size: int = 64):
    """Per-sentence ``(tags, probs)``; tokens past ``max_len`` are tagged O."""
    out = []
    sents = corpus.sentences
    for i in range(0, len(sents), batch_size):
        chunk = sents[i : i + batch_size]
        seqs = [vocab.encode(s.tokens)[: params.config.max_len] for s in chunk]
        _, _, cache = forward_batch(params, seqs)
        for s, p in zip(chunk, cache.split()):
            tags = predict(p).tolist() + [0] * (len(s) - len(p))
            out.append((tags, p))
    return out


def evaluate(params: ModelParams, vocab: Vocab, corpus: Corpus, mode: str) -> ScoreReport:
    scheme = corpus.scheme
    pred = [extract_spans(tags, scheme) for tags, _ in decode(params, vocab, corpus)]
    return score_spans(pred, corpus.spans(), mode)


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **changes)
