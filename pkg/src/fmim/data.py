"""Corpora, CoNLL I/O, vocabulary, joint batch sampling and the synthetic benchmark."""

from __future__ import annotations

import io
import warnings
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from .errors import ConfigError, FormatError, InvalidSequenceError, ParseError
from .tagging import Span, TagScheme, extract_spans, spans_to_tags, unified_scheme
from .tagger import BOUNDARY_ID, UNK_ID

SOURCE = "source"
TARGET = "target"
UNK = "<unk>"
BOUNDARY = "<s>"


@dataclass
class Sentence:
    tokens: list[str]
    gold: list[int] | None = None
    domain: str = SOURCE
    token_ids: list[int] | None = None

    def __post_init__(self):
        if self.gold is not None and len(self.gold) != len(self.tokens):
            raise ValueError("gold tags and tokens differ in length")
        if self.token_ids is not None and len(self.token_ids) != len(self.tokens):
            raise ValueError("token ids and tokens differ in length")

    def __len__(self):
        return len(self.tokens)

    @property
    def labeled(self) -> bool:
        return self.gold is not None


@dataclass
class Corpus:
    sentences: list[Sentence]
    scheme: TagScheme

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    @property
    def stats(self) -> dict:
        n = len(self.sentences)
        return {
            "sentences": n,
            "tokens": sum(len(s) for s in self.sentences),
            "labeled_fraction": (sum(s.labeled for s in self.sentences) / n) if n else 0.0,
        }

    @property
    def labeled(self) -> bool:
        return bool(self.sentences) and all(s.labeled for s in self.sentences)

    def spans(self) -> list[list[Span]]:
        return [extract_spans(s.gold, self.scheme) for s in self.sentences]


# -- CoNLL ---------------------------------------------------------------------


def parse_conll(
    source: str | TextIO, scheme: TagScheme, labeled: bool = True, domain: str = SOURCE
) -> Corpus:
    """Read ``token<TAB>label`` (or bare ``token``) lines; blank lines end sentences."""
    text = source if isinstance(source, str) else source.read()
    sentences: list[Sentence] = []
    tokens: list[str] = []
    tags: list[int] = []
    ncols = None

    def flush():
        if tokens:
            sentences.append(Sentence(list(tokens), list(tags) if labeled else None, domain))
            tokens.clear()
            tags.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        cols = line.split("\t")
        if ncols is None:
            ncols = len(cols)
            if ncols not in (1, 2):
                raise FormatError(f"expected 1 or 2 tab-separated columns, got {ncols}", lineno)
            if ncols != (2 if labeled else 1):
                kind = "labeled" if labeled else "unlabeled"
                raise FormatError(f"{ncols}-column line in a {kind} file", lineno)
        elif len(cols) != ncols:
            raise FormatError(f"mixed column counts ({len(cols)} vs {ncols})", lineno)
        tokens.append(cols[0])
        if labeled:
            try:
                tags.append(scheme.tag_id(cols[1]))
            except InvalidSequenceError:
                raise ParseError(f"unknown label {cols[1]!r} for {scheme.name} scheme", lineno) from None
    flush()
    return Corpus(sentences, scheme)


def write_conll(corpus: Corpus, out: TextIO | None = None) -> str:
    buf = io.StringIO()
    for s in corpus.sentences:
        if s.gold is None:
            for tok in s.tokens:
                buf.write(f"{tok}\n")
        else:
            for tok, t in zip(s.tokens, s.gold):
                buf.write(f"{tok}\t{corpus.scheme.tags[t]}\n")
        buf.write("\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_conll_file(path, scheme: TagScheme, labeled: bool = True, domain: str = SOURCE) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_conll(fh, scheme, labeled, domain)


def write_conll_file(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_conll(corpus, fh)


# -- vocabulary ----------------------------------------------------------------


class Vocab:
    """Lower-cased token vocabulary; id 0 is UNK and id 1 the sentence boundary."""

    def __init__(self, itos: Sequence[str]):
        if list(itos[:2]) != [UNK, BOUNDARY]:
            raise ValueError("vocab must start with the reserved UNK and BOUNDARY entries")
        self.itos = list(itos)
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token.lower() in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def lookup(self, token: str) -> int:
        return self.stoi.get(token.lower(), UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.lookup(t) for t in tokens]

    def encode_corpus(self, corpus: Corpus) -> Corpus:
        for s in corpus.sentences:
            s.token_ids = self.encode(s.tokens)
        return corpus


def build_vocab(corpora: Iterable[Corpus], min_count: int = 1) -> Vocab:
    """Tokens seen at least ``min_count`` times, by count then first occurrence."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    first: dict[str, int] = {}
    for corpus in corpora:
        for s in corpus.sentences:
            for tok in s.tokens:
                tok = tok.lower()
                counts[tok] += 1
                first.setdefault(tok, len(first))
    kept = [t for t in counts if counts[t] >= min_count and t not in (UNK, BOUNDARY)]
    kept.sort(key=lambda t: (-counts[t], first[t]))
    assert UNK_ID == 0 and BOUNDARY_ID == 1
    return Vocab([UNK, BOUNDARY] + kept)


# -- batching ------------------------------------------------------------------


def _cycle(items: Sequence, rng: np.random.Generator) -> Iterator:
    while True:
        for j in rng.permutation(len(items)):
            yield items[j]


def make_batches(
    source: Sequence[Sentence],
    target: Sequence[Sentence],
    batch_size: int,
    rng: np.random.Generator,
    epochs: int = 1,
) -> Iterator[tuple[list[Sentence], list[Sentence]]]:
    """Yield ``(B_s, B_t)`` pairs.

    Each epoch is one shuffled pass over ``source`` in chunks of
    ``batch_size``; the matching target batch has the same number of
    sentences, drawn from a reshuffling cycle over ``target`` that persists
    across epochs.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if len(source) == 0:
        raise ConfigError("source corpus is empty")
    if len(target) == 0:
        raise ConfigError("target corpus is empty; mutual information training needs target data")
    target_rng = np.random.default_rng(rng.integers(2**63))
    target_iter = _cycle(target, target_rng)
    for _ in range(epochs):
        order = rng.permutation(len(source))
        for i in range(0, len(source), batch_size):
            bs = [source[j] for j in order[i : i + batch_size]]
            yield bs, [next(target_iter) for _ in bs]


# -- synthetic benchmark -------------------------------------------------------


def _words(prefix: str, n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


@dataclass
class SynthConfig:
    """Generator settings for the synthetic domain-shift benchmark.

    Sentences are filler tokens from a vocabulary shared by both domains,
    with embedded aspect phrases drawn from a per-domain lexicon. Each phrase
    sits next to a cue word whose polarity decides the phrase's sentiment;
    cue words are shared, so the cue is the only signal that transfers.
    """

    n_source_train: int = 400
    n_target_unlabeled: int = 400
    n_target_test: int = 200
    shared_vocab_size: int = 200
    source_aspect_lexicon_size: int = 15
    target_aspect_lexicon_size: int = 40
    cues_per_sentiment: int = 4
    aspect_len_range: tuple[int, int] = (1, 3)
    aspects_per_sentence: tuple[int, int] = (0, 2)
    sentence_len_range: tuple[int, int] = (10, 20)
    sentiment_distribution: tuple[float, float, float] = (0.5, 0.2, 0.3)
    cue_before_prob: float = 0.7
    distractor_cue_prob: float = 0.0
    seed: int = 0
    source_lexicon: tuple[str, ...] | None = None
    target_lexicon: tuple[str, ...] | None = None

    def validate(self) -> None:
        for name in ("n_source_train", "n_target_unlabeled", "n_target_test", "shared_vocab_size",
                     "source_aspect_lexicon_size", "target_aspect_lexicon_size", "cues_per_sentiment"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        lo, hi = self.aspect_len_range
        if not 1 <= lo <= hi:
            raise ConfigError("aspect_len_range must satisfy 1 <= lo <= hi")
        lo, hi = self.aspects_per_sentence
        if not 0 <= lo <= hi:
            raise ConfigError("aspects_per_sentence must satisfy 0 <= lo <= hi")
        lo, hi = self.sentence_len_range
        if not 1 <= lo <= hi:
            raise ConfigError("sentence_len_range must satisfy 1 <= lo <= hi")
        dist = np.asarray(self.sentiment_distribution, dtype=float)
        if dist.shape != (3,) or np.any(dist < 0) or abs(dist.sum() - 1) > 1e-9:
            raise ConfigError("sentiment_distribution must be 3 probabilities summing to 1")
        for name in ("cue_before_prob", "distractor_cue_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
        overlap = set(self.lexicons()[0]) & set(self.lexicons()[1])
        if overlap:
            raise ConfigError(f"source and target aspect lexicons overlap: {sorted(overlap)[:5]}")

    def lexicons(self) -> tuple[list[str], list[str]]:
        src = list(self.source_lexicon) if self.source_lexicon else _words("src", self.source_aspect_lexicon_size)
        tgt = list(self.target_lexicon) if self.target_lexicon else _words("tgt", self.target_aspect_lexicon_size)
        return src, tgt

    def filler(self) -> list[str]:
        return _words("w", self.shared_vocab_size)

    def cues(self) -> dict[str, list[str]]:
        return {lab: _words(f"{lab.lower()}cue", self.cues_per_sentiment) for lab in ("POS", "NEU", "NEG")}

    def to_kv(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            out[f.name] = ",".join(map(str, v)) if isinstance(v, tuple) else str(v)
        return out

    @classmethod
    def from_kv(cls, kv: dict[str, str]) -> "SynthConfig":
        base = cls()
        kwargs = {}
        for f in fields(cls):
            if f.name not in kv:
                continue
            raw = kv[f.name]
            default = getattr(base, f.name)
            if f.name in ("source_lexicon", "target_lexicon"):
                kwargs[f.name] = tuple(x for x in raw.split(",") if x)
            elif isinstance(default, tuple):
                kind = float if isinstance(default[0], float) else int
                kwargs[f.name] = tuple(kind(x) for x in raw.split(","))
            elif isinstance(default, float):
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = int(raw)
        unknown = set(kv) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**kwargs)


def _filler_token(cfg, rng, filler, cues):
    # a stray cue word outside any aspect phrase keeps the cue from being a sufficient signal
    if cfg.distractor_cue_prob and rng.random() < cfg.distractor_cue_prob:
        label = ("POS", "NEU", "NEG")[rng.choice(3, p=cfg.sentiment_distribution)]
        return cues[label][int(rng.integers(len(cues[label])))]
    return filler[int(rng.integers(len(filler)))]


def _synth_sentence(cfg: SynthConfig, rng: np.random.Generator, lexicon, filler, cues, scheme):
    labels = ("POS", "NEU", "NEG")
    n_aspects = int(rng.integers(cfg.aspects_per_sentence[0], cfg.aspects_per_sentence[1] + 1))
    # each aspect phrase is a unit of (cue + aspect tokens); units are separated by filler
    units = []
    for _ in range(n_aspects):
        label = labels[rng.choice(3, p=cfg.sentiment_distribution)]
        k = int(rng.integers(cfg.aspect_len_range[0], cfg.aspect_len_range[1] + 1))
        aspect = [lexicon[j] for j in rng.integers(0, len(lexicon), size=k)]
        cue = cues[label][int(rng.integers(len(cues[label])))]
        before = rng.random() < cfg.cue_before_prob
        units.append((label, aspect, cue, before))
    min_len = sum(len(u[1]) + 1 for u in units) + max(len(units) - 1, 0)
    length = max(int(rng.integers(cfg.sentence_len_range[0], cfg.sentence_len_range[1] + 1)), min_len)
    n_filler = length - sum(len(u[1]) + 1 for u in units)
    # place units into gaps between filler tokens, at least one filler between units
    gaps = np.sort(rng.choice(n_filler + 1, size=len(units), replace=False)) if units else []
    tokens: list[str] = []
    spans: list[Span] = []
    f_used = 0
    for (label, aspect, cue, before), gap in zip(units, gaps):
        while f_used < gap:
            tokens.append(_filler_token(cfg, rng, filler, cues))
            f_used += 1
        if before:
            tokens.append(cue)
        spans.append(Span(len(tokens), len(tokens) + len(aspect), label))
        tokens.extend(aspect)
        if not before:
            tokens.append(cue)
    while f_used < n_filler:
        tokens.append(_filler_token(cfg, rng, filler, cues))
        f_used += 1
    return tokens, spans_to_tags(spans, len(tokens), scheme)


def generate_synthetic(cfg: SynthConfig | None = None) -> tuple[Corpus, Corpus, Corpus]:
    """Return ``(source_train, target_unlabeled, target_test)``.

    Source sentences only use the source aspect lexicon and target sentences
    only the target one; the cue-word to sentiment mapping is shared.
    """
    cfg = cfg or SynthConfig()
    cfg.validate()
    scheme = unified_scheme()
    src_lex, tgt_lex = cfg.lexicons()
    filler, cues = cfg.filler(), cfg.cues()
    root = np.random.SeedSequence(cfg.seed)
    rng_s, rng_u, rng_t = (np.random.default_rng(s) for s in root.spawn(3))

    def make(n, rng, lexicon, domain, labeled):
        out = []
        for _ in range(n):
            tokens, tags = _synth_sentence(cfg, rng, lexicon, filler, cues, scheme)
            out.append(Sentence(tokens, tags if labeled else None, domain))
        return Corpus(out, scheme)

    return (
        make(cfg.n_source_train, rng_s, src_lex, SOURCE, True),
        make(cfg.n_target_unlabeled, rng_u, tgt_lex, TARGET, False),
        make(cfg.n_target_test, rng_t, tgt_lex, TARGET, True),
    )


def truncate(corpus: Corpus, max_len: int) -> Corpus:
    """Copy of ``corpus`` with every sentence cut to ``max_len`` tokens."""
    out = []
    for s in corpus.sentences:
        if len(s) > max_len:
            warnings.warn(f"sentence of {len(s)} tokens truncated to {max_len}", stacklevel=2)
        out.append(Sentence(s.tokens[:max_len], None if s.gold is None else s.gold[:max_len], s.domain,
                            None if s.token_ids is None else s.token_ids[:max_len]))
    return Corpus(out, corpus.scheme)

