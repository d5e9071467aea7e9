"""Span-level micro-F1 and per-sentence entropy diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import AlignmentError
from .mi_loss import DEFAULT_EPSILON, marginal_entropy, neg_conditional_entropy
from .tagger import predict
from .tagging import Span, TagScheme, extract_spans

MODES = ("ABSA", "ATE", "NER")


@dataclass
class ScoreReport:
    true_positives: int
    predicted: int
    gold: int
    precision: float
    recall: float
    micro_f1: float
    mode: str

    def to_dict(self) -> dict:
        return asdict(self)


def _key(span: Span, mode: str):
    return (span[0], span[1]) if mode == "ATE" else (span[0], span[1], span[2])


def score_spans(
    pred: Sequence[Sequence[Span]], gold: Sequence[Sequence[Span]], mode: str = "ABSA"
) -> ScoreReport:
    """Micro-averaged exact-match scoring.

    ABSA and NER need start, end and label to agree; ATE ignores the label.
    Duplicate spans within a sentence count once.
    """
    mode = mode.upper()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if len(pred) != len(gold):
        raise AlignmentError(f"{len(pred)} predicted sentences vs {len(gold)} gold sentences")
    tp = n_pred = n_gold = 0
    for p, g in zip(pred, gold):
        p_keys = {_key(s, mode) for s in p}
        g_keys = {_key(s, mode) for s in g}
        tp += len(p_keys & g_keys)
        n_pred += len(p_keys)
        n_gold += len(g_keys)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ScoreReport(tp, n_pred, n_gold, precision, recall, f1, mode)


@dataclass
class SentenceDiagnostics:
    H_y: float
    H_y_given_x: float
    mi: float
    spans: list[Span]

    def to_dict(self) -> dict:
        return {
            "H_y": self.H_y,
            "H_y_given_x": self.H_y_given_x,
            "mi": self.mi,
            "spans": [list(s) for s in self.spans],
        }


def sentence_diagnostics(
    probs: np.ndarray, scheme: TagScheme, epsilon: float = DEFAULT_EPSILON
) -> SentenceDiagnostics:
    """Entropy of the mean prediction, mean entropy and their gap for one sentence."""
    h_y = marginal_entropy(probs, epsilon)
    h_y_x = -neg_conditional_entropy(probs, epsilon)
    spans = extract_spans(predict(probs).tolist(), scheme)
    return SentenceDiagnostics(h_y, h_y_x, h_y - h_y_x, spans)


def format_diagnostics_table(rows: Sequence[tuple[Sequence[str], SentenceDiagnostics]]) -> str:
    """Plain-text table: one block per sentence, one line of numbers under it."""
    lines = []
    header = f"{'H(Y)':>8} {'H(Y|X)':>8} {'I(X;Y)':>8}  Predictions"
    for tokens, d in rows:
        lines.append("Sentence: " + " ".join(tokens))
        lines.append(header)
        preds = ", ".join(f"{' '.join(tokens[s.start:s.end])} ({s.label})" for s in d.spans) or "None"
        lines.append(f"{d.H_y:8.2f} {d.H_y_given_x:8.2f} {d.mi:8.2f}  {preds}")
        lines.append("")
    return "\n".join(lines)

