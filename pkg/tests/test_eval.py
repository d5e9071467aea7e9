import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmim.errors import AlignmentError
from fmim.eval import score_spans, sentence_diagnostics
from fmim.tagging import Span, TagScheme, extract_spans, unified_scheme

from .oracles import brute_force

U = unified_scheme()


def test_partial_recall():
    r = score_spans([[Span(1, 3, "POS")]], [[Span(1, 3, "POS"), Span(4, 5, "NEG")]])
    assert (r.precision, r.recall) == (1.0, 0.5)
    assert r.micro_f1 == pytest.approx(2 / 3)


def test_sentiment_must_match_in_absa_only():
    pred, gold = [[Span(1, 3, "NEG")]], [[Span(1, 3, "POS")]]
    assert score_spans(pred, gold, "ABSA").true_positives == 0
    assert score_spans(pred, gold, "ATE").true_positives == 1


def test_exact_boundaries():
    assert score_spans([[Span(1, 2, "POS")]], [[Span(1, 3, "POS")]]).true_positives == 0


def test_empty_predictions():
    r = score_spans([[]], [[Span(0, 1, "POS")]])
    assert (r.precision, r.recall, r.micro_f1) == (0.0, 0.0, 0.0)


def test_perfect_in_all_modes():
    spans = [[Span(0, 2, "PER"), Span(3, 4, "LOC")], [], [Span(1, 2, "ORG")]]
    for mode in ("ABSA", "ATE", "NER"):
        r = score_spans(spans, spans, mode)
        assert (r.precision, r.recall, r.micro_f1) == (1.0, 1.0, 1.0)


def test_alignment():
    with pytest.raises(AlignmentError):
        score_spans([[]], [[], []])


def test_duplicate_gold_collapsed():
    r = score_spans([[Span(0, 1, "POS")]], [[Span(0, 1, "POS"), Span(0, 1, "POS")]])
    assert (r.gold, r.recall) == (1, 1.0)


span_st = st.builds(
    lambda a, n, lab: Span(a, a + n, lab), st.integers(0, 8), st.integers(1, 3), st.sampled_from(["POS", "NEU", "NEG"])
)
cases = st.integers(1, 5).flatmap(
    lambda k: st.tuples(
        st.lists(st.lists(span_st, max_size=10), min_size=k, max_size=k),
        st.lists(st.lists(span_st, max_size=10), min_size=k, max_size=k),
    )
)


@given(cases, st.sampled_from(["ABSA", "ATE"]))
def test_matches_brute_force(case, mode):
    pred, gold = case
    r = score_spans(pred, gold, mode)
    assert (r.true_positives, r.predicted, r.gold) == brute_force(pred, gold, mode)


@given(cases, st.randoms(use_true_random=False))
def test_sentence_order_irrelevant(case, rnd):
    pred, gold = case
    order = list(range(len(pred)))
    rnd.shuffle(order)
    a = score_spans(pred, gold)
    b = score_spans([pred[i] for i in order], [gold[i] for i in order])
    assert a == b


tag_seqs = st.lists(st.lists(st.sampled_from(U.tags), max_size=12), min_size=1, max_size=5)


@given(tag_seqs, tag_seqs)
def test_ate_never_below_absa(pred_tags, gold_tags):
    # spans decoded from tags never share boundaries with different labels
    k = min(len(pred_tags), len(gold_tags))
    pred = [extract_spans(U.encode(t), U) for t in pred_tags[:k]]
    gold = [extract_spans(U.encode(t), U) for t in gold_tags[:k]]
    assert score_spans(pred, gold, "ATE").true_positives >= score_spans(pred, gold, "ABSA").true_positives


class TestDiagnostics:
    def test_uniform(self):
        d = sentence_diagnostics(np.full((3, 4), 0.25), U)
        assert d.mi == pytest.approx(0.0, abs=1e-12)
        assert d.H_y == pytest.approx(math.log(4))
        assert d.spans == []

    def test_distinct_one_hot(self):
        d = sentence_diagnostics(np.eye(4), U)
        assert d.mi == pytest.approx(math.log(4))
        assert [s.label for s in d.spans] == ["POS", "NEU", "NEG"]

    def test_worked(self):
        two = TagScheme("unified", ("O", "POS"))
        d = sentence_diagnostics(np.array([[0.9, 0.1], [0.2, 0.8]]), two)
        assert d.H_y == pytest.approx(0.68813881371358847, abs=1e-12)
        assert d.H_y_given_x == pytest.approx(0.41274269846481806, abs=1e-12)
        assert d.mi == pytest.approx(0.27539611524877041, abs=1e-12)
        assert d.spans == [Span(1, 2, "POS")]

    @given(st.integers(1, 10), st.integers(0, 2**31))
    def test_mi_non_negative(self, n, seed):
        probs = np.random.default_rng(seed).dirichlet(np.ones(4) * 0.5, size=n)
        assert sentence_diagnostics(probs, U).mi >= -1e-9
