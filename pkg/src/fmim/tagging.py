"""Tag schemes and conversion between tag sequences and typed spans.

Two schemes are supported:

* ``unified`` -- one tag per sentiment, ``O POS NEU NEG``. A maximal run of
  one non-O tag is an aspect; a change of sentiment closes the run.
* ``bio`` -- ``O`` plus ``B-X``/``I-X`` for every entity type ``X``.

Spans are ``(start, end, label)`` with 0-based, end-exclusive token indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .errors import InvalidSequenceError, MappingError, OverlapError

UNIFIED = "unified"
BIO = "bio"

SENTIMENTS = ("POS", "NEU", "NEG")
NER_TYPES = ("PER", "ORG", "LOC", "MISC")
ASPECT = "ASP"


class Span(NamedTuple):
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class TagScheme:
    name: str
    tags: tuple[str, ...]
    outside_tag: str = "O"
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.name not in (UNIFIED, BIO):
            raise ValueError(f"unknown scheme name {self.name!r}")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("duplicate tags in scheme")
        if not self.tags or self.tags[0] != self.outside_tag:
            raise ValueError("outside tag must be present at index 0")
        if self.name == BIO:
            for tag in self.tags[1:]:
                if tag[:2] not in ("B-", "I-") or len(tag) < 3:
                    raise ValueError(f"BIO tag {tag!r} is not B-X or I-X")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tags)})

    @property
    def num_tags(self) -> int:
        return len(self.tags)

    @property
    def labels(self) -> tuple[str, ...]:
        """Span labels (entity or sentiment types), in tag order."""
        if self.name == UNIFIED:
            return self.tags[1:]
        seen: list[str] = []
        for tag in self.tags[1:]:
            if tag[2:] not in seen:
                seen.append(tag[2:])
        return tuple(seen)

    def tag_id(self, tag: str) -> int:
        try:
            return self.index[tag]
        except KeyError:
            raise InvalidSequenceError(f"tag {tag!r} not in {self.name} scheme") from None

    def encode(self, tags: Iterable[str]) -> list[int]:
        return [self.tag_id(t) for t in tags]

    def decode(self, ids: Iterable[int]) -> list[str]:
        ids = list(ids)
        _check_range(ids, self)
        return [self.tags[i] for i in ids]

    def to_dict(self) -> dict:
        return {"name": self.name, "tags": list(self.tags)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "TagScheme":
        return cls(d["name"], tuple(d["tags"]))


def unified_scheme() -> TagScheme:
    return TagScheme(UNIFIED, ("O",) + SENTIMENTS)


def bio_scheme(types: Sequence[str] = NER_TYPES) -> TagScheme:
    tags = ["O"]
    for t in types:
        tags += [f"B-{t}", f"I-{t}"]
    return TagScheme(BIO, tuple(tags))


def ate_scheme() -> TagScheme:
    """BIO scheme with the single aspect type used for term extraction."""
    return bio_scheme((ASPECT,))


def scheme_for_task(task: str) -> TagScheme:
    task = task.upper()
    if task in ("ABSA", "ATE"):
        return unified_scheme()
    if task == "NER":
        return bio_scheme()
    raise ValueError(f"unknown task {task!r}")


def _check_range(tags: Sequence[int], scheme: TagScheme) -> None:
    n = scheme.num_tags
    for pos, t in enumerate(tags):
        if not 0 <= t < n:
            raise InvalidSequenceError(f"tag index {t} out of range at position {pos} (T={n})")


def extract_spans(tags: Sequence[int], scheme: TagScheme) -> list[Span]:
    """Decode a tag-index sequence into sorted, disjoint spans.

    BIO decoding is lenient: an ``I-X`` that does not continue a span of
    type ``X`` opens a new span.
    """
    _check_range(tags, scheme)
    names = scheme.tags
    spans: list[Span] = []
    start, label = None, None
    for i, t in enumerate(tags):
        tag = names[t]
        if scheme.name == UNIFIED:
            cur = None if t == 0 else tag
            opens = cur is not None and cur != label
        else:
            cur = None if t == 0 else tag[2:]
            opens = cur is not None and (tag.startswith("B-") or cur != label)
        if label is not None and (cur is None or opens):
            spans.append(Span(start, i, label))
            start, label = None, None
        if opens:
            start, label = i, cur
    if label is not None:
        spans.append(Span(start, len(tags), label))
    return spans


def spans_to_tags(spans: Iterable[Span], length: int, scheme: TagScheme) -> list[int]:
    out = [0] * length
    taken = [False] * length
    for start, end, label in sorted(spans):
        if not 0 <= start < end <= length:
            raise InvalidSequenceError(f"span ({start}, {end}) outside [0, {length})")
        if any(taken[start:end]):
            raise OverlapError(f"span ({start}, {end}, {label}) overlaps another span")
        for i in range(start, end):
            taken[i] = True
            if scheme.name == UNIFIED:
                out[i] = scheme.tag_id(label)
            else:
                out[i] = scheme.tag_id(("B-" if i == start else "I-") + label)
    return out


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors


def validate_sequence(tags: Sequence[int], scheme: TagScheme) -> ValidationReport:
    report = ValidationReport()
    n = scheme.num_tags
    prev = None
    for pos, t in enumerate(tags):
        if not 0 <= t < n:
            report.errors.append(f"out-of-range tag index {t} at position {pos}")
            prev = None
            continue
        tag = scheme.tags[t]
        if scheme.name == BIO and tag.startswith("I-"):
            if prev is None or prev[2:] != tag[2:] or prev == "O":
                report.warnings.append(f"orphan {tag} at position {pos}")
        prev = tag
    return report


def convert_scheme(
    tags: Sequence[int],
    src: TagScheme,
    dst: TagScheme,
    label_map: Mapping[str, str] | Callable[[str], str] | None = None,
) -> list[int]:
    """Re-tag a sequence in another scheme, keeping every span's token range.

    Without a ``label_map``, labels map to themselves unless ``dst`` has a
    single span label, in which case every span collapses onto it (the
    sentiment-free aspect extraction setting).
    """
    spans = extract_spans(tags, src)
    dst_labels = dst.labels
    if label_map is None:
        if len(dst_labels) == 1:
            only = dst_labels[0]
            mapper = lambda lab: only  # noqa: E731
        else:
            mapper = lambda lab: lab  # noqa: E731
    elif callable(label_map):
        mapper = label_map
    else:
        def mapper(lab):
            if lab not in label_map:
                raise MappingError(f"no mapping for label {lab!r}")
            return label_map[lab]

    mapped = []
    for s in spans:
        new = mapper(s.label)
        if new not in dst_labels:
            raise MappingError(f"label {s.label!r} maps to {new!r}, not a {dst.name} label")
        mapped.append(Span(s.start, s.end, new))
    out = spans_to_tags(mapped, len(tags), dst)
    if [(s.start, s.end) for s in extract_spans(out, dst)] != [(s.start, s.end) for s in mapped]:
        raise MappingError("adjacent spans with the same label would merge in the target scheme")
    return out
