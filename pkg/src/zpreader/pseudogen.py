"""Cloze triple generation from documents and from gold AZP instances.

A triple is (context tokens, query tokens with one blank, answer word).
Pseudo triples blank a noun/pronoun that occurs at least twice in its
document; the sentence containing the blank becomes the query and is
removed from the context so the task cannot be solved by copying the
query back out.
"""

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .corpus import POS, AZPInstance, Document
from .errors import ParseError, ValidationError

DEFAULT_BLANK = "⟨blank⟩"   # ⟨blank⟩

ANSWER_POS = (POS.NOUN, POS.PRONOUN)


class Origin(enum.Enum):
    PSEUDO = "PSEUDO"
    TASK = "TASK"


@dataclass(frozen=True)
class GenerationConfig:
    triples_per_document: int = 1
    min_answer_frequency: int = 2
    rng_seed: int = 0
    blank_symbol: str = DEFAULT_BLANK

    def __post_init__(self):
        if self.triples_per_document < 1:
            raise ValidationError("triples_per_document must be >= 1")
        if self.min_answer_frequency < 1:
            raise ValidationError("min_answer_frequency must be >= 1")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be non-negative")


@dataclass
class Triple:
    doc_tokens: list
    query_tokens: list
    answer: str
    origin: Origin
    doc_id: str
    meta: Optional[dict] = None

    def validate(self, blank_symbol: str = DEFAULT_BLANK) -> None:
        blanks = self.query_tokens.count(blank_symbol)
        if blanks != 1:
            raise ValidationError(
                f"query must contain exactly one {blank_symbol!r}, found {blanks}")
        if not self.answer:
            raise ValidationError("answer must be non-empty")
        if self.origin is Origin.PSEUDO and self.answer not in self.doc_tokens:
            raise ValidationError(
                f"pseudo answer {self.answer!r} missing from context tokens")


def eligible_answers(doc: Document, cfg: GenerationConfig) -> list:
    """(form, positions) pairs for forms tagged noun/pronoun at least
    ``min_answer_frequency`` times, ordered by first occurrence.

    Positions are (sent_index, token_offset) of the noun/pronoun
    occurrences only.
    """
    positions = {}
    for si, sent in enumerate(doc.sentences):
        for ti, tok in enumerate(sent.tokens):
            if tok.pos in ANSWER_POS:
                positions.setdefault(tok.form, []).append((si, ti))
    return [(form, pos) for form, pos in positions.items()
            if len(pos) >= cfg.min_answer_frequency]


def make_triple(doc: Document, form: str, position: tuple,
                cfg: GenerationConfig) -> Triple:
    """Blank ``form`` at ``position`` and build the pseudo triple."""
    si, ti = position
    tok = doc.token_at(si, ti)
    if tok.form != form:
        raise ValidationError(
            f"token at {position} is {tok.form!r}, expected {form!r}")
    if tok.pos not in ANSWER_POS:
        raise ValidationError(f"token at {position} is not a noun or pronoun")
    query = doc.sentences[si].forms
    query[ti] = cfg.blank_symbol
    doc_tokens = []
    for sj, sent in enumerate(doc.sentences):
        if sj != si:
            doc_tokens.extend(sent.forms)
    triple = Triple(doc_tokens=doc_tokens, query_tokens=query, answer=form,
                    origin=Origin.PSEUDO, doc_id=doc.doc_id,
                    meta={"sent_index": si, "token_offset": ti})
    triple.validate(cfg.blank_symbol)
    return triple


def _doc_rng(doc: Document, cfg: GenerationConfig) -> np.random.Generator:
    # Mix the doc_id into the seed so documents draw decorrelated streams
    # while generation stays a pure function of (document, config).
    digest = hashlib.sha256(doc.doc_id.encode("utf-8")).digest()
    doc_key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng([cfg.rng_seed, doc_key])


def _sampling_pairs(doc: Document, cfg: GenerationConfig) -> list:
    """Eligible (form, position) pairs that yield valid triples.

    A pair is dropped when every other occurrence of the form sits in the
    same sentence as the blank: removing that sentence would take the
    answer out of the context.
    """
    sent_forms = [set(s.forms) for s in doc.sentences]
    occurs_in = {}
    for si, forms in enumerate(sent_forms):
        for f in forms:
            occurs_in.setdefault(f, set()).add(si)
    pairs = []
    for form, positions in eligible_answers(doc, cfg):
        for (si, ti) in positions:
            if occurs_in[form] - {si}:
                pairs.append((form, (si, ti)))
    pairs.sort(key=lambda p: doc.token_at(*p[1]).doc_index)
    return pairs


def sample_triples(doc: Document, cfg: GenerationConfig) -> list:
    """Sample up to ``triples_per_document`` triples, uniformly without
    replacement over valid (form, occurrence) pairs; deterministic."""
    pairs = _sampling_pairs(doc, cfg)
    if not pairs:
        return []
    k = min(cfg.triples_per_document, len(pairs))
    rng = _doc_rng(doc, cfg)
    chosen = rng.choice(len(pairs), size=k, replace=False)
    return [make_triple(doc, *pairs[int(i)], cfg) for i in chosen]


def gap_query_tokens(instance: AZPInstance, doc: Document,
                     blank_symbol: str = DEFAULT_BLANK) -> tuple:
    """(doc_tokens, query_tokens) for a zero-pronoun gap.

    The blank is inserted at the gap slot (no surface token is removed)
    and the gap sentence is excluded from the context, mirroring the
    pseudo triple shape.
    """
    si, slot = instance.gap_position
    sent = doc.sentences[si]
    query = sent.forms
    query.insert(slot, blank_symbol)
    doc_tokens = []
    for sj, s in enumerate(doc.sentences):
        if sj != si:
            doc_tokens.extend(s.forms)
    if not doc_tokens:
        raise ValidationError(
            f"{doc.doc_id}: gap sentence is the only sentence; no context left")
    return doc_tokens, query


def azp_to_triple(instance: AZPInstance, doc: Document,
                  cfg: GenerationConfig) -> Triple:
    """Convert a gold-annotated AZP instance to a task triple."""
    if instance.gold_candidate_index is None:
        raise ValidationError(f"{doc.doc_id}: instance has no gold antecedent")
    doc_tokens, query = gap_query_tokens(instance, doc, cfg.blank_symbol)
    gold = instance.candidates[instance.gold_candidate_index]
    si, slot = instance.gap_position
    triple = Triple(doc_tokens=doc_tokens, query_tokens=query,
                    answer=gold.head_form, origin=Origin.TASK,
                    doc_id=doc.doc_id,
                    meta={"sent_index": si, "token_slot": slot})
    triple.validate(cfg.blank_symbol)
    return triple


def azp_instances_to_triples(instances, docs_by_id, cfg) -> tuple:
    """Convert all gold-bearing instances; returns (triples, skipped)."""
    triples, skipped = [], 0
    for inst in instances:
        if inst.gold_candidate_index is None:
            skipped += 1
            continue
        triples.append(azp_to_triple(inst, docs_by_id[inst.doc_id], cfg))
    return triples, skipped


def write_triples(triples: Iterable[Triple], path) -> None:
    """One record per line: origin, doc_id, answer, query, context."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in triples:
            fh.write("\t".join([
                t.origin.value, t.doc_id, t.answer,
                " ".join(t.query_tokens), " ".join(t.doc_tokens),
            ]) + "\n")


def load_triples(path, blank_symbol: str = DEFAULT_BLANK) -> list:
    path = Path(path)
    triples = []
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 5:
                raise ParseError(path, line_no,
                                 f"expected 5 tab-separated columns, got {len(cols)}")
            origin_s, doc_id, answer, query_s, doc_s = cols
            try:
                origin = Origin(origin_s)
            except ValueError:
                raise ParseError(path, line_no, f"unknown origin {origin_s!r}")
            triple = Triple(doc_tokens=doc_s.split(" ") if doc_s else [],
                            query_tokens=query_s.split(" "),
                            answer=answer, origin=origin, doc_id=doc_id)
            try:
                triple.validate(blank_symbol)
            except ValidationError as exc:
                raise ParseError(path, line_no, str(exc))
            triples.append(triple)
    return triples
