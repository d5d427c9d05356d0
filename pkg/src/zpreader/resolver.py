"""Antecedent resolution for zero-pronoun gaps.

Each gap becomes a cloze query (blank inserted at the gap slot, gap
sentence removed from the context); the reader predicts the missing
token, the prediction is recovered to a surface form, and the nearest
candidate noun phrase whose head word equals that form is selected.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import reader
from .corpus import AZPInstance, Document
from .errors import ParseError, UnkOverflowError, UnrecoverableTokenError, ValidationError
from .pseudogen import gap_query_tokens
from .reader import ReaderParams
from .vocab import Vocabulary, map_token_seqs, recover_form


@dataclass(frozen=True)
class Resolution:
    doc_id: str
    sent_index: int
    token_slot: int
    predicted_form: Optional[str]   # None when no form could be recovered
    matched_index: int              # candidate index, -1 when no head matches
    gold_index: int                 # -1 when the instance carries no gold
    correct: bool


@dataclass
class ResolveStats:
    instances: int = 0
    unk_overflow: int = 0           # gaps skipped because the context
                                    # exhausted the placeholder slots


def nearest_match(candidates, predicted_form: Optional[str]) -> int:
    """Index of the closest candidate whose head equals the prediction
    (candidates are ordered nearest first), or -1."""
    if predicted_form is not None:
        for i, cand in enumerate(candidates):
            if cand.head_form == predicted_form:
                return i
    return -1


def resolve_instance(params: ReaderParams, vocab: Vocabulary, doc: Document,
                     instance: AZPInstance,
                     restrict_to_context: bool = True) -> Resolution:
    si, slot = instance.gap_position
    doc_tokens, query_tokens = gap_query_tokens(instance, doc, vocab.blank_form)
    mapped = map_token_seqs(doc_tokens, query_tokens, None, vocab)
    predicted_id, _ = reader.predict(params, mapped.doc_ids, mapped.query_ids,
                                     restrict_to_context=restrict_to_context)
    try:
        form = recover_form(predicted_id, mapped, vocab)
    except (UnrecoverableTokenError, ValidationError):
        # A placeholder without a table entry, or (unrestricted mode
        # only) a reserved symbol: nothing to match against.
        form = None
    matched = nearest_match(instance.candidates, form)
    gold = -1 if instance.gold_candidate_index is None else instance.gold_candidate_index
    return Resolution(doc_id=doc.doc_id, sent_index=si, token_slot=slot,
                      predicted_form=form, matched_index=matched,
                      gold_index=gold, correct=(gold >= 0 and matched == gold))


def resolve_or_miss(params: ReaderParams, vocab: Vocabulary, doc: Document,
                    instance: AZPInstance,
                    restrict_to_context: bool = True) -> Tuple[Resolution, bool]:
    """Like :func:`resolve_instance`, but a gap whose context exhausts
    the placeholder slots becomes an explicit miss instead of an error;
    the flag reports whether that happened."""
    try:
        return resolve_instance(params, vocab, doc, instance,
                                restrict_to_context=restrict_to_context), False
    except UnkOverflowError:
        si, slot = instance.gap_position
        gold = (-1 if instance.gold_candidate_index is None
                else instance.gold_candidate_index)
        return Resolution(doc_id=doc.doc_id, sent_index=si, token_slot=slot,
                          predicted_form=None, matched_index=-1,
                          gold_index=gold, correct=False), True


def resolve(params: ReaderParams, vocab: Vocabulary,
            documents: Sequence[Document], instances: Sequence[AZPInstance],
            restrict_to_context: bool = True,
            ) -> Tuple[List[Resolution], ResolveStats]:
    """Resolve every instance; gaps that cannot be mapped are recorded
    as misses rather than dropped, so totals stay honest."""
    docs_by_id: Dict[str, Document] = {d.doc_id: d for d in documents}
    out: List[Resolution] = []
    stats = ResolveStats()
    for inst in instances:
        if inst.doc_id not in docs_by_id:
            raise ValidationError(f"instance references unknown document {inst.doc_id!r}")
        stats.instances += 1
        res, overflowed = resolve_or_miss(params, vocab, docs_by_id[inst.doc_id],
                                          inst, restrict_to_context=restrict_to_context)
        stats.unk_overflow += int(overflowed)
        out.append(res)
    return out, stats


def write_resolutions(resolutions: Sequence[Resolution], path) -> None:
    """One line per gap: doc id, sent:slot, predicted form (empty when
    unrecoverable), matched candidate index, correctness flag."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in resolutions:
            fh.write("\t".join([
                r.doc_id,
                f"{r.sent_index}:{r.token_slot}",
                r.predicted_form if r.predicted_form is not None else "",
                str(r.matched_index),
                "1" if r.correct else "0",
            ]) + "\n")


@dataclass(frozen=True)
class PredictionRecord:
    """A resolution as read back from a predictions file (no gold)."""
    doc_id: str
    sent_index: int
    token_slot: int
    predicted_form: Optional[str]
    matched_index: int
    correct: bool


def load_resolutions(path) -> List[PredictionRecord]:
    path = Path(path)
    records: List[PredictionRecord] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 5:
                raise ParseError(path, line_no, f"expected 5 columns, got {len(cols)}")
            doc_id, pos, form, matched, correct = cols
            try:
                si_s, slot_s = pos.split(":")
                si, slot = int(si_s), int(slot_s)
                matched_i = int(matched)
            except ValueError as exc:
                raise ParseError(path, line_no, f"bad position or index: {exc}") from exc
            if correct not in ("0", "1"):
                raise ParseError(path, line_no, f"correct flag must be 0 or 1, got {correct!r}")
            records.append(PredictionRecord(
                doc_id=doc_id, sent_index=si, token_slot=slot,
                predicted_form=form if form else None,
                matched_index=matched_i, correct=correct == "1"))
    return records
