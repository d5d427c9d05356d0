"""Frequency shortlist plus position-numbered unknown-word handling.

Out-of-shortlist forms are mapped per sample to numbered placeholders
⟨unk1⟩…⟨unkN⟩ in first-occurrence order (context tokens first, then the
query), the same form always reusing its slot within one sample.  The
mapping is recorded in a per-sample table so a predicted placeholder can
be recovered to its surface form.
"""

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import (ParseError, UnkOverflowError, UnrecoverableTokenError,
                     ValidationError)
from .pseudogen import DEFAULT_BLANK, Triple

PAD_FORM = "⟨pad⟩"       # ⟨pad⟩
PAD_ID = 0
BLANK_ID = 1
_RESERVED_BASE = 2                 # pad + blank

DEFAULT_SHORTLIST_SIZE = 100_000
DEFAULT_UNK_SLOTS = 20


def unk_form(slot: int) -> str:
    return f"⟨unk{slot}⟩"


@dataclass
class Vocabulary:
    shortlist_size: int
    num_unk_slots: int
    id_of: dict
    form_of: list
    counts: dict
    blank_form: str = DEFAULT_BLANK

    @property
    def total_size(self) -> int:
        return _RESERVED_BASE + self.num_unk_slots + self.shortlist_size

    def unk_id(self, slot: int) -> int:
        if not 1 <= slot <= self.num_unk_slots:
            raise ValueError(f"unk slot {slot} out of range")
        return _RESERVED_BASE - 1 + slot

    def slot_of_id(self, token_id: int) -> Optional[int]:
        """Slot number when ``token_id`` is an unk placeholder, else None."""
        if _RESERVED_BASE <= token_id < _RESERVED_BASE + self.num_unk_slots:
            return token_id - _RESERVED_BASE + 1
        return None

    def serialize(self) -> str:
        lines = [f"{self.shortlist_size} {self.num_unk_slots}"]
        for i, form in enumerate(self.form_of):
            lines.append(f"{i}\t{form}\t{self.counts.get(form, 0)}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")


def _assemble(shortlist: list, counts: dict, num_unk_slots: int,
              blank_form: str) -> Vocabulary:
    form_of = [PAD_FORM, blank_form]
    form_of += [unk_form(s) for s in range(1, num_unk_slots + 1)]
    form_of += shortlist
    id_of = {form: i for i, form in enumerate(form_of)}
    return Vocabulary(shortlist_size=len(shortlist),
                      num_unk_slots=num_unk_slots,
                      id_of=id_of, form_of=form_of, counts=dict(counts),
                      blank_form=blank_form)


def build_shortlist(triples: Iterable[Triple], size: int,
                    num_unk_slots: int = DEFAULT_UNK_SLOTS,
                    blank_form: str = DEFAULT_BLANK) -> Vocabulary:
    """Admit the ``size`` most frequent forms over context, query and
    answer fields; ties broken by lexicographic form order."""
    if size < 1:
        raise ValidationError("shortlist size must be >= 1")
    reserved = {PAD_FORM, blank_form}
    reserved.update(unk_form(s) for s in range(1, num_unk_slots + 1))
    counts = Counter()
    for t in triples:
        for form in t.doc_tokens:
            counts[form] += 1
        for form in t.query_tokens:
            counts[form] += 1
        counts[t.answer] += 1
    for form in reserved:
        counts.pop(form, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    shortlist = [form for form, _ in ranked[:size]]
    kept = {form: counts[form] for form in shortlist}
    return _assemble(shortlist, kept, num_unk_slots, blank_form)


def load_vocabulary(path) -> Vocabulary:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(path, 1, "empty vocabulary file")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(path, 1, "expected 'shortlist_size num_unk_slots'")
    shortlist_size, num_unk_slots = int(header[0]), int(header[1])
    form_of = []
    counts = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise ParseError(path, line_no,
                             f"expected 3 tab-separated columns, got {len(cols)}")
        idx, form, count = int(cols[0]), cols[1], int(cols[2])
        if idx != len(form_of):
            raise ParseError(path, line_no, f"non-dense id {idx}")
        form_of.append(form)
        counts[form] = count
    expected = _RESERVED_BASE + num_unk_slots + shortlist_size
    if len(form_of) != expected:
        raise ParseError(path, len(lines),
                         f"expected {expected} entries, found {len(form_of)}")
    vocab = Vocabulary(shortlist_size=shortlist_size,
                       num_unk_slots=num_unk_slots,
                       id_of={form: i for i, form in enumerate(form_of)},
                       form_of=form_of,
                       counts={f: c for f, c in counts.items() if c},
                       blank_form=form_of[BLANK_ID])
    return vocab


@dataclass
class MappedTriple:
    doc_ids: list
    query_ids: list
    answer_id: Optional[int]
    unk_table: dict = field(default_factory=dict)   # slot number -> surface form

    def context_id_set(self) -> set:
        return set(self.doc_ids)


def map_token_seqs(doc_tokens: list, query_tokens: list,
                   answer: Optional[str], vocab: Vocabulary) -> MappedTriple:
    """Map raw token sequences to ids under a fresh per-sample unk table.

    Slot assignment scans context tokens first, then the query, then the
    answer, so context mentions anchor the numbering.
    """
    table = {}      # form -> slot
    streams = [doc_tokens, query_tokens]
    if answer is not None:
        streams.append([answer])
    for stream in streams:
        for form in stream:
            if form == vocab.blank_form or form in vocab.id_of:
                continue
            if form not in table:
                table[form] = len(table) + 1
    if len(table) > vocab.num_unk_slots:
        raise UnkOverflowError(needed=len(table),
                               available=vocab.num_unk_slots)

    def to_id(form):
        if form == vocab.blank_form:
            return BLANK_ID
        known = vocab.id_of.get(form)
        if known is not None:
            return known
        return vocab.unk_id(table[form])

    blanks = sum(1 for f in query_tokens if f == vocab.blank_form)
    if blanks != 1:
        raise ValidationError(
            f"query must contain exactly one {vocab.blank_form!r}, found {blanks}")
    return MappedTriple(
        doc_ids=[to_id(f) for f in doc_tokens],
        query_ids=[to_id(f) for f in query_tokens],
        answer_id=None if answer is None else to_id(answer),
        unk_table={slot: form for form, slot in table.items()},
    )


def map_triple(t: Triple, vocab: Vocabulary) -> MappedTriple:
    return map_token_seqs(t.doc_tokens, t.query_tokens, t.answer, vocab)


def recover_form(predicted_id: int, mapped: MappedTriple,
                 vocab: Vocabulary) -> str:
    """Surface form for a predicted id, resolving unk slots through the
    sample's table."""
    if not 0 <= predicted_id < vocab.total_size:
        raise ValidationError(f"predicted id {predicted_id} out of range")
    if predicted_id in (PAD_ID, BLANK_ID):
        raise ValidationError("predicted id is a reserved padding/blank symbol")
    slot = vocab.slot_of_id(predicted_id)
    if slot is None:
        return vocab.form_of[predicted_id]
    form = mapped.unk_table.get(slot)
    if form is None:
        raise UnrecoverableTokenError(
            f"{unk_form(slot)} has no entry in this sample's table")
    return form
