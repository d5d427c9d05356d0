"""Document model and loaders for pre-tokenized, POS-tagged corpora.

Corpus file format (UTF-8):
    #doc <doc_id> <domain>     starts a document
    FORM<TAB>POSTAG            one token per line
    (blank line)               ends the current sentence
A blank line that follows another blank line is ignored.

AZP annotation format, one instance per line:
    doc_id<TAB>sent<TAB>slot<TAB>gold<TAB>s:start:end:head [s:start:end:head ...]
where ``gold`` is an index into the candidate list, or -1 when absent.
"""

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ParseError, ValidationError


class POS(enum.Enum):
    NOUN = "NOUN"
    PRONOUN = "PRONOUN"
    OTHER = "OTHER"


# Tags from the common tagsets collapse onto the 3-way distinction the
# generator needs.  Anything absent from the map becomes OTHER.
DEFAULT_TAG_MAP = {
    "NOUN": POS.NOUN, "PROPN": POS.NOUN, "PRON": POS.PRONOUN,
    # Penn Treebank
    "NN": POS.NOUN, "NNS": POS.NOUN, "NNP": POS.NOUN, "NNPS": POS.NOUN,
    "PRP": POS.PRONOUN, "PRP$": POS.PRONOUN, "WP": POS.PRONOUN,
    # CTB / LTP style
    "NR": POS.NOUN, "NT": POS.NOUN, "PN": POS.PRONOUN,
    "n": POS.NOUN, "nh": POS.NOUN, "ns": POS.NOUN, "ni": POS.NOUN,
    "nz": POS.NOUN, "r": POS.PRONOUN,
    "PRONOUN": POS.PRONOUN,
}


@dataclass(frozen=True)
class Token:
    form: str
    pos: POS
    doc_index: int


@dataclass
class Sentence:
    tokens: list
    sent_index: int

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self):
        return [t.form for t in self.tokens]


@dataclass
class Document:
    doc_id: str
    domain: str
    sentences: list

    def iter_tokens(self) -> Iterator[Token]:
        for sent in self.sentences:
            yield from sent.tokens

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)

    def token_at(self, sent_index: int, offset: int) -> Token:
        return self.sentences[sent_index].tokens[offset]


@dataclass(frozen=True)
class CandidateNP:
    span: tuple            # (sent_index, start, end), end exclusive
    head_form: str
    distance_rank: int


@dataclass
class AZPInstance:
    doc_id: str
    gap_position: tuple    # (sent_index, token_slot); slot may equal len(sentence)
    candidates: list
    gold_candidate_index: Optional[int]


def load_documents(path, tag_map=None) -> list:
    """Parse a corpus file into documents, validating all invariants."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_documents(fh, source=str(path), tag_map=tag_map)


def parse_documents(lines: Iterable[str], source="<corpus>", tag_map=None) -> list:
    tag_map = DEFAULT_TAG_MAP if tag_map is None else tag_map
    docs = []
    seen_ids = set()
    doc_id = domain = None
    sentences, tokens = [], []
    doc_index = 0
    header_line = 0

    def flush_sentence():
        nonlocal tokens
        if tokens:
            sentences.append(Sentence(tokens, sent_index=len(sentences)))
            tokens = []

    def flush_document(line_no):
        nonlocal sentences, doc_index
        if doc_id is None:
            return
        flush_sentence()
        if not sentences:
            raise ParseError(source, header_line, f"empty document {doc_id!r}")
        docs.append(Document(doc_id=doc_id, domain=domain, sentences=sentences))
        sentences = []
        doc_index = 0

    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line.startswith("#doc"):
            flush_document(line_no)
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(source, line_no,
                                 "expected '#doc <doc_id> <domain>'")
            _, doc_id, domain = parts
            if doc_id in seen_ids:
                raise ParseError(source, line_no, f"duplicate doc_id {doc_id!r}")
            seen_ids.add(doc_id)
            header_line = line_no
            continue
        if not line.strip():
            flush_sentence()
            continue
        if doc_id is None:
            raise ParseError(source, line_no, "token line before any #doc header")
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(source, line_no,
                             f"expected 2 tab-separated columns, got {len(cols)}")
        form, tag = cols
        if not form or form.split() != [form]:
            raise ParseError(source, line_no,
                             f"token form {form!r} is empty or contains whitespace")
        tokens.append(Token(form=form, pos=tag_map.get(tag, POS.OTHER),
                            doc_index=doc_index))
        doc_index += 1
    flush_document(line_no + 1)
    return docs


def write_documents(docs: Iterable[Document], path) -> None:
    """Serialize documents back to the corpus column format."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(f"#doc {doc.doc_id} {doc.domain}\n")
            for sent in doc.sentences:
                for tok in sent.tokens:
                    fh.write(f"{tok.form}\t{tok.pos.value}\n")
                fh.write("\n")


def gap_token_position(doc: Document, instance: AZPInstance) -> int:
    """Absolute token position of the gap (insertion point), for diagnostics."""
    sent_index, slot = instance.gap_position
    sent = doc.sentences[sent_index]
    base = sent.tokens[0].doc_index if sent.tokens else 0
    return base + slot


def candidate_token_distance(doc: Document, instance: AZPInstance,
                             cand: CandidateNP) -> int:
    """Token distance between the gap and the candidate span (0 if overlapping)."""
    gap = gap_token_position(doc, instance)
    s, start, end = cand.span
    sent = doc.sentences[s]
    first = sent.tokens[start].doc_index
    last = sent.tokens[end - 1].doc_index
    if last < gap:
        return gap - last
    if first >= gap:
        return first - gap + 1
    return 0


def load_azp_instances(path, documents: Iterable[Document]):
    """Parse AZP annotations against a loaded corpus.

    Returns ``(instances, resort_count)`` where ``resort_count`` says how
    many instances arrived with candidates out of nearest-first order and
    were re-sorted (stably, by token distance; the gold index is remapped).
    """
    by_id = {d.doc_id: d for d in documents}
    path = Path(path)
    instances = []
    resorted = 0
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 5:
                raise ParseError(path, line_no,
                                 f"expected 5 tab-separated columns, got {len(cols)}")
            doc_id, sent_s, slot_s, gold_s, cand_field = cols
            doc = by_id.get(doc_id)
            if doc is None:
                raise ValidationError(f"{path}:{line_no}: unknown doc_id {doc_id!r}")
            try:
                sent_index, slot, gold = int(sent_s), int(slot_s), int(gold_s)
            except ValueError:
                raise ParseError(path, line_no, "non-integer position field")
            if not 0 <= sent_index < len(doc.sentences):
                raise ValidationError(
                    f"{path}:{line_no}: sentence index {sent_index} out of range")
            if not 0 <= slot <= len(doc.sentences[sent_index]):
                raise ValidationError(
                    f"{path}:{line_no}: token slot {slot} out of range")

            raw_cands = []
            for part in cand_field.split(" "):
                if not part:
                    continue
                pieces = part.split(":", 3)
                if len(pieces) != 4:
                    raise ParseError(path, line_no,
                                     f"malformed candidate {part!r}")
                try:
                    cs, cstart, cend = int(pieces[0]), int(pieces[1]), int(pieces[2])
                except ValueError:
                    raise ParseError(path, line_no,
                                     f"non-integer candidate span in {part!r}")
                head = pieces[3]
                if not 0 <= cs < len(doc.sentences):
                    raise ValidationError(
                        f"{path}:{line_no}: candidate sentence {cs} out of range")
                sent = doc.sentences[cs]
                if not (0 <= cstart < cend <= len(sent)):
                    raise ValidationError(
                        f"{path}:{line_no}: bad candidate span {cstart}:{cend}")
                span_forms = [t.form for t in sent.tokens[cstart:cend]]
                if head not in span_forms:
                    raise ValidationError(
                        f"{path}:{line_no}: head {head!r} not inside span")
                raw_cands.append(((cs, cstart, cend), head))
            if gold != -1 and not 0 <= gold < len(raw_cands):
                raise ValidationError(
                    f"{path}:{line_no}: gold index {gold} out of range")

            inst = AZPInstance(doc_id=doc_id, gap_position=(sent_index, slot),
                               candidates=[], gold_candidate_index=None)
            probe = [CandidateNP(span=s, head_form=h, distance_rank=i)
                     for i, (s, h) in enumerate(raw_cands)]
            dists = [candidate_token_distance(doc, inst, c) for c in probe]
            order = list(range(len(probe)))
            if any(dists[i] > dists[i + 1] for i in range(len(dists) - 1)):
                order.sort(key=lambda i: (dists[i], i))
                resorted += 1
            inst.candidates = [
                CandidateNP(span=raw_cands[i][0], head_form=raw_cands[i][1],
                            distance_rank=rank)
                for rank, i in enumerate(order)
            ]
            if gold != -1:
                inst.gold_candidate_index = order.index(gold)
            instances.append(inst)
    return instances, resorted
