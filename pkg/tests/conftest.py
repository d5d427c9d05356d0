"""Shared builders for tests: hand-assembled documents and tiny corpora."""

import pytest

from zpreader.corpus import POS, Document, Sentence, Token


def build_doc(doc_id, domain, sentences):
    """Assemble a document from [[(form, pos), ...], ...]; doc_index is
    assigned in reading order, as the parser would."""
    out, di = [], 0
    for si, words in enumerate(sentences):
        toks = []
        for form, pos in words:
            toks.append(Token(form=form, pos=pos, doc_index=di))
            di += 1
        out.append(Sentence(tokens=toks, sent_index=si))
    return Document(doc_id=doc_id, domain=domain, sentences=out)


N, P, O = POS.NOUN, POS.PRONOUN, POS.OTHER


def weather_doc(doc_id="w1", domain="NW"):
    """Fourteen tokens; 'weather' occurs twice, in two sentences, so it
    is both frequency-eligible and survives query removal."""
    return build_doc(doc_id, domain, [
        [("The", O), ("weather", N), ("of", O), ("today", N), ("is", O),
         ("not", O), ("as", O), ("pleasant", O), ("as", O)],
        [("the", O), ("weather", N), ("of", O), ("yesterday", N), (".", O)],
    ])


@pytest.fixture
def doc_builder():
    return build_doc


TINY_CORPUS = """\
#doc alpha NW
The\tDT
cat\tNN
saw\tVBD
the\tDT
cat\tNN
.\t.

It\tPRP
slept\tVBD
.\t.

#doc beta TC
Dogs\tNNS
bark\tVBP
.\t.
"""


@pytest.fixture
def tiny_corpus_path(tmp_path):
    p = tmp_path / "corpus.tsv"
    p.write_text(TINY_CORPUS, encoding="utf-8")
    return p
