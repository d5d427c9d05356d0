"""Shortlist construction, id layout, and unk-slot mapping round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zpreader.errors import (ParseError, UnkOverflowError,
                             UnrecoverableTokenError, ValidationError)
from zpreader.pseudogen import DEFAULT_BLANK, Origin, Triple
from zpreader.vocab import (BLANK_ID, PAD_FORM, PAD_ID, build_shortlist,
                            load_vocabulary, map_token_seqs, recover_form,
                            unk_form)


def mk_triple(doc_tokens, query_tokens, answer):
    return Triple(doc_tokens=list(doc_tokens), query_tokens=list(query_tokens),
                  answer=answer, origin=Origin.PSEUDO, doc_id="d")


def shortlist_oracle(triples, size, num_unk_slots):
    """Independent count-and-sort over all three record fields."""
    reserved = {PAD_FORM, DEFAULT_BLANK}
    reserved |= {unk_form(s) for s in range(1, num_unk_slots + 1)}
    counts = {}
    for t in triples:
        for form in list(t.doc_tokens) + list(t.query_tokens) + [t.answer]:
            if form not in reserved:
                counts[form] = counts.get(form, 0) + 1
    ranked = sorted(counts, key=lambda f: (-counts[f], f))
    return ranked[:size]


class TestShortlist:
    def test_hand_computed_ranking(self):
        triples = [
            mk_triple(["the", "cat", "the", "dog"], [DEFAULT_BLANK, "the"], "cat"),
            mk_triple(["dog", "the", "ant"], ["the", DEFAULT_BLANK], "dog"),
        ]
        # counts: the=5, dog=3, cat=2, ant=1; cat/dog tie broken below
        vocab = build_shortlist(triples, size=3, num_unk_slots=2)
        assert vocab.form_of[4:] == ["the", "dog", "cat"]

    def test_tie_break_is_lexicographic(self):
        triples = [mk_triple(["b", "a", "c"], [DEFAULT_BLANK], "a")]
        # a=2; b=c=1 -> b admitted before c
        vocab = build_shortlist(triples, size=2, num_unk_slots=1)
        assert vocab.form_of[3:] == ["a", "b"]

    def test_reserved_surface_forms_never_admitted(self):
        noisy = [PAD_FORM, DEFAULT_BLANK, unk_form(3)] * 10
        triples = [mk_triple(noisy + ["cat"], [DEFAULT_BLANK], "cat")]
        vocab = build_shortlist(triples, size=5, num_unk_slots=5)
        assert vocab.shortlist_size == 1
        assert vocab.form_of[-1] == "cat"

    def test_matches_oracle_on_random_corpora(self):
        rng = np.random.default_rng(7)
        forms = [f"w{i}" for i in range(40)]
        for _ in range(20):
            triples = []
            for _ in range(8):
                doc = list(rng.choice(forms, size=rng.integers(1, 15)))
                query = list(rng.choice(forms, size=rng.integers(1, 6)))
                query.append(DEFAULT_BLANK)
                triples.append(mk_triple(doc, query, str(rng.choice(forms))))
            size = int(rng.integers(1, 25))
            vocab = build_shortlist(triples, size=size, num_unk_slots=3)
            assert vocab.form_of[5:] == shortlist_oracle(triples, size, 3)

    def test_size_must_be_positive(self):
        with pytest.raises(ValidationError):
            build_shortlist([], size=0)


class TestIdLayout:
    def vocab(self):
        triples = [mk_triple(["cat", "dog", "cat"], [DEFAULT_BLANK], "cat")]
        return build_shortlist(triples, size=2, num_unk_slots=4)

    def test_reserved_prefix(self):
        v = self.vocab()
        assert v.form_of[PAD_ID] == PAD_FORM
        assert v.form_of[BLANK_ID] == DEFAULT_BLANK
        assert v.form_of[2:6] == [unk_form(s) for s in (1, 2, 3, 4)]
        assert v.form_of[6:] == ["cat", "dog"]
        assert v.total_size == 2 + 4 + 2 == len(v.form_of)

    def test_unk_id_law(self):
        v = self.vocab()
        for slot in range(1, v.num_unk_slots + 1):
            assert v.unk_id(slot) == 1 + slot
            assert v.slot_of_id(v.unk_id(slot)) == slot
        for bad in (0, 5):
            with pytest.raises(ValueError):
                v.unk_id(bad)
        for non_unk in (PAD_ID, BLANK_ID, 6, 7):
            assert v.slot_of_id(non_unk) is None

    def test_id_of_inverts_form_of(self):
        v = self.vocab()
        assert [v.id_of[f] for f in v.form_of] == list(range(v.total_size))


class TestSerialization:
    def build(self):
        triples = [mk_triple(["cat", "dog", "cat"], [DEFAULT_BLANK, "the"], "dog")]
        return build_shortlist(triples, size=3, num_unk_slots=2)

    def test_round_trip(self, tmp_path):
        v = self.build()
        path = tmp_path / "vocab.tsv"
        v.save(path)
        again = load_vocabulary(path)
        assert again.form_of == v.form_of
        assert again.id_of == v.id_of
        assert again.counts == v.counts
        assert (again.shortlist_size, again.num_unk_slots) == \
               (v.shortlist_size, v.num_unk_slots)
        assert again.blank_form == v.blank_form
        assert again.fingerprint() == v.fingerprint()

    def test_fingerprint_tracks_content(self):
        v = self.build()
        other = self.build()
        other.counts["cat"] += 1
        assert v.fingerprint() != other.fingerprint()

    def test_empty_file(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ParseError, match="empty vocabulary"):
            load_vocabulary(path)

    @pytest.mark.parametrize("mutate,fragment", [
        (lambda ls: ["3"] + ls[1:], "shortlist_size num_unk_slots"),
        (lambda ls: ls[:3] + ["9\t" + ls[3].split("\t", 1)[1]] + ls[4:],
         "non-dense id"),
        (lambda ls: ls[:-1], "entries, found"),
        (lambda ls: ls[:2] + [ls[2].rsplit("\t", 1)[0]] + ls[3:],
         "3 tab-separated"),
    ])
    def test_malformed_files(self, tmp_path, mutate, fragment):
        lines = self.build().serialize().splitlines()
        path = tmp_path / "vocab.tsv"
        path.write_text("\n".join(mutate(lines)) + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match=fragment):
            load_vocabulary(path)


def small_vocab(num_unk_slots=3):
    triples = [mk_triple(["the", "the", "cat"], [DEFAULT_BLANK], "cat")]
    return build_shortlist(triples, size=2, num_unk_slots=num_unk_slots)


class TestMapping:
    def test_slot_numbering_scans_context_then_query_then_answer(self):
        v = small_vocab()
        m = map_token_seqs(["the", "zap", "qux", "zap"],
                           ["the", DEFAULT_BLANK, "qux", "wug"],
                           "zap", v)
        the, cat = v.id_of["the"], v.id_of["cat"]
        u = v.unk_id
        assert m.doc_ids == [the, u(1), u(2), u(1)]
        assert m.query_ids == [the, BLANK_ID, u(2), u(3)]
        assert m.answer_id == u(1)
        assert m.unk_table == {1: "zap", 2: "qux", 3: "wug"}
        assert cat not in m.context_id_set()

    def test_answer_unseen_elsewhere_gets_next_slot(self):
        v = small_vocab()
        m = map_token_seqs(["zap"], [DEFAULT_BLANK], "new", v)
        assert m.answer_id == v.unk_id(2)
        assert m.unk_table == {1: "zap", 2: "new"}

    def test_answer_none_is_allowed(self):
        v = small_vocab()
        m = map_token_seqs(["zap"], [DEFAULT_BLANK, "the"], None, v)
        assert m.answer_id is None
        assert m.unk_table == {1: "zap"}

    def test_overflow_reports_shortfall(self):
        v = small_vocab(num_unk_slots=2)
        with pytest.raises(UnkOverflowError) as err:
            map_token_seqs(["a1", "a2", "a3"], [DEFAULT_BLANK], "a4", v)
        assert err.value.needed == 4
        assert err.value.available == 2
        assert err.value.overflow == 2

    @pytest.mark.parametrize("query", [["the"], [DEFAULT_BLANK, DEFAULT_BLANK]])
    def test_query_must_hold_exactly_one_blank(self, query):
        with pytest.raises(ValidationError, match="exactly one"):
            map_token_seqs(["the"], query, "the", small_vocab())


class TestRecovery:
    def test_shortlist_and_slot_recovery(self):
        v = small_vocab()
        m = map_token_seqs(["zap", "qux"], [DEFAULT_BLANK], "zap", v)
        assert recover_form(v.id_of["cat"], m, v) == "cat"
        assert recover_form(v.unk_id(1), m, v) == "zap"
        assert recover_form(v.unk_id(2), m, v) == "qux"

    def test_unfilled_slot_is_unrecoverable(self):
        v = small_vocab()
        m = map_token_seqs(["zap"], [DEFAULT_BLANK], None, v)
        with pytest.raises(UnrecoverableTokenError, match="no entry"):
            recover_form(v.unk_id(3), m, v)

    @pytest.mark.parametrize("bad_id", [PAD_ID, BLANK_ID])
    def test_reserved_ids_rejected(self, bad_id):
        v = small_vocab()
        m = map_token_seqs(["zap"], [DEFAULT_BLANK], None, v)
        with pytest.raises(ValidationError, match="reserved"):
            recover_form(bad_id, m, v)

    def test_out_of_range_rejected(self):
        v = small_vocab()
        m = map_token_seqs(["zap"], [DEFAULT_BLANK], None, v)
        for bad in (-1, v.total_size):
            with pytest.raises(ValidationError, match="out of range"):
                recover_form(bad, m, v)


# Six shortlisted forms plus six never-shortlisted ones; 20 default slots
# mean overflow cannot occur, so every draw must round-trip.
_KNOWN = [f"k{i}" for i in range(6)]
_UNKNOWN = [f"u{i}" for i in range(6)]
_RT_VOCAB = build_shortlist(
    [mk_triple(_KNOWN, [DEFAULT_BLANK], _KNOWN[0])], size=6)


@given(doc=st.lists(st.sampled_from(_KNOWN + _UNKNOWN), min_size=1, max_size=25),
       query=st.lists(st.sampled_from(_KNOWN + _UNKNOWN), max_size=8),
       answer=st.sampled_from(_KNOWN + _UNKNOWN))
@settings(max_examples=150, deadline=None)
def test_mapping_round_trips_every_position(doc, query, answer):
    """recover_form restores the exact surface form at every non-blank
    position, whichever mix of shortlisted and unknown forms was drawn."""
    v = _RT_VOCAB
    query_tokens = query + [DEFAULT_BLANK]
    m = map_token_seqs(doc, query_tokens, answer, v)
    for form, token_id in zip(doc, m.doc_ids):
        assert recover_form(token_id, m, v) == form
    for form, token_id in zip(query_tokens, m.query_ids):
        if token_id != BLANK_ID:
            assert recover_form(token_id, m, v) == form
    assert recover_form(m.answer_id, m, v) == answer
