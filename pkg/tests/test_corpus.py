import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from namestruct.corpus import (
    BUILTIN_SCHEMAS,
    Corpus,
    EmptyMentionError,
    LabelSchema,
    Mention,
    ParseError,
    SchemaError,
    detokenize,
    gen_synthetic,
    load_corpus,
    save_corpus,
    tokenize,
)


class TestTokenize:
    def test_trailing_period_stays(self):
        assert tokenize("Apple Inc.") == ["Apple", "Inc."]

    def test_trailing_comma_detached(self):
        assert tokenize("Jordan, Michael") == ["Jordan", ",", "Michael"]

    def test_interior_punctuation_stays(self):
        assert tokenize("6/13/2012") == ["6/13/2012"]

    def test_leading_punctuation_detached(self):
        assert tokenize("(Zurich)") == ["(", "Zurich", ")"]

    def test_quotes_detached_both_sides(self):
        assert tokenize('Liat "Ace" Sossove') == ["Liat", '"', "Ace", '"', "Sossove"]

    def test_pure_punctuation_token_kept_whole(self):
        assert tokenize("Johnson & Johnson") == ["Johnson", "&", "Johnson"]

    def test_period_then_comma(self):
        # only the comma detaches; the abbreviation dot survives
        assert tokenize("Inc., then") == ["Inc.", ",", "then"]

    @pytest.mark.parametrize("raw", ["", "   ", "\t\n"])
    def test_empty_input_rejected(self, raw):
        with pytest.raises(EmptyMentionError):
            tokenize(raw)

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_deterministic_and_nonempty(self, raw):
        first = tokenize(raw)
        assert first == tokenize(raw)
        assert first
        assert all(tok for tok in first)
        assert all(not any(c.isspace() for c in tok) for tok in first)

    @given(st.text(min_size=1).filter(lambda s: s.strip()))
    def test_tokens_preserve_non_space_characters(self, raw):
        assert "".join(tokenize(raw)) == "".join(raw.split())


class TestLabelSchema:
    def test_labels_order(self):
        schema = LabelSchema(("first", "last"))
        assert schema.labels == ("first", "last", "sep")

    def test_duplicate_components_rejected(self):
        with pytest.raises(SchemaError):
            LabelSchema(("a", "a"))

    def test_separator_must_differ(self):
        with pytest.raises(SchemaError):
            LabelSchema(("a",), separator="a")

    def test_empty_components_allowed(self):
        assert LabelSchema(()).labels == ("sep",)


class TestMention:
    def test_label_length_enforced(self):
        with pytest.raises(SchemaError):
            Mention("1", "a b", ("a", "b"), labels=("x",))

    def test_empty_tokens_rejected(self):
        with pytest.raises(EmptyMentionError):
            Mention("1", "", ())


class TestLoadCorpus:
    SCHEMA = LabelSchema(("name", "suffix"))

    def write(self, tmp_path, lines):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_tokenizes_when_tokens_missing(self, tmp_path):
        path = self.write(tmp_path, ['{"id":"1","mention":"Apple Inc."}'])
        corpus = load_corpus(path, self.SCHEMA)
        assert corpus.mentions[0].tokens == ("Apple", "Inc.")
        assert corpus.mentions[0].labels is None

    def test_labeled_record(self, tmp_path):
        path = self.write(
            tmp_path, ['{"id":"1","mention":"Apple Inc.","labels":["name","suffix"]}']
        )
        corpus = load_corpus(path, self.SCHEMA)
        assert corpus.mentions[0].labels == ("name", "suffix")

    def test_label_length_mismatch_is_schema_error(self, tmp_path):
        path = self.write(
            tmp_path, ['{"id":"1","mention":"Apple Inc.","labels":["name"]}']
        )
        with pytest.raises(SchemaError):
            load_corpus(path, self.SCHEMA)

    def test_unknown_label_is_schema_error(self, tmp_path):
        path = self.write(
            tmp_path, ['{"id":"1","mention":"Apple Inc.","labels":["name","bogus"]}']
        )
        with pytest.raises(SchemaError):
            load_corpus(path, self.SCHEMA)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = self.write(
            tmp_path, ['{"id":"1","mention":"Apple Inc."}', "{not json"]
        )
        with pytest.raises(ParseError) as err:
            load_corpus(path, self.SCHEMA)
        assert err.value.line_no == 2

    def test_duplicate_ids_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            ['{"id":"1","mention":"Apple Inc."}', '{"id":"1","mention":"Sony Corp."}'],
        )
        with pytest.raises(SchemaError):
            load_corpus(path, self.SCHEMA)

    def test_save_load_round_trip(self, tmp_path):
        corpus = gen_synthetic("org", 25, seed=3)
        path = tmp_path / "round.jsonl"
        save_corpus(corpus, path)
        loaded = load_corpus(path, corpus.schema)
        assert loaded.mentions == corpus.mentions


class TestGenSynthetic:
    def test_deterministic(self):
        a = gen_synthetic("date", 50, seed=7)
        b = gen_synthetic("date", 50, seed=7)
        assert a.mentions == b.mentions

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gen_synthetic("city", 5, seed=0)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            gen_synthetic("date", 0, seed=0)

    @pytest.mark.parametrize("kind", ["person", "org", "date"])
    def test_gold_labels_validate(self, kind):
        corpus = gen_synthetic(kind, 200, seed=11)
        schema = BUILTIN_SCHEMAS[kind]
        for m in corpus.mentions:
            schema.validate_labels(m.labels, len(m.tokens))

    @pytest.mark.parametrize("kind", ["person", "org", "date"])
    def test_raw_tokenizes_back_to_tokens(self, kind):
        corpus = gen_synthetic(kind, 200, seed=5)
        for m in corpus.mentions:
            assert tuple(tokenize(m.raw)) == m.tokens, m.raw

    @pytest.mark.parametrize("kind", ["person", "org", "date"])
    def test_at_least_ten_templates(self, kind):
        from namestruct.corpus import _TEMPLATES

        assert len(_TEMPLATES[kind]) >= 10

    @pytest.mark.parametrize("kind", ["person", "org", "date"])
    def test_every_template_appears_eventually(self, kind):
        from namestruct.corpus import _TEMPLATES

        # uniform template choice: with n >> templates, a large draw must
        # produce at least as many structures as there are distinct shapes
        corpus = gen_synthetic(kind, 2000, seed=1)
        shapes = {tuple(m.labels) for m in corpus.mentions}
        distinct_template_shapes = set()
        import random

        probe = random.Random(123)
        for template in _TEMPLATES[kind]:
            distinct_template_shapes.add(tuple(lab for _, lab in template(probe)))
        assert shapes >= distinct_template_shapes

    def test_detached_punctuation_is_separator_labeled(self):
        corpus = gen_synthetic("org", 500, seed=9)
        sep = corpus.schema.separator
        for m in corpus.mentions:
            for tok, lab in zip(m.tokens, m.labels):
                if len(tok) == 1 and tok in ",()&\"":
                    assert lab == sep


def test_detokenize_examples():
    assert detokenize(["February", "2", ",", "2019"]) == "February 2, 2019"
    assert detokenize(["Acme", "Inc.", "(", "Zurich", ")"]) == "Acme Inc. (Zurich)"
    assert detokenize(["Liat", '"', "Ace", '"', "Sossove"]) == 'Liat "Ace" Sossove'
