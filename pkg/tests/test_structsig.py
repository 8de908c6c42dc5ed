import pytest
from hypothesis import given
from hypothesis import strategies as st

from namestruct.corpus import Corpus, LabelSchema, Mention, tokenize
from namestruct.structsig import (
    NUM_PREDICATES,
    PREDICATE_NAMES,
    SIGNATURE_BITS,
    Signature,
    content_vector,
    eval_predicates,
    group_by_signature,
    signature,
    token_vectors,
)

token_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cc", "Cs", "Zs", "Zl", "Zp")),
    min_size=1,
    max_size=12,
)


def bits(token, index=0, length=1):
    return dict(zip(PREDICATE_NAMES, eval_predicates(token, index, length)))


class TestEvalPredicates:
    def test_four_digit_year(self):
        b = bits("2020", index=2, length=3)
        expected_true = {"has_digit", "four_digit", "integer", "numeric", "at_end"}
        assert {name for name, v in b.items() if v} == expected_true

    def test_abbreviation_with_dot(self):
        b = bits("Inc.", index=1, length=2)
        assert b["first_upper"] and b["has_punct"] and b["at_end"]
        assert not b["all_alpha"]

    def test_structurally_identical_tokens(self):
        assert eval_predicates("Apple", 0, 2) == eval_predicates("Microsoft", 0, 2)

    def test_vector_length(self):
        assert len(eval_predicates("x", 0, 1)) == NUM_PREDICATES

    def test_empty_token_rejected(self):
        with pytest.raises(ValueError):
            eval_predicates("", 0, 1)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            eval_predicates("x", 2, 2)

    @pytest.mark.parametrize(
        "token,name",
        [("42", "two_digit"), ("2020", "four_digit"), ("7", "single_digit")],
    )
    def test_digit_width_predicates(self, token, name):
        assert bits(token)[name]

    def test_signed_integer(self):
        assert bits("-12")["integer"]
        assert bits("+3")["integer"]
        assert not bits("1.5")["integer"]

    def test_numeric_decimal(self):
        assert bits("3.14")["numeric"]
        assert bits("-0.5")["numeric"]
        assert not bits("1.2.3")["numeric"]
        assert not bits("6/13/2012")["numeric"]

    def test_alphanum_mix(self):
        assert bits("3rd")["alphanum_mix"]
        assert not bits("3rd!")["alphanum_mix"]
        assert not bits("abc")["alphanum_mix"]

    def test_unicode_letters_count_as_alphabetic(self):
        b = bits("Ångström")
        assert b["all_alpha"] and b["first_upper"]

    def test_ascii_digits_only(self):
        # non-ASCII digits are not digits for these predicates
        assert not bits("٣")["has_digit"]

    @given(token_text)
    def test_at_most_one_digit_width_predicate(self, token):
        b = bits(token)
        assert sum([b["two_digit"], b["four_digit"], b["single_digit"]]) <= 1

    @given(token_text)
    def test_all_alpha_excludes_digits(self, token):
        b = bits(token)
        if b["all_alpha"]:
            assert not b["has_digit"]

    @given(token_text, st.integers(0, 5), st.integers(0, 5))
    def test_pure(self, token, index, extra):
        length = index + extra + 1
        assert eval_predicates(token, index, length) == eval_predicates(
            token, index, length
        )

    @given(token_text)
    def test_positional_bits_reflect_position(self, token):
        only = eval_predicates(token, 0, 1)
        assert only[-2] and only[-1]
        middle = eval_predicates(token, 1, 3)
        assert not middle[-2] and not middle[-1]


class TestSignature:
    def test_two_groups_for_company_names(self):
        assert len(signature(tokenize("Apple Inc.")).groups) == 2

    def test_consecutive_equal_vectors_merge(self):
        sig = signature(tokenize("Coca Cola Co."))
        assert len(sig.groups) == 2
        assert sig.groups[0][1] == 2
        assert sig == signature(tokenize("Apple Inc."))

    def test_single_token(self):
        sig = signature(["2020"])
        assert len(sig.groups) == 1 and sig.groups[0][1] == 1

    def test_equality_ignores_run_lengths(self):
        assert signature(["Apple", "Inc."]) == signature(["Coca", "Cola", "Co."])
        assert hash(signature(["Apple", "Inc."])) == hash(
            signature(["Coca", "Cola", "Co."])
        )

    def test_signature_uses_content_bits_only(self):
        for vec, _ in signature(["Apple", "Inc."]).groups:
            assert len(vec) == SIGNATURE_BITS

    def test_run_lengths_sum_to_token_count(self):
        tokens = tokenize("JONES APPAREL GROUP INC")
        assert signature(tokens).token_count == len(tokens)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            signature([])

    @given(st.lists(token_text, min_size=1, max_size=8))
    def test_collapse_idempotent(self, tokens):
        sig = signature(tokens)
        # realize each group by repeating its first source token
        expansion, pos = [], 0
        for _, run in sig.groups:
            expansion.extend([tokens[pos]] * run)
            pos += run
        assert signature(expansion).groups == sig.groups

    @given(st.lists(token_text, min_size=1, max_size=8))
    def test_no_adjacent_equal_groups(self, tokens):
        vectors = signature(tokens).vectors
        assert all(a != b for a, b in zip(vectors, vectors[1:]))


def make_corpus(raws):
    schema = LabelSchema(("x",))
    mentions = tuple(
        Mention(str(i), raw, tuple(tokenize(raw))) for i, raw in enumerate(raws)
    )
    return Corpus(mentions, schema)


class TestGroupBySignature:
    def test_company_bucket_of_three(self):
        corpus = make_corpus(["Apple Inc.", "Microsoft Corp.", "Coca Cola Co."])
        buckets = group_by_signature(corpus)
        assert len(buckets) == 1
        assert next(iter(buckets.values())) == {"0", "1", "2"}

    def test_empty_corpus(self):
        assert group_by_signature(make_corpus([])) == {}

    def test_distinct_structures_split(self):
        # derived by hand: "Apple Inc." has two alphabetic groups while
        # "6/13/2012" is a single digit-and-slash token, so the content
        # vectors cannot match
        corpus = make_corpus(["Apple Inc.", "6/13/2012"])
        assert len(group_by_signature(corpus)) == 2

    @given(st.lists(st.lists(token_text, min_size=1, max_size=6), min_size=0, max_size=12))
    def test_partition(self, token_lists):
        schema = LabelSchema(("x",))
        mentions = tuple(
            Mention(str(i), " ".join(toks), tuple(toks))
            for i, toks in enumerate(token_lists)
        )
        corpus = Corpus(mentions, schema)
        buckets = group_by_signature(corpus)
        seen = [mid for ids in buckets.values() for mid in ids]
        assert sorted(seen) == sorted(m.id for m in mentions)
        # equivalence: members of a bucket share the signature key
        for sig, ids in buckets.items():
            for mid in ids:
                assert signature(mentions[int(mid)].tokens) == sig
