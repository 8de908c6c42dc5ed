import pytest
from hypothesis import given
from hypothesis import strategies as st

from namestruct.corpus import LabelSchema, Mention
from namestruct.metrics import EvalReport, evaluate, format_report

DATE_SCHEMA = LabelSchema(("month", "day", "year"))

# The worked single-mention example: gold month/day/year over three tokens.
GOLD = [Mention("m", "June 3rd, 2020", ("June", "3rd", "2020"), ("month", "day", "year"))]


class TestWorkedExample:
    def test_perfect_model(self):
        report = evaluate(GOLD, {"m": ["month", "day", "year"]}, DATE_SCHEMA)
        assert report.entity.f1 == 1.0
        assert report.token.f1 == 1.0
        assert all(p.f1 == 1.0 for p in report.per_component.values())

    def test_partially_wrong_model(self):
        report = evaluate(GOLD, {"m": ["month", "month", "year"]}, DATE_SCHEMA)
        assert report.entity.precision == 0.0
        assert report.entity.recall == 1.0
        assert report.entity.f1 == 0.0
        assert round(report.token.precision, 2) == 0.67
        assert report.token.recall == 1.0
        assert round(report.token.f1, 2) == 0.80
        month = report.per_component["month"]
        assert (month.precision, month.recall, round(month.f1, 2)) == (0.5, 1.0, 0.67)
        day = report.per_component["day"]
        assert (day.precision, day.recall, day.f1) == (1.0, 0.0, 0.0)
        assert report.per_component["year"].f1 == 1.0

    def test_abstaining_model(self):
        report = evaluate(GOLD, {}, DATE_SCHEMA)
        assert report.entity.f1 == 0.0
        assert report.token.f1 == 0.0
        for comp in ("month", "day", "year"):
            assert report.per_component[comp].f1 == 0.0
        # a class that never occurs is vacuously perfect
        assert report.per_component["sep"].f1 == 1.0


class TestInvariants:
    def gold(self):
        return [
            Mention("a", "x", ("June", "3", "2020"), ("month", "day", "year")),
            Mention("b", "y", ("May", "2021"), ("month", "year")),
            Mention("c", "z", ("7",), ("day",)),
        ]

    def test_gold_vs_gold_is_perfect(self):
        gold = self.gold()
        predicted = {m.id: list(m.labels) for m in gold}
        report = evaluate(gold, predicted, DATE_SCHEMA)
        assert report.entity.f1 == 1.0
        assert report.token.f1 == 1.0
        assert all(p.f1 == 1.0 for p in report.per_component.values())

    def test_full_coverage_gives_recall_one(self):
        gold = self.gold()
        predicted = {m.id: ["year"] * len(m.tokens) for m in gold}
        report = evaluate(gold, predicted, DATE_SCHEMA)
        assert report.token.recall == 1.0
        assert report.entity.recall == 1.0

    def test_order_invariant(self):
        gold = self.gold()
        predicted = {"a": ["month", "day", "day"], "b": ["month", "year"], "c": ["day"]}
        fwd = evaluate(gold, predicted, DATE_SCHEMA)
        rev = evaluate(list(reversed(gold)), predicted, DATE_SCHEMA)
        assert fwd == rev

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=6))
    def test_micro_consistency(self, label_ids):
        labels = tuple(DATE_SCHEMA.components[i] for i in label_ids)
        gold = [Mention("m", "raw", tuple("t" * (i + 1) for i in range(len(labels))), labels)]
        predicted = {"m": [DATE_SCHEMA.components[(i + 1) % 3] for i in label_ids]}
        report = evaluate(gold, predicted, DATE_SCHEMA)
        # token-level correct count implied by precision * predicted tokens
        token_correct = report.token.precision * len(labels)
        comp_correct = sum(
            report.per_component[c].recall
            * sum(1 for g in labels if g == c)
            for c in DATE_SCHEMA.components
        )
        assert token_correct == pytest.approx(comp_correct)


class TestErrors:
    def test_unknown_prediction_id(self):
        with pytest.raises(ValueError):
            evaluate(GOLD, {"ghost": ["month", "day", "year"]}, DATE_SCHEMA)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(GOLD, {"m": ["month"]}, DATE_SCHEMA)

    def test_unlabeled_gold_rejected(self):
        bare = [Mention("m", "x", ("June",))]
        with pytest.raises(ValueError):
            evaluate(bare, {}, DATE_SCHEMA)


class TestSeparatorHandling:
    GOLD_SEP = [
        Mention(
            "m", "June 3, 2020", ("June", "3", ",", "2020"),
            ("month", "day", "sep", "year"),
        )
    ]

    def test_included_by_default(self):
        report = evaluate(
            self.GOLD_SEP, {"m": ["month", "day", "sep", "year"]}, DATE_SCHEMA
        )
        assert "sep" in report.per_component
        assert report.token.f1 == 1.0

    def test_excluded_on_request(self):
        predicted = {"m": ["month", "day", "year", "year"]}  # wrong on the comma
        include = evaluate(self.GOLD_SEP, predicted, DATE_SCHEMA)
        exclude = evaluate(
            self.GOLD_SEP, predicted, DATE_SCHEMA, include_separators=False
        )
        assert include.token.precision == 0.75
        assert exclude.token.precision == 1.0
        assert "sep" not in exclude.per_component


def test_report_serialization_and_table():
    report = evaluate(GOLD, {"m": ["month", "month", "year"]}, DATE_SCHEMA)
    doc = report.to_dict()
    assert set(doc) == {"entity", "token", "per_component"}
    table = format_report(report)
    assert "entity" in table and "month" in table
