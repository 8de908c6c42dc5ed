"""Entity-, token-, and component-level F1 with vacuous-precision conventions.

Entity level credits a prediction only when every token of the mention is
labeled correctly; its recall measures prediction coverage, not correctness.
Token level accumulates per-token credit regardless of class; component level
splits the same credit by class. Any precision with a zero denominator is
1.0 (no chance to be wrong), and F1 is 0 when precision + recall is 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import LabelSchema, Mention


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float


def _prf(precision: float, recall: float) -> Prf:
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Prf(precision, recall, f1)


def _ratio(num: int, den: int, vacuous: float = 1.0) -> float:
    # Zero-denominator convention: nothing predicted means no chance to err.
    return vacuous if den == 0 else num / den


@dataclass(frozen=True)
class EvalReport:
    entity: Prf
    token: Prf
    per_component: dict[str, Prf]

    def to_dict(self) -> dict:
        return {
            "entity": vars(self.entity),
            "token": vars(self.token),
            "per_component": {c: vars(p) for c, p in self.per_component.items()},
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def evaluate(
    gold: Sequence[Mention],
    predicted: Mapping[str, Sequence[str] | None],
    schema: LabelSchema,
    include_separators: bool = True,
) -> EvalReport:
    """Score predictions against gold labels.

    ``predicted`` maps mention id to a label sequence; a missing id (or None)
    means the model abstained on that mention. With
    ``include_separators=False``, tokens whose gold label is the separator are
    dropped from token- and component-level counts and the separator class is
    omitted from the report.
    """
    gold_ids = {m.id for m in gold}
    for mid in predicted:
        if mid not in gold_ids:
            raise ValueError(f"prediction for unknown mention id {mid!r}")

    classes = list(schema.labels) if include_separators else list(schema.components)
    entity_correct = entity_predicted = 0
    token_correct = token_predicted = token_total = 0
    comp_correct = {c: 0 for c in classes}
    comp_predicted = {c: 0 for c in classes}
    comp_total = {c: 0 for c in classes}

    for m in gold:
        if m.labels is None:
            raise ValueError(f"gold mention {m.id!r} has no labels")
        labels = predicted.get(m.id)
        if labels is not None and len(labels) != len(m.tokens):
            raise ValueError(
                f"mention {m.id!r}: prediction has {len(labels)} labels for "
                f"{len(m.tokens)} tokens"
            )
        gold_kept = [
            g for g in m.labels if include_separators or g != schema.separator
        ]
        token_total += len(gold_kept)
        for c in classes:
            comp_total[c] += sum(1 for g in gold_kept if g == c)
        if labels is None:
            continue
        entity_predicted += 1
        if tuple(labels) == m.labels:
            entity_correct += 1
        for g, p in zip(m.labels, labels):
            if not include_separators and g == schema.separator:
                continue
            token_predicted += 1
            if p in comp_predicted:
                comp_predicted[p] += 1
            if g == p:
                token_correct += 1
                comp_correct[g] += 1

    # Entity and token recall measure prediction coverage (a model that always
    # predicts scores recall 1.0); component recall is correctness per class.
    return EvalReport(
        entity=_prf(
            _ratio(entity_correct, entity_predicted),
            _ratio(entity_predicted, len(gold)),
        ),
        token=_prf(
            _ratio(token_correct, token_predicted),
            _ratio(token_predicted, token_total),
        ),
        per_component={
            c: _prf(
                _ratio(comp_correct[c], comp_predicted[c]),
                _ratio(comp_correct[c], comp_total[c]),
            )
            for c in classes
        },
    )


def format_report(report: EvalReport) -> str:
    """Fixed-order table for CLI output."""
    lines = [f"{'level':<16}{'precision':>10}{'recall':>10}{'f1':>10}"]

    def row(name: str, p: Prf) -> str:
        return f"{name:<16}{p.precision:>10.4f}{p.recall:>10.4f}{p.f1:>10.4f}"

    lines.append(row("entity", report.entity))
    lines.append(row("token", report.token))
    for comp in report.per_component:
        lines.append(row(f"  {comp}", report.per_component[comp]))
    return "\n".join(lines)
