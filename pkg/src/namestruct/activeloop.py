"""The session engine: informativeness sampling, weak-label propagation,
verification rounds, stop rule, and session persistence.

A session owns one corpus, one model, and four disjoint mention pools
(unlabeled, human-labeled, weak-labeled, verified). Flagged mentions are a
marked subset of the unlabeled pool awaiting relabeling; they take precedence
in query selection. Every mutation keeps the pool sizes summing to the corpus
size.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from . import metrics, seqmodel, structsig
from .corpus import Corpus, LabelSchema, Mention
from .embed import build_provider
from .seqmodel import Prediction, SequenceModel, TrainConfig

SESSION_VERSION = 1
CONVERGENCE_RATE = 0.9


class SessionComplete(Exception):
    """The session has stopped; no further queries are available."""

    def __init__(self, reason: str):
        super().__init__(f"session complete ({reason})")
        self.reason = reason


class StateError(RuntimeError):
    """An operation was attempted in the wrong loop phase."""


class UnknownMentionError(KeyError):
    """A verdict or label referenced a mention outside the expected set."""


@dataclass(frozen=True)
class LoopParams:
    k: int = 50          # weak-label propagation cap per iteration
    p: int = 15          # high-confidence verification batch
    q: int = 15          # low-confidence verification batch
    budget: int = 20     # max human labels
    seed: int = 0

    def __post_init__(self):
        if min(self.k, self.p, self.q, self.budget) < 0:
            raise ValueError("k, p, q, and budget must be >= 0")


@dataclass(frozen=True)
class VerificationItem:
    mention_id: str
    labels: tuple[str, ...]
    confidence: float    # exp(log_prob) / token count
    bucket: str          # "high" or "low"

    def to_dict(self) -> dict:
        return {
            "mention_id": self.mention_id,
            "labels": list(self.labels),
            "confidence": self.confidence,
            "bucket": self.bucket,
        }


@dataclass
class SessionState:
    unlabeled: set[str]
    human: dict[str, tuple[str, ...]] = field(default_factory=dict)
    weak: dict[str, tuple[str, ...]] = field(default_factory=dict)
    verified: dict[str, tuple[str, ...]] = field(default_factory=dict)
    flagged: set[str] = field(default_factory=set)
    budget_used: int = 0
    iteration: int = 0
    pending_query: str | None = None
    pending_verification: list[VerificationItem] | None = None
    low_conf_correct_rate: float | None = None
    low_bucket_full: bool = False
    stop_reason: str | None = None
    history: list[dict] = field(default_factory=list)

    def pool_sizes(self) -> dict[str, int]:
        return {
            "unlabeled": len(self.unlabeled),
            "human": len(self.human),
            "weak": len(self.weak),
            "verified": len(self.verified),
        }

    def labeled_total(self) -> int:
        return len(self.human) + len(self.weak) + len(self.verified)


class SessionEngine:
    """Single-writer state machine driving one active-learning session."""

    def __init__(
        self,
        corpus: Corpus,
        params: LoopParams | None = None,
        model: SequenceModel | None = None,
        provider=None,
        test_mentions: Sequence[Mention] | None = None,
        audit_path: str | Path | None = None,
    ):
        self.corpus = corpus
        self.schema = corpus.schema
        self.params = params or LoopParams()
        self.provider = provider or build_provider(
            model.provider_config if model else seqmodel.DEFAULT_PROVIDER_CONFIG
        )
        self.model = model or seqmodel.new_model(
            self.schema, self.provider.config(), seed=self.params.seed
        )
        self.test_mentions = tuple(test_mentions) if test_mentions else None
        self.audit_path = Path(audit_path) if audit_path else None
        self.reports: list[dict] = []

        self._by_id = corpus.by_id()
        self._signatures = {m.id: structsig.signature(m.tokens) for m in corpus.mentions}
        self._raw_vectors = {
            m.id: structsig.token_vectors(m.tokens) for m in corpus.mentions
        }
        self._features: dict[str, tuple] = {}
        self._pred_cache: dict[str, Prediction] = {}
        self._current: dict = {}

        self.state = SessionState(unlabeled={m.id for m in corpus.mentions})

    # -- lookups -----------------------------------------------------------

    def mention(self, mention_id: str) -> Mention:
        try:
            return self._by_id[mention_id]
        except KeyError:
            raise UnknownMentionError(mention_id) from None

    def _predict(self, mention_id: str) -> Prediction:
        pred = self._pred_cache.get(mention_id)
        if pred is None:
            m = self.mention(mention_id)
            feats = self._features.get(mention_id)
            if feats is None:
                feats = seqmodel.featurize(self.provider, m.tokens)
                self._features[mention_id] = feats
            pred = seqmodel.predict(self.model, m.tokens, features=feats)
            self._pred_cache[mention_id] = pred
        return pred

    def _confidence(self, mention_id: str) -> float:
        pred = self._predict(mention_id)
        return math.exp(pred.log_prob) / len(self.mention(mention_id).tokens)

    # -- sampling scores ----------------------------------------------------

    def representativeness(self, mention_id: str) -> int:
        """How many unlabeled mentions (self included) share this signature."""
        sig = self._signatures[mention_id]
        return sum(1 for mid in self.state.unlabeled if self._signatures[mid] == sig)

    def log_uncertainty(self, mention_id: str) -> float:
        if self.model.train_runs == 0:
            return 0.0
        pred = self._predict(mention_id)
        return math.log(len(self.mention(mention_id).tokens)) - pred.log_prob

    def uncertainty(self, mention_id: str) -> float:
        """Length-normalized inverse path probability, 1.0 before any training."""
        return math.exp(self.log_uncertainty(mention_id))

    def log_informative_score(self, mention_id: str) -> float:
        return math.log(self.representativeness(mention_id)) + self.log_uncertainty(
            mention_id
        )

    def informative_score(self, mention_id: str) -> float:
        return math.exp(self.log_informative_score(mention_id))

    def _rep_counts(self) -> dict[str, int]:
        buckets: dict[structsig.Signature, int] = {}
        for mid in self.state.unlabeled:
            sig = self._signatures[mid]
            buckets[sig] = buckets.get(sig, 0) + 1
        return {mid: buckets[self._signatures[mid]] for mid in self.state.unlabeled}

    # -- loop steps ----------------------------------------------------------

    def _check_stop(self) -> str | None:
        if self.state.stop_reason:
            return self.state.stop_reason
        stop, reason = self.should_stop()
        if stop:
            self.state.stop_reason = reason
            self.state.history.append({"event": "stop", "reason": reason})
        return self.state.stop_reason

    def should_stop(self) -> tuple[bool, str | None]:
        if self.state.stop_reason:
            return True, self.state.stop_reason
        if self.state.budget_used >= self.params.budget:
            return True, "budget"
        if (
            self.state.low_bucket_full
            and self.state.low_conf_correct_rate is not None
            and self.state.low_conf_correct_rate >= CONVERGENCE_RATE
        ):
            return True, "converged"
        if not self.state.unlabeled:
            return True, "exhausted"
        return False, None

    def select_query(self) -> str:
        """Pick the next mention for human labeling.

        Flagged mentions take precedence; otherwise the whole unlabeled pool
        competes on informative score (representativeness times uncertainty,
        compared in log space). Ties break toward the smallest mention id.
        """
        reason = self._check_stop()
        if reason:
            raise SessionComplete(reason)
        if self.state.pending_verification is not None:
            raise StateError("verification verdicts are pending")
        if self.state.pending_query is not None:
            return self.state.pending_query
        candidates = self.state.flagged or self.state.unlabeled
        reps = self._rep_counts()
        trained = self.model.train_runs > 0
        best_id: str | None = None
        best_score = -math.inf
        for mid in sorted(candidates):
            score = math.log(reps[mid])
            if trained:
                score += self.log_uncertainty(mid)
            if score > best_score:
                best_id, best_score = mid, score
        self.state.pending_query = best_id
        self.state.history.append(
            {"event": "query", "mention_id": best_id, "iteration": self.state.iteration}
        )
        return best_id

    def submit_label(self, mention_id: str, labels: Sequence[str]) -> dict:
        """Record a human label, propagate, retrain, and pick verification batches."""
        reason = self._check_stop()
        if reason:
            raise SessionComplete(reason)
        if self.state.pending_verification is not None:
            raise StateError("verification verdicts are pending")
        if self.state.pending_query is None:
            self.select_query()
        if mention_id != self.state.pending_query:
            raise StateError(
                f"label for {mention_id!r} but pending query is "
                f"{self.state.pending_query!r}"
            )
        m = self.mention(mention_id)
        self.schema.validate_labels(labels, len(m.tokens))
        labels = tuple(labels)

        self.state.unlabeled.discard(mention_id)
        self.state.flagged.discard(mention_id)
        self.state.human[mention_id] = labels
        self.state.budget_used += 1
        self.state.pending_query = None

        weak_added = self.propagate_weak_labels(mention_id)
        trace = self._train()
        items = self.select_verification()
        self.state.pending_verification = items

        test_f1 = self._evaluate_test()
        self._current = {
            "iteration": self.state.iteration,
            "queried": mention_id,
            "weak_added": len(weak_added),
            "loss_trace": trace,
            **(test_f1 or {}),
        }
        self.state.history.append(
            {
                "event": "label",
                "mention_id": mention_id,
                "weak_added": sorted(weak_added),
                "epochs": len(trace),
            }
        )
        return {
            "mention_id": mention_id,
            "weak_labeled_count": len(weak_added),
            "weak_labeled_ids": sorted(weak_added),
            "loss_trace": trace,
            "verification": [it.to_dict() for it in items],
        }

    def propagate_weak_labels(self, source_id: str) -> dict[str, tuple[str, ...]]:
        """Transfer the source's labels to signature twins, at most k of them.

        Exact content-vector-sequence twins receive the labels positionally.
        Twins whose collapsed signature matches but whose run lengths differ
        receive labels only when every source group carries a single label;
        each target group then takes its source group's label. Scans the
        unlabeled pool in ascending id order.
        """
        labels = self.state.human.get(source_id)
        if labels is None:
            raise UnknownMentionError(source_id)
        src_sig = self._signatures[source_id]
        src_raw = self._raw_vectors[source_id]

        group_labels: list[str | None] = []
        homogeneous = True
        pos = 0
        for _, run in src_sig.groups:
            distinct = set(labels[pos:pos + run])
            pos += run
            if len(distinct) == 1:
                group_labels.append(distinct.pop())
            else:
                group_labels.append(None)
                homogeneous = False

        added: dict[str, tuple[str, ...]] = {}
        for mid in sorted(self.state.unlabeled):
            if len(added) >= self.params.k:
                break
            if self._signatures[mid] != src_sig:
                continue
            if self._raw_vectors[mid] == src_raw:
                new_labels = labels
            elif homogeneous:
                target = self._signatures[mid]
                new_labels = tuple(
                    lab
                    for lab, (_, run) in zip(group_labels, target.groups)
                    for _ in range(run)
                )
            else:
                continue
            self.state.unlabeled.discard(mid)
            self.state.flagged.discard(mid)
            self.state.weak[mid] = new_labels
            added[mid] = new_labels
        return added

    def _training_mentions(self) -> list[Mention]:
        out = []
        for pool in (self.state.human, self.state.weak, self.state.verified):
            for mid, labels in pool.items():
                out.append(dataclasses.replace(self._by_id[mid], labels=labels))
        out.sort(key=lambda m: m.id)
        return out

    def _train(self) -> list[float]:
        mentions = self._training_mentions()
        config = TrainConfig(seed=self.params.seed + self.state.iteration)
        trace = seqmodel.train(
            self.model, mentions, config, provider=self.provider,
            feature_cache=self._features,
        )
        self._pred_cache.clear()
        self.state.history.append({"event": "train", "epochs": len(trace)})
        return trace

    def select_verification(self) -> list[VerificationItem]:
        """Bottom-q low-confidence plus top-p high-confidence machine labels.

        Ranks the unlabeled pool by length-normalized path probability. When
        the pool is smaller than p + q, the low bucket fills first.
        """
        pool = sorted(self.state.unlabeled)
        if not pool:
            return []
        ranked = sorted(pool, key=lambda mid: (self._confidence(mid), mid))
        low_n = min(self.params.q, len(ranked))
        high_n = min(self.params.p, len(ranked) - low_n)
        items = [
            VerificationItem(
                mid, tuple(self._predict(mid).labels), self._confidence(mid), "low"
            )
            for mid in ranked[:low_n]
        ]
        for mid in reversed(ranked[len(ranked) - high_n:]):
            items.append(
                VerificationItem(
                    mid, tuple(self._predict(mid).labels), self._confidence(mid), "high"
                )
            )
        return items

    def apply_feedback(self, verdicts: Mapping[str, str | bool]) -> dict:
        """Apply correct/incorrect verdicts for the pending verification batch.

        Correct mentions move to the verified pool with their machine labels;
        incorrect ones stay unlabeled and are flagged for relabeling. The
        low-bucket correct rate feeds the convergence stop rule.
        """
        if self.state.pending_verification is None:
            raise StateError("no verification batch is pending")
        items = {it.mention_id: it for it in self.state.pending_verification}
        unknown = sorted(set(verdicts) - set(items))
        if unknown:
            raise UnknownMentionError(unknown[0])

        low_ids = {mid for mid, it in items.items() if it.bucket == "low"}
        low_total = low_correct = 0
        for mid in sorted(verdicts):
            verdict = verdicts[mid]
            correct = verdict in (True, "correct")
            if not correct and verdict not in (False, "incorrect"):
                raise ValueError(f"verdict for {mid!r} must be correct or incorrect")
            if correct:
                self.state.unlabeled.discard(mid)
                self.state.flagged.discard(mid)
                self.state.verified[mid] = items[mid].labels
            else:
                self.state.flagged.add(mid)
            if mid in low_ids:
                low_total += 1
                low_correct += int(correct)

        if low_total:
            self.state.low_conf_correct_rate = low_correct / low_total
        else:
            self.state.low_conf_correct_rate = None
        self.state.low_bucket_full = (
            len(low_ids) == self.params.q and low_total == len(low_ids)
        )
        self.state.pending_verification = None
        self.state.history.append(
            {
                "event": "feedback",
                "verdicts": len(verdicts),
                "low_conf_correct_rate": self.state.low_conf_correct_rate,
            }
        )

        self._finish_iteration()
        reason = self._check_stop()
        return {
            "stopped": reason is not None,
            "stop_reason": reason,
            "low_conf_correct_rate": self.state.low_conf_correct_rate,
            "pools": self.state.pool_sizes(),
        }

    def _finish_iteration(self) -> None:
        record = {
            **self._current,
            "budget_used": self.state.budget_used,
            "pools": self.state.pool_sizes(),
            "flagged": len(self.state.flagged),
            "low_conf_correct_rate": self.state.low_conf_correct_rate,
            "low_bucket_full": self.state.low_bucket_full,
        }
        self._current = {}
        self.reports.append(record)
        if self.audit_path is not None:
            with self.audit_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        self.state.iteration += 1

    def _evaluate_test(self) -> dict | None:
        if not self.test_mentions:
            return None
        predicted = {
            m.id: seqmodel.predict(self.model, m.tokens, provider=self.provider).labels
            for m in self.test_mentions
        }
        report = metrics.evaluate(self.test_mentions, predicted, self.schema)
        return {"entity_f1": report.entity.f1, "token_f1": report.token.f1}

    def latest_f1(self) -> dict | None:
        for record in reversed(self.reports):
            if "entity_f1" in record:
                return {
                    "entity_f1": record["entity_f1"],
                    "token_f1": record["token_f1"],
                }
        return None

    def predict_mention(self, raw_or_tokens: str | Sequence[str]) -> Prediction:
        if isinstance(raw_or_tokens, str):
            from .corpus import tokenize

            tokens = tokenize(raw_or_tokens)
        else:
            tokens = list(raw_or_tokens)
        return seqmodel.predict(self.model, tokens, provider=self.provider)

    def status(self) -> dict:
        return {
            "pools": self.state.pool_sizes(),
            "flagged": len(self.state.flagged),
            "budget_used": self.state.budget_used,
            "budget_max": self.params.budget,
            "iteration": self.state.iteration,
            "low_conf_correct_rate": self.state.low_conf_correct_rate,
            "stopped": self.state.stop_reason is not None,
            "stop_reason": self.state.stop_reason,
            "f1": self.latest_f1(),
        }


def run_iteration(
    engine: SessionEngine,
    label_fn: Callable[[Mention], Sequence[str]],
    verdict_fn: Callable[[Sequence[VerificationItem]], Mapping[str, str | bool]],
) -> dict:
    """One full loop pass: query, label, propagate+train+verify, feedback.

    Raises SessionComplete when the session has already stopped.
    """
    mention_id = engine.select_query()
    labels = label_fn(engine.mention(mention_id))
    engine.submit_label(mention_id, labels)
    verdicts = verdict_fn(engine.state.pending_verification)
    engine.apply_feedback(verdicts)
    return engine.reports[-1]


# -- persistence -------------------------------------------------------------


def _state_to_dict(state: SessionState) -> dict:
    return {
        "unlabeled": sorted(state.unlabeled),
        "human": {k: list(v) for k, v in sorted(state.human.items())},
        "weak": {k: list(v) for k, v in sorted(state.weak.items())},
        "verified": {k: list(v) for k, v in sorted(state.verified.items())},
        "flagged": sorted(state.flagged),
        "budget_used": state.budget_used,
        "iteration": state.iteration,
        "pending_query": state.pending_query,
        "pending_verification": (
            None
            if state.pending_verification is None
            else [it.to_dict() for it in state.pending_verification]
        ),
        "low_conf_correct_rate": state.low_conf_correct_rate,
        "low_bucket_full": state.low_bucket_full,
        "stop_reason": state.stop_reason,
        "history": state.history,
    }


def _state_from_dict(doc: dict) -> SessionState:
    pending = doc.get("pending_verification")
    return SessionState(
        unlabeled=set(doc["unlabeled"]),
        human={k: tuple(v) for k, v in doc["human"].items()},
        weak={k: tuple(v) for k, v in doc["weak"].items()},
        verified={k: tuple(v) for k, v in doc["verified"].items()},
        flagged=set(doc["flagged"]),
        budget_used=doc["budget_used"],
        iteration=doc["iteration"],
        pending_query=doc.get("pending_query"),
        pending_verification=(
            None
            if pending is None
            else [
                VerificationItem(
                    it["mention_id"], tuple(it["labels"]), it["confidence"], it["bucket"]
                )
                for it in pending
            ]
        ),
        low_conf_correct_rate=doc.get("low_conf_correct_rate"),
        low_bucket_full=doc.get("low_bucket_full", False),
        stop_reason=doc.get("stop_reason"),
        history=doc.get("history", []),
    )


def session_to_dict(engine: SessionEngine) -> dict:
    return {
        "format_version": SESSION_VERSION,
        "schema": engine.schema.to_dict(),
        "params": dataclasses.asdict(engine.params),
        "corpus": [m.to_record() for m in engine.corpus.mentions],
        "test_mentions": (
            None
            if engine.test_mentions is None
            else [m.to_record() for m in engine.test_mentions]
        ),
        "state": _state_to_dict(engine.state),
        "model": seqmodel.model_to_dict(engine.model),
        "reports": engine.reports,
    }


def save_session(engine: SessionEngine, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(session_to_dict(engine)), encoding="utf-8")
    tmp.replace(path)


def session_from_dict(doc: dict, audit_path: str | Path | None = None) -> SessionEngine:
    try:
        version = doc["format_version"]
        if version > SESSION_VERSION:
            raise seqmodel.CheckpointError(
                f"session version {version} is newer than supported ({SESSION_VERSION})"
            )
        schema = LabelSchema.from_dict(doc["schema"])
        mentions = tuple(
            Mention(
                id=rec["id"],
                raw=rec["mention"],
                tokens=tuple(rec["tokens"]),
                labels=tuple(rec["labels"]) if rec.get("labels") is not None else None,
            )
            for rec in doc["corpus"]
        )
        corpus = Corpus(mentions, schema)
        test_mentions = None
        if doc.get("test_mentions") is not None:
            test_mentions = tuple(
                Mention(
                    id=rec["id"],
                    raw=rec["mention"],
                    tokens=tuple(rec["tokens"]),
                    labels=tuple(rec["labels"]) if rec.get("labels") is not None else None,
                )
                for rec in doc["test_mentions"]
            )
        params = LoopParams(**doc["params"])
        model = seqmodel.model_from_dict(doc["model"])
        engine = SessionEngine(
            corpus,
            params=params,
            model=model,
            test_mentions=test_mentions,
            audit_path=audit_path,
        )
        engine.state = _state_from_dict(doc["state"])
        engine.reports = doc.get("reports", [])
        return engine
    except seqmodel.CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise seqmodel.CheckpointError(f"corrupt session checkpoint: {exc}") from exc


def load_session(path: str | Path, audit_path: str | Path | None = None) -> SessionEngine:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise seqmodel.CheckpointError(f"cannot read session checkpoint: {exc}") from exc
    if not isinstance(doc, dict):
        raise seqmodel.CheckpointError("corrupt session checkpoint: not a JSON object")
    return session_from_dict(doc, audit_path=audit_path)


def check_audit_records(records: Iterable[Mapping]) -> None:
    """Validate loop bookkeeping invariants over an audit log.

    Checks that pool sizes always sum to the same total and that the human
    label budget increases by exactly one per iteration record. Raises
    AssertionError on the first violation.
    """
    total = None
    prev_budget = None
    for i, rec in enumerate(records):
        pools = rec["pools"]
        pool_sum = sum(pools.values())
        if total is None:
            total = pool_sum
        assert pool_sum == total, (
            f"record {i}: pool sizes sum to {pool_sum}, expected {total}"
        )
        if prev_budget is not None:
            assert rec["budget_used"] == prev_budget + 1, (
                f"record {i}: budget_used {rec['budget_used']} after {prev_budget}"
            )
        prev_budget = rec["budget_used"]
        assert pools["unlabeled"] >= rec.get("flagged", 0), (
            f"record {i}: more flagged than unlabeled mentions"
        )
