"""The labeling model: condensed embeddings + structure bits into a linear-chain CRF.

Per token, the provider embedding passes through a rectified dense layer, is
concatenated with the 15 structure-predicate bits, and a second dense layer
maps the result to per-label emission scores. A transition matrix with
virtual start/stop states completes the CRF; decoding is Viterbi and training
minimizes the negative log likelihood with analytic gradients (forward-
backward marginals for the CRF, backpropagation for the dense layers).

All quantities are computed in log space, double precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import structsig
from .corpus import LabelSchema, Mention
from .embed import build_provider

CHECKPOINT_VERSION = 1
DEFAULT_HIDDEN = 50
DEFAULT_PROVIDER_CONFIG = {"kind": "hashed-ngram", "dimension": 64}


class CheckpointError(ValueError):
    """Model checkpoint is corrupt or has an unsupported version."""


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite loss."""


@dataclass
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.01
    lr_decay: float = 1e-4
    early_stop_delta: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.learning_rate, self.lr_decay, self.early_stop_delta) <= 0:
            raise ValueError("all TrainConfig values must be positive")


@dataclass
class Prediction:
    labels: list[str]
    log_prob: float
    score: float


@dataclass
class SequenceModel:
    schema: LabelSchema
    provider_config: dict
    w1: np.ndarray          # (embed_dim, hidden)
    b1: np.ndarray          # (hidden,)
    w2: np.ndarray          # (hidden + 15, n_labels)
    b2: np.ndarray          # (n_labels,)
    transitions: np.ndarray  # (n_labels + 2, n_labels + 2), virtual start/stop last
    seed: int = 0
    train_runs: int = 0

    @property
    def n_labels(self) -> int:
        return len(self.schema.labels)

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def param_blocks(self) -> dict[str, np.ndarray]:
        return {
            "w1": self.w1, "b1": self.b1,
            "w2": self.w2, "b2": self.b2,
            "transitions": self.transitions,
        }

    def copy(self) -> "SequenceModel":
        return replace(
            self,
            w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(),
            transitions=self.transitions.copy(),
        )


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def new_model(
    schema: LabelSchema,
    provider_config: dict | None = None,
    hidden: int = DEFAULT_HIDDEN,
    seed: int = 0,
) -> SequenceModel:
    cfg = dict(provider_config or DEFAULT_PROVIDER_CONFIG)
    dim = cfg["dimension"]
    n_labels = len(schema.labels)
    rng = np.random.default_rng(seed)
    return SequenceModel(
        schema=schema,
        provider_config=cfg,
        w1=_glorot(rng, dim, hidden),
        b1=np.zeros(hidden),
        w2=_glorot(rng, hidden + structsig.NUM_PREDICATES, n_labels),
        b2=np.zeros(n_labels),
        transitions=np.zeros((n_labels + 2, n_labels + 2)),
        seed=seed,
    )


def featurize(provider, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Embedding matrix and 15-bit structure matrix for a token sequence."""
    n = len(tokens)
    embeddings = provider.embed_mention(tokens)
    structure = np.array(
        [structsig.eval_predicates(t, i, n) for i, t in enumerate(tokens)],
        dtype=np.float64,
    )
    return embeddings, structure


def _emission_matrix(
    model: SequenceModel, embeddings: np.ndarray, structure: np.ndarray
) -> np.ndarray:
    hidden = np.maximum(embeddings @ model.w1 + model.b1, 0.0)
    concat = np.concatenate([hidden, structure], axis=1)
    return concat @ model.w2 + model.b2


def emissions(
    model: SequenceModel,
    tokens: Sequence[str],
    provider=None,
    features: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Per-token, per-label emission scores (tokens x labels)."""
    if features is None:
        provider = provider or build_provider(model.provider_config)
        features = featurize(provider, tokens)
    return _emission_matrix(model, *features)


def viterbi_decode(emission: np.ndarray, transitions: np.ndarray) -> tuple[list[int], float]:
    """Best label sequence and its unnormalized path score.

    Path score includes the start and stop transitions. Ties break toward the
    lower label index at every backpointer (np.argmax takes the first max).
    """
    n, n_labels = emission.shape
    start, stop = n_labels, n_labels + 1
    delta = transitions[start, :n_labels] + emission[0]
    backptr = np.zeros((n, n_labels), dtype=np.intp)
    for t in range(1, n):
        scores = delta[:, None] + transitions[:n_labels, :n_labels]
        backptr[t] = np.argmax(scores, axis=0)
        delta = scores[backptr[t], np.arange(n_labels)] + emission[t]
    final = delta + transitions[:n_labels, stop]
    best = int(np.argmax(final))
    path = [best]
    for t in range(n - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])


def _forward(emission: np.ndarray, transitions: np.ndarray) -> tuple[np.ndarray, float]:
    n, n_labels = emission.shape
    start, stop = n_labels, n_labels + 1
    alpha = np.empty((n, n_labels))
    alpha[0] = transitions[start, :n_labels] + emission[0]
    for t in range(1, n):
        alpha[t] = (
            logsumexp(alpha[t - 1][:, None] + transitions[:n_labels, :n_labels], axis=0)
            + emission[t]
        )
    log_z = float(logsumexp(alpha[n - 1] + transitions[:n_labels, stop]))
    return alpha, log_z


def _backward(emission: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    n, n_labels = emission.shape
    stop = n_labels + 1
    beta = np.empty((n, n_labels))
    beta[n - 1] = transitions[:n_labels, stop]
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(
            transitions[:n_labels, :n_labels] + (emission[t + 1] + beta[t + 1])[None, :],
            axis=1,
        )
    return beta


def log_partition(emission: np.ndarray, transitions: np.ndarray) -> float:
    """log of the sum over all label sequences of exp(path score)."""
    return _forward(emission, transitions)[1]


def sequence_score(
    emission: np.ndarray, transitions: np.ndarray, labels: Sequence[int]
) -> float:
    n, n_labels = emission.shape
    start, stop = n_labels, n_labels + 1
    score = transitions[start, labels[0]] + emission[0, labels[0]]
    for t in range(1, n):
        score += transitions[labels[t - 1], labels[t]] + emission[t, labels[t]]
    return float(score + transitions[labels[n - 1], stop])


def _crf_loss_grads(
    emission: np.ndarray, transitions: np.ndarray, labels: Sequence[int]
) -> tuple[float, np.ndarray, np.ndarray]:
    """NLL of the gold path plus gradients wrt emissions and transitions.

    Gradient = expected statistics under the model minus observed gold
    statistics, from forward-backward marginals.
    """
    n, n_labels = emission.shape
    start, stop = n_labels, n_labels + 1
    alpha, log_z = _forward(emission, transitions)
    beta = _backward(emission, transitions)
    loss = log_z - sequence_score(emission, transitions, labels)

    unary = np.exp(alpha + beta - log_z)
    g_emission = unary.copy()
    g_emission[np.arange(n), labels] -= 1.0

    g_trans = np.zeros_like(transitions)
    g_trans[start, :n_labels] = unary[0]
    g_trans[start, labels[0]] -= 1.0
    g_trans[:n_labels, stop] = unary[n - 1]
    g_trans[labels[n - 1], stop] -= 1.0
    for t in range(n - 1):
        pairwise = np.exp(
            alpha[t][:, None]
            + transitions[:n_labels, :n_labels]
            + (emission[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
        g_trans[:n_labels, :n_labels] += pairwise
        g_trans[labels[t], labels[t + 1]] -= 1.0
    return float(loss), g_emission, g_trans


def _mention_loss_grads(
    model: SequenceModel,
    embeddings: np.ndarray,
    structure: np.ndarray,
    labels: Sequence[int],
) -> tuple[float, dict[str, np.ndarray]]:
    pre_act = embeddings @ model.w1 + model.b1
    hidden = np.maximum(pre_act, 0.0)
    concat = np.concatenate([hidden, structure], axis=1)
    emission = concat @ model.w2 + model.b2

    loss, g_emission, g_trans = _crf_loss_grads(emission, model.transitions, labels)

    g_w2 = concat.T @ g_emission
    g_b2 = g_emission.sum(axis=0)
    g_hidden = (g_emission @ model.w2.T)[:, : model.hidden]
    g_pre = g_hidden * (pre_act > 0.0)
    g_w1 = embeddings.T @ g_pre
    g_b1 = g_pre.sum(axis=0)
    return loss, {
        "w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2, "transitions": g_trans,
    }


def _label_indices(model: SequenceModel, mention: Mention) -> list[int]:
    if mention.labels is None:
        raise ValueError(f"mention {mention.id!r} has no labels")
    return [model.schema.index_of(lab) for lab in mention.labels]


def nll(model: SequenceModel, mentions: Sequence[Mention], provider=None) -> float:
    """Total negative log likelihood of the gold paths."""
    provider = provider or build_provider(model.provider_config)
    total = 0.0
    for m in mentions:
        labels = _label_indices(model, m)
        emission = emissions(model, m.tokens, provider=provider)
        total += log_partition(emission, model.transitions) - sequence_score(
            emission, model.transitions, labels
        )
    return total


def train(
    model: SequenceModel,
    mentions: Sequence[Mention],
    config: TrainConfig | None = None,
    provider=None,
    feature_cache: dict | None = None,
) -> list[float]:
    """SGD on the NLL, one update per mention, warm-starting from ``model``.

    The learning rate for epoch e is lr / (1 + decay * e); data are shuffled
    each epoch with the config's seeded generator. Stops after the epoch
    budget or when consecutive epoch losses differ by less than the early
    stop delta. Mutates ``model`` in place and returns the per-epoch loss
    trace.
    """
    if not mentions:
        raise ValueError("need at least one labeled mention")
    config = config or TrainConfig()
    provider = provider or build_provider(model.provider_config)

    prepared = []
    for m in mentions:
        labels = _label_indices(model, m)
        if feature_cache is not None and m.id in feature_cache:
            feats = feature_cache[m.id]
        else:
            feats = featurize(provider, m.tokens)
            if feature_cache is not None:
                feature_cache[m.id] = feats
        prepared.append((feats[0], feats[1], labels))

    rng = np.random.default_rng(config.seed)
    params = model.param_blocks()
    trace: list[float] = []
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.lr_decay * epoch)
        total = 0.0
        for i in rng.permutation(len(prepared)):
            embeddings, structure, labels = prepared[i]
            loss, grads = _mention_loss_grads(model, embeddings, structure, labels)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, mention index {i}"
                )
            total += loss
            for name, grad in grads.items():
                params[name] -= lr * grad
        trace.append(total)
        if epoch >= 1 and abs(trace[-1] - trace[-2]) < config.early_stop_delta:
            break
    model.train_runs += 1
    return trace


def predict(
    model: SequenceModel,
    tokens: Sequence[str],
    provider=None,
    features: tuple[np.ndarray, np.ndarray] | None = None,
) -> Prediction:
    """Viterbi decode with a normalized log probability for the best path."""
    emission = emissions(model, tokens, provider=provider, features=features)
    path, score = viterbi_decode(emission, model.transitions)
    log_z = log_partition(emission, model.transitions)
    names = model.schema.labels
    return Prediction(
        labels=[names[i] for i in path],
        log_prob=min(0.0, score - log_z),
        score=score,
    )


def model_to_dict(model: SequenceModel) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "schema": model.schema.to_dict(),
        "provider": model.provider_config,
        "seed": model.seed,
        "train_runs": model.train_runs,
        "params": {name: arr.tolist() for name, arr in model.param_blocks().items()},
    }


def save_model(model: SequenceModel, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(model_to_dict(model)), encoding="utf-8")
    tmp.replace(path)


def model_from_dict(doc: dict) -> SequenceModel:
    try:
        version = doc["format_version"]
        if version > CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {version} is newer than supported "
                f"({CHECKPOINT_VERSION})"
            )
        schema = LabelSchema.from_dict(doc["schema"])
        params = doc["params"]
        model = SequenceModel(
            schema=schema,
            provider_config=dict(doc["provider"]),
            w1=np.asarray(params["w1"], dtype=np.float64),
            b1=np.asarray(params["b1"], dtype=np.float64),
            w2=np.asarray(params["w2"], dtype=np.float64),
            b2=np.asarray(params["b2"], dtype=np.float64),
            transitions=np.asarray(params["transitions"], dtype=np.float64),
            seed=doc["seed"],
            train_runs=doc.get("train_runs", 0),
        )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt model checkpoint: {exc}") from exc
    n = model.n_labels
    if model.transitions.shape != (n + 2, n + 2) or model.w2.shape[1] != n:
        raise CheckpointError("corrupt model checkpoint: parameter shapes inconsistent")
    return model


def load_model(path: str | Path) -> SequenceModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read model checkpoint: {exc}") from exc
    if not isinstance(doc, dict):
        raise CheckpointError("corrupt model checkpoint: not a JSON object")
    return model_from_dict(doc)
