"""Active-learning toolkit that segments entity-name strings into labeled components."""

from .corpus import Corpus, LabelSchema, Mention, gen_synthetic, load_corpus, tokenize
from .structsig import Signature, eval_predicates, group_by_signature, signature
from .embed import HashedNgramProvider, RemoteProvider, build_provider, merge_subwords
from .seqmodel import (
    Prediction,
    SequenceModel,
    TrainConfig,
    load_model,
    new_model,
    predict,
    save_model,
    train,
)
from .metrics import EvalReport, evaluate
from .activeloop import (
    LoopParams,
    SessionComplete,
    SessionEngine,
    VerificationItem,
    load_session,
    run_iteration,
    save_session,
)

__version__ = "0.1.0"
