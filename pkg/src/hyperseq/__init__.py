"""Hyperdimensional n-gram sequence memory for next-state prediction.

Discrete user states become random bipolar hypervectors; n-grams of
states become bound, positionally rotated products; a whole training
corpus becomes one integer accumulator of those products. Querying with
an (n-1)-prefix unbinds a frequency vector whose nearest codebook key
is the predicted next state, and an adaptive twin of the memory absorbs
new windows online in constant time per event.
"""

from .codebook import Codebook, build_codebook
from .dataio import (
    Dataset,
    MarkovSpec,
    SessionRecord,
    SplitResult,
    folds_leave_one_user_out,
    generate_synthetic,
    load_sessions,
    save_sessions,
    split_disjoint,
    split_overlapping,
)
from .errors import HyperseqError
from .evaluation import (
    AgreementReport,
    EvalReport,
    OracleModel,
    PredictionEvent,
    SweepGrid,
    bayes_optimal_accuracy,
    build_oracle,
    evaluate,
    oracle_agreement,
    oracle_predict,
    run_protocol,
    run_sweep,
    sliding_window_accuracy,
    stationary_distribution,
)
from .hdvec import (
    Accumulator,
    bind,
    bind_accumulator,
    bundle_accumulate,
    cosine_similarity,
    count_ops,
    permute,
    random_hypervector,
    sign_quantize,
)
from .model import Model, ModelConfig, QueryResult, train
from .rng import substream
from .seqencode import (
    EncoderConfig,
    NgramRecord,
    SlidingEncoder,
    encode_ngram,
    encode_query,
    session_ngrams,
)

__version__ = "0.1.0"
