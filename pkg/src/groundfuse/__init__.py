"""groundfuse: training-free compositional image-text alignment.

Captions are decomposed into groundable phrases, each phrase is localized to
a box by an open-vocabulary detector, masked sub-images are embedded, and the
global image embedding is adjusted by the cosine-weighted sum of sub-image
embeddings before scoring against the full caption. Downstream protocols
cover two-alternative matching and top-K retrieval re-ranking, all runnable
offline against deterministic fixture backends.
"""

from .backends import (
    Detection,
    FixtureDetector,
    FixtureEmbedder,
    FixtureLlm,
    FixtureStore,
    HttpDetector,
    HttpEmbedder,
    HttpLlm,
    ProviderConfig,
    ProviderKind,
    build_detector,
    build_embedder,
    build_llm,
    prompt_digest,
)
from .core import (
    BoundingBox,
    EmbeddingVector,
    Image,
    Similarity,
    apply_mask,
    apply_multi_mask,
    as_embedding,
    cosine_similarity,
    l2_normalize,
    union_box,
)
from .decompose import (
    CaptionDecomposition,
    DecompositionPolicy,
    DecompositionSource,
    EntityPhrase,
    RelationTuple,
    Stage1Result,
    decompose,
    decompose_stage1,
    decompose_stage2,
    parse_svo,
)
from .errors import (
    BackendError,
    BoxOutOfBounds,
    ConfigError,
    DecompositionFailed,
    DimensionMismatch,
    EmptyInput,
    GroundfuseError,
    GroundingEmpty,
    MalformedReply,
    MissingFixture,
    ProviderError,
    UnparseableCaption,
    ZeroVector,
)
from .evaluation import (
    Candidate,
    MatchOutcome,
    MatchRecord,
    RetrievalOutcome,
    RetrievalQuery,
    VariedComponent,
    baseline_topk,
    match_decide,
    matching_accuracy,
    recall_at_k,
    rerank,
)
from .fusion import (
    FusionConfig,
    GroundedEntity,
    MissingEntityPolicy,
    PairScore,
    Providers,
    RelationMask,
    WeightMode,
    entity_score,
    fuse_general,
    fuse_triplet,
    relation_embedding,
    score_pair,
)
from .prompts import PromptTemplates

__version__ = "0.1.0"
