"""Binary-hash similarity retrieval.

Pipeline: real-valued embeddings are binarized by thresholding each
vector at a percentile of its own components, the packed codes go into
an exact Hamming-distance index, and retrieval quality is scored with
average precision and mAP, including a threshold-sweep experiment.
"""

from hashfind.embeddings import (
    DatasetManifest,
    DuplicateIdError,
    EmbeddingError,
    EmbeddingRecord,
    EmbeddingSet,
    load_embeddings,
    save_embeddings,
)
from hashfind.encoding import (
    MAX_CODE_LENGTH,
    BinaryCode,
    CodeSet,
    EncodingError,
    binarize,
    encode_set,
    percentile_threshold,
)
from hashfind.evaluation import (
    ApResult,
    EvalReport,
    SweepReport,
    average_precision,
    evaluate,
    sweep,
)
from hashfind.index import (
    HashIndex,
    Hit,
    IndexFormatError,
    RetrievalResult,
    batch_query,
    build_index,
    deserialize_index,
    hamming,
    query,
    resolve_threads,
    serialize_index,
)
from hashfind.synthetic import generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ApResult",
    "BinaryCode",
    "CodeSet",
    "DatasetManifest",
    "DuplicateIdError",
    "EmbeddingError",
    "EmbeddingRecord",
    "EmbeddingSet",
    "EncodingError",
    "EvalReport",
    "HashIndex",
    "Hit",
    "IndexFormatError",
    "MAX_CODE_LENGTH",
    "RetrievalResult",
    "SweepReport",
    "average_precision",
    "batch_query",
    "binarize",
    "build_index",
    "deserialize_index",
    "encode_set",
    "evaluate",
    "generate_synthetic",
    "hamming",
    "load_embeddings",
    "percentile_threshold",
    "query",
    "resolve_threads",
    "save_embeddings",
    "serialize_index",
    "sweep",
]
