"""Private multiple linear computation over replicated servers."""

from pmlc.field import EvaluationPoints, FieldElement, FieldSpec, default_points
from pmlc.protocol import (
    Answer,
    DecodedResult,
    InvalidParams,
    Params,
    ProtocolError,
    Query,
    advise_E,
    compute_answer,
    decode,
    generate_queries,
    layout,
    sample_noise,
)

__version__ = "0.1.0"
