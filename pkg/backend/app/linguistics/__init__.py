# backend/app/linguistics/__init__.py

"""
Linguistics package

Message-level features (length, readability, information difference),
dialogue-act labeling with its duckdb cache, and transition graphs.
"""

from .dialogue_acts import (
    CONTENT_ACTS,
    ChatLabeler,
    DialogueAct,
    LabeledMessage,
    StubLabeler,
    label_dialogue_acts,
    label_transcript,
    parse_labels,
)
from .embeddings import StubEmbedder, info_difference
from .features import RoundFeatures, features_frame, round_features
from .readability import LinguisticsError, count_syllables, fk_grade, word_count
from .transitions import (
    LabeledSimulation,
    TransitionGraph,
    act_ratios,
    edges_frame,
    most_probable_edges,
    to_dot,
    transition_graph,
)

__all__ = [
    "CONTENT_ACTS",
    "ChatLabeler",
    "DialogueAct",
    "LabeledMessage",
    "LabeledSimulation",
    "LinguisticsError",
    "RoundFeatures",
    "StubEmbedder",
    "StubLabeler",
    "TransitionGraph",
    "act_ratios",
    "count_syllables",
    "edges_frame",
    "features_frame",
    "fk_grade",
    "info_difference",
    "label_dialogue_acts",
    "label_transcript",
    "most_probable_edges",
    "parse_labels",
    "round_features",
    "to_dot",
    "transition_graph",
    "word_count",
]
