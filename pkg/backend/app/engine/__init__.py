# backend/app/engine/__init__.py

"""
Engine package

Round-based Message -> Proposal -> Voting state machine and the transcript
it produces.
"""

from .types import (  # re-export for convenience
    AcceptedEntry,
    AgentId,
    ContextView,
    EngineConfig,
    Message,
    PhaseFailure,
    Proposal,
    ProposalBody,
    RoundRecord,
    Transcript,
)
