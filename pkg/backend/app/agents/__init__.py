# backend/app/agents/__init__.py

"""
Agents package

The policy contract the engine queries, deterministic scripted policies,
and the chat-model policy with its prompts and reply parser.
"""

from .policy import (  # re-export for convenience
    AgentPolicy,
    AgentPolicyError,
    BallotAction,
    MessageAction,
    PromptConfigError,
    ProposalAction,
    ReplyParseError,
)
from .scripted import ScriptedKind, ScriptedPolicy, scripted_ballot, scripted_roster

__all__ = [
    "AgentPolicy",
    "AgentPolicyError",
    "BallotAction",
    "MessageAction",
    "PromptConfigError",
    "ProposalAction",
    "ReplyParseError",
    "ScriptedKind",
    "ScriptedPolicy",
    "scripted_ballot",
    "scripted_roster",
]
