# backend/app/environments/base.py

from __future__ import annotations

from typing import Any, List, Optional, Protocol, Sequence

import numpy as np

from app.engine.types import AgentId, ProposalBody


class ProposalRejected(Exception):
    """Environment refused a malformed proposal body."""

    pass


class Environment(Protocol):
    """
    What the engine and the policies need from a task environment.

    Proposal bodies are produced and judged here; the engine only ever
    compares their canonical form.
    """

    env_id: str

    @property
    def agent_count(self) -> int: ...

    def agent_ids(self) -> List[AgentId]: ...

    def task_description(self) -> str: ...

    def background(self, agent: int) -> str: ...

    def utility_spec(self, agent: int) -> Optional[str]: ...

    def proposal_format_text(self) -> str: ...

    def parse_body(self, payload: Any) -> ProposalBody:
        """Validate a raw payload; raise ProposalRejected when malformed."""
        ...

    def describe_body(self, body: ProposalBody) -> str: ...

    def utility(self, agent: int, body: ProposalBody) -> float:
        """Agent's own (nonnegative) utility of a candidate body."""
        ...

    # scripted-policy hooks
    def selfish_body(self, agent: int) -> ProposalBody: ...

    def even_body(self, agent: int, others: Sequence[ProposalBody]) -> ProposalBody: ...

    def blend(
        self, base: ProposalBody, toward: Sequence[ProposalBody], rate: float
    ) -> ProposalBody: ...

    def random_body(self, rng: np.random.Generator, agent: int) -> ProposalBody: ...
