# backend/app/environments/economy.py

"""
Cobb-Douglas exchange economy.

K agents and K goods, 100 units of each good. A proposal is an allocation
matrix a[i][k] (agent i, good k) whose columns each sum to 100. Agent i
values its row with u_i = prod_k a_ik ** theta_ik.
"""

from __future__ import annotations

import logging
from enum import Enum
from typing import Any, List, Optional, Sequence

import numpy as np

from app.engine.types import CANONICAL_DECIMALS, AgentId, ProposalBody
from app.environments.base import ProposalRejected

logger = logging.getLogger(__name__)

GOOD_QUANTITY = 100.0
COLUMN_TOLERANCE = 1e-6
# LLM allocations like 33.33/33.33/33.33 are rescaled when within 1% of the total
RESCALE_TOLERANCE = 0.01
PREFERRED_WEIGHT = 0.8

TASK_TEMPLATE = (
    "You will collaborate with other agents in a recurring exchange market game.\n"
    "There are {num_of_agents} agents in this market: {list_of_agents}.\n"
    "There are {num_of_goods} goods in the market: {list_of_goods}. "
    "Total quantity of each good is as follows: {total_num_of_goods}.\n"
    "In this game, you will collaboratively decide how to distribute the goods among the "
    "agents. Your goal is to maximize your own utility function."
)

GOAL_TEMPLATE = (
    "Your goal is to maximize your individual utility function by communicating, proposing, "
    "and voting with other agents. Your utility function is {util_func}"
)


class UtilitySetPreset(str, Enum):
    ASYMMETRIC_LITERAL = "asymmetric_literal"
    ASYMMETRIC_NORMALIZED = "asymmetric_normalized"
    SYMMETRIC = "symmetric"
    UNIFORM = "uniform"


def preset_thetas(preset: UtilitySetPreset, k: int) -> np.ndarray:
    """
    Exponent matrix theta[i][k] for a preset with K agents and K goods.

      asymmetric_literal:    own good 0.8, others (1 - 0.8) / K   (sums to < 1)
      asymmetric_normalized: own good 0.8, others (1 - 0.8) / (K - 1)
      symmetric:             everyone weights good 1 at 0.8, others (1 - 0.8) / K
      uniform:               1 / K everywhere
    """
    if k < 2:
        raise ValueError(f"Exchange economy needs K >= 2, got {k}")
    preset = UtilitySetPreset(preset)

    if preset is UtilitySetPreset.UNIFORM:
        return np.full((k, k), 1.0 / k)

    rest = (1.0 - PREFERRED_WEIGHT) / (k - 1 if preset is UtilitySetPreset.ASYMMETRIC_NORMALIZED else k)
    theta = np.full((k, k), rest)
    if preset is UtilitySetPreset.SYMMETRIC:
        theta[:, 0] = PREFERRED_WEIGHT
    else:
        np.fill_diagonal(theta, PREFERRED_WEIGHT)
    return theta


def cobb_douglas(alloc_row: Sequence[float], theta: Sequence[float]) -> float:
    """
    u = prod_k a_k ** theta_k, with 0 ** 0 == 1 (a zero amount only matters
    when its exponent is positive).
    """
    a = np.asarray(alloc_row, dtype=float)
    t = np.asarray(theta, dtype=float)
    if a.shape != t.shape:
        raise ValueError(f"Allocation row {a.shape} and theta {t.shape} differ in shape")
    if np.any(a < 0):
        raise ValueError("Allocation amounts must be nonnegative")
    if np.any((a == 0) & (t > 0)):
        return 0.0
    mask = t != 0
    return float(np.prod(np.power(a[mask], t[mask])))


def group_total(alloc: np.ndarray, thetas: np.ndarray) -> float:
    """U = sum_i u_i over the rows of an allocation."""
    alloc = np.asarray(alloc, dtype=float)
    return float(sum(cobb_douglas(alloc[i], thetas[i]) for i in range(alloc.shape[0])))


def individual_utilities(alloc: np.ndarray, thetas: np.ndarray) -> List[float]:
    alloc = np.asarray(alloc, dtype=float)
    return [cobb_douglas(alloc[i], thetas[i]) for i in range(alloc.shape[0])]


def even_split(k: int) -> np.ndarray:
    return np.full((k, k), GOOD_QUANTITY / k)


def normalize_allocation(matrix: np.ndarray) -> np.ndarray:
    """
    Round to the canonical precision while keeping every column sum at 100:
    the last row absorbs the rounding residue.
    """
    m = np.round(np.asarray(matrix, dtype=float), CANONICAL_DECIMALS)
    if m.shape[0] > 1:
        m[-1] = np.round(GOOD_QUANTITY - m[:-1].sum(axis=0), CANONICAL_DECIMALS)
    return np.clip(m, 0.0, None)


def is_valid_allocation(matrix: np.ndarray, k: int) -> bool:
    m = np.asarray(matrix, dtype=float)
    if m.shape != (k, k) or np.any(m < 0) or not np.all(np.isfinite(m)):
        return False
    return bool(np.all(np.abs(m.sum(axis=0) - GOOD_QUANTITY) <= COLUMN_TOLERANCE))


class EconomyEnvironment:
    env_id = "economy"

    def __init__(
        self,
        preset: UtilitySetPreset | str = UtilitySetPreset.ASYMMETRIC_LITERAL,
        k: int = 3,
        endowment: Optional[np.ndarray] = None,
    ) -> None:
        self.preset = UtilitySetPreset(preset)
        self.k = int(k)
        self.thetas = preset_thetas(self.preset, self.k)
        self.agent_names = [f"Agent {i + 1}" for i in range(self.k)]
        self.good_names = [f"Good {j + 1}" for j in range(self.k)]

        if endowment is None:
            endowment = even_split(self.k)
        endowment = np.asarray(endowment, dtype=float)
        if not is_valid_allocation(endowment, self.k):
            raise ValueError("Initial endowment must be a KxK matrix with column sums of 100")
        self.endowment = endowment

    # ------------------------------------------------------------------
    # Roster / prompt texts
    # ------------------------------------------------------------------

    @property
    def agent_count(self) -> int:
        return self.k

    def agent_ids(self) -> List[AgentId]:
        return [AgentId(index=i, display_name=n) for i, n in enumerate(self.agent_names)]

    def task_description(self) -> str:
        totals = ", ".join(f"{g}: {GOOD_QUANTITY:g}" for g in self.good_names)
        return TASK_TEMPLATE.format(
            num_of_agents=self.k,
            list_of_agents=", ".join(self.agent_names),
            num_of_goods=self.k,
            list_of_goods=", ".join(self.good_names),
            total_num_of_goods=totals,
        )

    def utility_spec(self, agent: int) -> str:
        terms = [
            f"{good}^{theta:.4g}" for good, theta in zip(self.good_names, self.thetas[agent])
        ]
        return "u = " + " * ".join(terms)

    def background(self, agent: int) -> str:
        return GOAL_TEMPLATE.format(util_func=self.utility_spec(agent))

    def proposal_format_text(self) -> str:
        goods = ", ".join(f'"{g}": <amount>' for g in self.good_names)
        rows = ", ".join(f'"{a}": {{{goods}}}' for a in self.agent_names)
        return "{" + rows + "}"

    # ------------------------------------------------------------------
    # Bodies
    # ------------------------------------------------------------------

    def body_from_matrix(self, matrix: np.ndarray) -> ProposalBody:
        m = normalize_allocation(matrix)
        return ProposalBody.from_payload({"allocation": m.tolist()})

    def matrix(self, body: ProposalBody) -> np.ndarray:
        return np.asarray(body.payload["allocation"], dtype=float)

    def parse_body(self, payload: Any) -> ProposalBody:
        """
        Accepts {"allocation": [[...]]}, a bare KxK list, or a mapping
        agent name -> {good name -> amount}.
        """
        if isinstance(payload, ProposalBody):
            payload = payload.payload
        try:
            matrix = self._to_matrix(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProposalRejected(f"Unreadable allocation: {exc}") from exc

        if matrix.shape != (self.k, self.k):
            raise ProposalRejected(f"Allocation must be {self.k}x{self.k}, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
            raise ProposalRejected("Allocation amounts must be finite and nonnegative")

        sums = matrix.sum(axis=0)
        off = np.abs(sums - GOOD_QUANTITY)
        if np.any(off > RESCALE_TOLERANCE * GOOD_QUANTITY):
            raise ProposalRejected(f"Each good must total {GOOD_QUANTITY:g}, got {sums.tolist()}")
        if np.any(off > COLUMN_TOLERANCE):
            matrix = matrix * (GOOD_QUANTITY / sums)

        return self.body_from_matrix(matrix)

    def _to_matrix(self, payload: Any) -> np.ndarray:
        if isinstance(payload, dict) and "allocation" in payload:
            payload = payload["allocation"]
        if isinstance(payload, dict):
            rows = []
            for name in self.agent_names:
                row = payload[name]
                rows.append([float(row[g]) for g in self.good_names])
            return np.asarray(rows, dtype=float)
        return np.asarray(payload, dtype=float)

    def describe_body(self, body: ProposalBody) -> str:
        m = self.matrix(body)
        lines = []
        for i, name in enumerate(self.agent_names):
            parts = ", ".join(f"{g}: {m[i, j]:g}" for j, g in enumerate(self.good_names))
            lines.append(f"{name}: {{{parts}}}")
        return "\n".join(lines)

    def utility(self, agent: int, body: ProposalBody) -> float:
        return cobb_douglas(self.matrix(body)[agent], self.thetas[agent])

    def group_total(self, body: Optional[ProposalBody]) -> float:
        m = self.endowment if body is None else self.matrix(body)
        return group_total(m, self.thetas)

    def individual_utilities(self, body: Optional[ProposalBody]) -> List[float]:
        m = self.endowment if body is None else self.matrix(body)
        return individual_utilities(m, self.thetas)

    def own_utility(self, agent: int, body: Optional[ProposalBody]) -> float:
        m = self.endowment if body is None else self.matrix(body)
        return cobb_douglas(m[agent], self.thetas[agent])

    # ------------------------------------------------------------------
    # Scripted-policy hooks
    # ------------------------------------------------------------------

    def selfish_body(self, agent: int) -> ProposalBody:
        # argmax of own Cobb-Douglas under the per-good totals: take everything
        m = np.zeros((self.k, self.k))
        m[agent] = GOOD_QUANTITY
        return self.body_from_matrix(m)

    def even_body(self, agent: int, others: Sequence[ProposalBody]) -> ProposalBody:
        return self.body_from_matrix(even_split(self.k))

    def blend(
        self, base: ProposalBody, toward: Sequence[ProposalBody], rate: float
    ) -> ProposalBody:
        if not toward:
            return base
        start = self.matrix(base)
        target = np.mean([self.matrix(b) for b in toward], axis=0)
        return self.body_from_matrix(start + rate * (target - start))

    def random_body(self, rng: np.random.Generator, agent: int) -> ProposalBody:
        shares = rng.dirichlet(np.ones(self.k), size=self.k).T  # column j = split of good j
        return self.body_from_matrix(shares * GOOD_QUANTITY)
