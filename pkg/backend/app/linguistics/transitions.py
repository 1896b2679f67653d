# backend/app/linguistics/transitions.py

"""
Dialogue-act transition graph.

An edge A -> B relates an act A in agent i's message at round r-1 to an act B
in some other agent's message at round r. Round 0 is a virtual {Start} for
every agent, round R+1 a virtual {End}.

p(A -> B) = |A -> B| / |A|, where |A| counts (simulation, round, agent)
occurrences of A at r-1 over r = 1..R+1. The numerator has two counting modes:

- "pairs" (default): every ordered (i, j != i) pair with A at r-1 for i and B
  at r for j counts once. With more than two agents p can exceed 1.
- "existence": each (simulation, round, i) occurrence of A counts once toward
  A -> B if at least one j != i has B at r. Keeps p in [0, 1].

The two agree for two agents. Exports record which mode produced them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple

import pandas as pd

from app.engine.types import Transcript
from app.linguistics.dialogue_acts import CONTENT_ACTS, DialogueAct, LabeledMessage
from app.linguistics.readability import LinguisticsError

Counting = Literal["pairs", "existence"]
EDGE_COLUMNS = ["source", "target", "count", "source_count", "probability", "counting"]
ACT_ORDER: Tuple[DialogueAct, ...] = (DialogueAct.START,) + CONTENT_ACTS + (DialogueAct.END,)
_RANK = {a: i for i, a in enumerate(ACT_ORDER)}

Edge = Tuple[DialogueAct, DialogueAct]


@dataclass(frozen=True)
class LabeledSimulation:
    simulation_id: str
    rounds: int
    agents: int
    labels: Dict[Tuple[int, int], FrozenSet[DialogueAct]]

    def acts_at(self, round_num: int, agent: int) -> FrozenSet[DialogueAct]:
        if round_num == 0:
            return frozenset({DialogueAct.START})
        if round_num == self.rounds + 1:
            return frozenset({DialogueAct.END})
        try:
            return self.labels[(round_num, agent)]
        except KeyError:
            raise LinguisticsError(
                f"{self.simulation_id}: message of agent {agent} at round {round_num} is unlabeled"
            ) from None

    @classmethod
    def build(
        cls,
        simulation_id: str,
        rounds: int,
        agents: int,
        labels: Iterable[LabeledMessage],
    ) -> "LabeledSimulation":
        table = {(m.round, m.agent): m.acts for m in labels if m.simulation_id == simulation_id}
        missing = [
            (r, i)
            for r in range(1, rounds + 1)
            for i in range(agents)
            if (r, i) not in table
        ]
        if missing:
            r, i = missing[0]
            raise LinguisticsError(
                f"{simulation_id}: {len(missing)} unlabeled messages (first: round {r}, agent {i})"
            )
        return cls(simulation_id=simulation_id, rounds=rounds, agents=agents, labels=table)

    @classmethod
    def from_transcript(
        cls, transcript: Transcript, labels: Iterable[LabeledMessage]
    ) -> "LabeledSimulation":
        return cls.build(
            transcript.simulation_id,
            transcript.config.rounds,
            transcript.config.agent_count,
            labels,
        )


@dataclass(frozen=True)
class TransitionGraph:
    counting: Counting
    act_counts: Dict[DialogueAct, int]
    edge_counts: Dict[Edge, int]
    edges: Dict[Edge, float] = field(default_factory=dict)

    def probability(self, source: DialogueAct, target: DialogueAct) -> Optional[float]:
        """None when the edge was never observed (source unseen or no such transition)."""
        return self.edges.get((source, target))

    def outgoing(self, source: DialogueAct) -> Dict[DialogueAct, float]:
        return {b: p for (a, b), p in self.edges.items() if a == source}


def transition_graph(
    simulations: Iterable[LabeledSimulation],
    *,
    counting: Counting = "pairs",
) -> TransitionGraph:
    if counting not in ("pairs", "existence"):
        raise ValueError(f"Unknown counting mode: {counting!r}")

    act_counts: Counter = Counter()
    edge_counts: Counter = Counter()

    for sim in simulations:
        for r in range(1, sim.rounds + 2):
            current = [sim.acts_at(r, j) for j in range(sim.agents)]
            for i in range(sim.agents):
                before = sim.acts_at(r - 1, i)
                act_counts.update(before)
                others = [current[j] for j in range(sim.agents) if j != i]
                if counting == "existence":
                    seen = frozenset().union(*others) if others else frozenset()
                    for a in before:
                        for b in seen:
                            edge_counts[(a, b)] += 1
                else:
                    for a in before:
                        for acts in others:
                            for b in acts:
                                edge_counts[(a, b)] += 1

    edges = {
        (a, b): n / act_counts[a]
        for (a, b), n in edge_counts.items()
        if act_counts[a] > 0
    }
    return TransitionGraph(
        counting=counting,
        act_counts=dict(act_counts),
        edge_counts=dict(edge_counts),
        edges=edges,
    )


def most_probable_edges(graph: TransitionGraph) -> List[Tuple[DialogueAct, DialogueAct, float]]:
    """
    Highest-probability outgoing edge per act, self-loops excluded.
    Ties go to the lexicographically smaller target name.
    """
    best: Dict[DialogueAct, Tuple[DialogueAct, float]] = {}
    for (a, b), p in graph.edges.items():
        if a == b:
            continue
        current = best.get(a)
        if current is None or p > current[1] or (p == current[1] and b.value < current[0].value):
            best[a] = (b, p)
    return [(a, b, p) for a, (b, p) in sorted(best.items(), key=lambda kv: _RANK[kv[0]])]


def edges_frame(graph: TransitionGraph) -> pd.DataFrame:
    rows = [
        {
            "source": a.value,
            "target": b.value,
            "count": graph.edge_counts[(a, b)],
            "source_count": graph.act_counts[a],
            "probability": p,
            "counting": graph.counting,
        }
        for (a, b), p in sorted(graph.edges.items(), key=lambda kv: (_RANK[kv[0][0]], _RANK[kv[0][1]]))
    ]
    return pd.DataFrame(rows, columns=EDGE_COLUMNS)


def to_dot(graph: TransitionGraph, *, most_probable_only: bool = True) -> str:
    if most_probable_only:
        edges: Sequence[Tuple[DialogueAct, DialogueAct, float]] = most_probable_edges(graph)
    else:
        edges = [
            (a, b, p)
            for (a, b), p in sorted(
                graph.edges.items(), key=lambda kv: (_RANK[kv[0][0]], _RANK[kv[0][1]])
            )
        ]
    lines = ["digraph dialogue_acts {", f"  // counting: {graph.counting}", "  rankdir=LR;"]
    for a, b, p in edges:
        lines.append(f'  "{a.value}" -> "{b.value}" [label="{p:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def act_ratios(simulations: Sequence[LabeledSimulation]) -> pd.DataFrame:
    """Per round, the fraction of messages carrying each content act."""
    rows = []
    max_round = max((s.rounds for s in simulations), default=0)
    for r in range(1, max_round + 1):
        counts: Counter = Counter()
        total = 0
        for sim in simulations:
            if r > sim.rounds:
                continue
            for i in range(sim.agents):
                counts.update(sim.acts_at(r, i))
                total += 1
        row = {"round": r, "messages": total}
        for act in CONTENT_ACTS:
            row[act.value] = counts[act] / total if total else 0.0
        rows.append(row)
    return pd.DataFrame(rows, columns=["round", "messages"] + [a.value for a in CONTENT_ACTS])
