# backend/tests/test_linguistics.py

import numpy as np
import pandas as pd
import pytest

from app.linguistics.dialogue_acts import (
    DialogueAct,
    LabeledMessage,
    StubLabeler,
    label_dialogue_acts,
    label_transcript,
    parse_labels,
)
from app.linguistics.embeddings import StubEmbedder, centroid, info_difference
from app.linguistics.features import info_difference_series, round_features
from app.linguistics.label_store import cached_labels, store_labels
from app.linguistics.readability import LinguisticsError, count_syllables, fk_grade, word_count
from app.linguistics.transitions import (
    LabeledSimulation,
    act_ratios,
    edges_frame,
    most_probable_edges,
    to_dot,
    transition_graph,
)
from app.scripts.analyze import analyze, cached_simulation, read_info_differences

from builders import build_transcript

A = DialogueAct


def simulation(rounds, agents, table, sim_id="sim-0"):
    labels = [
        LabeledMessage(simulation_id=sim_id, round=r, agent=i, acts=frozenset(acts))
        for (r, i), acts in table.items()
    ]
    return LabeledSimulation.build(sim_id, rounds, agents, labels)


class CountingLabeler(StubLabeler):
    def __init__(self):
        self.calls = 0

    async def label(self, message, previous_round):
        self.calls += 1
        return self.label_sync(message)


class BrokenLabeler:
    labeler_id = "broken"

    async def label(self, message, previous_round):
        raise TimeoutError("labeler timed out")


# ----------------------------------------------------------------------
# Readability
# ----------------------------------------------------------------------


def test_word_count():
    assert word_count("") == 0
    assert word_count("   ") == 0
    assert word_count("I propose 50/50.") == 3


def test_syllables():
    assert count_syllables("cat") == 1
    assert count_syllables("propose") == 2
    assert count_syllables("table") == 2
    assert count_syllables("50/50") == 1


def test_fk_grade():
    assert fk_grade("The cat sat.") == pytest.approx(-2.62)
    assert fk_grade("propose") == pytest.approx(8.4)
    with pytest.raises(LinguisticsError):
        fk_grade("  ")


# ----------------------------------------------------------------------
# Embeddings
# ----------------------------------------------------------------------


def test_stub_embedder_is_unit_norm_and_deterministic():
    e = StubEmbedder()
    a = e.embed_one("Split the goods evenly")
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert np.array_equal(a, StubEmbedder().embed_one("split THE goods evenly"))


def test_info_difference_bounds():
    v = StubEmbedder().embed_sync(["one two three", "four five"])
    assert info_difference(v, v[[0]]) is not None
    assert info_difference(v[[0]], v[[0]]) == pytest.approx(0.0, abs=1e-12)

    e0, e1 = np.eye(2)
    assert info_difference(np.array([e1]), np.array([e0])) == pytest.approx(1.0)
    assert info_difference(np.array([e0]), None) is None


def test_centroid_is_normalized():
    c = centroid(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert c == pytest.approx([2 ** -0.5, 2 ** -0.5])


async def test_round_features_first_round_has_no_difference():
    t = build_transcript(rounds=3, texts={2: ["We agree.", "We agree.", "We agree."]})
    rows = await round_features(t, StubEmbedder())
    series = info_difference_series(rows)
    assert series[0] is None
    assert series[1] > 0
    assert rows[0].mean_words == pytest.approx(5.0)


# ----------------------------------------------------------------------
# Dialogue acts
# ----------------------------------------------------------------------


def test_stub_labeler_keywords():
    labeler = StubLabeler()
    assert labeler.label_sync("I propose an even split.") == {A.PROPOSE}
    assert labeler.label_sync("Do you agree?") == {A.REQUEST, A.ACCEPT}
    assert labeler.label_sync("I disagree.") == {A.DECLINE}
    assert labeler.label_sync("Good 1 is worth more to me.") == {A.INFORM}


def test_parse_labels():
    assert parse_labels("Inform, Request") == {A.INFORM, A.REQUEST}
    assert parse_labels("Negotiate") == {A.OTHERS}
    assert parse_labels("") == {A.OTHERS}
    assert parse_labels("- Propose\n- Compromise.") == {A.PROPOSE, A.COMPROMISE}


async def test_labeler_failure_degrades_to_others():
    assert await label_dialogue_acts("hello", "", BrokenLabeler()) == {A.OTHERS}


def test_virtual_acts_cannot_label_messages():
    with pytest.raises(ValueError):
        LabeledMessage(simulation_id="s", round=1, agent=0, acts=frozenset({A.START}))


async def test_label_transcript_uses_the_cache():
    t = build_transcript(rounds=2, k=2)
    labeler = CountingLabeler()
    cached = {(1, 0): frozenset({A.EVALUATE})}
    labels = await label_transcript(t, labeler, cached)
    assert len(labels) == 4
    assert labels[0].acts == {A.EVALUATE}
    assert labeler.calls == 3


def test_label_store_round_trip(db_path):
    labels = [
        LabeledMessage(simulation_id="sim-1@abc", round=1, agent=0, acts=frozenset({A.PROPOSE, A.INFORM})),
        LabeledMessage(simulation_id="sim-1@abc", round=1, agent=1, acts=frozenset({A.ACCEPT})),
    ]
    assert store_labels(labels, labeler="stub-keywords", db_path=db_path) == 2
    got = cached_labels("sim-1@abc", labeler="stub-keywords", db_path=db_path)
    assert got == {(1, 0): {A.PROPOSE, A.INFORM}, (1, 1): {A.ACCEPT}}
    assert cached_labels("sim-1@abc", labeler="other", db_path=db_path) == {}


# ----------------------------------------------------------------------
# Transitions
# ----------------------------------------------------------------------


def test_two_agents_one_round_all_inform():
    graph = transition_graph([simulation(1, 2, {(1, 0): {A.INFORM}, (1, 1): {A.INFORM}})])
    assert graph.probability(A.START, A.INFORM) == 1.0
    assert graph.probability(A.INFORM, A.END) == 1.0
    assert graph.probability(A.REQUEST, A.INFORM) is None


def test_most_probable_edge_ties_go_to_the_smaller_name():
    graph = transition_graph([simulation(1, 2, {(1, 0): {A.INFORM}, (1, 1): {A.ACCEPT}})])
    assert graph.probability(A.START, A.ACCEPT) == 0.5
    assert graph.probability(A.START, A.INFORM) == 0.5
    best = {a: (b, p) for a, b, p in most_probable_edges(graph)}
    assert best[A.START] == (A.ACCEPT, 0.5)
    assert '"Start" -> "Accept" [label="0.50"];' in to_dot(graph)


def test_self_loops_are_left_out_of_most_probable():
    table = {(r, i): {A.INFORM} for r in (1, 2) for i in range(2)}
    table[(2, 1)] = {A.INFORM, A.ACCEPT}
    graph = transition_graph([simulation(2, 2, table)])
    assert graph.probability(A.INFORM, A.INFORM) is not None
    best = {a: b for a, b, _ in most_probable_edges(graph)}
    assert best[A.INFORM] != A.INFORM


def test_pair_counting_can_exceed_one():
    table = {(1, i): {A.INFORM} for i in range(3)}
    existence = transition_graph([simulation(1, 3, table)], counting="existence")
    pairs = transition_graph([simulation(1, 3, table)])
    assert existence.probability(A.START, A.INFORM) == 1.0
    assert pairs.probability(A.START, A.INFORM) == 2.0


def three_agent_ten_rounds():
    """
    Agent 0 informs throughout, agent 1 proposes for five rounds then accepts,
    agent 2 alternates {Inform, Request} (odd rounds) with {Accept} (even rounds).
    """
    table = {}
    for r in range(1, 11):
        table[(r, 0)] = {A.INFORM}
        table[(r, 1)] = {A.PROPOSE} if r <= 5 else {A.ACCEPT}
        table[(r, 2)] = {A.INFORM, A.REQUEST} if r % 2 else {A.ACCEPT}
    return simulation(10, 3, table)


HAND_ACT_COUNTS = {A.START: 3, A.INFORM: 15, A.PROPOSE: 5, A.ACCEPT: 10, A.REQUEST: 5}

HAND_PAIR_COUNTS = {
    (A.START, A.PROPOSE): 2,
    (A.START, A.INFORM): 4,
    (A.START, A.REQUEST): 2,
    (A.INFORM, A.INFORM): 9,
    (A.INFORM, A.PROPOSE): 6,
    (A.INFORM, A.ACCEPT): 13,
    (A.INFORM, A.REQUEST): 4,
    (A.INFORM, A.END): 2,
    (A.PROPOSE, A.INFORM): 7,
    (A.PROPOSE, A.ACCEPT): 3,
    (A.PROPOSE, A.REQUEST): 2,
    (A.ACCEPT, A.INFORM): 10,
    (A.ACCEPT, A.PROPOSE): 2,
    (A.ACCEPT, A.ACCEPT): 4,
    (A.ACCEPT, A.REQUEST): 2,
    (A.ACCEPT, A.END): 4,
    (A.REQUEST, A.INFORM): 5,
    (A.REQUEST, A.PROPOSE): 2,
    (A.REQUEST, A.ACCEPT): 3,
}

# existence counts one per (round, i) even when several j share the act
HAND_EXISTENCE_COUNTS = {
    **HAND_PAIR_COUNTS,
    (A.START, A.INFORM): 3,
    (A.INFORM, A.ACCEPT): 10,
    (A.INFORM, A.END): 1,
    (A.ACCEPT, A.INFORM): 8,
    (A.ACCEPT, A.END): 2,
}


def test_three_agent_ten_round_edge_map_matches_hand_count():
    sim = three_agent_ten_rounds()
    pairs = transition_graph([sim])
    existence = transition_graph([sim], counting="existence")

    assert pairs.counting == "pairs"
    assert pairs.act_counts == HAND_ACT_COUNTS
    assert existence.act_counts == HAND_ACT_COUNTS
    assert pairs.edge_counts == HAND_PAIR_COUNTS
    assert existence.edge_counts == HAND_EXISTENCE_COUNTS

    assert pairs.probability(A.START, A.INFORM) == pytest.approx(4 / 3)
    assert existence.probability(A.START, A.INFORM) == pytest.approx(1.0)
    assert pairs.probability(A.INFORM, A.ACCEPT) == pytest.approx(13 / 15)
    assert pairs.probability(A.PROPOSE, A.DECLINE) is None

    for graph in (pairs, existence):
        assert not any(b == A.START for _, b in graph.edges)
        assert not any(a == A.END for a, _ in graph.edges)

    best = {a: b for a, b, _ in most_probable_edges(pairs)}
    assert best == {
        A.START: A.INFORM,
        A.INFORM: A.ACCEPT,
        A.PROPOSE: A.INFORM,
        A.ACCEPT: A.INFORM,
        A.REQUEST: A.INFORM,
    }


def test_exports_name_the_counting_mode():
    sim = three_agent_ten_rounds()
    graph = transition_graph([sim], counting="existence")
    assert set(edges_frame(graph)["counting"]) == {"existence"}
    assert "// counting: existence" in to_dot(graph)


def test_unlabeled_message_is_an_error():
    with pytest.raises(LinguisticsError):
        simulation(2, 2, {(1, 0): {A.INFORM}, (1, 1): {A.INFORM}, (2, 0): {A.INFORM}})


def test_act_ratios():
    table = {(1, 0): {A.PROPOSE}, (1, 1): {A.PROPOSE, A.REQUEST}}
    frame = act_ratios([simulation(1, 2, table)])
    row = frame.iloc[0]
    assert row["messages"] == 2
    assert row["Propose"] == 1.0
    assert row["Request"] == 0.5


# ----------------------------------------------------------------------
# Batch analysis
# ----------------------------------------------------------------------


async def test_analyze_writes_exports_and_reuses_labels(tmp_path, db_path):
    transcripts = [
        build_transcript(rounds=3, simulation_id="sim-0", texts={2: ["Do you agree?", "I agree.", "I disagree."]}),
        build_transcript(rounds=3, simulation_id="sim-1", seed=1),
    ]
    labeler = CountingLabeler()
    paths = await analyze(
        tmp_path, embedder=StubEmbedder(), labeler=labeler, db_path=db_path, transcripts=transcripts
    )
    assert labeler.calls == 18
    assert all(p.exists() for p in paths.values())

    features = pd.read_csv(paths["features"])
    assert list(features["round"]) == [1, 2, 3, 1, 2, 3]
    assert pd.isna(features["info_difference"].iloc[0])
    assert paths["transitions_dot"].read_text().startswith("digraph dialogue_acts {")

    again = CountingLabeler()
    await analyze(tmp_path, embedder=StubEmbedder(), labeler=again, db_path=db_path, transcripts=transcripts)
    assert again.calls == 0

    info = read_info_differences(tmp_path)
    assert info["sim-0"][0] is None and info["sim-0"][1] > 0
    sim = cached_simulation(transcripts[0], labeler_id=labeler.labeler_id, db_path=db_path)
    assert sim.acts_at(2, 2) == {A.DECLINE}


def test_cached_simulation_needs_an_analyze_run(db_path):
    with pytest.raises(LinguisticsError):
        cached_simulation(build_transcript(rounds=2), db_path=db_path)
