import json

import numpy as np
import pytest

import flowmoods


def test_moods_are_the_six():
    ids = [m[0] for m in flowmoods.moods()]
    assert ids == ["chill", "focus", "melancholy", "motivation", "party", "you_and_me"]


def test_snapshot_version_is_stable(snapshot, stack, tmp_path):
    _, version = snapshot
    assert stack.model_version == version
    assert version.startswith("m") and len(version) == 17


def test_party_session_stays_above_threshold(stack):
    user = next(u for u in stack.eligible_users())
    session = stack.start(user, mood="party", seed=4)
    played = [session.next() for _ in range(40)]
    for song in played:
        assert stack.mood_score(song, "party") >= session.threshold
    assert session.history[-len(played):] == played
    assert len(set(played)) == len(played)


def test_feedback_changes_weights_and_bars_songs(stack):
    user = stack.eligible_users()[1]
    session = stack.start(user, mood="chill", seed=9)
    first = session.next()
    artist = stack.artist_of(first)
    before = session.artist_weight(artist)
    session.feedback("like", first)
    assert session.artist_weight(artist) > before
    session.feedback("exclude_artist", first)
    for _ in range(30):
        assert stack.artist_of(session.next()) != artist


def test_same_seed_replays(stack):
    user = stack.eligible_users()[2]
    a = stack.start(user, mood="focus", seed=11)
    b = stack.start(user, mood="focus", seed=11)
    assert [a.next() for _ in range(25)] == [b.next() for _ in range(25)]
    assert json.loads(a.to_json())["user_id"] == user


def test_errors_carry_codes(stack):
    with pytest.raises(flowmoods.Error) as info:
        stack.start("nobody", mood="party")
    assert info.value.code == "not_found"
    with pytest.raises(flowmoods.Error) as info:
        stack.mood_score(stack.song_ids()[0], "grumpy")
    assert info.value.code == "invalid_argument"
    with pytest.raises(flowmoods.Error) as info:
        flowmoods.Stack.load("/nonexistent/snapshot")
    assert info.value.code == "missing_artifact"


def test_candidates_respect_threshold(stack):
    user = stack.eligible_users()[0]
    candidates = stack.candidates(user, "motivation")
    sims = [s for _, s in candidates]
    assert sims == sorted(sims, reverse=True)
    assert all(stack.mood_score(song, "motivation") >= 0.5 for song, _ in candidates)


def test_index_full_probe_matches_exact():
    rng = np.random.default_rng(3)
    vectors = rng.normal(size=(400, 8))
    ids = [f"s{i:04d}" for i in range(400)]
    index = flowmoods.AnnIndex(ids, vectors, n_cells=20)
    assert index.n_cells == 20 and index.default_n_probe == 5 and len(index) == 400
    queries = rng.normal(size=(10, 8))
    for q in queries:
        assert index.query(q, 15, n_probe=20) == flowmoods.exact_topk(ids, vectors, q, 15)
    assert index.recall_at_k(queries, 15, 20) == 1.0


def test_exact_topk_against_numpy():
    rng = np.random.default_rng(8)
    vectors = rng.normal(size=(50, 4))
    ids = [f"s{i:02d}" for i in range(50)]
    q = rng.normal(size=4)
    got = flowmoods.exact_topk(ids, vectors, q, 5)
    order = np.argsort(-(vectors @ q), kind="stable")[:5]
    assert [g[0] for g in got] == [ids[i] for i in order]


def test_auc_matches_pair_count():
    scores = [0.1, 0.4, 0.35, 0.8, 0.8, 0.2]
    labels = [False, False, True, True, False, True]
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    assert flowmoods.evaluate_scores(scores, labels)["auc"] == pytest.approx(wins / (len(pos) * len(neg)))
