import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pigsolve import GameConfig, GameDefinition, build_game, certify_transient, validate_structure
from pigsolve.pig_rules import State


def tiny(payoff_final=0.0, mass=1.0, loop=1.0):
    # s0 -> a (coin) ; a -> sf
    states = ["s0", "a", "sf"]
    actions = {"s0": (["w"], ["w"]), "a": (["x", "y"], ["w"]), "sf": (["w"], ["w"])}
    trans = {
        ("s0", "w", "w"): [("a", 0.5), ("sf", 0.5)],
        ("a", "x", "w"): [("sf", mass)],
        ("a", "y", "w"): [("s0", 0.5), ("sf", 0.5)],
        ("sf", "w", "w"): [("sf", loop)] + ([("a", 1 - loop)] if loop < 1 else []),
    }
    pay = {("sf", "w", "w"): payoff_final, ("a", "x", "w"): 1.0}
    return GameDefinition.from_mapping(states, actions, trans, "s0", "sf", pay)


def test_valid_tiny_game():
    g = tiny()
    assert validate_structure(g) == []
    rep = certify_transient(g)
    assert rep.certified and rep.offending_states == []
    assert rep.rank[g.final] == 0
    assert rep.rank.tolist() == [1, 1, 0]
    assert rep.rounds == 1


def test_final_payoff_violation_names_condition_one():
    msgs = validate_structure(tiny(payoff_final=1.0))
    assert len(msgs) == 1 and "condition (1)" in msgs[0]


def test_mass_violation_names_state_and_action():
    msgs = validate_structure(tiny(mass=0.9))
    assert len(msgs) == 1
    assert "state a" in msgs[0] and "(x, w)" in msgs[0]


def test_final_not_absorbing():
    msgs = validate_structure(tiny(loop=0.5))
    assert any("condition (2)" in m for m in msgs)


def test_empty_action_set():
    g = GameDefinition.from_mapping(
        ["s0", "sf"],
        {"s0": ([], ["w"]), "sf": (["w"], ["w"])},
        {("sf", "w", "w"): [("sf", 1.0)]},
        "s0",
        "sf",
    )
    assert any("empty action set" in m for m in validate_structure(g))


def test_certify_rejects_invalid_structure():
    with pytest.raises(ValueError, match="structurally invalid"):
        certify_transient(tiny(mass=0.9))


def test_single_final_state():
    g = GameDefinition.from_mapping(["sf"], {"sf": (["w"], ["w"])}, {("sf", "w", "w"): [("sf", 1.0)]}, "sf", "sf")
    rep = certify_transient(g)
    assert rep.certified and rep.rank.tolist() == [0]


def test_cycle_without_exit_is_not_certified():
    states = ["s0", "a", "b", "sf"]
    actions = {s: (["w"], ["w"]) for s in states}
    actions["a"] = (["stay", "leave"], ["w"])
    trans = {
        ("s0", "w", "w"): [("a", 1.0)],
        ("a", "stay", "w"): [("b", 1.0)],
        ("a", "leave", "w"): [("sf", 1.0)],
        ("b", "w", "w"): [("a", 1.0)],
        ("sf", "w", "w"): [("sf", 1.0)],
    }
    rep = certify_transient(GameDefinition.from_mapping(states, actions, trans, "s0", "sf"))
    assert not rep.certified
    assert set(rep.offending_states) == {"s0", "a", "b"}


def test_classic_dice_game_valid_and_certified():
    g = build_game(GameConfig("classic", 20))
    assert validate_structure(g) == []
    rep = certify_transient(g)
    assert rep.certified
    # certificate invariant: every action pair has a strictly lower-ranked successor
    for s in range(g.n_states):
        if s == g.final:
            continue
        for e in range(g.entry_ptr[s], g.entry_ptr[s + 1]):
            assert min(rep.rank[t] for t, _ in g.outcomes(e)) < rep.rank[s]


def test_stop_at_zero_mutant_rejected():
    cfg = GameConfig("classic", 20)
    g = build_game(cfg, _stop_at_zero=True)
    assert validate_structure(g) == []
    rep = certify_transient(g)
    assert not rep.certified
    bad = set(rep.offending_states)
    assert State.play(1, 0, 0, 0) in bad
    # Stop at tau=0 passes the die forever; only winning positions stay safe
    assert State.play(2, 0, 0, 0) in bad
    assert all(s.own + s.tau < cfg.target for s in bad if s.tag.value == "play")


def test_game_definition_is_immutable():
    g = tiny()
    with pytest.raises(ValueError):
        g.reward[0] = 3.0


def _random_game(seed, n, extra_edges):
    rng = np.random.default_rng(seed)
    states = list(range(n))  # state n-1 is final
    actions = {s: (list(range(rng.integers(1, 3))), list(range(rng.integers(1, 3)))) for s in states[:-1]}
    actions[n - 1] = ([0], [0])
    trans = {}
    for s in states[:-1]:
        for a in actions[s][0]:
            for b in actions[s][1]:
                k = int(rng.integers(1, 3))
                succ = rng.choice(n, size=k, replace=False)
                trans[(s, a, b)] = [(int(t), 1.0 / k) for t in succ]
    trans[(n - 1, 0, 0)] = [(n - 1, 1.0)]
    return states, actions, trans


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 9), st.integers(0, 3))
def test_certificate_monotone_under_added_transitions(seed, n, extra):
    states, actions, trans = _random_game(seed, n, extra)
    g = GameDefinition.from_mapping(states, actions, trans, 0, n - 1)
    before = certify_transient(g)
    rng = np.random.default_rng(seed + 1)
    good = np.flatnonzero(before.rank >= 0)
    keys = list(trans)
    for _ in range(extra + 1):
        key = keys[int(rng.integers(len(keys)))]
        if key[0] == n - 1:
            continue
        t = int(rng.choice(good))
        old = trans[key]
        if any(u == t for u, _ in old):
            continue
        m = len(old) + 1
        trans[key] = [(u, 1.0 / m) for u, _ in old] + [(t, 1.0 / m)]
    after = certify_transient(GameDefinition.from_mapping(states, actions, trans, 0, n - 1))
    assert set(np.flatnonzero(before.rank >= 0)) <= set(np.flatnonzero(after.rank >= 0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_certified_games_absorb_within_n_steps(seed, n):
    """Under any pure stationary pair, P(hit s_f within |S| steps) >= p_min^|S|."""
    states, actions, trans = _random_game(seed, n, 0)
    g = GameDefinition.from_mapping(states, actions, trans, 0, n - 1)
    rep = certify_transient(g)
    if not rep.certified:
        return
    pmin = float(g.prob.min())
    rng = np.random.default_rng(seed)
    for _ in range(5):
        P = np.zeros((n, n))
        for s in range(n):
            e = g.entry(s, int(rng.integers(g.n_rows[s])), int(rng.integers(g.n_cols[s])))
            for t, p in g.outcomes(e):
                P[s, t] += p
        reach = np.linalg.matrix_power(P, n)[:, n - 1]
        assert (reach >= pmin**n - 1e-15).all()
