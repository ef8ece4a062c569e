from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import S0, SF, brute_states_reachable, ref_options, ref_states
from pigsolve.pig_rules import (
    FINAL,
    INITIAL,
    Action,
    GameConfig,
    State,
    action_sets,
    build_game,
    enumerate_states,
    payoff,
    transition_weights,
    transitions,
)

R, S, W = Action.ROLL, Action.STOP, Action.WAIT
VARIANTS = ["classic", "exact", "maxdiff"]


def to_state(s):
    if s == S0:
        return INITIAL
    if s == SF:
        return FINAL
    return State.play(*s)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("target", [12, 20, 31])
def test_enumeration_matches_nested_loops(variant, target):
    cfg = GameConfig(variant, target)
    space = enumerate_states(cfg)
    ref = ref_states(variant, target)
    assert space.n_states == len(ref)
    assert {space.state(i) for i in range(space.n_states)} == {to_state(s) for s in ref}
    for i in range(space.n_states):
        assert space.index_of(space.state(i)) == i


@pytest.mark.parametrize("variant", VARIANTS)
def test_reachable_states_are_enumerated(variant):
    cfg = GameConfig(variant, 20)
    space = enumerate_states(cfg)
    for s in brute_states_reachable(variant, 20):
        assert space.contains(to_state(s))


def test_classic_200_counts():
    space = enumerate_states(GameConfig("classic", 200))
    assert space.n_states == 8_520_002
    assert space.n_states == sum((206 - a) * 200 * 2 for a in range(200)) + 2
    assert space.n_decision_per_player == 3_980_000
    assert int(space.decision_mask()[2 : 2 + space.block].sum()) == 3_980_000
    assert space.index_of(INITIAL) == 0 and space.index_of(FINAL) == 1


def test_exact_200_bound():
    cfg = GameConfig("exact", 200)
    own, _, tau = enumerate_states(cfg).block_coords()
    assert (own.astype(int) + tau <= 200).all()
    assert (own.astype(int) + tau == 200).any()


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(VARIANTS), st.integers(12, 60), st.data())
def test_index_bijection(variant, target, data):
    cfg = GameConfig(variant, target)
    space = enumerate_states(cfg)
    i = data.draw(st.integers(0, space.n_states - 1))
    s = space.state(i)
    assert space.index_of(s) == i
    if i >= 2:
        assert space.state(space.mirror_index(i)) == s.mirror()


def test_action_sets_table():
    cfg = GameConfig("classic", 200)
    assert action_sets(cfg, State.play(1, 7, 3, 0)) == ([R], [W])
    assert action_sets(cfg, State.play(1, 150, 0, 49)) == ([S, R], [W])
    assert action_sets(cfg, State.play(1, 150, 0, 50)) == ([S], [W])
    assert action_sets(cfg, State.play(2, 0, 150, 49)) == ([W], [S, R])
    assert action_sets(cfg, INITIAL) == ([W], [W])
    assert action_sets(cfg, FINAL) == ([W], [W])
    ex = GameConfig("exact", 200)
    assert action_sets(ex, State.play(1, 150, 0, 49)) == ([S, R], [W])
    assert action_sets(ex, State.play(1, 150, 0, 50)) == ([S], [W])


def test_foreign_state_rejected():
    cfg = GameConfig("classic", 20)
    with pytest.raises(ValueError):
        action_sets(cfg, State.play(1, 20, 0, 0))
    with pytest.raises(ValueError):
        action_sets(GameConfig("exact", 20), State.play(1, 10, 0, 11))
    with pytest.raises(ValueError):
        transitions(cfg, State.play(1, 3, 0, 0), S, W)


def test_transition_examples():
    ex = GameConfig("exact", 200)
    out = dict(transitions(ex, State.play(1, 180, 7, 16), R, W))
    assert out == {
        State.play(2, 180, 7, 0): 3 / 6,
        State.play(1, 180, 7, 18): 1 / 6,
        State.play(1, 180, 7, 19): 1 / 6,
        State.play(1, 180, 7, 20): 1 / 6,
    }
    cl = GameConfig("classic", 200)
    assert transitions(cl, State.play(1, 40, 60, 12), S, W) == [(State.play(2, 52, 60, 0), 1.0)]
    assert transitions(cl, State.play(2, 40, 60, 12), W, S) == [(State.play(1, 40, 72, 0), 1.0)]
    assert dict(transitions(cl, INITIAL, W, W)) == {State.play(1, 0, 0, 0): 0.5, State.play(2, 0, 0, 0): 0.5}
    assert transitions(cl, FINAL, W, W) == [(FINAL, 1.0)]
    assert transitions(cl, State.play(1, 195, 3, 7), S, W) == [(FINAL, 1.0)]
    roll = dict(transitions(cl, State.play(1, 10, 20, 4), R, W))
    assert roll[State.play(2, 10, 20, 0)] == 1 / 6
    assert all(roll[State.play(1, 10, 20, 4 + k)] == 1 / 6 for k in range(2, 7))


def test_illegal_action_rejected():
    cfg = GameConfig("classic", 20)
    with pytest.raises(ValueError):
        transitions(cfg, State.play(1, 3, 0, 5), W, W)
    with pytest.raises(ValueError):
        transitions(cfg, State.play(1, 15, 0, 5), R, W)


def test_payoff_examples():
    assert payoff(GameConfig("classic", 200), State.play(1, 195, 40, 5)) == 1
    assert payoff(GameConfig("classic", 200), State.play(2, 40, 195, 5)) == 0
    assert payoff(GameConfig("maxdiff", 200), State.play(1, 195, 40, 5)) == 160
    assert payoff(GameConfig("maxdiff", 200), State.play(2, 40, 195, 5)) == -160
    assert payoff(GameConfig("exact", 200), State.play(1, 195, 40, 5)) == 1
    assert payoff(GameConfig("classic", 200), State.play(1, 100, 40, 5)) == 0


@pytest.mark.parametrize("variant", VARIANTS)
def test_exact_mass_closure_and_mirror(variant):
    cfg = GameConfig(variant, 20)
    space = enumerate_states(cfg)
    for i in range(space.n_states):
        s = space.state(i)
        a1, a2 = action_sets(cfg, s)
        for x in a1:
            for y in a2:
                w = transition_weights(cfg, s, x, y)
                assert sum(k for _, k in w) == 2 * cfg.die_faces
                assert all(k > 0 and space.contains(t) for t, k in w)
                if s.tag.value == "play":
                    m = s.mirror()
                    mirrored = transition_weights(cfg, m, y, x)
                    assert sorted((str(t.mirror()), k) for t, k in w) == sorted((str(t), k) for t, k in mirrored)


@pytest.mark.parametrize("target", [20, 200])
def test_exact_last_scoring_total(target):
    cfg = GameConfig("exact", target)
    for own in (0, target // 2, target - 10):
        tau = target - 6 - own
        if tau <= 0:
            continue
        out = transition_weights(cfg, State.play(1, own, 3, tau), R, W)
        bust = [k for t, k in out if t.player == 2]
        wins = [k for t, k in out if t.player == 1 and t.own + t.tau == target]
        assert bust == [2]  # one face in six, weights are over 12
        assert wins == [2]
    # one point more and two faces overshoot
    out = dict(transition_weights(cfg, State.play(1, 0, 3, target - 5), R, W))
    assert out[State.play(2, 0, 3, 0)] == 4


@pytest.mark.parametrize("variant", VARIANTS)
def test_compiled_game_matches_reference_rules(variant):
    """Every CSR row equals the independently coded rule set, in exact sixths."""
    target = 20
    cfg = GameConfig(variant, target)
    game = build_game(cfg)
    space = game.space
    for s in ref_states(variant, target):
        i = space.index_of(to_state(s))
        opts = ref_options(variant, target, s)
        lo, hi = game.entry_ptr[i], game.entry_ptr[i + 1]
        assert hi - lo == len(opts)
        for e, (name, pay, dist) in zip(range(lo, hi), opts):
            assert game.reward[e] == pay
            got = {}
            for t, p in game.outcomes(e):
                got[str(space.state(t))] = got.get(str(space.state(t)), 0) + Fraction(p).limit_denominator(12)
            want = {str(to_state(t)): p for t, p in dist.items()}
            assert got == want, (s, name)


def test_config_validation():
    with pytest.raises(ValueError):
        GameConfig("classic", 11)
    with pytest.raises(ValueError):
        GameConfig("classic", 20, die_faces=1)
    with pytest.raises(ValueError):
        GameConfig("classic", 20, bust_face=7)
    with pytest.raises(ValueError):
        GameConfig("nope", 20)
    GameConfig("classic", 12)


def test_other_die_parameters_build_certified():
    from pigsolve import certify_transient

    for faces, bust in ((4, 1), (6, 6), (8, 3)):
        cfg = GameConfig("classic", 30, die_faces=faces, bust_face=bust)
        g = build_game(cfg)
        assert certify_transient(g).certified
        mass = np.add.reduceat(g.prob, g.trans_ptr[:-1])
        np.testing.assert_allclose(mass, 1.0, atol=1e-12)


def test_fingerprint_stable_and_sensitive():
    a = GameConfig("classic", 200).fingerprint(tol=1e-10)
    assert a == GameConfig("classic", 200).fingerprint(tol=1e-10)
    assert a != GameConfig("classic", 201).fingerprint(tol=1e-10)
    assert a != GameConfig("classic", 200).fingerprint(tol=1e-9)
    assert len(a) == 16
