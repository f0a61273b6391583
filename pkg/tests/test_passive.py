import numpy as np
import pytest

from prmlearn import (
    Alphabet,
    PassiveConfig,
    build_office_nmdp,
    coffee_prm,
    learn_passive,
    learn_passive_from_traces,
    parse_gridmap,
    patrol_prm,
    shortest_path_policy,
)
from prmlearn.alphabet import EMPTY_LABEL, EPSILON
from prmlearn.environment import PositionalPolicy

from conftest import C, O, STAR, single_state_zero_prm, two_cell_nmdp

from test_environment import OFFICE_MAP


def test_config_validation():
    with pytest.raises(ValueError):
        PassiveConfig(n_check=0)
    with pytest.raises(ValueError):
        PassiveConfig(n_check=10, n_episode=0)
    with pytest.raises(ValueError):
        PassiveConfig(n_check=10, max_experiment_len=0)


def test_single_trace_example():
    ap = Alphabet(["c", "o"])
    traces = [[(C, 0.0), (O, 1.0)]]
    result = learn_passive_from_traces(traces, ap, PassiveConfig(n_check=1))
    table = result.table
    # all nonempty suffixes of the label word become experiments
    assert EPSILON in table.e
    assert (O,) in table.e
    assert (C, O) in table.e
    assert table.freq((C,)) == {0.0: 1}
    assert table.freq((C, O)) == {1.0: 1}
    closed, _ = table.is_closed()
    assert closed


def test_suffix_length_cap_reported():
    ap = Alphabet(["c"])
    long_trace = [(C, 0.0)] * 6
    cfg = PassiveConfig(n_check=1, max_experiment_len=3)
    result = learn_passive_from_traces([long_trace], ap, cfg)
    assert result.report.dropped_suffixes == 3  # suffixes of lengths 6, 5, 4
    assert all(len(e) <= 3 for e in result.table.e)


def test_stay_put_policy_single_state_machine():
    # the policy never moves: label always empty, reward always 0
    truth = single_state_zero_prm(("c",))
    m = two_cell_nmdp(truth)
    stay = PositionalPolicy({0: {0: 1.0}, 1: {0: 1.0}})
    cfg = PassiveConfig(n_check=20, n_episode=5, seed=0)
    result = learn_passive(m, stay, episodes=100, cfg=cfg)
    h = result.hypothesis
    assert h.states == ("q0", "bot")
    vec = h.successor_vector(0, EMPTY_LABEL)
    assert vec[0] == 1.0
    assert h.edge_reward(0, EMPTY_LABEL, 0) == 0.0


def test_episode_order_independence():
    ap = Alphabet(["c", "o"])
    traces = [
        [(C, 0.0), (O, 1.0)],
        [(O, 0.0)],
        [(C, 0.0), (O, 0.0)],
    ] * 30
    cfg = PassiveConfig(n_check=10)
    forward = learn_passive_from_traces(traces, ap, cfg)
    backward = learn_passive_from_traces(list(reversed(traces)), ap, cfg)
    assert forward.table.t == backward.table.t
    assert forward.table.sample == backward.table.sample
    assert set(forward.table.e) == set(backward.table.e)


def test_office_reconstruction_small():
    grid = parse_gridmap(OFFICE_MAP)
    truth = coffee_prm()
    m = build_office_nmdp(grid, truth)
    policy = shortest_path_policy(grid, m)
    cfg = PassiveConfig(n_check=100, n_episode=100, terminal_labels=(O, STAR), seed=7)
    result = learn_passive(m, policy, episodes=2000, cfg=cfg)
    h = result.hypothesis
    dist = h.next_reward_distribution((C,), O)
    assert abs(dist[1.0] - 0.9) < 0.05
    # labels never observed under the policy have no learned transition
    labels_used = {label for _, label in h.tau}
    assert STAR not in labels_used


def test_incompleteness_preserved():
    # words the policy never produces are absorbed by the failure state
    ap = Alphabet(["c", "o"])
    traces = [[(C, 0.0), (O, 1.0)]] * 200
    result = learn_passive_from_traces(traces, ap, PassiveConfig(n_check=50))
    h = result.hypothesis
    assert h.bottom_mass((O,)) == 1.0


def test_result_tuple_unpacking():
    ap = Alphabet(["c"])
    table, hypothesis = learn_passive_from_traces(
        [[(C, 0.0)]] * 10, ap, PassiveConfig(n_check=5)
    )
    assert table.num_traces == 10
    assert hypothesis.n_states() >= 2


def test_learn_passive_needs_episodes():
    m = two_cell_nmdp(patrol_prm())
    with pytest.raises(ValueError):
        learn_passive(m, PositionalPolicy({}), episodes=0, cfg=PassiveConfig(n_check=5))


def test_jobs_do_not_change_the_result():
    m = two_cell_nmdp(patrol_prm())
    from prmlearn import uniform_policy

    policy = uniform_policy(m)
    one = learn_passive(m, policy, 60, PassiveConfig(n_check=10, n_episode=5, seed=3, jobs=1))
    two = learn_passive(m, policy, 60, PassiveConfig(n_check=10, n_episode=5, seed=3, jobs=2))
    assert one.table.t == two.table.t
    assert one.hypothesis.states == two.hypothesis.states
