"""Brute-force oracles: ground truth for everything the learners estimate.

Two independent ways to compute the reward distribution after a label word —
enumerating environment trajectories versus multiplying machine matrices —
must agree to machine precision. The same oracle decides whether a word is
realizable at all, which the active learner uses to skip hopeless queries.
"""

from prmlearn import (
    brute_force_reward_distribution,
    brute_force_word_realizability,
    coffee_prm,
    parse_word,
    total_variation,
)
from prmlearn.cli import resolve_env
from prmlearn.verify import machine_reward_distribution

setup = resolve_env("office")
truth = coffee_prm()

for text in ("c", "c;o", "~;~;~;o"):
    word = parse_word(text)
    env_dist = brute_force_reward_distribution(setup.nmdp, word)
    prm_dist = machine_reward_distribution(truth, word)
    tv = total_variation(env_dist, prm_dist)
    print("%-12s env=%s  machine=%s  tv=%.2e" % (text, env_dist, prm_dist, tv))

for text in ("c", "~;c", "c;c"):
    word = parse_word(text)
    witness = brute_force_word_realizability(setup.nmdp, word, node_budget=100000)
    print("word %-4s realizable in the office: %s" % (text, witness is not None))
