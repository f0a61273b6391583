"""Brute-force oracles and encoding checks.

These deliberately avoid the matrix semantics in `machine`: they
enumerate trajectories and machine runs directly, so agreement between
the two code paths is meaningful evidence of correctness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alphabet import Word, label_sort_key, word_str
from .environment import Nmdp, PrmBacked, Trajectory
from .machine import Prm, UnreachableWordError

DEFAULT_NODE_BUDGET = 1000


class BudgetExceededError(RuntimeError):
    def __init__(self, nodes_expanded: int):
        super().__init__("search budget exhausted after expanding %d nodes" % nodes_expanded)
        self.nodes_expanded = nodes_expanded


def _positive_reward_possible(prm: Prm, w: Word) -> bool:
    """True when a run of the hidden machine on w accrues positive total
    reward with positive probability."""
    # frontier of (machine state, has collected positive reward so far)
    frontier = {(prm.init, False)}
    for label in w:
        nxt = set()
        for y, hot in frontier:
            vec = prm.successor_vector(y, label)
            for j in np.flatnonzero(vec):
                j = int(j)
                nxt.add((j, hot or prm.edge_reward(y, label, j) > 0.0))
        frontier = nxt
    return any(hot for _, hot in frontier)


def brute_force_word_realizability(
    m: Nmdp,
    w: Word,
    max_len: int | None = None,
    *,
    criterion: str = "label_only",
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> Trajectory | None:
    """Exhaustive search for a trajectory whose label word equals w.

    Every transition emits a symbol (the empty label included), so a
    witness has exactly |w| steps.  Actions and successor states are
    explored in index order, so the returned witness is the
    lexicographically least one.  With criterion="positive_reward" the
    trajectory must additionally give the hidden machine a positive
    probability of positive total reward.
    """
    if criterion not in ("label_only", "positive_reward"):
        raise ValueError("unknown criterion %r" % (criterion,))
    if max_len is not None and max_len < len(w):
        raise ValueError("max_len %d is shorter than the word (%d)" % (max_len, len(w)))
    if criterion == "positive_reward" and not isinstance(m.reward_source, PrmBacked):
        raise ValueError("positive_reward criterion needs a machine-backed reward source")

    expanded = 0
    states = [m.x_init]
    actions: list = []

    def search(depth: int) -> bool:
        nonlocal expanded
        if depth == len(w):
            return True
        x = states[-1]
        for a in m.available[x]:
            vec = m.p[(x, a)]
            for x_next in np.flatnonzero(vec):
                x_next = int(x_next)
                expanded += 1
                if expanded > node_budget:
                    raise BudgetExceededError(expanded)
                if m.labeling[(x, a, x_next)] != w[depth]:
                    continue
                states.append(x_next)
                actions.append(a)
                if search(depth + 1):
                    return True
                states.pop()
                actions.pop()
        return False

    if not search(0):
        return None
    if criterion == "positive_reward" and not _positive_reward_possible(m.reward_source.prm, w):
        # the label word is realizable but can never pay: keep searching is
        # pointless, reward depends only on the label word
        return None
    return Trajectory(states=list(states), actions=list(actions), labels=list(w))


def machine_reward_distribution(prm: Prm, w: Word) -> dict:
    """Distribution of the reward emitted on the last symbol of w, by
    exact forward enumeration of machine runs (no matrix products)."""
    if not w:
        raise ValueError("the word must be non-empty")
    dist = {prm.init: 1.0}
    for label in w[:-1]:
        nxt: dict = {}
        for y, p in dist.items():
            vec = prm.successor_vector(y, label)
            for j in np.flatnonzero(vec):
                j = int(j)
                nxt[j] = nxt.get(j, 0.0) + p * float(vec[j])
        dist = nxt
    out: dict = {}
    for y, p in dist.items():
        vec = prm.successor_vector(y, w[-1])
        for j in np.flatnonzero(vec):
            j = int(j)
            reward = prm.edge_reward(y, w[-1], j)
            out[reward] = out.get(reward, 0.0) + p * float(vec[j])
    total = sum(out.values())
    if total <= 0.0:
        raise UnreachableWordError("word %s is unreachable in the machine" % (word_str(w),))
    return {reward: p / total for reward, p in out.items()}


def brute_force_reward_distribution(m: Nmdp, w: Word) -> dict:
    """Distribution of the final reward of w under the environment's hidden
    reward machine."""
    if not isinstance(m.reward_source, PrmBacked):
        raise ValueError("the reward source is not backed by a machine")
    if brute_force_word_realizability(m, w, node_budget=10 ** 7) is None:
        raise UnreachableWordError("word %s is not realizable in the environment" % (word_str(w),))
    return machine_reward_distribution(m.reward_source.prm, w)


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


@dataclass
class EncodingReport:
    distance: float
    worst_word: Word | None
    bottom_words: list = field(default_factory=list)
    words_checked: int = 0

    def __float__(self) -> float:
        return self.distance


def encoding_distance(h: Prm, truth: Prm, max_len: int) -> EncodingReport:
    """Worst-case total-variation distance between the next-reward
    distributions of h and truth over all truth-realizable words of
    length at most max_len.  Words whose probability mass in h is fully
    absorbed by the failure state (or vanishes) count as distance 1 and
    are also listed separately."""
    labels = sorted(set(l for _, l in truth.tau), key=label_sort_key)
    report = EncodingReport(distance=0.0, worst_word=None)

    def h_mass_vector(word: Word):
        vec = h.initial_vector()
        for label in word:
            vec = vec @ h.label_matrix(label)
        return vec

    # BFS over truth-realizable prefixes, carrying the truth state vector.
    frontier = [((), truth.initial_vector())]
    for _ in range(max_len):
        nxt = []
        for prefix, tvec in frontier:
            for label in labels:
                tnext = tvec @ truth.label_matrix(label)
                mass = float(tnext.sum())
                if mass <= 0.0:
                    continue
                word = prefix + (label,)
                report.words_checked += 1
                truth_dist = truth.next_reward_distribution(prefix, label)
                hvec = h_mass_vector(prefix) @ h.label_matrix(label)
                live = float(hvec.sum())
                if h.bottom is not None:
                    live -= float(hvec[h.bottom])
                if live <= 1e-15:
                    report.bottom_words.append(word)
                    if report.distance < 1.0:
                        report.distance = 1.0
                        report.worst_word = word
                else:
                    h_dist = h.next_reward_distribution(prefix, label)
                    tv = total_variation(h_dist, truth_dist)
                    if tv > report.distance:
                        report.distance = tv
                        report.worst_word = word
                nxt.append((word, tnext))
        frontier = nxt
    return report
