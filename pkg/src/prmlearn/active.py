"""RL-primed active learning of probabilistic reward machines.

Membership queries are answered by priming a tabular Q-learner on the
product of the environment with a membership reward machine; equivalence
queries run a Q-learner against the current hypothesis and watch for
trace prefixes that contradict it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .alphabet import EPSILON, Word, label_str, word_str
from .environment import Nmdp, membership_reward_machine, sample_action, step, word_realizable
from .machine import Prm, sample_index
from .table import ObservationTable, build_hypothesis, diff_against_distribution


class QTable:
    """Action values keyed by (machine state, environment state, action);
    unseen keys read as 0."""

    def __init__(self):
        self.values = {}

    def get(self, y: int, x: int, a: int) -> float:
        return self.values.get((y, x, a), 0.0)

    def set(self, y: int, x: int, a: int, value: float) -> None:
        self.values[(y, x, a)] = value

    def best(self, y: int, x: int, actions) -> float:
        return max((self.get(y, x, a) for a in actions), default=0.0)

    def greedy_action(self, y: int, x: int, actions) -> int:
        return max(actions, key=lambda a: (self.get(y, x, a), -a))

    def reset(self) -> None:
        self.values.clear()


@dataclass
class LearnerConfig:
    n_check: int
    n_query: int
    n_stop: int
    n_episode: int
    learn_rate: float = 0.5
    discount: float = 0.9
    explore: float = 0.1
    seed: int = 0
    machine_advance: str = "sample"   # or "argmax"
    rho_convention: str = "target"
    max_rounds: int = 500
    max_repairs_per_round: int = 100

    def __post_init__(self):
        for name in ("n_check", "n_query", "n_stop", "n_episode"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        if not 0.0 < self.learn_rate <= 1.0:
            raise ValueError("learn_rate must be in (0, 1]")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if not 0.0 <= self.explore <= 1.0:
            raise ValueError("explore must be in [0, 1]")
        if self.machine_advance not in ("sample", "argmax"):
            raise ValueError("machine_advance must be 'sample' or 'argmax'")


def epsilon_greedy_action(q: QTable, y: int, x: int, actions, explore: float, rng) -> int:
    if explore > 0.0 and rng.random() < explore:
        return int(actions[int(rng.integers(0, len(actions)))])
    best = max(q.get(y, x, a) for a in actions)
    top = [a for a in actions if q.get(y, x, a) == best]
    if len(top) == 1:
        return top[0]
    # break ties randomly: a fixed tie-break turns a flat Q-table into a
    # wall-hugging policy and starves exploration
    return int(top[int(rng.integers(0, len(top)))])


def advance_machine(h: Prm, y: int, label, mode: str, rng) -> int:
    vec = h.successor_vector(y, label)
    if mode == "argmax":
        return int(np.argmax(vec))
    return sample_index(vec, rng)


def teacher_query(q: QTable, m: Nmdp, h: Prm, mode: str, cfg: LearnerConfig, rng, terminal_labels=()):
    """One Q-learning episode on the implicit product of m and h.

    In membership mode the update target uses the machine reward; in
    equivalence mode it uses the environment reward.  Returns the trace
    of (environment label, environment reward) pairs; q is updated in
    place."""
    if mode not in ("membership", "equivalence"):
        raise ValueError("unknown query mode %r" % (mode,))
    terminal = set(terminal_labels)
    session = m.reward_source.session(rng)
    x, y = m.x_init, h.init
    trace = []
    for _ in range(cfg.n_episode):
        actions = m.available[x]
        a = epsilon_greedy_action(q, y, x, actions, cfg.explore, rng)
        x_next, label, r = step(m, x, a, rng, session)
        y_next = advance_machine(h, y, label, cfg.machine_advance, rng)
        r_machine = h.edge_reward(y, label, y_next)
        target = r_machine if mode == "membership" else r
        best_next = q.best(y_next, x_next, m.available[x_next])
        q.set(
            y, x, a,
            (1.0 - cfg.learn_rate) * q.get(y, x, a)
            + cfg.learn_rate * (target + cfg.discount * best_next),
        )
        trace.append((label, r))
        x, y = x_next, y_next
        if label in terminal:
            break
    return trace


def rollout_greedy(q: QTable, m: Nmdp, h: Prm, n_episode: int, rng, terminal_labels=()):
    """Greedy (explore=0) rollout; returns the trace and the total machine
    reward collected along it."""
    terminal = set(terminal_labels)
    session = m.reward_source.session(rng)
    x, y = m.x_init, h.init
    trace = []
    total_machine_reward = 0.0
    for _ in range(n_episode):
        a = q.greedy_action(y, x, m.available[x])
        x_next, label, r = step(m, x, a, rng, session)
        y_next = advance_machine(h, y, label, "sample", rng)
        total_machine_reward += h.edge_reward(y, label, y_next)
        trace.append((label, r))
        x, y = x_next, y_next
        if label in terminal:
            break
    return trace, total_machine_reward


def statically_unrealizable(zeta: Word, terminal_labels) -> bool:
    """A query word with a terminal label before its last position can
    never be a trace prefix: the episode ends at that label."""
    terminal = set(terminal_labels)
    return any(label in terminal for label in zeta[:-1])


def membership_query(table: ObservationTable, zeta: Word, m: Nmdp, q_m: QTable,
                     cfg: LearnerConfig, rng, terminal_labels=()) -> int:
    """Prime the RL teacher toward realizing `zeta`; every episode trace is
    recorded.  Returns the number of episodes run."""
    if not zeta:
        return 0
    if statically_unrealizable(zeta, terminal_labels):
        return 0
    if not word_realizable(m, zeta):
        # provably not a trace prefix of any trajectory: priming would
        # burn the whole n_query budget for nothing
        return 0
    machine = membership_reward_machine(m.ap, zeta)
    q_m.reset()  # machine shape changes with every query word
    episodes = 0
    while table.sample_count(zeta) < cfg.n_check and episodes < cfg.n_query:
        trace = teacher_query(q_m, m, machine, "membership", cfg, rng, terminal_labels)
        table.record(trace)
        episodes += 1
    return episodes


class HypothesisEvaluator:
    """Cached matrix view of a hypothesis for per-trace counterexample checks."""

    def __init__(self, h: Prm, alphabet):
        self.h = h
        self.label_mats = {label: h.label_matrix(label) for label in alphabet}
        self.cond_mats = {
            label: {gamma: h.reward_conditional_matrix(gamma, label) for gamma in h.gamma}
            for label in alphabet
        }

    def expected_next_rewards(self, vec: np.ndarray, label) -> dict:
        out = {}
        denom = float((vec @ self.label_mats[label]).sum())
        if denom <= 0.0:
            return out
        for gamma, mat in self.cond_mats[label].items():
            mass = float((vec @ mat).sum())
            if mass > 0.0:
                out[gamma] = mass / denom
        return out

    def advance(self, vec: np.ndarray, label) -> np.ndarray:
        return vec @ self.label_mats[label]

    def bottom_mass(self, vec: np.ndarray) -> float:
        if self.h.bottom is None:
            return 0.0
        return float(vec[self.h.bottom])


def is_counterexample(table: ObservationTable, h: Prm, trace, n_check: int,
                      evaluator: HypothesisEvaluator | None = None):
    """Returns the offending prefix word, or None.

    A prefix is a counterexample when (a) it is fully absorbed by the
    failure state despite being sampled at least n_check times, or (b)
    its empirical reward distribution is statistically different from
    the hypothesis prediction at that prefix."""
    if evaluator is None:
        evaluator = HypothesisEvaluator(h, table.alphabet)
    m_total = max(table.total_samples(), 1)
    vec = h.initial_vector()
    word = []
    for label, _ in trace:
        if label not in evaluator.label_mats:
            evaluator.label_mats[label] = h.label_matrix(label)
            evaluator.cond_mats[label] = {
                gamma: h.reward_conditional_matrix(gamma, label) for gamma in h.gamma
            }
        expected = evaluator.expected_next_rewards(vec, label)
        vec = evaluator.advance(vec, label)
        word.append(label)
        prefix = tuple(word)
        if evaluator.bottom_mass(vec) >= 1.0 - 1e-12:
            if table.sample_count(prefix) >= n_check:
                return prefix
            continue
        freq = table.freq(prefix)
        if sum(freq.values()) > 0 and expected and diff_against_distribution(freq, expected, m_total):
            return prefix
    return None


def equivalence_query(table: ObservationTable, m: Nmdp, q_h: QTable, hypothesis: Prm,
                      cfg: LearnerConfig, rng, terminal_labels=()):
    """Run equivalence-mode teacher episodes against the hypothesis until a
    counterexample appears or n_stop episodes elapse.  Returns
    (counterexample word or None, episodes run)."""
    evaluator = HypothesisEvaluator(hypothesis, table.alphabet)
    episodes = 0
    while episodes < cfg.n_stop:
        trace = teacher_query(q_h, m, hypothesis, "equivalence", cfg, rng, terminal_labels)
        table.record(trace)
        episodes += 1
        ce = is_counterexample(table, hypothesis, trace, cfg.n_check, evaluator)
        if ce is not None:
            return ce, episodes
    return None, episodes


@dataclass
class RoundStats:
    round: int
    membership_episodes: int
    equivalence_episodes: int
    counterexample: str | None
    n_s: int
    n_e: int


@dataclass
class ActiveReport:
    rounds: list = field(default_factory=list)
    total_membership_episodes: int = 0
    total_equivalence_episodes: int = 0
    total_counterexamples: int = 0
    truncated: bool = False
    wall_time: float = 0.0   # not rendered: report files must be reproducible

    def render(self) -> str:
        lines = []
        for r in self.rounds:
            lines.append(
                "round %d: membership_episodes=%d equivalence_episodes=%d "
                "counterexample=%s |S|=%d |E|=%d"
                % (
                    r.round,
                    r.membership_episodes,
                    r.equivalence_episodes,
                    r.counterexample if r.counterexample is not None else "-",
                    r.n_s,
                    r.n_e,
                )
            )
        lines.append(
            "totals: membership_episodes=%d equivalence_episodes=%d counterexamples=%d rounds=%d%s"
            % (
                self.total_membership_episodes,
                self.total_equivalence_episodes,
                self.total_counterexamples,
                len(self.rounds),
                " (truncated by max_rounds)" if self.truncated else "",
            )
        )
        return "\n".join(lines) + "\n"


@dataclass
class ActiveResult:
    hypothesis: Prm
    table: ObservationTable
    report: ActiveReport


def learn_active(m: Nmdp, cfg: LearnerConfig, terminal_labels=()) -> ActiveResult:
    """The outer active-learning loop: repair the table with membership
    queries until closed and consistent, pose an equivalence query, feed
    counterexample prefixes back into S, and stop after n_stop
    consecutive counterexample-free equivalence rounds."""
    start_time = time.monotonic()
    rng = np.random.default_rng(cfg.seed)
    alphabet = m.label_alphabet()
    table = ObservationTable(m.ap, alphabet)
    q_m, q_h = QTable(), QTable()
    report = ActiveReport()
    hypothesis = None
    last_shape = None
    clean_rounds = 0

    extensions = [EPSILON] + [(label,) for label in alphabet]
    exhausted = set()  # words that already received a full n_query budget unrealized

    def fill_table() -> int:
        episodes = 0
        for s in list(table.s):
            for x in extensions:
                for e in list(table.e):
                    zeta = s + x + e
                    if not zeta or zeta in exhausted:
                        continue
                    if table.sample_count(zeta) >= cfg.n_check:
                        continue
                    used = membership_query(table, zeta, m, q_m, cfg, rng, terminal_labels)
                    episodes += used
                    if table.sample_count(zeta) < cfg.n_check:
                        exhausted.add(zeta)
        return episodes

    for round_no in range(1, cfg.max_rounds + 1):
        membership_episodes = 0
        for _ in range(cfg.max_repairs_per_round):
            membership_episodes += fill_table()
            consistent, witness = table.is_consistent()
            if not consistent:
                _, _, label, e = witness
                table.add_experiment((label,) + e)
                continue
            closed, witness = table.is_closed()
            if not closed:
                s, label = witness
                table.add_state(s + (label,))
                continue
            break

        hypothesis = build_hypothesis(
            table, cfg.n_check, rho_convention=cfg.rho_convention
        )
        if hypothesis.n_states() != last_shape:
            q_h.reset()
            last_shape = hypothesis.n_states()
        ce, eq_episodes = equivalence_query(
            table, m, q_h, hypothesis, cfg, rng, terminal_labels
        )
        report.rounds.append(
            RoundStats(
                round=round_no,
                membership_episodes=membership_episodes,
                equivalence_episodes=eq_episodes,
                counterexample=None if ce is None else word_str(ce),
                n_s=len(table.s),
                n_e=len(table.e),
            )
        )
        report.total_membership_episodes += membership_episodes
        report.total_equivalence_episodes += eq_episodes
        if ce is None:
            clean_rounds += 1
            if clean_rounds >= cfg.n_stop:
                break
        else:
            clean_rounds = 0
            report.total_counterexamples += 1
            for k in range(1, len(ce) + 1):
                table.add_state(ce[:k])
    else:
        report.truncated = True

    report.wall_time = time.monotonic() - start_time
    return ActiveResult(hypothesis=hypothesis, table=table, report=report)
