"""Passive learning: reconstruct the reward machine of a fixed policy.

All rollout traces are recorded into one observation table; every
nonempty suffix of a trace's label word becomes an experiment (capped in
length), well-sampled prefixes seed the state rows, and the table is
then closed and made consistent on the frozen data before hypothesis
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .alphabet import EPSILON, label_sort_key, word_str
from .environment import Nmdp, collect_traces
from .machine import Prm
from .table import ObservationTable, build_hypothesis, repair_on_frozen_data


@dataclass
class PassiveConfig:
    n_check: int
    n_episode: int = 100
    terminal_labels: tuple = ()
    max_experiment_len: int = 12
    max_states: int = 500
    seed: int = 0
    jobs: int = 1
    rho_convention: str = "target"

    def __post_init__(self):
        if self.n_check <= 0:
            raise ValueError("n_check must be positive")
        if self.n_episode <= 0:
            raise ValueError("n_episode must be positive")
        if self.max_experiment_len < 1:
            raise ValueError("max_experiment_len must be at least 1")


@dataclass
class PassiveReport:
    episodes: int = 0
    dropped_suffixes: int = 0
    n_s: int = 0
    n_e: int = 0
    notes: list = field(default_factory=list)

    def render(self) -> str:
        lines = [
            "episodes=%d dropped_suffixes=%d |S|=%d |E|=%d"
            % (self.episodes, self.dropped_suffixes, self.n_s, self.n_e)
        ]
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


@dataclass
class PassiveResult:
    table: ObservationTable
    hypothesis: Prm
    report: PassiveReport

    def __iter__(self):
        return iter((self.table, self.hypothesis))


def learn_passive_from_traces(traces, ap, cfg: PassiveConfig, alphabet=None) -> PassiveResult:
    """Algorithm core over pre-recorded traces of (label, reward) pairs."""
    report = PassiveReport(episodes=len(traces))
    if alphabet is None:
        observed = {label for trace in traces for label, _ in trace}
        alphabet = sorted(observed, key=label_sort_key)
    table = ObservationTable(ap, alphabet)

    for trace in traces:
        table.record(trace)
        word = tuple(label for label, _ in trace)
        for k in range(len(word)):
            suffix = word[k:]
            if len(suffix) > cfg.max_experiment_len:
                report.dropped_suffixes += 1
                continue
            table.add_experiment(suffix)

    # Seed S with every prefix sampled at least n_check times: rows without
    # enough data would be routed to the failure state anyway, and the seed
    # stops sparse rows from collapsing into one vacuously compatible class.
    seeds = sorted(
        (w for w, n in table.sample.items() if n >= cfg.n_check),
        key=lambda w: (len(w), word_str(w)),
    )
    for w in seeds:
        if len(table.s) >= cfg.max_states:
            report.notes.append("state seeding stopped at max_states=%d" % cfg.max_states)
            break
        table.add_state(w)

    repair_on_frozen_data(table)
    closed, witness = table.is_closed()
    assert closed, witness
    report.n_s, report.n_e = len(table.s), len(table.e)
    hypothesis = build_hypothesis(table, cfg.n_check, rho_convention=cfg.rho_convention)
    return PassiveResult(table=table, hypothesis=hypothesis, report=report)


def learn_passive(m: Nmdp, policy, episodes: int, cfg: PassiveConfig) -> PassiveResult:
    """Roll out `episodes` episodes under the policy, then learn from them."""
    if episodes < 1:
        raise ValueError("need at least one episode")
    traces = collect_traces(
        m, policy, episodes, cfg.seed, cfg.n_episode, cfg.terminal_labels, jobs=cfg.jobs
    )
    return learn_passive_from_traces(traces, m.ap, cfg, alphabet=m.label_alphabet())
