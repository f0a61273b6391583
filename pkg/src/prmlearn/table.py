"""Sampling observation tables.

The table tracks reward frequencies T(w) for every prefix of every
recorded trace, plus per-word sample counters.  Statistical difference
between two empirical reward distributions uses a Hoeffding bound at
confidence alpha = 1/M^3 where M is the total number of samples so far.
"""

from __future__ import annotations

import csv
import math
from collections import Counter

import numpy as np

from .alphabet import (
    Alphabet,
    EPSILON,
    Label,
    Word,
    format_reward,
    label_sort_key,
    label_str,
    parse_label,
    parse_reward,
    word_str,
)
from .machine import Prm


def hoeffding_threshold(n: int, n_prime: int, m_total: int) -> float:
    alpha = 1.0 / m_total ** 3
    return math.sqrt(0.5 * math.log(2.0 / alpha)) * (math.sqrt(1.0 / n) + math.sqrt(1.0 / n_prime))


def diff(f, s: Word, s_prime: Word, m_total: int) -> bool:
    """Statistical difference of the reward distributions of two words.

    `f` maps words to frequency maps (reward -> count).  False whenever
    either word has no samples."""
    fs, fs_prime = f(s), f(s_prime)
    n = sum(fs.values())
    n_prime = sum(fs_prime.values())
    if n == 0 or n_prime == 0:
        return False
    threshold = hoeffding_threshold(n, n_prime, m_total)
    for gamma in set(fs) | set(fs_prime):
        gap = abs(fs.get(gamma, 0) / n - fs_prime.get(gamma, 0) / n_prime)
        if gap > threshold:
            return True
    return False


def diff_against_distribution(freq, dist: dict, m_total: int) -> bool:
    """Hoeffding test of an empirical frequency map against an expected
    distribution scaled to the same sample size."""
    n = sum(freq.values())
    if n == 0:
        return False
    scaled = {gamma: p * n for gamma, p in dist.items()}
    lookup = {0: freq, 1: scaled}
    return diff(lambda w: lookup[w], 0, 1, m_total)


class ObservationTable:
    """Observation table (S, E, T) with per-word sample counters.

    `alphabet` is the list of labels iterated by the closedness and
    consistency checks (typically the labels occurring in the
    environment, not all of 2^AP: unobservable labels have empty rows,
    which never affect either check).
    """

    def __init__(self, ap: Alphabet, alphabet=None):
        self.ap = ap
        self.alphabet = list(alphabet) if alphabet is not None else ap.labels()
        self.s: list = [EPSILON]
        self.e: list = [EPSILON]
        self.t: dict = {}
        self.sample: dict = {}
        self.num_traces = 0
        self._total_samples = 0

    # -- recording ---------------------------------------------------------

    def record(self, trace) -> None:
        """Count every nonempty prefix of a trace of (label, reward) pairs."""
        if not trace:
            return
        self.num_traces += 1
        word = []
        for label, reward in trace:
            word.append(label)
            key = tuple(word)
            counter = self.t.get(key)
            if counter is None:
                counter = Counter()
                self.t[key] = counter
            counter[float(reward)] += 1
            self.sample[key] = self.sample.get(key, 0) + 1
            self._total_samples += 1

    def merge(self, other: "ObservationTable") -> None:
        for word, counter in other.t.items():
            mine = self.t.setdefault(word, Counter())
            mine.update(counter)
        for word, count in other.sample.items():
            self.sample[word] = self.sample.get(word, 0) + count
            self._total_samples += count
        self.num_traces += other.num_traces
        for word in other.s:
            self.add_state(word)
        for word in other.e:
            self.add_experiment(word)

    # -- lookups -----------------------------------------------------------

    def freq(self, word: Word) -> Counter:
        return self.t.get(tuple(word), _EMPTY)

    def total(self, word: Word) -> int:
        return sum(self.freq(word).values())

    def sample_count(self, word: Word) -> int:
        if not word:
            return self.num_traces
        return self.sample.get(tuple(word), 0)

    def total_samples(self) -> int:
        return self._total_samples

    def add_state(self, word: Word) -> bool:
        if word not in self.s:
            self.s.append(word)
            return True
        return False

    def add_experiment(self, word: Word) -> bool:
        if word not in self.e:
            self.e.append(word)
            return True
        return False

    # -- compatibility ------------------------------------------------------

    def compatible_cells(self, w: Word, w_prime: Word) -> bool:
        m_total = max(self.total_samples(), 1)
        return not diff(self.freq, w, w_prime, m_total)

    def compatible_rows(self, s: Word, s_prime: Word) -> bool:
        m_total = max(self.total_samples(), 1)
        for e in self.e:
            if diff(self.freq, s + e, s_prime + e, m_total):
                return False
        return True

    def rows_share_evidence(self, s: Word, s_prime: Word) -> bool:
        """True when some experiment column has samples for both rows."""
        for e in self.e:
            if self.total(s + e) > 0 and self.total(s_prime + e) > 0:
                return True
        return False

    # -- closedness / consistency -------------------------------------------

    def row_has_data(self, s: Word) -> bool:
        return any(self.total(s + e) > 0 for e in self.e)

    def is_closed(self):
        """Returns (True, None) or (False, (s, label)) with a witness row
        s.label compatible (with shared evidence) with no member of S.
        Rows without any data are vacuously covered: they carry no
        information and map to the failure state anyway."""
        for s in self.s:
            for label in self.alphabet:
                extended = s + (label,)
                if not self.row_has_data(extended):
                    continue
                covered = any(
                    self.compatible_rows(extended, s_prime)
                    and (s_prime == extended or self.rows_share_evidence(extended, s_prime))
                    for s_prime in self.s
                )
                if not covered:
                    return False, (s, label)
        return True, None

    def is_consistent(self):
        """Returns (True, None) or (False, (s, s', label, e))."""
        m_total = max(self.total_samples(), 1)
        for i, s in enumerate(self.s):
            for s_prime in self.s[i + 1:]:
                if not self.compatible_rows(s, s_prime):
                    continue
                for label in self.alphabet:
                    left, right = s + (label,), s_prime + (label,)
                    for e in self.e:
                        if diff(self.freq, left + e, right + e, m_total):
                            return False, (s, s_prime, label, e)
        return True, None

    # -- representatives ------------------------------------------------------

    def rank(self, s: Word) -> int:
        return sum(self.total(s + (label,)) for label in self.alphabet)

    def _pick(self, candidates):
        return min(candidates, key=lambda w: (-self.rank(w), len(w), word_str(w)))

    def representative(self, s: Word, require_shared_evidence: bool = True) -> Word:
        """Highest-rank compatible member of S (ties: shortest, then
        lexicographic).  By default candidates other than s itself must
        share at least one sampled experiment column with s; without
        that restriction sparsely sampled tables collapse every row into
        one vacuously compatible class."""
        candidates = []
        for s_prime in self.s:
            if not self.compatible_rows(s, s_prime):
                continue
            if require_shared_evidence and s_prime != s and not self.rows_share_evidence(s, s_prime):
                continue
            candidates.append(s_prime)
        if not candidates:
            candidates = [s_prime for s_prime in self.s if self.compatible_rows(s, s_prime)]
        return self._pick(candidates)

    def resolve_to_member(self, w: Word) -> Word:
        """Map an arbitrary word to a compatible member of S, preferring
        members with shared evidence; exists whenever the table is closed."""
        compatible = [s for s in self.s if self.compatible_rows(w, s)]
        if not compatible:
            raise ValueError("no compatible row for %s; table is not closed" % (word_str(w),))
        shared = [s for s in compatible if s == w or self.rows_share_evidence(w, s)]
        return self._pick(shared if shared else compatible)

    # -- serialization ---------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["word", "reward", "count", "sample"])
            for word in sorted(self.t, key=lambda w: (len(w), word_str(w))):
                counter = self.t[word]
                for reward in sorted(counter):
                    writer.writerow(
                        [word_str(word), format_reward(reward), counter[reward], self.sample[word]]
                    )

    @classmethod
    def from_csv(cls, path, ap: Alphabet, alphabet=None) -> "ObservationTable":
        from .alphabet import parse_word

        table = cls(ap, alphabet)
        words = set()
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                word = parse_word(row["word"])
                counter = table.t.setdefault(word, Counter())
                counter[parse_reward(row["reward"])] += int(row["count"])
                table.sample[word] = int(row["sample"])
                words.add(word)
        table._total_samples = sum(table.sample.values())
        table.num_traces = max(
            (table.sample[w] for w in words if len(w) == 1), default=0
        )
        if alphabet is None:
            observed = {label for word in words for label in word}
            table.alphabet = sorted(observed, key=label_sort_key)
        return table


_EMPTY = Counter()


class TableNotReadyError(ValueError):
    pass


def build_hypothesis(
    table: ObservationTable,
    n_check: int,
    *,
    rho_convention: str = "target",
    label_cap: int = 2 ** 16,
) -> Prm:
    """Construct the hypothesis machine from a closed and consistent table.

    States are (reward, representative row) pairs reachable from
    (0, row(epsilon)) plus an absorbing failure state; transitions
    estimate reward-annotated successor frequencies, with all mass from
    under-sampled states or unobserved labels routed to the failure
    state.  The machine is total via an implicit failure default.
    """
    closed, witness = table.is_closed()
    if not closed:
        raise TableNotReadyError("table is not closed (witness %r)" % (witness,))
    consistent, witness = table.is_consistent()
    if not consistent:
        raise TableNotReadyError("table is not consistent (witness %r)" % (witness,))
    if rho_convention not in ("source", "target"):
        raise ValueError("unknown rho convention %r" % (rho_convention,))

    # Compatibility classes by greedy complete linkage in rank order: a row
    # joins the first class it is compatible with every member of (rows with
    # data must also share evidence with at least one member).  A single
    # sparsely sampled row is then never a bridge between two classes that
    # are mutually different.
    # rows with no data of their own (typically ε, whose own-word column is
    # never recorded) go last so they join an existing class instead of
    # seeding a spurious one
    order_rows = sorted(
        table.s,
        key=lambda w: (0 if table.row_has_data(w) else 1, -table.rank(w), len(w), word_str(w)),
    )
    classes: list = []
    assign: dict = {}
    for u in order_rows:
        has_data = table.row_has_data(u)
        target = None
        for idx, cls in enumerate(classes):
            if not all(table.compatible_rows(u, v) for v in cls):
                continue
            if has_data and not any(table.rows_share_evidence(u, v) for v in cls):
                continue
            target = idx
            break
        if target is None:
            classes.append([u])
            assign[u] = len(classes) - 1
        else:
            classes[target].append(u)
            assign[u] = target

    start = (0.0, assign[EPSILON])
    order = [start]
    seen = {start}
    edges = {}  # (state, label) -> list of (prob, next_state) or None for bottom
    queue = [start]
    while queue:
        state = queue.pop(0)
        _, cls_idx = state
        for label in table.alphabet:
            donors = [u for u in classes[cls_idx] if table.total(u + (label,)) > 0]
            if not donors:
                edges[(state, label)] = None
                continue
            u = min(
                donors,
                key=lambda w: (-table.total(w + (label,)), -table.rank(w), len(w), word_str(w)),
            )
            if table.sample_count(u) < n_check:
                edges[(state, label)] = None
                continue
            # pool the counts of every class member: the rows were merged as
            # statistically indistinguishable, so their extensions estimate
            # the same distribution
            counter = Counter()
            for donor in donors:
                counter.update(table.freq(donor + (label,)))
            total = sum(counter.values())
            next_cls = assign[table.resolve_to_member(u + (label,))]
            outs = []
            for gamma in sorted(counter):
                nxt = (float(gamma), next_cls)
                outs.append((counter[gamma] / total, nxt))
                if nxt not in seen:
                    seen.add(nxt)
                    order.append(nxt)
                    queue.append(nxt)
            edges[(state, label)] = outs

    names = []
    tags = []
    for i, (gamma, u) in enumerate(order):
        names.append("q%d" % i)
        tags.append(gamma)
    index = {state: i for i, state in enumerate(order)}

    # the failure state only exists when some (state, label) pair actually
    # routes to it; a fully covered table yields a machine without it
    all_labels = table.ap.labels(label_cap)
    needs_bottom = any(
        (state, label) not in edges or edges[(state, label)] is None
        for state in order
        for label in all_labels
    )
    n = len(order) + (1 if needs_bottom else 0)
    bottom = len(order) if needs_bottom else None
    if needs_bottom:
        names.append("bot")
        tags.append(0.0)

    tau, rho = {}, {}
    for (state, label), outs in edges.items():
        if outs is None:
            continue  # implicit failure routing; keeps exports free of ⊥ edges
        y = index[state]
        vec = np.zeros(n)
        for prob, nxt in outs:
            vec[index[nxt]] += prob
        tau[(y, label)] = vec
        rho[(y, label)] = state[0]  # source-state annotation per the construction

    gamma = {0.0}
    for counter in table.t.values():
        gamma.update(counter)
    return Prm(
        table.ap,
        sorted(gamma),
        names,
        index[start],
        tau,
        rho,
        tags=tags,
        convention=rho_convention,
        bottom=bottom,
        implicit_bottom=needs_bottom,
    )


def repair_on_frozen_data(table: ObservationTable, max_steps: int = 10_000) -> None:
    """Alternate closedness and consistency repairs without new samples
    until the table is closed and consistent."""
    for _ in range(max_steps):
        closed, witness = table.is_closed()
        if not closed:
            s, label = witness
            table.add_state(s + (label,))
            continue
        consistent, witness = table.is_consistent()
        if not consistent:
            _, _, label, e = witness
            table.add_experiment((label,) + e)
            continue
        return
    raise RuntimeError("table repair did not terminate within %d steps" % (max_steps,))
