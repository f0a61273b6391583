"""Probabilistic reward machines and their matrix semantics.

A machine maps (state, label) pairs to a distribution over successor
states and a reward.  Two reward conventions are supported:

* ``source`` -- the reward emitted on reading a label is a function of
  the current state and the label (the standard definition).
* ``target`` -- every state carries a reward tag and the reward emitted
  on a transition is the tag of the sampled successor state.  Learned
  hypothesis machines use this convention; their states are built from
  (reward, row) pairs so the tag is always available.

Partial machines leave some (state, label) pairs undefined; matrix
operations give those all-zero rows.  Machines with ``implicit_bottom``
route every undefined pair to an absorbing failure state with reward 0,
which keeps approximate hypotheses total without materializing 2^AP.
"""

from __future__ import annotations

import numpy as np

from .alphabet import (
    Alphabet,
    EMPTY_LABEL,
    Label,
    Word,
    format_reward,
    label_sort_key,
    label_str,
    parse_label,
    parse_reward,
)

PROB_TOL = 1e-9
DEFAULT_LABEL_CAP = 2 ** 16


def sample_index(vec: np.ndarray, rng) -> int:
    """Draw an index from a probability vector; deterministic rows skip
    the rng entirely (much faster than rng.choice on small vectors)."""
    j = int(np.argmax(vec))
    if vec[j] >= 1.0:
        return j
    k = int(np.searchsorted(np.cumsum(vec), rng.random(), side="right"))
    return min(k, len(vec) - 1)


class UndefinedTransitionError(KeyError):
    def __init__(self, state: str, label: Label):
        super().__init__("undefined transition at state %r on label %s" % (state, label_str(label)))
        self.state = state
        self.label = label


class UnreachableWordError(ValueError):
    pass


class Prm:
    """A probabilistic reward machine.

    tau maps (state index, label) to a probability vector over states;
    rho maps the same keys to a reward.  ``tags`` (per-state rewards)
    and ``convention="target"`` switch to successor-tag reward
    semantics.  ``bottom`` marks the failure state of hypothesis
    machines; with ``implicit_bottom`` undefined pairs go there.
    """

    def __init__(
        self,
        ap: Alphabet,
        gamma,
        states,
        init: int,
        tau: dict,
        rho: dict,
        *,
        tags=None,
        convention: str = "source",
        bottom: int | None = None,
        implicit_bottom: bool = False,
    ):
        self.ap = ap
        self.states = tuple(states)
        self.init = int(init)
        self.tau = {}
        self.rho = dict(rho)
        self.convention = convention
        self.bottom = bottom
        self.implicit_bottom = implicit_bottom
        self.tags = None if tags is None else tuple(float(t) for t in tags)

        n = len(self.states)
        if not 0 <= self.init < n:
            raise ValueError("initial state index out of range")
        if convention not in ("source", "target"):
            raise ValueError("unknown reward convention %r" % (convention,))
        if convention == "target" and self.tags is None:
            raise ValueError("target convention requires per-state reward tags")
        if implicit_bottom and bottom is None:
            raise ValueError("implicit_bottom requires a bottom state")
        if bottom is not None and not 0 <= bottom < n:
            raise ValueError("bottom state index out of range")

        for (y, label), vec in tau.items():
            ap.validate_label(label)
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (n,):
                raise ValueError("transition vector has wrong length at (%r, %s)" % (y, label_str(label)))
            if np.any(vec < 0):
                raise ValueError("negative transition probability at (%r, %s)" % (y, label_str(label)))
            if abs(vec.sum() - 1.0) > PROB_TOL:
                raise ValueError(
                    "transition probabilities at (%s, %s) sum to %r"
                    % (self.states[y], label_str(label), float(vec.sum()))
                )
            self.tau[(y, label)] = vec
        if set(self.tau) != set(self.rho):
            raise ValueError("tau and rho must be defined on exactly the same (state, label) pairs")

        gamma = {float(g) for g in gamma}
        gamma.add(0.0)  # required by hypothesis initial states
        gamma.update(float(r) for r in self.rho.values())
        if self.tags is not None:
            gamma.update(self.tags)
        self.gamma = tuple(sorted(gamma))

    # -- structure ---------------------------------------------------------

    def n_states(self) -> int:
        return len(self.states)

    def defined(self, y: int, label: Label) -> bool:
        return (y, label) in self.tau or self.implicit_bottom

    def is_total(self, cap: int = DEFAULT_LABEL_CAP) -> bool:
        if self.implicit_bottom:
            return True
        labels = self.ap.labels(cap)
        return all((y, l) in self.tau for y in range(len(self.states)) for l in labels)

    def successor_vector(self, y: int, label: Label) -> np.ndarray:
        """Transition row; zeros if undefined, e_bottom with implicit_bottom."""
        vec = self.tau.get((y, label))
        if vec is not None:
            return vec
        out = np.zeros(len(self.states))
        if self.implicit_bottom:
            out[self.bottom] = 1.0
        return out

    def edge_reward(self, y: int, label: Label, y_next: int) -> float:
        if self.convention == "target":
            return self.tags[y_next]
        if (y, label) in self.rho:
            return float(self.rho[(y, label)])
        if self.implicit_bottom:
            return 0.0
        raise UndefinedTransitionError(self.states[y], label)

    # -- matrix semantics --------------------------------------------------

    def label_matrix(self, label: Label) -> np.ndarray:
        self.ap.validate_label(label)
        n = len(self.states)
        out = np.zeros((n, n))
        for y in range(n):
            out[y] = self.successor_vector(y, label)
        return out

    def reward_conditional_matrix(self, gamma: float, label: Label) -> np.ndarray:
        gamma = float(gamma)
        if gamma not in self.gamma:
            raise ValueError("reward %r is not in gamma %r" % (gamma, self.gamma))
        self.ap.validate_label(label)
        n = len(self.states)
        out = np.zeros((n, n))
        if self.convention == "target":
            mask = np.array([1.0 if t == gamma else 0.0 for t in self.tags])
            for y in range(n):
                out[y] = self.successor_vector(y, label) * mask
        else:
            for y in range(n):
                vec = self.tau.get((y, label))
                if vec is not None:
                    if float(self.rho[(y, label)]) == gamma:
                        out[y] = vec
                elif self.implicit_bottom and gamma == 0.0:
                    out[y, self.bottom] = 1.0
        return out

    def reward_matrix(self, gamma: float, cap: int = DEFAULT_LABEL_CAP) -> np.ndarray:
        n = len(self.states)
        out = np.zeros((n, n))
        for label in self.ap.labels(cap):
            out += self.reward_conditional_matrix(gamma, label)
        return out

    def word_matrix(self, word: Word) -> np.ndarray:
        out = np.eye(len(self.states))
        for label in word:
            out = out @ self.label_matrix(label)
        return out

    def initial_vector(self) -> np.ndarray:
        vec = np.zeros(len(self.states))
        vec[self.init] = 1.0
        return vec

    def reward_sequence_probability(self, rewards, cap: int = DEFAULT_LABEL_CAP) -> float:
        """y_I H(r_1)...H(r_n) 1.  Not normalized over reward sequences."""
        vec = self.initial_vector()
        for gamma in rewards:
            vec = vec @ self.reward_matrix(gamma, cap)
        return float(vec.sum())

    def conditional_reward_probability(self, gamma: float, word: Word, cap: int = DEFAULT_LABEL_CAP) -> float:
        """y_I H(l_1...l_k) H(gamma) 1, literally per the definition."""
        vec = self.initial_vector() @ self.word_matrix(word)
        vec = vec @ self.reward_matrix(gamma, cap)
        return float(vec.sum())

    def reward_sequence_given_labels(self, labels: Word, rewards) -> float:
        """Probability of emitting `rewards` while reading `labels`."""
        if len(labels) != len(rewards):
            raise ValueError("label and reward sequences differ in length")
        vec = self.initial_vector()
        for label, gamma in zip(labels, rewards):
            vec = vec @ self.reward_conditional_matrix(float(gamma), label)
        return float(vec.sum())

    def next_reward_distribution(self, prefix: Word, label: Label) -> dict:
        """Normalized distribution of the reward emitted on reading `label`
        after driving the machine with `prefix`."""
        vec = self.initial_vector() @ self.word_matrix(prefix)
        denom = float((vec @ self.label_matrix(label)).sum())
        if denom <= 0.0:
            raise UnreachableWordError(
                "unreachable word: %s then %s" % ("".join("<%s>" % label_str(l) for l in prefix), label_str(label))
            )
        out = {}
        for gamma in self.gamma:
            mass = float((vec @ self.reward_conditional_matrix(gamma, label)).sum())
            if mass > 0.0:
                out[gamma] = mass / denom
        return out

    def bottom_mass(self, word: Word) -> float:
        """Probability that reading `word` ends in the failure state."""
        if self.bottom is None:
            return 0.0
        vec = self.initial_vector() @ self.word_matrix(word)
        return float(vec[self.bottom])

    # -- sampling ----------------------------------------------------------

    def sample_run(self, word: Word, rng) -> list:
        """Run the machine on `word`; returns [(state index, reward), ...]
        with one entry per symbol (the state entered and reward emitted)."""
        y = self.init
        out = []
        for label in word:
            self.ap.validate_label(label)
            if (y, label) not in self.tau and not self.implicit_bottom:
                raise UndefinedTransitionError(self.states[y], label)
            vec = self.successor_vector(y, label)
            y_next = sample_index(vec, rng)
            out.append((y_next, self.edge_reward(y, label, y_next)))
            y = y_next
        return out


# -- builtin machines -------------------------------------------------------


def unit_vector(n: int, i: int) -> np.ndarray:
    vec = np.zeros(n)
    vec[i] = 1.0
    return vec


def coffee_prm() -> Prm:
    """Ground truth for the probabilistic office task: picking up coffee
    has a 10% chance of producing weak coffee that is rejected (reward 0)
    at delivery; stepping on a decoration fails the task."""
    ap = Alphabet(["c", "o", "*"])
    names = ["y0", "y_good", "y_weak", "y_done", "y_fail"]
    n = len(names)
    c, o, star = frozenset({"c"}), frozenset({"o"}), frozenset({"*"})
    tau, rho = {}, {}

    def rule(y, label, vec, reward):
        tau[(y, label)] = vec
        rho[(y, label)] = reward

    for label in ap.labels():
        # y0: waiting for coffee
        if label == star:
            rule(0, label, unit_vector(n, 4), 0.0)
        elif label == c:
            vec = np.zeros(n)
            vec[1], vec[2] = 0.9, 0.1
            rule(0, label, vec, 0.0)
        else:
            rule(0, label, unit_vector(n, 0), 0.0)
        # y_good: holding good coffee
        if label == star:
            rule(1, label, unit_vector(n, 4), 0.0)
        elif label == o:
            rule(1, label, unit_vector(n, 3), 1.0)
        else:
            rule(1, label, unit_vector(n, 1), 0.0)
        # y_weak: holding weak coffee
        if label == star:
            rule(2, label, unit_vector(n, 4), 0.0)
        elif label == o:
            rule(2, label, unit_vector(n, 3), 0.0)
        else:
            rule(2, label, unit_vector(n, 2), 0.0)
        # absorbing done / fail
        rule(3, label, unit_vector(n, 3), 0.0)
        rule(4, label, unit_vector(n, 4), 0.0)
    return Prm(ap, [0.0, 1.0], names, 0, tau, rho)


def patrol_prm() -> Prm:
    """Deterministic two-state machine: reward 1 for alternating between
    the marked cell and an unmarked one, 0 for staying put."""
    ap = Alphabet(["c"])
    names = ["u_out", "u_in"]
    c = frozenset({"c"})
    tau = {
        (0, EMPTY_LABEL): unit_vector(2, 0),
        (0, c): unit_vector(2, 1),
        (1, EMPTY_LABEL): unit_vector(2, 0),
        (1, c): unit_vector(2, 1),
    }
    rho = {
        (0, EMPTY_LABEL): 0.0,
        (0, c): 1.0,
        (1, EMPTY_LABEL): 1.0,
        (1, c): 0.0,
    }
    return Prm(ap, [0.0, 1.0], names, 0, tau, rho)


def random_prm(rng, n_states: int, props, rewards, *, dyadic: bool = False, grain: int = 64) -> Prm:
    """A random total machine, for tests.  With `dyadic` every probability
    is a multiple of 1/grain, so products with dyadic factors stay exact."""
    ap = Alphabet(props)
    rewards = [float(r) for r in rewards]
    names = ["y%d" % i for i in range(n_states)]
    tau, rho = {}, {}
    for y in range(n_states):
        for label in ap.labels():
            if dyadic:
                cuts = sorted(rng.integers(0, grain + 1, size=n_states - 1).tolist())
                parts = np.diff([0] + cuts + [grain]).astype(float) / grain
                vec = parts
            else:
                vec = rng.random(n_states) + 1e-3
                vec = vec / vec.sum()
            tau[(y, label)] = vec
            rho[(y, label)] = rewards[int(rng.integers(0, len(rewards)))]
    return Prm(ap, rewards, names, 0, tau, rho)


# -- text format --------------------------------------------------------------
#
# ap: a,b,c
# gamma: 0,1
# init: y0
# [convention: target]      (only when not source)
# [bottom: name]            (only for hypothesis machines)
# [implicit_bottom: true]
# [tag: name value]         (one per state, target machines only)
# y0 --c/0--> y1 : 0.9


def prm_to_text(prm: Prm) -> str:
    lines = []
    lines.append("ap: %s" % ",".join(prm.ap.props))
    lines.append("gamma: %s" % ",".join(format_reward(g) for g in prm.gamma))
    lines.append("init: %s" % prm.states[prm.init])
    if prm.convention != "source":
        lines.append("convention: %s" % prm.convention)
    if prm.bottom is not None:
        lines.append("bottom: %s" % prm.states[prm.bottom])
    if prm.implicit_bottom:
        lines.append("implicit_bottom: true")
    if prm.tags is not None:
        for name, tag in zip(prm.states, prm.tags):
            lines.append("tag: %s %s" % (name, format_reward(tag)))
    keys = sorted(prm.tau, key=lambda k: (k[0], label_sort_key(k[1])))
    for y, label in keys:
        vec = prm.tau[(y, label)]
        reward = format_reward(prm.rho[(y, label)])
        for j in np.flatnonzero(vec):
            lines.append(
                "%s --%s/%s--> %s : %s"
                % (prm.states[y], label_str(label), reward, prm.states[int(j)], repr(float(vec[j])))
            )
    return "\n".join(lines) + "\n"


def prm_from_text(text: str) -> Prm:
    ap = None
    gamma = []
    init_name = None
    convention = "source"
    bottom_name = None
    implicit_bottom = False
    tag_lines = []
    edges = []  # (src, label, reward, dst, prob)
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("ap:"):
            ap = Alphabet([p.strip() for p in line[3:].split(",") if p.strip()])
        elif line.startswith("gamma:"):
            gamma = [parse_reward(p) for p in line[6:].split(",") if p.strip()]
        elif line.startswith("init:"):
            init_name = line[5:].strip()
        elif line.startswith("convention:"):
            convention = line[11:].strip()
        elif line.startswith("bottom:"):
            bottom_name = line[7:].strip()
        elif line.startswith("implicit_bottom:"):
            implicit_bottom = line.split(":", 1)[1].strip().lower() == "true"
        elif line.startswith("tag:"):
            name, value = line[4:].split()
            tag_lines.append((name, parse_reward(value)))
        else:
            head, prob = line.rsplit(":", 1)
            src, rest = head.split("--", 1)
            middle, dst = rest.rsplit("-->", 1)
            label_part, reward_part = middle.rsplit("/", 1)
            edges.append(
                (src.strip(), parse_label(label_part), parse_reward(reward_part), dst.strip(), float(prob))
            )
    if ap is None or init_name is None:
        raise ValueError("machine text is missing its ap or init header")

    names = []
    for name, _, _, _, _ in edges:
        if name not in names:
            names.append(name)
    for _, _, _, name, _ in edges:
        if name not in names:
            names.append(name)
    for name, _ in tag_lines:
        if name not in names:
            names.append(name)
    if init_name not in names:
        names.append(init_name)
    if bottom_name is not None and bottom_name not in names:
        names.append(bottom_name)
    index = {name: i for i, name in enumerate(names)}

    tau, rho = {}, {}
    for src, label, reward, dst, prob in edges:
        key = (index[src], label)
        if key not in tau:
            tau[key] = np.zeros(len(names))
            rho[key] = reward
        elif rho[key] != reward:
            raise ValueError("conflicting rewards for %s on %s" % (src, label_str(label)))
        tau[key][index[dst]] += prob

    tags = None
    if tag_lines:
        tags = [0.0] * len(names)
        for name, value in tag_lines:
            tags[index[name]] = value
    return Prm(
        ap,
        gamma,
        names,
        index[init_name],
        tau,
        rho,
        tags=tags,
        convention=convention,
        bottom=None if bottom_name is None else index[bottom_name],
        implicit_bottom=implicit_bottom,
    )


def save_prm(prm: Prm, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(prm_to_text(prm))


def load_prm(path) -> Prm:
    with open(path, "r", encoding="utf-8") as fh:
        return prm_from_text(fh.read())


def prm_to_dot(prm: Prm) -> str:
    lines = ["digraph prm {", "  rankdir=LR;", '  __init [shape=point, label=""];']
    for i, name in enumerate(prm.states):
        shape = "doublecircle" if i == prm.bottom else "circle"
        lines.append('  "%s" [shape=%s];' % (name, shape))
    lines.append('  __init -> "%s";' % prm.states[prm.init])
    keys = sorted(prm.tau, key=lambda k: (k[0], label_sort_key(k[1])))
    for y, label in keys:
        vec = prm.tau[(y, label)]
        for j in np.flatnonzero(vec):
            j = int(j)
            reward = format_reward(prm.edge_reward(y, label, j))
            lines.append(
                '  "%s" -> "%s" [label="⟨%s, %s⟩ : %s"];'
                % (prm.states[y], prm.states[j], label_str(label), reward, repr(float(vec[j])))
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
