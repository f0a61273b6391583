"""Non-Markovian decision processes and the office gridworld.

The environment hides its reward source: rewards depend on the full
label history, either through a ground-truth reward machine advanced on
transition labels (PrmBacked) or a lookup table of per-word reward
distributions (TableBacked).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .alphabet import (
    Alphabet,
    EMPTY_LABEL,
    Label,
    Word,
    format_reward,
    label_str,
    parse_label,
    parse_reward,
)
from .machine import Prm, sample_index, unit_vector

PROB_TOL = 1e-9

ACTIONS = ("N", "S", "E", "W")
MOVES = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}
CELL_CHARS = ".#co*A"


# -- reward sources -----------------------------------------------------------


class PrmBacked:
    """Ground-truth reward machine advanced on the label history."""

    def __init__(self, prm: Prm):
        if not prm.is_total():
            raise ValueError("a PrmBacked reward source needs a total machine")
        self.prm = prm

    def session(self, rng):
        return _PrmSession(self.prm, rng)


class _PrmSession:
    def __init__(self, prm: Prm, rng):
        self.prm = prm
        self.rng = rng
        self.y = prm.init

    def observe(self, label: Label) -> float:
        vec = self.prm.successor_vector(self.y, label)
        y_next = sample_index(vec, self.rng)
        reward = self.prm.edge_reward(self.y, label, y_next)
        self.y = y_next
        return reward


class TableBacked:
    """Reward distributions keyed by the full label word; unknown words
    yield reward 0."""

    def __init__(self, dists: dict):
        for word, dist in dists.items():
            total = sum(dist.values())
            if abs(total - 1.0) > PROB_TOL:
                raise ValueError("distribution for %r sums to %r" % (word, total))
        self.dists = dict(dists)

    def session(self, rng):
        return _TableSession(self.dists, rng)


class _TableSession:
    def __init__(self, dists, rng):
        self.dists = dists
        self.rng = rng
        self.history = []

    def observe(self, label: Label) -> float:
        self.history.append(label)
        dist = self.dists.get(tuple(self.history))
        if dist is None:
            return 0.0
        values = sorted(dist)
        probs = np.array([dist[v] for v in values])
        return float(values[sample_index(probs, self.rng)])


# -- the decision process ------------------------------------------------------


@dataclass
class Nmdp:
    states: tuple           # display names
    x_init: int
    actions: tuple          # display names
    available: list         # state index -> list of action indices
    p: dict                 # (state, action) -> probability vector over states
    ap: Alphabet
    labeling: dict          # (state, action, state) -> Label
    reward_source: object

    def __post_init__(self):
        for x, acts in enumerate(self.available):
            if not acts:
                raise ValueError("state %r has no available actions" % (self.states[x],))
        for (x, a), vec in self.p.items():
            vec = np.asarray(vec, dtype=float)
            if abs(vec.sum() - 1.0) > PROB_TOL or np.any(vec < 0):
                raise ValueError("bad transition distribution at (%d, %d)" % (x, a))
            self.p[(x, a)] = vec
            for j in np.flatnonzero(vec):
                if (x, a, int(j)) not in self.labeling:
                    raise ValueError("missing label for transition (%d, %d, %d)" % (x, a, int(j)))

    def label_alphabet(self) -> list:
        """Labels that actually occur on transitions, in canonical order."""
        from .alphabet import label_sort_key

        return sorted(set(self.labeling.values()), key=label_sort_key)


@dataclass
class Trajectory:
    states: list            # x_0 ... x_n (indices)
    actions: list           # a_1 ... a_n (indices)
    labels: list            # l_1 ... l_n
    rewards: list | None = None


class UnavailableActionError(ValueError):
    pass


# -- policies -----------------------------------------------------------------


class PositionalPolicy:
    """Map from state to a distribution over actions.  Missing states fall
    back to the first available action (they are never visited by the
    rollouts the policy was built for)."""

    def __init__(self, action_probs: dict):
        self.action_probs = dict(action_probs)

    def distribution(self, history, x: int, m: Nmdp) -> dict:
        dist = self.action_probs.get(x)
        if dist is None:
            return {m.available[x][0]: 1.0}
        return dist


class GeneralPolicy:
    def __init__(self, fn):
        self.fn = fn

    def distribution(self, history, x: int, m: Nmdp) -> dict:
        return self.fn(history, x)


def uniform_policy(m: Nmdp) -> PositionalPolicy:
    probs = {}
    for x in range(len(m.states)):
        acts = m.available[x]
        probs[x] = {a: 1.0 / len(acts) for a in acts}
    return PositionalPolicy(probs)


def sample_action(dist: dict, rng) -> int:
    actions = sorted(dist)
    probs = np.array([dist[a] for a in actions])
    return int(actions[sample_index(probs, rng)])


def trajectory_probability(m: Nmdp, policy, t: Trajectory) -> float:
    if t.states[0] != m.x_init:
        raise ValueError("trajectory does not start at the initial state")
    prob = 1.0
    history = []
    for k, a in enumerate(t.actions):
        x, x_next = t.states[k], t.states[k + 1]
        if a not in m.available[x]:
            raise UnavailableActionError(
                "action %r unavailable at state %r" % (a, m.states[x])
            )
        dist = policy.distribution(history, x, m)
        prob *= dist.get(a, 0.0) * float(m.p[(x, a)][x_next])
        if prob == 0.0:
            return 0.0
        history.append((x, a))
    return prob


# -- stepping and episodes -----------------------------------------------------


def step(m: Nmdp, x: int, a: int, rng, reward_session):
    """One environment step.  The reward session carries the label history."""
    if a not in m.available[x]:
        raise UnavailableActionError("action %r unavailable at state %r" % (a, m.states[x]))
    vec = m.p[(x, a)]
    x_next = sample_index(vec, rng)
    label = m.labeling[(x, a, x_next)]
    reward = reward_session.observe(label)
    return x_next, label, reward


def run_episode(m: Nmdp, policy, rng, n_episode: int, terminal_labels=()):
    """Roll out one episode; returns the trace as [(label, reward), ...]."""
    terminal = set(terminal_labels)
    session = m.reward_source.session(rng)
    x = m.x_init
    history = []
    trace = []
    for _ in range(n_episode):
        a = sample_action(policy.distribution(history, x, m), rng)
        x_next, label, reward = step(m, x, a, rng, session)
        trace.append((label, reward))
        history.append((x, a))
        x = x_next
        if label in terminal:
            break
    return trace


# -- grid map -------------------------------------------------------------------


@dataclass
class GridMap:
    width: int
    height: int
    cells: list              # rows of single characters
    start: tuple = field(default=None)

    def props_at(self, row: int, col: int) -> Label:
        ch = self.cells[row][col]
        if ch in ("c", "o", "*"):
            return frozenset({ch})
        return EMPTY_LABEL

    def is_wall(self, row: int, col: int) -> bool:
        return self.cells[row][col] == "#"


class MapParseError(ValueError):
    pass


def parse_gridmap(text: str) -> GridMap:
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise MapParseError("empty map")
    width = len(rows[0])
    start = None
    cells = []
    for r, line in enumerate(rows):
        if len(line) != width:
            raise MapParseError("row %d has length %d, expected %d" % (r, len(line), width))
        row_cells = []
        for c, ch in enumerate(line):
            if ch not in CELL_CHARS:
                raise MapParseError("bad character %r at row %d column %d" % (ch, r, c))
            if ch == "A":
                if start is not None:
                    raise MapParseError("multiple start cells (row %d column %d)" % (r, c))
                start = (r, c)
            row_cells.append(ch)
        cells.append(row_cells)
    if start is None:
        raise MapParseError("no start cell 'A' in map")
    return GridMap(width=width, height=len(rows), cells=cells, start=start)


def load_gridmap(path) -> GridMap:
    return parse_gridmap(Path(path).read_text(encoding="utf-8"))


def build_office_nmdp(gridmap: GridMap, truth: Prm) -> Nmdp:
    """Deterministic gridworld: moves blocked by walls and borders are
    self-loops; a transition is labeled with the propositions of its
    destination cell; rewards come from the hidden ground-truth machine."""
    cells = [
        (r, c)
        for r in range(gridmap.height)
        for c in range(gridmap.width)
        if not gridmap.is_wall(r, c)
    ]
    index = {cell: i for i, cell in enumerate(cells)}
    names = tuple("(%d,%d)" % cell for cell in cells)
    n = len(cells)
    ap = truth.ap
    p, labeling = {}, {}
    available = [list(range(len(ACTIONS))) for _ in cells]
    for (r, c), x in index.items():
        for a, action in enumerate(ACTIONS):
            dr, dc = MOVES[action]
            nr, nc = r + dr, c + dc
            if not (0 <= nr < gridmap.height and 0 <= nc < gridmap.width) or gridmap.is_wall(nr, nc):
                nr, nc = r, c
            x_next = index[(nr, nc)]
            p[(x, a)] = unit_vector(n, x_next)
            label = gridmap.props_at(nr, nc)
            ap.validate_label(label)
            labeling[(x, a, x_next)] = label
    return Nmdp(
        states=names,
        x_init=index[gridmap.start],
        actions=ACTIONS,
        available=available,
        p=p,
        ap=ap,
        labeling=labeling,
        reward_source=PrmBacked(truth),
    )


def shortest_path_policy(gridmap: GridMap, m: Nmdp) -> PositionalPolicy:
    """Positional policy following the shortest start -> coffee -> office
    path, avoiding decorations.  Fails if the two legs conflict on a cell."""
    cells = {}
    for r in range(gridmap.height):
        for c in range(gridmap.width):
            ch = gridmap.cells[r][c]
            if ch in ("c", "o"):
                cells.setdefault(ch, (r, c))
    if "c" not in cells or "o" not in cells:
        raise ValueError("map has no coffee or office cell")

    index = {}
    for i, name in enumerate(m.states):
        r, c = name.strip("()").split(",")
        index[(int(r), int(c))] = i

    def bfs(src, dst):
        from collections import deque

        prev = {src: None}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            if cur == dst:
                break
            for action in ACTIONS:
                dr, dc = MOVES[action]
                nxt = (cur[0] + dr, cur[1] + dc)
                if nxt in index and nxt not in prev and gridmap.props_at(*nxt) != frozenset({"*"}):
                    prev[nxt] = (cur, action)
                    queue.append(nxt)
        if dst not in prev:
            raise ValueError("no decoration-free path from %r to %r" % (src, dst))
        steps = []
        cur = dst
        while prev[cur] is not None:
            before, action = prev[cur]
            steps.append((before, action))
            cur = before
        return list(reversed(steps))

    legs = bfs(gridmap.start, cells["c"]) + bfs(cells["c"], cells["o"])
    probs = {}
    for cell, action in legs:
        x = index[cell]
        a = ACTIONS.index(action)
        if x in probs and probs[x] != {a: 1.0}:
            raise ValueError("shortest path revisits cell %r with a different move" % (cell,))
        probs[x] = {a: 1.0}
    return PositionalPolicy(probs)


def word_realizable(m: Nmdp, w: Word) -> bool:
    """Whether some trajectory's label word equals w: BFS over (state,
    matched length) pairs, polynomial in |X|·|A|·|w|."""
    frontier = {m.x_init}
    for label in w:
        nxt = set()
        for x in frontier:
            for a in m.available[x]:
                for x_next in np.flatnonzero(m.p[(x, a)]):
                    x_next = int(x_next)
                    if m.labeling[(x, a, x_next)] == label:
                        nxt.add(x_next)
        if not nxt:
            return False
        frontier = nxt
    return True


# -- membership reward machines --------------------------------------------------


def membership_reward_machine(ap: Alphabet, zeta: Word) -> Prm:
    """Deterministic machine paying 1 per matched symbol of the query word;
    the final state is absorbing with reward 0."""
    if not zeta:
        raise ValueError("membership query word must be non-empty")
    n = len(zeta) + 1
    names = ["y%d" % k for k in range(n)]
    tau, rho = {}, {}
    for k in range(n):
        for label in ap.labels():
            if k < len(zeta) and label == zeta[k]:
                tau[(k, label)] = unit_vector(n, k + 1)
                rho[(k, label)] = 1.0
            else:
                tau[(k, label)] = unit_vector(n, k)
                rho[(k, label)] = 0.0
    return Prm(ap, [0.0, 1.0], names, 0, tau, rho)


# -- product MDP ------------------------------------------------------------------


@dataclass
class ProductMdp:
    mdp: Nmdp
    reward: dict             # ((x,y) index, action, (x',y') index) -> reward
    pairs: list              # product state index -> (x, y)


def product(m: Nmdp, h: Prm) -> ProductMdp:
    missing = []
    needed = sorted(set(m.labeling.values()), key=lambda l: (len(l), tuple(sorted(l))))
    for y in range(h.n_states()):
        for label in needed:
            if not h.defined(y, label):
                missing.append((h.states[y], label_str(label)))
    if missing:
        raise ValueError("machine undefined on pairs: %s" % (missing,))

    n_x, n_y = len(m.states), h.n_states()
    pairs = [(x, y) for x in range(n_x) for y in range(n_y)]
    idx = {pair: i for i, pair in enumerate(pairs)}
    names = tuple("%s|%s" % (m.states[x], h.states[y]) for x, y in pairs)
    p, labeling, reward = {}, {}, {}
    available = [m.available[x] for x, _ in pairs]
    for (x, y), i in idx.items():
        for a in m.available[x]:
            vec = np.zeros(len(pairs))
            for x_next in np.flatnonzero(m.p[(x, a)]):
                x_next = int(x_next)
                label = m.labeling[(x, a, x_next)]
                succ = h.successor_vector(y, label)
                for y_next in np.flatnonzero(succ):
                    y_next = int(y_next)
                    j = idx[(x_next, y_next)]
                    vec[j] += float(m.p[(x, a)][x_next]) * float(succ[y_next])
                    labeling[(i, a, j)] = label
                    reward[(i, a, j)] = h.edge_reward(y, label, y_next)
            p[(i, a)] = vec
    mdp = Nmdp(
        states=names,
        x_init=idx[(m.x_init, h.init)],
        actions=m.actions,
        available=available,
        p=p,
        ap=m.ap,
        labeling=labeling,
        reward_source=m.reward_source,
    )
    return ProductMdp(mdp=mdp, reward=reward, pairs=pairs)


# -- free environment (any word realizable; used by tests and oracles) ------------


def free_nmdp(truth: Prm) -> Nmdp:
    """One state per label plus an initial state; action k moves to the
    state emitting label k.  Every label word is realizable."""
    ap = truth.ap
    labels = ap.labels()
    n = len(labels) + 1
    names = ("x_init",) + tuple("x_%s" % label_str(l) for l in labels)
    p, labeling = {}, {}
    available = [list(range(len(labels))) for _ in range(n)]
    for x in range(n):
        for a, label in enumerate(labels):
            p[(x, a)] = unit_vector(n, a + 1)
            labeling[(x, a, a + 1)] = label
    return Nmdp(
        states=names,
        x_init=0,
        actions=tuple("goto_%s" % label_str(l) for l in labels),
        available=available,
        p=p,
        ap=ap,
        labeling=labeling,
        reward_source=PrmBacked(truth),
    )


# -- configuration and trace logs ---------------------------------------------------


@dataclass
class EnvSetup:
    nmdp: Nmdp
    gridmap: GridMap
    truth: Prm
    n_episode: int
    terminal_labels: tuple
    seed: int


def load_env_config(path) -> EnvSetup:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("environment config must be a mapping")
    for key in ("map", "truth_prm"):
        if key not in cfg:
            raise ValueError("environment config is missing %r" % (key,))
    base = path.parent
    gridmap = load_gridmap(base / cfg["map"])
    from .machine import load_prm

    truth = load_prm(base / cfg["truth_prm"])
    nmdp = build_office_nmdp(gridmap, truth)
    terminal = tuple(parse_label(t) for t in cfg.get("terminal_labels", []))
    return EnvSetup(
        nmdp=nmdp,
        gridmap=gridmap,
        truth=truth,
        n_episode=int(cfg.get("n_episode", 100)),
        terminal_labels=terminal,
        seed=int(cfg.get("seed", 0)),
    )


def trace_to_line(trace) -> str:
    fields = []
    for label, reward in trace:
        fields.append(label_str(label))
        fields.append(format_reward(reward))
    return ";".join(fields)


def trace_from_line(line: str):
    fields = line.strip().split(";")
    if fields == [""]:
        return []
    if len(fields) % 2 != 0:
        raise ValueError("trace line has an odd number of fields: %r" % (line,))
    out = []
    for i in range(0, len(fields), 2):
        out.append((parse_label(fields[i]), parse_reward(fields[i + 1])))
    return out


def save_traces(traces, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(trace_to_line(trace) + "\n")


def load_traces(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [trace_from_line(line) for line in fh if line.strip()]


# -- parallel trace collection -------------------------------------------------------


def _collect_chunk(args):
    m, policy, seeds, n_episode, terminal_labels = args
    out = []
    for seed_state in seeds:
        rng = np.random.default_rng(seed_state)
        out.append(run_episode(m, policy, rng, n_episode, terminal_labels))
    return out


def collect_traces(m: Nmdp, policy, episodes: int, seed, n_episode: int, terminal_labels=(), jobs: int = 1):
    """Roll out `episodes` episodes with per-episode child rngs; results are
    deterministic and independent of the number of jobs."""
    seeds = np.random.SeedSequence(seed).spawn(episodes)
    if jobs <= 1:
        return _collect_chunk((m, policy, seeds, n_episode, terminal_labels))[:]
    from concurrent.futures import ProcessPoolExecutor

    chunks = [seeds[i::jobs] for i in range(jobs)]
    args = [(m, policy, chunk, n_episode, terminal_labels) for chunk in chunks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_collect_chunk, args))
    out = [None] * episodes
    for j, chunk_result in enumerate(results):
        for k, trace in enumerate(chunk_result):
            out[j + k * jobs] = trace
    return out
