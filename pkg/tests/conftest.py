"""Shared fixtures and generators for the test suite."""

import numpy as np
import pytest

from prmlearn import (
    Alphabet,
    EMPTY_LABEL,
    Nmdp,
    Prm,
    PrmBacked,
    coffee_prm,
    patrol_prm,
)
from prmlearn.machine import unit_vector

C = frozenset({"c"})
O = frozenset({"o"})
STAR = frozenset({"*"})


@pytest.fixture
def coffee():
    return coffee_prm()


@pytest.fixture
def patrol():
    return patrol_prm()


def single_state_zero_prm(props=("a",)):
    """One state, reward 0 on every label."""
    ap = Alphabet(props)
    tau = {(0, label): np.ones(1) for label in ap.labels()}
    rho = {(0, label): 0.0 for label in ap.labels()}
    return Prm(ap, [0.0], ["y0"], 0, tau, rho)


def dyadic_vector(rng, n, grain=64):
    """A probability vector whose entries are multiples of 1/grain."""
    cuts = sorted(rng.integers(0, grain + 1, size=n - 1).tolist())
    return np.diff([0] + cuts + [grain]).astype(float) / grain


def random_nmdp(rng, n_states=3, n_actions=2, props=("a",), *, dyadic=False, truth=None):
    """A random NMDP with every action available everywhere and random
    transition labels; reward source defaults to a zero machine."""
    ap = Alphabet(props)
    labels = ap.labels()
    p, labeling = {}, {}
    for x in range(n_states):
        for a in range(n_actions):
            if dyadic:
                vec = dyadic_vector(rng, n_states)
            else:
                vec = rng.random(n_states) + 1e-3
                vec = vec / vec.sum()
            p[(x, a)] = vec
            for j in np.flatnonzero(vec):
                labeling[(x, a, int(j))] = labels[int(rng.integers(0, len(labels)))]
    if truth is None:
        truth = single_state_zero_prm(props)
    return Nmdp(
        states=tuple("x%d" % i for i in range(n_states)),
        x_init=0,
        actions=tuple("a%d" % i for i in range(n_actions)),
        available=[list(range(n_actions)) for _ in range(n_states)],
        p=p,
        ap=ap,
        labeling=labeling,
        reward_source=PrmBacked(truth),
    )


def two_cell_nmdp(truth):
    """1x2 grid "Ac": action 0 stays (label empty), action 1 toggles the
    cell, entering the marked cell emits {c}."""
    ap = truth.ap
    c = frozenset({"c"})
    p = {
        (0, 0): unit_vector(2, 0),
        (0, 1): unit_vector(2, 1),
        (1, 0): unit_vector(2, 1),
        (1, 1): unit_vector(2, 0),
    }
    labeling = {
        (0, 0, 0): EMPTY_LABEL,
        (0, 1, 1): c,
        (1, 0, 1): c,
        (1, 1, 0): EMPTY_LABEL,
    }
    return Nmdp(
        states=("left", "right"),
        x_init=0,
        actions=("stay", "move"),
        available=[[0, 1], [0, 1]],
        p=p,
        ap=ap,
        labeling=labeling,
        reward_source=PrmBacked(truth),
    )
