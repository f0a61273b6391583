"""Atomic propositions, labels and words.

A label is a subset of atomic propositions (a frozenset of proposition
names); a word is a finite tuple of labels.  Canonical serialization:
propositions sorted and joined by "&", the empty label printed as
EMPTY_LABEL_CHAR.  On the command line "~" is accepted for the empty
label and labels inside a word are separated by ";".
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterable

Label = frozenset
Word = tuple

EMPTY_LABEL: Label = frozenset()
EPSILON: Word = ()

EMPTY_LABEL_CHAR = "ε"  # ε
CLI_EMPTY_LABEL_CHAR = "~"
WORD_SEPARATOR = ";"


class Alphabet:
    """An ordered finite set of atomic proposition names."""

    def __init__(self, props: Iterable[str]):
        props = tuple(props)
        if len(set(props)) != len(props):
            raise ValueError("duplicate proposition names: %r" % (props,))
        for p in props:
            if not p or "&" in p or ";" in p or p in (EMPTY_LABEL_CHAR, CLI_EMPTY_LABEL_CHAR):
                raise ValueError("invalid proposition name: %r" % (p,))
        self.props = props
        self._index = {p: i for i, p in enumerate(props)}

    def __len__(self) -> int:
        return len(self.props)

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.props == other.props

    def __repr__(self) -> str:
        return "Alphabet(%r)" % (list(self.props),)

    def validate_label(self, label: Label) -> Label:
        for p in label:
            if p not in self._index:
                raise ValueError("label %s uses unknown proposition %r" % (label_str(label), p))
        return label

    def labels(self, cap: int = 2 ** 16) -> list:
        """All of 2^AP in canonical order.  Errors out past `cap` labels."""
        n = 2 ** len(self.props)
        if n > cap:
            raise ValueError(
                "enumeration of 2^AP needs %d labels, exceeding the cap of %d" % (n, cap)
            )
        out = [EMPTY_LABEL]
        for k in range(1, len(self.props) + 1):
            for combo in combinations(self.props, k):
                out.append(frozenset(combo))
        out.sort(key=label_sort_key)
        return out


def label_sort_key(label: Label):
    return (len(label), tuple(sorted(label)))


def label_str(label: Label, empty: str = EMPTY_LABEL_CHAR) -> str:
    if not label:
        return empty
    return "&".join(sorted(label))


def parse_label(text: str) -> Label:
    text = text.strip()
    if text in ("", EMPTY_LABEL_CHAR, CLI_EMPTY_LABEL_CHAR):
        return EMPTY_LABEL
    parts = [p.strip() for p in text.split("&")]
    if any(not p for p in parts):
        raise ValueError("malformed label: %r" % (text,))
    return frozenset(parts)


def word_str(word: Word, empty: str = EMPTY_LABEL_CHAR) -> str:
    if not word:
        return empty
    return WORD_SEPARATOR.join(label_str(l, empty) for l in word)


def parse_word(text: str) -> Word:
    text = text.strip()
    if text in ("", EMPTY_LABEL_CHAR):
        return EPSILON
    return tuple(parse_label(part) for part in text.split(WORD_SEPARATOR))


def format_reward(value: float) -> str:
    value = float(value)
    if value == int(value):
        return str(int(value))
    return repr(value)


def parse_reward(text: str) -> float:
    return float(text.strip())
