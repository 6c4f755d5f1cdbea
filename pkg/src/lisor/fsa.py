"""Deterministic automata compiled from clustered hidden-state traces.

A clustering's k clusters become the automaton states; an extra start state
(serial number k, stored as the appended transition row) anchors every
sequence. Transition counts are tallied per symbol and determinized by
keeping only the most frequent successor. A state accepts iff the model's
classifier labels the mean of its members' original hidden vectors positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import Clustering, TracePool, cluster_pool, distinct_points
from .data import Alphabet, Sequence
from .errors import ConfigurationError, InputError, StructuralError
from .model import RnnModel, classify_vector, predict

UNDEFINED = -1


def build_counts(pool: TracePool, clustering: Clustering, n_symbols: int | None = None) -> np.ndarray:
    """Per-symbol transition counts, shape (n_symbols, k+1, k).

    Row k is the start state: each sequence's first point contributes a
    start-row transition, so every pooled point induces exactly one count.
    """
    if len(pool) != clustering.assign.shape[0]:
        raise StructuralError(
            f"pool has {len(pool)} points but clustering assigns {clustering.assign.shape[0]}"
        )
    if n_symbols is None:
        n_symbols = int(pool.symbols.max()) + 1 if len(pool) else 1
    k = clustering.k
    counts = np.zeros((n_symbols, k + 1, k), dtype=np.int64)
    assign = clustering.assign
    for sl in pool.sequence_slices():
        states = assign[sl]
        prev = np.concatenate(([k], states[:-1]))
        np.add.at(counts, (pool.symbols[sl], prev, states), 1)
    return counts


def determinize(counts: np.ndarray) -> np.ndarray:
    """Keep the most frequent successor per (state, symbol); ties take the
    lowest id, never-seen rows become UNDEFINED."""
    n_symbols, rows, _ = counts.shape
    best = counts.argmax(axis=2)                      # (S, k+1)
    seen = counts.sum(axis=2) > 0
    transitions = np.where(seen, best, UNDEFINED).T   # (k+1, S)
    return np.ascontiguousarray(transitions.astype(np.int64))


def accepting_states(clustering: Clustering, pool: TracePool, model: RnnModel) -> frozenset[int]:
    """Clusters whose member-mean hidden vector the classifier labels 1.

    Means are taken over the original d-dim hidden vectors even when the
    clustering ran in the position-augmented space.
    """
    if len(pool) != clustering.assign.shape[0]:
        raise StructuralError("clustering does not cover this pool")
    sums = np.zeros((clustering.k, pool.d))
    np.add.at(sums, clustering.assign, pool.H)
    counts = np.bincount(clustering.assign, minlength=clustering.k)
    accepted = []
    for c in range(clustering.k):
        if counts[c] == 0:
            raise StructuralError(f"cluster {c} has no members")
        if classify_vector(model, sums[c] / counts[c]) == 1:
            accepted.append(c)
    return frozenset(accepted)


@dataclass
class Fsa:
    """Deterministic automaton: alphabet, k real states plus a start row."""

    alphabet: Alphabet
    n_states: int
    accepting: frozenset[int]
    transitions: np.ndarray  # (n_states+1, |alphabet|); UNDEFINED = -1

    @property
    def start(self) -> int:
        return self.n_states

    def validate(self) -> None:
        if self.n_states < 1:
            raise StructuralError("automaton needs at least one real state")
        want = (self.n_states + 1, len(self.alphabet))
        if self.transitions.shape != want:
            raise StructuralError(f"transition matrix shape {self.transitions.shape} != {want}")
        bad = (self.transitions < UNDEFINED) | (self.transitions >= self.n_states)
        if bad.any():
            raise StructuralError("transition targets outside [0, n_states) / UNDEFINED")
        if not all(0 <= s < self.n_states for s in self.accepting):
            raise StructuralError("accepting set must contain only real states")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Fsa)
            and self.alphabet == other.alphabet
            and self.n_states == other.n_states
            and self.accepting == other.accepting
            and np.array_equal(self.transitions, other.transitions)
        )


def build_fsa(
    model: RnnModel,
    pool: TracePool,
    alphabet: Alphabet,
    k: int,
    method: str,
    rng: np.random.Generator,
) -> Fsa:
    """Cluster the pool, tally transitions, determinize, pick accepting states."""
    clustering = cluster_pool(pool, k, method, rng)
    counts = build_counts(pool, clustering, len(alphabet))
    fsa = Fsa(
        alphabet=alphabet,
        n_states=k,
        accepting=accepting_states(clustering, pool, model),
        transitions=determinize(counts),
    )
    fsa.validate()
    return fsa


def fsa_step(fsa: Fsa, state: int, symbol: int) -> int:
    """One transition. Undefined entries keep the current state, except from
    the start, which falls to state 0."""
    if not 0 <= state <= fsa.n_states:
        raise InputError(f"state {state} outside [0, {fsa.n_states}]")
    if not 0 <= symbol < len(fsa.alphabet):
        raise InputError(f"symbol index {symbol} outside alphabet")
    nxt = int(fsa.transitions[state, symbol])
    if nxt == UNDEFINED:
        return 0 if state == fsa.start else state
    return nxt


def fsa_classify(fsa: Fsa, seq: Sequence | tuple[int, ...] | list[int]) -> int:
    tokens = seq.tokens if isinstance(seq, Sequence) else tuple(seq)
    state = fsa.start
    for tok in tokens:
        state = fsa_step(fsa, state, tok)
    return int(state in fsa.accepting)


@dataclass
class FsaEnsemble:
    """Odd-sized committee of automata over one alphabet; majority wins."""

    members: list[Fsa]

    def __post_init__(self):
        if len(self.members) % 2 == 0:
            raise ConfigurationError(f"ensemble size must be odd, got {len(self.members)}")
        first = self.members[0].alphabet
        if any(m.alphabet != first for m in self.members):
            raise ConfigurationError("ensemble members must share one alphabet")


def ensemble_classify(ens: FsaEnsemble, seq) -> int:
    votes = sum(fsa_classify(m, seq) for m in ens.members)
    return int(votes * 2 > len(ens.members))


def accuracy(classifier, split: list[Sequence]) -> float:
    """Fraction of correctly labeled sequences; accepts an Fsa, an ensemble,
    or an RNN model."""
    if not split:
        raise ConfigurationError("split must be non-empty")
    if isinstance(classifier, Fsa):
        pred = lambda s: fsa_classify(classifier, s)
    elif isinstance(classifier, FsaEnsemble):
        pred = lambda s: ensemble_classify(classifier, s)
    elif isinstance(classifier, RnnModel):
        pred = lambda s: predict(classifier, s)
    else:
        raise ConfigurationError(f"cannot classify with {type(classifier).__name__}")
    return sum(pred(s) == s.label for s in split) / len(split)


def sweep_k(
    model: RnnModel,
    pool: TracePool,
    alphabet: Alphabet,
    ks: list[int],
    eval_split: list[Sequence],
    target: float,
    method: str,
    seed: int = 0,
) -> tuple[int | None, list[tuple[int, float]]]:
    """Extract one FSA per cluster count and evaluate each.

    Returns the first k whose accuracy reaches ``target`` (None when none
    does) plus the full (k, accuracy) curve. Each k gets its own child rng
    stream, so curves are reproducible and independent of the sweep order.

    A pool only supports as many clusters as it has distinct points in the
    clustering space; past that the partition cannot get finer, so the curve
    continues flat at the finest extraction's accuracy.
    """
    if not ks or sorted(ks) != list(ks):
        raise ConfigurationError("ks must be a non-empty ascending list")
    k_sat = distinct_points(pool, method)
    curve = []
    min_k = None
    saturated_acc = None
    for k in ks:
        if k <= k_sat:
            rng = np.random.default_rng([seed, k])
            fsa = build_fsa(model, pool, alphabet, k, method, rng)
            acc = accuracy(fsa, eval_split)
        else:
            if saturated_acc is None:
                rng = np.random.default_rng([seed, k_sat])
                fsa = build_fsa(model, pool, alphabet, k_sat, method, rng)
                saturated_acc = accuracy(fsa, eval_split)
            acc = saturated_acc
        curve.append((k, acc))
        if min_k is None and acc >= target:
            min_k = k
    return min_k, curve
