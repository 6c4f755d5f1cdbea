"""Synthetic regular-language datasets over finite alphabets.

Two built-in binary tasks:

* ``"0110"``  -- positive iff the sequence is exactly 0110 (length-4 strings).
* ``"000"``   -- positive iff the sequence contains three consecutive zeros.

Datasets carry train/validation/test splits of labeled token sequences and
round-trip through a JSON Lines format (one header line, then one object per
sequence).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParseError

TASK_NAMES = ("0110", "000")


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct symbol strings; position = token index."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ConfigurationError("alphabet must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ConfigurationError(f"alphabet symbols not unique: {self.symbols}")

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)

    def symbol(self, i: int) -> str:
        return self.symbols[i]


BINARY = Alphabet(("0", "1"))


@dataclass(frozen=True)
class Sequence:
    """Token indices into some alphabet plus a binary label."""

    tokens: tuple[int, ...]
    label: int

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ConfigurationError("sequence must have length >= 1")
        if self.label not in (0, 1):
            raise ConfigurationError(f"label must be 0 or 1, got {self.label}")


@dataclass
class Dataset:
    alphabet: Alphabet
    train: list[Sequence]
    validation: list[Sequence]
    test: list[Sequence]
    task_name: str = ""
    seed: int = 0

    def split(self, name: str) -> list[Sequence]:
        try:
            return {"train": self.train, "validation": self.validation, "test": self.test}[name]
        except KeyError:
            raise ConfigurationError(f"unknown split {name!r}") from None


def label_oracle(task: str, tokens) -> int:
    """Ground-truth label for a binary-alphabet token sequence.

    Token index 0 is symbol "0" and index 1 is symbol "1".
    """
    tokens = tuple(tokens)
    if task == "0110":
        return int(tokens == (0, 1, 1, 0))
    if task == "000":
        run = 0
        for t in tokens:
            run = run + 1 if t == 0 else 0
            if run >= 3:
                return 1
        return 0
    raise ConfigurationError(f"unknown task {task!r}; expected one of {TASK_NAMES}")


def positive_fraction(seqs: list[Sequence]) -> float:
    return sum(s.label for s in seqs) / len(seqs) if seqs else 0.0


def _random_binary_seq(rng: np.random.Generator, length: int, task: str) -> Sequence:
    tokens = tuple(int(t) for t in rng.integers(0, 2, size=length))
    return Sequence(tokens, label_oracle(task, tokens))


def gen_task_0110(n_train: int, n_test: int, seed: int) -> Dataset:
    """Dataset for spotting the string 0110 among length-4 binary strings.

    Training draws length-4 strings uniformly (duplicates kept); validation is
    the full enumeration of all 16 length-4 strings, each exactly once.
    """
    if n_train < 1:
        raise ConfigurationError("n_train must be >= 1")
    rng = np.random.default_rng(seed)
    train = [_random_binary_seq(rng, 4, "0110") for _ in range(n_train)]
    validation = [
        Sequence(tokens, label_oracle("0110", tokens))
        for tokens in itertools.product((0, 1), repeat=4)
    ]
    test = [_random_binary_seq(rng, 4, "0110") for _ in range(n_test)]
    return Dataset(BINARY, train, validation, test, task_name="0110", seed=seed)


def gen_task_000(
    n_train: int,
    n_valid: int,
    n_test: int,
    len_range: tuple[int, int] = (4, 12),
    seed: int = 0,
) -> Dataset:
    """Dataset for detecting three consecutive zeros in random binary strings.

    Lengths are uniform over ``len_range`` (inclusive); every token is an
    independent fair coin flip.
    """
    lo, hi = len_range
    if lo < 3:
        raise ConfigurationError(f"min length {lo} < 3: no positive sequence possible")
    if lo > hi:
        raise ConfigurationError(f"bad length range {len_range}")
    rng = np.random.default_rng(seed)

    def draw(n):
        out = []
        for _ in range(n):
            length = int(rng.integers(lo, hi + 1))
            out.append(_random_binary_seq(rng, length, "000"))
        return out

    train, validation, test = draw(n_train), draw(n_valid), draw(n_test)
    return Dataset(BINARY, train, validation, test, task_name="000", seed=seed)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the JSONL form: a header line, then one object per sequence."""
    with open(path, "w") as fh:
        header = {
            "alphabet": list(dataset.alphabet.symbols),
            "task": dataset.task_name,
            "seed": dataset.seed,
        }
        fh.write(json.dumps(header) + "\n")
        for split in ("train", "validation", "test"):
            for seq in dataset.split(split):
                row = {
                    "split": split,
                    "tokens": [dataset.alphabet.symbol(t) for t in seq.tokens],
                    "label": seq.label,
                }
                fh.write(json.dumps(row) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    for key in ("alphabet", "task", "seed"):
        if key not in header:
            raise ParseError(f"{path}: header missing field {key!r}")
    alphabet = Alphabet(tuple(header["alphabet"]))
    splits: dict[str, list[Sequence]] = {"train": [], "validation": [], "test": []}
    for lineno, line in enumerate(lines[1:], start=2):
        row = json.loads(line)
        if row.get("split") not in splits:
            raise ParseError(f"{path}:{lineno}: bad split {row.get('split')!r}")
        tokens = tuple(alphabet.index(sym) for sym in row["tokens"])
        splits[row["split"]].append(Sequence(tokens, int(row["label"])))
    return Dataset(
        alphabet,
        splits["train"],
        splits["validation"],
        splits["test"],
        task_name=header["task"],
        seed=int(header["seed"]),
    )
