import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lisor.data import (
    Alphabet,
    Sequence,
    gen_task_000,
    gen_task_0110,
    label_oracle,
    load_dataset,
    positive_fraction,
    save_dataset,
)
from lisor.errors import ConfigurationError


def test_alphabet_indexing():
    a = Alphabet(("a", "b", "c"))
    assert len(a) == 3
    assert all(a.index(a.symbol(i)) == i for i in range(3))


def test_alphabet_rejects_dupes_and_empty():
    with pytest.raises(ConfigurationError):
        Alphabet(("x", "x"))
    with pytest.raises(ConfigurationError):
        Alphabet(())


def test_sequence_validation():
    with pytest.raises(ConfigurationError):
        Sequence((), 0)
    with pytest.raises(ConfigurationError):
        Sequence((0,), 2)


def test_label_oracle_0110():
    assert label_oracle("0110", [0, 1, 1, 0]) == 1
    assert label_oracle("0110", [0, 0, 0, 0]) == 0


def test_label_oracle_000_examples():
    assert label_oracle("000", [1, 0, 0, 0, 1]) == 1
    assert label_oracle("000", [0, 1, 0, 0, 1, 0]) == 0


def test_label_oracle_unknown_task():
    with pytest.raises(ConfigurationError):
        label_oracle("0101", [0, 1])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=20))
def test_oracle_000_matches_naive_string_scan(tokens):
    text = "".join(str(t) for t in tokens)
    assert label_oracle("000", tokens) == int("000" in text)


def test_0110_split_sizes():
    ds = gen_task_0110(1000, 100, seed=3)
    assert (len(ds.train), len(ds.validation), len(ds.test)) == (1000, 16, 100)
    assert all(len(s.tokens) == 4 for s in ds.train)


def test_0110_validation_is_exact_enumeration():
    ds = gen_task_0110(16, 0, seed=0)
    seen = {s.tokens for s in ds.validation}
    assert seen == set(itertools.product((0, 1), repeat=4))
    assert sum(s.label for s in ds.validation) == 1


def test_0110_determinism(tmp_path):
    a, b = gen_task_0110(50, 10, seed=11), gen_task_0110(50, 10, seed=11)
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(a, pa)
    save_dataset(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_000_split_sizes_and_lengths():
    ds = gen_task_000(3000, 500, 500, (4, 12), seed=5)
    assert (len(ds.train), len(ds.validation), len(ds.test)) == (3000, 500, 500)
    lengths = {len(s.tokens) for s in ds.train}
    assert lengths <= set(range(4, 13))


def test_000_positive_rate_at_length_3():
    ds = gen_task_000(20000, 1, 1, (3, 3), seed=9)
    # exactly one of the 8 length-3 strings is positive
    assert positive_fraction(ds.train) == pytest.approx(1 / 8, abs=0.01)


def test_000_min_length_guard():
    with pytest.raises(ConfigurationError):
        gen_task_000(10, 1, 1, (2, 5), seed=0)


def test_000_determinism():
    a = gen_task_000(100, 20, 20, (4, 8), seed=21)
    b = gen_task_000(100, 20, 20, (4, 8), seed=21)
    assert [s.tokens for s in a.train] == [s.tokens for s in b.train]
    assert [s.label for s in a.test] == [s.label for s in b.test]


def test_dataset_jsonl_roundtrip(tmp_path):
    ds = gen_task_000(30, 10, 5, (4, 6), seed=2)
    path = tmp_path / "ds.jsonl"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.alphabet == ds.alphabet
    assert back.task_name == ds.task_name and back.seed == ds.seed
    for split in ("train", "validation", "test"):
        assert back.split(split) == ds.split(split)


def test_dataset_jsonl_header_format(tmp_path):
    ds = gen_task_0110(5, 2, seed=1)
    path = tmp_path / "ds.jsonl"
    save_dataset(ds, path)
    first = path.read_text().splitlines()[0]
    assert '"alphabet": ["0", "1"]' in first and '"task": "0110"' in first


def test_labels_match_oracle_everywhere():
    ds = gen_task_000(200, 50, 50, (4, 10), seed=13)
    for split in ("train", "validation", "test"):
        for s in ds.split(split):
            assert s.label == label_oracle("000", s.tokens)
