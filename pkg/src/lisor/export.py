"""Graphviz-DOT rendering of automata plus the FSA JSON format.

Rendering conventions: the start state is a gray-filled circle, accepting
states are double circles, and an optional highlighted token path is drawn
in red. With ``merge_edges`` all symbols sharing a (source, target) pair
collapse into one edge, labeled either by the symbol list or, past
``max_label_symbols``, by a generated ``word_class_<src>-<dst>`` name whose
full membership goes into a sidecar JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Alphabet
from .errors import ConfigurationError, InputError, ParseError
from .fsa import UNDEFINED, Fsa, fsa_step

FSA_FORMAT_VERSION = "lisor-fsa-v1"


@dataclass
class DotOptions:
    merge_edges: bool = False
    max_label_symbols: int = 8
    highlight_path: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.max_label_symbols < 1:
            raise ConfigurationError("max_label_symbols must be >= 1")


def _defined_edges(fsa: Fsa) -> list[tuple[int, int, int]]:
    """(src, symbol, dst) triples, sorted, skipping UNDEFINED entries."""
    edges = []
    for src in range(fsa.n_states + 1):
        for sym in range(len(fsa.alphabet)):
            dst = int(fsa.transitions[src, sym])
            if dst != UNDEFINED:
                edges.append((src, sym, dst))
    return edges


def _highlight_edges(fsa: Fsa, tokens: tuple[int, ...]) -> set[tuple[int, int, int]]:
    marked = set()
    state = fsa.start
    for tok in tokens:
        if not 0 <= tok < len(fsa.alphabet):
            raise InputError(f"highlight token {tok} outside alphabet")
        nxt = fsa_step(fsa, state, tok)
        if int(fsa.transitions[state, tok]) != UNDEFINED:
            marked.add((state, tok, nxt))
        state = nxt
    return marked


def word_classes(fsa: Fsa, opts: DotOptions) -> dict[str, list[str]]:
    """Generated class names -> symbol lists for edges too busy to label."""
    if not opts.merge_edges:
        return {}
    grouped: dict[tuple[int, int], list[int]] = {}
    for src, sym, dst in _defined_edges(fsa):
        grouped.setdefault((src, dst), []).append(sym)
    return {
        f"word_class_{src}-{dst}": [fsa.alphabet.symbol(s) for s in syms]
        for (src, dst), syms in sorted(grouped.items())
        if len(syms) > opts.max_label_symbols
    }


def to_dot(fsa: Fsa, opts: DotOptions | None = None) -> str:
    """Deterministic DOT text for one automaton."""
    opts = opts or DotOptions()
    fsa.validate()
    marked = _highlight_edges(fsa, opts.highlight_path) if opts.highlight_path else set()
    lines = ["digraph fsa {", "  rankdir=LR;", '  node [shape=circle, fontname="Helvetica"];']
    for state in range(fsa.n_states):
        shape = "doublecircle" if state in fsa.accepting else "circle"
        lines.append(f'  S_{state} [shape={shape}, label="S_{state}"];')
    lines.append(
        f'  S_{fsa.start} [shape=circle, style=filled, fillcolor=gray, label="start"];'
    )
    edges = _defined_edges(fsa)
    if opts.merge_edges:
        grouped: dict[tuple[int, int], list[int]] = {}
        for src, sym, dst in edges:
            grouped.setdefault((src, dst), []).append(sym)
        for (src, dst), syms in sorted(grouped.items()):
            if len(syms) > opts.max_label_symbols:
                label = f"word_class_{src}-{dst}"
            else:
                label = ",".join(fsa.alphabet.symbol(s) for s in syms)
            red = any((src, s, dst) in marked for s in syms)
            attrs = f'label="{label}"' + (', color="red", fontcolor="red"' if red else "")
            lines.append(f"  S_{src} -> S_{dst} [{attrs}];")
    else:
        for src, sym, dst in edges:
            red = (src, sym, dst) in marked
            attrs = f'label="{fsa.alphabet.symbol(sym)}"' + (
                ', color="red", fontcolor="red"' if red else ""
            )
            lines.append(f"  S_{src} -> S_{dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def save_dot(fsa: Fsa, opts: DotOptions, path) -> list[Path]:
    """Write the DOT file plus, when classes were generated, the sidecar
    ``<name>.classes.json``. Returns the written paths."""
    path = Path(path)
    path.write_text(to_dot(fsa, opts))
    written = [path]
    classes = word_classes(fsa, opts)
    if classes:
        sidecar = path.with_suffix(".classes.json")
        sidecar.write_text(json.dumps(classes, indent=2, sort_keys=True) + "\n")
        written.append(sidecar)
    return written


def fsa_to_json(fsa: Fsa) -> dict:
    fsa.validate()
    return {
        "version": FSA_FORMAT_VERSION,
        "alphabet": list(fsa.alphabet.symbols),
        "n_states": fsa.n_states,
        "start": fsa.start,
        "accepting": sorted(fsa.accepting),
        "transitions": fsa.transitions.tolist(),
    }


def fsa_from_json(doc: dict) -> Fsa:
    if doc.get("version") != FSA_FORMAT_VERSION:
        raise ParseError(f"unsupported fsa version {doc.get('version')!r}")
    try:
        fsa = Fsa(
            alphabet=Alphabet(tuple(doc["alphabet"])),
            n_states=int(doc["n_states"]),
            accepting=frozenset(int(s) for s in doc["accepting"]),
            transitions=np.asarray(doc["transitions"], dtype=np.int64),
        )
        start = int(doc["start"])
    except KeyError as exc:
        raise ParseError(f"fsa document missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed fsa document: {exc}") from None
    if start != fsa.start:
        raise ParseError(f"start field {start} != n_states {fsa.n_states}")
    try:
        fsa.validate()
    except Exception as exc:
        raise ParseError(f"fsa failed validation: {exc}") from None
    return fsa


def fsa_roundtrip(fsa: Fsa) -> Fsa:
    """Serialize then parse back; the result is structurally identical."""
    return fsa_from_json(json.loads(json.dumps(fsa_to_json(fsa))))


def save_fsa(fsa: Fsa, path) -> None:
    with open(path, "w") as fh:
        json.dump(fsa_to_json(fsa), fh, sort_keys=True)
        fh.write("\n")


def load_fsa(path) -> Fsa:
    with open(path) as fh:
        return fsa_from_json(json.load(fh))
