"""Gated-RNN training on regular-language tasks and FSA distillation.

Pipeline: train a recurrent model, record its validation hidden states,
cluster them (k-means++ or the position-augmented k-means-x), compile the
clusters into a deterministic finite automaton, then classify with single
automata or majority-vote ensembles and render the result as Graphviz DOT.
"""

from .cluster import (
    Clustering,
    TracePool,
    augment_position,
    cluster_pool,
    collect_traces,
    kmeanspp_init,
    lloyd,
)
from .data import (
    Alphabet,
    Dataset,
    Sequence,
    gen_task_000,
    gen_task_0110,
    label_oracle,
    load_dataset,
    save_dataset,
)
from .export import DotOptions, fsa_from_json, fsa_to_json, load_fsa, save_dot, save_fsa, to_dot
from .fsa import (
    Fsa,
    FsaEnsemble,
    accepting_states,
    accuracy,
    build_counts,
    build_fsa,
    determinize,
    ensemble_classify,
    fsa_classify,
    fsa_step,
    sweep_k,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    CellKind,
    CellParams,
    HiddenTrace,
    RnnModel,
    cell_step,
    classify_vector,
    forward,
    init_model,
    load_model,
    save_model,
    sigmoid,
)
from .train import HyperParams, grad_check, loss_and_grads, train_model

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "CellKind",
    "CellParams",
    "Clustering",
    "Dataset",
    "DotOptions",
    "Fsa",
    "FsaEnsemble",
    "HiddenTrace",
    "HyperParams",
    "KERNEL_BACKEND",
    "RnnModel",
    "Sequence",
    "TracePool",
    "accepting_states",
    "accuracy",
    "augment_position",
    "build_counts",
    "build_fsa",
    "cell_step",
    "classify_vector",
    "cluster_pool",
    "collect_traces",
    "determinize",
    "ensemble_classify",
    "forward",
    "fsa_classify",
    "fsa_from_json",
    "fsa_step",
    "fsa_to_json",
    "gen_task_000",
    "gen_task_0110",
    "grad_check",
    "init_model",
    "kmeanspp_init",
    "label_oracle",
    "lloyd",
    "load_dataset",
    "load_fsa",
    "load_model",
    "loss_and_grads",
    "save_dataset",
    "save_dot",
    "save_fsa",
    "save_model",
    "sigmoid",
    "sweep_k",
    "to_dot",
    "train_model",
]
