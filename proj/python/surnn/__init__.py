"""Python access to the su-RNNLM library: vocabularies, n-gram and recurrent
models, lattice rescoring and scoring utilities."""

from ._surnn import (
    ArpaModel,
    Hypothesis,
    Lattice,
    Model,
    Rescorer,
    Vocabulary,
    example_lattice,
    load_arpa,
    load_model,
    load_slf,
    make_fixtures,
    smooth,
    train_kn,
    train_model,
    two_stage,
    wer,
)

__all__ = [
    "ArpaModel",
    "Hypothesis",
    "Lattice",
    "Model",
    "Rescorer",
    "Vocabulary",
    "example_lattice",
    "load_arpa",
    "load_model",
    "load_slf",
    "make_fixtures",
    "smooth",
    "train_kn",
    "train_model",
    "two_stage",
    "wer",
]
