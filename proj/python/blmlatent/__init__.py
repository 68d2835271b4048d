"""Latent-layer analysis of BLM sentence embeddings."""

from ._core import (
    BlmError,
    cohens_kappa,
    gumbel_softmax_sample,
    kl_categorical_uniform,
    kl_gaussian,
    max_margin_loss,
    parse_latent_spec,
    read_store,
    run_cli,
    score,
    split_sizes,
    synth,
    train,
    write_store,
)

__all__ = [
    "BlmError",
    "cohens_kappa",
    "gumbel_softmax_sample",
    "kl_categorical_uniform",
    "kl_gaussian",
    "max_margin_loss",
    "parse_latent_spec",
    "read_store",
    "run_cli",
    "score",
    "split_sizes",
    "synth",
    "train",
    "write_store",
]
