# SPDX-License-Identifier: Apache-2.0
"""Retrieval-conditioned intent inference toolkit."""

from ._core import (
    BackendError,
    ConfigError,
    DataError,
    HistoryLibrary,
    IntentkitError,
    InvalidArgument,
    Taxonomy,
    __version__,
    canonical_form,
    cosine,
    embed,
    gen_gap_vis,
    group_advantages,
    grpo_surrogate,
    metrics,
    parse_output,
    tool_reward,
    total_reward,
    train_policy,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "DataError",
    "HistoryLibrary",
    "IntentkitError",
    "InvalidArgument",
    "Taxonomy",
    "__version__",
    "canonical_form",
    "cosine",
    "embed",
    "gen_gap_vis",
    "group_advantages",
    "grpo_surrogate",
    "metrics",
    "parse_output",
    "tool_reward",
    "total_reward",
    "train_policy",
]
