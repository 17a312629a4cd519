# Copyright 2026 The Taxon Authors
# SPDX-License-Identifier: Apache-2.0
"""Hierarchical taxonomic classification toolkit."""

from ._core import (
    ParsedResponse,
    Taxonomy,
    TaxonError,
    __version__,
    advantages,
    extract_choice,
    format_reward,
    parse_tagged,
    report,
    serialize_tagged,
    train_toy,
)

__all__ = [
    "ParsedResponse",
    "Taxonomy",
    "TaxonError",
    "__version__",
    "advantages",
    "extract_choice",
    "format_reward",
    "parse_tagged",
    "report",
    "serialize_tagged",
    "train_toy",
]
