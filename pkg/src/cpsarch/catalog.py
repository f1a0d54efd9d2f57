"""Block-type catalog: eight functional categories plus a relevant/irrelevant split.

A block type is *relevant* exactly when the catalog maps it to a category.
Lookups are exact and case-sensitive; anything not listed (sinks, signal
routing and attribute blocks, unknown vendor blocks) is irrelevant.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import DuplicateEntry, ParseError, UnknownCategory

CATALOG_ENV = "CPSARCH_CATALOG"


class BlockCategory(enum.Enum):
    C1 = "Continuous"
    C2 = "Discontinuities"
    C3 = "Discrete"
    C4 = "Logic and Bit Operations"
    C5 = "Math Operations"
    C6 = "Ports & Subsystems"
    C7 = "Sources"
    C8 = "User-Defined Functions"

    @property
    def id(self) -> str:
        return self.name


class RelevanceClass(enum.Enum):
    RELEVANT = "Relevant"
    IRRELEVANT = "Irrelevant"


CATEGORY_IDS = tuple(c.id for c in BlockCategory)


@dataclass(frozen=True)
class CatalogTable:
    entries: Mapping[str, BlockCategory]

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, block_type):
        return block_type in self.entries


def categorize(block_type: str, table: CatalogTable) -> BlockCategory | None:
    return table.entries.get(block_type)


def relevance(block_type: str, table: CatalogTable) -> RelevanceClass:
    if categorize(block_type, table) is None:
        return RelevanceClass.IRRELEVANT
    return RelevanceClass.RELEVANT


def is_relevant(block_type: str, table: CatalogTable) -> bool:
    return block_type in table.entries


def _no_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise DuplicateEntry(f"block type {key!r} listed more than once")
        out[key] = value
    return out


def load_catalog(data: bytes | str) -> CatalogTable:
    """Parse a JSON object mapping block type to category id (``"C1"``..``"C8"``)."""
    try:
        raw = json.loads(data, object_pairs_hook=_no_duplicates)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"malformed catalog JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("catalog must be a JSON object")
    entries = {}
    for block_type, cat_id in raw.items():
        if not isinstance(cat_id, str) or cat_id not in CATEGORY_IDS:
            raise UnknownCategory(f"{block_type!r} maps to unknown category {cat_id!r}")
        entries[block_type] = BlockCategory[cat_id]
    return CatalogTable(entries)


def default_catalog_bytes() -> bytes:
    return resources.files("cpsarch").joinpath("data/catalog.json").read_bytes()


def default_catalog() -> CatalogTable:
    return load_catalog(default_catalog_bytes())


def resolve_catalog(path: str | os.PathLike | None = None) -> CatalogTable:
    """Explicit path, then ``$CPSARCH_CATALOG``, then the shipped default."""
    path = path or os.environ.get(CATALOG_ENV)
    if path:
        return load_catalog(Path(path).read_bytes())
    return default_catalog()
