"""Block count, connection count, hierarchical depth, and AI-vs-traditional differences.

Corpus aggregation works on exact rationals (:class:`fractions.Fraction`);
rounding happens only when values are rendered.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .catalog import CATEGORY_IDS, CatalogTable, categorize, is_relevant
from .errors import EmptyCorpus
from .model import Model, subsystem_tree

INPORT = "Inport"
OUTPORT = "Outport"

# Column order and headers of corpus tables.
METRIC_COLUMNS = ("Total BC", "Relevant BC", "Total CC", "Relevant CC", "HD")
_FIELDS = ("total_bc", "relevant_bc", "total_cc", "relevant_cc", "hd")


class Scope(enum.Enum):
    TOTAL = "total"
    RELEVANT = "relevant"


@dataclass(frozen=True)
class MetricsReport:
    total_bc: int
    relevant_bc: int
    total_cc: int
    relevant_cc: int
    hd: int
    per_category_bc: dict[str, int] = field(default_factory=lambda: dict.fromkeys(CATEGORY_IDS, 0))
    inport_count: int = 0
    outport_count: int = 0

    def metric(self, column: str):
        return getattr(self, _FIELDS[METRIC_COLUMNS.index(column)])

    def to_dict(self) -> dict:
        out = {col: self.metric(col) for col in METRIC_COLUMNS}
        out["per_category_bc"] = dict(self.per_category_bc)
        out["inport_count"] = self.inport_count
        out["outport_count"] = self.outport_count
        return out

    @classmethod
    def from_values(cls, values: Mapping[str, int]) -> "MetricsReport":
        """Build a report from the five metric columns only (per-category left empty)."""
        missing = [c for c in METRIC_COLUMNS if c not in values]
        if missing:
            raise KeyError(f"missing metric column(s): {', '.join(missing)}")
        return cls(**{f: values[c] for f, c in zip(_FIELDS, METRIC_COLUMNS)})


def block_count(model: Model, table: CatalogTable, scope: Scope = Scope.TOTAL) -> int:
    if scope is Scope.TOTAL:
        return len(model.blocks)
    return sum(1 for b in model.blocks if is_relevant(b.block_type, table))


def connection_count(model: Model, table: CatalogTable, scope: Scope = Scope.TOTAL) -> int:
    if scope is Scope.TOTAL:
        return len(model.connections)
    types = {b.id: b.block_type for b in model.blocks}
    return sum(
        1
        for c in model.connections
        if is_relevant(types[c.src_block], table) or is_relevant(types[c.dst_block], table)
    )


def hierarchical_depth(model: Model) -> int:
    return max(node.depth for node in subsystem_tree(model).walk())


def category_histogram(model: Model, table: CatalogTable) -> dict[str, int]:
    hist = dict.fromkeys(CATEGORY_IDS, 0)
    for b in model.blocks:
        cat = categorize(b.block_type, table)
        if cat is not None:
            hist[cat.id] += 1
    return hist


def analyze(model: Model, table: CatalogTable) -> MetricsReport:
    types = Counter(b.block_type for b in model.blocks)
    return MetricsReport(
        total_bc=block_count(model, table, Scope.TOTAL),
        relevant_bc=block_count(model, table, Scope.RELEVANT),
        total_cc=connection_count(model, table, Scope.TOTAL),
        relevant_cc=connection_count(model, table, Scope.RELEVANT),
        hd=hierarchical_depth(model),
        per_category_bc=category_histogram(model, table),
        inport_count=types[INPORT],
        outport_count=types[OUTPORT],
    )


@dataclass(frozen=True)
class DifferenceReport:
    """Per-type and per-category occurrence differences, AI minus traditional."""

    per_block_type: dict[str, int]
    per_category: dict[str, int]

    def __neg__(self):
        return DifferenceReport(
            {k: -v for k, v in self.per_block_type.items()},
            {k: -v for k, v in self.per_category.items()},
        )

    def to_dict(self) -> dict:
        return {
            "per_block_type": dict(sorted(self.per_block_type.items())),
            "per_category": dict(self.per_category),
        }


def difference(ai_model: Model, trad_model: Model, table: CatalogTable) -> DifferenceReport:
    ai = Counter(b.block_type for b in ai_model.blocks if is_relevant(b.block_type, table))
    trad = Counter(b.block_type for b in trad_model.blocks if is_relevant(b.block_type, table))
    per_type = {t: ai[t] - trad[t] for t in sorted(set(ai) | set(trad))}
    per_cat = dict.fromkeys(CATEGORY_IDS, 0)
    for t, d in per_type.items():
        per_cat[categorize(t, table).id] += d
    return DifferenceReport(per_type, per_cat)


# --- corpus aggregation -------------------------------------------------


def round_half_up(value: Fraction, places: int) -> Fraction:
    """Round to ``places`` decimals, ties away from zero."""
    scale = 10**places
    scaled = abs(value) * scale
    q = int(scaled)
    if scaled - q >= Fraction(1, 2):
        q += 1
    return Fraction(q if value >= 0 else -q, scale)


def format_fraction(value: Fraction | None, places: int) -> str:
    if value is None:
        return ""
    r = round_half_up(value, places)
    text = f"{float(r):.{places}f}"
    # strip trailing zeros: 288.75 and 306, not 288.750 and 306.000
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def pct_diff(trad: Fraction, ai: Fraction) -> Fraction | None:
    if trad == 0:
        return None
    return (ai - trad) / trad * 100


@dataclass(frozen=True)
class CorpusAggregate:
    per_system: dict[str, tuple[MetricsReport, MetricsReport]]
    avg_traditional: dict[str, Fraction]
    avg_ai: dict[str, Fraction]
    pct_diff_of_averages: dict[str, Fraction | None]
    mean_of_pct_diffs: dict[str, Fraction | None]

    # Two readings of "% Diff" are plausible and they disagree; emit both.
    note: str = (
        "'% Diff' is reported two ways: ratio of averages ((AI avg - T avg) / T avg) and "
        "mean of per-system ratios."
    )


def aggregate_corpus(rows: Iterable[tuple[str, MetricsReport, MetricsReport]]) -> CorpusAggregate:
    rows = sorted(rows, key=lambda r: r[0])
    if not rows:
        raise EmptyCorpus("corpus has no systems")
    n = len(rows)
    avg_t, avg_ai, ratio, mean_pct = {}, {}, {}, {}
    for col in METRIC_COLUMNS:
        t_vals = [Fraction(t.metric(col)) for _, t, _ in rows]
        a_vals = [Fraction(a.metric(col)) for _, _, a in rows]
        avg_t[col] = sum(t_vals) / n
        avg_ai[col] = sum(a_vals) / n
        ratio[col] = pct_diff(avg_t[col], avg_ai[col])
        per = [pct_diff(t, a) for t, a in zip(t_vals, a_vals)]
        mean_pct[col] = None if any(p is None for p in per) else sum(per) / n
    return CorpusAggregate(
        per_system={sid: (t, a) for sid, t, a in rows},
        avg_traditional=avg_t,
        avg_ai=avg_ai,
        pct_diff_of_averages=ratio,
        mean_of_pct_diffs=mean_pct,
    )


def _signed(value: Fraction | None) -> str:
    text = format_fraction(value, 1)
    if value is not None and round_half_up(value, 1) > 0:
        text = "+" + text
    return text


def corpus_rows(agg: CorpusAggregate) -> list[list[str]]:
    """Corpus table rows: header, per-system T/AI, averages, both % Diff variants."""
    rows = [["System", "Model", *METRIC_COLUMNS]]
    for sid, (t, a) in agg.per_system.items():
        rows.append([sid, "T", *(str(t.metric(c)) for c in METRIC_COLUMNS)])
        rows.append([sid, "AI", *(str(a.metric(c)) for c in METRIC_COLUMNS)])
    rows.append(["Average", "T", *(format_fraction(agg.avg_traditional[c], 2) for c in METRIC_COLUMNS)])
    rows.append(["Average", "AI", *(format_fraction(agg.avg_ai[c], 2) for c in METRIC_COLUMNS)])
    rows.append(["% Diff (ratio of averages)", "-", *(_signed(agg.pct_diff_of_averages[c]) for c in METRIC_COLUMNS)])
    rows.append(["% Diff (mean of per-system)", "-", *(_signed(agg.mean_of_pct_diffs[c]) for c in METRIC_COLUMNS)])
    return rows


def _write_csv(rows: Sequence[Sequence]) -> bytes:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue().encode("utf-8")


def _frac_json(value: Fraction | None):
    if value is None:
        return None
    return {"num": value.numerator, "den": value.denominator, "value": float(value)}


def corpus_to_json(agg: CorpusAggregate) -> bytes:
    doc = {
        "systems": {
            sid: {"traditional": t.to_dict(), "ai": a.to_dict()} for sid, (t, a) in agg.per_system.items()
        },
        "average": {
            "traditional": {c: _frac_json(agg.avg_traditional[c]) for c in METRIC_COLUMNS},
            "ai": {c: _frac_json(agg.avg_ai[c]) for c in METRIC_COLUMNS},
        },
        "pct_diff_of_averages": {c: _frac_json(agg.pct_diff_of_averages[c]) for c in METRIC_COLUMNS},
        "mean_of_pct_diffs": {c: _frac_json(agg.mean_of_pct_diffs[c]) for c in METRIC_COLUMNS},
        "note": agg.note,
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def corpus_to_csv(agg: CorpusAggregate) -> bytes:
    return _write_csv(corpus_rows(agg))


def report_to_json(report: MetricsReport) -> bytes:
    return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")


def report_to_csv(report: MetricsReport) -> bytes:
    header = [*METRIC_COLUMNS, *CATEGORY_IDS, "Inports", "Outports"]
    row = [
        *(report.metric(c) for c in METRIC_COLUMNS),
        *(report.per_category_bc.get(c, 0) for c in CATEGORY_IDS),
        report.inport_count,
        report.outport_count,
    ]
    return _write_csv([header, row])


def difference_to_json(diff: DifferenceReport) -> bytes:
    return (json.dumps(diff.to_dict(), indent=2) + "\n").encode("utf-8")


def difference_to_csv(diff: DifferenceReport) -> bytes:
    rows = [["kind", "key", "Difference"]]
    rows += [["block_type", t, d] for t, d in sorted(diff.per_block_type.items())]
    rows += [["category", c, d] for c, d in diff.per_category.items()]
    return _write_csv(rows)
