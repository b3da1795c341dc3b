"""Class-mapping statistics and exports.

Tallies how source classes map to destination classes across a record
set (true -> original, original -> adversarial, ...), measures how often
the adversarial class coincides with the 2nd..5th most likely class of
the original prediction, and renders the mapping as a weighted bipartite
DOT graph or a flat CSV.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, UsageError

KIND_TRUE = "true"
KIND_ORIGINAL = "original"
KIND_ADVERSARIAL = "adversarial"
KINDS = (KIND_TRUE, KIND_ORIGINAL, KIND_ADVERSARIAL)

_FIELD_FOR_KIND = {
    KIND_TRUE: "true_class",
    KIND_ORIGINAL: "original_class",
    KIND_ADVERSARIAL: "adversarial_class",
}

# DOT styling: edge pen width and opacity scale linearly with the edge's
# share of its destination column.
_MAX_PENWIDTH = 4.0

RANKS_TRACKED = (2, 3, 4, 5)


@dataclass
class MappingTable:
    """counts[i, j] = number of records mapping source class i to dest class j."""

    n_classes: int
    counts: np.ndarray
    source_kind: str
    dest_kind: str

    def __eq__(self, other):
        if not isinstance(other, MappingTable):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and np.array_equal(self.counts, other.counts)
            and self.source_kind == other.source_kind
            and self.dest_kind == other.dest_kind
        )


@dataclass
class RankMatchStats:
    """Share of adversarial classes landing on each original-prediction rank.

    ``rates[r]`` is the fraction of records whose adversarial class is the
    r-th most likely class of the original probabilities (rank 1 being the
    original class itself); ``any_2_to_5`` is their sum since the rank
    events are disjoint.
    """

    rates: dict = field(default_factory=dict)
    any_2_to_5: float = 0.0

    def to_csv(self) -> str:
        lines = ["rank,rate"]
        for r in RANKS_TRACKED:
            lines.append(f"{r},{self.rates[r]:.6f}")
        lines.append(f"any_2_to_5,{self.any_2_to_5:.6f}")
        return "\n".join(lines) + "\n"


def build_mapping(records, source: str, dest: str, n_classes: int | None = None) -> MappingTable:
    """Exact tally of source-class to dest-class transitions."""
    if source not in KINDS or dest not in KINDS:
        raise UsageError(f"mapping kinds must be one of {KINDS}")
    records = list(records)
    if n_classes is None:
        if not records:
            raise UsageError("cannot infer class count from an empty record list")
        n_classes = records[0].original_probs.shape[0]
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    src_field, dst_field = _FIELD_FOR_KIND[source], _FIELD_FOR_KIND[dest]
    for r in records:
        counts[getattr(r, src_field), getattr(r, dst_field)] += 1
    return MappingTable(n_classes=n_classes, counts=counts, source_kind=source, dest_kind=dest)


def rank_match_rates(records) -> RankMatchStats:
    """Rank of the adversarial class within each original prediction.

    Ranks are 1-based positions in the descending sort of the original
    probabilities, ties to the lowest class index (the same rule predict
    uses, so rank 1 is always the original class).
    """
    records = list(records)
    if not records:
        raise UsageError("rank statistics need at least one record")
    hits = {r: 0 for r in RANKS_TRACKED}
    for rec in records:
        order = np.argsort(-rec.original_probs, kind="stable")
        rank = int(np.nonzero(order == rec.adversarial_class)[0][0]) + 1
        if rank in hits:
            hits[rank] += 1
    n = len(records)
    rates = {r: hits[r] / n for r in RANKS_TRACKED}
    return RankMatchStats(rates=rates, any_2_to_5=sum(rates.values()))


def export_dot(table: MappingTable, min_fraction: float = 0.01) -> str:
    """Bipartite DOT graph: source classes left, destination classes right.

    Edge pen width and opacity are proportional to the edge's fraction of
    its destination column total; edges below ``min_fraction`` are
    dropped. Output is deterministic (edges sorted by (source, dest)).
    """
    if not 0.0 <= min_fraction < 1.0:
        raise UsageError("min_fraction must lie in [0, 1)")
    d = table.n_classes
    col_totals = table.counts.sum(axis=0)
    lines = [
        "digraph mapping {",
        "  rankdir=LR;",
        "  node [shape=circle, fontsize=10];",
        f'  label="{table.source_kind} -> {table.dest_kind}";',
    ]
    for i in range(d):
        lines.append(f'  src{i} [label="{i}", group=src];')
    for j in range(d):
        lines.append(f'  dst{j} [label="{j}", group=dst];')
    for i in range(d):
        for j in range(d):
            total = col_totals[j]
            if total == 0:
                continue
            frac = table.counts[i, j] / total
            if table.counts[i, j] == 0 or frac < min_fraction:
                continue
            alpha = max(1, round(255 * frac))
            lines.append(
                f'  src{i} -> dst{j} [penwidth={_MAX_PENWIDTH * frac:.3f}, '
                f'color="#000000{alpha:02x}"];'
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_csv(table: MappingTable) -> str:
    """Flat dump: header plus one row per (source, dest) cell, zeros included."""
    lines = ["source,dest,count"]
    for i in range(table.n_classes):
        for j in range(table.n_classes):
            lines.append(f"{i},{j},{table.counts[i, j]}")
    return "\n".join(lines) + "\n"


def parse_csv(text: str, source_kind: str = KIND_ORIGINAL,
              dest_kind: str = KIND_ADVERSARIAL) -> MappingTable:
    """Inverse of export_csv. The kinds are not stored in the CSV itself."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "source,dest,count":
        raise FormatError("mapping CSV must start with header 'source,dest,count'")
    n_cells = len(lines) - 1
    d = int(round(n_cells ** 0.5))
    if d * d != n_cells:
        raise FormatError(f"mapping CSV has {n_cells} rows, expected a square class count")
    counts = np.zeros((d, d), dtype=np.int64)
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            i, j, c = (int(part) for part in ln.split(","))
            counts[i, j] = c
        except (ValueError, IndexError) as exc:
            raise FormatError(f"mapping CSV line {lineno}: {exc}") from exc
    return MappingTable(n_classes=d, counts=counts, source_kind=source_kind, dest_kind=dest_kind)
