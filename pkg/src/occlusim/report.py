"""Accuracy aggregations over external model prediction dumps.

Score ties are broken by label, lexicographically, so rankings are
reproducible.
"""
import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyInput, MisalignedClips, UnknownLabel, UnmappedLabel


@dataclass(frozen=True)
class PredictionRecord:
    clip_id: str
    true_label: str
    scores: dict = None  # label -> score
    ranking: tuple = None  # labels, best first

    def __post_init__(self):
        if (self.scores is None) == (self.ranking is None):
            raise ValueError("give exactly one of scores or ranking")
        if self.ranking is not None:
            object.__setattr__(self, "ranking", tuple(self.ranking))

    def ranked_labels(self):
        if self.ranking is not None:
            return self.ranking
        return tuple(sorted(self.scores, key=lambda lab: (-self.scores[lab], lab)))

    def labels(self):
        return set(self.ranking) if self.ranking is not None else set(self.scores)

    def hit(self, k):
        return self.true_label in self.ranked_labels()[:k]


def load_predictions(path):
    """JSON lines: ``{clip_id, true_label, scores: {label: score}}`` or with ``ranking: [...]``."""
    records = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            d = json.loads(line)
            try:
                records.append(
                    PredictionRecord(
                        str(d["clip_id"]),
                        str(d["true_label"]),
                        scores={str(k): float(v) for k, v in d["scores"].items()} if "scores" in d else None,
                        ranking=d.get("ranking"),
                    )
                )
            except (KeyError, ValueError, AttributeError) as exc:
                raise ValueError(f"{path}:{n}: bad prediction record ({exc})") from None
    return records


def _check(records, k, label_set=None):
    if k < 1:
        raise ValueError("k must be >= 1")
    if not records:
        raise EmptyInput("no prediction records")
    if label_set is None:
        label_set = set().union(*(r.labels() for r in records))
    unknown = {r.true_label for r in records} - set(label_set)
    for r in records:
        unknown |= r.labels() - set(label_set)
    if unknown:
        raise UnknownLabel(f"labels outside the label set: {sorted(unknown)[:10]}")


def top_k_accuracy(records, k=1, label_set=None):
    records = list(records)
    _check(records, k, label_set)
    return sum(r.hit(k) for r in records) / len(records)


@dataclass
class BinRow:
    lo: float
    hi: float
    n: int
    baseline_accuracy: float = None
    occluded_accuracy: float = None
    drop: float = None

    @property
    def empty(self):
        return self.n == 0


def _bin_index(value, edges):
    """Bin i covers [edges[i], edges[i+1]); the last bin also takes its upper edge."""
    last = len(edges) - 2
    for i in range(last + 1):
        if edges[i] <= value < edges[i + 1] or (i == last and value == edges[-1]):
            return i
    return None


def accuracy_drop_by_factor(baseline, occluded, factor, bins, k=1):
    """Per-bin baseline accuracy, occluded accuracy and their difference.

    ``factor`` maps clip id to an occlusion factor (area ratio, duration ...).
    Empty bins are reported with n=0 and no accuracies. Clips whose factor
    falls outside every bin are ignored.
    """
    edges = [float(e) for e in bins]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bins must be at least two strictly increasing edges")
    base = {r.clip_id: r for r in baseline}
    occ = {r.clip_id: r for r in occluded}
    if set(base) != set(occ) or set(base) != set(factor):
        raise MisalignedClips(
            f"clip ids differ: baseline={len(base)} occluded={len(occ)} factor={len(factor)}, "
            f"e.g. {sorted(set(base) ^ set(occ) ^ set(factor))[:5]}"
        )
    if not base:
        raise EmptyInput("no clips")
    counts = [[0, 0, 0] for _ in range(len(edges) - 1)]  # n, baseline hits, occluded hits
    for clip_id in sorted(base):
        i = _bin_index(float(factor[clip_id]), edges)
        if i is None:
            continue
        counts[i][0] += 1
        counts[i][1] += base[clip_id].hit(k)
        counts[i][2] += occ[clip_id].hit(k)
    rows = []
    for i, (n, b, o) in enumerate(counts):
        row = BinRow(edges[i], edges[i + 1], n)
        if n:
            row.baseline_accuracy = b / n
            row.occluded_accuracy = o / n
            row.drop = row.baseline_accuracy - row.occluded_accuracy
        rows.append(row)
    return rows


def load_parent_map(path=None):
    """class -> tuple of parents, from a ``class,parent`` CSV.

    Without ``path`` the bundled Kinetics-400 hierarchy is used. A class may
    appear under several parents.
    """
    if path is None:
        text = resources.files("occlusim").joinpath("data/kinetics400_parents.csv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    mapping = defaultdict(list)
    for row in csv.DictReader(io.StringIO(text)):
        if row["parent"] not in mapping[row["class"]]:
            mapping[row["class"]].append(row["parent"])
    return {k: tuple(v) for k, v in mapping.items()}


@dataclass
class ParentRow:
    parent: str
    n: int
    correct: int
    accuracy: float


def parent_class_aggregate(records, parent_map, k=1, multi="all"):
    """Top-k accuracy per parent class, sorted by accuracy (descending) then name.

    ``multi="all"`` counts a clip under every parent of its class;
    ``multi="first"`` only under the first listed one, which makes the
    groups a partition of the records.
    """
    records = list(records)
    if not records:
        raise EmptyInput("no prediction records")
    if multi not in ("all", "first"):
        raise ValueError("multi must be 'all' or 'first'")
    unmapped = {r.true_label for r in records if not parent_map.get(r.true_label)}
    if unmapped:
        raise UnmappedLabel(unmapped)
    groups = defaultdict(lambda: [0, 0])
    for r in records:
        parents = parent_map[r.true_label]
        if isinstance(parents, str):
            parents = (parents,)
        for parent in parents if multi == "all" else parents[:1]:
            groups[parent][0] += 1
            groups[parent][1] += r.hit(k)
    rows = [ParentRow(p, n, c, c / n) for p, (n, c) in groups.items()]
    rows.sort(key=lambda row: (-row.accuracy, row.parent))
    return rows


def per_class_accuracy(records, k=1):
    hits = defaultdict(lambda: [0, 0])
    for r in records:
        hits[r.true_label][0] += 1
        hits[r.true_label][1] += r.hit(k)
    return {label: c / n for label, (n, c) in hits.items()}


def per_class_accuracy_drop(baselines, occludeds, k=1, order="diff_then_mean"):
    """Per-class accuracy drop averaged over models.

    ``baselines`` / ``occludeds`` map model name -> records. With
    ``diff_then_mean`` each model's drop is computed first and then averaged
    over the models that scored that class on both sides; ``mean_then_diff``
    averages each side's accuracy over models first. The two agree when
    every model covers every class.
    """
    if set(baselines) != set(occludeds):
        raise MisalignedClips("baseline and occluded dumps cover different models")
    if order not in ("diff_then_mean", "mean_then_diff"):
        raise ValueError("order must be 'diff_then_mean' or 'mean_then_diff'")
    base = {m: per_class_accuracy(r, k) for m, r in baselines.items()}
    occ = {m: per_class_accuracy(r, k) for m, r in occludeds.items()}
    classes = sorted(set().union(*base.values(), *occ.values()))
    out = {}
    for cls in classes:
        if order == "diff_then_mean":
            diffs = [base[m][cls] - occ[m][cls] for m in base if cls in base[m] and cls in occ[m]]
            if diffs:
                out[cls] = sum(diffs) / len(diffs)
        else:
            b = [base[m][cls] for m in base if cls in base[m]]
            o = [occ[m][cls] for m in occ if cls in occ[m]]
            if b and o:
                out[cls] = sum(b) / len(b) - sum(o) / len(o)
    return out


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        values = row if isinstance(row, dict) else row.__dict__
        writer.writerow(["" if values.get(c) is None else values.get(c) for c in columns])
    return buf.getvalue()
