"""Normality screening of a corpus of real-data variables.

A JSON manifest lists CSV files, the numeric column to read from each, the
columns to stratify by and an optional transform.  Every stratum becomes one
variable; variables that look like small counts are dropped, the rest get a
Shapiro-Wilk test, and the results are summarised by sample-size bin and
plotted as p-value against n.

Manifest layout::

    {
      "min_n": 3,
      "min_distinct": 10,
      "entries": [
        {"path": "iris.csv", "value_column": "Sepal.Length",
         "group_columns": ["Species"], "transform": "none",
         "include_log_twin": true}
      ]
    }

``path`` is resolved relative to the manifest.  ``transform`` is one of
``none``, ``log`` or ``first_difference``.  Excluding repeated-measures data
is up to whoever writes the manifest.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import randgen
from ._io import atomic_write_text
from .errors import CorpusLoadError, DataError, UsageError
from .stattests import SW_MAX_N, SW_MIN_N, shapiro_wilk

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "inf", "+inf", "-inf", "infinity", "-infinity"})


class Transform(str, enum.Enum):
    NONE = "none"
    LOG = "log"
    FIRST_DIFFERENCE = "first_difference"


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    value_column: str
    group_columns: tuple[str, ...] = ()
    transform: Transform = Transform.NONE
    include_log_twin: bool = False


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...] = ()
    min_n: int = 3
    min_distinct: int = 10


@dataclass(frozen=True)
class Variable:
    variable_id: str
    values: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class CorpusRecord:
    variable_id: str
    n: int
    sw_w: float
    sw_p: float


@dataclass(frozen=True)
class SizeBin:
    label: str
    low: float  # exclusive
    high: float  # inclusive


DEFAULT_BINS = (
    SizeBin("n<=30", -math.inf, 30),
    SizeBin("30<n<=50", 30, 50),
    SizeBin("50<n<=250", 50, 250),
    SizeBin("n>250", 250, math.inf),
)


@dataclass(frozen=True)
class CorpusSummary:
    total_variables: int
    alpha: float
    bin_counts: dict[str, int]
    bin_rejections: dict[str, int]
    reject_proportion_by_bin: dict[str, Optional[float]]
    reject_proportion_n_gt_50: Optional[float]
    count_n_gt_250: int
    count_n_gt_250_passing: int
    skipped: int = 0
    min_distinct: Optional[int] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# -------------------------------------------------------------------- loading

def _read_header(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh), [])


def load_manifest(path: str | Path) -> CorpusManifest:
    """Parse and validate a manifest; every problem names the entry index."""
    path = Path(path)
    if not path.is_file():
        raise CorpusLoadError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorpusLoadError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("entries", []), list):
        raise CorpusLoadError(f"manifest {path}: expected an object with an 'entries' list")
    base = path.parent
    entries = []
    for i, raw in enumerate(doc.get("entries", [])):
        where = f"manifest entry {i}"
        if not isinstance(raw, dict) or "path" not in raw or "value_column" not in raw:
            raise CorpusLoadError(f"{where}: needs 'path' and 'value_column'")
        try:
            transform = Transform(str(raw.get("transform", "none")).lower())
        except ValueError:
            valid = ", ".join(t.value for t in Transform)
            raise CorpusLoadError(f"{where}: unknown transform {raw.get('transform')!r} (valid: {valid})") from None
        csv_path = (base / raw["path"]).resolve()
        if not csv_path.is_file():
            raise CorpusLoadError(f"{where}: file not found: {csv_path}")
        groups = tuple(raw.get("group_columns", []) or [])
        try:
            header = _read_header(csv_path)
        except (OSError, UnicodeDecodeError, csv.Error) as exc:
            raise CorpusLoadError(f"{where}: cannot read {csv_path}: {exc}") from None
        for col in (raw["value_column"], *groups):
            if col not in header:
                raise CorpusLoadError(f"{where}: column {col!r} not in header of {csv_path}")
        entries.append(ManifestEntry(csv_path, raw["value_column"], groups, transform,
                                     bool(raw.get("include_log_twin", False))))
    min_n = int(doc.get("min_n", 3))
    min_distinct = int(doc.get("min_distinct", 10))
    if min_n < 1 or min_distinct < 1:
        raise CorpusLoadError(f"manifest {path}: min_n and min_distinct must be positive")
    return CorpusManifest(tuple(entries), min_n, min_distinct)


# ----------------------------------------------------------------- extraction

def _parse_cell(text: str) -> float:
    token = text.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    return float(token)


def _read_strata(entry: ManifestEntry) -> dict[tuple[str, ...], list[float]]:
    strata: dict[tuple[str, ...], list[float]] = {}
    with open(entry.path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            raw = row.get(entry.value_column)
            try:
                value = _parse_cell(raw if raw is not None else "")
            except ValueError:
                raise DataError(
                    f"{entry.path.name} line {lineno}: non-numeric value {raw!r} in {entry.value_column!r}"
                ) from None
            key = tuple(row.get(g, "") for g in entry.group_columns)
            strata.setdefault(key, []).append(value)
    return strata


def _apply(transform: Transform, values: np.ndarray) -> np.ndarray:
    if transform is Transform.LOG:
        if np.any(values <= 0):
            raise DataError("log transform of non-positive values")
        return np.log(values)
    if transform is Transform.FIRST_DIFFERENCE:
        return np.diff(values)
    return values


def _stratum_label(entry: ManifestEntry, key: tuple[str, ...]) -> str:
    if not entry.group_columns:
        return "all"
    return ",".join(f"{g}={v}" for g, v in zip(entry.group_columns, key))


def extract_variables(manifest: CorpusManifest, issues: list[str] | None = None) -> list[Variable]:
    """Turn manifest entries into variables, in manifest then stratum order.

    Problems that only affect one entry or variable are logged (and appended
    to ``issues`` when given) and the rest of the corpus is still processed.
    """
    def note(msg: str) -> None:
        log.warning(msg)
        if issues is not None:
            issues.append(msg)

    out: list[Variable] = []
    for idx, entry in enumerate(manifest.entries):
        try:
            strata = _read_strata(entry)
        except (OSError, UnicodeDecodeError, csv.Error, DataError) as exc:
            note(f"entry {idx} skipped: {exc}")
            continue
        for key, raw in strata.items():
            base_id = f"{entry.path.name}/{entry.value_column}/{_stratum_label(entry, key)}"
            values = np.asarray(raw, dtype=float)
            finite = np.isfinite(values)
            if not finite.all():
                note(f"{base_id}: dropped {int((~finite).sum())} non-finite values")
                values = values[finite]
            candidates = []
            try:
                primary = _apply(entry.transform, values)
                candidates.append((entry.transform.value, primary))
            except DataError as exc:
                note(f"{base_id}/{entry.transform.value} skipped: {exc}")
                primary = None
            if entry.include_log_twin and primary is not None and entry.transform is not Transform.LOG:
                if primary.size and np.all(primary > 0):
                    tag = "log" if entry.transform is Transform.NONE else f"{entry.transform.value}+log"
                    candidates.append((tag, np.log(primary)))
            for tag, vals in candidates:
                var_id = f"{base_id}/{tag}"
                if vals.size < manifest.min_n:
                    note(f"{var_id} dropped: n = {vals.size} < min_n = {manifest.min_n}")
                    continue
                distinct = np.unique(vals).size
                if distinct < manifest.min_distinct:
                    note(f"{var_id} dropped: {distinct} distinct values < min_distinct = {manifest.min_distinct}")
                    continue
                out.append(Variable(var_id, vals))
    return out


# ------------------------------------------------------------------ screening

def summarize(records: Sequence[CorpusRecord], alpha: float = 0.05,
              bins: Sequence[SizeBin] = DEFAULT_BINS, skipped: int = 0,
              min_distinct: Optional[int] = None) -> CorpusSummary:
    counts = {b.label: 0 for b in bins}
    rejected = {b.label: 0 for b in bins}
    for r in records:
        for b in bins:
            if b.low < r.n <= b.high:
                counts[b.label] += 1
                rejected[b.label] += r.sw_p < alpha
                break
    props = {k: (rejected[k] / counts[k] if counts[k] else None) for k in counts}
    over50 = [r for r in records if r.n > 50]
    over250 = [r for r in records if r.n > 250]
    return CorpusSummary(
        total_variables=len(records),
        alpha=alpha,
        bin_counts=counts,
        bin_rejections=rejected,
        reject_proportion_by_bin=props,
        reject_proportion_n_gt_50=(sum(r.sw_p < alpha for r in over50) / len(over50)) if over50 else None,
        count_n_gt_250=len(over250),
        count_n_gt_250_passing=sum(r.sw_p >= alpha for r in over250),
        skipped=skipped,
        min_distinct=min_distinct,
    )


def screen_corpus(variables: Sequence[Variable], alpha: float = 0.05,
                  bins: Sequence[SizeBin] = DEFAULT_BINS,
                  min_distinct: Optional[int] = None) -> tuple[list[CorpusRecord], CorpusSummary]:
    """Shapiro-Wilk on every variable that the test supports."""
    records = []
    skipped = 0
    for var in variables:
        if not SW_MIN_N <= var.n <= SW_MAX_N:
            log.warning("%s skipped: n = %d outside Shapiro-Wilk range", var.variable_id, var.n)
            skipped += 1
            continue
        try:
            res = shapiro_wilk(var.values)
        except DataError as exc:
            log.warning("%s skipped: %s", var.variable_id, exc)
            skipped += 1
            continue
        records.append(CorpusRecord(var.variable_id, var.n, res.statistic, res.p_value))
    return records, summarize(records, alpha, bins, skipped, min_distinct)


def records_csv(records: Sequence[CorpusRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable_id", "n", "w", "p"])
    for r in records:
        w.writerow([r.variable_id, r.n, repr(r.sw_w), repr(r.sw_p)])
    return buf.getvalue()


def read_records_csv(text: str) -> list[CorpusRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [CorpusRecord(r["variable_id"], int(r["n"]), float(r["w"]), float(r["p"])) for r in rows]


# ------------------------------------------------------------------------ SVG

_W, _H = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 30, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(records: Sequence[CorpusRecord], alpha: float = 0.05) -> str:
    """Scatter of Shapiro-Wilk p-value against sample size (log scale)."""
    if not records:
        raise UsageError("cannot plot an empty set of records")
    logs = [math.log10(r.n) for r in records]
    lo = math.floor(min(logs))
    hi = math.ceil(max(logs))
    if hi == lo:
        hi = lo + 1
    pw = _W - _LEFT - _RIGHT
    ph = _H - _TOP - _BOTTOM

    def sx(n: float) -> float:
        return _LEFT + (math.log10(n) - lo) / (hi - lo) * pw

    def sy(p: float) -> float:
        return _TOP + (1.0 - p) * ph

    x0, x1, y0, y1 = _LEFT, _LEFT + pw, _TOP, _TOP + ph
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">\n',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>\n',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/>'
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>\n',
    ]
    ticks = ['<g class="ticks" stroke="black">']
    labels = ['<g class="tick-labels" fill="black">']
    for e in range(lo, hi + 1):
        x = _fmt(sx(10.0 ** e))
        ticks.append(f'<line x1="{x}" y1="{y1}" x2="{x}" y2="{y1 + 5}"/>')
        labels.append(f'<text x="{x}" y="{y1 + 18}" text-anchor="middle">{10 ** e}</text>')
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _fmt(sy(p))
        ticks.append(f'<line x1="{x0 - 5}" y1="{y}" x2="{x0}" y2="{y}"/>')
        labels.append(f'<text x="{x0 - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{p:g}</text>')
    parts.append("".join(ticks) + "</g>\n")
    parts.append("".join(labels) + "</g>\n")
    parts.append(f'<text class="xlabel" x="{_fmt(x0 + pw / 2)}" y="{_H - 15}" text-anchor="middle">'
                 f'sample size (log scale)</text>\n')
    parts.append(f'<text class="ylabel" x="18" y="{_fmt(y0 + ph / 2)}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_fmt(y0 + ph / 2)})">Shapiro-Wilk p-value</text>\n')
    ya = _fmt(sy(alpha))
    parts.append(f'<line class="ref-line" x1="{x0}" y1="{ya}" x2="{x1}" y2="{ya}" '
                 f'stroke="red" stroke-dasharray="4 3"/>\n')
    parts.append('<g class="points" fill="steelblue" fill-opacity="0.6">\n')
    for r in records:
        parts.append(f'<circle class="point" cx="{_fmt(sx(r.n))}" cy="{_fmt(sy(r.sw_p))}" r="3">'
                     f'<title>{_xml_escape(r.variable_id)} (n={r.n}, p={r.sw_p:.3g})</title></circle>\n')
    parts.append("</g>\n</svg>\n")
    return "".join(parts)


def _xml_escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def scatter_svg(records: Sequence[CorpusRecord], path: str | Path, alpha: float = 0.05) -> None:
    atomic_write_text(path, render_svg(records, alpha))


# ------------------------------------------------------------ synthetic data

SYNTHETIC_SIZES = (10, 25, 50, 100, 250, 1000)


def synthetic_variables(sizes: Sequence[int] = SYNTHETIC_SIZES, per_size: int = 50,
                        seed: int = 2024, spec: randgen.DistributionSpec | None = None) -> list[Variable]:
    """Gamma(2, 1) variables (by default), ``per_size`` at each sample size."""
    spec = spec or randgen.CANONICAL["gamma"]
    out = []
    for n in sizes:
        for i in range(per_size):
            rng = randgen.rng_new(seed, (n << 32) | i)
            out.append(Variable(f"synthetic/{spec.name}/n{n}/{i:03d}", randgen.sample(spec, n, rng)))
    return out


def write_synthetic_corpus(directory: str | Path, sizes: Sequence[int] = SYNTHETIC_SIZES,
                           per_size: int = 50, seed: int = 2024) -> Path:
    """Write the synthetic corpus as one CSV plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "value"])
    for var in synthetic_variables(sizes, per_size, seed):
        label = var.variable_id.split("/", 2)[2].replace("/", "_")
        for v in var.values:
            w.writerow([label, repr(float(v))])
    atomic_write_text(directory / "synthetic.csv", buf.getvalue())
    manifest = {
        "min_n": 3,
        "min_distinct": 10,
        "entries": [{"path": "synthetic.csv", "value_column": "value",
                     "group_columns": ["variable"], "transform": "none", "include_log_twin": False}],
    }
    mpath = directory / "manifest.json"
    atomic_write_text(mpath, json.dumps(manifest, indent=2) + "\n")
    return mpath
