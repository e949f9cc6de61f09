"""Monte Carlo engine for type-I error and power of the T, W and C tests.

Replicate ``r`` of cell ``c`` draws from its own stream
``mix64((c << 32) | r)`` under the master seed, laid out as
``[x_null, y_null, x_alt, y_alt]``.  Replicates are evaluated in vectorized
chunks; chunk results are integer counts, so the tally is the same for any
chunking or worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import randgen
from .errors import UsageError
from .randgen import DistributionSpec, Family
from .stattests import shapiro_rows, ttest_rows, wilcoxon_rows

DEFAULT_SIZES = (5, 10, 25, 50, 100)
DEFAULT_REPS = 20_000
CHUNK = 2_000
TESTS = ("t", "w", "c")


@dataclass(frozen=True)
class SimConfig:
    distributions: tuple[DistributionSpec, ...] = tuple(randgen.CANONICAL.values())
    sizes_per_group: tuple[int, ...] = DEFAULT_SIZES
    replications: int = DEFAULT_REPS
    shift_in_sd: float = 0.5
    alpha: float = 0.05
    normality_alpha: float = 0.05
    master_seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "distributions", tuple(self.distributions))
        object.__setattr__(self, "sizes_per_group", tuple(int(n) for n in self.sizes_per_group))
        if self.replications < 1:
            raise UsageError(f"replications must be >= 1, got {self.replications}")
        if any(n < 2 for n in self.sizes_per_group):
            raise UsageError("every sample size must be >= 2")
        for name in ("alpha", "normality_alpha"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise UsageError(f"{name} must lie in (0, 1), got {v}")
        if not math.isfinite(self.shift_in_sd):
            raise UsageError("shift must be finite")

    def to_dict(self) -> dict:
        return {
            "distributions": [d.name for d in self.distributions],
            "sizes_per_group": list(self.sizes_per_group),
            "replications": self.replications,
            "shift_in_sd": self.shift_in_sd,
            "alpha": self.alpha,
            "normality_alpha": self.normality_alpha,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class SimCell:
    dist: str
    n: int
    reps: int
    sw_reject: int
    sw_reject_alt: int
    type1: dict[str, int]
    power: dict[str, int]

    def rate(self, count: int) -> float:
        return count / self.reps

    @property
    def sw_reject_rate(self) -> float:
        return self.rate(self.sw_reject)

    @property
    def sw_reject_rate_alt(self) -> float:
        return self.rate(self.sw_reject_alt)

    @property
    def type1_rate(self) -> dict[str, float]:
        return {k: self.rate(v) for k, v in self.type1.items()}

    @property
    def power_rate(self) -> dict[str, float]:
        return {k: self.rate(v) for k, v in self.power.items()}

    def se(self, rate: float) -> float:
        """Monte Carlo standard error of a rejection rate."""
        return math.sqrt(rate * (1.0 - rate) / self.reps)

    def rates(self) -> dict[str, float]:
        """The seven Table-style rates in column order."""
        out = {"sw_reject_rate": self.sw_reject_rate}
        out.update({f"type1_{k}": v for k, v in self.type1_rate.items()})
        out.update({f"power_{k}": v for k, v in self.power_rate.items()})
        return out


@dataclass
class SimulationReport:
    config: SimConfig
    cells: list[SimCell]
    # not rendered, so that output stays byte-reproducible
    elapsed_seconds: float = field(default=0.0, compare=False)


def cell_index(spec: DistributionSpec, n: int) -> int:
    """Grid-independent cell id, so a cell gets the same streams whatever
    else is in the run."""
    return list(Family).index(spec.family) << 20 | n


def replicate_streams(cell: int, start: int, stop: int) -> np.ndarray:
    r = np.arange(start, stop, dtype=np.uint64)
    return randgen.mix64((np.uint64(cell) << np.uint64(32)) | r)


def simulate_replicates(spec: DistributionSpec, n: int, config: SimConfig, cell: int,
                        start: int, stop: int) -> dict[str, np.ndarray]:
    """Per-replicate p-values and decisions for replicates ``start..stop-1``."""
    k = randgen.uniforms_needed(spec, n)
    u = randgen.uniform_matrix(config.master_seed, replicate_streams(cell, start, stop), 4 * k)
    x0, y0, x1, y1 = (randgen.transform(spec, u[:, i * k:(i + 1) * k], n) for i in range(4))
    y1 = y1 + randgen.standardized_shift(spec, config.shift_in_sd)

    out: dict[str, np.ndarray] = {}
    for tag, x, y in (("null", x0, y0), ("alt", x1, y1)):
        _, _, p_t = ttest_rows(x, y)
        _, p_w, _ = wilcoxon_rows(x, y)
        resid = np.concatenate([x - x.mean(axis=1, keepdims=True), y - y.mean(axis=1, keepdims=True)], axis=1)
        _, p_sw = shapiro_rows(resid)
        gate = p_sw < config.normality_alpha
        out[f"{tag}_p_t"] = p_t
        out[f"{tag}_p_w"] = p_w
        out[f"{tag}_p_sw"] = p_sw
        out[f"{tag}_p_c"] = np.where(gate, p_w, p_t)
        out[f"{tag}_sw_reject"] = gate
        for test in TESTS:
            out[f"{tag}_reject_{test}"] = out[f"{tag}_p_{test}"] < config.alpha
    return out


def _chunk_counts(args) -> dict[str, int]:
    spec, n, config, cell, start, stop = args
    reps = simulate_replicates(spec, n, config, cell, start, stop)
    counts = {"sw_null": int(reps["null_sw_reject"].sum()), "sw_alt": int(reps["alt_sw_reject"].sum())}
    for tag in ("null", "alt"):
        for test in TESTS:
            counts[f"{tag}_{test}"] = int(reps[f"{tag}_reject_{test}"].sum())
    return counts


def _work_units(spec, n, config, cell):
    return [(spec, n, config, cell, s, min(s + CHUNK, config.replications))
            for s in range(0, config.replications, CHUNK)]


def _assemble(spec: DistributionSpec, n: int, config: SimConfig, chunks) -> SimCell:
    total: dict[str, int] = {}
    for c in chunks:
        for key, v in c.items():
            total[key] = total.get(key, 0) + v
    return SimCell(
        dist=spec.name, n=n, reps=config.replications,
        sw_reject=total["sw_null"], sw_reject_alt=total["sw_alt"],
        type1={t: total[f"null_{t}"] for t in TESTS},
        power={t: total[f"alt_{t}"] for t in TESTS},
    )


def run_cell(spec: DistributionSpec, n: int, config: SimConfig, cell: int | None = None) -> SimCell:
    """Rejection counts for one (distribution, n) grid point."""
    if config.replications < 1:
        raise UsageError("replications must be >= 1")
    if n < 2:
        raise UsageError(f"n must be >= 2 per group, got {n}")
    cell = cell_index(spec, n) if cell is None else cell
    return _assemble(spec, n, config, map(_chunk_counts, _work_units(spec, n, config, cell)))


def run_table1(config: SimConfig, threads: int = 1) -> SimulationReport:
    """Every (distribution, n) cell of ``config``; ``threads`` worker
    processes share the chunks without affecting the result."""
    t0 = time.perf_counter()
    grid = [(spec, n) for spec in config.distributions for n in config.sizes_per_group]
    units = [_work_units(spec, n, config, cell_index(spec, n)) for spec, n in grid]
    flat = [u for group in units for u in group]
    if threads > 1 and len(flat) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_chunk_counts, flat))
    else:
        results = [_chunk_counts(u) for u in flat]
    cells = []
    pos = 0
    for (spec, n), group in zip(grid, units):
        cells.append(_assemble(spec, n, config, results[pos:pos + len(group)]))
        pos += len(group)
    return SimulationReport(config, cells, time.perf_counter() - t0)


# ------------------------------------------------------------------ rendering

_MD_HEADER = (
    "| Distribution | n | rej norm | Type I T-test | Type I W-test | Type I C-test "
    "| Power T-test | Power W-test | Power C-test |\n"
    "|---|---:|---:|---:|---:|---:|---:|---:|---:|\n"
)
_RATE_COLS = ("sw_reject_rate", "type1_t", "type1_w", "type1_c", "power_t", "power_w", "power_c")


def _cell_record(cell: SimCell) -> dict:
    rec: dict = {"dist": cell.dist, "n": cell.n, "reps": cell.reps}
    rates = cell.rates()
    rates["sw_reject_rate_alt"] = cell.sw_reject_rate_alt
    rec.update(rates)
    rec.update({f"se_{k}": cell.se(v) for k, v in rates.items()})
    rec["counts"] = {
        "sw_reject": cell.sw_reject, "sw_reject_alt": cell.sw_reject_alt,
        "type1": dict(cell.type1), "power": dict(cell.power),
    }
    return rec


def report_render(report: SimulationReport, fmt: str = "md") -> str:
    """Render as Markdown (2 decimals), CSV or JSON (full precision)."""
    fmt = fmt.lower()
    if fmt in ("md", "markdown"):
        lines = [_MD_HEADER]
        for cell in report.cells:
            rates = cell.rates()
            vals = " | ".join(f"{rates[c]:.2f}" for c in _RATE_COLS)
            lines.append(f"| {cell.dist.capitalize()} | {cell.n} | {vals} |\n")
        return "".join(lines)
    if fmt == "csv":
        buf = io.StringIO()
        cols = ["dist", "n", "reps", *_RATE_COLS, "sw_reject_rate_alt"]
        cols += [f"se_{c}" for c in (*_RATE_COLS, "sw_reject_rate_alt")]
        writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for cell in report.cells:
            rec = _cell_record(cell)
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()
    if fmt == "json":
        doc = {"config": report.config.to_dict(), "cells": [_cell_record(c) for c in report.cells]}
        return json.dumps(doc, indent=2) + "\n"
    raise UsageError(f"unknown report format {fmt!r}; use md, csv or json")


def report_from_json(text: str) -> SimulationReport:
    """Inverse of ``report_render(..., 'json')``."""
    doc = json.loads(text)
    cfg = dict(doc["config"])
    cfg["distributions"] = tuple(randgen.get_spec(d) for d in cfg["distributions"])
    config = SimConfig(**cfg)
    cells = []
    for rec in doc["cells"]:
        c = rec["counts"]
        cells.append(SimCell(rec["dist"], rec["n"], rec["reps"], c["sw_reject"], c["sw_reject_alt"],
                             dict(c["type1"]), dict(c["power"])))
    return SimulationReport(config, cells)
