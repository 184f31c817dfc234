"""Per-run metric extraction and aggregate statistics.

Aggregates follow the usual benchmark-report shapes: grouped means with
standard deviations, pairwise deltas with standardized effect sizes, and
seeded percentile-bootstrap confidence intervals so reports reproduce
byte-for-byte.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError, IntegrityError
from .records import recompute_counters


@dataclass(frozen=True)
class Metrics:
    quality: float | None
    wasted_acts: int
    comp_calls: int
    steps: int
    tokens_k: float


def extract_metrics(doc: dict) -> Metrics:
    """Pull the headline metrics out of a record, checking self-consistency."""
    computed = recompute_counters(doc)
    for key in ("steps", "acts", "wasted_acts", "comp_calls"):
        if doc[key] != computed[key]:
            raise IntegrityError(
                f"record {doc.get('run_id')}: stored {key}={doc[key]}, recomputed {computed[key]}"
            )
    pre_acts = max((i["pre_act_count"] for i in doc["injections"]), default=0)
    if doc["wasted_acts"] > max(pre_acts, doc["acts"]):
        raise IntegrityError("wasted acts exceed executed acts")
    return Metrics(
        quality=doc["quality"],
        wasted_acts=doc["wasted_acts"],
        comp_calls=doc["comp_calls"],
        steps=doc["steps"],
        tokens_k=doc["token_estimate"],
    )


def mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def sample_sd(xs: Sequence[float]) -> float:
    if len(xs) < 2:
        return 0.0
    m = mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Standardized mean difference with (n-1)-weighted pooled variance."""
    if len(a) < 2 or len(b) < 2:
        raise ValueError("cohens_d needs at least two observations per sample")
    va, vb = sample_sd(a) ** 2, sample_sd(b) ** 2
    pooled = ((len(a) - 1) * va + (len(b) - 1) * vb) / (len(a) + len(b) - 2)
    if pooled <= 0.0:
        raise ValueError("pooled standard deviation is zero; effect size undefined")
    return (mean(a) - mean(b)) / math.sqrt(pooled)


def _quantile(sorted_xs: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile over an already-sorted sample."""
    if not sorted_xs:
        raise ValueError("quantile of empty sample")
    pos = q * (len(sorted_xs) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_xs[lo]
    frac = pos - lo
    return sorted_xs[lo] * (1 - frac) + sorted_xs[hi] * frac


def bootstrap_ci(
    sample: Sequence[float],
    resamples: int = 2000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Seeded percentile bootstrap interval for the sample mean."""
    if not sample:
        raise ValueError("bootstrap_ci needs a non-empty sample")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    rng = random.Random(seed)
    n = len(sample)
    means = sorted(
        sum(rng.choice(sample) for _ in range(n)) / n for _ in range(resamples)
    )
    alpha = (1.0 - level) / 2.0
    return _quantile(means, alpha), _quantile(means, 1.0 - alpha)


# ---------------------------------------------------------------------------
# Grouped tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupRow:
    key: tuple[str, ...]
    n: int
    means: dict[str, float]
    sds: dict[str, float]


@dataclass(frozen=True)
class PairwiseRow:
    metric: str
    a: tuple[str, ...]
    b: tuple[str, ...]
    delta: float
    d: float | None
    ci: tuple[float, float]


@dataclass(frozen=True)
class StatReport:
    group_keys: tuple[str, ...]
    metrics: tuple[str, ...]
    rows: tuple[GroupRow, ...]
    pairwise: tuple[PairwiseRow, ...] = ()

    def to_csv(self) -> str:
        header = list(self.group_keys) + ["n"]
        for m in self.metrics:
            header += [f"{m}_mean", f"{m}_sd"]
        lines = [",".join(header)]
        for row in self.rows:
            cells = list(row.key) + [str(row.n)]
            for m in self.metrics:
                cells += [_fmt(row.means[m]), _fmt(row.sds[m])]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def pairwise_csv(self) -> str:
        lines = ["metric,a,b,delta,cohens_d,ci_lo,ci_hi"]
        for p in self.pairwise:
            lines.append(",".join([
                p.metric, "|".join(p.a), "|".join(p.b), _fmt(p.delta),
                _fmt(p.d) if p.d is not None else "",
                _fmt(p.ci[0]), _fmt(p.ci[1]),
            ]))
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(x, ".6g")


def group_table(
    records: Iterable[dict],
    group_keys: Sequence[str],
    metrics: Sequence[str] = ("quality", "wasted_acts", "comp_calls", "steps"),
    resamples: int = 2000,
    level: float = 0.95,
    seed: int = 0,
    pairwise_metrics: Sequence[str] = ("quality", "wasted_acts"),
) -> StatReport:
    """Group records and emit the benchmark's table shapes as structured rows."""
    records = list(records)
    if not records:
        raise ConfigError("no records to report on")
    for key in group_keys:
        if key not in records[0]:
            raise ConfigError(f"unknown group key {key!r}")

    groups: dict[tuple[str, ...], list[dict]] = {}
    for doc in records:
        key = tuple(str(doc[k]) for k in group_keys)
        groups.setdefault(key, []).append(doc)

    rows = []
    for key in sorted(groups):
        docs = groups[key]
        means, sds = {}, {}
        for m in metrics:
            xs = [float(d[m]) for d in docs if d[m] is not None]
            means[m] = mean(xs) if xs else float("nan")
            sds[m] = sample_sd(xs) if xs else float("nan")
        rows.append(GroupRow(key=key, n=len(docs), means=means, sds=sds))

    if sum(r.n for r in rows) != len(records):
        raise IntegrityError("group counts do not add up to the record count")

    pairwise: list[PairwiseRow] = []
    keys = sorted(groups)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            for m in pairwise_metrics:
                xa = [float(d[m]) for d in groups[a] if d[m] is not None]
                xb = [float(d[m]) for d in groups[b] if d[m] is not None]
                if not xa or not xb:
                    continue
                deltas_sample = [x - mean(xb) for x in xa]
                try:
                    d_val: float | None = cohens_d(xa, xb)
                except ValueError:
                    d_val = None
                ci = bootstrap_ci(deltas_sample, resamples=resamples, level=level, seed=seed)
                pairwise.append(PairwiseRow(
                    metric=m, a=a, b=b, delta=mean(xa) - mean(xb), d=d_val, ci=ci,
                ))

    return StatReport(
        group_keys=tuple(group_keys),
        metrics=tuple(metrics),
        rows=tuple(rows),
        pairwise=tuple(pairwise),
    )
