"""Timing harness, cross-variant equivalence checks and cost-model fits."""

from __future__ import annotations

import csv
import logging
import math
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import nnls

from .core.engine import VARIANTS, DsomConfig, TrainingResult, train
from .dissimilarity import DissimilarityMatrix, build_from_vectors, generate_uniform_square, integerize
from .topology import PriorGraph, hex_grid

log = logging.getLogger(__name__)

TIMING_HEADER = ["variant", "N", "M", "L", "seed", "repeats", "wall_seconds", "relative_sd"]
DEFAULT_REPEATS = 10
MIN_BATCH_SECONDS = 0.05
DEFAULT_SCALE = 1e8

_timing_lock = threading.Lock()


class NondeterminismError(RuntimeError):
    pass


@dataclass
class TimingRecord:
    variant: str
    n: int
    m: int
    epochs: int
    seed: int
    wall_seconds: float
    repeats: int
    relative_sd: float
    result: TrainingResult | None = field(default=None, repr=False, compare=False)

    def row(self) -> list:
        return [self.variant, self.n, self.m, self.epochs, self.seed, self.repeats,
                repr(self.wall_seconds), repr(self.relative_sd)]


def time_variant(config: DsomConfig, matrix: DissimilarityMatrix, graph: PriorGraph,
                 repeats: int = DEFAULT_REPEATS) -> TimingRecord:
    """Mean wall time of ``repeats`` runs after one untimed warm-up run.

    Runs shorter than 50 ms are timed in batches and divided. Every run must
    reproduce the warm-up result exactly.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if not _timing_lock.acquire(blocking=False):
        raise RuntimeError("timed sections must not run concurrently")
    try:
        t0 = time.perf_counter()
        reference = train(config, matrix, graph)
        warm = time.perf_counter() - t0
        batch = 1 if warm >= MIN_BATCH_SECONDS else math.ceil(MIN_BATCH_SECONDS / max(warm, 1e-6))
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(batch):
                result = train(config, matrix, graph)
            samples.append((time.perf_counter() - t0) / batch)
            if not result.same_outcome(reference):
                raise NondeterminismError(f"{config.variant}: results differ between repeated runs")
    finally:
        _timing_lock.release()
    mean = statistics.fmean(samples)
    rsd = statistics.stdev(samples) / mean if len(samples) > 1 else 0.0
    return TimingRecord(config.variant, matrix.n, graph.m_models, config.epochs, config.seed, mean, repeats,
                        rsd, reference)


# -- equivalence -------------------------------------------------------------------


@dataclass(frozen=True)
class Divergence:
    seed: int
    reference: str
    variant: str
    first_epoch: int
    detail: str


@dataclass
class EquivalenceReport:
    seeds: list[int]
    variants: list[str]
    divergences: list[Divergence]

    @property
    def ok(self) -> bool:
        return not self.divergences

    def text(self) -> str:
        lines = [f"variants: {', '.join(self.variants)}", f"seeds: {len(self.seeds)}"]
        if self.ok:
            lines.append("result: identical prototypes and assignments for every seed")
        else:
            lines.append(f"result: {len(self.divergences)} divergence(s)")
            for d in self.divergences:
                lines.append(f"  seed {d.seed}: {d.variant} vs {d.reference} first differs at epoch "
                             f"{d.first_epoch} ({d.detail})")
        return "\n".join(lines)


def first_difference(a: TrainingResult, b: TrainingResult) -> tuple[int, str] | None:
    """Earliest epoch at which two runs disagree, or None when they agree."""
    ha, hb = a.prototype_history, b.prototype_history
    for l in range(min(len(ha), len(hb))):
        if not np.array_equal(ha[l], hb[l]):
            models = np.flatnonzero(ha[l] != hb[l])
            return l, f"prototypes of models {models.tolist()[:8]}"
    if not np.array_equal(a.assignments, b.assignments):
        return len(ha), "final assignments"
    return None


def equivalence_check(matrix: DissimilarityMatrix, graph: PriorGraph, seeds: Iterable[int],
                      variants: Sequence[str] = VARIANTS, base: DsomConfig | None = None) -> EquivalenceReport:
    """Train every variant for every seed and compare against the first variant."""
    base = base or DsomConfig()
    variants = list(variants)
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    seeds = list(seeds)
    divergences = []
    for seed in seeds:
        runs = {v: train(base.replace(variant=v, seed=seed), matrix, graph) for v in variants}
        ref = variants[0]
        for v in variants[1:]:
            diff = first_difference(runs[ref], runs[v])
            if diff is not None:
                divergences.append(Divergence(seed, ref, v, diff[0], diff[1]))
    return EquivalenceReport(seeds, variants, divergences)


# -- cost models -------------------------------------------------------------------


@dataclass
class CostModelFit:
    model: str
    coefficients: dict[str, float]
    nmse: float
    n_records: int

    @property
    def poor_fit(self) -> bool:
        return self.nmse >= 0.5

    def lines(self) -> list[str]:
        out = [f"model: {self.model}", f"records: {self.n_records}"]
        out += [f"{k}: {v:.6g}" for k, v in self.coefficients.items()]
        out.append(f"nmse: {self.nmse:.6g}")
        if self.model == "quadratic" and self.coefficients["tau"] > 0:
            out.append(f"delta/tau: {self.coefficients['delta'] / self.coefficients['tau']:.6g}")
        return out


def nmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean squared prediction error divided by the (population) variance of ``actual``."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or a.size == 0:
        raise ValueError("predicted and actual must be nonempty and of equal length")
    var = a.var()
    if var == 0:
        raise ValueError("actual values have zero variance")
    return float(np.mean((p - a) ** 2) / var)


def _check_grid(records: Sequence[TimingRecord]) -> None:
    if len(records) < 4:
        raise ValueError("need at least 4 timing records")
    if len({r.n for r in records}) < 2 or len({r.m for r in records}) < 2:
        raise ValueError("records must span at least 2 distinct N and 2 distinct M")


def _safe_nmse(pred, t) -> float:
    # Constant timings leave nothing to explain; report the baseline value.
    if np.var(t) == 0:
        return 1.0
    return nmse(pred, t)


def fit_loglog(records: Sequence[TimingRecord]) -> CostModelFit:
    """Least squares of log T on log N, log M and a constant."""
    _check_grid(records)
    n = np.array([r.n for r in records], dtype=np.float64)
    m = np.array([r.m for r in records], dtype=np.float64)
    t = np.array([r.wall_seconds for r in records], dtype=np.float64)
    X = np.column_stack([np.log(n), np.log(m), np.ones_like(n)])
    if np.linalg.matrix_rank(X) < 3:
        raise ValueError("degenerate design: log N, log M and the intercept are collinear")
    (alpha, beta, gamma), *_ = np.linalg.lstsq(X, np.log(t), rcond=None)
    pred = np.exp(gamma) * n**alpha * m**beta
    return CostModelFit("loglog", {"alpha": float(alpha), "beta": float(beta), "gamma": float(gamma)},
                        _safe_nmse(pred, t), len(records))


def fit_quadratic(records: Sequence[TimingRecord]) -> CostModelFit:
    """Nonnegative least squares of T on N^2 and N M^2."""
    _check_grid(records)
    n = np.array([r.n for r in records], dtype=np.float64)
    m = np.array([r.m for r in records], dtype=np.float64)
    t = np.array([r.wall_seconds for r in records], dtype=np.float64)
    X = np.column_stack([n * n, n * m * m])
    if np.linalg.matrix_rank(X) < 2:
        raise ValueError("degenerate design: N^2 and N M^2 are collinear")
    # Column scaling keeps NNLS well conditioned; coefficients are rescaled back.
    scale = X.max(axis=0)
    coef, _ = nnls(X / scale, t)
    delta, tau = coef / scale
    pred = X @ np.array([delta, tau])
    return CostModelFit("quadratic", {"delta": float(delta), "tau": float(tau)}, _safe_nmse(pred, t),
                        len(records))


# -- benchmark driver ----------------------------------------------------------------


def benchmark_matrix(n: int, seed: int, scale: float = DEFAULT_SCALE) -> DissimilarityMatrix:
    """Integerized squared-Euclidean matrix of ``n`` uniform unit-square points."""
    return integerize(build_from_vectors(generate_uniform_square(n, seed)), scale)


def parse_sizes(text: str) -> list[tuple[int, int]]:
    """Parse ``"500x49,1000x100"`` into (N, M) pairs; M must be a square grid size."""
    sizes = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            n, m = (int(x) for x in part.lower().split("x"))
        except ValueError:
            raise ValueError(f"invalid size {part!r}; expected NxM, e.g. 1000x49") from None
        if math.isqrt(m) ** 2 != m or m < 1:
            raise ValueError(f"M={m} is not the size of a square grid")
        if m > n:
            raise ValueError(f"M={m} exceeds N={n}")
        sizes.append((n, m))
    if not sizes:
        raise ValueError("no sizes given")
    return sizes


def run_benchmark(sizes: Sequence[tuple[int, int]], variants: Sequence[str], repeats: int = DEFAULT_REPEATS,
                  base: DsomConfig | None = None, scale: float = DEFAULT_SCALE, spot_check_epochs: int = 5,
                  grid=hex_grid) -> list[TimingRecord]:
    """Time each variant on each (N, M) pair after an equivalence spot check."""
    base = base or DsomConfig()
    for n, m in sizes:
        if m > n:
            raise ValueError(f"M={m} exceeds N={n}")
    records = []
    for n, m in sizes:
        matrix = benchmark_matrix(n, base.seed, scale)
        graph = grid(math.isqrt(m))
        spot = equivalence_check(matrix, graph, [base.seed], variants,
                                 base.replace(epochs=min(spot_check_epochs, base.epochs)))
        if not spot.ok:
            raise NondeterminismError("equivalence spot check failed:\n" + spot.text())
        for v in variants:
            rec = time_variant(base.replace(variant=v), matrix, graph, repeats)
            log.info("%s N=%d M=%d: %.4f s (rsd %.2e)", v, n, m, rec.wall_seconds, rec.relative_sd)
            records.append(rec)
    return records


def write_timing_csv(records: Sequence[TimingRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMING_HEADER)
        for r in records:
            writer.writerow(r.row())


def read_timing_csv(path) -> list[TimingRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TIMING_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [TimingRecord(row["variant"], int(row["N"]), int(row["M"]), int(row["L"]), int(row["seed"]),
                             float(row["wall_seconds"]), int(row["repeats"]), float(row["relative_sd"]))
                for row in reader]


def fit_all(records: Sequence[TimingRecord]) -> dict[str, list[CostModelFit]]:
    """Both cost models for every variant with a usable grid of records."""
    fits = {}
    for v in dict.fromkeys(r.variant for r in records):
        subset = [r for r in records if r.variant == v]
        try:
            fits[v] = [fit_loglog(subset), fit_quadratic(subset)]
        except ValueError as exc:
            log.info("no fit for %s: %s", v, exc)
    return fits


def fit_report_text(fits: dict[str, list[CostModelFit]]) -> str:
    lines = []
    for v, models in fits.items():
        for f in models:
            lines.append(f"[{v}]")
            lines.extend("  " + s for s in f.lines())
    return "\n".join(lines) + "\n"


def fit_report_kv(fits: dict[str, list[CostModelFit]]) -> str:
    lines = []
    for v, models in fits.items():
        for f in models:
            prefix = f"{v}.{f.model}"
            for k, val in f.coefficients.items():
                lines.append(f"{prefix}.{k}={val!r}")
            lines.append(f"{prefix}.nmse={f.nmse!r}")
            lines.append(f"{prefix}.records={f.n_records}")
    return "\n".join(lines) + "\n"
