"""Training driver: configuration, the epoch loop and its results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dissimilarity import DissimilarityMatrix
from ..topology import KernelSchedule, NeighborhoodTable, PriorGraph
from . import kernels as K

VARIANTS = ("brute", "partial", "earlystop", "memory", "fast")

# variant -> (representation scheme, incremental D maintenance)
_VARIANT_PLAN = {
    "brute": (K.BRUTE, False),
    "partial": (K.PARTIAL, False),
    "earlystop": (K.EARLYSTOP, False),
    "memory": (K.PARTIAL, True),
    "fast": (K.EARLYSTOP, True),
}

STRATEGY_NAMES = {K.STRAT_NONE: "none", K.STRAT_FULL: "full", K.STRAT_BLOCK: "block",
                  K.STRAT_INDIVIDUAL: "individual"}

# Real-valued matrices get a full D recomputation this often under incremental updates.
REAL_REFRESH_EPOCHS = 25


@dataclass(frozen=True)
class DsomConfig:
    variant: str = "fast"
    epochs: int = 100
    ratio: float = 7.0
    seed: int = 0
    sigma_initial: float | None = None
    sigma_final: float = 0.5
    # Test hook: resolve representation ties towards the largest index in the
    # non-brute schemes. Never set outside fault-injection tests.
    tie_fault: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.ratio >= 1:
            raise ValueError("ratio must be >= 1")

    def schedule(self, graph: PriorGraph) -> KernelSchedule:
        return KernelSchedule.default_for(graph, self.epochs, self.sigma_initial, self.sigma_final)

    def replace(self, **changes) -> "DsomConfig":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return DsomConfig(**values)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    nb_switch: int
    strategy: str
    candidates_evaluated: int
    terms_accumulated: int
    d_additions: int


@dataclass
class TrainingResult:
    config: DsomConfig
    prototypes: np.ndarray
    assignments: np.ndarray
    quantization_error: float
    stats: list[EpochStats]
    prototype_history: np.ndarray = field(repr=False)

    def same_outcome(self, other: "TrainingResult") -> bool:
        return (np.array_equal(self.prototypes, other.prototypes)
                and np.array_equal(self.assignments, other.assignments))


def init_prototypes(n: int, m: int, rng: np.random.Generator | int) -> np.ndarray:
    """M distinct observation indices drawn uniformly without replacement."""
    if m > n:
        raise ValueError(f"cannot pick {m} prototypes from {n} observations")
    if m < 1:
        raise ValueError("need at least one model")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(rng))
    return rng.choice(n, size=m, replace=False).astype(np.int64)


def choose_update_strategy(nb_switch: int, n: int, ratio: float) -> str:
    if not 0 <= nb_switch <= n:
        raise ValueError("nb_switch must lie in [0, N]")
    return "block" if nb_switch * ratio >= n else "individual"


def quantization_error(assignments, prototypes, matrix: DissimilarityMatrix) -> float:
    assignments = np.asarray(assignments)
    prototypes = np.asarray(prototypes)
    d = matrix.values
    n = d.shape[0]
    total = 0.0
    for i, c in enumerate(assignments.tolist()):
        total += d[i, prototypes[c]]
    return total / n


def _graph_arrays(graph: PriorGraph):
    gdist = np.ascontiguousarray(graph.gdist, dtype=np.int64)
    orders = np.ascontiguousarray(graph.orders)
    ring_starts = np.ascontiguousarray(graph.ring_starts)
    ecc = gdist.max(axis=1).astype(np.int64)
    return gdist, orders, ring_starts, ecc


def _check_inputs(matrix: DissimilarityMatrix, graph: PriorGraph) -> None:
    if matrix.n < 1:
        raise ValueError("empty dissimilarity matrix")
    if graph.m_models > matrix.n:
        raise ValueError(f"M={graph.m_models} models is too high for N={matrix.n} observations")


def _stats_from_row(epoch: int, row) -> EpochStats:
    return EpochStats(epoch, int(row[K.ST_NB_SWITCH]), STRATEGY_NAMES[int(row[K.ST_STRATEGY])],
                      int(row[K.ST_CANDIDATES]), int(row[K.ST_TERMS]), int(row[K.ST_D_ADDS]))


def train(config: DsomConfig, matrix: DissimilarityMatrix, graph: PriorGraph) -> TrainingResult:
    """Run every epoch of the configured variant plus the final affectation pass."""
    _check_inputs(matrix, graph)
    scheme, memory = _VARIANT_PLAN[config.variant]
    gdist, orders, ring_starts, ecc = _graph_arrays(graph)
    ktable = np.ascontiguousarray(config.schedule(graph).table(graph.diameter))
    protos = init_prototypes(matrix.n, graph.m_models, config.seed)
    history = np.empty((config.epochs + 1, graph.m_models), dtype=np.int64)
    stats = np.zeros((config.epochs, K.N_STATS), dtype=np.int64)
    refresh = 0 if matrix.is_integer else REAL_REFRESH_EPOCHS
    final = K.run_training(matrix.values, gdist, orders, ring_starts, ecc, ktable, protos, scheme, memory,
                           float(config.ratio), refresh, config.tie_fault, history, stats)
    return TrainingResult(
        config=config,
        prototypes=protos,
        assignments=final,
        quantization_error=quantization_error(final, protos, matrix),
        stats=[_stats_from_row(l + 1, stats[l]) for l in range(config.epochs)],
        prototype_history=history,
    )


class Trainer:
    """Epoch-by-epoch view of a training run, exposing the full state between epochs.

    Uses the same compiled epoch step as :func:`train`, so stepping through all
    epochs and calling :meth:`finish` gives the same result.
    """

    def __init__(self, config: DsomConfig, matrix: DissimilarityMatrix, graph: PriorGraph):
        _check_inputs(matrix, graph)
        self.config = config
        self.matrix = matrix
        self.graph = graph
        self.schedule = config.schedule(graph)
        self._scheme, self._memory = _VARIANT_PLAN[config.variant]
        self._gdist, self._orders, self._ring_starts, self._ecc = _graph_arrays(graph)
        self._ktable = np.ascontiguousarray(self.schedule.table(graph.diameter))
        self._refresh = 0 if matrix.is_integer else REAL_REFRESH_EPOCHS
        n, m = matrix.n, graph.m_models
        self.epoch = 0
        self.prototypes = init_prototypes(n, m, config.seed)
        self.assignments = np.full(n, -1, dtype=np.int64)
        self.members = np.empty(n, dtype=np.int64)
        self.starts = np.zeros(m + 1, dtype=np.int64)
        self._Dt = np.zeros((n, m))
        self.changed = np.zeros(m, dtype=np.bool_)
        self._moved = np.empty(n, dtype=np.int64)
        self.stats: list[EpochStats] = []
        self.history = [self.prototypes.copy()]

    @property
    def done(self) -> bool:
        return self.epoch >= self.config.epochs

    @property
    def D(self) -> np.ndarray:
        """Partial sums indexed [model, observation] (read-only view)."""
        view = self._Dt.T
        view.flags.writeable = False
        return view

    @property
    def clusters(self) -> list[np.ndarray]:
        return [self.members[self.starts[u]:self.starts[u + 1]].copy() for u in range(self.graph.m_models)]

    def neighborhood(self, epoch: int | None = None) -> NeighborhoodTable:
        epoch = self.epoch if epoch is None else epoch
        return NeighborhoodTable(epoch, self._ktable[epoch - 1].copy(), self.graph.gdist)

    def step(self) -> EpochStats:
        if self.done:
            raise RuntimeError("all epochs already run")
        row = np.zeros(K.N_STATS, dtype=np.int64)
        l = self.epoch + 1
        K.run_epoch(l, self.matrix.values, self._gdist, self._orders, self._ring_starts, self._ecc,
                    self._ktable[l - 1], self.prototypes, self.assignments, self.members, self.starts,
                    self._Dt, self.changed, self._moved, self._scheme, self._memory,
                    float(self.config.ratio), self._refresh, self.config.tie_fault, row)
        self.epoch = l
        st = _stats_from_row(l, row)
        self.stats.append(st)
        self.history.append(self.prototypes.copy())
        return st

    def finish(self) -> TrainingResult:
        while not self.done:
            self.step()
        final = np.empty(self.matrix.n, dtype=np.int64)
        K.affectation(self.matrix.values, self.prototypes, self.assignments, final, self._orders,
                      self._ring_starts, self._ecc, np.zeros(self.graph.m_models, dtype=np.bool_),
                      np.empty(self.matrix.n, dtype=np.int64))
        return TrainingResult(
            config=self.config,
            prototypes=self.prototypes.copy(),
            assignments=final,
            quantization_error=quantization_error(final, self.prototypes, self.matrix),
            stats=list(self.stats),
            prototype_history=np.array(self.history),
        )
