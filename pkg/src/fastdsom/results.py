"""Result files and run manifests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core.engine import TrainingResult

STATS_HEADER = "epoch,nb_switch,strategy,candidates_evaluated,terms_accumulated"

ASSIGNMENTS_FILE = "assignments.txt"
PROTOTYPES_FILE = "prototypes.txt"
STATS_FILE = "stats.csv"
QE_FILE = "quantization_error.txt"
MANIFEST_FILE = "manifest.json"
RESULT_FILES = (ASSIGNMENTS_FILE, PROTOTYPES_FILE, STATS_FILE, QE_FILE)


def _write(path: Path, lines) -> None:
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")


def write_result_files(result: TrainingResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / ASSIGNMENTS_FILE, out / PROTOTYPES_FILE, out / STATS_FILE, out / QE_FILE]
    _write(paths[0], (f"{i} {c}" for i, c in enumerate(result.assignments.tolist())))
    _write(paths[1], (f"{j} {p}" for j, p in enumerate(result.prototypes.tolist())))
    _write(paths[2], [STATS_HEADER] + [
        f"{s.epoch},{s.nb_switch},{s.strategy},{s.candidates_evaluated},{s.terms_accumulated}"
        for s in result.stats])
    _write(paths[3], [repr(float(result.quantization_error))])
    return paths


def _read_pairs(path) -> np.ndarray:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        a, b = line.split()
        if int(a) != len(pairs):
            raise ValueError(f"{path}: line {lineno}: expected index {len(pairs)}")
        pairs.append(int(b))
    return np.array(pairs, dtype=np.int64)


def read_assignments(path) -> np.ndarray:
    return _read_pairs(path)


def read_prototypes(path) -> np.ndarray:
    return _read_pairs(path)


@dataclass
class RunManifest:
    """Everything needed to repeat a command; timings are never recorded here."""

    subcommand: str
    params: dict
    tool_version: str = __version__
    outputs: list[str] = field(default_factory=list)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            return cls(data["subcommand"], dict(data["params"]), data.get("tool_version", ""),
                       list(data.get("outputs", [])))
        except KeyError as exc:
            raise ValueError(f"{path}: manifest lacks {exc.args[0]!r}") from None
