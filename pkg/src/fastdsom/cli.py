"""Command line front end.

Every command writes a JSON manifest next to its outputs; ``fastdsom rerun``
re-executes a manifest and reproduces the same result files.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .dissimilarity import (MatrixError, build_from_vectors, build_from_words, generate_uniform_square,
                            integerize, load_matrix, load_points, load_words, save_matrix, save_points)
from .results import MANIFEST_FILE, RunManifest
from .topology import make_grid

# Kept in sync with core.engine.VARIANTS; the engine and the benchmark
# harness are imported lazily so that light commands start quickly.
VARIANTS = ("brute", "partial", "earlystop", "memory", "fast")
DEFAULT_REPEATS = 10

EXIT_OK, EXIT_DIVERGENCE, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("fastdsom")


class InputError(Exception):
    pass


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def _abs(path) -> str:
    return str(Path(path).resolve())


def _need_readable(path) -> None:
    if not Path(path).is_file():
        raise InputError(f"{path}: no such file")


def _need_parent_dir(path: Path) -> None:
    if not path.parent.is_dir():
        raise InputError(f"{path.parent}: output directory does not exist")


def _grid_params(args) -> dict:
    return {"grid": args.grid, "m": args.m, "epochs": args.epochs, "sigma_initial": args.sigma_initial,
            "sigma_final": args.sigma_final}


def _config(params: dict, variant: str, seed: int, ratio: float = 7.0):
    from .core.engine import DsomConfig

    return DsomConfig(variant=variant, epochs=params["epochs"], ratio=ratio, seed=seed,
                      sigma_initial=params["sigma_initial"], sigma_final=params["sigma_final"])


# -- commands: each takes a resolved parameter dict -------------------------------------


def run_gen(p: dict) -> int:
    if p["n"] < 1:
        raise InputError("--n must be at least 1")
    out = Path(p["out"])
    _need_parent_dir(out)
    save_points(generate_uniform_square(p["n"], p["seed"]), out)
    RunManifest("gen", p, outputs=[str(out)]).save(_sidecar(out))
    return EXIT_OK


def run_dist(p: dict) -> int:
    _need_readable(p["input"])
    out = Path(p["out"])
    _need_parent_dir(out)
    if p["kind"] == "vectors":
        matrix = build_from_vectors(load_points(p["input"]))
    else:
        words = load_words(p["input"])
        if not words:
            raise InputError(f"{p['input']}: no words")
        matrix = build_from_words(words, normalized=p["normalized"])
    if p["integerize"] is not None:
        matrix = integerize(matrix, p["integerize"])
    save_matrix(matrix, out)
    RunManifest("dist", p, outputs=[str(out)]).save(_sidecar(out))
    return EXIT_OK


def _load_problem(p: dict):
    _need_readable(p["matrix"])
    if p["m"] < 1:
        raise InputError("--m must be at least 1")
    matrix = load_matrix(p["matrix"])
    graph = make_grid(p["grid"], p["m"])
    if graph.m_models > matrix.n:
        raise InputError(f"M={graph.m_models} is too high relatively to N={matrix.n}; use a smaller grid")
    return matrix, graph


def run_train(p: dict) -> int:
    if not 1 <= p["ratio"] <= 16:
        raise InputError("--ratio must lie in [1, 16]")
    matrix, graph = _load_problem(p)
    config = _config(p, p["variant"], p["seed"], p["ratio"])
    config.schedule(graph)
    out = Path(p["out"])
    from .core.engine import train
    from .results import write_result_files

    result = train(config, matrix, graph)
    paths = write_result_files(result, out)
    RunManifest("train", p, outputs=[str(x) for x in paths]).save(out / MANIFEST_FILE)
    print(f"quantization error: {float(result.quantization_error)!r}")
    return EXIT_OK


def run_verify(p: dict) -> int:
    if p["seeds"] < 1:
        raise InputError("--seeds must be at least 1")
    from .bench import equivalence_check

    matrix, graph = _load_problem(p)
    base = _config(p, VARIANTS[0], p["seed"]).replace(tie_fault=p.get("inject_tie_fault", False))
    base.schedule(graph)
    report = equivalence_check(matrix, graph, range(p["seed"], p["seed"] + p["seeds"]), p["variants"], base)
    text = report.text()
    print(text)
    if p.get("out"):
        out = Path(p["out"])
        out.write_text(text + "\n", encoding="utf-8")
        RunManifest("verify", p, outputs=[str(out)]).save(_sidecar(out))
    return EXIT_OK if report.ok else EXIT_DIVERGENCE


def run_bench(p: dict) -> int:
    from .bench import (NondeterminismError, fit_all, fit_report_kv, fit_report_text, parse_sizes,
                        run_benchmark, write_timing_csv)
    from .core.engine import DsomConfig

    sizes = parse_sizes(p["sizes"])
    if p["repeats"] < 1:
        raise InputError("--repeats must be at least 1")
    out = Path(p["out"])
    _need_parent_dir(out)
    base = DsomConfig(epochs=p["epochs"], ratio=p["ratio"], seed=p["seed"], sigma_initial=p["sigma_initial"],
                      sigma_final=p["sigma_final"])
    grid = {"hex": lambda s: make_grid("hex", s), "rect": lambda s: make_grid("rect", s)}[p["grid"]]
    try:
        records = run_benchmark(sizes, p["variants"], p["repeats"], base, p["integerize"], grid=grid)
    except NondeterminismError as exc:
        print(exc, file=sys.stderr)
        return EXIT_DIVERGENCE
    write_timing_csv(records, out)
    fits = fit_all(records)
    report = out.with_suffix(".fit.txt")
    kv = out.with_suffix(".fit.kv")
    report.write_text(fit_report_text(fits), encoding="utf-8")
    kv.write_text(fit_report_kv(fits), encoding="utf-8")
    print(fit_report_text(fits), end="")
    RunManifest("bench", p, outputs=[str(out), str(report), str(kv)]).save(_sidecar(out))
    return EXIT_OK


COMMANDS = {"gen": run_gen, "dist": run_dist, "train": run_train, "verify": run_verify, "bench": run_bench}


def run_manifest(path, out: str | None = None) -> int:
    manifest = RunManifest.load(path)
    if manifest.subcommand not in COMMANDS:
        raise InputError(f"{path}: unknown subcommand {manifest.subcommand!r}")
    params = dict(manifest.params)
    if out is not None:
        params["out"] = _abs(out)
    return COMMANDS[manifest.subcommand](params)


# -- argument parsing ---------------------------------------------------------------------


def _variant_list(text: str) -> list[str]:
    items = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in items if v not in VARIANTS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"variants must be drawn from {','.join(VARIANTS)}")
    return items


def _add_grid_flags(sp, m_default: int = 7) -> None:
    sp.add_argument("--grid", choices=["hex", "rect"], default="hex")
    sp.add_argument("--m", type=int, default=m_default, help="grid side; the map has m*m models")
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--sigma-initial", type=float, default=None,
                    help="initial kernel width in graph steps (default: half the grid diameter)")
    sp.add_argument("--sigma-final", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastdsom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="uniform points in the unit square (CSV)")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("dist", help="build a dissimilarity matrix file")
    sp.add_argument("input")
    sp.add_argument("--kind", choices=["vectors", "words"], default="vectors")
    sp.add_argument("--normalized", action="store_true", help="normalized edit distance (words only)")
    sp.add_argument("--integerize", type=float, default=None, metavar="SCALE",
                    help="store round(SCALE * d) so that training is exact in floating point")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("train", help="train one variant and write result files")
    sp.add_argument("matrix")
    _add_grid_flags(sp)
    sp.add_argument("--variant", choices=VARIANTS, default="fast")
    sp.add_argument("--ratio", type=float, default=7.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("verify", help="check that all variants give identical results")
    sp.add_argument("matrix")
    _add_grid_flags(sp)
    sp.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds")
    sp.add_argument("--seed", type=int, default=0, help="first seed")
    sp.add_argument("--variants", type=_variant_list, default=list(VARIANTS))
    sp.add_argument("--out", default=None, help="optional report file")
    sp.add_argument("--inject-tie-fault", action="store_true", help=argparse.SUPPRESS)

    sp = sub.add_parser("bench", help="time variants on generated data and fit cost models")
    sp.add_argument("--sizes", default="500x49,1000x49,1500x49,500x100,1000x100,1500x100",
                    help="comma separated NxM pairs")
    sp.add_argument("--variants", type=_variant_list, default=list(VARIANTS))
    sp.add_argument("--repeats", type=int, default=DEFAULT_REPEATS)
    sp.add_argument("--grid", choices=["hex", "rect"], default="hex")
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--sigma-initial", type=float, default=None)
    sp.add_argument("--sigma-final", type=float, default=0.5)
    sp.add_argument("--ratio", type=float, default=7.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--integerize", type=float, default=1e8, metavar="SCALE")
    sp.add_argument("--out", required=True, help="timing CSV path")

    sp = sub.add_parser("rerun", help="re-execute a command from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None, help="override the recorded output location")
    return parser


def _params(args) -> dict:
    cmd = args.command
    if cmd == "gen":
        return {"n": args.n, "seed": args.seed, "out": _abs(args.out)}
    if cmd == "dist":
        if args.normalized and args.kind != "words":
            raise InputError("--normalized applies to word lists only")
        return {"input": _abs(args.input), "kind": args.kind, "normalized": args.normalized,
                "integerize": args.integerize, "out": _abs(args.out)}
    if cmd == "train":
        return {"matrix": _abs(args.matrix), **_grid_params(args), "variant": args.variant, "ratio": args.ratio,
                "seed": args.seed, "out": _abs(args.out)}
    if cmd == "verify":
        p = {"matrix": _abs(args.matrix), **_grid_params(args), "seeds": args.seeds, "seed": args.seed,
             "variants": args.variants, "out": _abs(args.out) if args.out else None}
        if args.inject_tie_fault:
            p["inject_tie_fault"] = True
        return p
    if cmd == "bench":
        return {"sizes": args.sizes, "variants": args.variants, "repeats": args.repeats, "grid": args.grid,
                "epochs": args.epochs, "sigma_initial": args.sigma_initial, "sigma_final": args.sigma_final,
                "ratio": args.ratio, "seed": args.seed, "integerize": args.integerize, "out": _abs(args.out)}
    raise AssertionError(cmd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "rerun":
            _need_readable(args.manifest)
            return run_manifest(args.manifest, args.out)
        return COMMANDS[args.command](_params(args))
    except (InputError, MatrixError, ValueError, OSError) as exc:
        print(f"fastdsom: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
