"""The fixed set of full-length runs behind the acceptance checks, with a disk cache.

A cell is one (problem, method) pair over ten seeds at T = 200. Cached CSVs are
keyed by the run configuration and a fingerprint of the algorithm sources, so
any change to the method invalidates them. The fingerprint hashes the syntax
tree with docstrings removed, so comment and docstring edits keep the cache.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import logging
import time
from importlib import resources
from pathlib import Path

from .harness import RunConfig, get_oracle, run
from .report import LoadedRun, read_csv, write_csv, write_failures

log = logging.getLogger(__name__)

ALGORITHM_MODULES = ("gp", "ensemble", "acquisition", "problems", "harness")

ALL_PROBLEMS = (
    "three_hump", "six_hump", "ackley", "hartmann", "hartmann_complicated",
    "modified_branin", "newsvendor",
)

ACCEPTANCE_CELLS = (
    *((p, "edrbo") for p in ALL_PROBLEMS),
    ("three_hump", "erbo"),
    ("ackley", "ucb"),
    ("hartmann", "ucb"),
)


def _strip_docstrings(tree: ast.AST) -> ast.AST:
    for node in ast.walk(tree):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            body = node.body
            if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant) \
                    and isinstance(body[0].value.value, str):
                node.body = body[1:] or [ast.Pass()]
    return ast.fix_missing_locations(tree)


def code_fingerprint() -> str:
    h = hashlib.sha256()
    pkg = resources.files("edrbo")
    for name in ALGORITHM_MODULES:
        tree = _strip_docstrings(ast.parse(pkg.joinpath(f"{name}.py").read_text()))
        h.update(name.encode())
        h.update(ast.dump(tree).encode())
    return h.hexdigest()[:16]


def cell_config(problem: str, method: str, iters: int = 200, seeds=tuple(range(10))) -> RunConfig:
    return RunConfig(problem, method, iters=iters, seeds=tuple(seeds))


def cell_key(cfg: RunConfig) -> str:
    return hashlib.sha256(f"{cfg!r}|{code_fingerprint()}".encode()).hexdigest()[:12]


def _timings(cache: Path) -> dict[str, float]:
    path = cache / "timings.csv"
    if not path.exists():
        return {}
    with open(path, newline="") as fh:
        return {row["key"]: float(row["seconds"]) for row in csv.DictReader(fh)}


def _record_timing(cache: Path, key: str, cfg: RunConfig, seconds: float) -> None:
    path = cache / "timings.csv"
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(["key", "problem", "method", "seeds", "seconds"])
        w.writerow([key, cfg.problem, cfg.method, len(cfg.seeds), f"{seconds:.3f}"])


def load_or_run(cfg: RunConfig, cache_dir, *, compute: bool = True) -> tuple[list[LoadedRun], float]:
    """Runs of ``cfg`` from the cache, computing and storing them if absent.

    Returns the runs and the wall time it took to compute them (the recorded
    time when loaded from the cache). Raises ``FileNotFoundError`` when the
    cell is missing and ``compute`` is false.
    """
    cache = Path(cache_dir)
    key = cell_key(cfg)
    path = cache / f"{cfg.problem}_{cfg.method}_{key}.csv"
    timings = _timings(cache)
    if path.exists() and key in timings:
        return read_csv(path), timings[key]
    if not compute:
        raise FileNotFoundError(path)
    cache.mkdir(parents=True, exist_ok=True)
    tic = time.perf_counter()
    oracle = get_oracle(cfg.problem, cfg.oracle_grid, cfg.oracle_mc, cfg.oracle_seed, cache / "oracle_cache.csv")
    results = []
    for s in cfg.seeds:
        res = run(cfg, s, oracle)
        log.info("%s/%s seed %d: R_T = %.4f", cfg.problem, cfg.method, s, res.final_regret)
        results.append(res)
    seconds = time.perf_counter() - tic
    write_csv(results, path)
    write_failures(results, cache / "failures.csv")
    _record_timing(cache, key, cfg, seconds)
    return read_csv(path), seconds
