"""Command line entry point: ``edrbo run | oracle | report | bench-all``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .ensemble import EnsembleConfig
from .harness import METHODS, RunConfig, get_oracle, run
from .problems import PROBLEMS
from .report import load_dir, render_svg, summarise, write_csv, write_failures

log = logging.getLogger("edrbo")

# config-file keys that live on the ensemble rather than on RunConfig
_ENSEMBLE_KEYS = {"delta", "search_budget", "rkhs_bound"}
_RUN_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"ensemble", "problem", "method"}


class UsageError(Exception):
    """Bad arguments; reported with exit code 2."""


def parse_seeds(text: str) -> tuple[int, ...]:
    """``a..b`` (inclusive), a comma list, or a single integer."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise UsageError(f"empty seed range {text!r}")
            return tuple(range(lo, hi + 1))
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}; use a..b or a,b,c") from None
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _coerce(key: str, value: str):
    if key == "seeds":
        return parse_seeds(value)
    if key == "timing":
        if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise UsageError(f"timing must be a boolean, got {value!r}")
        return value.lower() in ("true", "1", "yes")
    if key == "out_dir":
        return value
    if key in ("noise_std", "oracle_grid", "oracle_mc") and value.lower() == "none":
        return None
    if key in ("iters", "n_init", "acq_budget", "refine_contexts", "max_polls", "oracle_grid",
               "oracle_mc", "oracle_seed", "search_budget"):
        return int(value)
    return float(value)


def build_config(problem: str, method: str, settings: dict[str, str]) -> RunConfig:
    if problem not in PROBLEMS:
        raise UsageError(f"unknown problem {problem!r}; valid: {', '.join(PROBLEMS)}")
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    run_kw, ens_kw = {}, {}
    for k, v in settings.items():
        if k in ("problem", "method"):
            continue
        try:
            if k in _ENSEMBLE_KEYS:
                if k == "rkhs_bound":
                    ens_kw["rkhs_bounds"] = (float(v),) * 3
                else:
                    ens_kw[k] = _coerce(k, v)
            elif k in _RUN_KEYS:
                run_kw[k] = _coerce(k, v)
            else:
                valid = sorted(_RUN_KEYS | _ENSEMBLE_KEYS)
                raise UsageError(f"unknown config key {k!r}; valid: {', '.join(valid)}")
        except ValueError as exc:
            raise UsageError(f"bad value for {k}: {exc}") from None
    try:
        return RunConfig(problem, method, ensemble=EnsembleConfig(**ens_kw), **run_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _settings(args) -> dict[str, str]:
    s = read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("iters", "seeds", "n_init"):
        v = getattr(args, key, None)
        if v is not None:
            s[key] = str(v)
    if getattr(args, "out", None):
        s["out_dir"] = args.out
    if getattr(args, "no_timing", False):
        s["timing"] = "false"
    return s


def _cache_path(args, out_dir: str) -> Path:
    return Path(args.oracle_cache) if args.oracle_cache else Path(out_dir) / "oracle_cache.csv"


def _run_cell(cfg: RunConfig, cache: Path) -> int:
    oracle = get_oracle(cfg.problem, cfg.oracle_grid, cfg.oracle_mc, cfg.oracle_seed, cache)
    results = []
    for s in cfg.seeds:
        res = run(cfg, s, oracle)
        log.info("%s/%s seed %d: R_T = %.6g", cfg.problem, cfg.method, s, res.final_regret)
        results.append(res)
    out = Path(cfg.out_dir)
    path = write_csv(results, out / f"{cfg.problem}_{cfg.method}.csv")
    failed = write_failures(results, out / "failures.csv")
    print(f"wrote {path} ({len(results)} runs)")
    if failed:
        print(f"some runs failed; see {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_run(args) -> int:
    s = _settings(args)
    problem = args.problem or s.get("problem")
    method = args.method or s.get("method", "edrbo")
    if problem is None:
        raise UsageError("--problem is required (or problem = ... in the config)")
    cfg = build_config(problem, method, s)
    return _run_cell(cfg, _cache_path(args, cfg.out_dir))


def cmd_bench_all(args) -> int:
    s = _settings(args)
    s.pop("problem", None)
    s.pop("method", None)
    cfgs = [build_config(p, m, s) for p in PROBLEMS for m in METHODS]
    cache = _cache_path(args, cfgs[0].out_dir)
    status = 0
    for cfg in cfgs:
        status = max(status, _run_cell(cfg, cache))
    print(f"bench-all: {len(cfgs) * len(cfgs[0].seeds)} run groups")
    return status


def cmd_oracle(args) -> int:
    if args.problem not in PROBLEMS:
        raise UsageError(f"unknown problem {args.problem!r}; valid: {', '.join(PROBLEMS)}")
    o = get_oracle(args.problem, args.grid, args.mc, args.seed, args.oracle_cache)
    x = ", ".join(f"{v:.6f}" for v in o.x_star)
    print(f"{o.problem}: x* = [{x}]  value = {o.value!r}  (grid {o.grid_res}, mc {o.mc_samples})")
    return 0


def cmd_report(args) -> int:
    d = Path(args.indir)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    runs = load_dir(d)
    if not runs:
        raise UsageError(f"no run CSVs under {d}")
    print(f"{'problem':<22}{'method':<8}{'seeds':>6}{'R_T mean':>12}{'R_T std':>10}")
    for (p, m), (mean, std, n) in summarise(runs).items():
        print(f"{p:<22}{m:<8}{n:>6}{mean:>12.4f}{std:>10.4f}")
    if args.svg:
        render_svg(runs, args.svg, instantaneous=args.instantaneous)
        print(f"wrote {args.svg}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edrbo", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p, with_cell: bool):
        if with_cell:
            p.add_argument("--problem", help=f"one of: {', '.join(PROBLEMS)}")
            p.add_argument("--method", help=f"one of: {', '.join(METHODS)}")
        p.add_argument("--iters", type=int)
        p.add_argument("--n-init", dest="n_init", type=int)
        p.add_argument("--seeds", help="a..b inclusive, or a comma list")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="flat key = value file; flags override it")
        p.add_argument("--oracle-cache", help="oracle sidecar CSV (default OUT/oracle_cache.csv)")
        p.add_argument("--no-timing", action="store_true", help="record wall_ms as 0")

    p = sub.add_parser("run", help="run one (problem, method) cell over seeds")
    run_flags(p, True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench-all", help="every problem and method")
    run_flags(p, False)
    p.set_defaults(func=cmd_bench_all)

    p = sub.add_parser("oracle", help="compute or look up the optimum of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--mc", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-cache")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="summarise run CSVs and plot regret")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--svg")
    p.add_argument("--instantaneous", action="store_true", help="add an r_t row to the plot")
    p.set_defaults(func=cmd_report)
    return ap


def cli_main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"edrbo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("run failed")
        print(f"edrbo {args.command}: failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
