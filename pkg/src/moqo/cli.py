"""Command line front end.

Subcommands:
  run     execute a benchmark experiment and write CSV results
  stats   report climb path lengths and Pareto-set sizes per table count
  oracle  print the exact or DP frontier of one generated instance

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
failures (I/O, budget-infeasible oracle runs, internal errors).
"""

from __future__ import annotations

import argparse
import configparser
import sys

from .baselines import dp_frontier, exhaustive_frontier
from .costmodel import CostModel, Topology
from .harness import (
    BASE_ALGORITHMS,
    ClimbStatsConfig,
    ExperimentConfig,
    ReferenceMode,
    climb_stats,
    parse_catalog_spec,
    run_experiment,
)
from .querygen import GenSpec, SelectivityMode, generate_query


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems with exit code 1."""

    def error(self, message: str) -> None:  # noqa: D102
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _parse_seeds(raw: str) -> tuple:
    """Accept comma-separated ints and inclusive A-B ranges."""
    seeds: list = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        sep = token.find("-", 1)
        if sep != -1:
            try:
                start, stop = int(token[:sep]), int(token[sep + 1 :])
            except ValueError as exc:
                raise _ConfigError(f"bad seed range {token!r}") from exc
            if stop < start:
                raise _ConfigError(f"empty seed range {token!r}")
            seeds.extend(range(start, stop + 1))
        else:
            try:
                seeds.append(int(token))
            except ValueError as exc:
                raise _ConfigError(f"bad seed {token!r}") from exc
    if not seeds:
        raise _ConfigError("no seeds given")
    return tuple(seeds)


def _enum_value(cls, raw: str, what: str):
    try:
        return cls(raw)
    except ValueError as exc:
        choices = ", ".join(member.value for member in cls)
        raise _ConfigError(f"unknown {what} {raw!r}; choose from {choices}") from exc


def _add_instance_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--topology",
        default=None,
        help="join graph shape: chain, cycle, or star (default chain)",
    )
    parser.add_argument(
        "--selectivity",
        default=None,
        help="edge selectivity sampler: steinbrunn or minmax (default steinbrunn)",
    )
    parser.add_argument(
        "--metrics",
        type=int,
        default=None,
        help="number of cost metrics to optimize, 1-3 (default 3)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moqo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a benchmark experiment")
    run.add_argument("--config", default=None, help="INI config file; flags override it")
    run.add_argument("--tables", type=int, default=None, help="tables per query")
    _add_instance_flags(run)
    run.add_argument(
        "--algos",
        default=None,
        help=f"comma list of {', '.join(BASE_ALGORITHMS)}, dp:<alpha>",
    )
    run.add_argument("--budget-ms", type=float, default=None, help="time budget per run")
    run.add_argument(
        "--budget-iters", type=int, default=None, help="iteration budget per run"
    )
    run.add_argument(
        "--sample-ms",
        type=float,
        default=None,
        help="sampling interval (iterations under --budget-iters)",
    )
    run.add_argument("--seeds", default=None, help="comma list and/or A-B ranges")
    run.add_argument(
        "--reference", default=None, help="reference frontier mode: union or exact"
    )
    run.add_argument("--out", default=None, help="samples CSV path")

    stats = sub.add_parser(
        "stats", help="climb path and Pareto-set statistics"
    )
    stats.add_argument(
        "--tables", default=None, help="comma list of table counts (default 10,25,50,100)"
    )
    _add_instance_flags(stats)
    stats.add_argument("--seeds", default=None, help="comma list and/or A-B ranges")
    stats.add_argument(
        "--rmq-iters",
        type=int,
        default=None,
        help="optimizer iterations for Pareto-set sizes (0 skips them)",
    )

    oracle = sub.add_parser(
        "oracle", help="print a reference frontier"
    )
    oracle.add_argument("--tables", type=int, required=True, help="tables per query")
    _add_instance_flags(oracle)
    oracle.add_argument("--seed", type=int, default=0, help="instance seed")
    oracle.add_argument(
        "--alpha",
        type=float,
        default=None,
        help="DP approximation factor; omitted runs the exhaustive oracle",
    )
    return parser


_CONFIG_KEYS = {
    "tables": int,
    "topology": str,
    "selectivity": str,
    "metrics": int,
    "algos": str,
    "budget_ms": float,
    "budget_iters": int,
    "sample_ms": float,
    "seeds": str,
    "reference": str,
    "out": str,
}


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise _ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise _ConfigError(f"malformed config file {path!r}: {exc}") from exc
    out: dict = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            if key not in _CONFIG_KEYS:
                raise _ConfigError(f"unknown config key {key!r} in {path!r}")
            try:
                out[key] = _CONFIG_KEYS[key](raw)
            except ValueError as exc:
                raise _ConfigError(f"bad value for {key!r} in {path!r}: {raw}") from exc
    if parser.has_section("catalog"):
        scans = parser.get("catalog", "scan_ops", fallback="")
        joins = parser.get("catalog", "join_ops", fallback="")
        try:
            out["catalog"] = parse_catalog_spec(scans, joins)
        except (ValueError, KeyError) as exc:
            raise _ConfigError(f"bad catalog in {path!r}: {exc}") from exc
    return out


def _merged(args: argparse.Namespace, key: str, file_cfg: dict, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_cfg:
        return file_cfg[key]
    return default


def _cmd_run(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config) if args.config else {}
    budget_ms = _merged(args, "budget_ms", file_cfg, None)
    budget_iters = _merged(args, "budget_iters", file_cfg, None)
    if budget_ms is None and budget_iters is None:
        budget_ms = 3000.0
    algos_raw = _merged(args, "algos", file_cfg, ",".join(BASE_ALGORITHMS))
    seeds_raw = _merged(args, "seeds", file_cfg, "0-19")
    try:
        cfg = ExperimentConfig(
            n=_merged(args, "tables", file_cfg, 10),
            topology=_enum_value(
                Topology, _merged(args, "topology", file_cfg, "chain"), "topology"
            ),
            selectivity_mode=_enum_value(
                SelectivityMode,
                _merged(args, "selectivity", file_cfg, "steinbrunn"),
                "selectivity mode",
            ),
            metrics_count=_merged(args, "metrics", file_cfg, 3),
            algorithms=tuple(
                tok.strip() for tok in str(algos_raw).split(",") if tok.strip()
            ),
            budget_ms=budget_ms,
            budget_iters=budget_iters,
            sample_interval=_merged(args, "sample_ms", file_cfg, 100.0),
            seeds=_parse_seeds(str(seeds_raw)),
            reference_mode=_enum_value(
                ReferenceMode,
                _merged(args, "reference", file_cfg, "union"),
                "reference mode",
            ),
            output_path=_merged(args, "out", file_cfg, None),
            catalog=file_cfg.get("catalog"),
        )
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc
    samples, aggregates = run_experiment(cfg)
    if not cfg.output_path:
        print("algorithm,seed,elapsed_ms,alpha_error")
        for s in samples:
            err = "inf" if s.alpha_error == float("inf") else repr(s.alpha_error)
            print(f"{s.algorithm},{s.seed},{s.elapsed_ms:g},{err}")
    else:
        print(f"wrote {len(samples)} samples to {cfg.output_path}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    raw_tables = args.tables or "10,25,50,100"
    try:
        table_counts = tuple(int(tok) for tok in raw_tables.split(",") if tok.strip())
    except ValueError as exc:
        raise _ConfigError(f"bad table counts {raw_tables!r}") from exc
    try:
        cfg = ClimbStatsConfig(
            table_counts=table_counts,
            topology=_enum_value(Topology, args.topology or "chain", "topology"),
            selectivity_mode=_enum_value(
                SelectivityMode, args.selectivity or "steinbrunn", "selectivity mode"
            ),
            metrics_count=args.metrics if args.metrics is not None else 3,
            seeds=_parse_seeds(args.seeds) if args.seeds else tuple(range(20)),
            rmq_iterations=args.rmq_iters if args.rmq_iters is not None else 0,
        )
        rows = climb_stats(cfg)
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc
    print("n,median_path_length,median_pareto_size")
    for row in rows:
        size = row["median_pareto_size"]
        print(f"{row['n']},{row['median_path_length']:g},{'' if size is None else f'{size:g}'}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    try:
        spec = GenSpec(
            n=args.tables,
            topology=_enum_value(Topology, args.topology or "chain", "topology"),
            selectivity_mode=_enum_value(
                SelectivityMode, args.selectivity or "steinbrunn", "selectivity mode"
            ),
            seed=args.seed,
        )
        metrics = tuple(range(args.metrics)) if args.metrics is not None else (0, 1, 2)
        model = CostModel(generate_query(spec), None, metrics)
        if args.alpha is not None and args.alpha < 1.0:
            raise ValueError("alpha must be >= 1")
        if args.alpha is None and args.tables > 7:
            raise ValueError(
                "exhaustive oracle supports at most 7 tables; pass --alpha to use DP"
            )
    except ValueError as exc:
        raise _ConfigError(str(exc)) from exc
    if args.alpha is None:
        archive = exhaustive_frontier(model)
    else:
        archive = dp_frontier(model, args.alpha)
    costs = sorted(archive.costs())
    print(",".join(f"metric{k}" for k in metrics))
    for cost in costs:
        print(",".join(repr(c) for c in cost))
    return 0


def main(argv: list | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"run": _cmd_run, "stats": _cmd_stats, "oracle": _cmd_oracle}[args.command]
    try:
        return handler(args)
    except _ConfigError as exc:
        print(f"moqo: config error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"moqo: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
