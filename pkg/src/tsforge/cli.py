"""Command-line entry point: ``tsforge generate | validate | inspect``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import load_config, with_seed
from .dataset_io import describe_manifest, load_manifest, write_dataset
from .engine import build_manual_system, generate
from .errors import ConfigError, TsforgeError
from .graph import generate_graph, validate_graph
from .anomalies import plan_anomalies
from .params import ManualSpec
from .rng import substream

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a dataset from a config file")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.add_argument("--plot", action="store_true", help="also write plot.svg")

    val = sub.add_parser("validate", help="check a config without generating data")
    val.add_argument("--config", required=True)
    val.add_argument("--seed", type=int, default=None)

    ins = sub.add_parser("inspect", help="summarise a written metadata.json")
    ins.add_argument("--manifest", required=True)
    return parser


def _load(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    return config


def _generate(args) -> int:
    config = _load(args)
    result = generate(config)
    path = write_dataset(result, args.out)
    if args.plot:
        from .plot import emit_plot

        emit_plot(result, None, path.parent / "plot.svg")
    print(f"wrote {path.parent}")
    return EXIT_OK


def _validate(args) -> int:
    config = _load(args)
    if isinstance(config, ManualSpec):
        graph, system = build_manual_system(config)
        print(f"manual config ok: d={config.d}, {len(graph.edges)} edges, "
              f"{len(system.anomalies)} anomalies")
        return EXIT_OK
    graph = generate_graph(config, substream(config.seed, "graph"))
    violations = validate_graph(graph, config)
    if violations:
        for v in violations:
            print(f"graph violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    plan = plan_anomalies(config, substream(config.seed, "plan"))
    print(f"automatic config ok: d={config.d}, {len(graph.edges)} edges, {len(plan)} anomaly windows "
          f"covering {sum(b - a for a, b, _ in plan)} points")
    return EXIT_OK


def _inspect(args) -> int:
    sys.stdout.write(describe_manifest(load_manifest(args.manifest)))
    return EXIT_OK


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"generate": _generate, "validate": _validate, "inspect": _inspect}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TsforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_INVALID


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
