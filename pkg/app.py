import sys
import logging
import argparse
from dataclasses import asdict

# --- Project-specific Imports ---
from config import (
    BIAS_GRID, DEFAULT_BUDGET, DESK_INSTANCES, FULL_SCALE_INSTANCES,
    LOG_FILE, LOG_LEVEL, MAX_MAP_VARS, MIN_MAP_ROOTS, QUALITY_METHODS, WIDTH_CAP, WORKERS,
)
from errors import (
    AssignmentError, ConfigError, NetworkFormatError, WidthCapExceeded, ZeroProbabilityEvidence,
)
from experiments import (
    QualityExperimentConfig, WidthExperimentConfig, eval_stats_table, quality_table,
    run_eval_stats, run_quality_experiment, run_width_experiment, solve, width_frame,
)
from netgen import GenConfig, generate_instance
from network_io import save_instance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2


class _Parser(argparse.ArgumentParser):
    """Reports usage errors with the configuration-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def setup_logging(level=LOG_LEVEL, log_file=LOG_FILE):
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
                        handlers=[
                            logging.FileHandler(log_file),
                            logging.StreamHandler(sys.stdout)
                        ])


# --- Argument helpers ---

def _float_list(text):
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _name_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _evidence(text):
    evidence = {}
    for item in _name_list(text):
        name, sep, value = item.partition("=")
        if not sep or not value.strip().isdigit():
            raise argparse.ArgumentTypeError(f"evidence must look like NAME=VALUE, got {item!r}")
        evidence[name.strip()] = int(value)
    return evidence


def _instances(args):
    if args.instances is not None:
        return args.instances
    return FULL_SCALE_INSTANCES if args.full_scale else DESK_INSTANCES


def _add_common(parser, generator, n, param=None):
    parser.add_argument("--seed", type=int, default=0, help="Master seed.")
    parser.add_argument("--out", help="CSV output path.")
    parser.add_argument("--instances", type=int, help="Instances to generate.")
    parser.add_argument("--full-scale", action="store_true",
                        help=f"Use {FULL_SCALE_INSTANCES} instances unless --instances is given.")
    parser.add_argument("--workers", type=int, default=WORKERS, help="Worker processes.")
    parser.add_argument("--generator", choices=("connectivity", "edge_prob"), default=generator)
    parser.add_argument("--n", type=int, default=n, help="Variables per network.")
    if param is not None:
        parser.add_argument("--param", type=float, default=param,
                            help="Connectivity c or edge probability p, depending on --generator.")
    parser.add_argument("--max-map-vars", type=int, default=MAX_MAP_VARS)


def _add_grid(parser):
    _add_common(parser, "edge_prob", 50, 0.05)
    parser.add_argument("--methods", type=_name_list, default=list(QUALITY_METHODS),
                        help="Comma-separated methods such as Rand-Hill,MPE,Seq-Taboo.")
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="Network evaluations per run.")
    parser.add_argument("--width-cap", type=int, default=WIDTH_CAP,
                        help="Skip instances whose constrained width exceeds this.")


def build_parser():
    parser = _Parser(prog="mapsearch", description="Exact and local-search MAP on Bayesian networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="Generate one instance document.")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Instance JSON path.")
    gen.add_argument("--generator", choices=("connectivity", "edge_prob"), default="edge_prob")
    gen.add_argument("--n", type=int, default=50)
    gen.add_argument("--param", type=float, default=0.05)
    gen.add_argument("--bias", type=float, default=0.5)
    gen.add_argument("--max-map-vars", type=int, default=MAX_MAP_VARS)

    solve_cmd = sub.add_parser("solve", help="Solve the MAP query of a network or instance file.")
    solve_cmd.add_argument("file")
    solve_cmd.add_argument("--map-vars", type=_name_list, help="Comma-separated MAP variable names.")
    solve_cmd.add_argument("--evidence", type=_evidence, help="Comma-separated NAME=VALUE pairs.")
    solve_cmd.add_argument("--method", default="Seq-Taboo", help="'exact' or e.g. Seq-Taboo, MPE, Rand-Hill.")
    solve_cmd.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    solve_cmd.add_argument("--width-cap", type=int, default=WIDTH_CAP)
    solve_cmd.add_argument("--seed", type=int, default=0)

    widths = sub.add_parser("widths", help="Unconstrained vs. constrained min-fill widths.")
    _add_common(widths, "connectivity", 100)
    widths.add_argument("--params", type=_float_list, default=tuple(float(c) for c in range(1, 21)),
                        help="Generator parameters cycled over the instances.")
    widths.add_argument("--min-roots", type=int, default=MIN_MAP_ROOTS)

    quality = sub.add_parser("quality", help="Solved counts per method and bias.")
    _add_grid(quality)
    quality.add_argument("--bias-grid", type=_float_list, default=BIAS_GRID)

    evalstats = sub.add_parser("evalstats", help="Evaluations needed to reach the returned value.")
    _add_grid(evalstats)
    evalstats.add_argument("--bias", type=float, default=0.5)
    return parser


# --- Commands ---

def cmd_gen(args):
    config = GenConfig(
        method=args.generator, n=args.n, bias=args.bias, max_map_vars=args.max_map_vars, rng_seed=args.seed,
        **({"c": args.param} if args.generator == "connectivity" else {"p": args.param}),
    )
    instance = generate_instance(config)
    net = instance.net
    metadata = {
        "seed": args.seed,
        "generator": asdict(config),
        "map_variables": [net.names[v] for v in instance.map_vars],
        "evidence": net.describe(instance.evidence),
    }
    save_instance(args.out, net, metadata)
    print(f"{net.n} variables, {len(instance.map_vars)} MAP variables, {len(instance.evidence)} evidence variables")


def cmd_solve(args):
    report = solve(args.file, args.map_vars, args.evidence, args.method, args.budget, args.seed, args.width_cap)
    for line in report.lines():
        print(line)


def cmd_widths(args):
    config = WidthExperimentConfig(
        instances=_instances(args), generator=args.generator, n=args.n, params=args.params,
        min_roots=args.min_roots, max_map_vars=args.max_map_vars, seed=args.seed, workers=args.workers,
    )
    report = run_width_experiment(config, args.out)
    print(width_frame(report.records, config).drop(columns=["experiment", "seed"]).to_string(index=False))


def _grid_config(args, biases):
    return QualityExperimentConfig(
        instances=_instances(args), generator=args.generator, n=args.n, param=args.param,
        biases=tuple(biases), methods=tuple(args.methods), budget=args.budget, width_cap=args.width_cap,
        max_map_vars=args.max_map_vars, seed=args.seed, workers=args.workers,
    )


def cmd_quality(args):
    report = run_quality_experiment(_grid_config(args, args.bias_grid), args.out)
    print(f"Instances solved correctly out of {report.requested - report.skipped} "
          f"({report.skipped} skipped over the width cap):")
    print(quality_table(report.records).to_string())


def cmd_evalstats(args):
    report = run_eval_stats(_grid_config(args, (args.bias,)), args.bias, args.out)
    print(f"Evaluations to best at bias {args.bias} ({report.skipped} instances skipped):")
    print(eval_stats_table(report.records).to_string(float_format=lambda v: f"{v:.2f}"))


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "widths": cmd_widths,
    "quality": cmd_quality,
    "evalstats": cmd_evalstats,
}


def main(argv=None):
    """Runs one subcommand and returns its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (OSError, NetworkFormatError, AssignmentError, ZeroProbabilityEvidence, WidthCapExceeded) as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT
    except Exception as e:
        logger.error(f"Unexpected failure in '{args.command}': {e}", exc_info=True)
        return EXIT_INPUT
    return EXIT_OK


# --- Main Application Logic ---
if __name__ == "__main__":
    sys.exit(main())
