import argparse
import json
import logging
import os
import sys
import time
from typing import List, Optional, Sequence

import pandas as pd

from . import __version__
from .core.config import AppConfig, CONFIG_FILENAME
from .core.engine import run_permutation_test
from .core.errors import ConfigError, PermfitError, ReportError
from .core.ingest import default_fourier_k, ingest_csv, ingest_functional
from .core.models import MAX_SEED
from .core.regressors import MLP, MODEL_KINDS, OLS
from .core.reporting import (RunManifest, round_trip_float, emit_report, emit_scatter_svg, emit_sweep_report, file_digest,
                             format_for, load_manifest, load_outcome, load_sweep, manifest_path,
                             verify_inputs, write_manifest)
from .core.scenarios import SIGNATURES, ScenarioSpec, generate
from .core.simstudy import (AXES, PermutationProcedure, RankProcedure, SweepPlan, compare_tests,
                            default_grid, demo_example)
from .core.statistics import RANK_METHODS, STATISTIC_NAMES, get_statistic

# --- Logging setup ---
# Define logger format
log_formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

logger = logging.getLogger(__name__)  # Logger for this module

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_installed_handlers: List[logging.Handler] = []  # handlers added by setup_logging, replaced on every call


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    """Console handler on stderr (stdout carries the result line), optional file handler."""
    root_logger = logging.getLogger()
    for handler in _installed_handlers:
        root_logger.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()
    root_logger.setLevel(level)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(log_formatter)
    console_handler.setLevel(level)
    root_logger.addHandler(console_handler)
    _installed_handlers.append(console_handler)

    if log_file:
        try:
            file_handler = logging.FileHandler(log_file, mode='a')  # Append mode
            file_handler.setFormatter(log_formatter)
            file_handler.setLevel(logging.DEBUG)  # Log DEBUG level and above to file
            root_logger.addHandler(file_handler)
            _installed_handlers.append(file_handler)
            root_logger.setLevel(logging.DEBUG)
            logger.info(f"File logging enabled to {log_file}")
        except OSError as e:
            logger.error(f"Failed to set up file logging: {e}")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1 (argparse would use 2, which is reserved for runtime errors)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _test_options(parser: argparse.ArgumentParser):
    parser.add_argument("--model", choices=MODEL_KINDS, default=OLS, help="Reference model class.")
    parser.add_argument("--statistic", choices=STATISTIC_NAMES, default="r2", help="Goodness-of-fit statistic.")
    parser.add_argument("--alpha", type=float, help="Significance level (config: alpha).")
    parser.add_argument("--permutations", type=int, help="Number of sampled permutations B (config: n_permutations).")
    parser.add_argument("--seed", type=int, help="Master seed (config: master_seed).")
    parser.add_argument("--exhaustive", action="store_true", help="Enumerate all n! permutations (n <= 8).")
    parser.add_argument("--threads", type=int, help="Worker threads; results do not depend on it.")


def _scenario_options(parser: argparse.ArgumentParser, require_axis: bool):
    parser.add_argument("--scenario", required=True, choices=sorted(SIGNATURES))
    parser.add_argument("--n", type=int, default=100, help="Sample size per dataset.")
    parser.add_argument("--a", type=float, help="Mean of X (lognormal_univariate, log_quad_mean_sweep).")
    parser.add_argument("--rho", type=float, help="Correlation (bivariate_normal).")
    parser.add_argument("--sd2", type=float, help="Standard deviation of X2 (log_quad_mean_sweep).")
    parser.add_argument("--noise-sd", dest="noise_sd", type=float, help="Standard deviation of the noise.")
    if require_axis:
        parser.add_argument("--axis", required=True, choices=AXES, help="Scenario parameter to sweep.")
        parser.add_argument("--grid", help="Comma-separated grid values (default: the axis' standard range).")
        parser.add_argument("--replications", type=int, help="Replicates per grid point (config: sweep_replications).")
        parser.add_argument("--scatter", help="Also write an SVG of observed statistic against quantile.")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="permfit",
                             description="Permutation test of whether a regression model class fits more than noise.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=CONFIG_FILENAME, help="YAML configuration file.")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Overrides log_level.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    test = subparsers.add_parser("test", help="Run the test on a CSV dataset.")
    test.add_argument("data", help="CSV table (with --series: the per-observation table keyed by obs_id).")
    test.add_argument("--response", help="Response column name.")
    test.add_argument("--series", help="Long-format series CSV (obs_id, channel, t_index, value).")
    test.add_argument("--fourier-k", dest="fourier_k", type=int, help="Harmonics per channel (config: fourier_k).")
    test.add_argument("--va-index", dest="va_index", nargs=2, metavar=("VELOCITY", "POINTS"),
                      help="Use the VA index of these two columns as the response (with --series).")
    _test_options(test)
    test.add_argument("--out", action="append", help="Output file; format from extension (json, csv, svg). Repeatable.")

    sweep = subparsers.add_parser("sweep", help="Rejection-rate sweep over a scenario parameter.")
    _scenario_options(sweep, require_axis=True)
    _test_options(sweep)
    sweep.add_argument("--out", action="append", help="Output file (json, csv, svg). Repeatable.")

    compare = subparsers.add_parser("compare", help="Paired comparison of several tests on the same replicates.")
    _scenario_options(compare, require_axis=True)
    _test_options(compare)
    compare.add_argument("--tests", nargs="+", required=True,
                         help="Tests to compare: STAT/MODEL (e.g. r2/ols), tstar, spearman:J or kendall:J (J 1-based column).")
    compare.add_argument("--out", action="append", help="Output file (json, csv, svg). Repeatable.")

    simulate = subparsers.add_parser("simulate", help="Write one synthetic dataset as CSV.")
    _scenario_options(simulate, require_axis=False)
    simulate.add_argument("--seed", type=int, default=0, help="Dataset seed.")
    simulate.add_argument("--out", action="append", help="Output CSV path.")

    report = subparsers.add_parser("report", help="Re-render a saved outcome or sweep JSON.")
    report.add_argument("input", help="Outcome or sweep JSON written by test, sweep, compare or demo.")
    report.add_argument("--out", action="append", required=True, help="Output file (json, csv, svg). Repeatable.")
    report.add_argument("--scatter", help="For sweeps: SVG of observed statistic against quantile.")

    demo = subparsers.add_parser("demo", help="The n=10 example: Y = X1^2 + X2^2 + noise.")
    _test_options(demo)
    demo.set_defaults(model=MLP)
    demo.add_argument("--n", type=int, default=10)
    demo.add_argument("--out", action="append", help="Output file (json, csv, svg). Repeatable.")

    replay = subparsers.add_parser("replay", help="Re-run a recorded run and check its outputs are reproduced.")
    replay.add_argument("manifest", help="A .manifest.json written beside a result.")
    return parser


# --- Helpers ---

def _effective_config(cfg: AppConfig, args) -> AppConfig:
    """Command-line flags override configuration values."""
    overrides = {
        "alpha": getattr(args, "alpha", None),
        "n_permutations": getattr(args, "permutations", None),
        "master_seed": getattr(args, "seed", None) if args.command != "simulate" else None,
        "threads": getattr(args, "threads", None),
        "fourier_k": getattr(args, "fourier_k", None),
        "sweep_replications": getattr(args, "replications", None),
        "log_level": getattr(args, "log_level", None),
    }
    merged = cfg.to_dict()
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return AppConfig(**merged)


def _scenario(args, seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec(args.scenario, n=args.n, seed=seed, a=args.a, rho=args.rho,
                        sd2=args.sd2, noise_sd=args.noise_sd)


def _grid(args, cfg: AppConfig):
    if args.grid:
        try:
            return tuple(float(v) for v in args.grid.split(","))
        except ValueError as e:
            raise ConfigError(f"Cannot parse --grid '{args.grid}': {e}") from e
    return default_grid(args.axis, cfg.sweep_grid_steps)


def _procedure(token: str, cfg: AppConfig):
    name, _, argument = token.partition(":")
    if name in RANK_METHODS:
        try:
            column = int(argument) - 1 if argument else 0
        except ValueError as e:
            raise ConfigError(f"Rank test column must be an integer, got '{token}'.") from e
        if column < 0:
            raise ConfigError(f"Rank test column must be 1-based, got '{token}'.")
        return RankProcedure(name, column)
    stat_name, _, kind = token.partition("/")
    if stat_name not in STATISTIC_NAMES or (kind and kind not in MODEL_KINDS):
        raise ConfigError(f"Unknown test '{token}'.")
    return PermutationProcedure(cfg.to_regressor_spec(kind or OLS), get_statistic(stat_name, cfg.huber_delta))


def _outputs(args, default: str) -> List[str]:
    outputs = args.out or [default]
    try:
        for path in outputs:
            format_for(path)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return outputs


# --- Subcommands; each returns (outputs written, input files read) ---

def cmd_test(args, cfg: AppConfig):
    outputs = _outputs(args, "outcome.json")
    inputs = [args.data]
    if args.series:
        inputs.append(args.series)
        if bool(args.response) == bool(args.va_index):
            raise ConfigError("With --series give exactly one of --response or --va-index.")
        k = cfg.fourier_k or default_fourier_k(args.series)
        _, data = ingest_functional(args.series, args.data, k, response_column=args.response,
                                    va_columns=tuple(args.va_index) if args.va_index else None)
    else:
        if not args.response:
            raise ConfigError("--response is required.")
        if args.va_index:
            raise ConfigError("--va-index needs --series.")
        data = ingest_csv(args.data, args.response)

    spec = cfg.to_regressor_spec(args.model)
    statistic = get_statistic(args.statistic, cfg.huber_delta)
    logger.info(f"Running the permutation test: {spec.describe()}, statistic '{statistic.name}'.")
    outcome = run_permutation_test(data, spec, statistic, cfg.to_test_config(args.exhaustive), cfg.threads)
    for path in outputs:
        emit_report(outcome, None, path, cfg.histogram_bins)
    print(outcome.summary())
    return outputs, inputs


def _run_sweep(args, cfg: AppConfig, procedures, default_out: str, show_quantiles: bool = False):
    outputs = _outputs(args, default_out)
    plan = SweepPlan(_scenario(args), args.axis, _grid(args, cfg))
    config = cfg.to_test_config(args.exhaustive)
    results = compare_tests(plan, procedures, config, cfg.sweep_replications, cfg.threads)
    settings = {**config.to_dict(), "tests": [p.label for p in procedures]}
    for path in outputs:
        emit_sweep_report(results, None, path, scenario=plan.scenario.to_dict(), config=settings)
    if getattr(args, "scatter", None):
        emit_scatter_svg(results[0], args.scatter)
        outputs.append(args.scatter)
    for result in results:
        rates = ", ".join(f"{v:g}:{r:.3f}" for v, r in zip(result.grid, result.rejection_rate))
        print(f"{result.label}: {rates}")
    if show_quantiles:
        # Same replicates for every test: a model class that overfits noise shows a higher quantile
        print(f"mean {1 - config.alpha:.0%} quantile of the permutation reference:")
        for result in results:
            quantiles = ", ".join(f"{v:g}:{q:.3f}" for v, q in zip(result.grid, result.mean_quantile()))
            print(f"{result.label}: {quantiles}")
    return outputs, []


def cmd_sweep(args, cfg: AppConfig):
    procedure = PermutationProcedure(cfg.to_regressor_spec(args.model), get_statistic(args.statistic, cfg.huber_delta))
    return _run_sweep(args, cfg, [procedure], "sweep.json")


def cmd_compare(args, cfg: AppConfig):
    return _run_sweep(args, cfg, [_procedure(token, cfg) for token in args.tests], "compare.json",
                      show_quantiles=True)


def cmd_simulate(args, cfg: AppConfig):
    if not 0 <= args.seed <= MAX_SEED:
        raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {args.seed}.")
    data = generate(_scenario(args, seed=args.seed))
    columns = {f"x{j + 1}": data.column(j) for j in range(data.d)}
    frame = pd.DataFrame({**columns, "y": data.responses})
    outputs = args.out or ["dataset.csv"]
    for path in outputs:
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            frame.to_csv(path, index=False, float_format=round_trip_float, lineterminator="\n")
        except OSError as e:
            raise ReportError(f"Cannot write '{path}': {e}") from e
        logger.info(f"Wrote {args.scenario} dataset (n={data.n}, d={data.d}) to '{path}'.")
    return outputs, []


def cmd_report(args, cfg: AppConfig):
    outputs = _outputs(args, "")
    try:
        with open(args.input, "r", encoding="utf-8") as f:
            is_sweep = "results" in json.load(f)
    except (OSError, ValueError) as e:
        raise ReportError(f"Cannot read '{args.input}': {e}") from e

    if is_sweep:
        results = load_sweep(args.input)
        for path in outputs:
            emit_sweep_report(results, None, path)
        if args.scatter:
            emit_scatter_svg(results[0], args.scatter)
            outputs.append(args.scatter)
    else:
        if args.scatter:
            raise ConfigError("--scatter applies to sweep results only.")
        outcome = load_outcome(args.input)
        for path in outputs:
            emit_report(outcome, None, path, cfg.histogram_bins)
        print(outcome.summary())
    return outputs, [args.input]


def cmd_demo(args, cfg: AppConfig):
    spec = cfg.to_regressor_spec(args.model)
    statistic = get_statistic(args.statistic, cfg.huber_delta)
    _, outcome = demo_example(spec, statistic, cfg.to_test_config(args.exhaustive), n=args.n, threads=cfg.threads)
    outputs = _outputs(args, "demo.json")
    for path in outputs:
        emit_report(outcome, None, path, cfg.histogram_bins)
    exceeding = int((outcome.reference_array > outcome.r0).sum())
    print(outcome.summary())
    print(f"{exceeding} of {outcome.n_reference} permuted fits scored higher than the original pairing.")
    return outputs, []


def cmd_replay(args, cfg: AppConfig) -> int:
    manifest = load_manifest(args.manifest)
    if manifest.tool_version != __version__:
        logger.warning(f"Manifest was written by permfit {manifest.tool_version}, this is {__version__}.")
    previous_cwd = os.getcwd()
    os.chdir(manifest.cwd or previous_cwd)
    try:
        verify_inputs(manifest)
        code = main(manifest.command)
        if code != EXIT_OK:
            raise ReportError(f"Replayed command exited with status {code}.")
        changed = [path for path, digest in manifest.outputs.items() if file_digest(path) != digest]
    finally:
        os.chdir(previous_cwd)
    if changed:
        raise ReportError(f"Replay produced different output for {changed}.")
    print(f"Reproduced {len(manifest.outputs)} output(s) of '{args.manifest}'.")
    return EXIT_OK


COMMANDS = {
    "test": cmd_test,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "report": cmd_report,
    "demo": cmd_demo,
}


def _record_manifest(argv: Sequence[str], cfg: AppConfig, config_path: str, outputs: List[str],
                     inputs: List[str], started: float):
    """Writes <first output>.manifest.json."""
    if os.path.exists(config_path):
        inputs = [config_path] + list(inputs)
    manifest = RunManifest(
        command=list(argv),
        config=cfg.to_dict(),
        master_seed=cfg.master_seed,
        tool_version=__version__,
        cwd=os.getcwd(),
        inputs={path: file_digest(path) for path in inputs},
        outputs={path: file_digest(path) for path in outputs},
        duration_seconds=round(time.monotonic() - started, 3),
    )
    write_manifest(manifest, outputs[0])


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function to parse arguments and run one subcommand. Returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help, --version and usage errors
        return int(e.code or 0)

    started = time.monotonic()
    try:
        cfg = _effective_config(AppConfig.load(args.config), args)
    except ConfigError as e:
        setup_logging()
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    setup_logging(cfg.log_level, cfg.log_file)
    logger.debug(f"permfit {__version__}: {' '.join(argv)}")

    try:
        if args.command == "replay":
            return cmd_replay(args, cfg)
        outputs, inputs = COMMANDS[args.command](args, cfg)
        _record_manifest(argv, cfg, args.config, outputs, inputs, started)
    except ConfigError as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except (PermfitError, OSError, ValueError) as e:  # ValueError: numerics outside the typed errors
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return EXIT_RUNTIME

    logger.info(f"{args.command} finished in {time.monotonic() - started:.1f}s.")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
