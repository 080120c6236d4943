"""
    Command-line entry point.

    Commands: generate, train, eval, solve, convergence, compare, sweep.
    Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from monotone_peridynamics.automations.comparison import COMPARISON_HEADER, compare_stretch_architectures
from monotone_peridynamics.automations.convergence import (
    LEAST_SQUARES,
    TRAINED,
    run_convergence_study,
    write_convergence_outputs,
)
from monotone_peridynamics.automations.evaluation import METRIC_HEADER, dataset_truth, evaluate_model
from monotone_peridynamics.automations.sweep import SWEEP_HEADER, run_sweep
from monotone_peridynamics.config import config
from monotone_peridynamics.integrations.checkpoint_store import load_checkpoint, save_checkpoint
from monotone_peridynamics.integrations.dataset_store import encode_field, read_dataset, write_dataset
from monotone_peridynamics.schemas.config_schema import (
    RunConfig,
    TrainConfig,
    build_configs,
    load_key_value_file,
)
from monotone_peridynamics.schemas.enums import GeneratorTag, PhaseMode, SplitName, StretchArchitecture
from monotone_peridynamics.services.constitutive import ConstitutiveModel
from monotone_peridynamics.services.datagen import FieldDataset, generate_dataset
from monotone_peridynamics.services.solver import two_phase_solve
from monotone_peridynamics.services.training import build_model, train
from monotone_peridynamics.utils.csv_tables import write_csv
from monotone_peridynamics.utils.exceptions import (
    ConfigurationError,
    MPNOError,
    SolverFailure,
    TrainingDivergedError,
)
from monotone_peridynamics.utils.logger import setup_logging
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager('app')


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems as ConfigurationError instead of exiting."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _default_split(n: int) -> Tuple[int, int, int]:
    train = int(round(0.75 * n))
    valid = int(round(0.125 * n))
    return train, valid, n - train - valid


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="mpno", description="Learn monotone peridynamic constitutive laws from data")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS,
                        help="worker cap for per-sample solves (default: MPNO_THREADS or 1)")
    parser.add_argument("--config", type=Path, help="key = value file with train/solver/network settings")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    generate = commands.add_parser("generate", help="generate a synthetic dataset")
    generate.add_argument("--example", required=True, choices=[t.value for t in GeneratorTag if t != GeneratorTag.EXTERNAL])
    generate.add_argument("--out", required=True, type=Path)
    generate.add_argument("--n", type=int, default=sum(config.DEFAULT_SPLIT_SIZES))
    generate.add_argument("--split", type=_int_list, help="train,valid,test sizes (default 75/12.5/12.5%%)")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--J", type=int, dest="max_frequency", help="maximum frequency (default 40, 5 with --ood)")
    generate.add_argument("--ood", action="store_true", help="low-frequency out-of-distribution loading")
    generate.add_argument("--fine-dx", type=float, default=config.DEFAULT_FINE_SPACING)
    generate.add_argument("--nx", type=int, default=config.DEFAULT_MEASUREMENT_POINTS)
    generate.add_argument("--delta", type=float, default=config.DEFAULT_HORIZON)
    generate.add_argument("--c", type=float, default=config.DEFAULT_KERNEL_CONSTANT)
    generate.add_argument("--amplitude", type=float, default=config.DEFAULT_COEFFICIENT_AMPLITUDE)
    generate.add_argument("--slope", help="lo,hi range of the linear term, or 'none' (default: on for sine only)")
    generate.add_argument("--dimension", type=int, choices=[1, 2], default=1)

    def training_flags(sub):
        sub.add_argument("--case", type=int, choices=[1, 2, 3])
        sub.add_argument("--epochs", type=int)
        sub.add_argument("--lr", type=float, dest="learning_rate")
        sub.add_argument("--batch-size", type=int)
        sub.add_argument("--patience", type=int)
        sub.add_argument("--g-arch", choices=[a.value for a in StretchArchitecture])
        sub.add_argument("--seed", type=int)
        sub.add_argument("--gradient-check", action="store_true", default=None)

    def solver_flags(sub):
        phase = sub.add_mutually_exclusive_group()
        phase.add_argument("--one-phase", action="store_const", const=PhaseMode.ONE_PHASE, dest="phase")
        phase.add_argument("--small-only", action="store_const", const=PhaseMode.SMALL_ONLY, dest="phase")

    train_cmd = commands.add_parser("train", help="train a model; writes model.ckpt and history.csv")
    train_cmd.add_argument("--data", required=True, type=Path)
    train_cmd.add_argument("--out", required=True, type=Path)
    training_flags(train_cmd)

    eval_cmd = commands.add_parser("eval", help="evaluate a checkpoint; writes metrics.csv")
    eval_cmd.add_argument("--data", required=True, type=Path)
    eval_cmd.add_argument("--checkpoint", required=True, type=Path)
    eval_cmd.add_argument("--out", required=True, type=Path)
    eval_cmd.add_argument("--no-solve", action="store_true", help="skip the E_u solves")
    solver_flags(eval_cmd)

    solve = commands.add_parser("solve", help="solve one sample; writes u_solved.f64 and diagnostics.csv")
    solve.add_argument("--data", required=True, type=Path)
    solve.add_argument("--checkpoint", required=True, type=Path)
    solve.add_argument("--out", required=True, type=Path)
    solve.add_argument("--split", choices=[s.value for s in SplitName], default=SplitName.TEST.value)
    solve.add_argument("--index", type=int, default=0)
    solver_flags(solve)

    convergence = commands.add_parser("convergence", help="mesh-refinement study; writes CSV tables and an SVG")
    convergence.add_argument("--example", required=True, choices=[t.value for t in GeneratorTag if t != GeneratorTag.EXTERNAL])
    convergence.add_argument("--out", required=True, type=Path)
    convergence.add_argument("--method", choices=[LEAST_SQUARES, TRAINED], default=LEAST_SQUARES)
    convergence.add_argument("--dx", type=_float_list, help="comma separated spacings (default 2^-5..2^-8)")
    convergence.add_argument("--n", type=int, default=40)
    convergence.add_argument("--fine-dx", type=float, default=config.CONVERGENCE_FINE_SPACING)
    convergence.add_argument("--J", type=int, dest="max_frequency", default=config.DEFAULT_MAX_FREQUENCY)
    training_flags(convergence)

    compare = commands.add_parser("compare", help="MGN against MLP for g; writes comparison.csv")
    compare.add_argument("--data", required=True, type=Path)
    compare.add_argument("--out", required=True, type=Path)
    training_flags(compare)
    solver_flags(compare)

    sweep = commands.add_parser("sweep", help="hyperparameter grid; writes sweep.csv")
    sweep.add_argument("--data", required=True, type=Path)
    sweep.add_argument("--out", required=True, type=Path)
    sweep.add_argument("--widths", type=_int_list, default=list(config.SWEEP_WIDTHS))
    sweep.add_argument("--depths", type=_int_list, default=list(config.SWEEP_DEPTHS))
    sweep.add_argument("--lrs", type=_float_list, default=list(config.SWEEP_LEARNING_RATES))
    training_flags(sweep)
    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then explicit flags."""
    values = load_key_value_file(args.config) if args.config else {}
    train_settings, solver_settings, network = build_configs(values)

    train_overrides = {key: getattr(args, key) for key in
                       ("case", "epochs", "learning_rate", "batch_size", "patience", "seed", "gradient_check")
                       if getattr(args, key, None) is not None}
    if getattr(args, "g_arch", None):
        network = network.model_copy(update={"g_arch": StretchArchitecture(args.g_arch)})
    if getattr(args, "phase", None):
        solver_settings = solver_settings.model_copy(update={"phase": args.phase})
    try:
        train_settings = TrainConfig(**{**train_settings.model_dump(), **train_overrides})
        return RunConfig(command=args.command, data=getattr(args, "data", None),
                         checkpoint=getattr(args, "checkpoint", None), output=args.out,
                         seed=train_settings.seed, threads=args.threads,
                         train=train_settings, solver=solver_settings, network=network)
    except ValueError as error:
        raise ConfigurationError(f"Invalid arguments: {error}") from error


def _require_dir(path: Optional[Path], what: str) -> Path:
    if path is None or not path.exists():
        raise ConfigurationError(f"{what} not found: {path}")
    return path


def _truth_for_training(dataset: FieldDataset, settings: TrainConfig) -> ConstitutiveModel:
    truth = dataset_truth(dataset)
    if truth is None:
        if settings.case != 3:
            raise ConfigurationError("Cases 1 and 2 freeze part of the model to the analytic truth, "
                                     "which external datasets do not have")
        return ConstitutiveModel(None, None)
    return truth


def cmd_generate(args, run: RunConfig):
    generator = GeneratorTag(args.example)
    split = tuple(args.split) if args.split else _default_split(args.n)
    max_frequency = args.max_frequency or (config.OOD_MAX_FREQUENCY if args.ood else config.DEFAULT_MAX_FREQUENCY)
    if args.slope is None:
        slope = config.DEFAULT_SLOPE_RANGE if generator == GeneratorTag.SINE else None
    elif args.slope.lower() == "none":
        slope = None
    else:
        bounds = _float_list(args.slope)
        if len(bounds) != 2:
            raise ConfigurationError("--slope expects 'lo,hi' or 'none'")
        slope = tuple(bounds)
    dataset = generate_dataset(generator, n_samples=args.n, fine_spacing=args.fine_dx, measurement_points=args.nx,
                               horizon=args.delta, constant=args.c, split_sizes=split, seed=args.seed,
                               max_frequency=max_frequency, amplitude=args.amplitude, slope_range=slope,
                               dimension=args.dimension)
    write_dataset(dataset, args.out)


def cmd_train(args, run: RunConfig):
    dataset = read_dataset(_require_dir(run.data, "Dataset"))
    settings = run.train
    truth = _truth_for_training(dataset, settings)
    model = build_model(run.network, settings.learnable, truth, dataset.manifest.dimension, settings.seed)
    checkpoint = run.output / "model.ckpt"

    def on_improvement(best, epoch):
        save_checkpoint(best, checkpoint)

    try:
        best, history = train(model, dataset.split(SplitName.TRAIN), dataset.split(SplitName.VALID), settings,
                              on_improvement=on_improvement)
    except TrainingDivergedError as error:
        save_checkpoint(error.best_model, checkpoint)
        write_csv(run.output / "history.csv", ["epoch", "train_loss", "valid_Eb", "lr"], error.history.rows())
        raise
    save_checkpoint(best, checkpoint)
    write_csv(run.output / "history.csv", ["epoch", "train_loss", "valid_Eb", "lr"], history.rows())


def cmd_eval(args, run: RunConfig):
    dataset = read_dataset(_require_dir(run.data, "Dataset"))
    model = load_checkpoint(run.checkpoint)
    rows = evaluate_model(model, dataset, solver=None if args.no_solve else run.solver, threads=run.threads)
    write_csv(run.output / "metrics.csv", METRIC_HEADER, rows)


def cmd_solve(args, run: RunConfig):
    dataset = read_dataset(_require_dir(run.data, "Dataset"))
    model = load_checkpoint(run.checkpoint)
    split = SplitName(args.split)
    data = dataset.split(split)
    if not 0 <= args.index < data.size:
        raise ConfigurationError(f"Sample index {args.index} out of range for split {split.value} ({data.size})")
    result = two_phase_solve(model, data.grid, data.bonds, data.b[args.index], data.u[args.index], run.solver)

    run.output.mkdir(parents=True, exist_ok=True)
    (run.output / "u_solved.f64").write_bytes(encode_field(result.u))
    write_csv(run.output / "diagnostics.csv", ["phase", "iteration", "residual_norm", "damping", "accepted"],
              [[row.phase, row.iteration, row.residual_norm, row.damping, int(row.accepted)] for row in result.trace])
    if not result.converged:
        failed = result.failed_phase
        raise SolverFailure(f"{failed.value} phase did not converge", phase=failed.value, result=result)


def cmd_convergence(args, run: RunConfig):
    spacings = args.dx or config.CONVERGENCE_SPACINGS
    table = run_convergence_study(GeneratorTag(args.example), spacings=spacings, method=args.method,
                                  n_samples=args.n, split_sizes=_default_split(args.n), seed=run.seed,
                                  fine_spacing=args.fine_dx, max_frequency=args.max_frequency,
                                  train_settings=run.train, network=run.network)
    write_convergence_outputs(table, run.output, title=f"{args.example} ({args.method})")


def cmd_compare(args, run: RunConfig):
    dataset = read_dataset(_require_dir(run.data, "Dataset"))
    rows = compare_stretch_architectures(dataset, run.train, run.network, run.solver, run.threads)
    write_csv(run.output / "comparison.csv", COMPARISON_HEADER, rows)


def cmd_sweep(args, run: RunConfig):
    dataset = read_dataset(_require_dir(run.data, "Dataset"))
    truth = _truth_for_training(dataset, run.train)
    rows = run_sweep(dataset, truth, run.train, run.network, args.widths, args.depths, args.lrs)
    write_csv(run.output / "sweep.csv", SWEEP_HEADER, rows)


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            setup_logging(args.verbose)
        run = resolve_run_config(args)
        output.print_banner()
        output.print_process_start(args.command.upper())
        COMMANDS[args.command](args, run)
        output.print_process_end(success=True)
        return 0
    except MPNOError as error:
        output.print_section_item(f"[X] {type(error).__name__}: {error}", log_level="error", color="red")
        output.print_process_end(success=False)
        return error.exit_code
    except OSError as error:
        output.print_section_item(f"[X] {error}", log_level="error", color="red")
        output.print_process_end(success=False)
        return ConfigurationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
