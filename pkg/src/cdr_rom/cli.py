"""Command-line entry point: ``cdr-rom <subcommand>``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import PRESETS, ExperimentConfig, preset
from .fom import Trajectory
from .formulations import FORMULATION_NAMES, get_formulation
from .pod import PODBasis, residual_energy
from .sweep import SweepResult, optimal_errors, run_sweep, score_formulations

log = logging.getLogger("cdr_rom")

OUTPUT_ENV = "CDR_ROM_OUTPUT_DIR"
TRUTH_FILE = "truth.snap"
RESTRICTED_FILE = "restricted.snap"
BASIS_FILE = "basis.snap"
EIGEN_FILE = "eigenvalues.snap"
SWEEP_FILE = "sweep.csv"
ROM_RUNS_FILE = "rom_runs.csv"


def _load_config(args) -> ExperimentConfig:
    if args.config:
        return ExperimentConfig.load(args.config)
    return preset(args.preset or "example1")


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    base = args.output_dir or os.environ.get(OUTPUT_ENV) or "cdr_rom_output"
    out = Path(base) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `cdr-rom {hint}` first")
    return path


def _load_basis(out: Path) -> PODBasis:
    return PODBasis.load(_require(out / BASIS_FILE, "basis-build"), out / EIGEN_FILE)


def _load_restricted(out: Path) -> Trajectory:
    return Trajectory.load(_require(out / RESTRICTED_FILE, "truth-run"))


def cmd_truth_run(args) -> int:
    from .pipeline import run_truth

    cfg = _load_config(args)
    out = _output_dir(args, cfg)
    truth, restricted = run_truth(cfg)
    truth.save(out / TRUTH_FILE)
    restricted.save(out / RESTRICTED_FILE)
    print(f"wrote {out / TRUTH_FILE} ({truth.states.shape[0]} x {truth.states.shape[1]})")
    print(f"wrote {out / RESTRICTED_FILE} ({restricted.states.shape[0]} x {restricted.states.shape[1]})")
    return 0


def cmd_basis_build(args) -> int:
    from .pipeline import build_basis, fom_space
    from .fom import mass_matrix

    cfg = _load_config(args)
    out = _output_dir(args, cfg)
    restricted = _load_restricted(out)
    M = mass_matrix(fom_space(cfg))
    basis = build_basis(cfg, restricted, M)
    basis.save(out / BASIS_FILE, out / EIGEN_FILE, restricted.dt)
    print(f"R = {basis.R} (numerical rank {basis.numerical_rank})")
    print(f"{'R':>4}  {'residual energy':>24}")
    for R in range(1, min(basis.numerical_rank, 20) + 1):
        print(f"{R:>4}  {residual_energy(basis.eigenvalues, R):>24.17g}")
    return 0


def _context(cfg, out):
    from .pipeline import make_context

    return make_context(cfg, _load_basis(out), _load_restricted(out))


def cmd_rom_run(args) -> int:
    cfg = _load_config(args)
    form = get_formulation(args.formulation)
    out = _output_dir(args, cfg)
    ctx = _context(cfg, out)
    from .sweep import adjust_dt

    dt, _, adjusted = adjust_dt(args.dt, ctx.truth.dt, ctx.T)
    if adjusted:
        log.warning("dt=%g adjusted to %.17g to fit the truth time grid", args.dt, dt)
    report = ctx.run(form, args.R, args.tau, dt, args.tau_apg)
    result = SweepResult([report])
    text = result.to_csv()
    print(text, end="")
    path = out / ROM_RUNS_FILE
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        fh.write(text if new else text.split("\n", 1)[1])
    return 0


def _parse_names(text: str | None) -> list[str]:
    if text is None:
        return list(FORMULATION_NAMES)
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        get_formulation(n)
    return names


def cmd_sweep(args) -> int:
    from .pipeline import sweep_grid

    cfg = _load_config(args)
    out = _output_dir(args, cfg)
    names = _parse_names(args.formulations)
    R_values = [int(r) for r in args.R.split(",")] if args.R else list(cfg.R_values)
    csv_path = Path(args.csv) if args.csv else out / SWEEP_FILE
    grid = sweep_grid(cfg, R_values)
    if names:
        result = run_sweep(_context(cfg, out), names, grid, workers=args.workers)
    else:
        result = SweepResult([])
    result.to_csv(csv_path)
    print(f"wrote {csv_path} ({len(result.rows)} rows)")
    return 0


def cmd_report(args) -> int:
    optima = {}
    for path in args.csv:
        result = SweepResult.from_csv(path)
        names = sorted({r.formulation for r in result.rows})
        Rs = sorted({r.R for r in result.rows})
        optima.update(optimal_errors(result, names, Rs, experiment=Path(path).stem))
    if not optima:
        print("no rows")
        return 0
    scores = score_formulations(optima)
    names = sorted(next(iter(optima.values())))
    print(f"{'formulation':<14}{'best L2':>9}{'best H1':>9}{'score L2':>10}{'score H1':>10}")
    order = sorted(names, key=lambda n: (-scores.rank_score["l2"][n], n))
    for n in order:
        print(f"{n:<14}{scores.count_best['l2'][n]:>9}{scores.count_best['h1'][n]:>9}"
              f"{scores.rank_score['l2'][n]:>10}{scores.rank_score['h1'][n]:>10}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdr-rom", description="Stabilized FEM and projection ROMs for the CDR equation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--seed", type=int, default=None, help="seed for NumPy's global generator")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment (default: example1)")
        g.add_argument("--config", help="YAML experiment configuration")
        p.add_argument("--output-dir", help=f"output root (default: ${OUTPUT_ENV} or ./cdr_rom_output)")

    p = sub.add_parser("truth-run", help="solve the truth problem and restrict it to the FOM space")
    experiment_args(p)
    p.set_defaults(func=cmd_truth_run)

    p = sub.add_parser("basis-build", help="POD basis of the restricted truth")
    experiment_args(p)
    p.set_defaults(func=cmd_basis_build)

    p = sub.add_parser("rom-run", help="run one ROM and report its errors")
    experiment_args(p)
    p.add_argument("--formulation", required=True, help=", ".join(FORMULATION_NAMES))
    p.add_argument("--R", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tau-apg", type=float, default=0.0)
    p.set_defaults(func=cmd_rom_run)

    p = sub.add_parser("sweep", help="grid sweep over formulations; writes a CSV")
    experiment_args(p)
    p.add_argument("--formulations", default=None, help="comma-separated names (default: all 16)")
    p.add_argument("--R", default=None, help="comma-separated basis sizes")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", default=None, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="count-of-best and rank-score tables from sweep CSVs")
    p.add_argument("csv", nargs="+", help="one sweep CSV per experiment")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None:
        np.random.seed(args.seed)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"cdr-rom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
