"""Parameter sweeps over all ROM formulations, optimum selection and scoring."""

from __future__ import annotations

import csv
import io
import logging
import math
import multiprocessing
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assembly import Discretization, StabilizationKind
from .fom import SingularSystemError, Trajectory
from .formulations import FORMULATION_NAMES, Formulation, get_formulation
from .metrics import ErrorEvaluator, ErrorReport, Status
from .pod import PODBasis
from .rom_core import ContinuousReducer, InnerProduct, MassSolver, ReducedOperators, reduce_discrete_galerkin, \
    reduced_initial_condition, solve_rom
from .rom_petrov import APGConfig, LSPGConfig, apg_reduce, lspg_reduce

log = logging.getLogger(__name__)

GRID_VALUES = (
    1e-4, 2.5e-4, 5e-4, 1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 1e-2,
    1.5e-2, 2e-2, 2.5e-2, 3e-2, 4e-2, 5e-2, 6e-2, 8e-2, 1e-1, 2e-1, 3e-1, 4e-1, 5e-1,
)
APG_FIXED_DT = 1e-3
CSV_HEADER = ("formulation", "R", "tau", "dt", "tau_apg", "err_l2", "err_h1", "status")


def _check_axis(name: str, values: Sequence[float]) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError(f"{name} must not be empty")
    if any(not v > 0 for v in vals):
        raise ValueError(f"{name} must be positive")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    return vals


@dataclass(frozen=True)
class SweepGrid:
    tau_values: tuple[float, ...]
    dt_values: tuple[float, ...]
    tau_apg_values: tuple[float, ...]
    R_values: tuple[int, ...] = (5,)

    def __post_init__(self):
        object.__setattr__(self, "tau_values", _check_axis("tau_values", self.tau_values))
        object.__setattr__(self, "dt_values", _check_axis("dt_values", self.dt_values))
        object.__setattr__(self, "tau_apg_values", _check_axis("tau_apg_values", self.tau_apg_values))
        Rs = tuple(int(r) for r in self.R_values)
        if not Rs or any(r < 1 for r in Rs) or len(set(Rs)) != len(Rs):
            raise ValueError("R_values must be distinct positive integers")
        object.__setattr__(self, "R_values", Rs)


def default_grid(R_values: Sequence[int] = (5,)) -> SweepGrid:
    """The 26-value grid used for tau, dt and tau_apg alike."""
    return SweepGrid(GRID_VALUES, GRID_VALUES, GRID_VALUES, tuple(R_values))


def grid_points(form: Formulation, grid: SweepGrid, apg_dt: float = APG_FIXED_DT) -> list[tuple[float, float, float]]:
    """``(tau, dt, tau_apg)`` triples swept for one formulation, in output order."""
    if form.dt_is_fixed:
        return [(t, apg_dt, ta) for t in grid.tau_values for ta in grid.tau_apg_values]
    if form.uses_tau_apg:
        return [(0.0, dt, ta) for ta in grid.tau_apg_values for dt in grid.dt_values]
    if form.uses_tau:
        return [(t, dt, 0.0) for t in grid.tau_values for dt in grid.dt_values]
    return [(0.0, dt, 0.0) for dt in grid.dt_values]


def _divisors(n: int) -> list[int]:
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def adjust_dt(dt: float, truth_dt: float, T: float) -> tuple[float, int, bool]:
    """Snap ``dt`` so the ROM and truth time grids nest and ``T / dt`` is an integer.

    Steps coarser than ``truth_dt`` become ``k * truth_dt`` with ``k`` the
    divisor of the truth step count closest to ``dt / truth_dt`` (ties go
    to the smaller divisor). Finer steps become ``truth_dt / m`` with ``m``
    the nearest positive integer. Returns ``(dt, n_steps, adjusted)``.
    """
    if not dt > 0 or not truth_dt > 0:
        raise ValueError("time steps must be positive")
    n_truth = int(round(T / truth_dt))
    if n_truth < 1 or not math.isclose(n_truth * truth_dt, T, rel_tol=1e-9):
        raise ValueError(f"truth step {truth_dt!r} does not divide T={T!r}")
    if dt >= truth_dt * (1 - 1e-12):
        want = dt / truth_dt
        k = min(_divisors(n_truth), key=lambda d: (abs(d - want), d))
        new_dt, n_steps = k * truth_dt, n_truth // k
    else:
        m = max(1, int(round(truth_dt / dt)))
        new_dt, n_steps = truth_dt / m, n_truth * m
    adjusted = not math.isclose(new_dt, dt, rel_tol=1e-9)
    return (new_dt if adjusted else dt), n_steps, adjusted


# experiment context --------------------------------------------------------------

class ExperimentContext:
    """Everything a single ROM run needs: FOM discretization, basis and restricted truth."""

    def __init__(self, disc: Discretization, basis: PODBasis, truth_coarse: Trajectory,
                 a0: np.ndarray | None = None, name: str = "experiment", apg_dt: float = APG_FIXED_DT):
        self.disc = disc
        self.basis = basis
        self.truth = truth_coarse
        self.T = truth_coarse.T
        self.name = name
        self.apg_dt = apg_dt
        g = disc.galerkin
        self.a0 = np.zeros(g.n) if a0 is None else np.asarray(a0, dtype=float)
        self._mass_solver: MassSolver | None = None
        self._continuous: dict[int, ContinuousReducer] = {}
        self._evaluators: dict[int, ErrorEvaluator] = {}
        self._ops: OrderedDict = OrderedDict()

    @property
    def mass_solver(self) -> MassSolver:
        if self._mass_solver is None:
            self._mass_solver = MassSolver(self.disc.galerkin.M)
        return self._mass_solver

    def basis_of(self, R: int) -> PODBasis:
        return self.basis.truncate(R)

    def evaluator(self, R: int) -> ErrorEvaluator:
        if R not in self._evaluators:
            g = self.disc.galerkin
            self._evaluators[R] = ErrorEvaluator(self.basis_of(R), self.truth, g.M, g.D)
        return self._evaluators[R]

    def continuous_reducer(self, R: int) -> ContinuousReducer:
        if R not in self._continuous:
            self._continuous[R] = ContinuousReducer(self.disc.space, self.disc.problem, self.basis_of(R).Psi)
        return self._continuous[R]

    def operators(self, kind: StabilizationKind, tau: float, dt: float):
        key = (kind, tau, dt if kind.is_discretize_then_stabilize else None)
        if key not in self._ops:
            if len(self._ops) >= 4:
                self._ops.popitem(last=False)
            self._ops[key] = self.disc.operators(kind, tau, dt)
        return self._ops[key]

    def reduce(self, form: Formulation | str, R: int, tau: float, dt: float, tau_apg: float = 0.0) -> ReducedOperators:
        form = get_formulation(form) if isinstance(form, str) else form
        tau = tau if form.uses_tau else 0.0
        if form.family == "continuous":
            return self.continuous_reducer(R).reduce(form.kind, tau, dt)
        ops = self.operators(form.kind, tau, dt)
        basis = self.basis_of(R)
        if form.family == "lspg":
            cfg = LSPGConfig(form.kind, InnerProduct.INVERSE_MASS, tau, dt)
            return lspg_reduce(ops, basis, cfg, self.mass_solver)
        cfg = APGConfig(form.kind, tau_apg, tau, dt)
        return apg_reduce(ops, basis, cfg, self.mass_solver)

    def rom_trajectory(self, form, R: int, tau: float, dt: float, tau_apg: float = 0.0) -> Trajectory:
        n_steps = int(round(self.T / dt))
        red = self.reduce(form, R, tau, dt, tau_apg)
        y0 = reduced_initial_condition(self.basis_of(R), self.disc.galerkin.M, self.a0)
        return solve_rom(red, dt, n_steps, y0)

    def run(self, form: Formulation | str, R: int, tau: float, dt: float, tau_apg: float = 0.0) -> ErrorReport:
        form = get_formulation(form) if isinstance(form, str) else form
        tau = tau if form.uses_tau else 0.0
        tau_apg = tau_apg if form.uses_tau_apg else 0.0
        try:
            traj = self.rom_trajectory(form, R, tau, dt, tau_apg)
        except (SingularSystemError, np.linalg.LinAlgError) as exc:
            log.warning("%s R=%d tau=%g dt=%g tau_apg=%g: %s", form.name, R, tau, dt, tau_apg, exc)
            return ErrorReport(math.inf, math.inf, form.name, R, tau, dt, tau_apg, Status.DIVERGED)
        return self.evaluator(R).evaluate(traj, form.name, tau, tau_apg)

    def discrete_galerkin(self, R: int, kind=StabilizationKind.NONE, tau: float = 0.0, dt: float = 1e-3,
                          W: InnerProduct = InnerProduct.IDENTITY) -> ReducedOperators:
        return reduce_discrete_galerkin(self.operators(StabilizationKind(kind), tau, dt), self.basis_of(R), W,
                                        dt=dt, mass_solver=self.mass_solver)


# results ----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


@dataclass
class SweepResult:
    rows: list[ErrorReport] = field(default_factory=list)

    def to_csv(self, path_or_buffer=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.formulation, r.R, _fmt(r.tau), _fmt(r.dt), _fmt(r.tau_apg),
                        _fmt(r.err_l2), _fmt(r.err_h1), Status(r.status).value])
        text = buf.getvalue()
        if path_or_buffer is not None:
            if hasattr(path_or_buffer, "write"):
                path_or_buffer.write(text)
            else:
                with open(path_or_buffer, "w", newline="") as fh:
                    fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "SweepResult":
        if isinstance(path_or_text, (str, os.PathLike)) and os.path.exists(path_or_text):
            with open(path_or_text, newline="") as fh:
                text = fh.read()
        else:
            text = str(path_or_text)
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError("not a sweep CSV: unexpected header")
        rows = [
            ErrorReport(float(l2), float(h1), name, int(R), float(tau), float(dt), float(ta), Status(status))
            for name, R, tau, dt, ta, l2, h1, status in reader
        ]
        return cls(rows)


# execution ----------------------------------------------------------------------------

_WORKER_CONTEXT: ExperimentContext | None = None


def _run_chunk(task):
    name, R, points = task
    ctx = _WORKER_CONTEXT
    form = get_formulation(name)
    return [ctx.run(form, R, tau, dt, ta) for tau, dt, ta in points]


def _tasks(context: ExperimentContext, formulations: Iterable[str], grid: SweepGrid):
    tasks = []
    truth_dt = context.truth.dt
    for name in formulations:
        form = get_formulation(name)
        pts = []
        for tau, dt, ta in grid_points(form, grid, context.apg_dt):
            new_dt, _, adjusted = adjust_dt(dt, truth_dt, context.T)
            if adjusted:
                log.warning("%s: dt=%g does not fit T=%g on the truth grid; using dt=%.17g",
                            form.name, dt, context.T, new_dt)
            pts.append((tau, new_dt, ta))
        for R in grid.R_values:
            tasks.append((form.name, R, pts))
    return tasks


def run_sweep(context: ExperimentContext, formulations: Iterable[str], grid: SweepGrid,
              workers: int = 1) -> SweepResult:
    """Run every grid point of every formulation and basis size.

    Rows come out ordered by formulation (input order), then R, then grid
    point, independent of ``workers``.
    """
    global _WORKER_CONTEXT
    tasks = _tasks(context, formulations, grid)
    if any(R > context.basis.R for R in grid.R_values):
        raise ValueError(f"basis has only {context.basis.R} modes")
    _WORKER_CONTEXT = context
    try:
        if workers > 1 and len(tasks) > 1 and "fork" in multiprocessing.get_all_start_methods():
            with ProcessPoolExecutor(max_workers=workers, mp_context=multiprocessing.get_context("fork")) as ex:
                chunks = list(ex.map(_run_chunk, tasks))
        else:
            chunks = [_run_chunk(t) for t in tasks]
    finally:
        _WORKER_CONTEXT = None
    return SweepResult([row for chunk in chunks for row in chunk])


# selection and scoring ------------------------------------------------------------------

def _error(row: ErrorReport, criterion: str) -> float:
    c = criterion.lower()
    if c in ("l2", "err_l2"):
        return row.err_l2
    if c in ("h1", "err_h1"):
        return row.err_h1
    raise ValueError(f"unknown criterion {criterion!r}; use 'l2' or 'h1'")


def select_optimal(result: SweepResult | Sequence[ErrorReport], formulation: str, R: int,
                   criterion: str = "l2") -> ErrorReport:
    """Converged row with the smallest error; ties go to smaller tau, then dt, then tau_apg."""
    rows = result.rows if isinstance(result, SweepResult) else list(result)
    cand = [r for r in rows if r.formulation == formulation and r.R == R]
    if not cand:
        raise ValueError(f"no rows for {formulation!r} at R={R}")
    ok = [r for r in cand if r.status is Status.CONVERGED and math.isfinite(_error(r, criterion))]
    if not ok:
        raise ValueError(f"every run of {formulation!r} at R={R} diverged")
    return min(ok, key=lambda r: (_error(r, criterion), r.tau, r.dt, r.tau_apg))


def optimal_errors(result: SweepResult, formulations: Sequence[str], R_values: Sequence[int],
                   experiment: str = "experiment") -> dict:
    """``{(experiment, R, norm): {formulation: optimal error}}``; all-diverged gives ``inf``."""
    out = {}
    for R in R_values:
        for norm in ("l2", "h1"):
            table = {}
            for name in formulations:
                try:
                    table[name] = _error(select_optimal(result, name, R, norm), norm)
                except ValueError:
                    table[name] = math.inf
            out[(experiment, R, norm)] = table
    return out


@dataclass(frozen=True)
class Scores:
    count_best: dict  # norm -> formulation -> count
    rank_score: dict  # norm -> formulation -> summed score
    per_key: dict  # (experiment, R, norm) -> formulation -> score


def score_formulations(optima: Mapping[tuple, Mapping[str, float]]) -> Scores:
    """Count-of-best and rank-score tables.

    ``optima`` maps ``(experiment, R, norm)`` to the optimal error of every
    formulation. Within each key the best formulation scores ``N``, the worst
    1; diverged (infinite) errors rank last and ties are broken by name.
    """
    names = None
    count: dict = {}
    score: dict = {}
    per_key: dict = {}
    for key in sorted(optima, key=lambda k: tuple(str(x) for x in k)):
        table = optima[key]
        if names is None:
            names = sorted(table)
        elif sorted(table) != names:
            raise ValueError(f"formulations at {key} differ from the others")
        norm = key[-1]
        count.setdefault(norm, {n: 0 for n in names})
        score.setdefault(norm, {n: 0 for n in names})
        order = sorted(names, key=lambda n: (not math.isfinite(table[n]),
                                            table[n] if math.isfinite(table[n]) else 0.0, n))
        N = len(order)
        count[norm][order[0]] += 1
        per_key[key] = {}
        for i, n in enumerate(order):
            score[norm][n] += N - i
            per_key[key][n] = N - i
    return Scores(count, score, per_key)


def all_formulations() -> tuple[str, ...]:
    return FORMULATION_NAMES
