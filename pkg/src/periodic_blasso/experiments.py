"""Synthetic reconstruction experiments: data generation, solver dispatch,
metrics and CSV export."""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .cpgd import CpgdConfig, cpgd_reconstruct
from .fista import WEIGHT_THRESHOLD, FistaConfig, _rrse, grid_reconstruct
from .frank_wolfe import FwConfig, Variant, fw_solve, lambda_base_fw, objective_eval
from .operators import DEFAULT_CUTOFF, GreensFunction, OperatorSpec
from .report import SolverReport
from .sampling import (SampleSet, SparseMeasure, add_noise, forward, random_sparse_measure,
                       sample_positions)

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("factor", "iterations", "duration", "converged", "objective",
                  "splines_rrse", "samples_rrse")
TRACE_COLUMNS = ("iteration", "cert_max", "objective", "atom_count")
EVAL_POINTS = 4096
# fixed offsets between the named seeds of one run
POSITION_SEED_OFFSET = 1
NOISE_SEED_OFFSET = 2


class Solver(str, enum.Enum):
    GRID = "grid"
    CPGD = "cpgd"
    FW = "fw"
    FW_RW = "fw-rw"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one sweep over regularisation factors.

    ``operator`` generates the data, ``recon_operator`` (defaults to the same)
    is used for reconstruction.  With ``timing=False`` every duration is
    reported as 0 so that repeated sweeps produce identical files.
    """

    seed: int = 0
    K0: int = 4
    psnr_db: float = 20.0
    sigma_list: tuple = (0.1,)
    operator: OperatorSpec = field(default_factory=lambda: OperatorSpec("exponential", 3.0, 2))
    recon_operator: Optional[OperatorSpec] = None
    solver: Solver = Solver.GRID
    grid_n: int = 1024
    L_override: Optional[int] = None
    sampling: str = "random"
    cutoff: int = DEFAULT_CUTOFF
    cpgd_M: int = 16
    max_iter: Optional[int] = None
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "solver", Solver(self.solver))
        object.__setattr__(self, "sigma_list", tuple(float(s) for s in self.sigma_list))
        if self.K0 < 1:
            raise ValueError("K0 must be >= 1")
        if not self.sigma_list or any(not s > 0 for s in self.sigma_list):
            raise ValueError("sigma values must be positive")
        if self.grid_n < 1:
            raise ValueError("grid_n must be >= 1")
        if self.L_override is not None and self.L_override < 1:
            raise ValueError("L must be >= 1")
        if self.cpgd_M < 1:
            raise ValueError("cpgd_M must be >= 1")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.sampling not in ("random", "equispaced"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.recon_operator is not None and self.recon_operator.period != self.operator.period:
            raise ValueError("source and reconstruction operators must share the period")

    @property
    def L(self) -> int:
        return self.L_override if self.L_override is not None else 8 * self.K0 + 1

    @property
    def period(self) -> float:
        return self.operator.period

    @property
    def reconstruction(self) -> OperatorSpec:
        return self.operator if self.recon_operator is None else self.recon_operator

    @property
    def measure_seed(self) -> int:
        return self.seed

    @property
    def noise_seed(self) -> int:
        return self.seed + NOISE_SEED_OFFSET

    @classmethod
    def from_mapping(cls, items: Mapping[str, object], base: Optional["ExperimentConfig"] = None):
        """Build from flat ``key -> value`` pairs (strings accepted), on top of
        ``base``.  Unknown keys raise ``ValueError``."""
        cfg = cls() if base is None else base
        updates = {}
        period = cfg.period
        if "period" in items:
            period = _positive(items["period"], "period")
        for key, raw in items.items():
            key = key.replace("-", "_").lower()
            if key == "period":
                continue
            if key == "seed":
                updates["seed"] = int(raw)
            elif key == "k0":
                updates["K0"] = int(raw)
            elif key == "psnr":
                updates["psnr_db"] = float(raw)
            elif key == "sigma":
                updates["sigma_list"] = _float_list(raw)
            elif key == "solver":
                updates["solver"] = Solver(str(raw))
            elif key == "operator":
                updates["operator"] = _as_spec(raw, period)
            elif key == "recon_operator":
                updates["recon_operator"] = _as_spec(raw, period)
            elif key == "grid_n":
                updates["grid_n"] = int(raw)
            elif key in ("l", "samples"):
                updates["L_override"] = int(raw)
            elif key == "sampling":
                updates["sampling"] = str(raw)
            elif key == "cutoff":
                updates["cutoff"] = int(raw)
            elif key == "cpgd_m":
                updates["cpgd_M"] = int(raw)
            elif key == "max_iter":
                updates["max_iter"] = int(raw)
            elif key == "timing":
                updates["timing"] = _as_bool(raw)
            else:
                raise ValueError(f"unknown configuration key {key!r}")
        if "period" in items:
            updates.setdefault("operator", replace(cfg.operator, period=period))
            if cfg.recon_operator is not None:
                updates.setdefault("recon_operator", replace(cfg.recon_operator, period=period))
        return replace(cfg, **updates)


def _positive(raw, name):
    value = float(raw)
    if not value > 0:
        raise ValueError(f"{name} must be positive")
    return value


def _float_list(raw) -> tuple:
    if isinstance(raw, (list, tuple)):
        return tuple(float(v) for v in raw)
    return tuple(float(v) for v in str(raw).split(",") if v.strip())


def _as_spec(raw, period) -> OperatorSpec:
    if isinstance(raw, OperatorSpec):
        return raw
    return OperatorSpec.parse(str(raw), period)


def _as_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def read_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Repeated
    ``sigma`` lines accumulate."""
    items: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key.lower() == "sigma" and "sigma" in items:
            items["sigma"] = items["sigma"] + "," + value
        else:
            items[key.lower()] = value
    return items


@dataclass(frozen=True)
class Instance:
    truth: SparseMeasure
    samples: SampleSet
    clean: np.ndarray


def generate_instance(config: ExperimentConfig, green_source=None) -> Instance:
    """Random source measure, sampling positions and noisy samples."""
    green_source = green_source or GreensFunction(config.operator, config.cutoff)
    T = config.period
    truth = random_sparse_measure(config.K0, config.measure_seed, T)
    pos = sample_positions(config.L, config.measure_seed + POSITION_SEED_OFFSET, T,
                           config.sampling)
    clean = forward(truth, pos, green_source)
    y = add_noise(clean, config.psnr_db, config.noise_seed) if math.isfinite(config.psnr_db) \
        else clean.copy()
    return Instance(truth, SampleSet(pos, y, T), clean)


def spline_rrse(recovered: SparseMeasure, truth: SparseMeasure, green_source, green_recon,
                n_points: int = EVAL_POINTS) -> float:
    """Relative error of the reconstructed spline against the source spline
    on an equispaced evaluation grid; NaN when the source spline vanishes."""
    t = np.arange(n_points) * truth.period / n_points
    f0 = truth.spline(green_source, t)
    f = recovered.spline(green_recon, t)
    return _rrse(f - f0, f0)


def metrics(recovered: SparseMeasure, truth: SparseMeasure, samples: SampleSet,
            green_source, green_recon, lam: float) -> dict:
    """Objective, spline and sample errors, and sparsity of a reconstruction."""
    fit = forward(recovered, samples.positions, green_recon)
    return {
        "objective": objective_eval(recovered, samples, green_recon, lam),
        "splines_rrse": spline_rrse(recovered, truth, green_source, green_recon),
        "samples_rrse": _rrse(samples.values - fit, samples.values),
        "sparsity": int(np.sum(np.abs(recovered.weights) > WEIGHT_THRESHOLD)),
    }


@dataclass
class RunResult:
    sigma: float
    measure: SparseMeasure
    report: SolverReport


def reference_lambda(samples: SampleSet, green, sigma: float) -> float:
    """Common ``lambda = sigma ||Phi^* y||_inf`` used to score every solver."""
    base = lambda_base_fw(samples, green, EVAL_POINTS)
    return sigma * base if base > 0 else sigma


def solve(instance: Instance, config: ExperimentConfig, sigma: float, green_recon=None):
    """Run the configured solver for one factor ``sigma``; returns
    ``(measure, report)`` where ``report.lam`` is the lambda the solver used."""
    green = green_recon or GreensFunction(config.reconstruction, config.cutoff)
    samples = instance.samples
    solver = config.solver
    if solver is Solver.GRID:
        cfg = FistaConfig(1.0) if config.max_iter is None \
            else FistaConfig(1.0, max_iter=config.max_iter)
        return grid_reconstruct(samples, green, config.grid_n, sigma, cfg)
    if solver is Solver.CPGD:
        M = config.cpgd_M
        kwargs = {} if config.max_iter is None else {"max_iter": config.max_iter}
        return cpgd_reconstruct(samples, green, green.symbol, CpgdConfig.full(M, **kwargs),
                                FistaConfig(1.0), sigma=sigma)
    base = lambda_base_fw(samples, green)
    lam = sigma * base if base > 0 else sigma
    variant = Variant.REGULAR if solver is Solver.FW else Variant.REWEIGHTED
    kwargs = {} if config.max_iter is None else {"max_iter": config.max_iter}
    measure, report = fw_solve(samples, green, FwConfig(lam, variant=variant, **kwargs))
    report.factor = sigma
    return measure, report


def run_sweep(config: ExperimentConfig, instance: Optional[Instance] = None):
    """Solve one synthetic instance for every factor in ``config.sigma_list``.

    Returns the instance and one :class:`RunResult` per factor, in the order
    of ``sigma_list``.  A failing solve is logged and recorded as a
    non-converged report; it never aborts the sweep.
    """
    green_source = GreensFunction(config.operator, config.cutoff)
    green_recon = green_source if config.recon_operator is None \
        else GreensFunction(config.reconstruction, config.cutoff)
    instance = instance or generate_instance(config, green_source)
    results = []
    for sigma in config.sigma_list:
        try:
            measure, report = solve(instance, config, sigma, green_recon)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            logger.error("solver %s failed at sigma=%g: %s", config.solver.value, sigma, exc)
            measure, report = SparseMeasure.empty(config.period), SolverReport(iterations=0)
        lam_ref = reference_lambda(instance.samples, green_recon, sigma)
        values = metrics(measure, instance.truth, instance.samples, green_source, green_recon,
                         lam_ref)
        report.factor = sigma
        report.objective = values["objective"]
        report.splines_rrse = values["splines_rrse"]
        report.samples_rrse = values["samples_rrse"]
        report.sparsity = values["sparsity"]
        if not config.timing:
            report.duration_s = 0.0
        results.append(RunResult(sigma, measure, report))
    return instance, results


def run_experiment(config: ExperimentConfig) -> list:
    """Reports of :func:`run_sweep`, one per factor."""
    return [r.report for r in run_sweep(config)[1]]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".6g")


def emit_csv(reports: Iterable[SolverReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(r.factor), _fmt(int(r.iterations)), _fmt(r.duration_s),
                         _fmt(bool(r.converged)), _fmt(r.objective), _fmt(r.splines_rrse),
                         _fmt(r.samples_rrse)])
    return buf.getvalue()


def parse_csv(text: str) -> list:
    """Inverse of :func:`emit_csv` (up to the 6-digit rounding)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != REPORT_COLUMNS:
        raise ValueError("unexpected report header")
    out = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(REPORT_COLUMNS):
            raise ValueError(f"malformed report row {row!r}")
        if row[3] not in ("true", "false"):
            raise ValueError(f"converged must be true/false, got {row[3]!r}")
        out.append(SolverReport(factor=float(row[0]), iterations=int(row[1]),
                                duration_s=float(row[2]), converged=row[3] == "true",
                                objective=float(row[4]), splines_rrse=float(row[5]),
                                samples_rrse=float(row[6])))
    return out


def emit_trace_csv(report: SolverReport) -> str:
    """Per-iteration Frank-Wolfe trace."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in report.trace:
        writer.writerow([_fmt(int(row["iteration"])), _fmt(row["cert_max"]),
                         _fmt(row["objective"]), _fmt(int(row["atom_count"]))])
    return buf.getvalue()


def emit_plot_data(instance: Instance, recovered: SparseMeasure, green_source, green_recon,
                   n_points: int = 1024) -> str:
    """Four ``#``-headed CSV blocks: source curve, reconstructed curve,
    samples and innovation stems (source and recovered)."""
    T = instance.truth.period
    t = np.arange(n_points) * T / n_points
    f0 = instance.truth.spline(green_source, t)
    f = recovered.spline(green_recon, t)
    lines = ["# source_curve", "t,f"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(t, f0)]
    lines += ["", "# reconstructed_curve", "t,f"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(t, f)]
    lines += ["", "# samples", "theta,y"]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(instance.samples.positions,
                                                   instance.samples.values)]
    lines += ["", "# innovations", "knot,weight,origin"]
    lines += [f"{_fmt(k)},{_fmt(w)},source" for k, w in zip(instance.truth.knots,
                                                          instance.truth.weights)]
    lines += [f"{_fmt(k)},{_fmt(w)},recovered" for k, w in zip(recovered.knots,
                                                             recovered.weights)]
    return "\n".join(lines) + "\n"


def read_plot_blocks(text: str) -> dict:
    """Split plot data back into ``{block name: list of rows}``."""
    blocks: dict = {}
    name = None
    header_seen = False
    for line in text.splitlines():
        if line.startswith("# "):
            name = line[2:].strip()
            blocks[name] = []
            header_seen = False
        elif line.strip() and name is not None:
            if not header_seen:
                header_seen = True
                continue
            blocks[name].append(line.split(","))
    return blocks
