"""Exact stationarity/objective measurement and trace CSV emission.

All metrics here are computed on the full data, completely outside the
optimizer's sampled world: the exact gradient mapping solves the true
(non-estimated) model at the query point. Because each measurement costs a
full-batch subproblem solve, collectors evaluate only at logging checkpoints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import CompositeProblem, as_vector, full_average_jacobian, full_average_map, objective_value
from .subproblem import ProxLinearModel, solve

CSV_COLUMNS = ("samples_g", "samples_j", "epoch", "inner", "objective",
               "grad_map_sq", "wall_ms")


@dataclass(frozen=True)
class TraceRecord:
    """One logged checkpoint: cumulative counters, indices, exact metrics."""

    samples_g: int
    samples_j: int
    epoch: int
    inner: int
    objective: float
    grad_map_sq: float
    wall_ms: int = 0


def exact_gradient_mapping(problem: CompositeProblem, x, M: float,
                           tol: float = 1e-10, max_iters: int = 200_000,
                           tokens=None) -> np.ndarray:
    """M(x − x⁺) with x⁺ the exact-data prox-linear step from x.

    Uses the full averages g(x), g'(x) (over the declared population, or an
    explicit token list) and solves the resulting model to ``tol``.
    """
    x = as_vector(x, problem.n, "x")
    g = full_average_map(problem, x, tokens)
    J = full_average_jacobian(problem, x, tokens)
    model = ProxLinearModel(x_bar=x, g_tilde=g, J_tilde=J, M=M,
                            outer=problem.outer, reg=problem.reg)
    sol = solve(model, tol=tol, max_iters=max_iters)
    return M * (x - sol.x_plus)


def approx_gradient_mapping(x, x_next, M: float) -> np.ndarray:
    """M(x − x_next): the sampled-model analogue, pure arithmetic."""
    x = as_vector(x, name="x")
    x_next = as_vector(x_next, x.size, "x_next")
    return M * (x - x_next)


# ---------------------------------------------------------------------------
# Trace CSV
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def emit_trace(records, destination) -> None:
    """Write records as CSV (header always present, LF endings, 17 significant
    digits on the float columns)."""
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8", newline="")


def read_trace(source) -> list[TraceRecord]:
    """Parse a trace CSV back into records (round-trips emit_trace)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip() != ""]
    if not lines:
        raise DataError("trace CSV: empty input")
    header = tuple(lines[0].strip().split(","))
    if header != CSV_COLUMNS:
        raise DataError(f"trace CSV: unexpected header {header}")
    records = []
    for idx, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise DataError(f"trace CSV: wrong field count on line {idx}")
        try:
            records.append(TraceRecord(
                samples_g=int(parts[0]), samples_j=int(parts[1]),
                epoch=int(parts[2]), inner=int(parts[3]),
                objective=float(parts[4]), grad_map_sq=float(parts[5]),
                wall_ms=int(parts[6])))
        except ValueError as exc:
            raise DataError(f"trace CSV: bad value on line {idx}: {exc}") from exc
    return records


class TraceCollector:
    """Logging hook for the drivers.

    Called as hook(epoch, inner, calls_g, calls_j, get_x, is_last); logs the
    initial point, every ``stride``-th inner iteration, and always the final
    one. Exact metrics (full-data objective and squared gradient-mapping
    norm) are computed only for logged checkpoints. ``timing=False`` pins
    wall_ms to 0 so traces are byte-identical across repeated runs.
    """

    def __init__(self, problem: CompositeProblem, M: float, stride: int = 1,
                 timing: bool = False, tol: float = 1e-10, tokens=None):
        if stride < 1:
            raise DataError("TraceCollector: stride must be >= 1")
        self.problem = problem
        self.M = float(M)
        self.stride = int(stride)
        self.timing = bool(timing)
        self.tol = float(tol)
        self.tokens = tokens
        self.records: list[TraceRecord] = []
        self._events = 0
        self._t0 = time.perf_counter()

    def _measure(self, epoch, inner, calls_g, calls_j, x):
        gm = exact_gradient_mapping(self.problem, x, self.M, tol=self.tol,
                                    tokens=self.tokens)
        wall = int(round((time.perf_counter() - self._t0) * 1000.0)) if self.timing else 0
        self.records.append(TraceRecord(
            samples_g=int(calls_g), samples_j=int(calls_j),
            epoch=int(epoch), inner=int(inner),
            objective=objective_value(self.problem, x, self.tokens),
            grad_map_sq=float(gm @ gm), wall_ms=wall))

    def __call__(self, epoch, inner, calls_g, calls_j, get_x, is_last=False):
        if epoch == 1 and inner == 0:
            self._measure(epoch, inner, calls_g, calls_j, get_x())
            return
        self._events += 1
        if self._events % self.stride == 0 or is_last:
            self._measure(epoch, inner, calls_g, calls_j, get_x())
