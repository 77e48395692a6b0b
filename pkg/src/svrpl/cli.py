"""Command-line front end: run experiments, verify oracles, sweep penalties.

Configuration is plain "key = value" lines with "#" full-line comments; any
flag given on the command line overrides the file value. Exit codes are a
stable contract: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure (including failed checks).
"""

from __future__ import annotations

import dataclasses
import functools
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .driver import (
    Schedule,
    run_deterministic_pl,
    run_minibatch_pl,
    run_svr_pl,
    schedule_adaptive,
    schedule_minibatch,
    schedule_sarah_expect_nonsmooth,
    schedule_sarah_expect_smooth,
    schedule_sarah_finite_smooth,
    schedule_svrg_finite,
)
from .errors import ConfigError, DataError, NumericalError
from .ingest import read_libsvm, read_returns_csv, subsample
from .metrics import TraceCollector, TraceRecord, emit_trace
from .model import Expectation, FiniteSum
from .problems import (
    MultiLossInstance,
    PortfolioInstance,
    check_permutation_invariance,
    make_multiloss_data,
    make_portfolio_returns,
    multiloss_oracle,
    multiloss_smooth_oracle,
    portfolio_oracle,
    run_problem_checks,
    synthetic_oracles,
)

ALGORITHMS = ("pl", "spl", "svrpl", "sarahpl")
SCHEDULE_MODES = ("manual", "svrg_finite", "minibatch", "sarah_expect_nonsmooth",
                  "sarah_finite_smooth", "sarah_expect_smooth", "adaptive")
DATA_PROBLEMS = ("multiloss", "multiloss_smooth", "portfolio")


@dataclass
class RunConfig:
    problem: str = "multiloss"
    data: str | None = None
    skip_header: bool = False
    label_pos: float | None = None
    label_neg: float | None = None
    subsample: int | None = None
    data_seed: int = 0
    feature_scale: float = 1.0
    regime: str = "finite"
    synth_count: int = 2000
    synth_n: int = 20
    beta: float = 0.01
    cvar_beta: float = 0.2
    rho: float = 3.0
    gamma: float = 0.1
    sigma_g: float | None = None
    sigma_gprime: float | None = None
    algorithm: str = "svrpl"
    schedule: str = "manual"
    M: float | None = None
    K: int | None = None
    tau: int | None = None
    epsilon: float | None = None
    gap: float | None = None
    anchor_g: int | None = None
    anchor_j: int | None = None
    inner_g: int | None = None
    inner_j: int | None = None
    shared: bool | None = None
    m_list: str | None = None
    seed: int = 0
    stride: int = 1
    repeats: int = 1
    out: str = "trace.csv"
    timing: bool = False
    figures: bool = False
    tol: float = 1e-9


_INT_KEYS = {"subsample", "data_seed", "synth_count", "synth_n", "K", "tau",
             "anchor_g", "anchor_j", "inner_g", "inner_j", "seed", "stride",
             "repeats"}
_FLOAT_KEYS = {"label_pos", "label_neg", "feature_scale", "beta", "cvar_beta",
               "rho", "gamma", "sigma_g", "sigma_gprime", "M", "epsilon",
               "gap", "tol"}
_BOOL_KEYS = {"skip_header", "shared", "timing", "figures"}
_STR_KEYS = {"problem", "data", "regime", "algorithm", "schedule", "m_list", "out"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _STR_KEYS


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def parse_config_text(text: str) -> dict:
    """Parse "key = value" lines into typed values; '#' lines are comments."""
    out = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _BOOL_KEYS:
                out[key] = _parse_bool(value)
            else:
                out[key] = value
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return out


def config_from_mapping(mapping: dict) -> RunConfig:
    unknown = set(mapping) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return dataclasses.replace(RunConfig(), **mapping)


def serialize_config(config: RunConfig) -> str:
    """Emit a config file that parses back to an equal RunConfig."""
    lines = []
    for field in dataclasses.fields(RunConfig):
        value = getattr(config, field.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path, overrides: dict) -> RunConfig:
    mapping = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise DataError(f"config file not found: {path}") from exc
        mapping.update(parse_config_text(text))
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    config = config_from_mapping(mapping)
    if config.algorithm not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
    if config.schedule not in SCHEDULE_MODES:
        raise ConfigError(f"schedule must be one of {SCHEDULE_MODES}")
    if config.stride < 1 or config.repeats < 1:
        raise ConfigError("stride and repeats must be >= 1")
    return config


# ---------------------------------------------------------------------------
# Problem and schedule construction
# ---------------------------------------------------------------------------

def build_problem(config: RunConfig):
    """Returns (problem, aux) where aux carries the raw instance when one
    exists (used by the portfolio permutation check)."""
    name = config.problem
    aux = {}
    if name in ("multiloss", "multiloss_smooth"):
        if config.data is not None:
            label_filter = None
            if config.label_pos is not None or config.label_neg is not None:
                if config.label_pos is None or config.label_neg is None:
                    raise ConfigError("label_pos and label_neg must be given together")
                label_filter = (config.label_pos, config.label_neg)
            dataset = read_libsvm(config.data, label_filter=label_filter)
            if config.subsample is not None:
                dataset = subsample(dataset, config.subsample, config.data_seed)
            if len(dataset) == 0:
                raise DataError("dataset is empty after filtering")
            A, b = dataset.to_dense(config.feature_scale)
        else:
            A, b = make_multiloss_data(config.synth_count, config.synth_n,
                                       config.data_seed)
        instance = MultiLossInstance(features=A, labels=b, beta=config.beta)
        aux["instance"] = instance
        builder = multiloss_oracle if name == "multiloss" else multiloss_smooth_oracle
        problem = builder(instance)
    elif name == "portfolio":
        if config.data is not None:
            table = read_returns_csv(config.data, skip_header=config.skip_header)
            if config.subsample is not None:
                table = subsample(table, config.subsample, config.data_seed)
            R = table.values
            if R.size == 0:
                raise DataError("returns table is empty")
        else:
            R = make_portfolio_returns(config.synth_count, config.synth_n,
                                       config.data_seed)
        instance = PortfolioInstance(returns=R, beta=config.cvar_beta,
                                     rho=config.rho, gamma=config.gamma)
        aux["instance"] = instance
        problem = portfolio_oracle(instance)
    else:
        toys = synthetic_oracles()
        if name not in toys:
            raise ConfigError(f"unknown problem {name!r}; choose from "
                              f"{sorted(list(toys) + list(DATA_PROBLEMS))}")
        problem = toys[name]

    if config.regime == "expect":
        if not isinstance(problem.regime, FiniteSum):
            raise ConfigError("regime=expect requires a finite dataset to wrap")
        problem = dataclasses.replace(
            problem, regime=Expectation(population=problem.regime.N))
    elif config.regime != "finite":
        raise ConfigError("regime must be 'finite' or 'expect'")
    return problem, aux


def _schedule_constants(config: RunConfig, problem):
    c = problem.constants
    if config.sigma_g is not None or config.sigma_gprime is not None:
        c = dataclasses.replace(
            c,
            sigma_g=config.sigma_g if config.sigma_g is not None else c.sigma_g,
            sigma_gprime=(config.sigma_gprime if config.sigma_gprime is not None
                          else c.sigma_gprime))
    return c


def _resolve_M(config: RunConfig, problem) -> float:
    if config.M is not None:
        return config.M
    M = problem.default_m_penalty()
    if M is None:
        raise ConfigError("no default penalty derivable for this problem; set M")
    return M


def _population(problem) -> int:
    if isinstance(problem.regime, FiniteSum):
        return problem.regime.N
    full = problem.regime.full_tokens()
    if full is None:
        raise ConfigError("this schedule needs a finite population")
    return len(full)


def build_schedule(config: RunConfig, problem) -> Schedule:
    """Schedule from the configured mode; validates algorithm compatibility."""
    mode, algo = config.schedule, config.algorithm
    compatible = {
        "manual": ("spl", "svrpl", "sarahpl"),
        "svrg_finite": ("svrpl",),
        "minibatch": ("spl",),
        "sarah_expect_nonsmooth": ("sarahpl",),
        "sarah_finite_smooth": ("sarahpl",),
        "sarah_expect_smooth": ("sarahpl",),
        "adaptive": ("sarahpl",),
    }
    if algo == "pl":
        raise ConfigError("deterministic pl takes M and tau directly, not a schedule")
    if algo not in compatible[mode]:
        raise ConfigError(f"schedule {mode!r} pairs with {compatible[mode]}, not {algo!r}")
    M = _resolve_M(config, problem)

    if mode == "manual":
        if config.tau is None:
            raise ConfigError("manual schedule requires tau")
        if config.inner_g is None or config.inner_j is None:
            raise ConfigError("manual schedule requires inner_g and inner_j")
        if algo == "spl":
            return Schedule(K=1, tau=config.tau,
                            anchor_batch_g=config.inner_g,
                            anchor_batch_j=config.inner_j,
                            inner_batch_g=config.inner_g,
                            inner_batch_j=config.inner_j,
                            M=M, epsilon=config.epsilon, shared=config.shared)
        if config.anchor_g is None or config.anchor_j is None:
            raise ConfigError("manual schedule requires anchor_g and anchor_j")
        return Schedule(K=config.K if config.K is not None else 1,
                        tau=config.tau,
                        anchor_batch_g=config.anchor_g,
                        anchor_batch_j=config.anchor_j,
                        inner_batch_g=config.inner_g,
                        inner_batch_j=config.inner_j,
                        M=M, epsilon=config.epsilon, shared=config.shared)

    if config.epsilon is None and mode != "adaptive":
        raise ConfigError(f"schedule {mode!r} requires epsilon")
    constants = _schedule_constants(config, problem)
    if mode == "svrg_finite":
        return schedule_svrg_finite(_population(problem), config.epsilon, M,
                                    gap=config.gap, K=config.K)
    if mode == "minibatch":
        sched = schedule_minibatch(constants, config.epsilon, M=M,
                                   T=config.tau, gap=config.gap)
        return sched
    if mode == "sarah_expect_nonsmooth":
        return schedule_sarah_expect_nonsmooth(constants, config.epsilon, M=M,
                                               gap=config.gap, K=config.K)
    if mode == "sarah_finite_smooth":
        return schedule_sarah_finite_smooth(_population(problem), config.epsilon,
                                            M, gap=config.gap, K=config.K)
    if mode == "sarah_expect_smooth":
        return schedule_sarah_expect_smooth(constants, config.epsilon, M=M,
                                            gap=config.gap, K=config.K)
    if config.K is None:
        raise ConfigError("adaptive schedule requires K")
    return schedule_adaptive(constants, config.K, M=M)


# ---------------------------------------------------------------------------
# Execution helpers
# ---------------------------------------------------------------------------

def _execute(config: RunConfig, problem, seed: int):
    M = _resolve_M(config, problem)
    collector = TraceCollector(problem, M, stride=config.stride,
                               timing=config.timing)
    if config.algorithm == "pl":
        if config.tau is None:
            raise ConfigError("pl requires tau (the iteration count)")
        result = run_deterministic_pl(problem, M, config.tau, hook=collector,
                                      tol=config.tol)
    elif config.algorithm == "spl":
        schedule = build_schedule(config, problem)
        result = run_minibatch_pl(problem, schedule, seed, hook=collector,
                                  tol=config.tol)
    else:
        schedule = build_schedule(config, problem)
        scheme = "svrg_corrected" if config.algorithm == "svrpl" else "sarah"
        result = run_svr_pl(problem, scheme, schedule, seed, hook=collector,
                            tol=config.tol)
    return result


def _mean_trace(traces) -> list[TraceRecord]:
    """Average objective/stationarity/wall columns across same-shape traces."""
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise NumericalError("repeat traces have different lengths; cannot aggregate")
    out = []
    for idx in range(lengths.pop()):
        rows = [t[idx] for t in traces]
        first = rows[0]
        out.append(TraceRecord(
            samples_g=first.samples_g, samples_j=first.samples_j,
            epoch=first.epoch, inner=first.inner,
            objective=float(np.mean([r.objective for r in rows])),
            grad_map_sq=float(np.mean([r.grad_map_sq for r in rows])),
            wall_ms=int(round(float(np.mean([r.wall_ms for r in rows]))))))
    return out


def _seed_path(out: str, seed: int) -> Path:
    p = Path(out)
    return p.with_name(f"{p.stem}_seed{seed}{p.suffix or '.csv'}")


def _run_command(config: RunConfig) -> list:
    problem, _ = build_problem(config)
    traces = []
    for r in range(config.repeats):
        seed = config.seed + r
        cfg = dataclasses.replace(config, seed=seed)
        result = _execute(cfg, problem, seed)
        traces.append(list(result.trace))
        if config.repeats > 1:
            emit_trace(result.trace, _seed_path(config.out, seed))
    mean_records = _mean_trace(traces) if config.repeats > 1 else traces[0]
    emit_trace(mean_records, config.out)
    last = mean_records[-1]
    label = "mean final" if config.repeats > 1 else "final"
    click.echo(f"{label} objective = {last.objective:.10g}")
    click.echo(f"{label} squared gradient-mapping norm = {last.grad_map_sq:.10g}")
    click.echo(f"trace written to {config.out}")
    if config.figures:
        from .plots import render_trace_figures
        paths = render_trace_figures([mean_records], [config.algorithm],
                                     str(Path(config.out).with_suffix("")))
        for p in paths:
            click.echo(f"figure written to {p}")
    return mean_records


# ---------------------------------------------------------------------------
# Click wiring
# ---------------------------------------------------------------------------

def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        except (DataError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(2)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
    return wrapper


def _common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="key = value config file"),
        click.option("--problem", default=None, help="problem selector"),
        click.option("--algorithm", default=None,
                     help="pl | spl | svrpl | sarahpl"),
        click.option("--schedule", default=None,
                     help=f"one of {', '.join(SCHEDULE_MODES)}"),
        click.option("--m", "M", type=float, default=None, help="penalty M"),
        click.option("--epsilon", type=float, default=None),
        click.option("--k", "K", type=int, default=None, help="epoch count"),
        click.option("--tau", type=int, default=None, help="inner iterations"),
        click.option("--seed", type=int, default=None, help="base seed"),
        click.option("--out", default=None, help="trace CSV path"),
        click.option("--repeats", type=int, default=None,
                     help="seeded repetitions (seed, seed+1, ...)"),
        click.option("--stride", type=int, default=None, help="logging stride"),
        click.option("--timing", is_flag=True, default=None,
                     help="record wall-clock times (breaks byte reproducibility)"),
        click.option("--figures", is_flag=True, default=None,
                     help="render figures beside the CSV output"),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _overrides(kwargs) -> dict:
    return {k: v for k, v in kwargs.items() if v is not None}


@click.group()
def main():
    """Stochastic variance-reduced prox-linear optimization toolkit."""


@main.command("run")
@_common_options
@_guarded
def cmd_run(config_path, **kwargs):
    """Run the configured algorithm and write trace CSV(s)."""
    config = load_config(config_path, _overrides(kwargs))
    _run_command(config)


@main.command("check")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--problem", default=None)
@click.option("--seed", type=int, default=None)
@_guarded
def cmd_check(config_path, problem, seed):
    """Verify the selected problem: finite-difference Jacobians and constants."""
    config = load_config(config_path, _overrides({"problem": problem, "seed": seed}))
    prob, aux = build_problem(config)
    results = run_problem_checks(prob, seed=config.seed, lip_trials=10_000)
    if config.problem == "portfolio":
        results.append(check_permutation_invariance(aux["instance"],
                                                    seed=config.seed))
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        click.echo(f"[{status}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    if failed:
        raise NumericalError(f"{failed} verification check(s) failed")
    click.echo("all checks passed")


@main.command("grid")
@_common_options
@click.option("--m-list", "m_list", default=None,
              help="comma-separated penalty values to sweep")
@_guarded
def cmd_grid(config_path, m_list, **kwargs):
    """Sweep penalty values with shared seeds; report the best by final objective."""
    overrides = _overrides(kwargs)
    if m_list is not None:
        overrides["m_list"] = m_list
    config = load_config(config_path, overrides)
    if config.m_list is None:
        raise ConfigError("grid requires --m-list (or m_list in the config)")
    try:
        values = [float(v) for v in config.m_list.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad m_list: {exc}") from exc
    if not values:
        raise ConfigError("m_list is empty")
    base_out = Path(config.out)
    rows = []
    for M in values:
        out_m = base_out.with_name(f"{base_out.stem}_M{M:g}{base_out.suffix or '.csv'}")
        cfg = dataclasses.replace(config, M=M, out=str(out_m))
        records = _run_command(cfg)
        rows.append((M, records[-1].objective))
        click.echo(f"M = {M:g}: final objective {records[-1].objective:.10g}")
    best_M, best_val = min(rows, key=lambda t: t[1])
    summary = base_out.with_name(f"{base_out.stem}_summary{base_out.suffix or '.csv'}")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        fh.write("M,final_objective\n")
        for M, val in rows:
            fh.write("%.17g,%.17g\n" % (M, val))
    click.echo(f"summary written to {summary}")
    click.echo(f"best M = {best_M:g} (final objective {best_val:.10g})")


if __name__ == "__main__":
    main()
