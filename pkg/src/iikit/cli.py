"""Batch experiment runner for the integral-inequality toolkit.

Experiments are declared in TOML configs (documented in the README) and
dispatched to the bound/fmt engines.  Each run writes one machine-readable
report (json or csv) whose rows carry the computed values, the tolerances
they were judged against, and a pass/fail verdict; identical config and
seed produce byte-identical json reports.  Wall-clock timings go to
stdout only, never into report files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import fmt as fmt_mod
from .bound import (
    CostMatrix,
    Signal,
    cauchy_identity_check,
    hierarchy_sweep,
    lower_bound,
    transformed_bound,
    upper_bound,
    weighted_moment_reduction,
)
from .domain import Domain
from .errors import ConfigError, IIKitError
from .polyalg import (
    PolyFamily,
    classical_family,
    jacobi_family,
    legendre_family,
    monomial_family,
)
from .quad import WeightSpec

EXPERIMENTS = (
    "bound",
    "sweep",
    "converge",
    "invariance",
    "cauchy",
    "fmt-probe",
    "reduction",
)

KERNEL_KINDS = ("legendre", "jacobi", "laguerre", "hermite", "monomial")
WEIGHT_KINDS = ("unit", "jacobi", "laguerre", "hermite")
SIGNAL_KINDS = ("poly", "exp", "sin", "ramp")

DEFAULT_TOLERANCES = {
    "bound_slack": 1e-9,
    "gap_identity": 1e-8,
    "defect": 1e-9,
    "monotonic": 1e-10,
    "invariance": 1e-9,
    "cauchy": 1e-8,
    "reduction": 1e-9,
    "dominance": 1e-8,
    "soundness": 1e-9,
    "convergence_ratio": 1e-3,
    "probe_warn_ratio": 0.99,
}

# Fixed column order of csv reports; absent values serialize as empty cells.
CSV_COLUMNS = (
    "experiment",
    "index",
    "label",
    "d",
    "p",
    "side",
    "cond",
    "upper",
    "lower",
    "gap",
    "relative_gap",
    "residual_norm",
    "max_defect",
    "lb_original",
    "lb_transformed",
    "nested_value",
    "weighted_value",
    "lb_jacobi",
    "lb_reduced",
    "projection_lb",
    "best_fmt_lb",
    "ratio",
    "gap_ratio",
    "discrepancy",
    "passed",
    "warning",
)


@dataclass
class ReportRow:
    """One result line of an experiment.

    ``values`` maps metric names to plain Python scalars.  ``wall_time_s``
    is display-only: it never enters report files so that reruns with the
    same seed stay byte-identical.
    """

    experiment: str
    index: int
    label: str
    values: dict
    passed: bool
    warning: str = ""
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        out = {"experiment": self.experiment, "index": self.index, "label": self.label}
        out.update(self.values)
        out["passed"] = bool(self.passed)
        out["warning"] = self.warning
        return out


@dataclass
class ExperimentConfig:
    experiment: str
    domain: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    weight: dict = field(default_factory=dict)
    signal: dict = field(default_factory=dict)
    cost: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None
    output_format: str = "json"

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def resolved(self) -> dict:
        """Self-describing echo embedded in every report."""
        return {
            "experiment": self.experiment,
            "domain": dict(self.domain),
            "kernel": dict(self.kernel),
            "weight": dict(self.weight),
            "signal": dict(self.signal),
            "cost": dict(self.cost),
            "params": dict(self.params),
            "tolerances": {
                k: self.tol(k) for k in sorted(DEFAULT_TOLERANCES)
            },
            "seed": self.seed,
            "output_format": self.output_format,
        }


@dataclass
class RunResult:
    status: int
    rows: list
    report_path: Path | None


# ---------------------------------------------------------------------------
# Config parsing and validation
# ---------------------------------------------------------------------------


def _natural_weight_kind(kernel_kind: str) -> str:
    return {
        "legendre": "unit",
        "monomial": "unit",
        "jacobi": "jacobi",
        "laguerre": "laguerre",
        "hermite": "hermite",
    }[kernel_kind]


def _natural_domain_kind(kernel_kind: str | None, weight_kind: str | None) -> str:
    kind = weight_kind or (kernel_kind and _natural_weight_kind(kernel_kind)) or "unit"
    if kind == "laguerre":
        return "half_line"
    if kind == "hermite":
        return "real_line"
    return "finite"


def parse_config(text: str, name: str = "<config>") -> ExperimentConfig:
    """Validated config, or :class:`ConfigError` carrying every violation."""
    violations: list[str] = []
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{name}: not valid TOML ({exc})"]) from exc

    known_top = {
        "experiment", "seed", "domain", "kernel", "weight",
        "signal", "cost", "params", "tolerances", "output",
    }
    for key in doc:
        if key not in known_top:
            violations.append(f"{key}: unknown section or key")

    experiment = doc.get("experiment")
    if experiment is None:
        violations.append("experiment: missing")
    elif experiment not in EXPERIMENTS:
        violations.append(
            f"experiment: unknown value {experiment!r}; expected one of {', '.join(EXPERIMENTS)}"
        )

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        violations.append("seed: must be an integer")
        seed = 0

    domain = dict(doc.get("domain", {}))
    kernel = dict(doc.get("kernel", {}))
    weight = dict(doc.get("weight", {}))
    signal = dict(doc.get("signal", {}))
    cost = dict(doc.get("cost", {}))
    params = dict(doc.get("params", {}))
    tolerances = dict(doc.get("tolerances", {}))
    output = dict(doc.get("output", {}))

    needs_kernel = experiment in ("bound", "sweep", "converge", "invariance", "fmt-probe")

    if needs_kernel:
        _validate_kernel(kernel, violations)
    _validate_domain(domain, kernel, weight, violations)
    _validate_weight(weight, kernel, violations)
    _validate_signal(signal, violations)
    _validate_cost(cost, signal, violations)
    _validate_params(params, experiment, violations)
    _validate_tolerances(tolerances, violations)

    output_format = output.get("format", "json")
    if output_format not in ("json", "csv"):
        violations.append(f"output.format: must be 'json' or 'csv', got {output_format!r}")
    output_path = output.get("path")
    if output_path is not None and not isinstance(output_path, str):
        violations.append("output.path: must be a string")

    if violations:
        raise ConfigError(violations)

    config = ExperimentConfig(
        experiment=experiment,
        domain=domain,
        kernel=kernel,
        weight=weight,
        signal=signal,
        cost=cost,
        params=params,
        tolerances=tolerances,
        seed=seed,
        output_path=output_path,
        output_format=output_format,
    )
    # every referenced spec must resolve to a constructible object
    try:
        built_domain = build_domain(config)
        built_weight = build_weight(config, built_domain)
        if needs_kernel:
            build_family(config, built_domain, built_weight)
        x = build_signal(config, built_domain)
        U = build_cost(config)
        if x.n != U.n:
            violations.append(
                f"cost: dimension {U.n} does not match signal dimension {x.n}"
            )
    except ConfigError as exc:
        violations.extend(exc.violations)
    except IIKitError as exc:
        violations.append(f"config: {exc}")
    if violations:
        raise ConfigError(violations)
    return config


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _validate_kernel(kernel: dict, violations: list[str]) -> None:
    kind = kernel.get("kind")
    if kind is None:
        violations.append("kernel.kind: missing")
        return
    if kind not in KERNEL_KINDS:
        violations.append(f"kernel.kind: unknown kind {kind!r}")
        return
    d = kernel.get("d")
    if d is None:
        violations.append("kernel.d: missing (number of kernel functions)")
    elif not isinstance(d, int) or d < 1:
        violations.append(f"kernel.d: must be an integer >= 1, got {d!r}")
    if kind in ("jacobi", "laguerre"):
        alpha = kernel.get("alpha", 0.0)
        if not _is_number(alpha) or alpha <= -1:
            violations.append(f"kernel.alpha: must be a number > -1, got {alpha!r}")
    if kind == "jacobi":
        beta = kernel.get("beta", 0.0)
        if not _is_number(beta) or beta <= -1:
            violations.append(f"kernel.beta: must be a number > -1, got {beta!r}")


def _validate_domain(domain, kernel, weight, violations) -> None:
    kind = domain.get("kind")
    if kind is None:
        return  # defaulted from kernel/weight at build time
    if kind not in ("finite", "half_line", "real_line"):
        violations.append(f"domain.kind: unknown kind {kind!r}")
        return
    if kind == "finite":
        a, b = domain.get("a"), domain.get("b")
        if not (_is_number(a) and _is_number(b)):
            violations.append("domain.a/domain.b: finite domain needs numeric endpoints")
        elif not b > a:
            violations.append(f"domain.b: must exceed domain.a, got [{a}, {b}]")


def _validate_weight(weight, kernel, violations) -> None:
    kind = weight.get("kind")
    if kind is None:
        return
    if kind not in WEIGHT_KINDS:
        violations.append(f"weight.kind: unknown kind {kind!r}")
        return
    if kind in ("jacobi", "laguerre"):
        alpha = weight.get("alpha", 0.0)
        if not _is_number(alpha) or alpha <= -1:
            violations.append(f"weight.alpha: must be a number > -1, got {alpha!r}")
    if kind == "jacobi":
        beta = weight.get("beta", 0.0)
        if not _is_number(beta) or beta <= -1:
            violations.append(f"weight.beta: must be a number > -1, got {beta!r}")


def _validate_signal(signal, violations) -> None:
    kind = signal.get("kind")
    if kind is None:
        violations.append("signal.kind: missing")
        return
    if kind not in SIGNAL_KINDS:
        violations.append(f"signal.kind: unknown kind {kind!r}")
        return
    if kind == "poly":
        coeffs = signal.get("coeffs")
        if coeffs is None:
            violations.append("signal.coeffs: missing for poly signals")
        else:
            rows = coeffs if isinstance(coeffs, list) else None
            ok = (
                rows
                and all(isinstance(r, list) and r for r in rows)
                and all(_is_number(v) for r in rows for v in r)
            )
            if not ok:
                violations.append(
                    "signal.coeffs: must be a nonempty list of numeric rows"
                )
    else:
        for key in ("rate", "freq", "knot"):
            if key in signal and not _is_number(signal[key]):
                violations.append(f"signal.{key}: must be a number")


def _validate_cost(cost, signal, violations) -> None:
    kind = cost.get("kind")
    if kind is None:
        violations.append("cost.kind: missing ('identity' or 'matrix')")
        return
    if kind == "identity":
        n = cost.get("n", 1)
        if not isinstance(n, int) or n < 1:
            violations.append(f"cost.n: must be an integer >= 1, got {n!r}")
    elif kind == "matrix":
        m = cost.get("matrix")
        ok = (
            isinstance(m, list)
            and m
            and all(isinstance(r, list) and len(r) == len(m) for r in m)
            and all(_is_number(v) for r in m for v in r)
        )
        if not ok:
            violations.append("cost.matrix: must be a square numeric matrix")
        else:
            try:
                CostMatrix(np.array(m, dtype=float))
            except IIKitError as exc:
                violations.append(f"cost.matrix: {exc}")
    else:
        violations.append(f"cost.kind: unknown kind {kind!r}")


def _validate_params(params, experiment, violations) -> None:
    def check_int(key, minimum, default=None):
        v = params.get(key, default)
        if v is None:
            violations.append(f"params.{key}: missing for {experiment}")
        elif not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            violations.append(f"params.{key}: must be an integer >= {minimum}")

    if experiment in ("sweep", "converge"):
        # kernel.d is the top of the sweep; d_max is accepted as an alias
        d_max = params.get("d_max")
        if d_max is not None and (not isinstance(d_max, int) or d_max < 1):
            violations.append("params.d_max: must be an integer >= 1")
        if experiment == "converge":
            check_int("d_min", 1, default=params.get("d_min", 1))
            d_min = params.get("d_min", 1)
            top = d_max if d_max is not None else None
            if isinstance(d_min, int) and isinstance(top, int) and d_min >= top:
                violations.append("params.d_min: must be below the sweep top")
    elif experiment == "cauchy":
        check_int("p", 1, default=params.get("p", 1))
        side = params.get("side", "lower")
        if side not in ("lower", "upper", "both"):
            violations.append(f"params.side: must be lower, upper or both, got {side!r}")
    elif experiment == "reduction":
        check_int("p", 1, default=params.get("p", 1))
        check_int("d", 0, default=params.get("d", 0))
    elif experiment == "invariance":
        check_int("count", 1, default=params.get("count", 200))
    elif experiment == "fmt-probe":
        check_int("rho", 1, default=params.get("rho", 1))
        check_int("budget", 1, default=params.get("budget", 8))
        check_int("iters", 0, default=params.get("iters", 40))


def _validate_tolerances(tolerances, violations) -> None:
    for key, value in tolerances.items():
        if key not in DEFAULT_TOLERANCES:
            violations.append(f"tolerances.{key}: unknown tolerance")
        elif not _is_number(value) or value <= 0:
            violations.append(f"tolerances.{key}: must be a positive number")


# ---------------------------------------------------------------------------
# Object construction from a validated config
# ---------------------------------------------------------------------------


def build_domain(config: ExperimentConfig) -> Domain:
    spec = config.domain
    kind = spec.get(
        "kind",
        _natural_domain_kind(config.kernel.get("kind"), config.weight.get("kind")),
    )
    if kind == "finite":
        return Domain.finite(spec.get("a", 0.0), spec.get("b", 1.0))
    if kind == "half_line":
        return Domain.half_line()
    return Domain.real_line()


def build_weight(config: ExperimentConfig, domain: Domain) -> WeightSpec:
    spec = config.weight
    kind = spec.get("kind")
    if kind is None:
        kernel_kind = config.kernel.get("kind")
        if kernel_kind is None:
            kind = "unit"
        else:
            kind = _natural_weight_kind(kernel_kind)
            if kind == "jacobi":
                spec = {
                    "alpha": config.kernel.get("alpha", 0.0),
                    "beta": config.kernel.get("beta", 0.0),
                }
            elif kind == "laguerre":
                spec = {"alpha": config.kernel.get("alpha", 0.0)}
    if kind == "unit":
        return WeightSpec.unit(domain)
    if kind == "jacobi":
        return WeightSpec.jacobi(spec.get("alpha", 0.0), spec.get("beta", 0.0), domain)
    if kind == "laguerre":
        return WeightSpec.laguerre(spec.get("alpha", 0.0))
    return WeightSpec.hermite()


def build_family(config: ExperimentConfig, domain: Domain, weight: WeightSpec) -> PolyFamily:
    spec = config.kernel
    kind = spec["kind"]
    dmax = spec["d"] - 1
    if kind == "legendre":
        fam = legendre_family(dmax, domain.a, domain.b)
    elif kind == "jacobi":
        fam = jacobi_family(
            dmax, spec.get("alpha", 0.0), spec.get("beta", 0.0), domain.a, domain.b
        )
    elif kind == "monomial":
        fam = monomial_family(dmax, domain=domain, weight=weight)
    else:
        fam = classical_family(kind, dmax, alpha=spec.get("alpha", 0.0))
    if fam.domain != domain:
        raise ConfigError(
            [f"kernel.kind: {kind} kernels live on {fam.domain.describe()}, "
             f"config domain is {domain.describe()}"]
        )
    return fam.with_weight(weight)


def build_signal(config: ExperimentConfig, domain: Domain) -> Signal:
    spec = config.signal
    kind = spec["kind"]
    if kind == "poly":
        return Signal.poly(np.array(spec["coeffs"], dtype=float), domain)
    certified = bool(spec.get("decay_certified", False))
    if kind == "exp":
        rate = float(spec.get("rate", 1.0))
        fn = lambda t: np.array([np.exp(rate * t)])  # noqa: E731
    elif kind == "sin":
        freq = float(spec.get("freq", 3.0))
        fn = lambda t: np.array([np.sin(freq * t)])  # noqa: E731
    else:  # ramp
        knot = float(spec.get("knot", 0.5))
        fn = lambda t: np.array([max(0.0, t - knot)])  # noqa: E731
    return Signal.from_callable(fn, 1, domain, decay_certified=certified)


def build_cost(config: ExperimentConfig) -> CostMatrix:
    spec = config.cost
    if spec["kind"] == "identity":
        return CostMatrix.identity(spec.get("n", 1))
    return CostMatrix(np.array(spec["matrix"], dtype=float))


def _build_instance(config: ExperimentConfig):
    domain = build_domain(config)
    weight = build_weight(config, domain)
    x = build_signal(config, domain)
    U = build_cost(config)
    if x.n != U.n:
        raise ConfigError(
            [f"cost: dimension {U.n} does not match signal dimension {x.n}"]
        )
    return domain, weight, x, U


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _bound_row_values(rep) -> dict:
    return {
        "upper": float(rep.upper),
        "lower": float(rep.lower),
        "gap": float(rep.gap),
        "relative_gap": float(rep.relative_gap),
        "residual_norm": float(rep.residual_norm),
        "max_defect": float(np.max(rep.orthogonality_defects)),
    }


def _bound_checks(rep, config: ExperimentConfig) -> bool:
    slack = config.tol("bound_slack")
    ok = rep.lower <= rep.upper + slack * max(1.0, abs(rep.upper))
    # the residual energy must reproduce the gap; once both sit at the
    # rounding floor of the integrals the relative comparison is vacuous
    floor = 1e-11 * max(1.0, abs(rep.upper))
    residual_sq = rep.residual_norm**2
    gap_ok = abs(residual_sq - rep.gap) <= config.tol("gap_identity") * abs(rep.gap)
    gap_ok |= abs(rep.gap) <= floor and residual_sq <= floor
    ok &= gap_ok
    ok &= float(np.max(rep.orthogonality_defects)) <= config.tol("defect") * max(
        1.0, abs(rep.upper)
    )
    return bool(ok)


def _run_bound(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    family = build_family(config, domain, weight)
    rep = lower_bound(family, x, U)
    return [
        ReportRow(
            experiment=config.experiment,
            index=0,
            label=f"{config.kernel['kind']} d={family.size}",
            values=_bound_row_values(rep),
            passed=_bound_checks(rep, config),
        )
    ]


def _prefix_builder(config: ExperimentConfig, domain, weight, d_top: int):
    top = ExperimentConfig(config.experiment, kernel=dict(config.kernel, d=d_top))
    base = build_family(top, domain, weight)
    return lambda d: base.prefix(d)


def _run_sweep(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    d_max = config.params.get("d_max", config.kernel["d"])
    builder = _prefix_builder(config, domain, weight, d_max)
    reports = hierarchy_sweep(builder, x, U, range(1, d_max + 1))
    mono_tol = config.tol("monotonic")
    rows = []
    prev = None
    for i, rep in enumerate(reports):
        ok = _bound_checks(rep, config)
        if prev is not None:
            ok &= rep.lower >= prev - mono_tol * max(1.0, abs(prev))
        values = {"d": i + 1}
        values.update(_bound_row_values(rep))
        rows.append(
            ReportRow(config.experiment, i, f"d={i + 1}", values, bool(ok))
        )
        prev = rep.lower
    return rows


def _run_converge(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    d_min = config.params.get("d_min", 1)
    d_max = config.params.get("d_max", config.kernel["d"])
    builder = _prefix_builder(config, domain, weight, d_max)
    reports = hierarchy_sweep(builder, x, U, range(d_min, d_max + 1))
    rows = []
    for i, rep in enumerate(reports):
        d = d_min + i
        values = {"d": d}
        values.update(_bound_row_values(rep))
        rows.append(ReportRow(config.experiment, i, f"d={d}", values, True))
    ratio = reports[-1].gap / max(reports[0].gap, 1e-300)
    ratio_tol = config.tol("convergence_ratio")
    rows.append(
        ReportRow(
            config.experiment,
            len(rows),
            f"gap ratio d={d_max} vs d={d_min}",
            {"gap_ratio": float(ratio)},
            bool(ratio < ratio_tol),
        )
    )
    return rows


def _random_transform(rng, d: int, max_log_cond: float) -> tuple[np.ndarray, float]:
    from scipy.stats import ortho_group

    log_cond = rng.uniform(0.0, max_log_cond)
    if d == 1:
        scale = float(np.exp(rng.uniform(np.log(0.5), np.log(2.0))))
        return np.array([[scale]]), 1.0
    spread = np.linspace(-0.5, 0.5, d) * log_cond * np.log(10.0)
    s = np.exp(spread)
    Q1 = ortho_group.rvs(d, random_state=rng)
    Q2 = ortho_group.rvs(d, random_state=rng)
    return Q1 @ np.diag(s) @ Q2, float(s[-1] / s[0])


def _run_invariance(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    family = build_family(config, domain, weight)
    count = config.params.get("count", 200)
    max_log_cond = float(config.params.get("max_log_cond", 6.0))
    tol = config.tol("invariance")
    rows = []
    for i in range(count):
        G, cond = _random_transform(rng, family.size, max_log_cond)
        tb = transformed_bound(family, G, x, U)
        diff = abs(tb.lb_transformed - tb.lb_original)
        ok = diff <= tol * max(abs(tb.lb_original), 1e-300)
        rows.append(
            ReportRow(
                config.experiment,
                i,
                f"draw {i} cond={cond:.2e}",
                {
                    "cond": cond,
                    "lb_original": float(tb.lb_original),
                    "lb_transformed": float(tb.lb_transformed),
                    "discrepancy": float(diff),
                },
                bool(ok),
            )
        )
    return rows


def _run_cauchy(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    p = config.params.get("p", 1)
    side = config.params.get("side", "lower")
    sides = ("lower", "upper") if side == "both" else (side,)
    tol = config.tol("cauchy")
    rows = []
    for i, s in enumerate(sides):
        check = cauchy_identity_check(x, p, s)
        ok = check.discrepancy <= tol * max(
            1.0, float(np.max(np.abs(check.weighted_value)))
        )
        rows.append(
            ReportRow(
                config.experiment,
                i,
                f"p={p} side={s}",
                {
                    "p": p,
                    "side": s,
                    "nested_value": float(np.max(np.abs(check.nested_value))),
                    "weighted_value": float(np.max(np.abs(check.weighted_value))),
                    "discrepancy": float(check.discrepancy),
                },
                bool(ok),
            )
        )
    return rows


def _run_reduction(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    if not domain.is_finite:
        raise ConfigError(["domain.kind: reduction requires a finite interval"])
    p = config.params.get("p", 1)
    d = config.params.get("d", 0)
    check = weighted_moment_reduction(p, d, domain.a, domain.b, x, U)
    tol = config.tol("reduction")
    ok = check.discrepancy <= tol * max(abs(check.lb_jacobi), 1e-300)
    return [
        ReportRow(
            config.experiment,
            0,
            f"p={p} d={d}",
            {
                "p": p,
                "d": d,
                "lb_jacobi": float(check.lb_jacobi),
                "lb_reduced": float(check.lb_reduced),
                "discrepancy": float(check.discrepancy),
            },
            bool(ok),
        )
    ]


def _run_fmt_probe(config: ExperimentConfig, rng) -> list[ReportRow]:
    domain, weight, x, U = _build_instance(config)
    family = build_family(config, domain, weight)
    rho = config.params.get("rho", family.size)
    budget = config.params.get("budget", 8)
    iters = config.params.get("iters", 40)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", fmt_mod.FmtProbeWarning)
        probe = fmt_mod.equivalence_probe(
            family,
            x,
            U,
            rho=rho,
            budget=budget,
            seed=config.seed,
            max_iters=iters,
            warn_ratio=config.tol("probe_warn_ratio"),
        )
    upper = upper_bound(x, U, family.weight)
    sound = probe.best_fmt_lb <= upper + config.tol("soundness") * max(1.0, upper)
    dominated = probe.ratio <= 1.0 + config.tol("dominance")
    warning = ""
    if probe.warning_issued:
        warning = "; ".join(str(w.message) for w in caught) or "probe budget exhausted"
    return [
        ReportRow(
            config.experiment,
            0,
            f"rho={rho} budget={budget}",
            {
                "upper": float(upper),
                "projection_lb": float(probe.projection_lb),
                "best_fmt_lb": float(probe.best_fmt_lb),
                "ratio": float(probe.ratio),
            },
            bool(sound and dominated),
            warning=warning,
        )
    ]


_RUNNERS = {
    "bound": _run_bound,
    "sweep": _run_sweep,
    "converge": _run_converge,
    "invariance": _run_invariance,
    "cauchy": _run_cauchy,
    "reduction": _run_reduction,
    "fmt-probe": _run_fmt_probe,
}


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def _plain(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def emit_table(rows: list[ReportRow], format: str = "json") -> bytes:
    """Serialized table of report rows.

    json is an array of row objects mirroring the row fields; csv uses the
    fixed documented column order with shortest-round-trip decimal floats.
    Wall times are never serialized.
    """
    if not rows:
        raise ConfigError(["rows: nothing to emit"])
    dicts = [{k: _plain(v) for k, v in row.as_dict().items()} for row in rows]
    if format == "json":
        return (json.dumps(dicts, indent=2, sort_keys=True) + "\n").encode()
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for d in dicts:
            lines.append(",".join(_csv_cell(d.get(col)) for col in CSV_COLUMNS))
        return ("\n".join(lines) + "\n").encode()
    raise ConfigError([f"output.format: unknown format {format!r}"])


def run(
    config: ExperimentConfig,
    out_dir: Path | str | None = None,
    source_name: str = "experiment",
    write_report: bool = True,
    echo=print,
) -> RunResult:
    """Execute one experiment: report rows, a report file, and exit status.

    Exit status 0 means every row passed (probe warnings do not fail a
    row); 1 means at least one row failed.  Config errors surface as
    :class:`ConfigError` and are mapped to status 2 by the command line.
    """
    rng = np.random.default_rng(config.seed)
    start = time.perf_counter()
    try:
        rows = _RUNNERS[config.experiment](config, rng)
    except ConfigError:
        raise
    except IIKitError as exc:
        # module errors become a failed row so the report stays readable
        rows = [
            ReportRow(
                experiment=config.experiment,
                index=0,
                label="error",
                values={},
                passed=False,
                warning=f"{type(exc).__name__}: {exc}",
            )
        ]
    elapsed = time.perf_counter() - start
    if rows:
        rows[-1].wall_time_s = elapsed

    status = 0 if all(r.passed for r in rows) else 1
    report_path = None
    if write_report:
        fmt = config.output_format
        name = config.output_path or f"{Path(source_name).stem}.{fmt}"
        base = Path(out_dir) if out_dir is not None else Path.cwd()
        report_path = base / name
        report_path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            document = {
                "experiment": config.experiment,
                "config": config.resolved(),
                "rows": [
                    {k: _plain(v) for k, v in row.as_dict().items()} for row in rows
                ],
                "status": "pass" if status == 0 else "fail",
            }
            payload = (json.dumps(document, indent=2, sort_keys=True) + "\n").encode()
        else:
            echo_line = json.dumps(config.resolved(), sort_keys=True)
            payload = (f"# config: {echo_line}\n").encode() + emit_table(rows, "csv")
        report_path.write_bytes(payload)

    if echo is not None:
        for row in rows:
            mark = "PASS" if row.passed else "FAIL"
            vals = " ".join(
                f"{k}={_csv_cell(_plain(v))}" for k, v in row.values.items()
            )
            note = f"  [warning: {row.warning}]" if row.warning else ""
            echo(f"[{mark}] {row.experiment} {row.label}: {vals}{note}")
        echo(
            f"status={'pass' if status == 0 else 'fail'} "
            f"rows={len(rows)} elapsed={elapsed:.3f}s"
            + (f" report={report_path}" if report_path else "")
        )
    return RunResult(status, rows, report_path)


# ---------------------------------------------------------------------------
# Table presets: named instances of the classical inequality families
# ---------------------------------------------------------------------------

PRESETS: dict[str, tuple[str, str]] = {
    "jensen": (
        "Jensen instance: single constant kernel, unit weight on [0,1], x = tau",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[kernel]
kind = "legendre"
d = 1

[signal]
kind = "poly"
coeffs = [[0.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
    "seuret-gouaisbaut": (
        "Bessel-Legendre instance: unit weight with Legendre kernels",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[kernel]
kind = "legendre"
d = 4

[signal]
kind = "exp"
rate = 1.0

[cost]
kind = "identity"
n = 1
""",
    ),
    "feng-nguang": (
        "Elementary-kernel instance: unit weight with raw monomials "
        "(same span as seuret-gouaisbaut, hence the same lower bound)",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[kernel]
kind = "monomial"
d = 4

[weight]
kind = "unit"

[signal]
kind = "exp"
rate = 1.0

[cost]
kind = "identity"
n = 1
""",
    ),
    "gyurkovics-takacs": (
        "Weighted-moment reduction: weight (tau-a)^p with Jacobi(0,p) kernels, "
        "reduced to unweighted Legendre moments",
        """\
experiment = "reduction"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[params]
p = 1
d = 2

[signal]
kind = "poly"
coeffs = [[0.0, 0.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
    "chen-xu": (
        "Single-endpoint weight (b-tau)^m with the matching Jacobi(m,0) kernels",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[kernel]
kind = "jacobi"
d = 3
alpha = 1.0
beta = 0.0

[signal]
kind = "poly"
coeffs = [[0.0, 1.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
    "park-kwon-ryu": (
        "Weight (tau-a)^k paired with Jacobi(k,0) kernels "
        "(non-orthogonal pairing; the Gram matrix is dense)",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = 0.0
b = 1.0

[kernel]
kind = "jacobi"
d = 3
alpha = 2.0
beta = 0.0

[weight]
kind = "jacobi"
alpha = 0.0
beta = 2.0

[signal]
kind = "poly"
coeffs = [[0.0, 1.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
    "liu-fridman": (
        "Half-line instance: kernel [1; g(tau)] with g(tau) = tau under the "
        "exponential weight",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "half_line"

[kernel]
kind = "monomial"
d = 2

[weight]
kind = "laguerre"
alpha = 0.0

[signal]
kind = "poly"
coeffs = [[1.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
    "huang-he": (
        "Negative-interval instance on [-1, 0]: weight (-tau)(tau+1) with "
        "Jacobi(1,1) kernels",
        """\
experiment = "bound"
seed = 0

[domain]
kind = "finite"
a = -1.0
b = 0.0

[kernel]
kind = "jacobi"
d = 3
alpha = 1.0
beta = 1.0

[signal]
kind = "poly"
coeffs = [[0.0, 1.0]]

[cost]
kind = "identity"
n = 1
""",
    ),
}


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def _load_config_text(ref: str) -> tuple[str, str]:
    """Config text plus a name, from a preset name or a file path."""
    if ref in PRESETS:
        return PRESETS[ref][1], ref
    path = Path(ref)
    if not path.exists():
        raise ConfigError(
            [f"config: {ref!r} is neither a preset name nor an existing file"]
        )
    return path.read_text(), path.name


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        config.seed = args.seed
    if args.format is not None:
        config.output_format = args.format
        if config.output_path is not None:
            config.output_path = str(
                Path(config.output_path).with_suffix(f".{args.format}")
            )
    violations = []
    for item in args.tol or []:
        key, _, raw = item.partition("=")
        if not _:
            violations.append(f"--tol {item!r}: expected K=V")
            continue
        try:
            value = float(raw)
        except ValueError:
            violations.append(f"--tol {key}: {raw!r} is not a number")
            continue
        if key not in DEFAULT_TOLERANCES:
            violations.append(f"--tol {key}: unknown tolerance")
        elif value <= 0:
            violations.append(f"--tol {key}: must be positive")
        else:
            config.tolerances[key] = value
    if violations:
        raise ConfigError(violations)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ii-kit",
        description="Batch runner for weighted integral-inequality experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config or preset")
    p_run.add_argument("config", help="path to a TOML config, or a preset name")
    p_run.add_argument("--out", default=None, help="directory for the report file")
    p_run.add_argument("--format", choices=("json", "csv"), default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument(
        "--tol",
        action="append",
        metavar="K=V",
        help="tolerance override, repeatable",
    )

    p_val = sub.add_parser("validate", help="check a config against the schema")
    p_val.add_argument("config", help="path to a TOML config, or a preset name")

    sub.add_parser("presets", help="list the named classical-instance presets")

    args = parser.parse_args(argv)

    if args.command == "presets":
        width = max(len(name) for name in PRESETS)
        for name, (description, _) in PRESETS.items():
            print(f"{name:<{width}}  {description}")
        return 0

    try:
        text, name = _load_config_text(args.config)
        config = parse_config(text, name)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"{name}: valid ({config.experiment} experiment)")
        return 0

    try:
        config = _apply_overrides(config, args)
        result = run(config, out_dir=args.out, source_name=name)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    except IIKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return result.status


if __name__ == "__main__":
    sys.exit(main())
