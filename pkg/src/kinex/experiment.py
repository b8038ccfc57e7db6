"""Experiment orchestration: JSON configs in, CSV/JSON artifacts out.

An experiment document describes one simulation plus replicate count,
requested outputs, and optional assertions; a sweep document adds axes of
parameter overrides. Replicates run concurrently on independent streams
derived from the master seed; aggregation is a sequential final pass so
results documents are bit-identical for identical documents on the same
build (no timestamps or timings are ever written into artifacts).

Artifacts:
  histogram.csv   bin_left, count, probability  (pooled; per replicate too)
  series.csv      sweep, entropy, temperature, ks_to_exponential
  fits.json       fit results for the pooled histogram
  results.json    everything: config echo + hash, seeds, summaries, verdicts
All file headers carry the config hash so mismatched replays are
detectable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .boundaries import (
    BoundaryPolicy,
    DebtCap,
    InterestRates,
    NoDebt,
    ReserveRatioBank,
    TwoSided,
    Unlimited,
    UpperBound,
    lower_bound,
)
from .engine import RunResult, run_simulation
from .histogram import MoneyHistogram, histogram_from_balances, pool_histograms
from .ledger import ConfigError, SimConfig
from .rules import (
    ExchangeRule,
    FixedAmount,
    Multiplicative,
    RandomSavingPropensity,
    SavingPropensity,
    UniformRandomFraction,
)
from . import stats

__all__ = [
    "ConfigFileError",
    "ExperimentSpec",
    "spec_from_document",
    "load_document",
    "normalized_document",
    "config_hash",
    "replicate_seed",
    "sweep_point_seed",
    "run_experiment",
    "run_sweep",
    "oracle_check",
    "histogram_to_csv",
    "histogram_from_csv",
    "apply_override",
]

EXPERIMENT_SCHEMA = "kinex-experiment/1"
RESULTS_SCHEMA = "kinex-results/1"
HISTOGRAM_SCHEMA = "kinex-histogram/1"
SERIES_SCHEMA = "kinex-series/1"

KNOWN_OUTPUTS = (
    "snapshots",
    "entropy_series",
    "temperature_series",
    "fits",
    "tail",
    "stationarity",
    "oracle_check",
)

KNOWN_ASSERTIONS = (
    "temperature_range",
    "temperature_positive_range",
    "temperature_negative_range",
    "ks_to_exponential_max",
    "gamma_shape_min",
    "ks_gamma_below_exponential",
    "first_bin_probability_max",
    "tail_density_exponent_range",
    "stationary",
)


class ConfigFileError(ValueError):
    """A config document failed validation; ``field`` is the dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _need(doc: dict, field: str, path: str, kind=None):
    if field not in doc:
        raise ConfigFileError(f"{path}.{field}" if path else field, "missing required field")
    value = doc[field]
    if kind is not None and not isinstance(value, kind):
        raise ConfigFileError(
            f"{path}.{field}" if path else field,
            f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}",
        )
    return value


def _reject_unknown(doc: dict, allowed, path: str) -> None:
    for key in doc:
        if key not in allowed:
            raise ConfigFileError(f"{path}.{key}" if path else key, "unknown field")


# ---------------------------------------------------------------------------
# rule / boundary (de)serialization


def rule_from_document(doc: Any, path: str = "simulation.rule") -> ExchangeRule:
    if not isinstance(doc, dict):
        raise ConfigFileError(path, "expected an object with a 'kind' field")
    kind = _need(doc, "kind", path, str)
    try:
        if kind == "fixed_amount":
            _reject_unknown(doc, {"kind", "amount"}, path)
            return FixedAmount(amount=float(_need(doc, "amount", path, (int, float))))
        if kind == "uniform_random_fraction":
            _reject_unknown(doc, {"kind", "scale"}, path)
            scale = doc.get("scale")
            return UniformRandomFraction(scale=None if scale is None else float(scale))
        if kind == "multiplicative":
            _reject_unknown(doc, {"kind", "fraction"}, path)
            return Multiplicative(fraction=float(_need(doc, "fraction", path, (int, float))))
        if kind == "saving_propensity":
            _reject_unknown(doc, {"kind", "propensity"}, path)
            return SavingPropensity(
                propensity=float(_need(doc, "propensity", path, (int, float)))
            )
        if kind == "random_saving_propensity":
            _reject_unknown(doc, {"kind", "propensity_max"}, path)
            kwargs = {}
            if "propensity_max" in doc:
                kwargs["propensity_max"] = float(doc["propensity_max"])
            return RandomSavingPropensity(**kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigFileError):
            raise
        raise ConfigFileError(path, str(exc)) from exc
    raise ConfigFileError(f"{path}.kind", f"unknown exchange rule {kind!r}")


def rule_to_document(rule: ExchangeRule) -> dict:
    if isinstance(rule, FixedAmount):
        return {"kind": "fixed_amount", "amount": rule.amount}
    if isinstance(rule, UniformRandomFraction):
        return {"kind": "uniform_random_fraction", "scale": rule.scale}
    if isinstance(rule, Multiplicative):
        return {"kind": "multiplicative", "fraction": rule.fraction}
    if isinstance(rule, SavingPropensity):
        return {"kind": "saving_propensity", "propensity": rule.propensity}
    if isinstance(rule, RandomSavingPropensity):
        return {"kind": "random_saving_propensity", "propensity_max": rule.propensity_max}
    raise TypeError(f"unknown rule type {type(rule).__name__}")


_BOUNDARY_FIELDS = {
    "no_debt": (NoDebt, ()),
    "debt_cap": (DebtCap, ("max_debt",)),
    "reserve_ratio_bank": (ReserveRatioBank, ("reserve_ratio",)),
    "unlimited": (Unlimited, ()),
    "upper_bound": (UpperBound, ("max_balance",)),
    "two_sided": (TwoSided, ("max_debt", "max_balance")),
}


def boundary_from_document(doc: Any, path: str = "simulation.boundary") -> BoundaryPolicy:
    if not isinstance(doc, dict):
        raise ConfigFileError(path, "expected an object with a 'kind' field")
    kind = _need(doc, "kind", path, str)
    if kind not in _BOUNDARY_FIELDS:
        raise ConfigFileError(f"{path}.kind", f"unknown boundary policy {kind!r}")
    cls, fields = _BOUNDARY_FIELDS[kind]
    allowed = {"kind", "interest", "bankruptcy_threshold", *fields}
    _reject_unknown(doc, allowed, path)
    kwargs = {}
    for field in fields:
        kwargs[field] = float(_need(doc, field, path, (int, float)))
    if "interest" in doc and doc["interest"] is not None:
        idoc = doc["interest"]
        if not isinstance(idoc, dict):
            raise ConfigFileError(f"{path}.interest", "expected an object")
        _reject_unknown(idoc, {"deposit_rate", "loan_rate"}, f"{path}.interest")
        kwargs["interest"] = InterestRates(
            deposit_rate=float(idoc.get("deposit_rate", 0.0)),
            loan_rate=float(idoc.get("loan_rate", 0.0)),
        )
    if doc.get("bankruptcy_threshold") is not None:
        kwargs["bankruptcy_threshold"] = float(doc["bankruptcy_threshold"])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigFileError(path, str(exc)) from exc


def boundary_to_document(policy: BoundaryPolicy) -> dict:
    for kind, (cls, fields) in _BOUNDARY_FIELDS.items():
        if type(policy) is cls:
            doc = {"kind": kind}
            for field in fields:
                doc[field] = getattr(policy, field)
            doc["interest"] = (
                {
                    "deposit_rate": policy.interest.deposit_rate,
                    "loan_rate": policy.interest.loan_rate,
                }
                if policy.interest is not None and policy.interest.active
                else None
            )
            doc["bankruptcy_threshold"] = policy.bankruptcy_threshold
            return doc
    raise TypeError(f"unknown boundary type {type(policy).__name__}")


def simconfig_from_document(doc: Any, path: str = "simulation") -> SimConfig:
    if not isinstance(doc, dict):
        raise ConfigFileError(path, "expected an object")
    allowed = {
        "num_agents",
        "initial_balance",
        "rule",
        "boundary",
        "sweeps",
        "seed",
        "snapshot_every",
        "bin_width",
        "integer_mode",
    }
    _reject_unknown(doc, allowed, path)
    try:
        config = SimConfig(
            num_agents=int(_need(doc, "num_agents", path, int)),
            initial_balance=float(_need(doc, "initial_balance", path, (int, float))),
            rule=rule_from_document(_need(doc, "rule", path), f"{path}.rule"),
            boundary=boundary_from_document(_need(doc, "boundary", path), f"{path}.boundary"),
            sweeps=int(_need(doc, "sweeps", path, int)),
            seed=int(_need(doc, "seed", path, int)),
            snapshot_every=int(doc.get("snapshot_every", 100)),
            bin_width=None if doc.get("bin_width") is None else float(doc["bin_width"]),
            integer_mode=bool(doc.get("integer_mode", False)),
        )
    except ConfigError as exc:
        raise ConfigFileError(f"{path}.{exc.field}", str(exc)) from exc
    return config


def simconfig_to_document(config: SimConfig) -> dict:
    return {
        "num_agents": config.num_agents,
        "initial_balance": config.initial_balance,
        "rule": rule_to_document(config.rule),
        "boundary": boundary_to_document(config.boundary),
        "sweeps": config.sweeps,
        "seed": config.seed,
        "snapshot_every": config.snapshot_every,
        "bin_width": config.bin_width,
        "integer_mode": config.integer_mode,
    }


# ---------------------------------------------------------------------------
# experiment spec


@dataclass(frozen=True)
class ExperimentSpec:
    config: SimConfig
    replicates: int = 1
    outputs: tuple[str, ...] = ("snapshots", "fits")
    output_dir: str | None = None
    equilibration_sweeps: int | None = None
    sweep_axes: tuple[tuple[str, tuple], ...] = ()
    assertions: tuple[tuple[str, Any], ...] = ()
    stationarity_window: int = 10_000
    stationarity_epsilon: float = 0.01
    stationarity_consecutive: int = 3

    @property
    def pooled_from_sweep(self) -> int:
        if self.equilibration_sweeps is not None:
            return self.equilibration_sweeps
        return self.config.sweeps // 2


def load_document(path: str) -> dict:
    """Parse a JSON config file; parse errors carry line/column."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigFileError(
                f"{path}:{exc.lineno}:{exc.colno}", exc.msg
            ) from exc
    if not isinstance(doc, dict):
        raise ConfigFileError(path, "top level must be an object")
    return doc


def spec_from_document(doc: dict) -> ExperimentSpec:
    allowed = {
        "schema",
        "simulation",
        "replicates",
        "outputs",
        "output_dir",
        "equilibration_sweeps",
        "sweep_axes",
        "assertions",
        "stationarity",
    }
    _reject_unknown(doc, allowed, "")
    schema = _need(doc, "schema", "", str)
    if schema != EXPERIMENT_SCHEMA:
        raise ConfigFileError("schema", f"expected {EXPERIMENT_SCHEMA!r}, got {schema!r}")
    config = simconfig_from_document(_need(doc, "simulation", ""))

    replicates = doc.get("replicates", 1)
    if not isinstance(replicates, int) or replicates < 1:
        raise ConfigFileError("replicates", "must be a positive integer")

    outputs = doc.get("outputs", ["snapshots", "fits"])
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ConfigFileError("outputs", "must be a list of output names")
    for name in outputs:
        if name not in KNOWN_OUTPUTS:
            raise ConfigFileError(
                "outputs", f"unknown output {name!r}; known: {', '.join(KNOWN_OUTPUTS)}"
            )

    equilibration = doc.get("equilibration_sweeps")
    if equilibration is not None:
        if not isinstance(equilibration, int) or not 0 <= equilibration <= config.sweeps:
            raise ConfigFileError(
                "equilibration_sweeps", "must be an integer in [0, sweeps]"
            )

    axes = []
    raw_axes = doc.get("sweep_axes", [])
    if not isinstance(raw_axes, list):
        raise ConfigFileError("sweep_axes", "must be a list of [path, values] pairs")
    for i, axis in enumerate(raw_axes):
        if (
            not isinstance(axis, list)
            or len(axis) != 2
            or not isinstance(axis[0], str)
            or not isinstance(axis[1], list)
            or not axis[1]
        ):
            raise ConfigFileError(
                f"sweep_axes[{i}]", "must be a [parameter_path, non-empty value list] pair"
            )
        _resolve_path(doc, axis[0], f"sweep_axes[{i}]")  # must reference a real field
        axes.append((axis[0], tuple(axis[1])))

    assertions = doc.get("assertions", {})
    if not isinstance(assertions, dict):
        raise ConfigFileError("assertions", "must be an object")
    for key in assertions:
        if key not in KNOWN_ASSERTIONS:
            raise ConfigFileError(
                f"assertions.{key}", f"unknown assertion; known: {', '.join(KNOWN_ASSERTIONS)}"
            )

    stationarity = doc.get("stationarity", {})
    if not isinstance(stationarity, dict):
        raise ConfigFileError("stationarity", "must be an object")
    _reject_unknown(stationarity, {"window_sweeps", "epsilon", "consecutive"}, "stationarity")

    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigFileError("output_dir", "must be a string path")

    return ExperimentSpec(
        config=config,
        replicates=replicates,
        outputs=tuple(outputs),
        output_dir=output_dir,
        equilibration_sweeps=equilibration,
        sweep_axes=tuple(axes),
        assertions=tuple(sorted(assertions.items())),
        stationarity_window=int(stationarity.get("window_sweeps", 10_000)),
        stationarity_epsilon=float(stationarity.get("epsilon", 0.01)),
        stationarity_consecutive=int(stationarity.get("consecutive", 3)),
    )


def normalized_document(spec: ExperimentSpec) -> dict:
    """Canonical document with every default materialized (hash input)."""
    return {
        "schema": EXPERIMENT_SCHEMA,
        "simulation": simconfig_to_document(spec.config),
        "replicates": spec.replicates,
        "outputs": list(spec.outputs),
        "equilibration_sweeps": spec.pooled_from_sweep,
        "sweep_axes": [[path, list(values)] for path, values in spec.sweep_axes],
        "assertions": dict(spec.assertions),
        "stationarity": {
            "window_sweeps": spec.stationarity_window,
            "epsilon": spec.stationarity_epsilon,
            "consecutive": spec.stationarity_consecutive,
        },
    }


def config_hash(spec: ExperimentSpec) -> str:
    canonical = json.dumps(
        normalized_document(spec), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def replicate_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit stream seed for one replicate."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(seq.generate_state(1, np.uint64)[0])


def sweep_point_seed(master_seed: int, index: int) -> int:
    """Independent master seed for one sweep point (disjoint from replicate
    seeds: the spawn key has a different shape)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(1, index))
    return int(seq.generate_state(1, np.uint64)[0])


def _resolve_path(doc: dict, dotted: str, context: str):
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigFileError(
                context, f"sweep axis {dotted!r} does not reference an existing config field"
            )
        node = node[part]
    return node


def apply_override(doc: dict, dotted: str, value) -> dict:
    """Deep-copied document with the field at the dotted path replaced."""
    out = json.loads(json.dumps(doc))
    node = out
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# CSV round-trip


def histogram_to_csv(
    hist: MoneyHistogram, path: str, *, digest: str, extra: dict | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema: {HISTOGRAM_SCHEMA}\n")
        handle.write(f"# config_hash: {digest}\n")
        handle.write("# units: bin_left money, count events, probability dimensionless\n")
        handle.write(f"# bin_width: {hist.bin_width!r}\n")
        handle.write(f"# origin: {hist.origin!r}\n")
        handle.write(f"# total: {hist.total!r}\n")
        handle.write(f"# sample_mean: {hist.sample_mean!r}\n")
        handle.write(f"# sample_variance: {hist.sample_variance!r}\n")
        for key, value in (extra or {}).items():
            handle.write(f"# {key}: {value}\n")
        writer = csv.writer(handle)
        writer.writerow(["bin_left", "count", "probability"])
        probs = hist.probabilities()
        for k, count in enumerate(hist.counts):
            writer.writerow([repr(hist.origin + k * hist.bin_width), repr(float(count)), repr(float(probs[k]))])


def histogram_from_csv(path: str) -> MoneyHistogram:
    """Rebuild a histogram from its CSV artifact. Exact moments come from
    the header when present; otherwise bin midpoints approximate them."""
    header: dict[str, str] = {}
    rows: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        for row in reader:
            if not row:
                continue
            if row[0].startswith("#"):
                text = ",".join(row).lstrip("#").strip()
                if ":" in text:
                    key, _, value = text.partition(":")
                    header[key.strip()] = value.strip()
                continue
            if row[0] == "bin_left":
                continue
            rows.append((float(row[0]), float(row[1])))
    if len(rows) < 1:
        raise ValueError(f"{path}: no histogram rows")
    lefts = np.array([r[0] for r in rows])
    counts = np.array([r[1] for r in rows])
    if "bin_width" in header:
        width = float(header["bin_width"])
    elif len(rows) > 1:
        width = float(np.min(np.diff(lefts)))
    else:
        raise ValueError(f"{path}: cannot infer bin width from a single row")
    origin = float(lefts[0])
    expected = origin + width * np.arange(len(rows))
    if np.max(np.abs(lefts - expected)) > 1e-9 * width:
        raise ValueError(f"{path}: bin_left values are not a uniform lattice")
    total = float(header.get("total", counts.sum()))
    if "sample_mean" in header:
        mean = float(header["sample_mean"])
        variance = float(header["sample_variance"])
    else:
        centers = lefts + width / 2.0
        weights = counts / counts.sum()
        mean = float((centers * weights).sum())
        var_pop = float((weights * (centers - mean) ** 2).sum())
        variance = var_pop * total / (total - 1.0) if total > 1 else 0.0
    return MoneyHistogram(
        bin_width=width,
        origin=origin,
        counts=counts,
        total=total,
        sample_mean=mean,
        sample_variance=variance,
        sweep=0,
    )


def _series_to_csv(series: dict, path: str, *, digest: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema: {SERIES_SCHEMA}\n")
        handle.write(f"# config_hash: {digest}\n")
        handle.write(
            "# units: sweep sweeps, entropy nats/agent, temperature money, "
            "ks_to_exponential dimensionless\n"
        )
        writer = csv.writer(handle)
        writer.writerow(["sweep", "entropy", "temperature", "ks_to_exponential"])
        for i in range(len(series["sweep"])):
            writer.writerow(
                [
                    series["sweep"][i],
                    repr(float(series["entropy"][i])),
                    repr(float(series["temperature"][i])),
                    repr(float(series["ks_to_exponential"][i])),
                ]
            )


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# running


def _fit_document(result) -> dict:
    from dataclasses import asdict

    return _jsonable(asdict(result))


def _pooled_outputs(spec: ExperimentSpec, runs: list[RunResult]) -> dict:
    """Everything derived from the equilibrated pool, assembled sequentially."""
    cutoff = spec.pooled_from_sweep
    pooled_hists = [
        h for run in runs for h in run.histograms if h.sweep >= cutoff
    ]
    pooled = pool_histograms(pooled_hists)
    shift = lower_bound(spec.config.boundary)
    shift = shift if math.isfinite(shift) else 0.0

    doc: dict[str, Any] = {}
    doc["pooled"] = {
        "from_sweep": cutoff,
        "snapshots": len(pooled_hists),
        "total_observations": pooled.total,
        "sample_mean": pooled.sample_mean,
        "sample_variance": pooled.sample_variance,
        "temperature": pooled.sample_mean - shift,
        "first_bin_probability": (
            float(pooled.probabilities()[0]) if pooled.origin >= -1e-12 else None
        ),
    }
    doc["_pooled_histogram"] = pooled

    if "fits" in spec.outputs:
        fits: dict[str, Any] = {}
        try:
            fits["exponential"] = _fit_document(
                stats.fit_exponential(pooled, support_shift=shift)
            )
        except stats.FitError as exc:
            fits["exponential"] = {"error": str(exc)}
        if isinstance(spec.config.rule, (Multiplicative, SavingPropensity, RandomSavingPropensity)):
            try:
                fits["gamma"] = _fit_document(stats.fit_gamma(pooled, support_shift=shift))
            except stats.FitError as exc:
                fits["gamma"] = {"error": str(exc)}
        if isinstance(spec.config.boundary, ReserveRatioBank):
            balances = np.concatenate(
                [
                    snap
                    for run in runs
                    for sweep, snap in (run.balance_snapshots or [])
                    if sweep >= cutoff
                ]
            ) if any(run.balance_snapshots for run in runs) else None
            if balances is not None:
                plus, minus = stats.two_sided_means(balances)
                fits["temperature_positive"] = plus
                fits["temperature_negative"] = minus
        doc["fits"] = _jsonable(fits)

    if "tail" in spec.outputs:
        balances = np.concatenate(
            [
                snap
                for run in runs
                for sweep, snap in (run.balance_snapshots or [])
                if sweep >= cutoff
            ]
        )
        tail_doc: dict[str, Any] = {}
        try:
            scan = stats.power_tail_scan(balances)
            tail_doc["estimates"] = {
                repr(frac): {
                    "tail_exponent": alpha,
                    "density_exponent": alpha + 1.0,
                    "tail_samples": int(math.floor(frac * balances.size)),
                }
                for frac, alpha in scan.estimates.items()
            }
            tail_doc["no_power_tail"] = scan.no_power_tail
        except stats.FitError as exc:
            tail_doc["error"] = str(exc)
        doc["tail"] = _jsonable(tail_doc)

    if "stationarity" in spec.outputs:
        verdicts = []
        for run in runs:
            verdict = stats.detect_stationarity(
                run.histograms,
                window_sweeps=spec.stationarity_window,
                epsilon=spec.stationarity_epsilon,
                consecutive=spec.stationarity_consecutive,
            )
            verdicts.append(
                {
                    "stationary": verdict.stationary,
                    "settled_sweep": verdict.settled_sweep,
                    "window_sweeps": verdict.window_sweeps,
                    "epsilon": verdict.epsilon,
                    "consecutive": verdict.consecutive,
                }
            )
        doc["stationarity"] = _jsonable(
            {
                "replicates": verdicts,
                "all_stationary": all(v["stationary"] for v in verdicts),
            }
        )

    if "oracle_check" in spec.outputs:
        total = spec.config.num_agents * spec.config.initial_balance
        doc["oracle_check"] = _jsonable(
            oracle_check(spec.config.num_agents, int(round(total)))
        )

    return doc


def _evaluate_assertions(spec: ExperimentSpec, doc: dict) -> list[dict]:
    rows = []

    def record(name, expected, observed, passed):
        rows.append(
            {
                "name": name,
                "expected": _jsonable(expected),
                "observed": _jsonable(observed),
                "passed": bool(passed),
            }
        )

    fits = doc.get("fits", {})
    pooled = doc["pooled"]
    for name, expected in spec.assertions:
        if name == "temperature_range":
            lo, hi = expected
            observed = (fits.get("exponential", {}) or {}).get(
                "temperature", pooled["temperature"]
            )
            record(name, expected, observed, observed is not None and lo <= observed <= hi)
        elif name == "temperature_positive_range":
            lo, hi = expected
            observed = fits.get("temperature_positive")
            record(name, expected, observed, observed is not None and lo <= observed <= hi)
        elif name == "temperature_negative_range":
            lo, hi = expected
            observed = fits.get("temperature_negative")
            record(name, expected, observed, observed is not None and lo <= observed <= hi)
        elif name == "ks_to_exponential_max":
            observed = (fits.get("exponential", {}) or {}).get("ks_statistic")
            record(name, expected, observed, observed is not None and observed < expected)
        elif name == "gamma_shape_min":
            observed = (fits.get("gamma", {}) or {}).get("shape")
            record(name, expected, observed, observed is not None and observed > expected)
        elif name == "ks_gamma_below_exponential":
            ks_g = (fits.get("gamma", {}) or {}).get("ks_statistic")
            ks_e = (fits.get("exponential", {}) or {}).get("ks_statistic")
            ok = ks_g is not None and ks_e is not None and ks_g < ks_e
            record(name, expected, {"gamma": ks_g, "exponential": ks_e}, ok == expected)
        elif name == "first_bin_probability_max":
            observed = pooled["first_bin_probability"]
            record(name, expected, observed, observed is not None and observed < expected)
        elif name == "tail_density_exponent_range":
            lo, hi = expected
            tail = doc.get("tail", {})
            ests = tail.get("estimates", {})
            observed = None
            if ests:
                first = sorted(ests.keys(), key=float, reverse=True)[0]
                observed = ests[first]["density_exponent"]
            record(name, expected, observed, observed is not None and lo <= observed <= hi)
        elif name == "stationary":
            observed = doc.get("stationarity", {}).get("all_stationary")
            record(name, expected, observed, observed == expected)
    return rows


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | None = None,
    threads: int = 1,
    engine: str | None = None,
) -> dict:
    """Execute one experiment and write its artifacts.

    Returns the results document (also written to results.json when an
    output directory is given). Raises ConfigFileError on invalid specs and
    OSError on unwritable output directories.
    """
    target = out_dir or spec.output_dir
    digest = config_hash(spec)

    keep_balances = (
        "tail" in spec.outputs
        or isinstance(spec.config.boundary, ReserveRatioBank)
    )

    def one(rep: int) -> RunResult:
        config = replace(
            spec.config,
            seed=replicate_seed(spec.config.seed, rep),
            keep_balance_snapshots=keep_balances,
        )
        return run_simulation(config, engine=engine)

    if threads > 1 and spec.replicates > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(one, range(spec.replicates)))
    else:
        runs = [one(rep) for rep in range(spec.replicates)]

    doc = _pooled_outputs(spec, runs)
    pooled_hist = doc.pop("_pooled_histogram")
    assertion_rows = _evaluate_assertions(spec, doc)

    results = {
        "schema": RESULTS_SCHEMA,
        "config_hash": digest,
        "config": normalized_document(spec),
        "seed_derivation": (
            "replicate stream seed = SeedSequence(master_seed, spawn_key=(replicate,))"
            ".generate_state(1, uint64)[0]"
        ),
        "engine": runs[0].engine,
        "replicates": [
            {
                "replicate": rep,
                "seed": replicate_seed(spec.config.seed, rep),
                "final_sweep": run.config.sweeps,
                "sample_mean": run.final_histogram.sample_mean,
                "sample_variance": run.final_histogram.sample_variance,
                "counts": dict(run.counts),
                "bankruptcies": len(run.bankruptcies),
            }
            for rep, run in enumerate(runs)
        ],
        "assertions": assertion_rows,
        "assertions_passed": all(row["passed"] for row in assertion_rows),
        **{k: v for k, v in doc.items()},
    }
    results = _jsonable(results)

    if target is not None:
        os.makedirs(target, exist_ok=True)
        probe = os.path.join(target, ".writable")
        with open(probe, "w") as handle:
            handle.write("")
        os.remove(probe)
        histogram_to_csv(pooled_hist, os.path.join(target, "histogram.csv"), digest=digest)
        want_series = {"entropy_series", "temperature_series"} & set(spec.outputs)
        for rep, run in enumerate(runs):
            rep_dir = os.path.join(target, "replicates", f"{rep:04d}")
            if "snapshots" in spec.outputs or want_series:
                os.makedirs(rep_dir, exist_ok=True)
            if "snapshots" in spec.outputs:
                rep_pool = pool_histograms(
                    [h for h in run.histograms if h.sweep >= spec.pooled_from_sweep]
                )
                histogram_to_csv(
                    rep_pool,
                    os.path.join(rep_dir, "histogram.csv"),
                    digest=digest,
                    extra={"replicate": rep},
                )
            if want_series:
                series = stats.series_from_histograms(run.histograms)
                _series_to_csv(series, os.path.join(rep_dir, "series.csv"), digest=digest)
        if want_series:
            pooled_series = _mean_series(
                [stats.series_from_histograms(run.histograms) for run in runs]
            )
            _series_to_csv(pooled_series, os.path.join(target, "series.csv"), digest=digest)
        if "fits" in spec.outputs:
            with open(os.path.join(target, "fits.json"), "w", encoding="utf-8") as handle:
                json.dump(
                    {"schema": RESULTS_SCHEMA, "config_hash": digest, "fits": results.get("fits")},
                    handle,
                    indent=2,
                    sort_keys=True,
                )
                handle.write("\n")
        with open(os.path.join(target, "results.json"), "w", encoding="utf-8") as handle:
            json.dump(results, handle, indent=2, sort_keys=True)
            handle.write("\n")
    return results


def _mean_series(series_list: list[dict]) -> dict:
    sweeps = series_list[0]["sweep"]
    out = {"sweep": sweeps}
    for key in ("entropy", "temperature", "ks_to_exponential"):
        stack = np.array([s[key] for s in series_list], dtype=np.float64)
        finite = np.isfinite(stack)
        any_finite = finite.any(axis=0)
        sums = np.where(finite, stack, 0.0).sum(axis=0)
        mean = np.full(stack.shape[1], np.nan)
        mean[any_finite] = sums[any_finite] / finite.sum(axis=0)[any_finite]
        out[key] = mean
    return out


def run_sweep(
    doc: dict,
    out_dir: str,
    threads: int = 1,
    engine: str | None = None,
) -> dict:
    """Run the cartesian grid of sweep axes; one subdirectory per point."""
    base_spec = spec_from_document(doc)
    if not base_spec.sweep_axes:
        raise ConfigFileError("sweep_axes", "sweep requires at least one axis")
    axes = base_spec.sweep_axes
    paths = [axis[0] for axis in axes]
    grids: list[tuple] = [()]
    for _, values in axes:
        grids = [g + (v,) for g in grids for v in values]

    master = base_spec.config.seed
    rows = []
    for index, combo in enumerate(grids):
        point_doc = doc
        for path, value in zip(paths, combo):
            point_doc = apply_override(point_doc, path, value)
        point_doc = apply_override(point_doc, "simulation.seed", sweep_point_seed(master, index))
        point_doc.pop("sweep_axes", None)
        point_spec = spec_from_document(point_doc)
        point_dir = os.path.join(out_dir, f"point_{index:04d}")
        results = run_experiment(point_spec, out_dir=point_dir, threads=threads, engine=engine)
        fits = results.get("fits") or {}
        exp_fit = fits.get("exponential") or {}
        rows.append(
            {
                "point": index,
                "parameters": dict(zip(paths, combo)),
                "master_seed": sweep_point_seed(master, index),
                "temperature": exp_fit.get("temperature", results["pooled"]["temperature"]),
                "temperature_positive": fits.get("temperature_positive"),
                "temperature_negative": fits.get("temperature_negative"),
                "ks_to_exponential": exp_fit.get("ks_statistic"),
                "assertions_passed": results["assertions_passed"],
            }
        )

    digest = config_hash(base_spec)
    summary = {
        "schema": RESULTS_SCHEMA,
        "config_hash": digest,
        "axes": [[path, list(values)] for path, values in axes],
        "points": rows,
        "assertions_passed": all(r["assertions_passed"] for r in rows),
    }
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "sweep_results.json"), "w", encoding="utf-8") as handle:
        json.dump(_jsonable(summary), handle, indent=2, sort_keys=True)
        handle.write("\n")
    with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# schema: {SERIES_SCHEMA}\n")
        handle.write(f"# config_hash: {digest}\n")
        writer = csv.writer(handle)
        writer.writerow(
            ["point", *paths, "master_seed", "temperature", "temperature_positive",
             "temperature_negative", "ks_to_exponential"]
        )
        for row in rows:
            writer.writerow(
                [
                    row["point"],
                    *[row["parameters"][p] for p in paths],
                    row["master_seed"],
                    "" if row["temperature"] is None else repr(float(row["temperature"])),
                    "" if row["temperature_positive"] is None else repr(float(row["temperature_positive"])),
                    "" if row["temperature_negative"] is None else repr(float(row["temperature_negative"])),
                    "" if row["ks_to_exponential"] is None else repr(float(row["ks_to_exponential"])),
                ]
            )
    return _jsonable(summary)


# ---------------------------------------------------------------------------
# oracle three-way check


def oracle_check(num_agents: int, total_money: int, seed: int | None = None) -> dict:
    """Exact chain vs composition formula vs a long Monte Carlo run.

    Pass requires exact-vs-formula agreement to 1e-12 and a Monte Carlo
    marginal within KS 0.02 of the exact one.
    """
    oracle = stats.exact_stationary_distribution(num_agents, total_money)
    exact_vs_formula = oracle.marginal_max_difference

    if seed is None:
        seed = int(
            np.random.SeedSequence([num_agents, total_money, 987654321]).generate_state(
                1, np.uint64
            )[0]
        )
    rng = np.random.default_rng(seed)
    balances = np.full(num_agents, total_money // num_agents, dtype=np.int64)
    for k in range(total_money % num_agents):
        balances[k] += 1
    burn_in = 2_000
    sweeps = 20_000
    occupancy = np.zeros(total_money + 1, dtype=np.float64)
    for sweep in range(sweeps):
        for _ in range(num_agents):
            i = int(rng.integers(0, num_agents))
            j = int(rng.integers(0, num_agents - 1))
            if j >= i:
                j += 1
            if balances[i] >= 1:
                balances[i] -= 1
                balances[j] += 1
        if sweep >= burn_in:
            np.add.at(occupancy, balances, 1.0)
    mc_marginal = occupancy / occupancy.sum()
    ks = float(
        np.max(np.abs(np.cumsum(mc_marginal) - np.cumsum(oracle.marginal_formula)))
    ) if total_money > 0 else 0.0

    passed = exact_vs_formula <= 1e-12 and ks < 0.02
    return {
        "num_agents": num_agents,
        "total_money": total_money,
        "num_states": oracle.num_states,
        "exact_vs_formula_max_difference": exact_vs_formula,
        "stationary_solve_max_deviation": oracle.stationary_max_deviation,
        "monte_carlo_seed": seed,
        "monte_carlo_ks": ks,
        "marginal": [float(p) for p in oracle.marginal_formula],
        "passed": bool(passed),
    }
