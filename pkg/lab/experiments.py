"""
One runner per subcommand. A runner turns a validated config into named
result tables; the first table is the CSV, all of them go to the Excel report.

Runners split their work into pure units keyed so that sorting the keys gives
the output order, and hand them to ``run_work_units``.
"""

import logging
import math
import time
from collections import defaultdict
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

from lab import covering_lab, exponents, gauges, percolation, rational_census
from lab.cantor_geometry import IntervalUnion
from lab.checkpoint import load_checkpoint, save_checkpoint
from lab.config import ExperimentConfig
from lab.errors import ConfigError, EstimationError
from lab.foundations import KAPPA, LOG3, RandomStream, derive_stream
from lab.settings import CHECKPOINT_EVERY
from lab.workers import run_work_units

logger = logging.getLogger(__name__)

Tables = Dict[str, pd.DataFrame]

TRIAL_CHUNK = 64
THETA_CHUNK = 4096
HIT_CELL_CHUNK = 256


def _chunks(total: int, size: int):
    return [(start, min(total, start + size)) for start in range(0, total, size)]


# ----------------- CENSUS ----------------- #

def _timed_count(q, threshold, algorithm):
    start = time.perf_counter()
    count = rational_census.count_denominator(q, threshold, algorithm)
    return count, time.perf_counter() - start


def run_census(config: ExperimentConfig, stream: RandomStream) -> Tables:
    params = config.params
    mus = list(params["mu"])
    levels = params["levels"]
    algorithm = params["algorithm"]
    extra = [math.inf] if params["membership"] and math.inf not in mus else []

    done = load_checkpoint(config.checkpoint, config.config_hash) if config.checkpoint else {}
    thresholds = {}
    units = []
    for mu in mus + extra:
        label = rational_census.format_mu(mu)
        for j in levels:
            threshold = rational_census.Threshold.for_level(j, mu)
            thresholds[(j, label)] = threshold
            for q in rational_census.PairRange(j).denominators():
                if (j, label, q) not in done:
                    units.append(((j, label, q), (q, threshold, algorithm)))
    logger.info("Census: %d denominators to count, %d already in the checkpoint", len(units), len(done))

    timings = defaultdict(float)
    finished = [0]

    def on_result(key, value):
        done[key] = value[0]
        timings[key[:2]] += value[1]
        finished[0] += 1
        if config.checkpoint and finished[0] % CHECKPOINT_EVERY == 0:
            save_checkpoint(config.checkpoint, config.config_hash, done)

    try:
        run_work_units(units, _timed_count, config.threads, "Counting denominators", config.progress, on_result)
    except BaseException:
        if config.checkpoint:
            save_checkpoint(config.checkpoint, config.config_hash, done)
            logger.info("Saving progress... progress saved to %s", config.checkpoint)
        raise
    if config.checkpoint:
        save_checkpoint(config.checkpoint, config.config_hash, done)

    totals = defaultdict(int)
    for (j, label, _), count in done.items():
        totals[(j, label)] += count

    def record(j, mu):
        label = rational_census.format_mu(mu)
        return rational_census.CensusRecord(j, mu, totals[(j, label)], algorithm, thresholds[(j, label)].rounding)

    records = [record(j, mu) for mu in mus for j in levels]
    membership = {j: record(j, math.inf) for j in levels} if params["membership"] else None
    frame = rational_census.census_rows(records, membership)
    frame["wall_seconds"] = [
        timings[(r.j, r.mu_label)] if config.record_timing else None for r in records
    ]
    columns = ["j", "mu", "count", "log3_density", "bound", "algorithm", "wall_seconds"]
    frame = frame[columns + [c for c in frame.columns if c not in columns]]

    fits = []
    for mu in mus:
        chosen = [r for r in records if r.mu_label == rational_census.format_mu(mu)]
        sigma = rational_census.sigma_estimate(chosen) if len(chosen) == len(set(levels)) and _consecutive(levels) else None
        try:
            slope, stderr = rational_census.fitted_exponent(chosen)
        except EstimationError:
            slope, stderr = math.nan, math.nan
        fits.append(
            {
                "mu": rational_census.format_mu(mu),
                "fitted_exponent": slope,
                "stderr": stderr,
                "sigma_tail_max": sigma.tail_max[0] if sigma else math.nan,
                "bound": rational_census.conjecture_bound(mu),
            }
        )
    return {"census": frame, "fits": pd.DataFrame(fits)}


def _consecutive(levels) -> bool:
    ordered = sorted(levels)
    return ordered == list(range(ordered[0], ordered[0] + len(ordered)))


def run_base_b_census(config: ExperimentConfig, stream: RandomStream) -> Tables:
    base = config.params["base"]
    levels = config.params["levels"]
    units = [(j, (base, j)) for j in levels]
    counts = run_work_units(units, rational_census.base_b_count, config.threads, "Base-b census", config.progress)
    rows = [
        {
            "base": base,
            "j": j,
            "count": count,
            "log_density": math.log(count) / (j * math.log(base)) if count else -math.inf,
            "log3_count": math.log(count) / LOG3 if count else -math.inf,
        }
        for j, count in counts.items()
    ]
    return {"base_b": pd.DataFrame(rows)}


# ----------------- EXPONENTS AND GAUGES ----------------- #

def _witness_rows(witnesses) -> List[dict]:
    return [
        {
            "j": index,
            "witness_denominator": str(w.denominator_size),
            "error_bound": float(w.error_bound),
            "log_ratio": w.log_ratio,
        }
        for index, w in enumerate(witnesses, start=1)
    ]


def run_exponent(config: ExperimentConfig, stream: RandomStream) -> Tables:
    params = config.params
    kind = params["kind"]
    if kind == "lsv":
        witnesses = exponents.lsv_witnesses(params["mu"], params["J"])
        estimate = exponents.exponent_from_witnesses(witnesses, "irrationality")
        rows = _witness_rows(witnesses)
        reference = float(params["mu"])
    elif kind == "convergents":
        witnesses = exponents.convergent_witnesses(params["x"])
        if not witnesses:
            raise ConfigError("x", "has no convergents with denominator above 1")
        estimate = exponents.exponent_from_witnesses(witnesses, "irrationality")
        rows = _witness_rows(witnesses)
        reference = math.nan
    else:
        profile = exponents.vb_profile(params["x"], params["base"], params["J"])
        estimate = profile.estimate
        rows = [
            {
                "j": j,
                "witness_denominator": str(params["base"] ** j),
                "error_bound": float(distance),
                "log_ratio": (-math.log(2 * float(distance)) / (j * math.log(params["base"]))) if distance else math.inf,
            }
            for j, distance in enumerate(profile.distances, start=1)
        ]
        reference = profile.convention_value
    low, high = estimate.scale_range
    summary = pd.DataFrame(
        [{"kind": estimate.kind, "estimate": estimate.value, "scale_low": low, "scale_high": high, "reference": reference}]
    )
    return {"witnesses": pd.DataFrame(rows), "estimate": summary}


def run_gauge(config: ExperimentConfig, stream: RandomStream) -> Tables:
    params = config.params
    kind = params["kind"]
    g, h, phi = params["g"], params["h"], params["phi"]
    rows = []
    if kind == "series":
        N = params["N"]
        marks = sorted({min(N, 10 ** k) for k in range(int(math.log10(N)) + 1)} | {N})
        for n in marks:
            report = gauges.series_partial(params["series"], g, h, params["radii"], n)
            rows.append({"kind": params["series"], "N": n, "partial_sum": report.partial_sum,
                         "verdict": report.verdict, "limit": report.limit})
    elif kind in ("precprec", "precphi"):
        if h is None:
            raise ConfigError("h", "missing required key")
        if kind == "precphi" and phi is None:
            raise ConfigError("phi", "missing required key")
        for J in range(1, params["J"] + 1):
            report = gauges.precprec_partial(g, h, J) if kind == "precprec" else gauges.precphi_partial(g, h, phi, J)
            rows.append({"kind": kind, "J": J, "partial_sum": report.partial_sum,
                         "verdict": report.verdict, "limit": report.limit})
    else:
        for J in range(1, params["J"] + 1):
            rows.append({"kind": "doubling", "J": J, "constant": gauges.doubling_scan(g, J),
                         "cutoff": gauges.gauge_cutoff(g)})
    frame = pd.DataFrame(rows)
    frame.insert(1, "g", g.describe())
    return {"gauge": frame}


# ----------------- COVERING ----------------- #

def _process(config: ExperimentConfig, max_index: int = 0):
    params = config.params
    try:
        return covering_lab.parse_process(
            params["process"], params["radii"], max_index or params["max_index"], params["count"]
        )
    except ValueError as e:
        raise ConfigError("process", str(e)) from None


def _cover_frame(rows: List[dict]) -> pd.DataFrame:
    frame = pd.DataFrame(rows)
    columns = ["experiment", "kind", "nu_or_mu", "L", "window_size", "count", "exact_expectation", "trial", "seed"]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    return frame[columns + [c for c in frame.columns if c not in columns]]


def _cover_scale_census(config, stream, proc) -> Tables:
    params = config.params
    r, nu, target, levels = params["radii"], params["nu"], params["target"], params["levels"]
    expectations = covering_lab.expected_censuses(proc, r, nu, target, levels)
    units = [
        ((first,), (proc, r, nu, target, levels, range(first, last), stream, config.seed, expectations))
        for first, last in _chunks(params["trials"], TRIAL_CHUNK)
    ]
    chunks = run_work_units(units, covering_lab.scale_census_rows, config.threads, "Scale censuses", config.progress)
    frame = _cover_frame([row for rows in chunks.values() for row in rows])
    means = frame.groupby("L")["count"].agg(["mean", "std", "count"]).reset_index()
    means["exact_expectation"] = [expectations.get(level, math.nan) for level in means["L"]]
    try:
        fit = covering_lab.dimension_fit(
            [covering_lab.ScaleCensus(int(level), (0, -1), int(round(mean))) for level, mean in zip(means["L"], means["mean"])]
        )
        means["slope"] = fit.slope
        means["slope_stderr"] = fit.stderr
    except EstimationError:
        means["slope"] = math.nan
        means["slope_stderr"] = math.nan
    gamma = KAPPA if target == "cantor" else 1.0
    rho = gauges.critical_exponent(r) if r.kind != "explicit" else math.nan
    means["target_dimension"] = covering_lab.random_model_targets(nu, rho, gamma)[
        "on_g_dimension" if isinstance(proc, covering_lab.IidUniformCantor) else "circle_dimension"
    ]
    return {"cover": frame, "levels": means}


def _nested_rows(proc, r, nu, target, first_level, last_level, trials, stream, seed):
    rows = []
    for trial in trials:
        depth = covering_lab.nested_hit_depth(
            proc, r, nu, target, first_level, last_level, derive_stream(stream, "trial", trial)
        )
        rows.append({"experiment": "nested_depth", "kind": proc.name, "nu_or_mu": nu, "L": last_level,
                     "window_size": 0, "count": depth, "exact_expectation": math.nan, "trial": trial,
                     "seed": seed, "reached": depth == last_level})
    return rows


def _coverage_rows(proc, r, nu, target, level, N, trials, stream, seed):
    cells = covering_lab.target_cells(target, level).size
    rows = []
    for trial in trials:
        fraction = covering_lab.coverage_fraction(proc, r, nu, target, level, N, derive_stream(stream, "trial", trial))
        rows.append({"experiment": "coverage", "kind": proc.name, "nu_or_mu": nu, "L": level,
                     "window_size": N, "count": int(round(fraction * cells)), "exact_expectation": math.nan,
                     "trial": trial, "seed": seed, "fraction": fraction})
    return rows


def _cover_trials(config, stream, proc, fn, desc, *args) -> pd.DataFrame:
    units = [((first,), (proc, *args, range(first, last), stream, config.seed))
             for first, last in _chunks(config.params["trials"], TRIAL_CHUNK)]
    chunks = run_work_units(units, fn, config.threads, desc, config.progress)
    return _cover_frame([row for rows in chunks.values() for row in rows])


def _cover_theta(config, stream) -> Tables:
    params = config.params
    v, r = params["v"], params["radii"]
    proc = _process(config, max_index=max(params["max_index"], v))
    path = params["path"]
    if len(path) != v:
        raise ConfigError("path", f"needs {v} cell indices")
    grid = np.array([covering_lab.grid_level(r, n, params["mode"]).q for n in range(1, v + 1)], dtype=np.int64)
    units = [((first,), (proc, grid, path, first, last, stream)) for first, last in _chunks(params["trials"], THETA_CHUNK)]
    hits = sum(run_work_units(units, covering_lab.theta_hits, config.threads, "Theta trials", config.progress).values())
    estimate = covering_lab.empirical_theta(proc, r, path, v, params["trials"], stream, params["mode"], hits=hits)
    bound = math.nan
    if isinstance(proc, covering_lab.FractionalParts):
        bound = covering_lab.theta_upper_bound(proc.sequence, r, v)
    row = {"experiment": "theta", "kind": proc.name, "nu_or_mu": v, "L": 0, "window_size": v,
           "count": estimate.hits, "exact_expectation": math.nan, "trial": estimate.trials, "seed": config.seed,
           "ratio": estimate.ratio, "ci_low": estimate.ci_low, "ci_high": estimate.ci_high, "theta_bound": bound}
    return {"cover": _cover_frame([row])}


def _hit_cell_rows(target, r, mode, first, last):
    rows = []
    for n in range(first, last):
        report = covering_lab.hit_cells(target, r, n, mode)
        rows.append({"n": n, "q": report.q, "cardinality": report.cardinality,
                     "bound_low": report.bound_low, "bound_high": report.bound_high,
                     "within": report.bound_low <= report.cardinality <= report.bound_high})
    return rows


def _cover_hit_cells(config, stream) -> Tables:
    params = config.params
    units = [((first,), (params["target"], params["radii"], params["mode"], first + 1, last + 1))
             for first, last in _chunks(params["n_max"], HIT_CELL_CHUNK)]
    chunks = run_work_units(units, _hit_cell_rows, config.threads, "Grid cells", config.progress)
    return {"hit_cells": pd.DataFrame([row for rows in chunks.values() for row in rows])}


def _cover_mixed(config, stream) -> Tables:
    params = config.params
    units = []
    for mu in params["mu"]:
        for first, last in _chunks(params["trials"], TRIAL_CHUNK):
            units.append(((mu, first), (params["rule"], mu, params["levels"], range(first, last), stream, config.seed)))
    chunks = run_work_units(units, covering_lab.mixed_model_rows, config.threads, "Mixed model", config.progress)
    frame = _cover_frame([row for rows in chunks.values() for row in rows])
    return {"cover": frame, "fits": covering_lab.slope_summary(frame, covering_lab.mixed_model_target_for(params["rule"]))}


def _cover_vb(config, stream) -> Tables:
    params = config.params
    b, v = params["base"], params["nu"] - 1
    if v < 0:
        raise ConfigError("nu", "the base-b model uses nu = v + 1 >= 1")
    units = [((first,), (b, v, params["levels"], range(first, last), stream, config.seed))
             for first, last in _chunks(params["trials"], TRIAL_CHUNK)]
    chunks = run_work_units(units, covering_lab.vb_model_rows, config.threads, "Base-b model", config.progress)
    frame = _cover_frame([row for rows in chunks.values() for row in rows])
    fits = covering_lab.slope_summary(frame, lambda nu: exponents.conjectured_vb_dimension(b, nu - 1))
    return {"cover": frame, "fits": fits}


def _cover_deterministic(config, stream) -> Tables:
    kind = config.params["process"].partition(":")[2] or "shifted_triadic"
    try:
        frame, slope = covering_lab.deterministic_distance_report(kind, config.params["count"])
    except ValueError as e:
        raise ConfigError("process", str(e)) from None
    frame["fitted_slope"] = slope
    return {"distances": frame}


def run_cover(config: ExperimentConfig, stream: RandomStream) -> Tables:
    params = config.params
    experiment = params["experiment"]
    if experiment == "theta":
        return _cover_theta(config, stream)
    if experiment == "hit_cells":
        return _cover_hit_cells(config, stream)
    if experiment == "mixed_model":
        return _cover_mixed(config, stream)
    if experiment == "vb_model":
        return _cover_vb(config, stream)
    if experiment == "deterministic":
        return _cover_deterministic(config, stream)
    proc = _process(config)
    r, nu, target, levels = params["radii"], params["nu"], params["target"], params["levels"]
    if experiment == "scale_census":
        return _cover_scale_census(config, stream, proc)
    if experiment == "nested_depth":
        frame = _cover_trials(config, stream, proc, _nested_rows, "Nested hits", r, nu, target, min(levels), max(levels))
        return {"cover": frame}
    frame = _cover_trials(config, stream, proc, _coverage_rows, "Coverage", r, nu, target, levels[0], params["N"])
    return {"cover": frame}


# ----------------- PERCOLATION ----------------- #

def _tree_rows(g, depth, mass, trials, stream, seed):
    rows = []
    for trial in trials:
        tree = percolation.sample_tree(g, depth, derive_stream(stream, "trial", trial))
        rows += percolation.tree_rows(tree, mass, trial, seed)
    return rows


def _tree_moments(g, depth, mass, trials, stream):
    accumulator = percolation.MomentAccumulator(g, depth, mass)
    for trial in trials:
        accumulator.add(percolation.sample_tree(g, depth, derive_stream(stream, "trial", trial)))
    return accumulator


def _hit_chunk(union, g, depth, trials, stream):
    hits = 0
    for trial in trials:
        report = percolation.hit_experiment(union, g, depth, 1, derive_stream(stream, "trial", trial))
        hits += report.hits
    return hits


def run_percolate(config: ExperimentConfig, stream: RandomStream) -> Tables:
    params = config.params
    g, depth, trials = params["gauge"], params["depth"], params["trials"]
    mass = percolation.MassAssignment(params["mass"])
    chunks = _chunks(trials, TRIAL_CHUNK)
    mode = params["mode"]
    if mode == "trees":
        units = [((first,), (g, depth, mass, range(first, last), stream, config.seed)) for first, last in chunks]
        results = run_work_units(units, _tree_rows, config.threads, "Sampling trees", config.progress)
        return {"trees": pd.DataFrame([row for rows in results.values() for row in rows])}
    if mode == "summary":
        units = [((first,), (g, depth, mass, range(first, last), stream)) for first, last in chunks]
        results = run_work_units(units, _tree_moments, config.threads, "Tree moments", config.progress)
        accumulators = list(results.values())
        total = accumulators[0]
        for accumulator in accumulators[1:]:
            total.merge(accumulator)
        frame = total.frame()
        frame.insert(0, "gauge", g.describe())
        return {"summary": frame}
    if mode == "product":
        h = params["h"]
        units = [((first,), (g, h, depth, first, last, stream)) for first, last in chunks]
        results = run_work_units(units, percolation.survivor_counts, config.threads, "Product identity", config.progress)
        product = np.concatenate([pair[0] for pair in results.values()])
        intersection = np.concatenate([pair[1] for pair in results.values()])
        frame = percolation.product_identity_frame(product, intersection)
        frame.insert(0, "gauge", f"{g.describe()} x {h.describe()}")
        return {"product": frame}
    union = IntervalUnion.from_arcs(params["hit_set"])
    units = [((first,), (union, g, depth, range(first, last), stream)) for first, last in chunks]
    hits = sum(run_work_units(units, _hit_chunk, config.threads, "Hit trials", config.progress).values())
    bound = percolation.hit_experiment(union, g, depth, 0, stream).covering_bound
    frame = pd.DataFrame([{"gauge": g.describe(), "depth": depth, "trials": trials, "hits": hits,
                           "frequency": hits / trials, "covering_bound": bound}])
    return {"hit": frame}


RUNNERS: Dict[str, Callable[[ExperimentConfig, RandomStream], Tables]] = {
    "census": run_census,
    "base-b-census": run_base_b_census,
    "exponent": run_exponent,
    "gauge": run_gauge,
    "cover": run_cover,
    "percolate": run_percolate,
}
