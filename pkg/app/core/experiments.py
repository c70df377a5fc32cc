"""
Monte Carlo harness: seeded replicas, survival classification and summaries
against the theoretical limits.
"""
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional

import numpy as np

from app.core import complete_graph, mode2, tree_explore
from app.core.oracle import MAX_DP_N, MAX_ENUM_N, MAX_ENUM_RESOURCE, exact_small_distribution
from app.core.resource import ResourceLaw
from app.core.rng_streams import RandomSource, make_source, replica_seed
from app.core.stats import chi_square_test, ks_statistic, mean_and_stderr
from app.core.theory import predict
from app.errors import ConfigurationError, OracleInfeasibleError
from app.models import ExperimentConfig, ReplicaRecord, Summary, TheoryPrediction

logger = logging.getLogger(__name__)

MIN_SURVIVORS = 50
SUBCRITICAL_EPSILON = 0.5
RECORD_HEADER = ["replica_id", "seed", "tau", "final_informed", "survived", "standardized"]

# Mode 1 checks each attempt against its edge; mode 2 and the chain use the raw resource.
THEORY_MODE = {"complete": 2, "er1": 1, "cg-seq": 1, "coupled": 1, "er2": 2, "er2-coupled": 2}


@dataclass
class RunOutcome:
    tau: int
    final_informed: int
    extra: Dict[str, int] = field(default_factory=dict)
    trace_header: List[str] = field(default_factory=list)
    trace_rows: List[List[int]] = field(default_factory=list)
    snapshots: List[dict] = field(default_factory=list)


def _jsonable_snapshots(snapshots: List[dict]) -> List[dict]:
    return [
        {name: (value if name == "t" else sorted(list(w) for w in value)) for name, value in snap.items()}
        for snap in snapshots
    ]


def simulate_once(model: str, src: RandomSource, trace: str = "none") -> RunOutcome:
    """One run of ``model`` on ``src``; ``trace`` is none, summary (per-step counts) or full"""
    want_trace = trace in ("summary", "full")
    want_sets = trace == "full"

    if model == "complete":
        run = complete_graph.run_chain(src.n, src.law, src, trace=want_trace)
        return RunOutcome(
            tau=run.absorption_time,
            final_informed=run.final_informed,
            extra={"total_resource": run.total_resource},
            trace_header=complete_graph.TRACE_HEADER,
            trace_rows=[list(row) for row in run.trace or []],
        )
    if model == "er1":
        er = tree_explore.run_er_mode1(src, trace=want_trace, record_sets=want_sets)
        return RunOutcome(
            tau=er.tau,
            final_informed=er.final_informed,
            trace_header=tree_explore.TRACE_HEADER,
            trace_rows=[s.row() for s in er.trace],
            snapshots=_jsonable_snapshots(er.snapshots),
        )
    if model == "cg-seq":
        cg = tree_explore.run_cg_sequential(src, trace=want_trace, record_sets=want_sets)
        return RunOutcome(
            tau=cg.tau,
            final_informed=cg.final_informed,
            extra={"open_attempts": cg.open_attempts},
            trace_header=tree_explore.TRACE_HEADER,
            trace_rows=[s.row() for s in cg.trace],
            snapshots=_jsonable_snapshots(cg.snapshots),
        )
    if model == "coupled":
        both = tree_explore.run_coupled_delayed(src, trace=want_trace, record_sets=want_sets)
        return RunOutcome(
            tau=both.tau_cgd,
            final_informed=both.final_cgd,
            extra={"tau_er": both.tau_er, "final_er": both.final_er, "tau_cgd": both.tau_cgd},
            trace_header=tree_explore.TRACE_HEADER,
            trace_rows=[s.row() for s in both.trace],
            snapshots=_jsonable_snapshots(both.snapshots),
        )
    if model == "er2":
        direct = mode2.run_mode2_direct(src, trace=want_trace)
        return RunOutcome(
            tau=direct.tau,
            final_informed=direct.final_informed,
            extra={"open_edges": direct.graph.open_edges()},
            trace_header=mode2.DIRECT_TRACE_HEADER,
            trace_rows=direct.trace,
        )
    if model == "er2-coupled":
        joint = mode2.run_mode2_coupled(src)
        return RunOutcome(
            tau=joint.tau_bar_er,
            final_informed=joint.final_er,
            extra={"tilde_tau": joint.tilde_tau, "tau_cg": joint.tau_cg, "final_cg": joint.final_cg},
            trace_header=mode2.JOINT_TRACE_HEADER,
            trace_rows=[s.row() for s in joint.steps] if want_trace else [],
        )
    raise ConfigurationError(f"Unknown model '{model}'")


def theory_for(config: ExperimentConfig, law: Optional[ResourceLaw] = None) -> TheoryPrediction:
    return predict(law or config.law.to_law(), config.p, THEORY_MODE[config.model])


def resolve_epsilon(config: ExperimentConfig, prediction: TheoryPrediction) -> float:
    """Survival threshold as a fraction of n; q*/2 unless configured"""
    q_star = prediction.q_star
    if config.survival_epsilon is None:
        return q_star / 2 if q_star > 0 else SUBCRITICAL_EPSILON
    if q_star > 0 and not 0 < config.survival_epsilon < q_star:
        raise ConfigurationError(
            f"survival_epsilon must lie in (0, {q_star:.6f}) for this supercritical configuration"
        )
    return config.survival_epsilon


def run_one(
    config: ExperimentConfig,
    replica_id: int,
    law: ResourceLaw,
    prediction: TheoryPrediction,
    epsilon: float,
) -> ReplicaRecord:
    seed = replica_seed(config.base_seed, replica_id)
    outcome = simulate_once(config.model, make_source(seed, config.n, config.p, law))
    n = config.n
    survived = outcome.final_informed > epsilon * n
    standardized = None
    if survived and prediction.q_star > 0:
        standardized = (outcome.final_informed - n * prediction.q_star) / math.sqrt(n)
    return ReplicaRecord(
        replica_id=replica_id,
        seed=seed,
        tau=outcome.tau,
        final_informed=outcome.final_informed,
        survived=survived,
        standardized=standardized,
    )


def run_replicas(config: ExperimentConfig, jobs: int = 1) -> List[ReplicaRecord]:
    """R records; replica r is seeded from (base_seed, r) whatever the worker count"""
    law = config.law.to_law()
    prediction = theory_for(config, law)
    epsilon = resolve_epsilon(config, prediction)
    work = partial(run_one, config, law=law, prediction=prediction, epsilon=epsilon)
    ids = range(config.replicas)

    if jobs <= 1 or config.replicas == 1:
        records = [work(r) for r in ids]
    else:
        chunk = max(1, config.replicas // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(work, ids, chunksize=chunk))
    records.sort(key=lambda rec: rec.replica_id)
    logger.debug("ran %d replicas of %s (n=%d, p=%s)", len(records), config.model, config.n, config.p)
    return records


def oracle_model_for(model: str) -> str:
    """The coupled mode-2 run is compared through its ER marginal"""
    return "er2" if model == "er2-coupled" else model


def oracle_available(config: ExperimentConfig, law: ResourceLaw) -> bool:
    if config.model == "complete":
        return config.n <= MAX_DP_N
    return config.n <= MAX_ENUM_N and law.max_value <= MAX_ENUM_RESOURCE


def summarize(
    records: List[ReplicaRecord],
    prediction: TheoryPrediction,
    config: ExperimentConfig,
    with_oracle: bool = True,
) -> Summary:
    if not records:
        raise ConfigurationError("Cannot summarize an empty record list")
    epsilon = resolve_epsilon(config, prediction)
    n = config.n
    survivors = [r for r in records if r.survived]
    standardized = [r.standardized for r in survivors if r.standardized is not None]

    mean = stderr = var_std = ks = None
    if survivors:
        mean, stderr = mean_and_stderr([r.final_informed / n for r in survivors])
    insufficient = prediction.q_star > 0 and len(standardized) < MIN_SURVIVORS
    if prediction.q_star > 0 and not insufficient:
        var_std = float(np.var(standardized, ddof=1))
        if prediction.var_star is not None and prediction.var_star > 0:
            ks = ks_statistic(standardized, prediction.var_star)
    if insufficient:
        logger.warning("only %d survivors; central-limit statistics skipped", len(standardized))

    chi = None
    law = config.law.to_law()
    if with_oracle and oracle_available(config, law):
        try:
            exact = exact_small_distribution(oracle_model_for(config.model), n, config.p, law)
            chi = chi_square_test(Counter(r.final_informed for r in records), exact)
        except OracleInfeasibleError as e:
            logger.info("no exact comparison: %s", e)

    return Summary(
        replicas=len(records),
        survivors=len(survivors),
        survival_fraction=len(survivors) / len(records),
        epsilon=epsilon,
        conditional_mean_tau_over_n=mean,
        conditional_mean_stderr=stderr,
        conditional_var_standardized=var_std,
        ks_distance=ks,
        chi_square=chi,
        insufficient_data=insufficient,
        theory=prediction,
    )
