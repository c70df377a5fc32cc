"""
Command line: theory, simulate, experiment, oracle, runs and serve.

Artifacts go to files or stdout; logs go to stderr. Exit codes: 0 success,
1 usage or configuration error, 2 runtime failure.
"""
import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from app import __version__, settings
from app.errors import EXIT_OK, EXIT_USAGE, ConfigurationError, RumorLabError, exit_code_for
from app.models import ExperimentConfig, LawSpec, OracleRequest, SimulateRequest, TheoryRequest
from app.services.experiment_service import experiment_service
from app.services.simulation_service import simulation_service
from app.services.theory_service import theory_service

logger = logging.getLogger(__name__)

MODELS = ["complete", "er1", "er2", "cg-seq", "coupled", "er2-coupled"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _law_spec(args) -> Optional[LawSpec]:
    """LawSpec from --k-const / --k-pmf, or None when neither flag is given"""
    if args.k_const is not None:
        return LawSpec(constant=args.k_const)
    if args.k_pmf is not None:
        return LawSpec.from_text(args.k_pmf)
    return None


def _require_law(args) -> LawSpec:
    spec = _law_spec(args)
    if spec is None:
        raise ConfigurationError("A resource law is required: --k-const N or --k-pmf v:p,...")
    spec.to_law()
    return spec


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def cmd_theory(args) -> int:
    request = TheoryRequest(law=_require_law(args), p=args.p, mode=args.mode)
    prediction = theory_service.predict_sync(request)
    _emit(_dumps(theory_service.artifact(request, prediction)), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    trace = args.trace
    if args.trace_out and trace == "none":
        trace = "summary"
    request = SimulateRequest(
        model=args.model, n=args.n, p=args.p, law=_require_law(args), seed=args.seed, trace=trace
    )
    result = simulation_service.simulate_sync(request)
    if args.trace_out:
        simulation_service.write_trace(result, args.trace_out)
        if result.snapshots:
            simulation_service.write_snapshots(result, simulation_service.snapshot_path(args.trace_out))
    if args.json_out:
        Path(args.json_out).write_text(_dumps(result.model_dump(mode="json", exclude={"trace_rows", "snapshots"})) + "\n")
    sys.stdout.write(simulation_service.result_line(result) + "\n")
    return EXIT_OK


def resolve_experiment_config(args) -> ExperimentConfig:
    """Config file values overridden by every flag given on the command line"""
    values: Dict[str, Any] = {}
    if args.config:
        values = json.loads(Path(args.config).read_text())
        if not isinstance(values, dict):
            raise ConfigurationError("Config file must hold a JSON object")
    overrides = {
        "model": args.model,
        "n": args.n,
        "p": args.p,
        "replicas": args.replicas,
        "base_seed": args.base_seed,
        "survival_epsilon": args.epsilon,
        "trace": args.trace,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    spec = _law_spec(args)
    if spec is not None:
        values["law"] = spec.model_dump(exclude_none=True)
    config = ExperimentConfig.model_validate(values)
    config.law.to_law()
    return config


def cmd_experiment(args) -> int:
    config = resolve_experiment_config(args)
    if config.trace != "none" and not args.trace_dir:
        raise ConfigurationError("--trace-dir is required when replica traces are requested")
    result = asyncio.run(experiment_service.run_experiment(config, jobs=args.jobs, store=args.store))
    if args.records_out:
        experiment_service.write_records(result.records, args.records_out)
    if config.trace != "none":
        experiment_service.write_replica_traces(result, args.trace_dir)
    if result.run_id is not None:
        logger.info("run stored with id %d", result.run_id)
    _emit(experiment_service.summary_json(result), args.summary_out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    request = OracleRequest(
        model=args.model,
        n=args.n,
        p=args.p,
        law=_require_law(args),
        depth_cap=args.depth_cap,
        statistic=args.statistic,
    )
    response = simulation_service.oracle_sync(request)
    _emit(_dumps(response.model_dump(mode="json")), args.out)
    return EXIT_OK


def cmd_runs(args) -> int:
    async def _list():
        await experiment_service.db.init_db()
        return await experiment_service.list_runs(args.model, args.limit, args.offset)

    runs = asyncio.run(_list())
    _emit(_dumps([r.model_dump(mode="json") for r in runs]), None)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, reload=False, log_level=settings.LOG_LEVEL.lower())
    return EXIT_OK


def _add_law_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--k-const", type=int, help="constant resource K")
    group.add_argument("--k-pmf", help="resource pmf as value:prob pairs, e.g. 0:0.5,2:0.5")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rumor-lab", description="Resource-constrained rumor spreading laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides RUMORLAB_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="numerical limits for a law")
    _add_law_flags(p)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--mode", type=int, choices=[1, 2], default=1)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_theory)

    p = sub.add_parser("simulate", help="one seeded run")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0)
    _add_law_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", choices=["none", "summary", "full"], default="none")
    p.add_argument("--trace-out", help="per-step trace CSV")
    p.add_argument("--json-out", help="result JSON with the echoed request")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("experiment", help="replicated Monte Carlo experiment")
    p.add_argument("--config", help="JSON file with ExperimentConfig keys")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    _add_law_flags(p)
    p.add_argument("--replicas", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--epsilon", type=float, help="survival threshold as a fraction of n")
    p.add_argument("--trace", choices=["none", "summary", "full"])
    p.add_argument("--trace-dir", help="directory for per-replica traces")
    p.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS)
    p.add_argument("--records-out", help="replica records CSV")
    p.add_argument("--summary-out", help="summary JSON (stdout when omitted)")
    p.add_argument("--store", action="store_true", help="persist the run in the results store")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("oracle", help="exact law of a small instance")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0)
    _add_law_flags(p)
    p.add_argument("--depth-cap", type=int, default=24)
    p.add_argument("--statistic", choices=["final", "joint"], default="final")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("runs", help="list stored experiments")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--offset", type=int, default=0)
    p.set_defaults(handler=cmd_runs)

    p = sub.add_parser("serve", help="JSON HTTP surface")
    p.add_argument("--host", default=settings.HOST)
    p.add_argument("--port", type=int, default=settings.PORT)
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings.configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (RumorLabError, ValueError, RuntimeError, OSError) as e:
        logger.error("%s", e)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
