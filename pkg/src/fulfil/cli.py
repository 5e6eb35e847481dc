"""Command-line entry points.

``fulfil serve`` boots the HTTP service, ``fulfil gen`` (also installed
standalone as ``taskgen``) writes synthetic datasets, and ``fulfil eval``
runs or re-scores evaluations and accuracy sweeps.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .harness import (
    judge_records,
    load_cost_model,
    load_predictions,
    load_sweep_spec,
    render_report_csv,
    render_report_table,
    report_rows,
    run_eval,
    sweep,
    write_predictions,
)
from .io import load_instance
from .router import FixtureBackend, RemoteBackend
from .service import create_app, default_instance
from .taskgen import (
    PerturbationConfig,
    export_training_config,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from .templates import load_ood_pool, load_templates

ENV_ENDPOINT = "FULFIL_ENDPOINT"
ENV_MODEL = "FULFIL_MODEL"
ENV_AUTH_HEADER = "FULFIL_AUTH_HEADER"
ENV_AUTH_VALUE = "FULFIL_AUTH_VALUE"


def _build_backend(name: str):
    if name == "fixture":
        return FixtureBackend()
    if name == "remote":
        endpoint = os.environ.get(ENV_ENDPOINT)
        if not endpoint:
            raise SystemExit(
                f"remote backend needs {ENV_ENDPOINT} set to a chat-completion URL"
            )
        return RemoteBackend(
            endpoint=endpoint,
            model=os.environ.get(ENV_MODEL, "local-slm"),
            auth_header=os.environ.get(ENV_AUTH_HEADER),
            auth_value=os.environ.get(ENV_AUTH_VALUE),
        )
    raise SystemExit(f"unknown backend: {name!r}")


def _instance_from(path):
    return load_instance(path) if path else default_instance()


def _add_instance_flag(parser):
    parser.add_argument(
        "--instance",
        metavar="DIR",
        default=None,
        help="instance directory (default: the packaged example)",
    )


def _add_backend_flag(parser):
    parser.add_argument(
        "--backend",
        choices=("fixture", "remote"),
        default="fixture",
        help="router backend (remote reads FULFIL_* env vars)",
    )


def _add_gen_args(parser):
    parser.add_argument(
        "--templates",
        metavar="DIR",
        default=None,
        help="template directory (default: the packaged templates)",
    )
    parser.add_argument("--shots", type=int, default=20, metavar="N",
                        help="records per task (default 20)")
    parser.add_argument("--ood-fraction", type=float, default=0.04, metavar="F",
                        help="target out-of-domain fraction (default 0.04)")
    parser.add_argument("--seed", type=int, default=0, metavar="S")
    parser.add_argument("--out", required=True, metavar="FILE",
                        help="output JSONL path")
    parser.add_argument("--typo-rate", type=float, default=0.0, metavar="P",
                        help="per-character typo probability (default 0)")
    parser.add_argument(
        "--distractions",
        metavar="FILE",
        default=None,
        help="file with one distraction phrase per line",
    )
    parser.add_argument(
        "--training-config",
        metavar="FILE",
        default=None,
        help="also write the fine-tuning hyperparameter JSON here",
    )


def cmd_serve(args) -> int:
    import uvicorn

    app = create_app(
        instance=_instance_from(args.instance),
        backend=_build_backend(args.backend),
        session_dir=args.session_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_gen(args) -> int:
    templates = load_templates(args.templates)
    phrases = ()
    if args.distractions:
        lines = Path(args.distractions).read_text(encoding="utf-8").splitlines()
        phrases = tuple(line.strip() for line in lines if line.strip())
    cfg = PerturbationConfig(
        typo_rate=args.typo_rate, distraction_phrases=phrases, seed=args.seed
    )
    records = generate_dataset(
        templates, load_ood_pool(), args.shots, args.ood_fraction, cfg
    )
    write_dataset(records, args.out)
    if args.training_config:
        export_training_config(args.training_config)
    n_ood = sum(1 for r in records if not r.in_domain)
    print(
        f"wrote {len(records)} records "
        f"({len(records) - n_ood} in-domain, {n_ood} OOD) to {args.out}"
    )
    return 0


def cmd_eval_run(args) -> int:
    dataset = load_dataset(args.dataset)
    backend = _build_backend(args.backend)
    cost_model = load_cost_model(args.cost_model) if args.cost_model else None
    run = run_eval(
        dataset, backend, cost_model, instance=_instance_from(args.instance)
    )
    if args.predictions_out:
        write_predictions(run.records, args.predictions_out)
    print(render_report_table(report_rows(run.records, cost_model)), end="")
    return 0


def cmd_eval_judge(args) -> int:
    records = load_predictions(args.predictions)
    judge_records(records, _instance_from(args.instance))
    cost_model = load_cost_model(args.cost_model) if args.cost_model else None
    rows = report_rows(records, cost_model)
    if args.csv:
        Path(args.csv).write_text(render_report_csv(rows), encoding="utf-8")
    if args.out:
        write_predictions(records, args.out)
    print(render_report_table(rows), end="")
    return 0


def cmd_eval_sweep(args) -> int:
    spec_path = Path(args.spec)
    text = sweep(
        load_sweep_spec(spec_path),
        base_dir=spec_path.parent,
        instance=_instance_from(args.instance),
    )
    Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fulfil", description="fulfillment planning copilot"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    _add_instance_flag(serve)
    _add_backend_flag(serve)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000, metavar="P")
    serve.add_argument(
        "--session-dir",
        metavar="DIR",
        default=None,
        help="persist session logs as JSONL files here",
    )
    serve.set_defaults(func=cmd_serve)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_gen_args(gen)
    gen.set_defaults(func=cmd_gen)

    ev = sub.add_parser("eval", help="run and score evaluations")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True)

    run = ev_sub.add_parser("run", help="route a dataset through a backend and score")
    run.add_argument("--dataset", required=True, metavar="FILE")
    _add_backend_flag(run)
    run.add_argument("--cost-model", metavar="FILE", default=None)
    _add_instance_flag(run)
    run.add_argument(
        "--predictions-out",
        metavar="FILE",
        default=None,
        help="save per-record predictions JSONL",
    )
    run.set_defaults(func=cmd_eval_run)

    judge = ev_sub.add_parser("judge", help="re-score a predictions file")
    judge.add_argument("--predictions", required=True, metavar="FILE")
    judge.add_argument("--cost-model", metavar="FILE", default=None)
    _add_instance_flag(judge)
    judge.add_argument("--csv", metavar="FILE", default=None,
                       help="also write the report as CSV")
    judge.add_argument("--out", metavar="FILE", default=None,
                       help="write judged records back out")
    judge.set_defaults(func=cmd_eval_judge)

    sw = ev_sub.add_parser("sweep", help="accuracy-vs-shots CSV from run files")
    sw.add_argument("--spec", required=True, metavar="FILE")
    sw.add_argument("--out", required=True, metavar="CSV")
    _add_instance_flag(sw)
    sw.set_defaults(func=cmd_eval_sweep)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.func(args)


def taskgen_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="taskgen", description="template-expanded synthetic dataset generator"
    )
    _add_gen_args(parser)
    return cmd_gen(parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
