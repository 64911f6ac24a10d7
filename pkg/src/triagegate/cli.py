"""Command-line interface.

Subcommands: serve (gateway), eval, sweep, mock-serve, dataset (import,
review, dedup, balance, split, stats), fixtures. Exit codes: 0 on success,
1 on any error, 2 when the multi-run consistency check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from filelock import FileLock

from . import dataset as ds
from . import evaluate as ev
from . import fixtures
from .client import BackendConfig
from .errors import TriageError
from .gateway import GatewayConfig, GatewayServer
from .mock import MockBackendServer
from .model import SPLITS
from .prompting import PROMPT_VARIANTS, PromptSpec, render_system_prompt

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONSISTENT = 2


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


def _env_str(name: str, default: str) -> str:
    return os.environ.get(name) or default


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--backend-url",
        default=_env_str("TG_BACKEND_URL", "http://localhost:1234"),
        help="chat-completions backend base URL",
    )
    parser.add_argument(
        "--model", default=_env_str("TG_MODEL", "local-model"), help="model id"
    )
    parser.add_argument("--timeout-s", type=float, default=30.0)
    parser.add_argument("--max-retries", type=int, default=2)
    parser.add_argument("--temperature", type=float, default=0.0)


def _add_prompt_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--examples", type=int, default=_env_int("TG_EXAMPLES", 0),
        help="number of in-prompt examples (k)",
    )
    parser.add_argument("--seed", type=int, default=0, help="example selection seed")
    parser.add_argument(
        "--prompt-variant", choices=PROMPT_VARIANTS, default="bare",
        help="system instruction variant",
    )


def _backend_config(args) -> BackendConfig:
    return BackendConfig(
        base_url=args.backend_url,
        model_id=args.model,
        timeout_s=args.timeout_s,
        max_retries=args.max_retries,
        temperature=args.temperature,
    )


def _prompt_spec(args) -> PromptSpec:
    return PromptSpec(
        system_text=render_system_prompt(args.prompt_variant),
        k_examples=args.examples,
        selection_seed=args.seed,
    )


def _write_output(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triagegate",
        description="Emergency triage gateway and evaluation harness",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the classification gateway")
    serve.add_argument("--port", type=int, default=_env_int("TG_PORT", 9111))
    serve.add_argument("--bank", required=True, help="dataset JSONL for the example bank")
    serve.add_argument(
        "--platform", default=_env_str("TG_PLATFORM", "local"),
        help="platform label stamped into responses",
    )
    serve.add_argument("--snapshot", help="write counters here on clean shutdown")
    _add_backend_args(serve)
    _add_prompt_args(serve)

    eval_cmd = commands.add_parser("eval", help="evaluate a dataset split")
    eval_cmd.add_argument("--dataset", required=True)
    eval_cmd.add_argument("--split", choices=SPLITS, default="test")
    eval_cmd.add_argument("--runs", type=int, default=3)
    eval_cmd.add_argument("--format", choices=("text", "csv"), default="text")
    eval_cmd.add_argument("--parallelism", type=int, default=1)
    eval_cmd.add_argument(
        "--unparseable", choices=ev.UNPARSEABLE_POLICIES,
        default="score_as_non_emergency",
    )
    eval_cmd.add_argument("--platform", default=_env_str("TG_PLATFORM", "local"))
    eval_cmd.add_argument(
        "--tolerance", type=float, default=0.0,
        help="max accuracy spread allowed across runs",
    )
    eval_cmd.add_argument("--out", help="write the report here instead of stdout")
    eval_cmd.add_argument("--figures", help="directory for rendered figures")
    _add_backend_args(eval_cmd)
    _add_prompt_args(eval_cmd)

    sweep = commands.add_parser("sweep", help="evaluate across example counts")
    sweep.add_argument("--ks", default="0,8,10,20", help="comma-separated k values")
    sweep.add_argument("--dataset", required=True)
    sweep.add_argument("--split", choices=SPLITS, default="test")
    sweep.add_argument("--runs", type=int, default=3)
    sweep.add_argument("--format", choices=("text", "csv"), default="text")
    sweep.add_argument("--parallelism", type=int, default=1)
    sweep.add_argument(
        "--unparseable", choices=ev.UNPARSEABLE_POLICIES,
        default="score_as_non_emergency",
    )
    sweep.add_argument("--platform", default=_env_str("TG_PLATFORM", "local"))
    sweep.add_argument("--out", help="write the table here instead of stdout")
    sweep.add_argument("--figures", help="directory for rendered figures")
    _add_backend_args(sweep)
    _add_prompt_args(sweep)

    mock = commands.add_parser("mock-serve", help="run the deterministic mock backend")
    mock.add_argument(
        "--profile", default="identity",
        help="built-in profile name, '3b-sweep', or a profile JSON path",
    )
    mock.add_argument(
        "--dataset", default=str(fixtures.fixture_dataset_path()),
        help="dataset JSONL the mock answers about",
    )
    mock.add_argument("--port", type=int, default=1234)
    mock.add_argument(
        "--delay-s", type=float, default=None,
        help="override the profile's injected delay",
    )

    data = commands.add_parser("dataset", help="dataset curation pipeline")
    data_commands = data.add_subparsers(dest="dataset_command", required=True)

    imp = data_commands.add_parser("import", help="ingest a round of candidates")
    imp.add_argument("--dataset", required=True)
    imp.add_argument("--candidates", required=True, help="round candidates JSONL")
    imp.add_argument("--sidecar", help="review sidecar JSON with rejected texts")

    review = data_commands.add_parser("review", help="summarize a round's review outcome")
    review.add_argument("--candidates", required=True)
    review.add_argument("--sidecar", required=True)

    dedup = data_commands.add_parser("dedup", help="drop normalized duplicates")
    dedup.add_argument("--dataset", required=True)
    dedup.add_argument("--out", help="write here instead of in place")

    balance = data_commands.add_parser("balance", help="per-class counts")
    balance.add_argument("--dataset", required=True)

    split = data_commands.add_parser("split", help="assign stratified splits")
    split.add_argument("--dataset", required=True)
    split.add_argument("--train", type=float, default=0.8)
    split.add_argument("--val", type=float, default=0.1)
    split.add_argument("--test", type=float, default=0.1)
    split.add_argument("--seed", type=int, default=0)
    split.add_argument("--out", help="write here instead of in place")

    stats = data_commands.add_parser("stats", help="dataset summary")
    stats.add_argument("--dataset", required=True)

    fix = commands.add_parser("fixtures", help="regenerate bundled fixture files")
    fix.add_argument("--out-dir", required=True)

    return parser


def _cmd_serve(args) -> int:
    config = GatewayConfig(
        listen_port=args.port,
        backend=_backend_config(args),
        platform_label=args.platform,
        prompt=_prompt_spec(args),
        bank_path=args.bank,
        snapshot_path=args.snapshot,
    )
    server = GatewayServer(config).start()
    print(f"gateway listening on {server.base_url} (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return EXIT_OK


def _eval_config(args) -> ev.EvalConfig:
    return ev.EvalConfig(
        dataset_path=args.dataset,
        backend=_backend_config(args),
        prompt=_prompt_spec(args),
        split=args.split,
        runs=args.runs,
        unparseable_policy=args.unparseable,
        parallelism=args.parallelism,
        platform=args.platform,
    )


def _cmd_eval(args) -> int:
    reports = ev.run_eval(_eval_config(args))
    _write_output(ev.render_report(reports, args.format), args.out)
    if args.figures:
        from . import figures as fig

        out_dir = Path(args.figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        for report in reports:
            fig.save_confusion_matrix(
                report, out_dir / f"confusion_run{report.run_index}.png"
            )
        fig.save_latency_profile(reports, out_dir / "latency_profile.png")
    if any(r.incomplete for r in reports):
        print("error: evaluation aborted by backend failure", file=sys.stderr)
        return EXIT_ERROR
    if len(reports) >= 2:
        mean_accuracy = sum(r.accuracy for r in reports) / len(reports)
        print(
            f"mean accuracy over {len(reports)} runs: {mean_accuracy:.4f}",
            file=sys.stderr,
        )
        verdict = ev.check_consistency(reports, tolerance=args.tolerance)
        if not verdict.passed:
            print(
                f"consistency check failed: accuracy spread {verdict.max_delta:.6f} "
                f"> tolerance {verdict.tolerance:.6f}",
                file=sys.stderr,
            )
            return EXIT_INCONSISTENT
    return EXIT_OK


def _cmd_sweep(args) -> int:
    ks = tuple(int(part) for part in args.ks.split(",") if part.strip())
    config = ev.SweepConfig(base=_eval_config(args), ks=ks)
    rows = ev.run_sweep(config)
    _write_output(ev.render_sweep(rows, args.format), args.out)
    if args.figures:
        from . import figures as fig

        out_dir = Path(args.figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        fig.save_accuracy_by_k(rows, out_dir / "accuracy_by_k.png")
    return EXIT_OK


def _cmd_mock_serve(args) -> int:
    profile = fixtures.resolve_profile(args.profile)
    if args.delay_s is not None:
        if isinstance(profile, dict):
            profile = {k: p.with_delay(args.delay_s) for k, p in profile.items()}
        else:
            profile = profile.with_delay(args.delay_s)
    dataset = ds.load_phrases(args.dataset)
    server = MockBackendServer(profile, dataset, port=args.port).start()
    print(f"mock backend ({args.profile}) listening on {server.base_url} (Ctrl-C to stop)")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.shutdown()
    return EXIT_OK


def _dataset_lock(path: str) -> FileLock:
    return FileLock(str(path) + ".lock")


def _cmd_dataset(args) -> int:
    command = args.dataset_command
    if command == "import":
        round_ = ds.load_round(args.candidates, args.sidecar)
        with _dataset_lock(args.dataset):
            existing = (
                ds.load_phrases(args.dataset) if Path(args.dataset).exists() else []
            )
            merged, report = ds.ingest_candidates(existing, round_)
            ds.save_phrases(args.dataset, merged)
        print(
            f"round {report.round}: {report.accepted} accepted, "
            f"{report.rejected} rejected, {report.duplicates} duplicates "
            f"({report.candidates} candidates); dataset now {len(merged)} phrases"
        )
        return EXIT_OK
    if command == "review":
        round_ = ds.load_round(args.candidates, args.sidecar)
        rate = ds.rejection_rate(round_)
        print(
            f"round {round_.round}: {len(round_.candidates)} candidates, "
            f"{len(round_.rejected_texts)} rejected "
            f"(rejection rate {rate:.4f})"
        )
        return EXIT_OK
    if command == "dedup":
        with _dataset_lock(args.dataset):
            phrases = ds.load_phrases(args.dataset)
            kept, removed = ds.deduplicate(phrases)
            ds.save_phrases(args.out or args.dataset, kept)
        print(f"removed {removed} duplicates, kept {len(kept)} phrases")
        return EXIT_OK
    if command == "balance":
        report = ds.check_balance(ds.load_phrases(args.dataset))
        print(
            f"emergency={report.emergency} non_emergency={report.non_emergency} "
            f"imbalance_ratio={report.imbalance_ratio:.4f}"
        )
        return EXIT_OK
    if command == "split":
        spec = ds.SplitSpec(
            train_frac=args.train, val_frac=args.val, test_frac=args.test,
            seed=args.seed,
        )
        with _dataset_lock(args.dataset):
            phrases = ds.load_phrases(args.dataset)
            assigned = ds.split_dataset(phrases, spec)
            ds.save_phrases(args.out or args.dataset, assigned)
        counts: dict[str, int] = {}
        for phrase in assigned:
            counts[phrase.split or "none"] = counts.get(phrase.split or "none", 0) + 1
        print(" ".join(f"{name}={count}" for name, count in sorted(counts.items())))
        return EXIT_OK
    if command == "stats":
        phrases = ds.load_phrases(args.dataset)
        balance = ds.check_balance(phrases)
        by_split: dict[str, int] = {}
        by_source: dict[str, int] = {}
        for phrase in phrases:
            by_split[phrase.split or "none"] = by_split.get(phrase.split or "none", 0) + 1
            by_source[phrase.source] = by_source.get(phrase.source, 0) + 1
        print(
            json.dumps(
                {
                    "phrases": len(phrases),
                    "emergency": balance.emergency,
                    "non_emergency": balance.non_emergency,
                    "imbalance_ratio": balance.imbalance_ratio,
                    "rounds": ds.max_round(phrases),
                    "by_split": by_split,
                    "by_source": by_source,
                },
                indent=2,
            )
        )
        return EXIT_OK
    raise ValueError(f"unknown dataset command {command!r}")


def _cmd_fixtures(args) -> int:
    written = fixtures.write_fixture_files(args.out_dir)
    for path in written:
        print(path)
    return EXIT_OK


_COMMANDS = {
    "serve": _cmd_serve,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "mock-serve": _cmd_mock_serve,
    "dataset": _cmd_dataset,
    "fixtures": _cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (TriageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
