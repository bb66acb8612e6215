"""Command-line harness: synth, annotate, run, generate, report.

Exit codes: 0 on success, 1 on run failure, 2 on usage errors.  ``run``
reads an optional JSON config file; explicit flags override config values.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus, save_corpus
from .difficulty import annotate_corpus, categorize
from .errors import AlpgenError, UsageError
from .figures import render_difficulty_histogram, render_metric_bars
from .gateway import CacheMode, Gateway, HttpBackend, RecordReplayBackend
from .harness import (
    load_report_json,
    run_experiment,
    write_csv,
    write_report_json,
)
from .minialpg import SynthSpec, synthesize_corpus
from .mocks import echo_mock_backend
from .pipeline import DEFAULT_LANG, Strategy, run_strategy
from .report import ReportStyle, render_report

logger = logging.getLogger(__name__)

DEFAULT_STRATEGIES = "zero-shot,few-shot,pke"


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _add_gateway_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("gateway")
    group.add_argument(
        "--backend",
        choices=("mock", "http"),
        default=None,
        help="completion backend (default: mock)",
    )
    group.add_argument("--endpoint", default=None, help="HTTP chat-completions URL")
    group.add_argument("--model", default=None, help="model identifier")
    group.add_argument(
        "--timeout", type=float, default=None, help="HTTP timeout in seconds"
    )
    group.add_argument(
        "--max-retries", type=int, default=None, help="transport retry bound"
    )
    group.add_argument(
        "--parallelism", type=_positive_int, default=None, help="request fan-out bound"
    )
    group.add_argument(
        "--record", default=None, metavar="STORE", help="record completions to a JSONL store"
    )
    group.add_argument(
        "--replay", default=None, metavar="STORE", help="replay completions from a JSONL store"
    )


_GATEWAY_DEFAULTS = {
    "backend": "mock",
    "endpoint": None,
    "model": "mock-model",
    "timeout": 60.0,
    "max_retries": 3,
    "parallelism": 4,
    "record": None,
    "replay": None,
}


def _setting(args: argparse.Namespace, config: dict, key: str):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return _GATEWAY_DEFAULTS.get(key)


def make_gateway(args: argparse.Namespace, config: dict | None = None) -> Gateway:
    config = config or {}
    backend_name = _setting(args, config, "backend")
    if backend_name == "http":
        endpoint = _setting(args, config, "endpoint")
        if not endpoint:
            raise UsageError("--endpoint is required with the http backend")
        backend = HttpBackend(endpoint, timeout=float(_setting(args, config, "timeout")))
        model = _setting(args, config, "model") or "default-model"
    else:
        backend = echo_mock_backend()
        model = _setting(args, config, "model")
    record = _setting(args, config, "record")
    replay = _setting(args, config, "replay")
    if record and replay:
        raise UsageError("--record and --replay are mutually exclusive")
    if replay:
        backend = RecordReplayBackend(backend, replay, CacheMode.REPLAY)
    elif record:
        backend = RecordReplayBackend(backend, record, CacheMode.RECORD)
    return Gateway(
        backend,
        model=model,
        max_retries=int(_setting(args, config, "max_retries")),
        parallelism=int(_setting(args, config, "parallelism")),
    )


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        seed=args.seed,
        count=args.count,
        complexity_range=(args.min_len, args.max_len),
    )
    manifest = synthesize_corpus(spec)
    save_corpus(manifest, args.out)
    print(f"wrote {len(manifest)} examples to {args.out}")
    return 0


def cmd_annotate(args: argparse.Namespace) -> int:
    manifest = load_corpus(args.corpus)
    if manifest.all_scored and not args.rescore:
        print("corpus already scored; re-banding only")
    else:
        gateway = make_gateway(args)
        manifest = annotate_corpus(manifest, gateway, rescore=args.rescore)
    manifest = categorize(manifest)
    save_corpus(manifest, args.out)
    counts = {"easy": 0, "medium": 0, "hard": 0}
    for ex in manifest:
        counts[ex.band.value] += 1
    print(
        f"wrote {args.out}: easy={counts['easy']} "
        f"medium={counts['medium']} hard={counts['hard']}"
    )
    return 0


def _parse_strategies(text: str, k: int) -> list[Strategy]:
    return [Strategy.parse(token, k=k) for token in text.split(",") if token.strip()]


def cmd_run(args: argparse.Namespace) -> int:
    config: dict = {}
    if args.config:
        config_path = Path(args.config)
        if not config_path.exists():
            raise UsageError(f"config file not found: {config_path}")
        try:
            config = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad config file {config_path}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")

    corpus_path = args.corpus or config.get("corpus")
    if not corpus_path:
        raise UsageError("no corpus given (flag --corpus or config key 'corpus')")
    outdir = Path(args.outdir or config.get("outdir") or "runs/latest")
    k = args.k if args.k is not None else int(config.get("k", 3))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    lang = args.lang or config.get("lang") or DEFAULT_LANG
    strategies_text = args.strategies or config.get("strategies") or DEFAULT_STRATEGIES
    if isinstance(strategies_text, list):
        strategies_text = ",".join(strategies_text)
    try:
        strategies = _parse_strategies(strategies_text, k)
    except AlpgenError as exc:
        raise UsageError(str(exc)) from exc
    if not strategies:
        raise UsageError("no strategies selected")

    manifest = load_corpus(corpus_path)
    gateway = make_gateway(args, config)
    report = run_experiment(manifest, strategies, gateway, lang=lang, seed=seed)

    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(report, outdir / "report.csv")
    write_report_json(report, outdir / "report.json")
    if report.aggregates:
        table = render_report(report.aggregates, report.metadata, ReportStyle.MAIN)
        (outdir / "report.txt").write_text(table + "\n", encoding="utf-8")
        if not args.no_figures:
            render_metric_bars(report.aggregates, outdir / "metrics.png")
        print(table)
    print(f"\nwrote {csv_path}")

    if report.all_failed:
        print("error: every query failed; see the error column", file=sys.stderr)
        return 1
    failed = sum(1 for r in report.rows if r.error)
    if failed:
        print(f"warning: {failed} cell(s) failed; see the error column", file=sys.stderr)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    manifest = load_corpus(args.corpus)
    gateway = make_gateway(args)
    try:
        strategy = Strategy.parse(args.strategy, k=args.k)
    except AlpgenError as exc:
        raise UsageError(str(exc)) from exc
    code = run_strategy(strategy, _query_pair(args.nl), manifest, gateway, lang=args.lang)
    if not code:
        print("warning: the completion contained no recognizable code", file=sys.stderr)
    print(code)
    return 0


def _query_pair(nl: str):
    from .corpus import ExamplePair

    return ExamplePair(id="query", nl=nl, code="-")


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report_json(args.report)
    style = ReportStyle(args.style)
    print(render_report(report.aggregates, report.metadata, style))
    if args.figures_out:
        path = render_metric_bars(report.aggregates, args.figures_out)
        print(f"\nwrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alpgen",
        description="Progressive knowledge-enhanced NL-to-ALPG generation harness",
    )
    parser.add_argument("--version", action="version", version=f"alpgen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--count", type=_positive_int, required=True)
    p_synth.add_argument("--min-len", type=_positive_int, default=1)
    p_synth.add_argument("--max-len", type=_positive_int, default=6)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_annotate = sub.add_parser("annotate", help="score and band a corpus")
    p_annotate.add_argument("--corpus", required=True)
    p_annotate.add_argument("--out", required=True)
    p_annotate.add_argument(
        "--rescore", action="store_true", help="re-annotate even if already scored"
    )
    _add_gateway_args(p_annotate)
    p_annotate.set_defaults(func=cmd_annotate)

    p_run = sub.add_parser("run", help="evaluate strategies over a corpus")
    p_run.add_argument("--config", help="JSON config file (flags override)")
    p_run.add_argument("--corpus")
    p_run.add_argument("--outdir")
    p_run.add_argument(
        "--strategies",
        help=f"comma-separated strategy list (default: {DEFAULT_STRATEGIES})",
    )
    p_run.add_argument("--k", type=_positive_int, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--lang", default=None)
    p_run.add_argument("--no-figures", action="store_true")
    _add_gateway_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_generate = sub.add_parser("generate", help="generate code for one description")
    p_generate.add_argument("--corpus", required=True)
    p_generate.add_argument("--nl", required=True, help="the code description")
    p_generate.add_argument("--strategy", default="pke")
    p_generate.add_argument("--k", type=_positive_int, default=3)
    p_generate.add_argument("--lang", default=DEFAULT_LANG)
    _add_gateway_args(p_generate)
    p_generate.set_defaults(func=cmd_generate)

    p_report = sub.add_parser("report", help="re-render a saved report")
    p_report.add_argument("--report", required=True, help="path to report.json")
    p_report.add_argument(
        "--style", choices=[s.value for s in ReportStyle], default="main"
    )
    p_report.add_argument(
        "--figures-out", default=None, help="also render the metrics chart here"
    )
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AlpgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
