# backend/app/scripts/cli.py

"""
Command-line front door.

    python -m app.scripts.cli run      --config runs/economy.toml --out out/ --sims 100 [--no-llm]
    python -m app.scripts.cli analyze  --out out/ [--no-llm]
    python -m app.scripts.cli stopping --out out/ [--config runs/economy.toml] [--rules oracle,validation]

Exit codes: 0 success, 1 invalid input, 2 provider or runtime failure.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.config import CONFIG, configure_logging
from app.engine.run_ledger import config_digest
from app.environments.recommendation import TableSchemaError
from app.linguistics.dialogue_acts import ChatLabeler, StubLabeler
from app.linguistics.embeddings import StubEmbedder
from app.linguistics.readability import LinguisticsError
from app.providers.chat_client import ChatClient, ProviderError
from app.providers.embedding_client import EmbeddingClient
from app.schemas.run_config import RunConfigError, config_text, load_run_config
from app.scripts.analyze import analyze
from app.scripts.evaluate_stopping import evaluate_stopping
from app.scripts.run_batch import load_tasks, run_batch
from app.stopping.crossval import RULES
from app.stopping.series import StoppingError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (RunConfigError, TableSchemaError, StoppingError, LinguisticsError, FileNotFoundError)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundtable", description="Decentralized multi-agent collaboration lab."
    )
    parser.add_argument("--log-level", default=None, help="overrides ROUNDTABLE_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="play a batch of simulations")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--sims", type=int, default=100)
    run.add_argument("--seed", type=int, default=None, help="seed base (default: config seed)")
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--mechanism", default=None, help="override the config's mechanism")
    run.add_argument("--no-llm", action="store_true", help="scripted agents only")

    analyze_cmd = sub.add_parser("analyze", help="linguistic features, dialogue acts, transition graph")
    analyze_cmd.add_argument("--out", required=True, type=Path)
    analyze_cmd.add_argument("--no-llm", action="store_true", help="stub embedder and keyword labeler")
    analyze_cmd.add_argument("--counting", choices=("pairs", "existence"), default="pairs")

    stopping_cmd = sub.add_parser("stopping", help="k-fold evaluation of the early-stopping rules")
    stopping_cmd.add_argument("--out", required=True, type=Path)
    stopping_cmd.add_argument("--config", type=Path, default=None)
    stopping_cmd.add_argument("--rules", default=",".join(RULES))
    stopping_cmd.add_argument("--folds", type=int, default=5)
    stopping_cmd.add_argument("--seed", type=int, default=0)
    return parser


async def _cmd_run(args: argparse.Namespace) -> int:
    if args.sims < 1:
        raise RunConfigError("--sims must be at least 1")
    cfg = load_run_config(args.config)
    try:
        cfg = cfg.with_overrides(mechanism=args.mechanism, scripted_only=args.no_llm)
    except ValueError as e:
        raise RunConfigError(str(e)) from None
    if cfg.uses_llm and not CONFIG.api_key:
        raise RunConfigError("config has llm agents but ROUNDTABLE_API_KEY is not set; use --no-llm")

    print(f"[run] provider: {CONFIG.public_dict()['provider']}", flush=True)
    # digest covers overrides so a --mechanism variant is its own job
    digest_source = config_text(args.config) + f"|{cfg.mechanism.value}|{args.no_llm}"
    result = await run_batch(
        cfg,
        out_dir=args.out,
        sims=args.sims,
        seed_base=args.seed,
        parallel=args.parallel,
        digest=config_digest(digest_source),
    )
    return EXIT_RUNTIME if result.failed else EXIT_OK


async def _cmd_analyze(args: argparse.Namespace) -> int:
    if args.no_llm:
        embedder, labeler = StubEmbedder(), StubLabeler()
    else:
        embedder, labeler = EmbeddingClient(), ChatLabeler(ChatClient())
    await analyze(args.out, embedder=embedder, labeler=labeler, counting=args.counting)
    return EXIT_OK


def _cmd_stopping(args: argparse.Namespace) -> int:
    rules = [r.strip() for r in args.rules.split(",") if r.strip()]
    unknown = [r for r in rules if r not in RULES]
    if unknown:
        raise StoppingError(f"unknown rules {unknown}; valid: {', '.join(RULES)}")
    cfg = load_run_config(args.config) if args.config else None
    tasks = load_tasks(cfg) if cfg is not None and cfg.environment == "recommendation" else None
    paths = evaluate_stopping(args.out, rules=rules, k=args.folds, seed=args.seed, cfg=cfg, tasks=tasks)
    print(f"[stopping] wrote {paths['outcomes']} and {paths['summary']}", flush=True)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        if args.command == "run":
            return asyncio.run(_cmd_run(args))
        if args.command == "analyze":
            return asyncio.run(_cmd_analyze(args))
        return _cmd_stopping(args)
    except VALIDATION_ERRORS as e:
        print(f"[{args.command}] error: {e}", file=sys.stderr, flush=True)
        return EXIT_INVALID
    except (ProviderError, RuntimeError) as e:
        print(f"[{args.command}] failed: {e}", file=sys.stderr, flush=True)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"[{args.command}] failed: {e}", file=sys.stderr, flush=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
