# backend/app/scripts/run_batch.py

"""
Batch runner: play N simulations of one run configuration and write one
transcript per seed plus a metrics summary.

Resumable: seeds already marked succeeded in the duckdb ledger (and present
on disk) are skipped, so an interrupted batch can simply be re-run.

    python -m app.scripts.cli run --config runs/economy.toml --out out/ --sims 100
"""

from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.agents.llm_policy import LLMPolicy
from app.agents.policy import AgentPolicy
from app.agents.scripted import ScriptedPolicy
from app.engine import run_ledger
from app.engine.rounds import run_collaboration
from app.engine.transcript_store import load_transcripts, transcript_path, write_transcript
from app.engine.types import EngineConfig, Transcript
from app.environments.base import Environment
from app.environments.econ_metrics import AUC_POINTS, econ_metrics
from app.environments.economy import EconomyEnvironment
from app.environments.recommendation import (
    RatingTask,
    RecommendationEnvironment,
    always_guess_four,
    ingest_tables,
    rating_metrics,
    standing_ratings,
)
from app.environments.welfare import u_max
from app.providers.chat_client import ChatClient
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
METRICS_FILE = "metrics.csv"

ClientFactory = Callable[[], ChatClient]


class BatchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    job_id: str
    seeds: List[int]
    ran: List[int]
    skipped: List[int]
    failed: List[int]
    summary_path: Optional[str] = None


# ---------------------------------------------------------------------------
# Building one simulation
# ---------------------------------------------------------------------------


def load_tasks(cfg: RunConfig) -> List[RatingTask]:
    assert cfg.recommendation is not None
    rec = cfg.recommendation
    return ingest_tables(rec.basic_info, rec.user_history, rec.movie_history)


def build_environment(
    cfg: RunConfig, index: int, tasks: Optional[Sequence[RatingTask]] = None
) -> Environment:
    if cfg.environment == "economy":
        assert cfg.economy is not None
        endowment = None if cfg.economy.endowment == "even" else np.asarray(cfg.economy.endowment)
        return EconomyEnvironment(cfg.economy.utility_set, cfg.agent_count, endowment)
    if not tasks:
        raise ValueError("recommendation runs need at least one rating task")
    # simulation i plays example i, cycling when there are more simulations than examples
    return RecommendationEnvironment(tasks[index % len(tasks)])


def engine_config(cfg: RunConfig, env: Environment, seed: int) -> EngineConfig:
    if isinstance(env, EconomyEnvironment):
        task = env.preset.value
    else:
        task = env.task.example_id
    return EngineConfig(
        rounds=cfg.rounds,
        agents=env.agent_ids(),
        mechanism=cfg.mechanism,
        environment=env.env_id,
        task=task,
        seed=seed,
        share_reasoning=cfg.share_reasoning,
        strict_integer_cumulative=cfg.strict_integer_cumulative,
    )


def build_roster(
    cfg: RunConfig,
    env: Environment,
    seed: int,
    client_factory: Optional[ClientFactory] = None,
) -> List[AgentPolicy]:
    roster: List[AgentPolicy] = []
    client: Optional[ChatClient] = None
    for i, entry in enumerate(cfg.agents):
        if entry.policy == "llm":
            if client is None:
                client = client_factory() if client_factory else ChatClient()
            roster.append(LLMPolicy(i, env, client))
        else:
            roster.append(ScriptedPolicy(i, env, entry.policy, rate=entry.rate, seed=seed))
    return roster


async def run_one(
    cfg: RunConfig,
    index: int,
    seed: int,
    *,
    tasks: Optional[Sequence[RatingTask]] = None,
    client_factory: Optional[ClientFactory] = None,
) -> Transcript:
    env = build_environment(cfg, index, tasks)
    roster = build_roster(cfg, env, seed, client_factory)
    return await run_collaboration(
        engine_config(cfg, env, seed), roster, env, simulation_id=f"sim-{seed}"
    )


# ---------------------------------------------------------------------------
# Summary
# ---------------------------------------------------------------------------


def economy_metrics_frame(cfg: RunConfig, transcripts: Sequence[Transcript]) -> pd.DataFrame:
    assert cfg.economy is not None
    best = u_max(cfg.economy.utility_set, cfg.agent_count).value
    rows = []
    for t in transcripts:
        env = build_environment(cfg, 0)
        m = econ_metrics(t, env, best)
        row = {"simulation_id": t.simulation_id, "seed": t.seed}
        for n in AUC_POINTS:
            if n <= len(m.u_series):
                row[f"U@{n}"] = m.u_at(n)
        for n, value in sorted(m.auc.items()):
            row[f"AUC@{n}"] = value
        row.update(rationality=m.rationality, minmax=m.minmax, rigidity=m.rigidity)
        rows.append(row)
    return pd.DataFrame(rows)


def recommendation_metrics_frame(
    transcripts: Sequence[Transcript], tasks: Sequence[RatingTask]
) -> pd.DataFrame:
    gold = {t.example_id: float(t.gold_rating) for t in tasks}
    rows = []
    for t in transcripts:
        ratings = standing_ratings(t)
        row = {"simulation_id": t.simulation_id, "seed": t.seed, "example_id": t.config.task}
        for r, value in enumerate(ratings, start=1):
            row[f"rating@{r}"] = value
            row[f"abs_error@{r}"] = abs((4.0 if value is None else value) - gold[t.config.task])
        rows.append(row)
    return pd.DataFrame(rows)


def summarize(frame: pd.DataFrame, extra: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """Mean and standard error per metric column."""
    metric_cols = [c for c in frame.columns if c not in ("simulation_id", "seed", "example_id")]
    metric_cols = [c for c in metric_cols if not c.startswith("rating@")]
    numeric = frame[metric_cols].astype(float)
    out = pd.DataFrame(
        {
            "metric": metric_cols,
            "mean": [numeric[c].mean() for c in metric_cols],
            "se": [numeric[c].sem() if len(numeric) > 1 else float("nan") for c in metric_cols],
            "n": [int(numeric[c].count()) for c in metric_cols],
        }
    )
    if extra is not None:
        out = pd.concat([out, extra], ignore_index=True)
    return out


def write_summary(
    cfg: RunConfig,
    out_dir: Path,
    transcripts: Sequence[Transcript],
    tasks: Optional[Sequence[RatingTask]] = None,
) -> Path:
    if cfg.environment == "economy":
        frame = economy_metrics_frame(cfg, transcripts)
        summary = summarize(frame)
    else:
        assert tasks is not None
        frame = recommendation_metrics_frame(transcripts, tasks)
        by_id = {t.example_id: t for t in tasks}
        played = [by_id[t.config.task] for t in transcripts]
        preds = [standing_ratings(t) for t in transcripts]
        rm = rating_metrics(preds, [float(t.gold_rating) for t in played])
        baseline = always_guess_four(played)
        extra_rows = []
        for r, (mae, rmse) in enumerate(zip(rm.mae, rm.rmse), start=1):
            extra_rows.append({"metric": f"MAE@{r}", "mean": mae, "se": float("nan"), "n": rm.examples})
            extra_rows.append({"metric": f"RMSE@{r}", "mean": rmse, "se": float("nan"), "n": rm.examples})
        extra_rows.append(
            {"metric": "MAE always-guess-4", "mean": baseline.mae[0], "se": float("nan"), "n": baseline.examples}
        )
        extra_rows.append(
            {"metric": "RMSE always-guess-4", "mean": baseline.rmse[0], "se": float("nan"), "n": baseline.examples}
        )
        summary = summarize(frame, pd.DataFrame(extra_rows))

    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / METRICS_FILE, index=False)
    path = out_dir / SUMMARY_FILE
    summary.to_csv(path, index=False)
    return path


# ---------------------------------------------------------------------------
# Batch
# ---------------------------------------------------------------------------


async def run_batch(
    cfg: RunConfig,
    *,
    out_dir: Path | str,
    sims: int,
    seed_base: Optional[int] = None,
    parallel: int = 1,
    digest: str = "",
    db_path: Optional[str] = None,
    client_factory: Optional[ClientFactory] = None,
) -> BatchResult:
    out_dir = Path(out_dir)
    base = cfg.seed if seed_base is None else seed_base
    seeds = [base + i for i in range(sims)]
    tasks = load_tasks(cfg) if cfg.environment == "recommendation" else None

    job_id = run_ledger.open_job(digest=digest, out_dir=out_dir, seeds=seeds, db_path=db_path)
    done = run_ledger.succeeded_seeds(job_id, db_path=db_path)
    skipped = [s for s in seeds if s in done and transcript_path(out_dir, s).exists()]
    todo = [(i, s) for i, s in enumerate(seeds) if s not in skipped]
    if skipped:
        print(f"[run] resuming job {job_id}: {len(skipped)} seeds already done", flush=True)

    gate = asyncio.Semaphore(max(1, parallel))
    ran: List[int] = []
    failed: List[int] = []

    async def _play(index: int, seed: int) -> None:
        async with gate:
            run_ledger.set_item_state(job_id, seed, state="running", bump_attempts=True, db_path=db_path)
            try:
                transcript = await run_one(
                    cfg, index, seed, tasks=tasks, client_factory=client_factory
                )
                write_transcript(out_dir, transcript)
            except Exception as e:
                logger.exception("simulation seed=%s failed", seed)
                run_ledger.set_item_state(
                    job_id, seed, state="failed", last_error=str(e)[:500], db_path=db_path
                )
                failed.append(seed)
                return
            run_ledger.set_item_state(job_id, seed, state="succeeded", db_path=db_path)
            ran.append(seed)
            print(
                f"[run] seed={seed} done ({len(ran) + len(skipped)}/{len(seeds)}), "
                f"{len(transcript.accepted_history)} acceptances",
                flush=True,
            )

    await asyncio.gather(*(_play(i, s) for i, s in todo))

    job = run_ledger.finish_job(
        job_id, last_error=f"{len(failed)} simulations failed" if failed else None, db_path=db_path
    )

    wanted = set(seeds)
    transcripts = [t for t in load_transcripts(out_dir) if t.seed in wanted]
    summary_path = None
    if transcripts:
        summary_path = str(write_summary(cfg, out_dir, transcripts, tasks))
    print(
        f"[run] job {job_id} {job['state']}: ran={len(ran)} skipped={len(skipped)} "
        f"failed={len(failed)} summary={summary_path}",
        flush=True,
    )
    return BatchResult(
        job_id=job_id,
        seeds=seeds,
        ran=sorted(ran),
        skipped=skipped,
        failed=sorted(failed),
        summary_path=summary_path,
    )
