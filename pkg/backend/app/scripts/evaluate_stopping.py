# backend/app/scripts/evaluate_stopping.py

"""
Cross-validated comparison of the early-stopping rules on a finished batch.

Writes <out>/stopping/cv_outcomes.csv (rule x mechanism x fold x simulation)
and <out>/stopping/cv_summary.json (per mechanism and rule: mean performance,
mean stopped round, effective ratio, mean threshold).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from app.engine.transcript_store import load_transcripts
from app.engine.types import Transcript
from app.environments.economy import EconomyEnvironment
from app.environments.recommendation import RatingTask
from app.environments.welfare import u_max
from app.schemas.run_config import RunConfig
from app.scripts.analyze import cached_simulation, read_info_differences
from app.stopping.crossval import (
    DIALOGUE_ACT,
    INFO_DIFFERENCE,
    RULES,
    SimulationData,
    kfold_evaluate,
)
from app.stopping.series import (
    PerformanceSeries,
    StoppingError,
    economy_series,
    recommendation_series,
)

logger = logging.getLogger(__name__)

STOPPING_DIR = "stopping"
OUTCOMES_FILE = "cv_outcomes.csv"
SUMMARY_FILE = "cv_summary.json"


def performance_series(
    transcripts: Sequence[Transcript],
    *,
    cfg: Optional[RunConfig] = None,
    tasks: Optional[Sequence[RatingTask]] = None,
) -> List[PerformanceSeries]:
    out: List[PerformanceSeries] = []
    best: Dict[tuple, float] = {}
    gold = {t.example_id: float(t.gold_rating) for t in tasks or []}
    for t in transcripts:
        if t.config.environment == "economy":
            k = t.config.agent_count
            key = (t.config.task, k)
            if key not in best:
                best[key] = u_max(t.config.task, k).value
            endowment = None
            if cfg is not None and cfg.economy is not None and cfg.economy.endowment != "even":
                endowment = cfg.economy.endowment
            env = EconomyEnvironment(t.config.task, k, endowment)
            out.append(economy_series(t, env, best[key]))
        else:
            if t.config.task not in gold:
                raise StoppingError(
                    f"{t.simulation_id}: no gold rating for example {t.config.task!r}; "
                    "pass the run config so the rating tables can be read"
                )
            out.append(recommendation_series(t, gold[t.config.task]))
    return out


def simulation_data(
    transcripts: Sequence[Transcript],
    series: Sequence[PerformanceSeries],
    *,
    out_dir: Path,
    rules: Sequence[str],
    db_path: Optional[str] = None,
) -> List[SimulationData]:
    info = read_info_differences(out_dir) if INFO_DIFFERENCE in rules else {}
    sims = []
    for t, s in zip(transcripts, series):
        labels = cached_simulation(t, db_path=db_path) if DIALOGUE_ACT in rules else None
        sims.append(
            SimulationData(
                series=s,
                transcript=t,
                info_difference=info.get(t.simulation_id) if info else None,
                labels=labels,
            )
        )
    return sims


def evaluate_stopping(
    out_dir: Path | str,
    *,
    rules: Sequence[str] = RULES,
    k: int = 5,
    seed: int = 0,
    cfg: Optional[RunConfig] = None,
    tasks: Optional[Sequence[RatingTask]] = None,
    db_path: Optional[str] = None,
) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    transcripts = load_transcripts(out_dir)
    if len(transcripts) < k:
        raise StoppingError(
            f"{k}-fold cross-validation needs at least {k} simulations, found {len(transcripts)}"
        )

    by_mechanism: Dict[str, List[Transcript]] = {}
    for t in transcripts:
        by_mechanism.setdefault(t.config.mechanism.value, []).append(t)

    frames = []
    summary: Dict[str, Dict] = {}
    for mechanism, group in sorted(by_mechanism.items()):
        series = performance_series(group, cfg=cfg, tasks=tasks)
        sims = simulation_data(group, series, out_dir=out_dir, rules=rules, db_path=db_path)
        report = kfold_evaluate(sims, k=k, seed=seed, rules=rules)

        frame = report.outcomes_frame()
        frame.insert(1, "mechanism", mechanism)
        frames.append(frame)
        summary[mechanism] = {
            "direction": report.direction,
            "simulations": len(group),
            "rules": {s.rule: s.model_dump(exclude={"rule"}) for s in report.summary},
        }
        best = report.rule("oracle").mean_performance if "oracle" in rules else None
        print(f"[stopping] {mechanism}: {len(group)} simulations, oracle mean={best}", flush=True)

    target = out_dir / STOPPING_DIR
    target.mkdir(parents=True, exist_ok=True)
    outcomes_path = target / OUTCOMES_FILE
    summary_path = target / SUMMARY_FILE
    pd.concat(frames, ignore_index=True).to_csv(outcomes_path, index=False)
    summary_path.write_text(
        json.dumps({"k": k, "seed": seed, "mechanisms": summary}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return {"outcomes": outcomes_path, "summary": summary_path}
