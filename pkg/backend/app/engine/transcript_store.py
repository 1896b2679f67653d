# backend/app/engine/transcript_store.py

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Iterator, List

from app.engine.types import Transcript

logger = logging.getLogger(__name__)

TRANSCRIPT_DIR = "transcripts"
_NAME_RE = re.compile(r"^sim-(-?\d+)\.jsonl$")


def transcript_path(out_dir: Path | str, seed: int) -> Path:
    return Path(out_dir) / TRANSCRIPT_DIR / f"sim-{seed}.jsonl"


def write_transcript(out_dir: Path | str, transcript: Transcript) -> Path:
    """
    One simulation per file, one JSON record per line. Written to a temp file
    first so an interrupted batch never leaves a half record behind.
    """
    path = transcript_path(out_dir, transcript.seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".jsonl.tmp")
    tmp.write_text(transcript.model_dump_json() + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def read_transcript(path: Path | str) -> Transcript:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ValueError(f"Empty transcript file: {path}")
    return Transcript.model_validate_json(text.splitlines()[0])


def _seed_of(path: Path) -> int:
    m = _NAME_RE.match(path.name)
    return int(m.group(1)) if m else 0


def iter_transcript_files(out_dir: Path | str) -> Iterator[Path]:
    base = Path(out_dir)
    folder = base / TRANSCRIPT_DIR if (base / TRANSCRIPT_DIR).is_dir() else base
    files = [p for p in folder.glob("sim-*.jsonl") if _NAME_RE.match(p.name)]
    yield from sorted(files, key=_seed_of)


def load_transcripts(out_dir: Path | str) -> List[Transcript]:
    """All transcripts under `out_dir` (or its transcripts/ folder), ordered by seed."""
    transcripts = [read_transcript(p) for p in iter_transcript_files(out_dir)]
    logger.info("loaded %s transcripts from %s", len(transcripts), out_dir)
    return transcripts
