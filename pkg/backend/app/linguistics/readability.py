# backend/app/linguistics/readability.py

from __future__ import annotations

import re

_VOWEL_GROUP = re.compile(r"[aeiouy]+")
_SENTENCE_END = re.compile(r"[.!?]+")
_LETTERS = re.compile(r"[^a-z]")


class LinguisticsError(Exception):
    """Feature requested on input it is not defined for."""

    pass


def words(text: str) -> list[str]:
    return text.split()


def word_count(text: str) -> int:
    """Whitespace-delimited tokens after trimming."""
    return len(words(text))


def count_syllables(word: str) -> int:
    """
    Vowel-group heuristic: one syllable per run of vowels (y counts), minus a
    silent trailing 'e' unless the word ends in 'le'; never below 1.
    """
    w = _LETTERS.sub("", word.lower())
    if not w:
        return 1
    count = len(_VOWEL_GROUP.findall(w))
    if w.endswith("e") and not w.endswith("le") and count > 1:
        count -= 1
    return max(1, count)


def sentence_count(text: str) -> int:
    """Runs of ., ! or ? ; at least one sentence."""
    return max(1, len(_SENTENCE_END.findall(text)))


def fk_grade(text: str) -> float:
    """Flesch-Kincaid grade: 0.39 * words/sentences + 11.8 * syllables/words - 15.59."""
    tokens = words(text)
    if not tokens:
        raise LinguisticsError("Flesch-Kincaid grade needs at least one word")
    n_words = len(tokens)
    n_syllables = sum(count_syllables(t) for t in tokens)
    return 0.39 * (n_words / sentence_count(text)) + 11.8 * (n_syllables / n_words) - 15.59
