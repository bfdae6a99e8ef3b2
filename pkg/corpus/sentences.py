"""Rule-based sentence splitter."""

import re
from typing import List

# Lower-cased tokens (without the trailing period) that never end a sentence
ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "gen", "col", "lt", "sgt", "capt",
    "rev", "hon", "gov", "pres", "vs", "etc", "approx", "no", "vol", "fig", "ca", "cf", "al",
    "inc", "ltd", "co", "corp", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec", "e.g", "i.e", "u.s", "u.k",
})

_BOUNDARY = re.compile(r"([.!?][\"')\]]*)\s+(?=[\"'(\[]*[A-Z])")


def split_sentences(text: str) -> List[str]:
    """Split on terminal punctuation followed by whitespace and an uppercase letter.

    A period ending a known abbreviation or a single initial ("J. Smith") is not a boundary.
    """
    text = " ".join(text.split())
    if not text:
        return []
    sentences = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        end = match.end(1)
        candidate = text[start:end]
        if match.group(1).startswith("."):
            last_word = candidate.rstrip(".\"')]").rsplit(" ", 1)[-1].lower()
            if last_word in ABBREVIATIONS or (len(last_word) == 1 and last_word.isalpha()):
                continue
        sentences.append(candidate.strip())
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
