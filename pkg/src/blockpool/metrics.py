"""Corpus BLEU, classification accuracy, and the consistency-ablation deltas.

BLEU tokenization is fixed and versioned: sentences are split into word
characters runs and single punctuation marks by the regex `\\w+|[^\\w\\s]`
(no lowercasing). Precisions are clipped n-gram matches for n = 1..4;
when a corpus has zero matches for some n >= 2 the precision is smoothed
add-one to (m+1)/(t+1), so imperfect corpora score above zero while
identical corpora still score exactly 100.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .errors import DataError

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

MAX_N = 4


def bleu_tokenize(sentence: str) -> list[str]:
    return _TOKEN_RE.findall(sentence)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def bleu(hypotheses: list[str], references: list[str]) -> BleuScore:
    """Corpus-level BLEU-4 with add-one smoothing on empty counts (n >= 2)."""
    if len(hypotheses) != len(references):
        raise DataError(
            f"hypothesis/reference counts differ: {len(hypotheses)} vs {len(references)}"
        )
    if not hypotheses:
        raise DataError("empty corpus")

    matches = [0] * MAX_N
    totals = [0] * MAX_N
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h = bleu_tokenize(hyp)
        r = bleu_tokenize(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, MAX_N + 1):
            hc = _ngrams(h, n)
            rc = _ngrams(r, n)
            totals[n - 1] += max(0, len(h) - n + 1)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())

    precisions = []
    for n in range(1, MAX_N + 1):
        m, t = matches[n - 1], totals[n - 1]
        if n >= 2 and m == 0:
            precisions.append((m + 1) / (t + 1))  # t == 0 degenerates to 1; see module doc
        elif t == 0:
            precisions.append(0.0)
        else:
            precisions.append(m / t)

    if hyp_len == 0 or any(p == 0.0 for p in precisions):
        geo = 0.0
    else:
        geo = math.exp(sum(math.log(p) for p in precisions) / MAX_N)
    bp = 1.0 if hyp_len >= ref_len else (math.exp(1.0 - ref_len / hyp_len) if hyp_len else 0.0)
    return BleuScore(
        score=bp * geo * 100.0,
        precisions=tuple(precisions),
        brevity_penalty=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def accuracy(predictions: list, labels: list) -> float:
    """Exact-match fraction."""
    if len(predictions) != len(labels):
        raise DataError(f"prediction/label counts differ: {len(predictions)} vs {len(labels)}")
    if not predictions:
        raise DataError("empty prediction list")
    return sum(p == l for p, l in zip(predictions, labels)) / len(predictions)


def ablation_report(results: dict[str, float]) -> dict[str, float]:
    """Consistency deltas from per-variant scores.

    position = buffered_fixed - fixed; length = sdd - wdd;
    morpheme = sdd - buffered_fixed.
    """
    for needed in ("fixed", "buffered_fixed", "wdd", "sdd"):
        if needed not in results:
            raise DataError(f"ablation report needs a score for variant {needed!r}")
    return {
        "position": results["buffered_fixed"] - results["fixed"],
        "length": results["sdd"] - results["wdd"],
        "morpheme": results["sdd"] - results["buffered_fixed"],
    }
