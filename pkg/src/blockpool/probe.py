"""Embedding probe: word-pair test sets from a lexicon, split by training
exposure, scored as cosine-similarity z-scores of pre-Transformer
representations.

The z baseline is explicit and seeded: n uniformly random pairs of eligible
words define mu and sigma, and every reported z is (cos - mu) / sigma. This
population choice calibrates all reported numbers, so it is fixed here rather
than left to callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ArgumentError, DataError, ParseError
from .rng import Rng
from .segmenter import normalize_ws
from .variants import Model, _subword_special_ids

KINDS = ("grammatical", "close_spell", "far_spell", "far_synonym")
SPLITS = ("seen", "half_seen", "unseen")
DEFAULT_CAP = 2000


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over characters, O(min(len)) space."""
    if len(a) > len(b):
        a, b = b, a
    prev = list(range(len(a) + 1))
    for i, cb in enumerate(b, start=1):
        cur = [i]
        for j, ca in enumerate(a, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[len(a)]


@dataclass
class Lexicon:
    """word -> (lemma, synonym set); synonyms are symmetric after closure."""

    entries: dict[str, tuple[str, set[str]]]

    @staticmethod
    def load(path) -> "Lexicon":
        entries: dict[str, tuple[str, set[str]]] = {}
        with open(path, encoding="utf-8") as f:
            for i, line in enumerate(f.read().splitlines(), start=1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError("expected word<TAB>lemma<TAB>synonyms", line=i)
                word, lemma, syns = parts
                if word in entries:
                    raise ParseError(f"duplicate word {word!r}", line=i)
                synset = {s for s in syns.split(",") if s and s != word}
                entries[word] = (lemma, synset)
        # symmetric closure
        for word, (_, syns) in list(entries.items()):
            for s in syns:
                if s in entries:
                    entries[s][1].add(word)
        return Lexicon(entries)

    def words(self) -> list[str]:
        return sorted(self.entries)

    def lemma(self, word: str) -> str:
        return self.entries[word][0]

    def synonyms(self, word: str) -> set[str]:
        return self.entries[word][1]


@dataclass(frozen=True)
class PairSet:
    kind: str
    split: str
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class ProbeBaseline:
    mu: float
    sigma: float
    n: int
    seed: int


def eligible_words(lexicon: Lexicon, vocab) -> list[str]:
    """Lexicon words that are a single subword token (marked form) and have a
    synonym. Without a vocabulary, only the synonym filter applies."""
    out = []
    for w in lexicon.words():
        if not lexicon.synonyms(w):
            continue
        if vocab is not None and len(vocab.tokenize(" " + w)) != 1:
            continue
        out.append(w)
    return out


def _exposure(pair: tuple[str, str], train_words: set[str]) -> str:
    k = (pair[0] in train_words) + (pair[1] in train_words)
    return ("unseen", "half_seen", "seen")[k]


def build_pair_sets(
    lexicon: Lexicon,
    eligible: list[str],
    train_words: set[str],
    rng: Rng,
    cap: int = DEFAULT_CAP,
) -> list[PairSet]:
    """Four kinds x three exposure splits, capped by seeded sampling.

    Far kinds keep only pairs attaining the maximum Levenshtein distance
    available in their candidate pool; ties are what get sampled.
    """
    if not eligible:
        raise DataError("no eligible words: need single-token lexicon entries with synonyms")
    words = sorted(eligible)
    dist: dict[tuple[str, str], int] = {}
    for i, a in enumerate(words):
        for b in words[i + 1 :]:
            dist[(a, b)] = levenshtein(a, b)

    grammatical = [p for p in dist if lexicon.lemma(p[0]) == lexicon.lemma(p[1])]
    close_spell = [p for p, d in dist.items() if d == 1]
    max_d = max(dist.values())
    far_spell = [p for p, d in dist.items() if d == max_d]
    syn_pairs = [p for p in dist if p[1] in lexicon.synonyms(p[0])]
    far_synonym = []
    if syn_pairs:
        max_syn = max(dist[p] for p in syn_pairs)
        far_synonym = [p for p in syn_pairs if dist[p] == max_syn]

    sets: list[PairSet] = []
    by_kind = {
        "grammatical": grammatical,
        "close_spell": close_spell,
        "far_spell": far_spell,
        "far_synonym": far_synonym,
    }
    for kind in KINDS:
        pool = by_kind[kind]
        for split in SPLITS:
            chosen = [p for p in pool if _exposure(p, train_words) == split]
            if len(chosen) > cap:
                chosen = rng.sample(chosen, cap)
            sets.append(PairSet(kind=kind, split=split, pairs=tuple(chosen)))
    return sets


def make_embedder(model: Model):
    """Cached word_embedding lookups against a frozen model."""
    cache: dict[str, np.ndarray] = {}

    def get(word: str) -> np.ndarray:
        if word not in cache:
            cache[word] = word_embedding(model, word)
        return cache[word]

    return get


def word_embedding(model: Model, word: str) -> np.ndarray:
    """Pre-Transformer representation of a word in isolation.

    Subword variants use the embedding-table row of the word's single marked
    token; byte-level variants run the encoder-side downsampler over the
    word-marker form and mean-pool its blocks.
    """
    if model.spec.name in ("subword", "two_step_subword"):
        ids = model.spec.vocab.tokenize_ids(" " + word)
        if len(ids) != 1:
            raise ArgumentError(f"{word!r} is not a single subword token; exclude it upstream")
        return model.params["src_embed"].data[ids[0]].copy()
    with T.no_grad():
        blocks = model.source_block_embeddings(" " + word, add_specials=False)
    return blocks.data.mean(axis=0)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def compute_baseline(model: Model, eligible: list[str], n: int = 10000, seed: int = 0) -> ProbeBaseline:
    """mu/sigma of cosine similarity over n random eligible-word pairs."""
    if len(eligible) < 2:
        raise DataError("baseline needs at least two eligible words")
    rng = Rng(seed)
    emb = make_embedder(model)
    words = sorted(eligible)
    sims = np.empty(n)
    for i in range(n):
        a = words[rng.randint(len(words))]
        b = words[rng.randint(len(words))]
        while b == a:
            b = words[rng.randint(len(words))]
        sims[i] = cosine(emb(a), emb(b))
    sigma = float(sims.std())
    if sigma == 0.0:
        raise DataError("degenerate baseline: zero variance in cosine similarities")
    return ProbeBaseline(mu=float(sims.mean()), sigma=sigma, n=n, seed=seed)


def z_scores(model: Model, pair_sets: list[PairSet], baseline: ProbeBaseline):
    """(kind, split) -> (mean z, 95% CI half-width, pair count)."""
    emb = make_embedder(model)
    out: dict[tuple[str, str], tuple[float, float, int]] = {}
    for ps in pair_sets:
        if not ps.pairs:
            out[(ps.kind, ps.split)] = (float("nan"), float("nan"), 0)
            continue
        zs = np.array([(cosine(emb(a), emb(b)) - baseline.mu) / baseline.sigma for a, b in ps.pairs])
        n = len(zs)
        ci = 1.96 * zs.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        out[(ps.kind, ps.split)] = (float(zs.mean()), float(ci), n)
    return out


def corpus_word_set(lines) -> set[str]:
    words: set[str] = set()
    for line in lines:
        words.update(normalize_ws(line).split(" "))
    words.discard("")
    return words
