"""Byte-level BPE subword vocabulary with a maximum piece byte-length.

The tokenizer exists to supply piece lengths for subword-delimited
downsampling, so the trainer is deliberately small: greedy byte-pair merging
with word-initial spaces folded into the following word's chunk (the same
attachment convention segment_wdd uses). Merges whose merged piece would
exceed `lmax` bytes are never considered, which keeps every emitted piece
within the generation cap.
"""

from __future__ import annotations

import heapq
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ArgumentError, ParseError

_CHUNK_MARKED = re.compile(rb" *[^ ]+| +")
_CHUNK_PLAIN = re.compile(rb"[^ ]+| +")

VOCAB_MAGIC = "blockpool-vocab v1"


def _chunks(raw: bytes, word_marker: bool) -> list[bytes]:
    """Split raw bytes into merge-isolated chunks; concatenation is exact."""
    pat = _CHUNK_MARKED if word_marker else _CHUNK_PLAIN
    return pat.findall(raw)


@dataclass
class SubwordVocab:
    """Trained BPE pieces. pieces[0:256] are the single bytes, then merges in rank order."""

    pieces: list[bytes]
    merges: list[tuple[int, int]]  # rank r merges piece ids -> piece id 256+r
    lmax: int
    word_marker: bool = True
    _merge_rank: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(set(self.pieces)) != len(self.pieces):
            raise ArgumentError("piece list contains duplicates")
        if self.pieces[:256] != [bytes([i]) for i in range(256)]:
            raise ArgumentError("pieces 0-255 must be the single bytes in order")
        for p in self.pieces[256:]:
            if len(p) > self.lmax:
                raise ArgumentError(f"piece {p!r} exceeds lmax={self.lmax} bytes")
        self._merge_rank = {pair: r for r, pair in enumerate(self.merges)}
        self._cache = {}

    @property
    def size(self) -> int:
        return len(self.pieces)

    def piece_id(self, piece: bytes) -> int:
        try:
            return self.pieces.index(piece)
        except ValueError:
            raise ArgumentError(f"{piece!r} is not a vocabulary piece") from None

    def _encode_chunk(self, chunk: bytes) -> tuple[int, ...]:
        hit = self._cache.get(chunk)
        if hit is not None:
            return hit
        ids = list(chunk)
        while len(ids) >= 2:
            best_rank = None
            for a, b in zip(ids, ids[1:]):
                r = self._merge_rank.get((a, b))
                if r is not None and (best_rank is None or r < best_rank):
                    best_rank = r
            if best_rank is None:
                break
            a, b = self.merges[best_rank]
            new_id = 256 + best_rank
            out = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and ids[i] == a and ids[i + 1] == b:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        result = tuple(ids)
        if len(self._cache) < 1_000_000:
            self._cache[chunk] = result
        return result

    def tokenize_ids(self, text: str) -> list[int]:
        """Piece ids whose pieces concatenate to exactly the UTF-8 bytes of text."""
        raw = text.encode("utf-8")
        out: list[int] = []
        for chunk in _chunks(raw, self.word_marker):
            out.extend(self._encode_chunk(chunk))
        return out

    def tokenize(self, text: str) -> list[bytes]:
        """Pieces (byte strings) in order; total and lossless by construction."""
        return [self.pieces[i] for i in self.tokenize_ids(text)]


@dataclass(frozen=True)
class CorpusStats:
    total_bytes: int
    total_tokens: int

    def __post_init__(self):
        if self.total_bytes <= 0 or self.total_tokens <= 0:
            raise ArgumentError("corpus totals must be positive")

    @property
    def avg_factor(self) -> float:
        return self.total_bytes / self.total_tokens


def train_bpe(corpus: Iterable[str], size: int, lmax: int, word_marker: bool = True) -> SubwordVocab:
    """Greedy BPE over bytes; merges yielding pieces longer than lmax are skipped.

    Stops at `size` pieces or when no legal merge remains. Deterministic: ties
    on pair count break on the merged byte string, then on the left length.
    """
    if size < 256:
        raise ArgumentError(f"size must be >= 256, got {size}")
    if lmax < 1:
        raise ArgumentError(f"lmax must be >= 1, got {lmax}")

    chunk_freq: Counter = Counter()
    n_lines = 0
    for line in corpus:
        text = line.rstrip("\n")
        if not text:
            continue
        n_lines += 1
        for c in _chunks(text.encode("utf-8"), word_marker):
            chunk_freq[c] += 1
    if n_lines == 0:
        raise ArgumentError("cannot train on an empty corpus")

    pieces: list[bytes] = [bytes([i]) for i in range(256)]
    merges: list[tuple[int, int]] = []
    if size < 257:
        warnings.warn(f"size={size} leaves no room for merges; returning byte-only vocab")
        return SubwordVocab(pieces, merges, lmax, word_marker)

    # chunk state: id -> (symbol list, freq); pair -> chunk ids containing it
    words = {i: (list(c), f) for i, (c, f) in enumerate(sorted(chunk_freq.items()))}
    pair_counts: Counter = Counter()
    pair_where: dict[tuple[int, int], set[int]] = {}
    for wid, (syms, f) in words.items():
        for pair in zip(syms, syms[1:]):
            pair_counts[pair] += f
            pair_where.setdefault(pair, set()).add(wid)

    def legal(pair) -> bool:
        return len(pieces[pair[0]]) + len(pieces[pair[1]]) <= lmax

    # lazy max-heap over legal pairs; stale entries dropped on pop
    heap = [
        (-c, pieces[a] + pieces[b], len(pieces[a]), (a, b))
        for (a, b), c in pair_counts.items()
        if legal((a, b))
    ]
    heapq.heapify(heap)

    def bump(pair, delta, wid):
        pair_counts[pair] += delta
        if delta > 0:
            pair_where.setdefault(pair, set()).add(wid)
        if pair_counts[pair] <= 0:
            del pair_counts[pair]
            pair_where.get(pair, set()).discard(wid)
        elif legal(pair):
            # lazy heap: push on every count change, stale entries drop on pop
            a, b = pair
            heapq.heappush(heap, (-pair_counts[pair], pieces[a] + pieces[b], len(pieces[a]), pair))

    while len(pieces) < size:
        best = None
        while heap:
            negc, _, _, pair = heapq.heappop(heap)
            if pair in pair_counts and -negc == pair_counts[pair]:
                best = pair
                break
        if best is None:
            break
        a, b = best
        new_id = len(pieces)
        pieces.append(pieces[a] + pieces[b])
        merges.append((a, b))

        for wid in sorted(pair_where.get(best, ())):
            syms, f = words[wid]
            i = 0
            while i < len(syms) - 1:
                if syms[i] == a and syms[i + 1] == b:
                    if i > 0:
                        bump((syms[i - 1], a), -f, wid)
                        bump((syms[i - 1], new_id), +f, wid)
                    if i + 2 < len(syms):
                        bump((b, syms[i + 2]), -f, wid)
                        # the right neighbour pair may itself be (a, b) again;
                        # count against the post-merge symbol
                        nxt = syms[i + 2]
                        bump((new_id, nxt), +f, wid)
                    syms[i : i + 2] = [new_id]
                else:
                    i += 1
        pair_counts.pop(best, None)
        pair_where.pop(best, None)

    return SubwordVocab(pieces, merges, lmax, word_marker)


def avg_downsampling_factor(vocab: SubwordVocab, corpus: Iterable[str]) -> CorpusStats:
    """Average bytes per produced token over the corpus."""
    total_bytes = 0
    total_tokens = 0
    for line in corpus:
        text = line.rstrip("\n")
        if not text:
            continue
        total_bytes += len(text.encode("utf-8"))
        total_tokens += len(vocab.tokenize_ids(text))
    if total_bytes == 0:
        raise ArgumentError("cannot compute stats on an empty corpus")
    return CorpusStats(total_bytes, total_tokens)


def tune_vocab(
    corpus: Iterable[str],
    target_factor: float,
    size_grid: Sequence[int],
    lmax_grid: Sequence[int],
    threads: int = 0,
) -> tuple[SubwordVocab, CorpusStats]:
    """Grid sweep: train per (size, lmax), return the point whose average
    downsampling factor is closest to target. Ties break toward smaller size,
    then smaller lmax."""
    if not size_grid or not lmax_grid:
        raise ArgumentError("size and lmax grids must be non-empty")
    if target_factor < 1:
        raise ArgumentError("target factor must be >= 1")
    lines = [l for l in corpus]
    points = [(s, l) for s in sorted(size_grid) for l in sorted(lmax_grid)]

    def evaluate(point):
        s, l = point
        v = train_bpe(lines, s, l)
        return v, avg_downsampling_factor(v, lines)

    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(evaluate, points))
    else:
        results = [evaluate(p) for p in points]

    best = None
    for (s, l), (v, stats) in zip(points, results):
        key = (abs(stats.avg_factor - target_factor), s, l)
        if best is None or key < best[0]:
            best = (key, v, stats)
    return best[1], best[2]


def _escape(piece: bytes) -> str:
    out = []
    for byte in piece:
        if 33 <= byte <= 126 and byte != 0x5C:  # printable, not backslash
            out.append(chr(byte))
        else:
            out.append(f"\\x{byte:02x}")
    return "".join(out)


def _unescape(s: str, line_no: int) -> bytes:
    out = bytearray()
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == "\\":
            if s[i : i + 2] != "\\x" or len(s) < i + 4:
                raise ParseError(f"bad escape in piece {s!r}", line=line_no)
            try:
                out.append(int(s[i + 2 : i + 4], 16))
            except ValueError:
                raise ParseError(f"bad hex escape in piece {s!r}", line=line_no) from None
            i += 4
        else:
            out.append(ord(ch))
            i += 1
    return bytes(out)


def save_vocab(vocab: SubwordVocab, path) -> None:
    """Versioned text format: header, then one `id<TAB>piece[<TAB>left_len]` per line."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(VOCAB_MAGIC + "\n")
        f.write(f"size={vocab.size}\tlmax={vocab.lmax}\tword_marker={int(vocab.word_marker)}\n")
        for i, p in enumerate(vocab.pieces):
            if i < 256:
                f.write(f"{i}\t{_escape(p)}\n")
            else:
                a, _ = vocab.merges[i - 256]
                f.write(f"{i}\t{_escape(p)}\t{len(vocab.pieces[a])}\n")


def load_vocab(path) -> SubwordVocab:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != VOCAB_MAGIC:
        raise ParseError(f"not a vocab file (expected header {VOCAB_MAGIC!r})", line=1)
    header = dict(kv.split("=", 1) for kv in lines[1].split("\t"))
    try:
        size = int(header["size"])
        lmax = int(header["lmax"])
        word_marker = bool(int(header["word_marker"]))
    except (KeyError, ValueError) as e:
        raise ParseError(f"bad header fields: {e}", line=2) from None

    pieces: list[bytes] = []
    merges: list[tuple[int, int]] = []
    seen: dict[bytes, int] = {}
    for line_no, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ParseError("expected id<TAB>piece[<TAB>left_len]", line=line_no)
        try:
            pid = int(parts[0])
        except ValueError:
            raise ParseError(f"bad piece id {parts[0]!r}", line=line_no) from None
        piece = _unescape(parts[1], line_no)
        if pid != len(pieces):
            raise ParseError(f"piece ids must be contiguous; expected {len(pieces)}, got {pid}", line=line_no)
        if piece in seen:
            raise ParseError(f"duplicate piece {parts[1]!r} (first at line {seen[piece]})", line=line_no)
        seen[piece] = line_no
        if pid >= 256:
            if len(parts) != 3:
                raise ParseError("merged piece missing left_len field", line=line_no)
            left_len = int(parts[2])
            if not 0 < left_len < len(piece):
                raise ParseError(f"left_len {left_len} out of range for piece", line=line_no)
            left, right = piece[:left_len], piece[left_len:]
            try:
                a = pieces.index(left)
                b = pieces.index(right)
            except ValueError:
                raise ParseError(f"merge parents of {parts[1]!r} not found", line=line_no) from None
            merges.append((a, b))
        pieces.append(piece)
    if len(pieces) != size:
        raise ParseError(f"header size={size} but {len(pieces)} pieces listed")
    return SubwordVocab(pieces, merges, lmax, word_marker)
