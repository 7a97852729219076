"""Byte sequences, special symbols, and the four downsampling segmentation schemes.

Symbol ids 0-255 are raw UTF-8 bytes. Special symbols are appended above the
byte range so they can never collide with text:

    256 PAD, 257 BOS (^), 258 EOS ($), 259 EOW (#), 260 reserved.

A Segmentation partitions a ByteSeq into contiguous blocks; the Transformer
operates on one token per block. The four schemes:

  fixed           constant-size blocks of k bytes (short final block allowed)
  buffered_fixed  words padded with spaces so every word starts a fresh k-block
  wdd             one block per whitespace word, separator space attached to
                  the *following* word's block
  sdd             block lengths are the byte lengths of subword tokenizer pieces
"""

from __future__ import annotations

import bisect
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import ArgumentError, DecodeError, DimensionError, EncodingError

PAD = 256
BOS = 257
EOS = 258
EOW = 259
RESERVED = 260
NUM_SYMBOLS = 261  # 256 bytes + 5 specials

SPACE = 0x20

_WS_RE = re.compile(r"[ \t\r\n\f\v]+")


def normalize_ws(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class ByteSeq:
    """A sequence of byte symbols (0-255) plus reserved specials (256-260)."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        for s in self.symbols:
            if not 0 <= s <= RESERVED:
                raise ArgumentError(f"symbol id {s} outside [0, {RESERVED}]")

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)

    def text_bytes(self) -> bytes:
        """The raw bytes with all special symbols stripped."""
        return bytes(s for s in self.symbols if s < 256)


@dataclass(frozen=True)
class Segmentation:
    """Ordered block byte-lengths partitioning a ByteSeq."""

    lengths: tuple[int, ...]
    method: str  # fixed | buffered_fixed | wdd | sdd
    k: int | None = None
    lmax: int | None = None

    def __post_init__(self):
        if any(l < 1 for l in self.lengths):
            raise ArgumentError("every block length must be >= 1")

    @property
    def num_blocks(self) -> int:
        return len(self.lengths)

    def total(self) -> int:
        return sum(self.lengths)

    def boundaries(self) -> list[int]:
        """Prefix sums: boundaries()[i] is the start index of block i."""
        out = [0]
        for l in self.lengths:
            out.append(out[-1] + l)
        return out


def encode_text(text: str, add_bos_eos: bool = False) -> ByteSeq:
    """UTF-8 byte symbols of text, optionally wrapped in BOS/EOS."""
    try:
        raw = text.encode("utf-8")
    except UnicodeEncodeError as e:
        raise EncodingError(f"text is not encodable as UTF-8: {e}") from e
    syms = list(raw)
    if add_bos_eos:
        syms = [BOS] + syms + [EOS]
    return ByteSeq(tuple(syms))


def segment_fixed(seq: ByteSeq, k: int) -> Segmentation:
    """Constant blocks of k symbols; the final block keeps the remainder."""
    if k <= 0:
        raise ArgumentError(f"k must be >= 1, got {k}")
    n = len(seq)
    if n == 0:
        raise ArgumentError("cannot segment an empty sequence")
    lengths = [k] * (n // k)
    if n % k:
        lengths.append(n % k)
    return Segmentation(tuple(lengths), method="fixed", k=k)


def segment_buffered_fixed(text: str, k: int) -> tuple[ByteSeq, Segmentation]:
    """Space-pad every word so it starts at a block boundary; all blocks are k.

    Whitespace is first normalized to single spaces. Each non-final word plus
    one separator space is padded with extra space bytes up to a multiple of k;
    the final word's unit counts EOS instead of the separator, so EOS is the
    last symbol of the final block.
    """
    if k <= 0:
        raise ArgumentError(f"k must be >= 1, got {k}")
    words = normalize_ws(text).split(" ") if normalize_ws(text) else []
    syms: list[int] = []
    for i, word in enumerate(words):
        wb = word.encode("utf-8")
        last = i == len(words) - 1
        unit_len = len(wb) + 1  # separator space, or EOS for the final word
        padded = ((unit_len + k - 1) // k) * k
        if last:
            syms.extend(wb)
            syms.extend([SPACE] * (padded - unit_len))
            syms.append(EOS)
        else:
            syms.extend(wb)
            syms.extend([SPACE] * (padded - len(wb)))
    if not words:  # empty text still carries a terminator block
        syms.extend([SPACE] * (k - 1))
        syms.append(EOS)
    lengths = [k] * (len(syms) // k)
    return ByteSeq(tuple(syms)), Segmentation(tuple(lengths), method="buffered_fixed", k=k)


def segment_wdd(seq: ByteSeq) -> Segmentation:
    """One block per whitespace-delimited word.

    Space bytes attach to the start of the following word's block, so a
    sentence-initial word's block length equals its byte length. BOS/EOS each
    form their own block; trailing spaces with no following word form a
    standalone block.
    """
    lengths: list[int] = []
    run = 0  # length of the block currently being built
    in_word = False
    for s in seq.symbols:
        if s == PAD:
            raise ArgumentError("segment_wdd does not accept PAD symbols")
        if s >= 256:  # BOS/EOS/EOW get their own block
            if run:
                lengths.append(run)
                run = 0
            lengths.append(1)
            in_word = False
        elif s == SPACE:
            if in_word:  # word ended; open the next block with this space
                lengths.append(run)
                run = 1
                in_word = False
            else:
                run += 1
        else:
            run += 1
            in_word = True
    if run:
        lengths.append(run)
    return Segmentation(tuple(lengths), method="wdd")


def segment_sdd(seq: ByteSeq, vocab) -> Segmentation:
    """Block lengths are the byte lengths of the subword tokenizer's pieces.

    BOS/EOS each form their own block. `vocab` is a subword.SubwordVocab.
    """
    syms = seq.symbols
    leading = 1 if syms and syms[0] == BOS else 0
    trailing = 1 if syms and syms[-1] == EOS else 0
    if any(s >= 256 for s in syms[leading : len(syms) - trailing]):
        raise ArgumentError("segment_sdd accepts specials only as leading BOS / trailing EOS")
    raw = bytes(syms[leading : len(syms) - trailing])
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DecodeError(f"sequence bytes are not valid UTF-8: {e}") from e
    pieces = vocab.tokenize(text)
    lengths = [1] * leading + [len(p) for p in pieces] + [1] * trailing
    return Segmentation(tuple(lengths), method="sdd", lmax=vocab.lmax)


def detokenize(seq: ByteSeq, segmentation: Segmentation, lossy: bool = False) -> str:
    """Invert segmentation construction back to text.

    Strips all special symbols; for buffered_fixed additionally collapses the
    padding-space runs back to single separators.
    """
    if segmentation.total() != len(seq):
        raise DimensionError(
            f"segmentation covers {segmentation.total()} symbols, sequence has {len(seq)}"
        )
    raw = seq.text_bytes()
    if segmentation.method == "buffered_fixed":
        # Pad spaces only ever follow the single separator space, so any space
        # run marks exactly one word boundary.
        raw = re.sub(rb" +", b" ", raw).strip(b" ")
    try:
        return raw.decode("utf-8", errors="replace" if lossy else "strict")
    except UnicodeDecodeError as e:
        raise DecodeError(
            f"detokenized bytes are not valid UTF-8 at offset {e.start}; pass lossy=True to replace"
        ) from e


@dataclass
class ConsistencyReport:
    """Corpus-level diagnostics of how stable each word type's blocking is."""

    method: str
    variant_counts: dict[str, int] = field(default_factory=dict)  # word -> distinct variants
    histogram: dict[int, int] = field(default_factory=dict)  # block length -> count
    mean_block_len: float = 0.0
    max_block_len: int = 0
    num_blocks: int = 0

    def validate(self):
        if sum(self.histogram.values()) != self.num_blocks:
            raise ArgumentError("histogram counts must sum to total block count")


def _word_spans(text: str) -> list[tuple[str, int, int]]:
    """(word, start_byte, end_byte) spans of whitespace words in text."""
    spans = []
    pos = 0
    for word in text.split(" "):
        if word:
            start = pos
            end = pos + len(word.encode("utf-8"))
            spans.append((word, start, end))
            pos = end + 1
        else:
            pos += 1
    return spans


def _buffered_word_spans(text: str, k: int) -> list[tuple[str, int, int]]:
    # every word unit (word + separator-or-EOS) is padded to a multiple of k
    spans = []
    pos = 0
    for word in text.split(" "):
        wb = len(word.encode("utf-8"))
        spans.append((word, pos, pos + wb))
        pos += ((wb + 1 + k - 1) // k) * k
    return spans


def consistency_report(
    corpus: Iterable[str], method: str, k: int = 4, vocab=None
) -> ConsistencyReport:
    """Count distinct (block-offset, split-pattern) variants per word type.

    Words are the whitespace tokens of the normalized sentence. The offset is
    the word's first byte position within its containing block; the split
    pattern is how the word's bytes are divided among the blocks it crosses.
    """
    variants: dict[str, set] = {}
    occurrences: Counter = Counter()
    hist: Counter = Counter()
    total_len = 0
    n_blocks = 0
    n_sentences = 0

    for line in corpus:
        text = normalize_ws(line)
        if not text:
            continue
        n_sentences += 1
        if method == "fixed":
            seq = encode_text(text, add_bos_eos=True)
            seg = segment_fixed(seq, k)
            offset0 = 1  # BOS occupies index 0
            spans = [(w, s + offset0, e + offset0) for w, s, e in _word_spans(text)]
        elif method == "buffered_fixed":
            seq, seg = segment_buffered_fixed(text, k)
            spans = _buffered_word_spans(text, k)
        elif method == "wdd":
            seq = encode_text(text, add_bos_eos=True)
            seg = segment_wdd(seq)
            spans = [(w, s + 1, e + 1) for w, s, e in _word_spans(text)]
        elif method == "sdd":
            if vocab is None:
                raise ArgumentError("sdd consistency report requires a vocab")
            seq = encode_text(text, add_bos_eos=True)
            seg = segment_sdd(seq, vocab)
            spans = [(w, s + 1, e + 1) for w, s, e in _word_spans(text)]
        else:
            raise ArgumentError(f"unknown method {method!r}")

        bounds = seg.boundaries()
        for l in seg.lengths:
            hist[l] += 1
            total_len += l
        n_blocks += seg.num_blocks

        for word, s, e in spans:
            blk = bisect.bisect_right(bounds, s) - 1
            offset = s - bounds[blk]
            pattern = []
            p = s
            b = blk
            while p < e:
                take = min(e, bounds[b + 1]) - p
                pattern.append(take)
                p += take
                b += 1
            occurrences[word] += 1
            variants.setdefault(word, set()).add((offset, tuple(pattern)))

    if n_sentences == 0:
        raise ArgumentError("consistency report requires a non-empty corpus")

    report = ConsistencyReport(
        method=method,
        variant_counts={w: len(v) for w, v in variants.items() if occurrences[w] >= 2},
        histogram=dict(hist),
        mean_block_len=total_len / n_blocks,
        max_block_len=max(hist) if hist else 0,
        num_blocks=n_blocks,
    )
    report.validate()
    return report
