"""WordPiece-style subword vocabulary building and fixed-length encoding.

The vocabulary is trained from scratch on the training-split texts. Training
is the classic pair-merge procedure: start from single characters (word
internal characters carry the ``##`` continuation prefix), then repeatedly
merge the adjacent symbol pair with the best likelihood-ratio score

    score(a, b) = freq(a b) / (freq(a) * freq(b))

until the size budget is reached or the best pair is too rare. Ties are
broken by lexicographic pair order so builds are fully deterministic, and
word frequencies are aggregated up front so the result is invariant to the
order of the input texts.

Encoding is greedy longest-match from the left within each pre-token. Case
is preserved; text is NFC-normalized before pre-tokenization. Pre-tokens
split on whitespace, and any character that is neither alphanumeric nor
whitespace becomes its own pre-token.

Every character seen during building is seeded into the vocabulary in both
its word-initial and its continuation form, which guarantees the greedy
matcher can always fall back to single characters before emitting ``[UNK]``.
"""

from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataValidationError, InputPathError

PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
CONTINUATION_PREFIX = "##"


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token inventory with the four specials at fixed ids 0..3."""

    tokens: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if tuple(self.tokens[:4]) != SPECIAL_TOKENS:
            raise DataValidationError(
                f"vocabulary must start with {SPECIAL_TOKENS}, got {self.tokens[:4]}"
            )
        mapping: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise DataValidationError(f"empty token at id {i}")
            if tok in mapping:
                raise DataValidationError(f"duplicate token {tok!r} at ids {mapping[tok]} and {i}")
            mapping[tok] = i
        object.__setattr__(self, "token_to_id", mapping)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def serialized(self) -> bytes:
        """The canonical file form: one token per line, line number = id."""
        return "".join(tok + "\n" for tok in self.tokens).encode("utf-8")

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialized()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.serialized())

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        p = Path(path)
        if not p.is_file():
            raise InputPathError(f"cannot read vocabulary file: {p}")
        text = p.read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


@dataclass(frozen=True)
class Encoding:
    """Fixed-length id sequence with its attention mask.

    ``ids[0]`` is ``[CLS]``, the last real position is ``[SEP]``, and
    ``mask[i] == 1`` exactly where ``ids[i]`` is a real token.
    """

    ids: tuple[int, ...]
    mask: tuple[int, ...]
    n_real: int


def pre_tokenize(text: str) -> list[str]:
    """NFC-normalize and split into words; punctuation is its own word."""
    text = unicodedata.normalize("NFC", text)
    words: list[str] = []
    buf: list[str] = []
    for ch in text:
        if ch.isspace():
            if buf:
                words.append("".join(buf))
                buf = []
        elif not ch.isalnum():
            if buf:
                words.append("".join(buf))
                buf = []
            words.append(ch)
        else:
            buf.append(ch)
    if buf:
        words.append("".join(buf))
    return words


def _word_symbols(word: str) -> tuple[str, ...]:
    return (word[0],) + tuple(CONTINUATION_PREFIX + c for c in word[1:])


def _merge_sequence(seq: tuple[str, ...], pair: tuple[str, str], merged: str) -> tuple[str, ...]:
    # Left-to-right, non-overlapping replacement.
    out: list[str] = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return tuple(out)


def build_vocab(texts: Iterable[str], max_size: int, min_pair_freq: int = 2) -> Vocabulary:
    """Train a WordPiece vocabulary of at most ``max_size`` tokens.

    The seed inventory is every character seen in the corpus, in both plain
    and ``##``-prefixed form, after the four specials. Merges then extend
    the inventory while the budget allows and the best pair occurs at least
    ``min_pair_freq`` times.
    """
    word_freq: Counter[str] = Counter()
    for text in texts:
        word_freq.update(pre_tokenize(text))
    if not word_freq:
        raise DataValidationError("cannot build vocabulary from an empty corpus")

    chars = sorted({c for w in word_freq for c in w})
    seed = sorted(set(chars) | {CONTINUATION_PREFIX + c for c in chars})
    if len(SPECIAL_TOKENS) + len(seed) > max_size:
        raise DataValidationError(
            f"max_size {max_size} too small: {len(seed)} character tokens plus "
            f"{len(SPECIAL_TOKENS)} specials already exceed it"
        )

    tokens: list[str] = list(SPECIAL_TOKENS) + seed
    present = set(tokens)
    seqs: dict[str, tuple[str, ...]] = {w: _word_symbols(w) for w in word_freq}

    while len(tokens) < max_size:
        sym_freq: Counter[str] = Counter()
        pair_freq: Counter[tuple[str, str]] = Counter()
        for word, f in word_freq.items():
            seq = seqs[word]
            for s in seq:
                sym_freq[s] += f
            for a, b in zip(seq, seq[1:]):
                pair_freq[(a, b)] += f
        if not pair_freq:
            break

        def rank(pair: tuple[str, str]) -> tuple[float, str, str]:
            a, b = pair
            score = pair_freq[pair] / (sym_freq[a] * sym_freq[b])
            return (-score, a, b)

        best = min(pair_freq, key=rank)
        if pair_freq[best] < min_pair_freq:
            break
        merged = best[0] + best[1][len(CONTINUATION_PREFIX):]
        if merged not in present:
            tokens.append(merged)
            present.add(merged)
        seqs = {w: _merge_sequence(seq, best, merged) for w, seq in seqs.items()}

    return Vocabulary(tuple(tokens))


def _greedy_pieces(vocab: Vocabulary, word: str) -> list[str]:
    """Greedy longest-match pieces for one pre-token, or [UNK] on failure."""
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        found: str | None = None
        while start < end:
            cand = word[start:end]
            if start > 0:
                cand = CONTINUATION_PREFIX + cand
            if cand in vocab.token_to_id:
                found = cand
                break
            end -= 1
        if found is None:
            return [UNK_TOKEN]
        pieces.append(found)
        start = end
    return pieces


def tokenize(vocab: Vocabulary, text: str) -> list[str]:
    """Full piece sequence for a text, without specials or truncation."""
    pieces: list[str] = []
    for word in pre_tokenize(text):
        pieces.extend(_greedy_pieces(vocab, word))
    return pieces


def encode(vocab: Vocabulary, text: str, max_len: int) -> Encoding:
    """Encode a text into exactly ``max_len`` ids with an attention mask.

    Pieces beyond ``max_len - 2`` are dropped, then the sequence is wrapped
    in ``[CLS]`` / ``[SEP]`` and padded with ``[PAD]``.
    """
    if max_len < 2:
        raise DataValidationError(f"max_len must be at least 2, got {max_len}")
    piece_ids = [vocab.token_to_id[p] for p in tokenize(vocab, text)]
    piece_ids = piece_ids[: max_len - 2]
    ids = [CLS_ID] + piece_ids + [SEP_ID]
    n_real = len(ids)
    ids.extend([PAD_ID] * (max_len - n_real))
    mask = [1] * n_real + [0] * (max_len - n_real)
    return Encoding(tuple(ids), tuple(mask), n_real)
