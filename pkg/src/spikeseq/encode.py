"""Fixed-length numeric encodings of residue sequences.

Two views of the same folded sequence are produced: a zero-padded one-hot
matrix (network input) and a 1-based integer series with 0 for padding
(input to the matrix transforms).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .seqio import CANONICAL_AMINO_ACIDS


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    """Ordered symbols plus a catch-all symbol for everything else.

    ``fold`` maps a raw character to itself when it is one of ``symbols``
    other than the catch-all, otherwise to ``catch_all`` (when set).
    """

    symbols: str = CANONICAL_AMINO_ACIDS + "X"
    catch_all: str | None = "X"

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"alphabet symbols must be distinct: {self.symbols!r}")
        if self.catch_all is not None and self.catch_all not in self.symbols:
            raise ValueError(f"catch-all {self.catch_all!r} is not in the alphabet")

    def __len__(self) -> int:
        return len(self.symbols)

    @classmethod
    def parse(cls, spec: str) -> "Alphabet":
        """Build from a symbol string; a trailing 'X' becomes the catch-all."""
        spec = spec.strip().upper()
        return cls(spec, "X" if "X" in spec else None)

    @property
    def _lookup(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def fold(self, ch: str) -> str:
        ch = ch.upper()
        if ch in self.symbols and ch != self.catch_all:
            return ch
        if self.catch_all is None:
            raise EncodingError(f"character {ch!r} is not in alphabet {self.symbols!r}")
        return self.catch_all

    def indices(self, seq: str) -> np.ndarray:
        """0-based alphabet index of each folded character."""
        lookup = self._lookup
        return np.fromiter((lookup[self.fold(c)] for c in seq), dtype=np.int64, count=len(seq))


DEFAULT_ALPHABET = Alphabet()


@dataclass(frozen=True)
class OneHotTensor:
    matrix: np.ndarray  # (L_max, |alphabet|), uint8
    true_length: int

    @property
    def flat(self) -> np.ndarray:
        return self.matrix.reshape(-1)


@dataclass(frozen=True)
class SignalSeries:
    values: np.ndarray  # (L_max,), int64
    true_length: int

    def trimmed(self) -> np.ndarray:
        return self.values[: self.true_length]


def _check_length(seq: str, l_max: int) -> None:
    if len(seq) > l_max:
        raise EncodingError(f"sequence length {len(seq)} exceeds L_max {l_max}")


def one_hot_encode(seq: str, alphabet: Alphabet = DEFAULT_ALPHABET, l_max: int | None = None) -> OneHotTensor:
    l_max = len(seq) if l_max is None else l_max
    _check_length(seq, l_max)
    out = np.zeros((l_max, len(alphabet)), dtype=np.uint8)
    idx = alphabet.indices(seq)
    out[np.arange(len(seq)), idx] = 1
    return OneHotTensor(out, len(seq))


def signal_encode(seq: str, alphabet: Alphabet = DEFAULT_ALPHABET, l_max: int | None = None) -> SignalSeries:
    l_max = len(seq) if l_max is None else l_max
    _check_length(seq, l_max)
    out = np.zeros(l_max, dtype=np.int64)
    out[: len(seq)] = alphabet.indices(seq) + 1
    return SignalSeries(out, len(seq))


def decode_one_hot(tensor: OneHotTensor, alphabet: Alphabet = DEFAULT_ALPHABET) -> str:
    rows = tensor.matrix[: tensor.true_length]
    return "".join(alphabet.symbols[i] for i in rows.argmax(axis=1))


def decode_signal(series: SignalSeries, alphabet: Alphabet = DEFAULT_ALPHABET) -> str:
    return "".join(alphabet.symbols[v - 1] for v in series.trimmed())


def max_length(sequences: Iterable[str]) -> int:
    return max((len(s) for s in sequences), default=0)


def one_hot_batch(sequences: Sequence[str], alphabet: Alphabet, l_max: int) -> np.ndarray:
    """Stack flattened one-hot encodings into an (N, L_max * |alphabet|) float array."""
    out = np.zeros((len(sequences), l_max, len(alphabet)), dtype=np.float64)
    for n, seq in enumerate(sequences):
        _check_length(seq, l_max)
        out[n, np.arange(len(seq)), alphabet.indices(seq)] = 1.0
    return out.reshape(len(sequences), -1)


def signal_batch(sequences: Sequence[str], alphabet: Alphabet, l_max: int) -> np.ndarray:
    return np.stack([signal_encode(s, alphabet, l_max).values for s in sequences]) if sequences else np.zeros((0, l_max), dtype=np.int64)
