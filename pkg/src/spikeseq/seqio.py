"""Labeled sequence ingestion, stratified resampling and synthetic lineage data."""

from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

CANONICAL_AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"

_RAW_RESIDUE = re.compile(r"^[A-Z*\-]+$")


class SequenceFormatError(ValueError):
    """Raised for malformed FASTA or label input."""


def derive_seed(seed: int, *tags) -> int:
    """Derive an independent 63-bit seed from a base seed and purpose tags.

    Adding a new consumer (new tag) never perturbs the streams of existing ones.
    """
    key = "/".join([str(int(seed))] + [str(t) for t in tags]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    residues: str
    label: str

    def __post_init__(self):
        if not self.residues:
            raise SequenceFormatError(f"empty sequence body for {self.id!r}")
        if not _RAW_RESIDUE.match(self.residues):
            bad = sorted(set(re.sub(r"[A-Z*\-]", "", self.residues)))
            raise SequenceFormatError(
                f"record {self.id!r} has characters outside A-Z, '*', '-': {''.join(bad)!r}"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of records with a sorted class list."""

    records: tuple[SequenceRecord, ...]
    classes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        seen = set()
        for r in records:
            if r.id in seen:
                raise SequenceFormatError(f"duplicate record id {r.id!r}")
            seen.add(r.id)
        labels = sorted({r.label for r in records})
        classes = tuple(self.classes) if self.classes else tuple(labels)
        if list(classes) != sorted(set(classes)):
            raise ValueError("classes must be distinct and sorted lexicographically")
        missing = set(labels) - set(classes)
        if missing:
            raise ValueError(f"labels not among classes: {sorted(missing)}")
        object.__setattr__(self, "classes", classes)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def class_index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.classes)}

    @property
    def targets(self) -> np.ndarray:
        idx = self.class_index
        return np.array([idx[r.label] for r in self.records], dtype=np.int64)

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.classes}
        for r in self.records:
            counts[r.label] += 1
        return counts

    def subset(self, indices: Iterable[int]) -> "Dataset":
        """Records at ``indices``, keeping the full class list of the parent."""
        return Dataset(tuple(self.records[i] for i in indices), self.classes)


@dataclass(frozen=True)
class SplitPlan:
    train_fraction: float = 0.7
    repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")


def parse_fasta(text, labels: Mapping[str, str] | None = None) -> Dataset:
    """Parse FASTA text (or a text stream) into a Dataset.

    The record id is the header up to the last ``|``; the label is the
    segment after it. When ``labels`` is given it supplies the label for
    every id instead, and the whole header (minus a ``|label`` suffix when
    present) is still used as the id.
    """
    if not isinstance(text, str):
        text = text.read()
    entries: list[tuple[str, list[str]]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line.startswith(">"):
            entries.append((line[1:].strip(), []))
        elif line:
            if not entries:
                raise SequenceFormatError(f"line {lineno}: sequence data before first header")
            entries[-1][1].append(line)

    records = []
    for header, chunks in entries:
        if "|" in header:
            rec_id, _, header_label = header.rpartition("|")
        else:
            rec_id, header_label = header, ""
        if labels is not None:
            if rec_id not in labels and header in labels:
                rec_id = header
            if rec_id not in labels:
                raise SequenceFormatError(f"record {rec_id!r} is missing from the label table")
            label = labels[rec_id]
        else:
            label = header_label
            if not label:
                raise SequenceFormatError(f"record {header!r} has no '|label' suffix")
        residues = "".join(chunks).upper()
        if not residues:
            raise SequenceFormatError(f"empty sequence body for {rec_id!r}")
        records.append(SequenceRecord(rec_id, residues, label))
    return Dataset(tuple(records))


def write_fasta(dataset: Dataset, width: int = 60) -> str:
    out = io.StringIO()
    for r in dataset.records:
        out.write(f">{r.id}|{r.label}\n")
        for i in range(0, len(r.residues), width):
            out.write(r.residues[i:i + width] + "\n")
    return out.getvalue()


def read_label_csv(text) -> dict[str, str]:
    """Read an ``id,label`` table; a header row ``id,label`` is optional."""
    if not isinstance(text, str):
        text = text.read()
    table: dict[str, str] = {}
    for n, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise SequenceFormatError(f"label CSV row {n + 1}: expected 2 columns, got {len(row)}")
        rec_id, label = row[0].strip(), row[1].strip()
        if n == 0 and (rec_id.lower(), label.lower()) == ("id", "label"):
            continue
        if rec_id in table:
            raise SequenceFormatError(f"label CSV: duplicate id {rec_id!r}")
        table[rec_id] = label
    return table


def write_label_csv(dataset: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["id", "label"])
    for r in dataset.records:
        writer.writerow([r.id, r.label])
    return out.getvalue()


def train_count(n: int, train_fraction: float) -> int:
    # guard against 0.7 * 10 landing just below 7.0
    return max(1, int(np.floor(train_fraction * n + 1e-9)))


def stratified_split(dataset: Dataset, plan: SplitPlan, repeat_index: int) -> tuple[Dataset, Dataset]:
    """Per-class random split; membership depends only on (seed, repeat_index)."""
    if not 0 <= repeat_index < plan.repeats:
        raise ValueError(f"repeat_index {repeat_index} outside 0..{plan.repeats - 1}")
    by_class: dict[str, list[int]] = {c: [] for c in dataset.classes}
    for i, r in enumerate(dataset.records):
        by_class[r.label].append(i)
    for c, members in by_class.items():
        if len(members) < 2:
            raise ValueError(f"class {c!r} has {len(members)} record(s); stratified split needs >= 2")

    rng = np.random.default_rng(derive_seed(plan.seed, "split", repeat_index))
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in dataset.classes:
        members = np.array(by_class[c])
        perm = members[rng.permutation(len(members))]
        k = train_count(len(members), plan.train_fraction)
        # n >= 2 and floor(f*n) <= n-1 for f < 1, so the test side is never empty
        train_idx.extend(sorted(perm[:k].tolist()))
        test_idx.extend(sorted(perm[k:].tolist()))
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))


def generate_synthetic(
    n_classes: int,
    per_class: Sequence[int],
    length: int,
    mutation_rate: float,
    seed: int,
) -> Dataset:
    """Lineage-like data: one random reference per class plus i.i.d. substitutions.

    A substituted position is redrawn uniformly from all 20 canonical
    residues (possibly the original), so the expected Hamming distance to the
    reference is ``length * mutation_rate * 19 / 20``.
    """
    if n_classes < 2:
        raise ValueError("n_classes must be >= 2")
    if len(per_class) != n_classes:
        raise ValueError(f"per_class has {len(per_class)} entries, expected {n_classes}")
    if any(n < 1 for n in per_class):
        raise ValueError("per_class counts must be >= 1")
    if length < 1:
        raise ValueError("length must be >= 1")
    if not 0.0 <= mutation_rate < 0.5:
        raise ValueError(f"mutation_rate must be in [0, 0.5), got {mutation_rate}")

    alphabet = np.array(list(CANONICAL_AMINO_ACIDS))
    n_sym = len(alphabet)
    width = len(str(sum(per_class) - 1))
    records = []
    for c in range(n_classes):
        rng = np.random.default_rng(derive_seed(seed, "synthetic", c))
        reference = rng.integers(0, n_sym, size=length)
        for k in range(per_class[c]):
            seq = reference.copy()
            mutate = rng.random(length) < mutation_rate
            seq[mutate] = rng.integers(0, n_sym, size=int(mutate.sum()))
            rec_id = f"C{c}_{k:0{width}d}"
            records.append(SequenceRecord(rec_id, "".join(alphabet[seq]), f"C{c}"))
    return Dataset(tuple(records))


def synthetic_reference(length: int, seed: int, class_index: int) -> str:
    """The reference sequence ``generate_synthetic`` draws for one class."""
    rng = np.random.default_rng(derive_seed(seed, "synthetic", class_index))
    return "".join(np.array(list(CANONICAL_AMINO_ACIDS))[rng.integers(0, 20, size=length)])
