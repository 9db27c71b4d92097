"""Series-to-matrix transforms: recurrence plot, Gramian angular field, Markov transition field."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .encode import SignalSeries

KINDS = ("rp", "gaf", "mtf")


@dataclass(frozen=True)
class TransformMatrix:
    entries: np.ndarray
    kind: str


@dataclass(frozen=True)
class MtfTransition:
    """Row-stochastic Q x Q bin transition matrix with the Q - 1 inner bin edges."""

    entries: np.ndarray
    bin_edges: np.ndarray


def _as_series(signal, slice_true_length: bool = False) -> np.ndarray:
    if isinstance(signal, SignalSeries):
        x = signal.trimmed() if slice_true_length else signal.values
    else:
        x = signal
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D series, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    return x


def delay_embedding(x: np.ndarray, m: int, tau: int) -> np.ndarray:
    """Trajectory matrix: row i is (x[i], x[i+tau], ..., x[i+(m-1)tau])."""
    n_traj = len(x) - (m - 1) * tau
    return np.stack([x[k * tau: k * tau + n_traj] for k in range(m)], axis=1)


def recurrence_plot(signal, m: int = 1, tau: int = 1, slice_true_length: bool = False) -> TransformMatrix:
    """Unthresholded recurrence plot: Euclidean distances between delay-embedded trajectories."""
    if m < 1 or tau < 1:
        raise ValueError(f"m and tau must be >= 1, got m={m}, tau={tau}")
    x = _as_series(signal, slice_true_length)
    need = (m - 1) * tau + 2
    if len(x) < need:
        raise ValueError(f"series of length {len(x)} too short for m={m}, tau={tau}; need >= {need}")
    traj = delay_embedding(x, m, tau)
    diff = traj[:, None, :] - traj[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return TransformMatrix(dist, "rp")


def gramian_angular_field(signal, a: float = -1.0, b: float = 1.0, slice_true_length: bool = False) -> TransformMatrix:
    """Summation GAF, cos(phi_i + phi_j) of the [a, b]-rescaled series.

    A constant series is mapped to the midpoint (a + b) / 2.
    """
    if not -1.0 <= a < b <= 1.0:
        raise ValueError(f"need -1 <= a < b <= 1, got a={a}, b={b}")
    x = _as_series(signal, slice_true_length)
    if len(x) < 1:
        raise ValueError("GAF needs a series of length >= 1")
    lo, hi = x.min(), x.max()
    if hi == lo:
        scaled = np.full_like(x, (a + b) / 2.0)
    else:
        scaled = a + (b - a) * (x - lo) / (hi - lo)
    # rounding can push endpoints a hair outside [-1, 1]
    phi = np.arccos(np.clip(scaled, -1.0, 1.0))
    return TransformMatrix(np.cos(phi[:, None] + phi[None, :]), "gaf")


def quantile_bins(x: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges at empirical quantile levels k/q and the bin of each point.

    A point goes to the lowest bin whose upper edge is >= the point.
    """
    edges = np.quantile(x, np.arange(1, q) / q)
    bins = np.searchsorted(edges, x, side="left")
    return edges, bins


def markov_transition_field(signal, q: int = 8, slice_true_length: bool = False) -> tuple[MtfTransition, TransformMatrix]:
    x = _as_series(signal, slice_true_length)
    n = len(x)
    if n < 2:
        raise ValueError(f"MTF needs a series of length >= 2, got {n}")
    if not 2 <= q <= n:
        raise ValueError(f"need 2 <= Q <= n, got Q={q}, n={n}")
    edges, bins = quantile_bins(x, q)
    counts = np.zeros((q, q), dtype=np.float64)
    np.add.at(counts, (bins[:-1], bins[1:]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    w = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / q)
    field = w[bins[:, None], bins[None, :]]
    return MtfTransition(w, edges), TransformMatrix(field, "mtf")


def apply(kind: str, signal, *, m: int = 1, tau: int = 1, a: float = -1.0, b: float = 1.0, q: int = 8,
          slice_true_length: bool = False) -> TransformMatrix:
    if kind == "rp":
        return recurrence_plot(signal, m, tau, slice_true_length)
    if kind == "gaf":
        return gramian_angular_field(signal, a, b, slice_true_length)
    if kind == "mtf":
        return markov_transition_field(signal, q, slice_true_length)[1]
    raise ValueError(f"unknown transform kind {kind!r}; expected one of {', '.join(KINDS)}")


def matrix_to_csv(matrix: np.ndarray) -> str:
    out = io.StringIO()
    for row in np.asarray(matrix):
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    return np.array([[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()])


def to_grayscale(matrix: np.ndarray) -> np.ndarray:
    """Min-max scale to uint8 0..255; a constant matrix maps to all zeros."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros(m.shape, dtype=np.uint8)
    return np.round(255.0 * (m - lo) / (hi - lo)).astype(np.uint8)
