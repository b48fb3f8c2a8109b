"""Simulated measurement: exact amplitudes, seeded shot sampling, and
entry estimation through the normalization factor.

Sampling draws multinomial counts over |amplitude|^2 with a Philox
counter-based generator, so histograms are reproducible from the seed
alone. Multi-iteration runs derive one child seed per iteration from a
SeedSequence and pool the counts; the pooled histogram is independent of
iteration order. Estimates are alpha*sqrt(count/N) and are magnitudes;
signs are recovered from the exact amplitudes when the caller passes
them (simulator privilege), else reported as unknown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .block_encoding import BlockEncoding
from .errors import DimensionError, MeasurementBudgetError
from .tensor_ops import apply, basis_state


@dataclass(frozen=True)
class SampleReport:
    """Pooled histogram of a repeated shot experiment."""

    shots: int
    iterations: int
    seed: int
    counts: np.ndarray

    @property
    def total(self) -> int:
        return self.shots * self.iterations


@dataclass(frozen=True)
class EntryEstimate:
    """One matrix-entry estimate recovered from sampled frequencies."""

    index: int
    value: float
    magnitude: float
    std_error: float
    zero_count: bool
    sign_known: bool


def exact_amplitudes(be: BlockEncoding, column: int = 0) -> np.ndarray:
    """Full statevector of op applied to |0...0>|column>."""
    dim = 2**be.system_qubits
    if not 0 <= column < dim:
        raise DimensionError(f"column {column} out of range for {dim} states")
    state = basis_state(be.op.nqubits, column)  # ancillas lead, so flat index = column
    return apply(be.op, state)


def sample_counts(amplitudes: np.ndarray, shots: int, seed) -> np.ndarray:
    """Multinomial shot histogram over |amplitudes|^2, Philox-seeded."""
    amplitudes = np.asarray(amplitudes)
    probs = np.abs(amplitudes) ** 2
    total = probs.sum()
    if not np.isfinite(total) or total <= 0:
        raise DimensionError("amplitude vector has no probability mass")
    probs = probs / total
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.multinomial(shots, probs)


def pooled_report(amplitudes: np.ndarray, shots: int, iterations: int,
                  seed: int) -> SampleReport:
    """Pool counts over iterations, one spawned child seed per iteration."""
    if shots <= 0 or iterations <= 0:
        raise MeasurementBudgetError(
            f"need positive shots and iterations, got {shots}x{iterations}")
    children = np.random.SeedSequence(seed).spawn(iterations)
    counts = np.zeros(np.asarray(amplitudes).size, dtype=np.int64)
    for child in children:
        counts += sample_counts(amplitudes, shots, child)
    return SampleReport(shots, iterations, seed, counts)


def estimate_entries(report: SampleReport, alpha: float, targets,
                     signs=None) -> list[EntryEstimate]:
    """alpha*sqrt(count/N) per target index, with a delta-method error bar.

    Var(p_hat) = p(1-p)/N propagated through alpha*sqrt(p) gives
    SE = alpha*sqrt(1-p_hat)/(2 sqrt(N)); a zero count yields estimate 0
    flagged high-uncertainty with the one-count resolution alpha/sqrt(N).
    """
    n = report.total
    out = []
    for pos, t in enumerate(targets):
        t = int(t)
        if not 0 <= t < report.counts.size:
            raise DimensionError(f"target index {t} outside the histogram")
        p_hat = report.counts[t] / n
        mag = alpha * float(np.sqrt(p_hat))
        zero = report.counts[t] == 0
        se = alpha / np.sqrt(n) if zero \
            else alpha * float(np.sqrt(max(1.0 - p_hat, 0.0))) / (2.0 * np.sqrt(n))
        sign_known = signs is not None
        sign = float(np.sign(signs[pos])) if sign_known and signs[pos] != 0 else 1.0
        out.append(EntryEstimate(t, sign * mag, mag, float(se), bool(zero),
                                 sign_known))
    return out


def histogram_csv(report: SampleReport) -> str:
    """basis_index,count rows (nonzero counts only), headered."""
    lines = ["basis_index,count"]
    for idx in np.flatnonzero(report.counts):
        lines.append(f"{idx},{report.counts[idx]}")
    return "\n".join(lines) + "\n"
