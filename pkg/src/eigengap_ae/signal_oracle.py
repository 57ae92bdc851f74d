"""Analytic single-shot model of amplitude-amplification measurements.

The oracle hides an amplitude ``a = sin^2(lam)``.  A cosine shot at iteration
count ``m`` returns ``+1`` with probability ``(1 + cos(2 lam |m|)) / 2``; a sine
shot (flag-qubit Pauli-X readout, odd ``m`` only) uses ``sin`` instead and flips
the sign for negative ``m``.  Each shot is charged ``max(|m|, 1)`` applications
of the state-preparation unitary.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .gaussian_filters import Kind, TruncatedGaussianSampler

__all__ = [
    "Basis",
    "Protocol",
    "AmplitudeOracle",
    "MeasurementRecord",
    "RecordBatch",
    "measure_cos",
    "measure_sin",
    "batch_measure",
    "repeat_measure",
    "write_records_csv",
    "read_records_csv",
    "as_generator",
]

RECORD_COLUMNS = ("m", "basis", "outcome", "depth")


class Basis(str, enum.Enum):
    COS_Z = "CosZ"
    SIN_X = "SinX"


class Protocol(str, enum.Enum):
    GLSAE = "glsae"
    GDMAE = "gdmae"
    GMMAE = "gmmae"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class AmplitudeOracle:
    """Hidden amplitude plus resource counters.

    ``query_weight`` scales the per-shot query charge (1: applications of the
    state-preparation unitary; 2: charge a forward and inverse call per
    application).  ``p_flip`` is an optional symmetric readout-flip channel.
    """

    a: float
    query_weight: int = 1
    p_flip: float = 0.0
    query_counter: int = 0
    shot_counter: int = 0
    lam: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"amplitude a must lie in [0, 1], got {self.a!r}")
        if self.query_weight not in (1, 2):
            raise ValueError("query_weight must be 1 or 2")
        if not 0.0 <= self.p_flip <= 0.5:
            raise ValueError("p_flip must lie in [0, 0.5]")
        self.lam = math.asin(math.sqrt(self.a))

    @classmethod
    def from_phase(cls, lam: float, **kwargs) -> "AmplitudeOracle":
        if not 0.0 <= lam <= math.pi / 2:
            raise ValueError("phase must lie in [0, pi/2]")
        oracle = cls(a=math.sin(lam) ** 2, **kwargs)
        oracle.lam = float(lam)
        return oracle

    def cos_mean(self, m):
        return np.cos(2.0 * self.lam * np.abs(m))

    def sin_mean(self, m):
        """Mean of the stored (sign-corrected) sine outcome."""
        return np.sin(2.0 * self.lam * np.asarray(m, dtype=float))

    def _charge(self, m) -> None:
        m = np.atleast_1d(m)
        self.shot_counter += int(m.size)
        self.query_counter += int(self.query_weight * np.maximum(np.abs(m), 1).sum())

    def _draw(self, mean, rng: np.random.Generator) -> np.ndarray:
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        p_plus = np.clip((1.0 + mean) / 2.0, 0.0, 1.0)
        out = np.where(rng.random(mean.shape) < p_plus, 1, -1).astype(np.int8)
        if self.p_flip > 0.0:
            flip = rng.random(mean.shape) < self.p_flip
            out = np.where(flip, -out, out).astype(np.int8)
        return out

    def reset_counters(self) -> None:
        self.query_counter = 0
        self.shot_counter = 0


@dataclass(frozen=True)
class MeasurementRecord:
    m: int
    basis: Basis
    outcome: int
    depth: int


@dataclass(frozen=True)
class RecordBatch(Sequence):
    """Columnar store of shot records; indexing yields :class:`MeasurementRecord`."""

    m: np.ndarray
    basis: np.ndarray  # 0 = CosZ, 1 = SinX
    outcome: np.ndarray
    depth: np.ndarray

    def __len__(self) -> int:
        return int(self.m.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return RecordBatch(self.m[i], self.basis[i], self.outcome[i], self.depth[i])
        return MeasurementRecord(
            m=int(self.m[i]),
            basis=Basis.SIN_X if self.basis[i] else Basis.COS_Z,
            outcome=int(self.outcome[i]),
            depth=int(self.depth[i]),
        )

    def __iter__(self) -> Iterator[MeasurementRecord]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def empty(cls) -> "RecordBatch":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.astype(np.int8), z.astype(np.int8), z.copy())

    @classmethod
    def from_records(cls, records) -> "RecordBatch":
        if isinstance(records, RecordBatch):
            return records
        records = list(records)
        if not records:
            return cls.empty()
        return cls(
            m=np.array([r.m for r in records], dtype=np.int64),
            basis=np.array([Basis(r.basis) is Basis.SIN_X for r in records], dtype=np.int8),
            outcome=np.array([r.outcome for r in records], dtype=np.int8),
            depth=np.array([r.depth for r in records], dtype=np.int64),
        )

    @property
    def max_depth(self) -> int:
        return int(self.depth.max()) if len(self) else 0

    def total_queries(self, weight: int = 1) -> int:
        return int(weight * np.maximum(np.abs(self.m), 1).sum())


def _single(m: int, basis: Basis, outcome: int) -> MeasurementRecord:
    return MeasurementRecord(m=int(m), basis=basis, outcome=int(outcome), depth=max(abs(int(m)), 1))


def measure_cos(oracle: AmplitudeOracle, m: int, rng) -> MeasurementRecord:
    """One cosine-signal shot; ``m`` and ``-m`` are the same circuit."""
    rng = as_generator(rng)
    m = int(m)
    if m == 0:
        outcome = 1
        if oracle.p_flip > 0.0 and rng.random() < oracle.p_flip:
            outcome = -1
    else:
        outcome = int(oracle._draw(oracle.cos_mean(m), rng)[0])
    oracle._charge(m)
    return _single(m, Basis.COS_Z, outcome)


def measure_sin(oracle: AmplitudeOracle, m: int, rng) -> MeasurementRecord:
    """One flag-qubit Pauli-X shot at odd ``m``; negative ``m`` flips the outcome."""
    m = int(m)
    if m % 2 == 0:
        raise ValueError(f"sine shots need odd m, got {m}")
    rng = as_generator(rng)
    raw = int(oracle._draw(math.sin(2.0 * oracle.lam * abs(m)), rng)[0])
    oracle._charge(m)
    return _single(m, Basis.SIN_X, -raw if m < 0 else raw)


def batch_measure(
    oracle: AmplitudeOracle,
    sampler: TruncatedGaussianSampler,
    N: int,
    protocol,
    rng,
) -> RecordBatch:
    """Sample ``N`` iteration counts and run the protocol's shots for each.

    GLSAE and GMMAE take one cosine shot per sample.  GDMAE takes a cosine and
    a sine shot at the same sampled ``m`` (two separate preparations).  A
    residual ``m = 0`` sample under GDMAE produces a cosine ``+1`` and a sine
    record drawn at mean ``sin(0) = 0``; neither depends on the trial angle in
    the estimator.
    """
    protocol = Protocol.parse(protocol)
    if N < 0:
        raise ValueError("N must be non-negative")
    if protocol is Protocol.GDMAE and sampler.kind is not Kind.ODD_ONLY:
        raise ValueError("GDMAE needs an ODD_ONLY sampler")
    if protocol is not Protocol.GDMAE and sampler.kind is not Kind.ALL_INTEGERS:
        raise ValueError(f"{protocol.value.upper()} needs an ALL_INTEGERS sampler")
    if N == 0:
        return RecordBatch.empty()

    rng = as_generator(rng)
    ms = sampler.sample(rng, N)
    absm = np.abs(ms)
    if protocol is Protocol.GDMAE:
        m = np.repeat(ms, 2)
        basis = np.tile(np.array([0, 1], dtype=np.int8), N)
        a = 2.0 * oracle.lam * np.repeat(absm, 2)
        mean = np.where(basis == 0, np.cos(a), np.sin(a))
        outcome = oracle._draw(mean, rng)
        outcome = np.where((basis == 1) & (m < 0), -outcome, outcome).astype(np.int8)
    else:
        m = ms
        basis = np.zeros(N, dtype=np.int8)
        outcome = oracle._draw(np.cos(2.0 * oracle.lam * absm), rng)
    # m = 0 cosine shots are deterministic up to the flip channel
    zero_cos = (m == 0) & (basis == 0)
    if zero_cos.any():
        clean = np.ones(int(zero_cos.sum()), dtype=np.int8)
        if oracle.p_flip > 0.0:
            clean = np.where(rng.random(clean.size) < oracle.p_flip, -1, 1).astype(np.int8)
        outcome[zero_cos] = clean
    oracle._charge(m)
    depth = np.maximum(np.abs(m), 1).astype(np.int64)
    return RecordBatch(m=m.astype(np.int64), basis=basis, outcome=outcome, depth=depth)


def repeat_measure(oracle: AmplitudeOracle, m: int, basis, shots: int, rng) -> RecordBatch:
    """``shots`` independent shots at one fixed ``m`` and basis (vectorised single-shot rule)."""
    basis = Basis(basis)
    m = int(m)
    if basis is Basis.SIN_X and m % 2 == 0:
        raise ValueError(f"sine shots need odd m, got {m}")
    if shots < 0:
        raise ValueError("shots must be non-negative")
    rng = as_generator(rng)
    ms = np.full(shots, m, dtype=np.int64)
    if basis is Basis.COS_Z:
        mean = 1.0 if m == 0 else float(oracle.cos_mean(m))
        outcome = oracle._draw(np.full(shots, mean), rng)
    else:
        outcome = oracle._draw(np.full(shots, math.sin(2.0 * oracle.lam * abs(m))), rng)
        if m < 0:
            outcome = (-outcome).astype(np.int8)
    oracle._charge(ms)
    code = np.full(shots, int(basis is Basis.SIN_X), dtype=np.int8)
    return RecordBatch(m=ms, basis=code, outcome=outcome, depth=np.full(shots, max(abs(m), 1), dtype=np.int64))


def write_records_csv(records, dest=None) -> str | None:
    """Write ``m,basis,outcome,depth`` rows.  Returns the text when ``dest`` is None."""
    batch = RecordBatch.from_records(records)
    names = np.where(batch.basis == 1, Basis.SIN_X.value, Basis.COS_Z.value)
    rows = zip(batch.m.tolist(), names.tolist(), batch.outcome.tolist(), batch.depth.tolist())

    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        writer.writerows(rows)

    if dest is None:
        buf = io.StringIO()
        emit(buf)
        return buf.getvalue()
    if hasattr(dest, "write"):
        emit(dest)
    else:
        with open(dest, "w", newline="") as fh:
            emit(fh)
    return None


def read_records_csv(src) -> RecordBatch:
    """Inverse of :func:`write_records_csv`; accepts CSV text, a file object or a path."""

    def parse(fh):
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
            raise ValueError(f"expected columns {','.join(RECORD_COLUMNS)}, got {reader.fieldnames}")
        return [
            MeasurementRecord(int(r["m"]), Basis(r["basis"]), int(r["outcome"]), int(r["depth"]))
            for r in reader
        ]

    if isinstance(src, str) and "\n" in src:
        rows = parse(io.StringIO(src))
    elif hasattr(src, "read"):
        rows = parse(src)
    else:
        with open(src, newline="") as fh:
            rows = parse(fh)
    return RecordBatch.from_records(rows)
