"""Deterministic fitness surrogates: workload accounting, accuracy and
per-exit correctness profiles, analytic latency/energy under frequency
scaling, a CSV lookup-table hardware backend, and the hybrid
classification/distillation loss utility.

Every function here is a pure function of its inputs plus an explicit seed,
so population members can be evaluated in parallel and runs replayed
bit for bit.  No training loops, no datasets, no device drivers.
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from bisect import bisect_left
from dataclasses import dataclass
from typing import Protocol, Sequence

from .genome import (
    BackboneGenome,
    DeviceSpec,
    DvfsGenome,
    SearchSpaceSpec,
    admissible_positions,
    validate_backbone,
)


@dataclass(frozen=True)
class Workload:
    """Abstract compute and memory-traffic units of (part of) a model."""

    flops: float
    bytes: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.flops) and math.isfinite(self.bytes)):
            raise ValueError("workload must be finite")
        if self.flops < 0 or self.bytes < 0:
            raise ValueError("workload must be nonnegative")


@dataclass(frozen=True)
class StaticScore:
    accuracy: float
    latency_ms: float
    energy_mj: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")
        if self.latency_ms <= 0 or self.energy_mj <= 0:
            raise ValueError("latency and energy must be positive")


@dataclass(frozen=True)
class ExitProfile:
    """Per-position fraction of inputs classifiable correctly at each
    admissible exit, under the ideal first-correct-exit mapping."""

    positions: tuple[int, ...]
    correct_fractions: tuple[float, ...]
    final_accuracy: float

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.correct_fractions):
            raise ValueError("positions / fractions length mismatch")
        prev = 0.0
        for f in self.correct_fractions:
            if f < prev - 1e-15 or f > self.final_accuracy + 1e-15:
                raise ValueError("exit fractions must be nondecreasing and "
                                 "bounded by the final accuracy")
            prev = f

    def fraction_at(self, position: int) -> float:
        i = self.positions.index(position)
        return self.correct_fractions[i]


@dataclass(frozen=True)
class HardwareModelParams:
    """Coefficients of the synthetic latency/power model.

    Latency: flops/(kappa_compute * f_c) + bytes/(kappa_memory * f_m).
    Power (mW): p0 + p1 * f_c^3 + p2 * f_m, approximating V^2 f scaling with
    voltage proportional to frequency.  Energy (mJ) = power * latency / 1e3.
    Each attached exit inflates its host layer's flops by
    exit_overhead_fraction.
    """

    kappa_compute: float = 1.0e7
    kappa_memory: float = 1.0e5
    p0: float = 2.0
    p1: float = 1500.0
    p2: float = 1.0
    exit_overhead_fraction: float = 0.05

    def __post_init__(self) -> None:
        if self.kappa_compute <= 0 or self.kappa_memory <= 0:
            raise ValueError("throughput coefficients must be positive")
        if self.p0 < 0 or self.p1 < 0 or self.p2 < 0:
            raise ValueError("power coefficients must be nonnegative")
        if self.exit_overhead_fraction < 0:
            raise ValueError("exit overhead must be nonnegative")


@dataclass(frozen=True)
class SurrogateParams:
    """Shape of the accuracy and exit-correctness surrogates."""

    accuracy_ceiling: float = 0.9       # asymptote of the accuracy curve
    accuracy_rate: float = 1.0          # exponential saturation rate
    noise_scale: float = 0.01           # amplitude of the deterministic jitter
    exit_slope: float = 6.0             # logistic slope over relative depth
    exit_midpoint: float = 0.35         # relative compute at half correctness

    def __post_init__(self) -> None:
        if not 0 < self.accuracy_ceiling <= 1:
            raise ValueError("accuracy_ceiling must lie in (0, 1]")
        if self.accuracy_rate <= 0 or self.exit_slope <= 0:
            raise ValueError("rates must be positive")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")


@dataclass(frozen=True)
class LossRecord:
    nll: float
    kd: float

    @property
    def total(self) -> float:
        return self.nll + self.kd


# ---------------------------------------------------------------------------
# Workload model


def layer_workloads(b: BackboneGenome,
                    space: SearchSpaceSpec) -> tuple[list[float], list[float]]:
    """Per-layer (flops, bytes) shares, layer 1 first.

    Block j contributes d*w*e*k^2*(r/32)^2 flops and 4*d*w*e bytes, spread
    equally over its d layers.
    """
    res = space.resolution_domain[b.resolution_idx]
    scale = (res / 32.0) ** 2
    flops: list[float] = []
    bytes_: list[float] = []
    for blk in b.blocks:
        d = space.depth_domain[blk.depth_idx]
        w = space.width_domain[blk.width_idx]
        k = space.kernel_domain[blk.kernel_idx]
        e = space.expand_domain[blk.expand_idx]
        block_flops = d * w * e * k * k * scale
        block_bytes = 4.0 * d * w * e
        flops.extend([block_flops / d] * d)
        bytes_.extend([block_bytes / d] * d)
    return flops, bytes_


def workload_of(b: BackboneGenome, space: SearchSpaceSpec,
                upto_layer: int | None = None,
                exit_positions: Sequence[int] = (),
                exit_overhead_fraction: float = 0.05) -> Workload:
    """Workload of the prefix through `upto_layer` (None = whole model).

    Each exit listed in `exit_positions` (host layer indices, all <=
    upto_layer) adds exit_overhead_fraction times its host layer's flops;
    exits cost no extra memory traffic.
    """
    flops, bytes_ = layer_workloads(b, space)
    n = len(flops)
    if upto_layer is None:
        upto_layer = n
    if upto_layer < 1:
        raise ValueError("prefix must contain at least one layer")
    if upto_layer > n:
        raise ValueError(f"prefix of {upto_layer} layers exceeds model depth {n}")
    total_flops = sum(flops[:upto_layer])
    total_bytes = sum(bytes_[:upto_layer])
    for pos in exit_positions:
        if not 1 <= pos <= upto_layer:
            raise ValueError(f"exit position {pos} outside prefix 1..{upto_layer}")
        total_flops += exit_overhead_fraction * flops[pos - 1]
    return Workload(total_flops, total_bytes)


def _mid_genome(space: SearchSpaceSpec) -> BackboneGenome:
    from .genome import BlockGenes  # local import to keep module load light

    mid = lambda domain: len(domain) // 2
    blk = BlockGenes(mid(space.depth_domain), mid(space.width_domain),
                     mid(space.kernel_domain), mid(space.expand_domain))
    return BackboneGenome(mid(space.resolution_domain), (blk,) * space.n_block)


def reference_flops(space: SearchSpaceSpec) -> float:
    """Full-model flops of the genome sitting mid-way in every domain."""
    return workload_of(_mid_genome(space), space).flops


# ---------------------------------------------------------------------------
# Accuracy and exit-correctness surrogates


def _unit_noise(b: BackboneGenome, seed: int) -> float:
    """Deterministic hash of (genome, seed) mapped to [-1, 1]."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & (2**64 - 1)))
    h.update(",".join(str(g) for g in b.key()).encode())
    v = int.from_bytes(h.digest(), "little")
    return 2.0 * v / (2**64 - 1) - 1.0


def accuracy_surrogate(b: BackboneGenome, space: SearchSpaceSpec,
                       params: SurrogateParams, seed: int) -> float:
    """Saturating function of full-model compute plus a tiny deterministic
    jitter, clamped to [0.02, 0.98]."""
    validate_backbone(b, space)
    c = workload_of(b, space).flops
    c_ref = reference_flops(space)
    acc = params.accuracy_ceiling * (1.0 - math.exp(-params.accuracy_rate * c / c_ref))
    acc += params.noise_scale * _unit_noise(b, seed)
    return min(0.98, max(0.02, acc))


def exit_correct_fraction(accuracy: float, compute_ratio: float,
                          params: SurrogateParams) -> float:
    """Logistic share of the backbone accuracy reachable at a prefix that
    performs `compute_ratio` of the full model's flops."""
    z = params.exit_slope * (compute_ratio - params.exit_midpoint)
    return accuracy / (1.0 + math.exp(-z))


def exit_profile(b: BackboneGenome, space: SearchSpaceSpec,
                 params: SurrogateParams, seed: int) -> ExitProfile:
    acc = accuracy_surrogate(b, space, params, seed)
    flops, _ = layer_workloads(b, space)
    full = sum(flops)
    positions = admissible_positions(b, space)
    fractions = []
    running = 0.0
    upto = 0
    for pos in positions:
        while upto < pos:
            running += flops[upto]
            upto += 1
        fractions.append(exit_correct_fraction(acc, running / full, params))
    return ExitProfile(tuple(positions), tuple(fractions), acc)


# ---------------------------------------------------------------------------
# Hardware backends


def resolved_frequencies(device: DeviceSpec, f: DvfsGenome) -> tuple[float, float]:
    """(compute GHz, memory GHz); memory falls back to the compute clock on
    devices without an EMC knob."""
    if f.device != device.name:
        raise ValueError(f"dvfs genome targets {f.device!r}, device is {device.name!r}")
    f_c = device.compute_freq_ghz[f.compute_idx]
    if device.has_emc:
        if f.emc_idx is None:
            raise ValueError(f"{device.name} needs an emc index")
        f_m = device.emc_freq_ghz[f.emc_idx]
    else:
        f_m = f_c
    return f_c, f_m


def hw_latency_energy(w: Workload, device: DeviceSpec, f: DvfsGenome,
                      params: HardwareModelParams) -> tuple[float, float]:
    """Analytic latency (ms) and energy (mJ) at the given frequency setting."""
    f_c, f_m = resolved_frequencies(device, f)
    latency = w.flops / (params.kappa_compute * f_c) + w.bytes / (params.kappa_memory * f_m)
    power = params.p0 + params.p1 * f_c**3 + params.p2 * f_m
    return latency, power * latency / 1e3


class HardwareBackend(Protocol):
    def latency_energy(self, w: Workload, device: DeviceSpec,
                       f: DvfsGenome) -> tuple[float, float]: ...


class SyntheticHardwareModel:
    """Closed-form backend; the default."""

    def __init__(self, params: HardwareModelParams | None = None) -> None:
        self.params = params or HardwareModelParams()

    def latency_energy(self, w: Workload, device: DeviceSpec,
                       f: DvfsGenome) -> tuple[float, float]:
        return hw_latency_energy(w, device, f, self.params)


TABLE_CSV_COLUMNS = ("device", "bucket_log10_flops", "f_compute_ghz",
                     "f_emc_ghz", "latency_ms", "energy_mj")


class HardwareTable:
    """Measurement lookup table keyed by (device, frequency pair, flops bucket).

    Frequencies are discrete and never interpolated; flops queries between two
    buckets interpolate log-linearly (so a query midway in log-flops returns
    the geometric mean of the bucket values), and queries outside the bucket
    range clamp to the nearest bucket.
    """

    def __init__(self) -> None:
        # (device, f_c, f_m or None) -> sorted list of (log10_flops, lat, energy)
        self._rows: dict[tuple, list[tuple[float, float, float]]] = {}

    @classmethod
    def from_csv(cls, path: str) -> "HardwareTable":
        table = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(TABLE_CSV_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"lookup table missing columns: {sorted(missing)}")
            for row in reader:
                f_m = row["f_emc_ghz"].strip()
                key = (row["device"], round(float(row["f_compute_ghz"]), 9),
                       round(float(f_m), 9) if f_m else None)
                table._rows.setdefault(key, []).append(
                    (float(row["bucket_log10_flops"]), float(row["latency_ms"]),
                     float(row["energy_mj"]))
                )
        for rows in table._rows.values():
            rows.sort()
        return table

    def add_row(self, device: str, f_c: float, f_m: float | None,
                bucket_log10_flops: float, latency_ms: float,
                energy_mj: float) -> None:
        key = (device, round(f_c, 9), round(f_m, 9) if f_m is not None else None)
        self._rows.setdefault(key, []).append((bucket_log10_flops, latency_ms, energy_mj))
        self._rows[key].sort()

    def lookup(self, device: str, f_c: float, f_m: float | None,
               flops: float) -> tuple[float, float]:
        key = (device, round(f_c, 9), round(f_m, 9) if f_m is not None else None)
        rows = self._rows.get(key)
        if not rows:
            raise KeyError(f"no table rows for device={device!r} f_c={f_c} f_m={f_m}")
        q = math.log10(flops)
        xs = [r[0] for r in rows]
        i = bisect_left(xs, q)
        if i < len(rows) and xs[i] == q:
            return rows[i][1], rows[i][2]
        if i == 0:  # below the smallest bucket: clamp
            return rows[0][1], rows[0][2]
        if i == len(rows):  # above the largest bucket: clamp
            return rows[-1][1], rows[-1][2]
        (x0, l0, e0), (x1, l1, e1) = rows[i - 1], rows[i]
        t = (q - x0) / (x1 - x0)
        lat = math.exp((1 - t) * math.log(l0) + t * math.log(l1))
        energy = math.exp((1 - t) * math.log(e0) + t * math.log(e1))
        return lat, energy


def table_model_lookup(table: HardwareTable, device: str, f_c: float,
                       f_m: float | None, flops: float) -> tuple[float, float]:
    return table.lookup(device, f_c, f_m, flops)


class TableHardwareModel:
    def __init__(self, table: HardwareTable) -> None:
        self.table = table

    @classmethod
    def from_csv(cls, path: str) -> "TableHardwareModel":
        return cls(HardwareTable.from_csv(path))

    def latency_energy(self, w: Workload, device: DeviceSpec,
                       f: DvfsGenome) -> tuple[float, float]:
        f_c, f_m = resolved_frequencies(device, f)
        return self.table.lookup(device.name, f_c,
                                 f_m if device.has_emc else None, w.flops)


def default_dvfs(device: DeviceSpec) -> DvfsGenome:
    return DvfsGenome(device.name, device.default_compute_idx, device.default_emc_idx)


def eval_static(b: BackboneGenome, space: SearchSpaceSpec, device: DeviceSpec,
                backend: HardwareBackend, surrogate: SurrogateParams,
                seed: int) -> StaticScore:
    """Accuracy plus full-model latency/energy at the device's default
    frequency setting, with no exits attached."""
    acc = accuracy_surrogate(b, space, surrogate, seed)
    w = workload_of(b, space)
    latency, energy = backend.latency_energy(w, device, default_dvfs(device))
    return StaticScore(acc, latency, energy)


# ---------------------------------------------------------------------------
# Hybrid classification + distillation loss (desk-scale formula utility)

_PROB_FLOOR = 1e-12


def _soften(p: Sequence[float], temperature: float) -> list[float]:
    powered = [max(v, 0.0) ** (1.0 / temperature) for v in p]
    z = sum(powered)
    return [v / z for v in powered]


def _check_simplex(p: Sequence[float], name: str) -> None:
    if abs(sum(p) - 1.0) > 1e-9:
        raise ValueError(f"{name} must sum to 1")
    if any(v < 0 for v in p):
        raise ValueError(f"{name} must be nonnegative")


def hybrid_loss(exit_probs: Sequence[Sequence[float]],
                final_probs: Sequence[float], label: int,
                temperature: float = 1.0) -> LossRecord:
    """Mean over exits of cross-entropy at the label plus temperature-scaled
    KL from the final classifier to the exit (times T^2), for one sample.

    Zero probabilities are clamped to 1e-12 inside the logarithms, so the
    result is always finite.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    _check_simplex(final_probs, "final_probs")
    if not 0 <= label < len(final_probs):
        raise ValueError("label out of range")
    if not exit_probs:
        raise ValueError("need at least one exit prediction")
    nll_sum = 0.0
    kd_sum = 0.0
    teacher = _soften(final_probs, temperature)
    for probs in exit_probs:
        _check_simplex(probs, "exit_probs")
        if len(probs) != len(final_probs):
            raise ValueError("exit and final distributions differ in length")
        nll_sum += -math.log(max(probs[label], _PROB_FLOOR))
        student = _soften(probs, temperature)
        kl = sum(
            t * (math.log(t) - math.log(max(s, _PROB_FLOOR)))
            for t, s in zip(teacher, student)
            if t > 0
        )
        kd_sum += max(kl, 0.0) * temperature**2
    n_exits = len(exit_probs)
    return LossRecord(nll_sum / n_exits, kd_sum / n_exits)


def hybrid_loss_batch(samples: Sequence[tuple[Sequence[Sequence[float]],
                                              Sequence[float], int]],
                      temperature: float = 1.0) -> LossRecord:
    """Average the per-sample records over a batch."""
    if not samples:
        raise ValueError("empty batch")
    records = [hybrid_loss(e, f, y, temperature) for e, f, y in samples]
    n = len(records)
    return LossRecord(sum(r.nll for r in records) / n,
                      sum(r.kd for r in records) / n)
