"""Inner optimization engine: for a frozen backbone, evolve (exit placement,
frequency setting) pairs and return the Pareto archive of the best pairings.

The dynamic fitness of a candidate averages, over its sampled exits, the
product of the exit's correct-classification fraction, its energy and latency
relative to the static backbone at default frequencies, and a dissimilarity
regularizer that discounts exits whose predecessors already classify well.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .evaluator import (
    ExitProfile,
    HardwareBackend,
    HardwareModelParams,
    StaticScore,
    SurrogateParams,
    Workload,
    eval_static,
    exit_profile,
    layer_workloads,
)
from .genome import (
    BackboneGenome,
    DeviceSpec,
    DvfsGenome,
    ExitGenome,
    SearchSpaceSpec,
    VariationParams,
    crossover_dvfs,
    crossover_exit,
    enumerate_dvfs,
    enumerate_exit_genomes,
    indicator_length,
    mutate_dvfs,
    mutate_exit,
    n_inner_candidates,
    sample_dvfs,
    sample_exit_genome,
    sampled_positions,
)
from .moea import (
    Direction,
    ObjectiveVector,
    ParetoArchive,
    rank_population,
    survivor_select,
    tournament_select,
)

OBJECTIVE_MODES = ("vector", "scalar")


@dataclass(frozen=True)
class DynamicScore:
    """Aggregate dynamic evaluation of one (exits, frequencies) candidate."""

    mean_exit_score: float
    mean_correct: float
    mean_energy_ratio: float
    mean_latency_ratio: float
    mean_dissimilarity: float
    n_exits: int


@dataclass(frozen=True)
class IoeConfig:
    generations: int = 35
    population: int = 100
    gamma: float = 1.0
    objective_mode: str = "vector"
    keep_fraction: float = 0.5
    budget: int = 3500

    def __post_init__(self) -> None:
        if self.generations < 1 or self.population < 1:
            raise ValueError("generations and population must be >= 1")
        if self.generations * self.population > self.budget:
            raise ValueError(
                f"generations*population = {self.generations * self.population} "
                f"exceeds the inner budget {self.budget}"
            )
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must lie in (0, 1]")
        if self.objective_mode not in OBJECTIVE_MODES:
            raise ValueError(f"objective_mode must be one of {OBJECTIVE_MODES}")


def dissimilarity(profile: ExitProfile, positions: Sequence[int], i: int) -> float:
    """1 minus the best correct fraction among the sampled exits strictly
    before index i; the first sampled exit gets 1.0 (empty max is 0)."""
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise ValueError("sampled positions must be strictly ascending")
    if not 0 <= i < len(positions):
        raise ValueError("exit index out of range")
    best = 0.0
    for p in positions[:i]:
        best = max(best, profile.fraction_at(p))
    return 1.0 - best


def exit_score(correct_fraction: float, energy_ratio: float,
               latency_ratio: float, dissim_value: float, gamma: float) -> float:
    """Literal per-exit score: fraction * energy ratio * latency ratio *
    dissimilarity^gamma (gamma 0 neutralizes the last term)."""
    if energy_ratio <= 0 or latency_ratio <= 0:
        raise ValueError("ratios must be positive")
    if not 0.0 <= dissim_value <= 1.0:
        raise ValueError("dissimilarity must lie in [0, 1]")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return correct_fraction * energy_ratio * latency_ratio * dissim_value**gamma


class _DynamicEvaluator:
    """Per-backbone context caching prefix workloads for fast candidate
    evaluation; every evaluation is a pure function of the candidate."""

    def __init__(self, b: BackboneGenome, space: SearchSpaceSpec,
                 device: DeviceSpec, backend: HardwareBackend,
                 hw: HardwareModelParams, profile: ExitProfile,
                 static: StaticScore, gamma: float) -> None:
        flops, byts = layer_workloads(b, space)
        self.cum_flops = [0.0]
        self.cum_bytes = [0.0]
        for f, m in zip(flops, byts):
            self.cum_flops.append(self.cum_flops[-1] + f)
            self.cum_bytes.append(self.cum_bytes[-1] + m)
        self.layer_flops = flops
        self.space = space
        self.device = device
        self.backend = backend
        self.overhead = hw.exit_overhead_fraction
        self.profile = profile
        self.static = static
        self.gamma = gamma
        self.min_pos = space.exit_min_position

    def evaluate(self, x: ExitGenome, f: DvfsGenome) -> DynamicScore:
        positions = sampled_positions(x, self.space)
        overhead_flops = 0.0
        best_prev = 0.0
        sum_score = sum_n = sum_er = sum_lr = sum_d = 0.0
        for pos in positions:
            overhead_flops += self.overhead * self.layer_flops[pos - 1]
            w = Workload(self.cum_flops[pos] + overhead_flops, self.cum_bytes[pos])
            latency, energy = self.backend.latency_energy(w, self.device, f)
            er = energy / self.static.energy_mj
            lr = latency / self.static.latency_ms
            n = self.profile.correct_fractions[pos - self.min_pos]
            d = 1.0 - best_prev
            best_prev = max(best_prev, n)
            sum_score += exit_score(n, er, lr, d, self.gamma)
            sum_n += n
            sum_er += er
            sum_lr += lr
            sum_d += d
        k = len(positions)
        return DynamicScore(sum_score / k, sum_n / k, sum_er / k,
                            sum_lr / k, sum_d / k, k)


def dynamic_fitness(b: BackboneGenome, x: ExitGenome, f: DvfsGenome,
                    profile: ExitProfile, static: StaticScore,
                    space: SearchSpaceSpec, device: DeviceSpec,
                    backend: HardwareBackend, hw: HardwareModelParams,
                    gamma: float) -> DynamicScore:
    """Evaluate one candidate: prefix latency/energy (including the overheads
    of every sampled exit at or before each position) at the candidate's
    frequencies, normalized by the backbone's static score at defaults."""
    if len(x.indicators) != indicator_length(b, space):
        raise ValueError("exit genome is not conditioned on this backbone")
    ev = _DynamicEvaluator(b, space, device, backend, hw, profile, static, gamma)
    return ev.evaluate(x, f)


def ioe_objectives(score: DynamicScore, mode: str, gamma: float) -> ObjectiveVector:
    """Vector mode (default): maximize dissimilarity-weighted correctness,
    minimize the energy and latency ratios.  Scalar mode: the single averaged
    exit score, maximized."""
    if mode == "scalar":
        return ObjectiveVector((score.mean_exit_score,), (Direction.MAXIMIZE,))
    if mode == "vector":
        effective = score.mean_correct * score.mean_dissimilarity**gamma
        return ObjectiveVector(
            (effective, score.mean_energy_ratio, score.mean_latency_ratio),
            (Direction.MAXIMIZE, Direction.MINIMIZE, Direction.MINIMIZE),
        )
    raise ValueError(f"unknown objective mode {mode!r}")


@dataclass(frozen=True)
class IoeSolution:
    exits: ExitGenome
    dvfs: DvfsGenome
    score: DynamicScore
    objectives: ObjectiveVector

    def key(self) -> tuple:
        return (self.exits.key(),) + self.dvfs.key()


@dataclass
class IoeResult:
    solutions: tuple[IoeSolution, ...]
    n_dynamic_evals: int


Candidate = tuple[ExitGenome, DvfsGenome]


def _initial_candidates(b: BackboneGenome, space: SearchSpaceSpec,
                        device: DeviceSpec, population: int,
                        rng: random.Random) -> list[Candidate]:
    out: list[Candidate] = []
    if n_inner_candidates(b, space, device) <= population:
        # Whole subspace fits in one population: seed it exhaustively.
        for x in enumerate_exit_genomes(b, space):
            for f in enumerate_dvfs(device):
                out.append((x, f))
    else:
        seen: set[tuple] = set()
        attempts = 0
        while len(out) < population and attempts < 64 * population:
            attempts += 1
            cand = (sample_exit_genome(b, space, rng), sample_dvfs(device, rng))
            key = (cand[0].key(),) + cand[1].key()
            if key not in seen:
                seen.add(key)
                out.append(cand)
    while len(out) < population:
        out.append((sample_exit_genome(b, space, rng), sample_dvfs(device, rng)))
    return out[:population]


def _breed(pool, candidates: list[Candidate], population: int, device: DeviceSpec,
           params: VariationParams, rng: random.Random) -> list[Candidate]:
    children: list[Candidate] = []
    while len(children) < population:
        pa = candidates[tournament_select(pool, params, rng)]
        pb = candidates[tournament_select(pool, params, rng)]
        xa, xb = crossover_exit(pa[0], pb[0], params, rng)
        fa, fb = crossover_dvfs(pa[1], pb[1], params, rng)
        children.append((mutate_exit(xa, params, rng),
                         mutate_dvfs(fa, device, params, rng)))
        if len(children) < population:
            children.append((mutate_exit(xb, params, rng),
                             mutate_dvfs(fb, device, params, rng)))
    return children


def run_ioe(b: BackboneGenome, space: SearchSpaceSpec, device: DeviceSpec,
            backend: HardwareBackend, hw: HardwareModelParams,
            config: IoeConfig, variation: VariationParams, rng: random.Random,
            profile: ExitProfile | None = None,
            static: StaticScore | None = None,
            surrogate: SurrogateParams | None = None,
            seed: int = 0,
            on_generation: Callable[[int, ParetoArchive], None] | None = None,
            ) -> IoeResult:
    """NSGA-II loop over (exits, frequencies) for one backbone.

    The archive accumulates the rank-0 set across every generation and is
    pruned to a mutually non-dominated set after each one.  `profile` and
    `static` may be supplied by the caller (the outer engine already has
    them); otherwise they are derived here from `surrogate` and `seed`.
    """
    if profile is None or static is None:
        sur = surrogate or SurrogateParams()
        profile = exit_profile(b, space, sur, seed)
        static = eval_static(b, space, device, backend, sur, seed)
    ev = _DynamicEvaluator(b, space, device, backend, hw, profile, static,
                           config.gamma)
    archive = ParetoArchive()
    n_evals = 0
    candidates = _initial_candidates(b, space, device, config.population, rng)
    for gen in range(config.generations):
        if gen > 0:
            candidates = _breed(pool, candidates_prev, config.population,
                                device, variation, rng)
        scores = [ev.evaluate(x, f) for x, f in candidates]
        n_evals += len(candidates)
        vectors = [ioe_objectives(s, config.objective_mode, config.gamma)
                   for s in scores]
        ranked = rank_population(range(len(candidates)), vectors)
        front0 = [i for i in range(len(candidates)) if ranked.ranks[i] == 0]
        archive.merge_batch([
            (
                (candidates[i][0].key(),) + candidates[i][1].key(),
                IoeSolution(candidates[i][0], candidates[i][1], scores[i], vectors[i]),
                vectors[i],
            )
            for i in front0
        ])
        if on_generation is not None:
            on_generation(gen, archive)
        keep = max(1, math.ceil(config.keep_fraction * len(candidates)))
        pool = ranked.subset(survivor_select(ranked, keep))
        candidates_prev = candidates
    return IoeResult(tuple(e.payload for e in archive.entries), n_evals)
