import math
import random

import pytest

from nestevo.evaluator import (
    HardwareModelParams,
    StaticScore,
    SurrogateParams,
    SyntheticHardwareModel,
    eval_static,
    exit_profile,
)
from nestevo.exhaustive import enumerate_truth, space_cardinality
from nestevo.genome import (
    DvfsGenome,
    ExitGenome,
    VariationParams,
    enumerate_backbones,
    enumerate_dvfs,
    enumerate_exit_genomes,
    indicator_length,
)
from nestevo.ioe import (
    DynamicScore,
    IoeConfig,
    IoeSolution,
    dynamic_fitness,
    ioe_objectives,
)
from nestevo.moea import Direction, ObjectiveVector
from nestevo.ooe import (
    OoeConfig,
    combined_rank,
    ioe_front_hypervolume,
    run_ooe,
    static_rank_and_prune,
    static_objectives,
)

HW = HardwareModelParams()
SUR = SurrogateParams()


def oracle_dominates(a, b):
    av = [v if d is Direction.MAXIMIZE else -v
          for v, d in zip(a.values, a.directions)]
    bv = [v if d is Direction.MAXIMIZE else -v
          for v, d in zip(b.values, b.directions)]
    return all(x >= y for x, y in zip(av, bv)) and any(
        x > y for x, y in zip(av, bv))


def bilevel_truth_keys(space, device, backend, seed, gamma=1.0, mode="vector"):
    """Independent plain-loop construction of the true bi-level front."""
    per_backbone = []
    for b in enumerate_backbones(space):
        static = eval_static(b, space, device, backend, SUR, seed)
        profile = exit_profile(b, space, SUR, seed)
        cands = [(x, f) for x in enumerate_exit_genomes(b, space)
                 for f in enumerate_dvfs(device)]
        scored = []
        for x, f in cands:
            s = dynamic_fitness(b, x, f, profile, static, space, device,
                                backend, HW, gamma)
            scored.append((x, f, s, ioe_objectives(s, mode, gamma)))
        inner = [
            (x, f, s) for x, f, s, v in scored
            if not any(oracle_dominates(v2, v) for _, _, _, v2 in scored)
        ]
        # 2-D summary volume by rectangle sweep over (effective correctness,
        # energy ratio <= 1) against (0, 1).
        pts = sorted(
            {(s.mean_correct * s.mean_dissimilarity**gamma, s.mean_energy_ratio)
             for _, _, s in inner if s.mean_energy_ratio <= 1.0},
            reverse=True,
        )
        hv = 0.0
        prev_er = 1.0
        for eff, er in pts:
            if er < prev_er:
                hv += (eff - 0.0) * (prev_er - er)
                prev_er = er
        vec = ObjectiveVector(
            (static.accuracy, static.latency_ms, static.energy_mj, hv),
            (Direction.MAXIMIZE, Direction.MINIMIZE, Direction.MINIMIZE,
             Direction.MAXIMIZE))
        per_backbone.append((b, static, inner, vec))

    keys = set()
    for b, static, inner, vec in per_backbone:
        if any(oracle_dominates(v2, vec) for _, _, _, v2 in per_backbone):
            continue
        for x, f, s in inner:
            keys.add((b.key(), x.key()) + f.key())
    return keys


def exhaustive_config(seed):
    return OoeConfig(
        generations=2, population=8, prune_fraction=1.0, budget=16,
        ioe=IoeConfig(generations=2, population=6, budget=12),
        seed=seed,
    )


class TestStaticRankAndPrune:
    def _statics(self, rng, n):
        return [StaticScore(rng.uniform(0.1, 0.9), rng.uniform(1, 50),
                            rng.uniform(1, 500)) for _ in range(n)]

    def test_prune_fraction_one_is_identity_membership(self):
        rng = random.Random(0)
        statics = self._statics(rng, 12)
        assert sorted(static_rank_and_prune(statics, 1.0)) == list(range(12))

    def test_heavily_dominated_member_never_selected(self):
        rng = random.Random(1)
        for _ in range(50):
            statics = self._statics(rng, 12)
            k = math.ceil(0.25 * len(statics))
            selected = static_rank_and_prune(statics, 0.25)
            assert len(selected) == k
            vectors = [static_objectives(s) for s in statics]
            for i in range(len(statics)):
                dominators = sum(
                    1 for j in range(len(statics))
                    if oracle_dominates(vectors[j], vectors[i]))
                if dominators >= k:
                    assert i not in selected

    def test_deterministic(self):
        rng = random.Random(2)
        statics = self._statics(rng, 20)
        assert static_rank_and_prune(statics, 0.3) == static_rank_and_prune(
            statics, 0.3)

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            static_rank_and_prune([], 0.5)


def make_solution(eff, er, lr=0.5, n_exits=1):
    score = DynamicScore(eff * er * lr, eff, er, lr, 1.0, n_exits)
    return IoeSolution(ExitGenome((1,)), DvfsGenome("toy-dev", 0), score,
                       ioe_objectives(score, "vector", 1.0))


class TestCombinedRank:
    def test_hypervolume_summary_orders_backbones(self, toy_space):
        b1, b2 = list(enumerate_backbones(toy_space))[:2]
        static = StaticScore(0.5, 10.0, 100.0)
        strong = [make_solution(0.8, 0.2), make_solution(0.9, 0.4)]
        weak = [make_solution(0.4, 0.6)]
        hv_strong = ioe_front_hypervolume(strong, 1.0)
        hv_weak = ioe_front_hypervolume(weak, 1.0)
        assert hv_strong > hv_weak
        ranked = combined_rank([(b1, strong), (b2, weak)], [static, static], 1.0)
        assert ranked.ranks[0] == 0
        assert ranked.ranks[1] == 1

    def test_single_candidate_rank_zero(self, toy_space):
        b = next(enumerate_backbones(toy_space))
        ranked = combined_rank([(b, [make_solution(0.5, 0.5)])],
                               [StaticScore(0.5, 1.0, 1.0)], 1.0)
        assert ranked.ranks == (0,)

    def test_summary_invariant_to_member_order(self):
        sols = [make_solution(0.8, 0.2), make_solution(0.5, 0.1),
                make_solution(0.9, 0.9)]
        base = ioe_front_hypervolume(sols, 1.0)
        assert ioe_front_hypervolume(list(reversed(sols)), 1.0) == pytest.approx(
            base, abs=1e-15)

    def test_points_beyond_reference_contribute_nothing(self):
        inside = [make_solution(0.5, 0.5)]
        with_outside = inside + [make_solution(0.9, 1.5)]
        assert ioe_front_hypervolume(with_outside, 1.0) == pytest.approx(
            ioe_front_hypervolume(inside, 1.0), abs=1e-15)

    def test_empty_archive_rejected(self):
        with pytest.raises(ValueError):
            ioe_front_hypervolume([], 1.0)

    def test_mismatched_lengths_rejected(self, toy_space):
        b = next(enumerate_backbones(toy_space))
        with pytest.raises(ValueError):
            combined_rank([(b, [make_solution(0.5, 0.5)])], [], 1.0)


class TestRunOoe:
    def test_exhaustive_settings_reproduce_truth(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        config = exhaustive_config(seed=11)
        result = run_ooe(toy_space, device, backend, HW, SUR, config,
                         VariationParams())
        truth = bilevel_truth_keys(toy_space, device, backend, seed=11)
        archive_keys = {e.payload.key() for e in result.entries}
        assert archive_keys == truth

    def test_enumerate_truth_matches_inline_oracle(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        entries = enumerate_truth(toy_space, device, backend, HW, SUR,
                                  seed=11, gamma=1.0)
        assert {e.payload.key() for e in entries} == bilevel_truth_keys(
            toy_space, device, backend, seed=11)

    def test_exhaustive_equality_across_seeds(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        for seed in (1, 2, 3):
            result = run_ooe(toy_space, device, backend, HW, SUR,
                             exhaustive_config(seed), VariationParams())
            truth = bilevel_truth_keys(toy_space, device, backend, seed=seed)
            assert {e.payload.key() for e in result.entries} == truth

    def test_deterministic_given_seed(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        config = OoeConfig(generations=3, population=4, prune_fraction=0.5,
                           budget=12, ioe=IoeConfig(generations=2, population=4,
                                                    budget=8), seed=21)

        def run():
            result = run_ooe(toy_space, device, backend, HW, SUR, config,
                             VariationParams())
            return [(e.key, e.vector.values) for e in result.entries]

        assert run() == run()

    def test_threads_do_not_change_results(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        config = exhaustive_config(seed=31)
        r1 = run_ooe(toy_space, device, backend, HW, SUR, config,
                     VariationParams(), threads=1)
        r2 = run_ooe(toy_space, device, backend, HW, SUR, config,
                     VariationParams(), threads=4)
        assert [(e.key, e.vector.values) for e in r1.entries] == \
               [(e.key, e.vector.values) for e in r2.entries]

    def test_exit_genomes_conditioned_on_their_backbones(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        result = run_ooe(toy_space, device, backend, HW, SUR,
                         exhaustive_config(seed=41), VariationParams())
        for e in result.entries:
            sol = e.payload
            assert len(sol.exits.indicators) == indicator_length(
                sol.backbone, toy_space)
            assert sol.exits.n_exits >= 1

    def test_archive_coverage_never_regresses(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        config = OoeConfig(generations=4, population=4, prune_fraction=0.5,
                           budget=16, ioe=IoeConfig(generations=2, population=4,
                                                    budget=8), seed=51)
        history = []

        def on_gen(gen, entries, counters):
            history.append([e.vector for e in entries])

        run_ooe(toy_space, device, backend, HW, SUR, config, VariationParams(),
                on_generation=on_gen)
        assert len(history) == 4
        for earlier, later in zip(history, history[1:]):
            for v in earlier:
                assert any(
                    w.values == v.values or oracle_dominates(w, v)
                    for w in later
                )

    def test_budget_counters_exact(self, toy_space):
        device = toy_space.device("toy-dev")
        backend = SyntheticHardwareModel(HW)
        config = OoeConfig(generations=3, population=4, prune_fraction=0.5,
                           budget=12, ioe=IoeConfig(generations=2, population=5,
                                                    budget=10), seed=61)
        result = run_ooe(toy_space, device, backend, HW, SUR, config,
                         VariationParams())
        c = result.counters
        assert c.static_evals == 3 * 4
        assert c.forwarded_backbones == 3 * math.ceil(0.5 * 4)
        assert c.dynamic_evals == c.forwarded_backbones * 2 * 5
        # Per-generation records accumulate the same numbers.
        last = result.snapshots[-1]
        assert last.static_evals == c.static_evals
        assert last.dynamic_evals == c.dynamic_evals

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OoeConfig(generations=100, population=100, budget=450)
        with pytest.raises(ValueError):
            OoeConfig(prune_fraction=0.0)

    def test_space_cardinality(self, toy_space):
        card = space_cardinality(toy_space, toy_space.device("toy-dev"))
        assert card.n_backbones == 8
        assert card.max_exit_patterns == 3
        assert card.n_dvfs == 2
        assert card.total == 48
