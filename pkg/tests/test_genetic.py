import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnf.genetic import (
    WORST_FITNESS,
    GAConfig,
    Population,
    crossover,
    evolve,
    fitness,
    flatten,
    mutate,
    rank_scale,
    scale_and_select,
    stochastic_universal_sampling,
    unflatten,
)
from gnf.network import Dataset, Network, forward, init_network

from oracles import brute_force_abs_error


def one_one(w=2.0, b=0.0):
    return Network([[[w]]], [[b]], ("linear",))


LINE = Dataset([[0.0], [1.0], [2.0]], [[1.0], [3.0], [5.0]])  # t = 2x + 1


class TestGenome:
    def test_one_one_layout(self):
        np.testing.assert_array_equal(flatten(one_one(2.0, 0.5)), [2.0, 0.5])

    def test_layer_order(self):
        net = Network([[[1, 2], [3, 4]], [[5, 6]]], [[7, 8], [9]], ("tan_sigmoid", "linear"))
        np.testing.assert_array_equal(flatten(net), [1, 2, 3, 4, 7, 8, 5, 6, 9])

    def test_tipper_topology_size(self):
        net = init_network([2, 50, 1], ["tan_sigmoid", "linear"], 0)
        assert flatten(net).shape == (201,)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25)
    def test_round_trip(self, seed):
        net = init_network([3, 4, 2], ["sigmoid", "linear"], seed, input_range=([0, 0, 0], [1, 2, 3]))
        assert unflatten(flatten(net), net) == net

    def test_unflatten_keeps_template(self):
        net = one_one()
        other = unflatten([5.0, -1.0], net)
        assert flatten(net).tolist() == [2.0, 0.0]
        assert forward(other, [1.0])[0] == 4.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            unflatten([1.0, 2.0, 3.0], one_one())


class TestFitness:
    def test_exact_genome_scores_zero(self):
        assert fitness([2.0, 1.0], one_one(), LINE) == 0.0

    def test_example(self):
        # y = x: residuals 1, 2, 3
        assert fitness([1.0, 0.0], one_one(), LINE) == 6.0

    def test_non_finite_genes_get_sentinel(self):
        assert fitness([np.nan, 0.0], one_one(), LINE) == WORST_FITNESS
        assert fitness([np.inf, 0.0], one_one(), LINE) == WORST_FITNESS

    def test_overflow_gets_sentinel(self):
        assert fitness([1e308, 1e308], one_one(), Dataset([[10.0]], [[0.0]])) == WORST_FITNESS

    @given(st.integers(0, 10**6))
    @settings(max_examples=25)
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        net = init_network([2, 4, 1], ["tan_sigmoid", "linear"], seed, input_range=([0, 0], [10, 10]))
        X, T = rng.uniform(0, 10, (12, 2)), rng.uniform(0, 30, (12, 1))
        genome = rng.normal(size=net.n_params)
        probe = unflatten(genome, net)
        expected = brute_force_abs_error(
            [w.tolist() for w in probe.weights], [b.tolist() for b in probe.biases],
            probe.activations, X.tolist(), T.tolist(), [0, 0], [10, 10],
        )
        assert fitness(genome, net, Dataset(X, T)) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            fitness([1.0, 0.0], one_one(), Dataset([[0.0, 1.0]], [[0.0]]))


class TestSelection:
    def test_rank_scale_monotone(self):
        p = rank_scale([3.0, 1.0, 2.0, 10.0])
        assert p.sum() == pytest.approx(1.0)
        assert p[1] > p[2] > p[0] > p[3]
        assert p[1] / p[2] == pytest.approx(np.sqrt(2))

    def test_rank_scale_ties_uniform(self):
        np.testing.assert_allclose(rank_scale([4.0] * 7), np.full(7, 1 / 7))

    def test_rank_scale_partial_ties(self):
        p = rank_scale([1.0, 5.0, 5.0])
        assert p[1] == p[2] < p[0]

    def test_sentinels_are_ranked_last(self):
        p = rank_scale([WORST_FITNESS, 2.0, 1.0])
        assert p[0] < p[1] < p[2]

    def test_sus_frequencies(self):
        rng = np.random.default_rng(0)
        p = np.array([0.5, 0.3, 0.15, 0.05])
        counts = np.zeros(4)
        rounds, per_round = 10_000, 10
        for _ in range(rounds):
            counts += np.bincount(stochastic_universal_sampling(p, per_round, rng), minlength=4)
        np.testing.assert_allclose(counts / (rounds * per_round), p, atol=0.02)

    def test_sus_spread_is_minimal(self):
        # each index is picked floor or ceil of its expected count
        rng = np.random.default_rng(1)
        p = rank_scale(np.arange(20.0))
        for _ in range(200):
            c = np.bincount(stochastic_universal_sampling(p, 40, rng), minlength=20)
            assert np.all(np.abs(c - 40 * p) < 1 + 1e-9)

    def test_scale_and_select_returns_indices(self):
        pop = Population(np.zeros((5, 3)), np.arange(5.0))
        idx = scale_and_select(pop, 12, np.random.default_rng(0))
        assert idx.shape == (12,) and idx.min() >= 0 and idx.max() < 5


class TestOperators:
    def test_crossover_example(self):
        np.testing.assert_array_equal(crossover([1, 2, 3, 4], [5, 6, 7, 8], 2), [1, 2, 7, 8])

    @pytest.mark.parametrize("cut", [0, 4, -1])
    def test_crossover_cut_bounds(self, cut):
        with pytest.raises(ValueError):
            crossover([1, 2, 3, 4], [5, 6, 7, 8], cut)

    def test_crossover_length_mismatch(self):
        with pytest.raises(ValueError):
            crossover([1, 2], [1, 2, 3], 1)

    def test_mutate_zero_sigma_is_identity(self):
        g = np.array([0.1, -2.0, 3.5])
        np.testing.assert_array_equal(mutate(g, 0.0, np.random.default_rng(0)), g)

    def test_mutate_does_not_alias(self):
        g = np.zeros(4)
        out = mutate(g, 1.0, np.random.default_rng(0))
        assert not np.shares_memory(g, out) and g.tolist() == [0.0] * 4

    def test_mutate_deterministic(self):
        a = mutate(np.zeros(6), 0.3, np.random.default_rng(42))
        b = mutate(np.zeros(6), 0.3, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            mutate(np.zeros(2), -1.0, np.random.default_rng(0))


SMALL = GAConfig(population_size=20, max_generations=60, rng_seed=3)


class TestEvolve:
    def test_best_never_increases(self):
        net = init_network([1, 3, 1], ["tan_sigmoid", "linear"], 0)
        _, trace = evolve(net, LINE, SMALL)
        assert all(b <= a for a, b in zip(trace.best, trace.best[1:]))
        assert trace.generations_run == 60 and not trace.converged

    def test_returned_network_scores_best(self):
        net = init_network([1, 3, 1], ["tan_sigmoid", "linear"], 0)
        best, trace = evolve(net, LINE, SMALL)
        assert fitness(flatten(best), net, LINE) == trace.best_fitness

    def test_seeded_optimum_stops_at_generation_zero(self):
        best, trace = evolve(one_one(), LINE, SMALL, initial_seeds=[[2.0, 1.0]])
        assert trace.converged and trace.generations_run == 1
        assert flatten(best).tolist() == [2.0, 1.0]

    def test_seed_never_beaten_downwards(self):
        seed = [1.9, 1.1]
        _, trace = evolve(one_one(), LINE, SMALL, initial_seeds=[seed])
        assert trace.best[0] <= fitness(seed, one_one(), LINE)
        assert trace.best_fitness <= trace.best[0]

    def test_one_gene_toy_problem(self):
        # with every input at zero only the bias gene affects fitness
        data = Dataset([[0.0], [0.0]], [[0.7], [0.7]])
        config = GAConfig(population_size=30, max_generations=300, fitness_tolerance=1e-3, rng_seed=0)
        best, trace = evolve(one_one(0.0, 0.0), data, config)
        assert trace.converged
        assert forward(best, [0.0])[0] == pytest.approx(0.7, abs=1e-3)

    def test_linear_fit_improves_a_lot(self):
        config = GAConfig(population_size=40, max_generations=400, fitness_tolerance=1e-3, rng_seed=1)
        _, trace = evolve(one_one(), LINE, config)
        assert trace.best_fitness < 0.05 * trace.best[0]

    def test_deterministic(self):
        net = init_network([1, 3, 1], ["tan_sigmoid", "linear"], 0)
        a, ta = evolve(net, LINE, SMALL)
        b, tb = evolve(net, LINE, SMALL)
        assert a == b and ta.best == tb.best and ta.mean == tb.mean

    def test_population_size_preserved_with_all_crossover(self):
        config = GAConfig(population_size=7, elite_count=1, crossover_fraction=1.0, max_generations=5)
        _, trace = evolve(one_one(), LINE, config)
        assert trace.generations_run == 5

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            evolve(one_one(), LINE, SMALL, initial_seeds=[[1.0, 2.0, 3.0]])
        with pytest.raises(ValueError):
            evolve(one_one(), LINE, GAConfig(population_size=2), initial_seeds=[[0, 0]] * 3)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"population_size": 1},
            {"elite_count": 0},
            {"elite_count": 50},
            {"crossover_fraction": 1.5},
            {"mutation_sigma": 0},
            {"sigma_decay": 0},
            {"max_generations": 0},
            {"fitness_tolerance": 0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            GAConfig(**kwargs)
