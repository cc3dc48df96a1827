import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_int_matrix
from fastdsom.core import (
    VARIANTS,
    DsomConfig,
    Trainer,
    compute_D_full,
    quantization_error,
    s_from_partials,
    train,
)
from fastdsom.dissimilarity import build_from_vectors, generate_uniform_square
from fastdsom.topology import hex_grid, rect_grid

MEMORY_VARIANTS = ("memory", "fast")


def run_all(matrix, graph, **config):
    return {v: train(DsomConfig(variant=v, **config), matrix, graph) for v in VARIANTS}


def assert_all_same(results):
    ref = results["brute"]
    for v, r in results.items():
        assert np.array_equal(r.prototype_history, ref.prototype_history), v
        assert np.array_equal(r.assignments, ref.assignments), v
        assert r.quantization_error == ref.quantization_error, v


def test_five_variants_identical(square60):
    results = run_all(square60, hex_grid(3), epochs=30, seed=1)
    assert_all_same(results)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(9, 30), st.sampled_from([1, 2, 3]),
       st.sampled_from(["hex", "rect"]), st.integers(1, 10))
def test_cross_variant_identity_property(seed, n, side, layout, epochs):
    rng = np.random.default_rng(seed)
    matrix = random_int_matrix(n, rng, high=int(rng.choice([3, 20, 10**6])))
    graph = (hex_grid if layout == "hex" else rect_grid)(side)
    assert_all_same(run_all(matrix, graph, epochs=epochs, seed=seed % 1000))


def test_deterministic(square60):
    a = train(DsomConfig(epochs=15, seed=4), square60, hex_grid(3))
    b = train(DsomConfig(epochs=15, seed=4), square60, hex_grid(3))
    assert a.same_outcome(b) and a.stats == b.stats


@pytest.mark.parametrize("variant", VARIANTS)
def test_trainer_matches_train(square60, variant):
    cfg = DsomConfig(variant=variant, epochs=12, seed=2)
    direct = train(cfg, square60, rect_grid(3))
    stepped = Trainer(cfg, square60, rect_grid(3)).finish()
    assert direct.same_outcome(stepped)
    assert np.array_equal(direct.prototype_history, stepped.prototype_history)
    assert direct.stats == stepped.stats
    assert direct.quantization_error == stepped.quantization_error


def test_stats_shape(square60):
    results = run_all(square60, hex_grid(3), epochs=10, seed=3)
    n, m = 60, 9
    for v, r in results.items():
        assert [s.epoch for s in r.stats] == list(range(1, 11))
        assert r.stats[0].nb_switch == n
        for s in r.stats:
            assert 0 <= s.nb_switch <= n
            assert 1 <= s.candidates_evaluated <= n * m
    assert {s.strategy for s in results["brute"].stats} == {"none"}
    assert {s.strategy for s in results["partial"].stats} == {"full"}
    assert results["fast"].stats[0].strategy == "block"
    for s in results["fast"].stats[1:]:
        if s.nb_switch * 7 >= n:
            assert s.strategy == "block"
        else:
            assert s.strategy == "individual"
    partial_terms = n * m * m
    for fs, ps in zip(results["fast"].stats, results["partial"].stats):
        assert ps.terms_accumulated == partial_terms
        assert fs.terms_accumulated <= partial_terms


@pytest.mark.parametrize("variant", VARIANTS)
def test_partition_invariant(square60, variant):
    r = train(DsomConfig(variant=variant, epochs=8, seed=5), square60, hex_grid(3))
    assert r.assignments.shape == (60,)
    assert r.assignments.min() >= 0 and r.assignments.max() < 9
    assert len(set(r.prototypes.tolist())) <= 9


@pytest.mark.parametrize("variant", MEMORY_VARIANTS)
def test_D_consistent_every_epoch_integer(square60, variant):
    t = Trainer(DsomConfig(variant=variant, epochs=20, seed=6, ratio=3), square60, hex_grid(3))
    strategies = set()
    while not t.done:
        strategies.add(t.step().strategy)
        assert np.array_equal(t.D, compute_D_full(t.assignments, square60, 9))
    assert "individual" in strategies and "block" in strategies


@pytest.mark.parametrize("variant", MEMORY_VARIANTS)
def test_D_consistent_every_epoch_real(variant):
    matrix = build_from_vectors(generate_uniform_square(80, 9))
    assert matrix.kind == "real"
    t = Trainer(DsomConfig(variant=variant, epochs=40, seed=1), matrix, hex_grid(3))
    while not t.done:
        t.step()
        expected = compute_D_full(t.assignments, matrix, 9)
        np.testing.assert_allclose(t.D, expected, rtol=1e-9, atol=1e-9 * np.abs(expected).max())


def test_partial_and_earlystop_agree_on_real_data():
    matrix = build_from_vectors(generate_uniform_square(70, 2))
    a = train(DsomConfig(variant="partial", epochs=25, seed=3), matrix, hex_grid(3))
    b = train(DsomConfig(variant="earlystop", epochs=25, seed=3), matrix, hex_grid(3))
    assert np.array_equal(a.prototype_history, b.prototype_history)


@pytest.mark.parametrize("frozen", [False, True])
def test_per_model_descent(square60, frozen):
    sigma = dict(sigma_initial=1.0, sigma_final=1.0) if frozen else {}
    t = Trainer(DsomConfig(variant="fast", epochs=25, seed=7, **sigma), square60, hex_grid(3))
    while not t.done:
        before = t.prototypes.copy()
        t.step()
        h = t.neighborhood()
        for j in range(9):
            assert s_from_partials(j, t.prototypes[j], t.D, h) <= s_from_partials(j, before[j], t.D, h)


def test_singletons_have_zero_error():
    # training with N == M can collapse several models onto one prototype, so
    # the zero-error case is checked on an explicit singleton configuration
    matrix = random_int_matrix(9, np.random.default_rng(0), low=1, high=100)
    assert quantization_error(np.arange(9), np.arange(9), matrix) == 0.0
    r = train(DsomConfig(epochs=30, seed=0), matrix, hex_grid(3))
    expected = sum(matrix.values[i, r.prototypes[c]] for i, c in enumerate(r.assignments)) / 9
    assert r.quantization_error == expected
    if np.array_equal(r.prototypes[r.assignments], np.arange(9)):
        assert r.quantization_error == 0.0


def test_single_epoch(square60):
    r = train(DsomConfig(epochs=1, seed=0), square60, hex_grid(3))
    assert len(r.stats) == 1 and r.prototype_history.shape == (2, 9)


class TestErrors:
    def test_too_many_models(self):
        matrix = random_int_matrix(5, np.random.default_rng(0))
        with pytest.raises(ValueError, match="too high"):
            train(DsomConfig(epochs=2), matrix, hex_grid(3))

    @pytest.mark.parametrize("kw", [dict(variant="turbo"), dict(epochs=0), dict(ratio=0.5)])
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            DsomConfig(**kw)

    def test_step_past_end(self, square60):
        t = Trainer(DsomConfig(epochs=1), square60, hex_grid(2))
        t.step()
        with pytest.raises(RuntimeError):
            t.step()
