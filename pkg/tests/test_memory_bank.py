import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from mint_tta.autodiff import Tape, backward, ops
from mint_tta.errors import ConfigError
from mint_tta.memory import (
    BANK_KEYS_ID,
    BANK_VALUES_ID,
    LayerSelection,
    MemoryPromptBank,
    RetrievalResult,
    compose,
    init_bank,
    retrieve,
    retrieve_views,
    selection_weights,
    similarity_reward,
    similarity_rewards,
    similarity_scores,
)


def brute_force_top(scores: np.ndarray, count: int) -> list[int]:
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:count]


def plain_cosine(q: np.ndarray, k: np.ndarray) -> float:
    return float(q @ k / (np.linalg.norm(q) * np.linalg.norm(k) + 1e-12))


def test_init_bank_is_seeded():
    bank = init_bank(8, 2, 4, seed=5)
    assert bank.keys.shape == (8, 4)
    assert bank.values.shape == (8, 2, 4)
    assert_array_equal(bank.keys.value, init_bank(8, 2, 4, seed=5).keys.value)
    assert not np.array_equal(bank.keys.value, init_bank(8, 2, 4, seed=6).keys.value)


def test_init_bank_draws_standard_normal_entries():
    bank = init_bank(512, 2, 64, seed=0)
    for array in (bank.keys.value, bank.values.value):
        assert abs(array.mean()) < 5 / np.sqrt(array.size)
        assert 0.8 <= array.var() <= 1.2


def test_init_bank_rejects_empty_extents():
    with pytest.raises(ConfigError):
        init_bank(0, 2, 4, seed=0)


def test_bank_shapes_must_pair():
    bank = init_bank(4, 2, 3, seed=0)
    with pytest.raises(ConfigError):
        MemoryPromptBank(bank.keys, bank.values.with_value(np.zeros((5, 2, 3))))


def test_retrieve_matches_brute_force_oracle():
    rng = np.random.default_rng(1)

    for trial in range(1000):
        size = int(rng.integers(1, 65))
        width = int(rng.integers(2, 9))
        bank = init_bank(size, 1, width, seed=trial)
        keys = bank.keys.value.copy()

        if trial % 4 == 0 and size > 2:
            # exact duplicates force ties
            duplicates = rng.choice(size, size // 2, replace=False)
            keys[duplicates] = keys[duplicates[0]]
            bank = bank.with_arrays(keys=keys)

        query = rng.standard_normal(width)
        count = int(rng.integers(1, size + 1))
        selection = retrieve(bank, query, count)

        scores = similarity_scores(bank, query[None])[0]
        assert_allclose(scores, [plain_cosine(query, key) for key in keys], atol=1e-12)
        assert list(selection.indices) == brute_force_top(scores, count)


def test_ties_resolve_to_lower_index():
    bank = init_bank(6, 1, 3, seed=0)
    keys = np.tile(np.array([1.0, 0.0, 0.0]), (6, 1))
    bank = bank.with_arrays(keys=keys)
    assert retrieve(bank, np.array([1.0, 2.0, 3.0]), 3).indices == (0, 1, 2)


def test_retrieve_rejects_bad_selection_size():
    bank = init_bank(4, 1, 3, seed=0)
    with pytest.raises(ConfigError):
        retrieve(bank, np.ones(3), 0)
    with pytest.raises(ConfigError):
        retrieve(bank, np.ones(3), 5)


def test_retrieve_views_matches_single_retrieval(rng):
    bank = init_bank(10, 2, 4, seed=2)
    queries = rng.standard_normal((3, 2, 4))
    results = retrieve_views(bank, queries, 3)

    for view, result in enumerate(results):
        for layer, selection in enumerate(result.layers):
            assert selection.indices == retrieve(bank, queries[view, layer], 3).indices


def test_compose_matches_set_union_average():
    rng = np.random.default_rng(2)

    for trial in range(200):
        size = int(rng.integers(1, 33))
        bank = init_bank(size, int(rng.integers(1, 4)), 4, seed=trial)
        layers = int(rng.integers(1, 5))
        count = int(rng.integers(1, size + 1))
        selections = [LayerSelection(tuple(rng.choice(size, count, replace=False)), ()) for _ in range(layers)]

        union = sorted({index for selection in selections for index in selection.indices})
        expected = bank.values.value[union].mean(axis=0)

        prompt = compose(selections, bank)
        assert_allclose(prompt.prompt.data, expected, atol=1e-12)
        assert prompt.indices == tuple(union)

        shuffled = [selections[i] for i in rng.permutation(layers)]
        assert_array_equal(compose(shuffled, bank).prompt.data, prompt.prompt.data)


def test_multiset_union_counts_repeats():
    bank = init_bank(3, 1, 2, seed=0)
    selections = [LayerSelection((0, 1), ()), LayerSelection((0, 2), ())]
    values = bank.values.value

    prompt = compose(selections, bank, "multiset").prompt.data
    assert_allclose(prompt, (2 * values[0] + values[1] + values[2]) / 4, atol=1e-12)


def test_selection_weights_rows_sum_to_one():
    retrievals = [RetrievalResult((LayerSelection((1, 3), ()), LayerSelection((3,), ())))]
    weights = selection_weights(retrievals, 5)
    assert_allclose(weights, [[0.0, 0.5, 0.0, 0.5, 0.0]])


def test_reward_gradients_reach_selected_keys_only(rng):
    bank = init_bank(6, 2, 4, seed=3)
    queries = rng.standard_normal((2, 2, 4))
    retrievals = retrieve_views(bank, queries, 2)
    selected = {index for result in retrievals for index in result.union}

    with Tape() as tape:
        rewards = similarity_rewards(queries, bank.keys, retrievals)
        gradients = backward(ops.sum(rewards), tape)

    assert gradients.keys() == {BANK_KEYS_ID}
    for index in range(bank.size):
        if index in selected:
            assert np.any(gradients[BANK_KEYS_ID][index] != 0)
        else:
            assert_array_equal(gradients[BANK_KEYS_ID][index], 0.0)


def test_compose_gradients_reach_averaged_values_only():
    bank = init_bank(4, 1, 2, seed=1)
    selections = [LayerSelection((2,), ()), LayerSelection((0,), ())]

    with Tape() as tape:
        gradients = backward(ops.sum(compose(selections, bank).prompt), tape)

    assert gradients.keys() == {BANK_VALUES_ID}
    assert_allclose(gradients[BANK_VALUES_ID][[0, 2]], 0.5)
    assert_array_equal(gradients[BANK_VALUES_ID][[1, 3]], 0.0)


def test_similarity_reward_sums_selected_cosines(rng):
    bank = init_bank(5, 1, 3, seed=4)
    queries = [rng.standard_normal(3), rng.standard_normal(3)]
    selections = RetrievalResult(tuple(retrieve(bank, q, 2) for q in queries))

    expected = sum(
        plain_cosine(q, bank.keys.value[k]) for q, layer in zip(queries, selections.layers) for k in layer.indices
    )
    assert similarity_reward(queries, bank, selections).item() == pytest.approx(expected, abs=1e-12)


def test_bank_snapshot(tmp_path):
    bank = init_bank(4, 2, 3, seed=7)
    bank.save(tmp_path / "bank.mtn").unwrap()
    loaded = MemoryPromptBank.load(tmp_path / "bank.mtn").unwrap()
    assert_array_equal(loaded.keys.value, bank.keys.value)
    assert_array_equal(loaded.values.value, bank.values.value)
