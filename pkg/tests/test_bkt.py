"""Tests for the two-state HMM knowledge-tracing model.

Forward-backward and online predictions are validated against a brute-force
enumeration over all hidden-state paths; EM is checked for monotone
likelihood ascent and for recovering planted parameters from sampled data.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ktsynth.bkt import (
    DEFAULT_INIT,
    POOLED_KEY,
    BktFit,
    BktParams,
    SkillModel,
    binarize,
    em_fit,
    fit_dataset,
    fit_from_json,
    fit_skill,
    fit_to_json,
    forward_backward,
    predict_dataset,
    predict_sequence,
    skill_sequences,
    total_log_likelihood,
)
from ktsynth.dataset import Dataset, LearningPath, PathStep
from ktsynth.seeding import derive_rng

from oracles import hmm_enumerate, hmm_next_correct_probability


def _random_params(rng, lo=0.05, hi=0.9) -> BktParams:
    vals = rng.uniform(lo, hi, size=5)
    return BktParams(*vals.tolist())


def _sample_sequences(params: BktParams, n: int, length: int, rng):
    """Draw observation sequences from the generative model itself."""
    known = rng.random(n) < params.prior
    obs = np.empty((n, length), dtype=np.int64)
    for t in range(length):
        p_correct = np.where(known, 1.0 - params.slip, params.guess)
        obs[:, t] = rng.random(n) < p_correct
        p_stay = np.where(known, 1.0 - params.forget, params.learn)
        known = rng.random(n) < p_stay
    return [row.tolist() for row in obs]


def _path(student_id, grades, skills=None):
    skills = skills or [None] * len(grades)
    steps = tuple(
        PathStep(f"e{i}", skill, float(g))
        for i, (skill, g) in enumerate(zip(skills, grades))
    )
    return LearningPath(student_id, steps)


# ---------------------------------------------------------------------------
# Binarization and parameter validation
# ---------------------------------------------------------------------------

def test_binarize_threshold():
    assert binarize(77.0) == 1
    assert binarize(33.33) == 0
    # The cut is strict, so exactly half marks count as incorrect.
    assert binarize(50.0) == 0
    assert binarize(50.0 + 1e-9) == 1
    assert binarize(0.0) == 0
    assert binarize(100.0) == 1


def test_binarize_rejects_out_of_range():
    with pytest.raises(ValueError):
        binarize(-0.5)
    with pytest.raises(ValueError):
        binarize(100.5)


def test_params_validation():
    with pytest.raises(ValueError):
        BktParams(prior=1.2, learn=0.1, forget=0.1, guess=0.1, slip=0.1)
    with pytest.raises(ValueError):
        BktParams(prior=0.5, learn=-0.1, forget=0.1, guess=0.1, slip=0.1)
    # Closed endpoints are legal probabilities.
    BktParams(prior=0.0, learn=1.0, forget=0.0, guess=0.0, slip=1.0)


def test_matrices_are_row_stochastic():
    p = BktParams(prior=0.3, learn=0.2, forget=0.05, guess=0.25, slip=0.1)
    assert np.allclose(p.transition_matrix().sum(axis=1), 1.0)
    assert np.allclose(p.emission_matrix().sum(axis=1), 1.0)


# ---------------------------------------------------------------------------
# Forward-backward against exhaustive enumeration
# ---------------------------------------------------------------------------

def test_forward_backward_single_correct_no_noise():
    # With no noise, observing a correct answer proves the student knew it,
    # and the likelihood is exactly the prior mass on the known state.
    p = BktParams(prior=0.3, learn=0.0, forget=0.0, guess=0.0, slip=0.0)
    ll, posterior = forward_backward(p, [1])
    assert ll == pytest.approx(math.log(0.3), abs=1e-12)
    assert posterior[0] == pytest.approx(1.0, abs=1e-12)


def test_forward_backward_known_forever():
    p = BktParams(prior=1.0, learn=0.0, forget=0.0, guess=0.2, slip=0.3)
    ll, posterior = forward_backward(p, [1, 0, 1, 1, 0])
    assert np.allclose(posterior, 1.0, atol=1e-12)
    # Every observation is emitted from the known state.
    assert ll == pytest.approx(3 * math.log(0.7) + 2 * math.log(0.3), abs=1e-12)


def test_forward_backward_matches_enumeration():
    rng = derive_rng(77, "fb-cases")
    for _ in range(60):
        p = _random_params(rng)
        length = int(rng.integers(1, 9))
        obs = rng.integers(0, 2, size=length).tolist()
        ll, posterior = forward_backward(p, obs)
        ll_ref, post_ref = hmm_enumerate(
            p.prior, p.learn, p.forget, p.guess, p.slip, obs
        )
        assert ll == pytest.approx(ll_ref, abs=1e-9)
        assert np.allclose(posterior, post_ref, atol=1e-9)


def test_forward_backward_rejects_bad_observations():
    p = DEFAULT_INIT
    with pytest.raises(ValueError):
        forward_backward(p, [])
    with pytest.raises(ValueError):
        forward_backward(p, [0, 2, 1])


def test_total_log_likelihood_sums_sequences():
    rng = derive_rng(78, "total-ll")
    p = _random_params(rng)
    seqs = [rng.integers(0, 2, size=int(rng.integers(1, 7))).tolist() for _ in range(5)]
    expected = sum(forward_backward(p, s)[0] for s in seqs)
    assert total_log_likelihood(p, seqs) == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------------------
# Online predictions
# ---------------------------------------------------------------------------

def test_predict_first_step_closed_form():
    p = BktParams(prior=0.6, learn=0.1, forget=0.0, guess=0.2, slip=0.1)
    preds = predict_sequence(p, [1, 0, 1])
    # 0.6 * 0.9 + 0.4 * 0.2
    assert preds[0] == pytest.approx(0.62, abs=1e-12)


def test_predict_learns_in_one_step():
    # With learn=1 and forget=0 the student is certainly in the known state
    # from the second attempt on, regardless of what was observed.
    p = BktParams(prior=0.25, learn=1.0, forget=0.0, guess=0.3, slip=0.1)
    preds = predict_sequence(p, [0, 0, 1, 0, 1])
    assert np.allclose(preds[1:], 1.0 - p.slip, atol=1e-12)


def test_predictions_match_enumeration_one_step_ahead():
    # The filtered prediction at step t must equal the conditional
    # probability of a correct answer given the observed prefix.
    rng = derive_rng(79, "pred-cases")
    for _ in range(40):
        p = _random_params(rng)
        length = int(rng.integers(1, 8))
        obs = rng.integers(0, 2, size=length).tolist()
        preds = predict_sequence(p, obs)
        for t in range(length):
            ref = hmm_next_correct_probability(
                p.prior, p.learn, p.forget, p.guess, p.slip, obs[:t]
            )
            assert preds[t] == pytest.approx(ref, abs=1e-9)


@given(
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
    st.lists(st.integers(0, 1), min_size=1, max_size=12),
)
def test_predictions_bounded_by_emission_probs(prior, learn, forget, guess, slip, obs):
    # Each prediction is a convex mix of guess and 1 - slip.
    p = BktParams(prior, learn, forget, guess, slip)
    preds = predict_sequence(p, obs)
    lo = min(p.guess, 1.0 - p.slip) - 1e-12
    hi = max(p.guess, 1.0 - p.slip) + 1e-12
    assert np.all(preds >= lo) and np.all(preds <= hi)


# ---------------------------------------------------------------------------
# EM fitting
# ---------------------------------------------------------------------------

def test_em_history_is_monotone():
    rng = derive_rng(80, "em-mono")
    for _ in range(25):
        true = _random_params(rng, lo=0.1, hi=0.8)
        seqs = _sample_sequences(true, n=int(rng.integers(5, 30)),
                                 length=int(rng.integers(2, 12)), rng=rng)
        init = _random_params(rng, lo=0.1, hi=0.8)
        model = em_fit(seqs, init, max_iters=40, tol=1e-9)
        hist = np.array(model.ll_history)
        assert np.all(np.diff(hist) >= -1e-10)


def test_em_improves_on_init():
    rng = derive_rng(81, "em-improve")
    true = BktParams(prior=0.3, learn=0.2, forget=0.05, guess=0.15, slip=0.1)
    seqs = _sample_sequences(true, n=200, length=10, rng=rng)
    model = em_fit(seqs, DEFAULT_INIT, max_iters=50, tol=1e-8)
    assert model.ll_history[-1] > model.ll_history[0]
    assert model.n_train_sequences == 200


def test_em_validation():
    with pytest.raises(ValueError):
        em_fit([[1, 0]], max_iters=0)
    with pytest.raises(ValueError):
        em_fit([[1, 0]], tol=0.0)
    with pytest.raises(ValueError):
        em_fit([])
    with pytest.raises(ValueError):
        em_fit([[1, 0], []])


def test_em_caps_guess_and_slip():
    # A block of all-correct sequences drives the uncapped guess estimate
    # toward 1; the reported parameters must respect the 0.5 cap and still
    # predict near-certain success.
    seqs = [[1] * 10 for _ in range(20)]
    model = em_fit(seqs, DEFAULT_INIT, max_iters=100, tol=1e-9)
    assert model.params.guess <= 0.5
    assert model.params.slip <= 0.5
    preds = predict_sequence(model.params, [1] * 10)
    assert np.all(preds[1:] > 0.9)


@pytest.mark.slow
def test_em_recovers_planted_parameters():
    true = BktParams(prior=0.2, learn=0.15, forget=0.05, guess=0.2, slip=0.1)
    rng = derive_rng(82, "em-planted")
    seqs = _sample_sequences(true, n=5000, length=20, rng=rng)
    model = fit_skill(seqs, "planted", seed=5, max_iters=200, tol=1e-7)
    for name, value in model.params.as_dict().items():
        assert abs(value - getattr(true, name)) < 0.05, (name, value)


# ---------------------------------------------------------------------------
# Dataset-level fitting and prediction
# ---------------------------------------------------------------------------

def _two_skill_dataset(n_students=40, length=8, seed=9):
    rng = derive_rng(seed, "bkt-ds")
    paths = []
    for i in range(n_students):
        skills = [("a" if rng.random() < 0.5 else "b") for _ in range(length)]
        grades = np.where(rng.random(length) < 0.7, 80.0, 20.0)
        paths.append(_path(f"s{i:03d}", grades.tolist(), skills))
    return Dataset.from_paths(paths, "real")


def test_skill_sequences_grouping():
    ds = Dataset.from_paths(
        [
            _path("s0", [80, 20, 90], ["a", "b", "a"]),
            _path("s1", [10, 70], ["b", "b"]),
        ],
        "real",
    )
    groups = skill_sequences(ds)
    assert groups == {"a": [[1, 1]], "b": [[0], [0, 1]]}


def test_fit_dataset_has_per_skill_and_pooled_models():
    ds = _two_skill_dataset()
    fit = fit_dataset(ds, seed=3, max_iters=30, restarts=1)
    assert set(fit.skills) == {"a", "b"}
    assert fit.pooled.skill_id == POOLED_KEY
    assert fit.model_for("a").skill_id == "a"
    # Unseen skills fall back to the pooled model.
    assert fit.model_for("zzz").skill_id == POOLED_KEY


def test_fit_dataset_rejects_empty():
    with pytest.raises(ValueError):
        fit_dataset(Dataset.from_paths([], "real"), seed=0)


def test_predict_dataset_alignment():
    ds = _two_skill_dataset(n_students=6)
    fit = fit_dataset(ds, seed=3, max_iters=20, restarts=1)
    pairs = predict_dataset(fit, ds)
    expected_pairs = sum(len(p) - 1 for p in ds.paths)
    assert pairs.shape == (expected_pairs, 2)
    # Actual column is grades/100 for steps 1.. of each path in id order.
    actuals = np.concatenate(
        [p.grades[1:] / 100.0 for p in sorted(ds.paths, key=lambda q: q.student_id)]
    )
    assert np.array_equal(pairs[:, 1], actuals)
    assert np.all((pairs[:, 0] >= 0.0) & (pairs[:, 0] <= 1.0))


def test_predict_dataset_uses_pooled_for_unknown_skill():
    strong = SkillModel(
        skill_id="a",
        params=BktParams(prior=0.9, learn=0.0, forget=0.0, guess=0.0, slip=0.0),
        n_train_sequences=1,
        log_likelihood=0.0,
    )
    pooled = SkillModel(
        skill_id=POOLED_KEY,
        params=BktParams(prior=0.5, learn=0.0, forget=0.0, guess=0.25, slip=0.25),
        n_train_sequences=1,
        log_likelihood=0.0,
    )
    fit = BktFit(skills={"a": strong.params and strong}, pooled=pooled)
    test = Dataset.from_paths([_path("s0", [60, 60], ["new", "new"])], "real")
    pairs = predict_dataset(fit, test)
    # First pooled prediction after one correct observation.
    p = pooled.params
    p_known = p.prior * (1 - p.slip) / (
        p.prior * (1 - p.slip) + (1 - p.prior) * p.guess
    )
    expected = p_known * (1 - p.slip) + (1 - p_known) * p.guess
    assert pairs[0, 0] == pytest.approx(expected, abs=1e-12)


def test_predict_dataset_skips_short_paths_and_rejects_empty():
    fit = BktFit(
        skills={},
        pooled=SkillModel(POOLED_KEY, DEFAULT_INIT, 0, 0.0),
    )
    with pytest.raises(ValueError):
        predict_dataset(fit, Dataset.from_paths([], "real"))
    with pytest.raises(ValueError):
        predict_dataset(fit, Dataset.from_paths([_path("s0", [50])], "real"))
    test = Dataset.from_paths([_path("s0", [50]), _path("s1", [40, 60])], "real")
    assert predict_dataset(fit, test).shape == (1, 2)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def test_fit_json_round_trip():
    ds = _two_skill_dataset(n_students=10)
    fit = fit_dataset(ds, seed=3, max_iters=20, restarts=1)
    text = fit_to_json(fit)
    loaded = fit_from_json(text)
    assert set(loaded.skills) == set(fit.skills)
    for key in fit.skills:
        assert loaded.skills[key].params == fit.skills[key].params
        assert loaded.skills[key].log_likelihood == fit.skills[key].log_likelihood
    assert loaded.pooled.params == fit.pooled.params
    # Identical inputs produce byte-identical documents.
    assert fit_to_json(loaded) == text
    json.loads(text)
