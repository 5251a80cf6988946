"""Bayesian knowledge tracing: a two-state HMM fitted per skill by EM.

States are unknown/known with learn and forget transitions; emissions are
binarized grades through guess and slip probabilities. Fitting is Baum-Welch
with scaled forward-backward recursions (vectorized over padded sequence
batches) and an identifiability cap guess, slip <= 0.5 applied after
convergence. Predictions are online filtered P(correct), comparable with the
recurrent model on the same test pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset
from .seeding import derive_rng

_TINY = 1e-300

DEFAULT_INIT_FIELDS = (0.4, 0.2, 0.1, 0.2, 0.1)
DEFAULT_SKILL = "default"
POOLED_KEY = "__pooled__"


class EmError(RuntimeError):
    """A Baum-Welch update produced NaN."""

    def __init__(self, iteration: int, message: str):
        self.iteration = iteration
        super().__init__(f"EM iteration {iteration}: {message}")


@dataclass(frozen=True)
class BktParams:
    prior: float
    learn: float
    forget: float
    guess: float
    slip: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be a probability, got {value}")

    def as_dict(self) -> dict:
        return {
            "prior": self.prior,
            "learn": self.learn,
            "forget": self.forget,
            "guess": self.guess,
            "slip": self.slip,
        }

    def transition_matrix(self) -> np.ndarray:
        return np.array(
            [[1.0 - self.learn, self.learn], [self.forget, 1.0 - self.forget]]
        )

    def emission_matrix(self) -> np.ndarray:
        """Rows: state (unknown, known); columns: observation (0, 1)."""
        return np.array(
            [[1.0 - self.guess, self.guess], [self.slip, 1.0 - self.slip]]
        )


DEFAULT_INIT = BktParams(*DEFAULT_INIT_FIELDS)


@dataclass(frozen=True)
class SkillModel:
    skill_id: str
    params: BktParams
    n_train_sequences: int
    log_likelihood: float
    ll_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class BktFit:
    """Per-skill models plus a pooled fallback for skills unseen in training."""

    skills: dict
    pooled: SkillModel

    def model_for(self, skill_id) -> SkillModel:
        key = DEFAULT_SKILL if skill_id is None else str(skill_id)
        return self.skills.get(key, self.pooled)


def binarize(grade: float) -> int:
    """1 when the normalized grade is strictly above 0.5, else 0."""
    if not 0.0 <= grade <= 100.0:
        raise ValueError(f"grade must be in [0,100], got {grade}")
    return 1 if grade / 100.0 > 0.5 else 0


def forward_backward(params: BktParams, obs: Sequence[int]) -> tuple[float, np.ndarray]:
    """Scaled forward-backward over one binary sequence.

    Returns the sequence log-likelihood and the smoothed posterior
    P(known at t | all observations) per step.
    """
    o = _check_obs(obs)
    n = o.size
    a = params.transition_matrix()
    e = params.emission_matrix()
    pi = np.array([1.0 - params.prior, params.prior])

    alphas = np.empty((n, 2))
    scales = np.empty(n)
    alpha = pi * e[:, o[0]]
    scales[0] = max(alpha.sum(), _TINY)
    alphas[0] = alpha / scales[0]
    for t in range(1, n):
        alpha = (alphas[t - 1] @ a) * e[:, o[t]]
        scales[t] = max(alpha.sum(), _TINY)
        alphas[t] = alpha / scales[t]
    ll = float(np.sum(np.log(scales)))

    betas = np.empty((n, 2))
    betas[n - 1] = 1.0
    for t in range(n - 2, -1, -1):
        betas[t] = (a @ (e[:, o[t + 1]] * betas[t + 1])) / scales[t + 1]
    gamma = alphas * betas
    gamma /= np.maximum(gamma.sum(axis=1, keepdims=True), _TINY)
    return ll, gamma[:, 1]


def predict_sequence(params: BktParams, obs: Sequence[int]) -> np.ndarray:
    """Online filtered P(correct) per step, using only earlier observations."""
    o = _check_obs(obs)
    preds = np.empty(o.size)
    p_known = params.prior
    for t in range(o.size):
        preds[t] = p_known * (1.0 - params.slip) + (1.0 - p_known) * params.guess
        p_known = _observe_and_propagate(params, p_known, int(o[t]))
    return preds


def _observe_and_propagate(params: BktParams, p_known: float, obs: int) -> float:
    if obs == 1:
        num = p_known * (1.0 - params.slip)
        denom = num + (1.0 - p_known) * params.guess
    else:
        num = p_known * params.slip
        denom = num + (1.0 - p_known) * (1.0 - params.guess)
    post = num / max(denom, _TINY)
    return post * (1.0 - params.forget) + (1.0 - post) * params.learn


def _check_obs(obs) -> np.ndarray:
    o = np.asarray(obs, dtype=np.int64)
    if o.size < 1:
        raise ValueError("observation sequence is empty")
    if not np.all((o == 0) | (o == 1)):
        raise ValueError("observations must be binary")
    return o


# ---------------------------------------------------------------------------
# Baum-Welch over a padded batch of sequences
# ---------------------------------------------------------------------------

def _pad_sequences(sequences: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    if lengths.size == 0 or np.any(lengths == 0):
        raise ValueError("need at least one non-empty sequence")
    t_max = int(lengths.max())
    obs = np.zeros((lengths.size, t_max), dtype=np.int64)
    for i, s in enumerate(sequences):
        row = _check_obs(s)
        obs[i, : row.size] = row
    return obs, lengths


def _em_step(obs, lengths, params: BktParams):
    """One E step plus Baum-Welch update; returns (ll at params, new params)."""
    n, t_max = obs.shape
    a = params.transition_matrix()
    e = params.emission_matrix()
    pi = np.array([1.0 - params.prior, params.prior])
    valid = np.arange(t_max)[None, :] < lengths[:, None]

    # emissions per (sequence, step, state); padded steps emit 1 so they are
    # transparent to the recursions
    b = np.where(valid[:, :, None], e.T[obs], 1.0)

    alphas = np.empty((t_max, n, 2))
    scales = np.ones((n, t_max))
    alpha = pi[None, :] * b[:, 0]
    s0 = np.maximum(alpha.sum(axis=1, keepdims=True), _TINY)
    alphas[0] = alpha / s0
    scales[:, 0] = s0[:, 0]
    for t in range(1, t_max):
        cand = (alphas[t - 1] @ a) * b[:, t]
        st = np.maximum(cand.sum(axis=1, keepdims=True), _TINY)
        cand = cand / st
        live = valid[:, t][:, None]
        alphas[t] = np.where(live, cand, alphas[t - 1])
        scales[:, t] = np.where(valid[:, t], st[:, 0], 1.0)
    ll = float(np.sum(np.log(scales)))

    betas = np.empty((t_max, n, 2))
    betas[t_max - 1] = 1.0
    for t in range(t_max - 2, -1, -1):
        nb = ((b[:, t + 1] * betas[t + 1]) @ a.T) / scales[:, t + 1][:, None]
        inner = t < (lengths - 1)  # recursion applies below each final step
        betas[t] = np.where(inner[:, None], nb, 1.0)

    gamma = alphas * betas  # [T, N, 2]
    gamma = gamma / np.maximum(gamma.sum(axis=2, keepdims=True), _TINY)
    gamma = np.where(valid.T[:, :, None], gamma, 0.0)

    trans_mask = (np.arange(t_max - 1)[:, None] < (lengths - 1)[None, :])  # [T-1, N]
    # xi[t,n,i,j] = alpha_t[i] A[i,j] b_{t+1}[j] beta_{t+1}[j] / c_{t+1}
    contrib = (b[:, 1:] * np.moveaxis(betas[1:], 0, 1)) / scales[:, 1:][:, :, None]
    contrib = np.moveaxis(contrib, 0, 1)  # [T-1, N, 2] target-state factor
    xi = alphas[:-1][:, :, :, None] * a[None, None, :, :] * contrib[:, :, None, :]
    xi = np.where(trans_mask[:, :, None, None], xi, 0.0)

    gamma_trans = np.where(trans_mask[:, :, None], gamma[:-1], 0.0)
    denom_state = gamma_trans.sum(axis=(0, 1))  # expected visits with outgoing edge
    num_trans = xi.sum(axis=(0, 1))

    old = params.as_dict()
    learn = _safe_div(num_trans[0, 1], denom_state[0], old["learn"])
    forget = _safe_div(num_trans[1, 0], denom_state[1], old["forget"])
    prior = float(np.mean(gamma[0, :, 1]))

    obs_f = np.where(valid, obs, 0).T[:, :, None]  # [T, N, 1]
    state_mass = gamma.sum(axis=(0, 1))  # [2]
    correct_mass = (gamma * obs_f).sum(axis=(0, 1))
    guess = _safe_div(correct_mass[0], state_mass[0], old["guess"])
    slip = _safe_div(state_mass[1] - correct_mass[1], state_mass[1], old["slip"])

    new = BktParams(
        prior=_clip01(prior), learn=_clip01(learn), forget=_clip01(forget),
        guess=_clip01(guess), slip=_clip01(slip),
    )
    return ll, new


def _safe_div(num: float, den: float, fallback: float) -> float:
    if den <= _TINY:
        return fallback
    return float(num / den)


def _clip01(v: float) -> float:
    return float(min(max(v, 0.0), 1.0))


def total_log_likelihood(params: BktParams, sequences: Sequence[Sequence[int]]) -> float:
    obs, lengths = _pad_sequences(sequences)
    ll, _ = _em_step(obs, lengths, params)
    return ll


def em_fit(
    sequences: Sequence[Sequence[int]],
    init: BktParams = DEFAULT_INIT,
    max_iters: int = 100,
    tol: float = 1e-6,
    skill_id: str = DEFAULT_SKILL,
) -> SkillModel:
    """Baum-Welch from one starting point.

    The recorded ll_history holds the total log-likelihood of each visited
    parameter vector and is non-decreasing. After convergence guess and slip
    are capped at 0.5 and the reported log_likelihood is re-evaluated at the
    capped parameters (the history is left untouched).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    obs, lengths = _pad_sequences(sequences)

    params = init
    history: list[float] = []
    for iteration in range(max_iters):
        ll, new_params = _em_step(obs, lengths, params)
        if any(np.isnan(v) for v in new_params.as_dict().values()):
            raise EmError(iteration, f"NaN parameter update from {params}")
        history.append(ll)
        if len(history) >= 2 and history[-1] - history[-2] < tol:
            break
        params = new_params
    else:
        final_ll, _ = _em_step(obs, lengths, params)
        history.append(final_ll)

    capped = replace(
        params, guess=min(params.guess, 0.5), slip=min(params.slip, 0.5)
    )
    final_ll = history[-1]
    if capped != params:
        final_ll, _ = _em_step(obs, lengths, capped)
    return SkillModel(
        skill_id=skill_id,
        params=capped,
        n_train_sequences=len(sequences),
        log_likelihood=final_ll,
        ll_history=tuple(history),
    )


def _jittered_inits(seed: int, skill_id: str, n: int) -> list[BktParams]:
    rng = derive_rng(seed, "bkt-init", skill_id)
    inits = [DEFAULT_INIT]
    base = np.array(DEFAULT_INIT_FIELDS)
    for _ in range(n):
        vals = np.clip(base + rng.uniform(-0.15, 0.15, size=5), 0.02, 0.7)
        inits.append(BktParams(*vals.tolist()))
    return inits


def fit_skill(
    sequences: Sequence[Sequence[int]],
    skill_id: str,
    seed: int,
    max_iters: int = 100,
    tol: float = 1e-6,
    restarts: int = 3,
) -> SkillModel:
    """Default init plus jittered restarts; keeps the best final likelihood."""
    best = None
    for init in _jittered_inits(seed, skill_id, restarts):
        model = em_fit(sequences, init, max_iters=max_iters, tol=tol, skill_id=skill_id)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def skill_sequences(ds: Dataset) -> dict:
    """Per-skill binarized subsequences, one per (path, skill) pair."""
    out: dict[str, list[list[int]]] = {}
    for p in sorted(ds.paths, key=lambda q: str(q.student_id)):
        per_skill: dict[str, list[int]] = {}
        for step in p.steps:
            key = DEFAULT_SKILL if step.skill_id is None else str(step.skill_id)
            per_skill.setdefault(key, []).append(binarize(step.grade))
        for key, seq in per_skill.items():
            out.setdefault(key, []).append(seq)
    return out


def fit_dataset(
    ds: Dataset,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    restarts: int = 3,
) -> BktFit:
    """One HMM per skill plus a pooled fallback over whole binarized paths."""
    if ds.n_students == 0:
        raise ValueError("empty training dataset")
    groups = skill_sequences(ds)
    skills = {
        key: fit_skill(seqs, key, seed, max_iters=max_iters, tol=tol, restarts=restarts)
        for key, seqs in sorted(groups.items())
    }
    pooled_seqs = [
        [binarize(s.grade) for s in p.steps]
        for p in sorted(ds.paths, key=lambda q: str(q.student_id))
    ]
    pooled = fit_skill(
        pooled_seqs, POOLED_KEY, seed, max_iters=max_iters, tol=tol, restarts=restarts
    )
    return BktFit(skills=skills, pooled=pooled)


def predict_dataset(fit: BktFit, test_data: Dataset) -> np.ndarray:
    """[n_pairs, 2] rows of (filtered P(correct), actual grade in [0,1]).

    Pairs cover steps 1..L-1 of every path of length >= 2, in student-id
    order, so the pair count and the actual-grade column line up exactly with
    the recurrent model's predictions on the same dataset.
    """
    if test_data.n_students == 0:
        raise ValueError("empty test dataset")
    rows = []
    for p in sorted(test_data.paths, key=lambda q: str(q.student_id)):
        if len(p) < 2:
            continue
        belief: dict[str, float] = {}
        for t, step in enumerate(p.steps):
            key = DEFAULT_SKILL if step.skill_id is None else str(step.skill_id)
            model = fit.model_for(key)
            params = model.params
            p_known = belief.get(key, params.prior)
            pred = p_known * (1.0 - params.slip) + (1.0 - p_known) * params.guess
            if t >= 1:
                rows.append((pred, step.grade / 100.0))
            belief[key] = _observe_and_propagate(params, p_known, binarize(step.grade))
    if not rows:
        raise ValueError("no test path of length >= 2")
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _skill_to_dict(model: SkillModel) -> dict:
    return {
        "params": model.params.as_dict(),
        "n_train_sequences": model.n_train_sequences,
        "log_likelihood": model.log_likelihood,
    }


def _skill_from_dict(skill_id: str, doc: Mapping) -> SkillModel:
    return SkillModel(
        skill_id=skill_id,
        params=BktParams(**doc["params"]),
        n_train_sequences=int(doc["n_train_sequences"]),
        log_likelihood=float(doc["log_likelihood"]),
    )


def fit_to_json(fit: BktFit) -> str:
    doc = {
        "skills": {k: _skill_to_dict(m) for k, m in sorted(fit.skills.items())},
        "pooled": _skill_to_dict(fit.pooled),
    }
    return json.dumps(doc, indent=2) + "\n"


def fit_from_json(text: str) -> BktFit:
    doc = json.loads(text)
    return BktFit(
        skills={k: _skill_from_dict(k, v) for k, v in doc["skills"].items()},
        pooled=_skill_from_dict(POOLED_KEY, doc["pooled"]),
    )
