"""Reference future-phase predictors: repeat-last and a discrete HMM.

Both baselines consume the encoder's per-frame phase likelihoods rather than
ground-truth labels: the constant model repeats the argmax of the last past
row, and the HMM treats the softmax rows as observation likelihoods (no
learned emission table), fitting (pi, A) with Baum-Welch and rolling the
future out by belief propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HMMParams",
    "constant_predict",
    "hmm_forward",
    "hmm_baum_welch",
    "hmm_predict",
    "save_hmm",
    "load_hmm",
]

_ATOL = 1e-9


@dataclass(frozen=True)
class HMMParams:
    """Initial distribution and transition matrix; rows live on the simplex."""

    pi: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "a", a)
        if pi.ndim != 1 or a.shape != (pi.size, pi.size):
            raise ValueError(f"inconsistent shapes: pi {pi.shape}, A {a.shape}")
        if pi.size < 1:
            raise ValueError("need at least one state")
        if pi.min() < 0 or a.min() < 0:
            raise ValueError("probabilities must be nonnegative")
        if abs(pi.sum() - 1.0) > _ATOL:
            raise ValueError(f"pi sums to {pi.sum()}, not 1")
        bad = np.abs(a.sum(axis=1) - 1.0) > _ATOL
        if bad.any():
            raise ValueError(f"transition rows {np.flatnonzero(bad).tolist()} do not sum to 1")

    @property
    def n_states(self) -> int:
        return self.pi.size


def constant_predict(past_logits: np.ndarray, t_future: int) -> np.ndarray:
    """Repeat the argmax of the last past logit row for the whole horizon."""
    past_logits = np.asarray(past_logits, dtype=np.float64)
    if past_logits.ndim != 2 or past_logits.shape[0] < 1:
        raise ValueError(f"past_logits must be [t_past >= 1, n_phases], got {past_logits.shape}")
    if t_future < 1:
        raise ValueError(f"t_future must be >= 1, got {t_future}")
    last = int(np.argmax(past_logits[-1]))
    return np.full(t_future, last, dtype=np.int64)


def _check_likelihoods(obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] < 1:
        raise ValueError(f"likelihoods must be [T >= 1, n_states], got {obs.shape}")
    if not np.all(np.isfinite(obs)) or obs.min() < 0:
        raise ValueError("likelihoods must be finite and nonnegative")
    zero = ~obs.any(axis=1)
    if zero.any():
        raise ValueError(f"all-zero likelihood row at step {int(np.flatnonzero(zero)[0])}")
    return obs


def hmm_forward(obs_likelihoods: np.ndarray, params: HMMParams):
    """Scaled forward pass: filtered posteriors [T, N] and the log-likelihood."""
    obs = _check_likelihoods(obs_likelihoods)
    if obs.shape[1] != params.n_states:
        raise ValueError(f"likelihood width {obs.shape[1]} != n_states {params.n_states}")
    post = np.empty_like(obs)
    log_lik = 0.0
    alpha = params.pi * obs[0]
    for t in range(obs.shape[0]):
        if t > 0:
            alpha = (alpha @ params.a) * obs[t]
        scale = alpha.sum()
        if scale <= 0:
            raise ValueError(f"zero total probability at step {t}")
        alpha = alpha / scale
        post[t] = alpha
        log_lik += np.log(scale)
    return post, float(log_lik)


def _forward_backward(obs: np.ndarray, params: HMMParams):
    """Scaled two-pass smoothing; returns (gamma, xi_sum, log_lik)."""
    t_len, n = obs.shape
    alpha = np.empty((t_len, n))
    scales = np.empty(t_len)
    cur = params.pi * obs[0]
    for t in range(t_len):
        if t > 0:
            cur = (cur @ params.a) * obs[t]
        scales[t] = cur.sum()
        if scales[t] <= 0:
            raise ValueError(f"zero total probability at step {t}")
        cur = cur / scales[t]
        alpha[t] = cur
    beta = np.ones(n)
    gamma = np.empty((t_len, n))
    gamma[-1] = alpha[-1]
    xi_sum = np.zeros((n, n))
    for t in range(t_len - 2, -1, -1):
        weighted = obs[t + 1] * beta
        xi = (alpha[t][:, None] * params.a * weighted[None, :]) / scales[t + 1]
        xi_sum += xi
        beta = (params.a @ weighted) / scales[t + 1]
        gamma[t] = alpha[t] * beta
    return gamma, xi_sum, float(np.log(scales).sum())


def _empirical_init(sequences, n_states: int) -> HMMParams:
    counts = np.full((n_states, n_states), 1e-3)
    for obs in sequences:
        labels = obs.argmax(axis=1)
        for u, v in zip(labels[:-1], labels[1:]):
            counts[u, v] += 1.0
    a = counts / counts.sum(axis=1, keepdims=True)
    return HMMParams(np.full(n_states, 1.0 / n_states), a)


def _random_init(n_states: int, rng: np.random.Generator) -> HMMParams:
    a = rng.dirichlet(np.ones(n_states), size=n_states)
    return HMMParams(rng.dirichlet(np.ones(n_states)), a)


def hmm_baum_welch(obs_likelihood_sequences, n_states: int, iters: int,
                   seed: int = 0, init="empirical"):
    """Fit (pi, A) by EM on externally supplied observation likelihoods.

    ``init`` is "empirical" (argmax transition counts, smoothed), "random"
    (Dirichlet rows drawn from ``seed``), or an explicit HMMParams. Returns
    ``(HMMParams, log_likelihood_history)`` where the history holds the total
    data log-likelihood before each update plus a final entry after the last
    one — non-decreasing within 1e-8 by the EM guarantee.
    """
    sequences = [_check_likelihoods(o) for o in obs_likelihood_sequences]
    if not sequences:
        raise ValueError("need at least one likelihood sequence")
    for obs in sequences:
        if obs.shape[1] != n_states:
            raise ValueError(f"likelihood width {obs.shape[1]} != n_states {n_states}")
    if all(obs.shape[0] < 2 for obs in sequences):
        raise ValueError("Baum-Welch needs at least one sequence of length >= 2")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")

    if isinstance(init, HMMParams):
        params = init
    elif init == "empirical":
        params = _empirical_init(sequences, n_states)
    elif init == "random":
        params = _random_init(n_states, np.random.default_rng(seed))
    else:
        raise ValueError(f"unknown init {init!r}")
    if params.n_states != n_states:
        raise ValueError(f"init has {params.n_states} states, expected {n_states}")

    history = []
    for _ in range(iters):
        first = np.zeros(n_states)
        occupancy = np.zeros(n_states)
        xi_total = np.zeros((n_states, n_states))
        total_ll = 0.0
        for obs in sequences:
            gamma, xi_sum, ll = _forward_backward(obs, params)
            first += gamma[0]
            occupancy += gamma[:-1].sum(axis=0)
            xi_total += xi_sum
            total_ll += ll
        history.append(total_ll)
        pi = first / first.sum()
        a = np.empty((n_states, n_states))
        for i in range(n_states):
            if occupancy[i] > 0:
                a[i] = xi_total[i] / occupancy[i]
            else:
                # state never occupied before the last step: row is
                # unconstrained by the data, keep it where it was
                a[i] = params.a[i]
        a = a / a.sum(axis=1, keepdims=True)
        params = HMMParams(pi, a)
    history.append(sum(_forward_backward(o, params)[2] for o in sequences))
    return params, history


def hmm_predict(last_posterior: np.ndarray, a: np.ndarray, t_future: int) -> np.ndarray:
    """Roll the belief forward (p <- pA) and emit the argmax at each step."""
    p = np.asarray(last_posterior, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if p.ndim != 1 or a.shape != (p.size, p.size):
        raise ValueError(f"inconsistent shapes: posterior {p.shape}, A {a.shape}")
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("last_posterior must be a probability vector")
    if t_future < 1:
        raise ValueError(f"t_future must be >= 1, got {t_future}")
    out = np.empty(t_future, dtype=np.int64)
    for t in range(t_future):
        p = p @ a
        out[t] = int(np.argmax(p))
    return out


def save_hmm(params: HMMParams, path) -> None:
    """Plain-text form: state count, pi row, then the transition rows."""
    lines = [f"n_states {params.n_states}",
             "pi " + " ".join(repr(float(x)) for x in params.pi)]
    for row in params.a:
        lines.append(" ".join(repr(float(x)) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_hmm(path) -> HMMParams:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("n_states "):
        raise ValueError(f"{path}: expected 'n_states <k>' header")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ValueError(f"{path}: bad state count in header") from None
    if not lines[1].startswith("pi "):
        raise ValueError(f"{path}: expected 'pi ...' on line 2")
    pi = np.array([float(x) for x in lines[1].split()[1:]])
    rows = [np.array([float(x) for x in ln.split()]) for ln in lines[2:]]
    if pi.size != n or len(rows) != n or any(r.size != n for r in rows):
        raise ValueError(f"{path}: dimensions do not match n_states={n}")
    return HMMParams(pi, np.stack(rows))
