"""Deterministic chain task for checking option-value learning.

Non-terminal states 1..n sit between two absorbing ends 0 and n+1.  Action
1 moves right, action 0 moves left; entering the right end pays 1, entering
the left end pays 0, and either ends the episode.  Each source policy
always takes one fixed action.  With every termination probability pinned
at zero the option values are plain policy evaluations, so tabular value
iteration gives the exact fixed point.
"""
import numpy as np

from ptflab.nncore import AdamState
from ptflab.options import OptionNets, ReplayBuffer, update_option_values


def step(s, a, n):
    s2 = s + 1 if a == 1 else s - 1
    return s2, float(s2 == n + 1), s2 in (0, n + 1)


def value_iteration(n, source_actions, gamma=0.99, tol=1e-14):
    """Q[s - 1, o] for the non-terminal states s = 1..n with beta = 0."""
    k = len(source_actions)
    Q = np.zeros((n + 2, k))
    while True:
        new = np.zeros_like(Q)
        for s in range(1, n + 1):
            for o, a in enumerate(source_actions):
                s2, r, done = step(s, a, n)
                new[s, o] = r + (0.0 if done else gamma * Q[s2, o])
        if np.max(np.abs(new - Q)) < tol:
            return new[1:n + 1]
        Q = new


def one_hot(s, n):
    v = np.zeros(n)
    v[s] = 1.0
    return v


def pin_beta(nets, logit):
    """Fix every termination probability to sigmoid(logit) regardless of state."""
    last = nets.spec.n_layers - 1
    nets.params.value(f"W{last}")[:, nets.n:] = 0.0
    nets.params.value(f"b{last}")[nets.n:] = logit


def learn_chain(n, source_actions, seed=0, max_updates=10_000, sync_every=50,
                batch_size=32, gamma=0.99, tol=1e-3, hold=0):
    """Train option values on every chain transition until within ``tol``.

    After the first sync at which every value is within ``tol`` of the
    oracle, training continues for ``hold`` more updates.  Returns
    ``(updates to first hit, error at the hit, worst error while holding)``;
    the first entry is ``None`` if the budget runs out.
    """
    rng = np.random.default_rng(seed)
    k = len(source_actions)
    width = n + 2
    nets = OptionNets(width, k, rng)
    pin_beta(nets, -700.0)   # sigmoid(-700) ~ 1e-304
    nets.sync_target()
    buf = ReplayBuffer(1024, width, None, k)
    copies = max(1, -(-batch_size // (2 * n)))
    for _ in range(copies):
        for s in range(1, n + 1):
            for a in (0, 1):
                s2, r, done = step(s, a, n)
                mask = np.array([a == sa for sa in source_actions])
                buf.add(one_hot(s, width), a, r, one_hot(s2, width), done, mask)
    opt = AdamState(nets.params, 1e-3)
    exact = value_iteration(n, source_actions, gamma)
    states = np.eye(width)[1:n + 1]
    hit, hit_err, worst, err = None, None, 0.0, np.inf
    u = 0
    while u < (max_updates if hit is None else hit + hold):
        u += 1
        update_option_values(nets, buf, opt, batch_size, gamma, rng)
        if u % sync_every == 0:
            nets.sync_target()
            err = float(np.max(np.abs(np.array([nets.q(s) for s in states]) - exact)))
            if hit is None and err < tol:
                hit, hit_err = u, err
            elif hit is not None:
                worst = max(worst, err)
    return hit, (err if hit is None else hit_err), worst
