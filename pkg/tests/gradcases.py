"""Random tiny instances of every trainable loss, checked along three routes.

Each ``*_case`` builds one random instance and returns the largest relative
error between (a) the closed-form gradient used for training, (b) the
autograd graph gradient and (c) central finite differences of the scalar
loss.  The unit tests and the acceptance suite both draw from here.
"""
import numpy as np

from fdcheck import central_diff, rel_err
from ptflab.agents import Critic, Policy
from ptflab.agents.losses import (PpoConfig, TransferTerm, a3c_gradients, a3c_loss_graph,
                                  log_probs, ppo_gradients, ppo_loss_graph)
from ptflab.nncore import backprop, mlp_apply, softmax_np
from ptflab.nncore import tensor as T
from ptflab.options.module import OptionNets, termination_step, update_option_values
from ptflab.options.buffer import ReplayBuffer
from ptflab.transfer import (cross_entropy_grad_logits, gaussian_nll_grads,
                             policy_distillation_loss, value_distillation_kl)

OBS, ACTIONS, DIM, HIDDEN = 4, 3, 2, (5, 5)


def _nets(rng, continuous):
    space = ("continuous", DIM) if continuous else ("discrete", ACTIONS)
    actor = Policy.create(OBS, space, rng, HIDDEN)
    critic = Critic.create(OBS, rng, HIDDEN)
    # non-zero biases so no layer sits at a symmetric point
    actor.params.flat[:] += 0.1 * rng.normal(size=actor.params.size)
    critic.params.flat[:] += 0.1 * rng.normal(size=critic.params.size)
    if continuous:
        actor.params.set("log_std", rng.uniform(-1.0, 0.5, size=DIM))
    return actor, critic


def _batch(rng, actor, n):
    S = rng.normal(size=(n, OBS))
    if actor.discrete:
        A = rng.integers(ACTIONS, size=n)
        targets = softmax_np(2 * rng.normal(size=(n, ACTIONS)))
    else:
        A = rng.uniform(-1, 1, size=(n, DIM))
        targets = rng.uniform(-1, 1, size=(n, 5, DIM))
    weights = rng.uniform(0, 1, size=n) * (rng.random(n) < 0.8)
    return S, A, TransferTerm(targets, weights)


def _three_way(kernel, graph, fd):
    return max(rel_err(kernel, fd), rel_err(graph, fd), rel_err(kernel, graph))


def a3c_case(rng, continuous=False):
    actor, critic = _nets(rng, continuous)
    n = int(rng.integers(1, 7))
    S, A, term = _batch(rng, actor, n)
    R = rng.normal(size=n) * 3
    rho = 1e-4 if rng.random() < 0.5 else float(rng.uniform(0, 0.1))

    actor.params.zero_grad()
    critic.params.zero_grad()
    a3c_gradients(actor, critic, S, A, R, term, rho)
    k_actor, k_critic = actor.params.grad_flat.copy(), critic.params.grad_flat.copy()

    actor.params.zero_grad()
    critic.params.zero_grad()
    a_loss, c_loss = a3c_loss_graph(actor, critic, S, A, R, term, rho)
    backprop(a_loss)
    backprop(c_loss)
    g_actor, g_critic = actor.params.grad_flat.copy(), critic.params.grad_flat.copy()

    fd_actor = central_diff(
        lambda: a3c_loss_graph(actor, critic, S, A, R, term, rho)[0].item(), actor.params.flat)
    fd_critic = central_diff(
        lambda: a3c_loss_graph(actor, critic, S, A, R, term, rho)[1].item(), critic.params.flat)
    return max(_three_way(k_actor, g_actor, fd_actor), _three_way(k_critic, g_critic, fd_critic))


def ppo_case(rng, continuous=False):
    actor, critic = _nets(rng, continuous)
    n = int(rng.integers(1, 9))
    S, A, term = _batch(rng, actor, n)
    R = rng.normal(size=n) * 3
    adv = rng.normal(size=n)
    # old log-probs around the current ones so ratios straddle the clip range
    old = log_probs(actor, S, A) + rng.uniform(-0.4, 0.4, size=n)
    cfg = PpoConfig(clip=0.2, entropy_coef=float(rng.choice([0.005, 0.05])))

    def loss():
        return ppo_loss_graph(actor, critic, S, A, R, adv, old, cfg, term)

    actor.params.zero_grad()
    critic.params.zero_grad()
    k_loss, _ = ppo_gradients(actor, critic, S, A, R, adv, old, cfg, term)
    k_actor, k_critic = actor.params.grad_flat.copy(), critic.params.grad_flat.copy()
    actor.params.zero_grad()
    critic.params.zero_grad()
    graph = loss()
    backprop(graph)
    g_actor, g_critic = actor.params.grad_flat.copy(), critic.params.grad_flat.copy()
    fd_actor = central_diff(lambda: loss().item(), actor.params.flat)
    fd_critic = central_diff(lambda: loss().item(), critic.params.flat)
    value_err = abs(k_loss - graph.item()) / max(1.0, abs(k_loss))
    return max(value_err, _three_way(k_actor, g_actor, fd_actor),
               _three_way(k_critic, g_critic, fd_critic))


class _Capture:
    """Stands in for the optimizer: records the gradient instead of stepping."""

    def step(self, params):
        self.grad = params.grad_flat.copy()
        params.zero_grad()


def option_value_case(rng, gamma=0.99):
    n_opt = int(rng.integers(2, 5))
    nets = OptionNets(OBS, n_opt, rng, hidden=(6, 6))
    nets.params.flat[:] += 0.1 * rng.normal(size=nets.params.size)
    nets.target_flat[:] = nets.params.flat + 0.1 * rng.normal(size=nets.params.size)
    batch = int(rng.integers(2, 9))
    buf = ReplayBuffer(64, OBS, None, n_opt)
    for _ in range(batch):
        buf.add(rng.normal(size=OBS), int(rng.integers(ACTIONS)), float(rng.normal()),
                rng.normal(size=OBS), bool(rng.random() < 0.2), rng.random(n_opt) < 0.6)
    # sample the same indices twice: once for the update, once for the oracle
    state = np.random.default_rng(int(rng.integers(1 << 30)))
    seed_state = state.bit_generator.state
    cap = _Capture()
    update_option_values(nets, buf, cap, batch, gamma, state)
    state.bit_generator.state = seed_state
    idx = buf.sample_indices(batch, state)
    S, S2 = buf.obs[idx], buf.next_obs[idx]
    r, done, mask = buf.rewards[idx], buf.dones[idx], buf.masks[idx]

    # regression targets from an independent evaluation of U(s', o)
    q2_t = np.array([nets.target_q(s) for s in S2])
    beta2 = np.array([nets.beta(s) for s in S2])
    U = (1 - beta2) * q2_t + beta2 * q2_t.max(axis=1, keepdims=True)
    y = r[:, None] + gamma * np.where(done[:, None], 0.0, U)

    def loss_graph():
        q, _ = mlp_apply(nets.spec, nets.params, S)
        err = T.mul(T.add(y, T.neg(q)), mask.astype(np.float64))
        return T.mul(T.sum(T.square(err)), 1.0 / batch)

    nets.params.zero_grad()
    backprop(loss_graph())
    graph = nets.params.grad_flat.copy()
    nets.params.zero_grad()
    fd = central_diff(lambda: loss_graph().item(), nets.params.flat)
    return _three_way(cap.grad, graph, fd)


def termination_case(rng, lr=1e-3, xi=1e-3):
    n_opt = int(rng.integers(2, 5))
    nets = OptionNets(OBS, n_opt, rng, hidden=(6, 6))
    nets.params.flat[:] += 0.3 * rng.normal(size=nets.params.size)
    s2 = rng.normal(size=OBS)
    o = int(rng.integers(n_opt))
    q = nets.q(s2)
    adv = float(q[o] - q.max())
    before = nets.params.flat.copy()
    termination_step(nets, s2, o, lr, xi)
    step = nets.params.flat - before
    nets.params.flat[:] = before

    def objective_graph():
        _, beta = mlp_apply(nets.spec, nets.params, s2)
        return T.mul(beta[o], adv + xi)

    nets.params.zero_grad()
    backprop(objective_graph())
    graph = nets.params.grad_flat.copy()
    nets.params.zero_grad()
    fd = central_diff(lambda: objective_graph().item(), nets.params.flat)
    head = np.zeros(nets.params.size, dtype=bool)
    head[nets.beta_param_slices()] = True
    # only the termination head moves; elsewhere the step must be exactly zero
    if np.any(step[~head] != 0.0):
        return np.inf
    implied = np.where(head, -step / lr, 0.0)
    return _three_way(implied, np.where(head, graph, 0.0), np.where(head, fd, 0.0))


def policy_distill_case(rng, continuous=False):
    if not continuous:
        n = int(rng.integers(2, 6))
        z = rng.normal(size=n) * 2
        src = softmax_np(rng.normal(size=n) * 2)
        zt = T.Tensor(z.copy(), requires_grad=True)
        backprop(policy_distillation_loss(src, T.softmax(zt)))
        _, closed = cross_entropy_grad_logits(src[None], softmax_np(z)[None])
        fd = central_diff(lambda: policy_distillation_loss(src, softmax_np(z)).item(), z)
        return _three_way(closed[0], zt.grad, fd)
    d = int(rng.integers(1, 4))
    mean, ls = rng.uniform(-1, 1, size=d), rng.uniform(-1, 0.5, size=d)
    pts = rng.uniform(-1, 1, size=(5, d))
    mt, lt = T.Tensor(mean.copy(), requires_grad=True), T.Tensor(ls.copy(), requires_grad=True)
    backprop(policy_distillation_loss((pts[0], ls), (mt, lt), pts))
    _, dm, dl = gaussian_nll_grads(pts, mean, ls)

    def f():
        return policy_distillation_loss((pts[0], ls), (mean, ls), pts).item()

    return max(_three_way(dm, mt.grad, central_diff(f, mean)),
               _three_way(dl, lt.grad, central_diff(f, ls)))


def value_distill_case(rng):
    n = int(rng.integers(2, 6))
    qt, qs = rng.normal(size=n) * 2, rng.normal(size=n) * 2
    tau = float(rng.uniform(0.2, 3.0))
    st = T.Tensor(qs.copy(), requires_grad=True)
    backprop(value_distillation_kl(qt, st, tau))
    closed = softmax_np(qs) - softmax_np(qt / tau)
    fd = central_diff(lambda: value_distillation_kl(qt, qs, tau).item(), qs)
    return _three_way(closed, st.grad, fd)


CASES = {
    "a3c (discrete)": lambda r: a3c_case(r, False),
    "a3c (continuous)": lambda r: a3c_case(r, True),
    "ppo (discrete)": lambda r: ppo_case(r, False),
    "ppo (continuous)": lambda r: ppo_case(r, True),
    "option-value mse": option_value_case,
    "termination step": termination_case,
    "policy distillation (discrete)": lambda r: policy_distill_case(r, False),
    "policy distillation (continuous)": lambda r: policy_distill_case(r, True),
    "value distillation kl": value_distill_case,
}


def worst_error(name, instances=100, seed=0):
    rng = np.random.default_rng(seed)
    return max(CASES[name](rng) for _ in range(instances))
