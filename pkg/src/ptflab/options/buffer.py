from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: object
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions stored column-wise.

    Alongside each transition the buffer keeps a boolean row saying which
    source policies would have chosen the stored action (filled in by the
    option module when the transition is added).
    """

    def __init__(self, capacity, obs_width, action_dim=None, n_options=1):
        if capacity < 1:
            raise ContractViolation("replay capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_width))
        self.next_obs = np.zeros((capacity, obs_width))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        if action_dim is None:
            self.actions = np.zeros(capacity, dtype=np.int64)
        else:
            self.actions = np.zeros((capacity, action_dim))
        self.masks = np.zeros((capacity, n_options), dtype=bool)
        self.order = np.zeros(capacity, dtype=np.int64)  # insertion serial number
        self._next = 0
        self.size = 0
        self.total_added = 0

    def __len__(self):
        return self.size

    def add(self, state, action, reward, next_state, done, mask=None):
        i = self._next
        self.obs[i] = state
        self.next_obs[i] = next_state
        self.rewards[i] = reward
        self.dones[i] = done
        self.actions[i] = action
        self.masks[i] = True if mask is None else mask
        self.order[i] = self.total_added
        self.total_added += 1
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add_batch(self, states, actions, rewards, next_states, dones, masks):
        for row in zip(states, actions, rewards, next_states, dones, masks):
            self.add(*row)

    def sample_indices(self, n, rng):
        """``n`` distinct slots, uniformly at random."""
        if n > self.size:
            raise ContractViolation(f"cannot sample {n} from {self.size} transitions")
        return rng.choice(self.size, size=n, replace=False)

    def transition(self, i):
        return Transition(self.obs[i].copy(), self.actions[i].copy() if self.actions.ndim > 1
                          else int(self.actions[i]), float(self.rewards[i]),
                          self.next_obs[i].copy(), bool(self.dones[i]))

    def oldest(self):
        """Slot holding the oldest surviving transition."""
        return 0 if self.size < self.capacity else self._next
