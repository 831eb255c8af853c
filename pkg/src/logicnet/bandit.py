"""Bayesian-UCB multi-armed bandit over dataset features.

One arm per raw feature, prior-seeded with the feature/target association
score.  Rewards arrive from the trainer's reward strategies; scores combine
the posterior mean with an exploration bonus that shrinks as an arm is
pulled.  The posterior is a deliberately simple running-moments model: the
prior counts as one pseudo-observation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class BanditPolicy:
    prior_mean: np.ndarray
    ucb_scale: float = 1.5
    reward_sum: np.ndarray = field(init=False)
    reward_sq_sum: np.ndarray = field(init=False)
    pull_count: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        priors = np.asarray(self.prior_mean, dtype=np.float64)
        if priors.ndim != 1 or priors.size == 0:
            raise ValueError("prior_mean must be a nonempty vector")
        self.prior_mean = priors
        self.reward_sum = np.zeros_like(priors)
        self.reward_sq_sum = np.zeros_like(priors)
        self.pull_count = np.zeros(priors.shape, dtype=np.int64)

    @property
    def n_arms(self) -> int:
        return self.prior_mean.size

    def update(self, rewards: np.ndarray) -> None:
        """Record one reward vector; only strictly positive entries count as pulls."""
        rewards = np.asarray(rewards, dtype=np.float64)
        if rewards.shape != self.prior_mean.shape:
            raise ValueError(f"reward vector of length {rewards.size}, expected {self.n_arms}")
        hit = rewards > 0
        self.pull_count[hit] += 1
        self.reward_sum[hit] += rewards[hit]
        self.reward_sq_sum[hit] += rewards[hit] ** 2

    def posterior_mean(self) -> np.ndarray:
        return (self.prior_mean + self.reward_sum) / (1.0 + self.pull_count)

    def posterior_std(self) -> np.ndarray:
        """Sample std of observed rewards with the prior as a pseudo-observation.

        Arms with fewer than two observations fall back to prior_mean / 2.
        """
        n_obs = 1.0 + self.pull_count
        mean = self.posterior_mean()
        sq = self.prior_mean**2 + self.reward_sq_sum
        var = np.where(n_obs > 1, (sq - n_obs * mean**2) / np.maximum(n_obs - 1.0, 1.0), 0.0)
        std = np.sqrt(np.maximum(var, 0.0))
        return np.where(self.pull_count >= 1, std, self.prior_mean / 2.0)

    def scores(self) -> np.ndarray:
        """Nonnegative sampling scores: posterior mean plus shrinking UCB bonus."""
        bonus = self.ucb_scale * self.posterior_std() / np.sqrt(1.0 + self.pull_count)
        return np.maximum(self.posterior_mean() + bonus, 0.0)
