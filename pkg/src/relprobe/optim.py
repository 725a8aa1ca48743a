"""Optimizers (SGD, Adagrad, Adadelta, Adam) and learning-rate schedules."""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass

import numpy as np


class Optimizer:
    """Updates a dict of name -> Tensor parameters in place.

    l2_groups is a list of (name-pattern, coefficient) pairs; matching
    parameters get coeff * p added to their gradient before the update.
    """

    def __init__(self, lr, l2_groups=None):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.lr = float(lr)
        self.l2_groups = list(l2_groups or [])
        self.state = {}

    def _effective_grad(self, name, p):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        for pattern, coeff in self.l2_groups:
            if fnmatch.fnmatch(name, pattern):
                g = g + coeff * p.data
        return g

    def step(self, params):
        for name, p in params.items():
            g = self._effective_grad(name, p)
            self._update(name, p, g)

    def _update(self, name, p, g):
        raise NotImplementedError


class SGD(Optimizer):
    def _update(self, name, p, g):
        p.data -= self.lr * g


class Adagrad(Optimizer):
    def __init__(self, lr, l2_groups=None, eps=1e-8):
        super().__init__(lr, l2_groups)
        self.eps = eps

    def _update(self, name, p, g):
        acc = self.state.setdefault(name, np.zeros_like(p.data))
        acc += g * g
        p.data -= self.lr * g / np.sqrt(acc + self.eps)


class Adadelta(Optimizer):
    def __init__(self, lr=1.0, l2_groups=None, rho=0.95, eps=1e-8):
        super().__init__(lr, l2_groups)
        self.rho = rho
        self.eps = eps

    def _update(self, name, p, g):
        st = self.state.setdefault(name, {"g2": np.zeros_like(p.data), "dx2": np.zeros_like(p.data)})
        st["g2"] = self.rho * st["g2"] + (1 - self.rho) * g * g
        dx = -np.sqrt(st["dx2"] + self.eps) / np.sqrt(st["g2"] + self.eps) * g
        st["dx2"] = self.rho * st["dx2"] + (1 - self.rho) * dx * dx
        p.data += self.lr * dx


class Adam(Optimizer):
    def __init__(self, lr, l2_groups=None, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(lr, l2_groups)
        self.betas = betas
        self.eps = eps
        self.t = 0

    def step(self, params):
        self.t += 1
        super().step(params)

    def _update(self, name, p, g):
        b1, b2 = self.betas
        st = self.state.setdefault(name, {"m": np.zeros_like(p.data), "v": np.zeros_like(p.data)})
        st["m"] = b1 * st["m"] + (1 - b1) * g
        st["v"] = b2 * st["v"] + (1 - b2) * g * g
        m_hat = st["m"] / (1 - b1 ** self.t)
        v_hat = st["v"] / (1 - b2 ** self.t)
        p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


_OPTIMIZERS = {"sgd": SGD, "adagrad": Adagrad, "adadelta": Adadelta, "adam": Adam}


def make_optimizer(kind, lr, l2_groups=None):
    try:
        cls = _OPTIMIZERS[kind]
    except KeyError:
        raise ValueError("unknown optimizer kind: %s" % kind)
    return cls(lr, l2_groups=l2_groups)


@dataclass(frozen=True)
class Plateau:
    """Decay lr by `factor` after `patience` epochs without an improvement
    of more than `min_delta` over the best validation score so far."""

    factor: float = 0.9
    patience: int = 2
    min_delta: float = 1e-4


@dataclass(frozen=True)
class EpochDecay:
    """Decay lr by `factor` every epoch from `start_epoch` (1-based) on."""

    factor: float = 0.9
    start_epoch: int = 15


class Scheduler:
    """Stateful schedule driver; lr never increases."""

    def __init__(self, policy, lr0):
        self.policy = policy
        self.lr = float(lr0)
        self._best = -np.inf
        self._stale = 0

    def start_epoch(self, epoch):
        """Called at the start of each 1-based epoch; returns the lr to use."""
        if isinstance(self.policy, EpochDecay) and epoch >= self.policy.start_epoch:
            self.lr *= self.policy.factor
        return self.lr

    def end_epoch(self, val_metric):
        """Called after validation; returns the (possibly decayed) lr."""
        if isinstance(self.policy, Plateau):
            if val_metric > self._best + self.policy.min_delta:
                self._best = val_metric
                self._stale = 0
            else:
                self._stale += 1
                if self._stale >= self.policy.patience:
                    self.lr *= self.policy.factor
                    self._stale = 0
        return self.lr


def schedule(history, policy, lr0):
    """Pure form: replay a per-epoch validation-metric history, return lr."""
    sched = Scheduler(policy, lr0)
    for epoch, metric in enumerate(history, start=1):
        sched.start_epoch(epoch)
        sched.end_epoch(metric)
    return sched.lr
