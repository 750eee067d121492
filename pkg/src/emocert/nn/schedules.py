"""Learning-rate schedules: cosine annealing with warm restarts, reduce-on-plateau."""

from __future__ import annotations

import math


class CosineWarmRestarts:
    """lr = eta_min + (eta_max - eta_min) * (1 + cos(pi * T_cur / T_i)) / 2.

    ``epoch_end`` advances T_cur; when a cycle completes, T_cur resets to 0
    (so the next epoch starts back at eta_max) and the cycle length is
    multiplied by T_mult.
    """

    def __init__(self, eta_max: float, eta_min: float = 0.0, t_0: int = 10, t_mult: int = 2):
        if t_0 < 1 or t_mult < 1:
            raise ValueError("t_0 and t_mult must be >= 1")
        if eta_min > eta_max:
            raise ValueError("eta_min must be <= eta_max")
        self.eta_max = eta_max
        self.eta_min = eta_min
        self.t_mult = t_mult
        self.t_i = t_0
        self.t_cur = 0

    def lr(self) -> float:
        return self.eta_min + (self.eta_max - self.eta_min) * (
            1 + math.cos(math.pi * self.t_cur / self.t_i)
        ) / 2

    def epoch_end(self, metric: float | None = None) -> None:
        self.t_cur += 1
        if self.t_cur >= self.t_i:
            self.t_cur = 0
            self.t_i *= self.t_mult


class ReduceOnPlateau:
    """Multiply lr by ``factor`` after ``patience`` consecutive non-improving
    epochs of the monitored metric (lower is better), floored at min_lr."""

    def __init__(self, lr: float, factor: float = 0.5, patience: int = 2, min_lr: float = 1e-6):
        if not 0 < factor < 1:
            raise ValueError("factor must be in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self._lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = math.inf
        self.num_bad = 0

    def lr(self) -> float:
        return self._lr

    def epoch_end(self, metric: float | None = None) -> None:
        if metric is None:
            raise ValueError("plateau schedule needs the validation metric at epoch end")
        if metric < self.best:
            self.best = metric
            self.num_bad = 0
            return
        self.num_bad += 1
        if self.num_bad >= self.patience:
            self._lr = max(self._lr * self.factor, self.min_lr)
            self.num_bad = 0
