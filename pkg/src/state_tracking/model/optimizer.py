"""
AdamW с decoupled weight decay.

Шаг для параметра p с градиентом g:
    p <- p·(1 - lr·wd)
    m <- β1·m + (1 - β1)·g,  v <- β2·v + (1 - β2)·g²
    p <- p - lr·m̂ / (sqrt(v̂) + eps),  m̂ = m / (1 - β1^t),  v̂ = v / (1 - β2^t)
"""

from typing import Callable, Iterable, Optional, Tuple

import torch

from ..core.errors import NumericError


class AdamW(torch.optim.Optimizer):
    """
    AdamW optimizer.

    Args:
        params: Параметры или группы параметров
        lr: Learning rate
        betas: Коэффициенты скользящих средних градиента и его квадрата
        eps: Добавка в знаменатель
        weight_decay: Коэффициент decoupled weight decay
    """

    def __init__(
        self,
        params: Iterable,
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ) -> None:
        if lr <= 0:
            raise ValueError(f"Invalid learning rate: {lr}")
        if not 0.0 <= betas[0] < 1.0 or not 0.0 <= betas[1] < 1.0:
            raise ValueError(f"Invalid betas: {betas}")
        if eps < 0 or weight_decay < 0:
            raise ValueError(f"Invalid eps/weight_decay: {eps}, {weight_decay}")
        defaults = dict(lr=lr, betas=tuple(betas), eps=eps, weight_decay=weight_decay)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure: Optional[Callable[[], float]] = None) -> Optional[float]:
        """Выполняет один шаг оптимизации."""
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()

        # параметры и моменты меняются, только если все обновления конечны
        pending = []
        for group in self.param_groups:
            lr = group["lr"]
            beta1, beta2 = group["betas"]
            eps = group["eps"]
            weight_decay = group["weight_decay"]

            for p in group["params"]:
                if p.grad is None:
                    continue
                grad = p.grad
                state = self.state.get(p) or {}
                t = state.get("step", 0) + 1
                if state:
                    exp_avg = state["exp_avg"] * beta1
                    exp_avg_sq = state["exp_avg_sq"] * beta2
                else:
                    exp_avg, exp_avg_sq = torch.zeros_like(p), torch.zeros_like(p)
                exp_avg.add_(grad, alpha=1 - beta1)
                exp_avg_sq.addcmul_(grad, grad, value=1 - beta2)

                denom = (exp_avg_sq / (1 - beta2 ** t)).sqrt_().add_(eps)
                update = exp_avg / denom * (lr / (1 - beta1 ** t))
                if not torch.isfinite(update).all():
                    raise NumericError(f"non-finite AdamW update at step {t}")
                decay = 1 - lr * weight_decay
                pending.append((p, t, exp_avg, exp_avg_sq, update, decay))

        for p, t, exp_avg, exp_avg_sq, update, decay in pending:
            self.state[p].update(step=t, exp_avg=exp_avg, exp_avg_sq=exp_avg_sq)
            if decay != 1:
                p.mul_(decay)
            p.sub_(update)

        return loss
