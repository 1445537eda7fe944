"""Desk-scale training demo exercising the analytic gradients end to end.

Network: ``linear -> cgnl_block -> global average pool -> linear -> softmax``
trained by full-batch gradient descent on synthetic data whose label is
decided by a cross-channel interaction ``sum_n x[n, c1] * x[n + shift, c2]``.
BatchNorm inside the block uses statistics over samples and positions.

Each sample couples channel ``c2`` to channel ``c1`` with a random-sign
correlation ``rho`` so both classes are well populated, and the last
channel is a constant 1.  The constant gives the pooled block output a
nonzero mean direction; without it the pooled non-local term is the
label statistic times a zero-mean random factor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compact import _block_backward, _block_forward
from .core import init_params, linear_transform
from .kernels import KernelSpec


@dataclass(frozen=True)
class ToyTrainConfig:
    n_samples: int = 256
    n: int = 16
    c: int = 8
    classes: int = 2
    steps: int = 200
    learning_rate: float = 0.05
    seed: int = 0
    groups: int = 1
    shift: int = 0
    channel_pair: tuple = (0, 1)
    rho: float = 0.7
    block_init: str = "uniform_range"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.classes < 2:
            raise ValueError("need at least two classes")
        if not 0 <= self.shift < self.n:
            raise ValueError(f"shift must lie in [0, {self.n})")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.c < 3 or max(self.channel_pair) >= self.c - 1:
            raise ValueError("need C >= 3 with the label channels below the constant channel")


class DivergenceError(RuntimeError):
    pass


def make_dataset(cfg: ToyTrainConfig):
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((cfg.n_samples, cfg.n, cfg.c))
    c1, c2 = cfg.channel_pair
    sign = rng.choice([-1.0, 1.0], size=cfg.n_samples)
    lead = np.roll(x[:, :, c1], cfg.shift, axis=1)
    x[:, :, c2] = sign[:, None] * cfg.rho * lead + np.sqrt(1 - cfg.rho ** 2) * x[:, :, c2]
    x[:, :, -1] = 1.0
    stat = np.sum(x[:, : cfg.n - cfg.shift, c1] * x[:, cfg.shift:, c2], axis=1)
    if cfg.classes == 2:
        labels = (stat > 0).astype(int)
    else:
        edges = np.quantile(stat, np.linspace(0, 1, cfg.classes + 1)[1:-1])
        labels = np.searchsorted(edges, stat, side="right")
    return x, labels


def _softmax_xent(logits, labels):
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    b = logits.shape[0]
    loss = -logp[np.arange(b), labels].mean()
    d = np.exp(logp)
    d[np.arange(b), labels] -= 1.0
    return loss, d / b


def train_toy(cfg: ToyTrainConfig, spec: KernelSpec | None = None, on_step=None, threads: int = 1):
    """Run gradient descent; returns the list of per-step losses (before each update).

    Raises :class:`DivergenceError` when the loss exceeds 10x its initial value
    or becomes non-finite.
    """
    spec = spec or KernelSpec("dot", order=1)
    x, labels = make_dataset(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    bound = 1.0 / np.sqrt(cfg.c)
    w_in = rng.uniform(-bound, bound, size=(cfg.c, cfg.c))
    b_in = np.zeros(cfg.c)
    w_out = rng.uniform(-bound, bound, size=(cfg.c, cfg.classes))
    b_out = np.zeros(cfg.classes)
    block = init_params(cfg.c, cfg.seed + 2, cfg.block_init)

    losses = []
    for step in range(cfg.steps):
        h = linear_transform(x, w_in) + b_in
        z, cache = _block_forward(h, block, spec, cfg.groups, threads=threads, keep=True)
        pooled = z.mean(axis=1)
        logits = pooled @ w_out + b_out
        loss, d_logits = _softmax_xent(logits, labels)
        losses.append(float(loss))
        if on_step:
            on_step(step, loss)
        if not np.isfinite(loss) or loss > 10 * losses[0]:
            raise DivergenceError(f"loss {loss:.4g} at step {step} (initial {losses[0]:.4g})")

        d_w_out = pooled.T @ d_logits
        d_b_out = d_logits.sum(axis=0)
        d_pooled = d_logits @ w_out.T
        d_z = np.broadcast_to(d_pooled[:, None, :] / cfg.n, z.shape)
        grads = _block_backward(cache, np.ascontiguousarray(d_z))
        d_w_in = np.einsum("bnc,bnd->cd", x, grads.d_input)
        d_b_in = grads.d_input.sum(axis=(0, 1))

        lr = cfg.learning_rate
        w_out = w_out - lr * d_w_out
        b_out = b_out - lr * d_b_out
        w_in = w_in - lr * d_w_in
        b_in = b_in - lr * d_b_in
        block = block.replace(**{k: getattr(block, k) - lr * v for k, v in grads.params().items()})
    return losses


def losses_csv(losses) -> str:
    return "step,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses))
