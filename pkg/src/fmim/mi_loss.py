"""Batch-approximated token-level mutual information and its loss.

Every quantity here is a function of the ``N x T`` matrix ``M`` whose rows
are the predicted tag distributions of all tokens in a concatenated
source + target mini-batch. Entropies are in nats.

    p_bar   = mean over rows of M
    delta1  = -sum_k p_bar_k log p_bar_k                (marginal entropy)
    delta2  = (1/N) sum_ik M_ik log M_ik                (neg. conditional entropy)
    loss    = -(delta1 + delta2)   if delta1 <  rho
            = -delta2              if delta1 >= rho

Logs are taken of ``max(p, epsilon)`` so that ``0 log 0`` evaluates to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EmptyBatchError, NonFiniteLossError, ShapeError

DEFAULT_EPSILON = 1e-12
SOURCE, TARGET = 0, 1


class Branch(str, Enum):
    BELOW = "BelowThreshold"
    AT_OR_ABOVE = "AtOrAboveThreshold"


@dataclass(frozen=True)
class ProbBatch:
    M: np.ndarray
    row_origin: np.ndarray
    sentence_offsets: np.ndarray

    @property
    def N(self) -> int:
        return self.M.shape[0]

    @property
    def T(self) -> int:
        return self.M.shape[1]

    def check(self, atol: float = 1e-9) -> None:
        M = self.M
        if M.ndim != 2 or M.shape[0] < 1:
            raise ShapeError(f"expected a non-empty N x T matrix, got shape {M.shape}")
        if np.any(M < 0) or np.any(M > 1):
            raise ValueError("probabilities outside [0, 1]")
        if not np.allclose(M.sum(axis=1), 1.0, rtol=0, atol=atol):
            raise ValueError("rows of M are not normalized")


@dataclass(frozen=True)
class MiLossConfig:
    alpha: float = 0.01
    rho: float = 0.5
    epsilon: float = DEFAULT_EPSILON

    def validate(self, num_tags: int | None = None) -> None:
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not 0 < self.epsilon <= 1e-6:
            raise ValueError("epsilon must lie in (0, 1e-6]")
        upper = math.log(num_tags) if num_tags else math.inf
        if not 0 <= self.rho <= upper + 1e-12:
            raise ValueError(f"rho must lie in [0, ln T = {upper:.4f}]")


@dataclass
class MiLossResult:
    delta1: float
    delta2: float
    loss: float
    branch: Branch
    grad_M: np.ndarray

    def to_record(self) -> dict:
        return {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "loss": self.loss,
            "branch": self.branch.value,
        }


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, ProbBatch):
        M = M.M
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] == 0:
        raise ShapeError(f"expected a non-empty N x T matrix, got shape {M.shape}")
    return M


def assemble_prob_matrix(
    source: Sequence[np.ndarray], target: Sequence[np.ndarray]
) -> ProbBatch:
    """Stack per-sentence outputs: every source sentence first, then every target one."""
    if len(source) == 0 or len(target) == 0:
        raise EmptyBatchError("both a source and a target mini-batch are required")
    blocks = [np.asarray(p, dtype=np.float64) for p in list(source) + list(target)]
    T = blocks[0].shape[1] if blocks[0].ndim == 2 else None
    for b in blocks:
        if b.ndim != 2 or b.shape[1] != T:
            raise ShapeError(f"sentence output of shape {b.shape} does not match T={T}")
    lengths = [b.shape[0] for b in blocks]
    if sum(lengths) == 0:
        raise EmptyBatchError("mini-batch contains no tokens")
    n_src = sum(lengths[: len(source)])
    origin = np.full(sum(lengths), TARGET, dtype=np.int8)
    origin[:n_src] = SOURCE
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    return ProbBatch(np.concatenate(blocks, axis=0), origin, offsets)


def marginal_distribution(M) -> np.ndarray:
    return _as_matrix(M).mean(axis=0)


def marginal_entropy(M, epsilon: float = DEFAULT_EPSILON) -> float:
    p = marginal_distribution(M)
    return float(-np.sum(p * np.log(np.maximum(p, epsilon))))


def neg_conditional_entropy(M, epsilon: float = DEFAULT_EPSILON) -> float:
    M = _as_matrix(M)
    return float(np.sum(M * np.log(np.maximum(M, epsilon))) / M.shape[0])


def mi_value(M, epsilon: float = DEFAULT_EPSILON) -> float:
    return marginal_entropy(M, epsilon) + neg_conditional_entropy(M, epsilon)


def mi_loss_and_grad(M, cfg: MiLossConfig = MiLossConfig()) -> MiLossResult:
    """Thresholded MI loss with its gradient w.r.t. the entries of ``M``.

    The entries are treated as free variables; the simplex constraint is
    handled by the softmax in the tagger's backward pass.
    """
    M = _as_matrix(M)
    N = M.shape[0]
    eps = cfg.epsilon
    p = M.mean(axis=0)
    log_p = np.log(np.maximum(p, eps))
    log_M = np.log(np.maximum(M, eps))
    delta1 = float(-np.sum(p * log_p))
    delta2 = float(np.sum(M * log_M) / N)
    if delta1 < cfg.rho:
        branch = Branch.BELOW
        loss = -(delta1 + delta2)
        grad = (log_p[None, :] - log_M) / N
    else:
        branch = Branch.AT_OR_ABOVE
        loss = -delta2
        grad = -(log_M + 1.0) / N
    return MiLossResult(delta1, delta2, loss, branch, grad)


def combine_losses(ce: float, mi: MiLossResult | float, alpha: float) -> float:
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    mi_loss = mi.loss if isinstance(mi, MiLossResult) else float(mi)
    if not (math.isfinite(ce) and math.isfinite(mi_loss)):
        raise NonFiniteLossError(f"non-finite loss: ce={ce}, mi={mi_loss}")
    return ce + alpha * mi_loss
