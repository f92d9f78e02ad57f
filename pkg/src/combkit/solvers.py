"""Projection-based convex machinery shared by the validators and optimizers.

Everything here works on raw complex ndarrays (single matrices or stacks of
matrices with shape ``(m, D, D)``).  The two building blocks are the PSD-cone
projection and the orthogonal projection onto the affine set cut out by the
recursive trace-normalization chain of sequential networks; Dykstra's
algorithm combines them, and a monotone projected-gradient ascent optimizes
linear functionals over the resulting convex bodies without any external
conic solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m.conj(), -1, -2))


def frob_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real Hilbert-Schmidt inner product Re Tr[a^dag b] (summed over stacks)."""
    return float(np.real(np.sum(a.conj() * b)))


def psd_project(m: np.ndarray) -> np.ndarray:
    """Closest PSD matrix in Frobenius norm (works on stacks too)."""
    h = hermitize(m)
    vals, vecs = np.linalg.eigh(h)
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals[..., None, :]) @ np.swapaxes(vecs.conj(), -1, -2)


class ChainProjector:
    """Orthogonal projection onto the affine hull of deterministic-network
    normalizations.

    For factor dimensions ``d_0 .. d_{2N-1}`` (ascending label order, even
    labels are inputs) the constraints are, for each tooth ``k = 1..N``: the
    partial trace over labels ``>= 2k-1`` must have the form
    ``X ⊗ I`` with the identity on label ``2k-2``; plus the trace condition
    ``Tr = prod(even dims)``.  The correction terms for different ``k`` are
    mutually orthogonal, so a single pass is the exact projection.
    """

    def __init__(self, dims: Sequence[int]):
        dims = [int(d) for d in dims]
        if len(dims) % 2 != 0 or not dims:
            raise ValueError(f"need an even, nonempty dimension list, got {dims}")
        self.dims = dims
        self.teeth = len(dims) // 2
        self.total_dim = int(np.prod(dims, dtype=np.int64))
        self.target_trace = float(np.prod(dims[0::2], dtype=np.int64))

    @classmethod
    def for_tester(cls, dims: Sequence[int]) -> "ChainProjector":
        """Tester normalizations are the same chain with 1-dim end caps."""
        return cls([1] + [int(d) for d in dims] + [1])

    def uniform(self) -> np.ndarray:
        """The maximally mixed feasible point (identity over odd dims)."""
        odd = float(np.prod(self.dims[1::2], dtype=np.int64))
        return np.eye(self.total_dim, dtype=np.complex128) / odd

    def residuals(self, m: np.ndarray) -> list[float]:
        """Frobenius norm of each constraint violation, tooth k = N..1, then trace."""
        out = []
        for k in range(self.teeth, 0, -1):
            out.append(float(np.linalg.norm(self._violation(m, k))))
        out.append(abs(float(np.real(np.trace(m))) - self.target_trace))
        return out

    def _split(self, k: int) -> tuple[int, int, int]:
        """Head dims product up to label 2k-2, dim of label 2k-2, tail product."""
        head = int(np.prod(self.dims[: 2 * k - 2], dtype=np.int64)) if k > 1 else 1
        d = self.dims[2 * k - 2]
        tail = int(np.prod(self.dims[2 * k - 1 :], dtype=np.int64))
        return head, d, tail

    def _violation(self, m: np.ndarray, k: int) -> np.ndarray:
        """(1 - trace-and-replace on label 2k-2) of the trace over labels >= 2k-1."""
        head, d, tail = self._split(k)
        t = m.reshape(head * d, tail, head * d, tail)
        reduced = np.einsum("atbt->ab", t)
        r4 = reduced.reshape(head, d, head, d)
        partial = np.einsum("aibi->ab", r4) / d
        replaced = np.einsum("ab,ij->aibj", partial, np.eye(d)).reshape(head * d, head * d)
        return reduced - replaced

    def project(self, m: np.ndarray) -> np.ndarray:
        out = hermitize(np.array(m, dtype=np.complex128))
        src = out.copy()
        for k in range(self.teeth, 0, -1):
            head, d, tail = self._split(k)
            v = self._violation(src, k)
            out -= np.kron(v, np.eye(tail, dtype=np.complex128)) / tail
        tr = float(np.real(np.trace(src)))
        out += (
            (self.target_trace - tr)
            / self.total_dim
            * np.eye(self.total_dim, dtype=np.complex128)
        )
        return out

    def is_member(self, m: np.ndarray, tol: float) -> bool:
        return max(self.residuals(m)) <= tol


def dykstra(
    x0: np.ndarray,
    projections: Sequence[Callable[[np.ndarray], np.ndarray]],
    max_iters: int = 400,
    tol: float = 1e-11,
) -> tuple[np.ndarray, float]:
    """Dykstra's alternating projections onto an intersection of convex sets.

    Returns the final iterate and the last sweep's maximum hop distance
    (small values certify the iterate sits in the intersection).
    """
    x = np.array(x0, dtype=np.complex128)
    increments = [np.zeros_like(x) for _ in projections]
    hop = np.inf
    scale = max(1.0, float(np.linalg.norm(x0)))
    for _ in range(max_iters):
        hop = 0.0
        for i, proj in enumerate(projections):
            y = x + increments[i]
            px = proj(y)
            increments[i] = y - px
            hop = max(hop, float(np.linalg.norm(px - x)))
            x = px
        if hop <= tol * scale:
            break
    return x, hop


def project_onto_intersection(
    x0: np.ndarray,
    projections: Sequence[Callable[[np.ndarray], np.ndarray]],
    max_iters: int = 400,
    tol: float = 1e-11,
) -> np.ndarray:
    return dykstra(x0, projections, max_iters=max_iters, tol=tol)[0]


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool


def maximize_linear(
    gradient: np.ndarray,
    project: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iters: int = 400,
    improvement_tol: float = 1e-10,
    step0: float = 1.0,
    max_step: float = 64.0,
    residual: Callable[[np.ndarray], float] | None = None,
    feasibility_tol: float = 1e-9,
) -> AscentResult:
    """Monotone projected-gradient ascent of ``Re Tr[gradient^dag x]``.

    For a linear objective on a convex set every successful projected step
    strictly improves the value, and a point that no step size can improve is
    a global maximizer; the step is therefore adapted greedily (grow on
    success, shrink on failure).  When the projection is itself iterative an
    optional ``residual`` callback vetoes candidates it left outside the set,
    which keeps the reported value honest.
    """
    x = project(np.array(x0, dtype=np.complex128))
    val = frob_inner(gradient, x)
    alpha = step0
    stall = 0
    it = 0
    for it in range(1, max_iters + 1):
        cand = project(x + alpha * gradient)
        cand_val = frob_inner(gradient, cand)
        acceptable = cand_val > val + improvement_tol
        if acceptable and residual is not None:
            acceptable = residual(cand) <= feasibility_tol
        if acceptable:
            if cand_val - val < 10 * improvement_tol:
                stall += 1
            else:
                stall = 0
            x, val = cand, cand_val
            alpha = min(alpha * 1.6, max_step)
        else:
            alpha *= 0.35
            stall += 1
        if alpha < 1e-14 or stall >= 12:
            return AscentResult(x, val, it, True)
    return AscentResult(x, val, it, False)


def discrimination_ascent(
    weighted_states: np.ndarray,
    max_iters: int = 300,
    tol: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Fixed-point ascent for minimum-error discrimination.

    ``weighted_states[g] = p_g rho_g``; iterates the monotone update
    ``M_g <- L^{-1/2} (p_g rho_g) M_g (p_g rho_g) L^{-1/2}`` with
    ``L = sum_g (p_g rho_g) M_g (p_g rho_g)``, completing the POVM uniformly
    on the orthogonal complement of the joint support.  Returns the POVM
    stack and the success probability.
    """
    y = np.asarray(weighted_states, dtype=np.complex128)
    m, dim = y.shape[0], y.shape[1]
    povm = np.broadcast_to(np.eye(dim, dtype=np.complex128) / m, y.shape).copy()
    success = float(np.real(np.einsum("gij,gji->", y, povm)))
    for _ in range(max_iters):
        lam = hermitize(np.einsum("gij,gjk,gkl->il", y, povm, y))
        vals, vecs = np.linalg.eigh(lam)
        lmax = max(float(vals[-1]), 0.0)
        inv = np.where(vals > 1e-14 * max(lmax, 1e-300), 1.0 / np.sqrt(np.clip(vals, 1e-300, None)), 0.0)
        lam_isqrt = (vecs * inv) @ vecs.conj().T
        support = (vecs * (inv > 0)) @ vecs.conj().T
        povm = np.einsum("ij,gjk,gkl,glm,mn->gin", lam_isqrt, y, povm, y, lam_isqrt)
        povm = hermitize(povm)
        hole = np.eye(dim, dtype=np.complex128) - support
        povm += hole[None, :, :] / m
        new_success = float(np.real(np.einsum("gij,gji->", y, povm)))
        if new_success - success <= tol * max(1.0, abs(success)):
            success = max(success, new_success)
            break
        success = new_success
    return povm, success
