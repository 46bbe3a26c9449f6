"""Block Davidson-Liu eigensolver for the lowest roots of a symmetric matrix.

Operates through a caller-supplied matrix-vector product, with diagonal
(Jacobi) preconditioning and thick restarts.  Fully deterministic for a
fixed starting block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Jacobi denominators are clamped away from zero to survive the
# near-degenerate diagonals of almost-degenerate multiplet pairs.
LEVEL_SHIFT = 1e-4


@dataclass
class DavidsonResult:
    energies: np.ndarray
    vectors: np.ndarray          # (N, n_roots), orthonormal columns
    iterations: int
    residual_norms: np.ndarray
    converged: bool
    n_matvec: int = 0


class DavidsonNotConverged(RuntimeError):
    """Raised after max_iter; carries the partial result for diagnostics."""

    def __init__(self, result: DavidsonResult):
        self.result = result
        worst = float(np.max(result.residual_norms))
        super().__init__(
            f"Davidson did not converge in {result.iterations} iterations "
            f"(worst residual {worst:.3e})")


def _orthonormalize(block: np.ndarray, against: np.ndarray | None = None,
                    drop_tol: float = 1e-10) -> np.ndarray:
    """Two-pass modified Gram-Schmidt; drops linearly dependent columns."""
    cols = []
    for j in range(block.shape[1]):
        v = block[:, j].copy()
        for _ in range(2):
            if against is not None and against.shape[1]:
                v -= against @ (against.T @ v)
            for u in cols:
                v -= u * (u @ v)
        norm = np.linalg.norm(v)
        if norm > drop_tol:
            cols.append(v / norm)
    if not cols:
        return np.empty((block.shape[0], 0))
    return np.stack(cols, axis=1)


def davidson_lowest(matvec, diagonal: np.ndarray, n_roots: int,
                    start: np.ndarray, *, tol: float = 1e-8,
                    max_subspace: int = 0, max_iter: int = 200) -> DavidsonResult:
    """Iterate to the lowest n_roots eigenpairs.

    matvec maps an (N, k) block to H times the block.  `start` supplies
    the initial block (at least n_roots columns).
    """
    n = diagonal.shape[0]
    if n_roots > n:
        raise ValueError(f"n_roots={n_roots} exceeds dimension {n}")
    if max_subspace <= 0:
        max_subspace = min(n, max(6 * n_roots + 12, 48))
    max_subspace = max(max_subspace, 2 * n_roots)

    V = _orthonormalize(np.asarray(start, dtype=float))
    if V.shape[1] < n_roots:
        raise ValueError("starting block is rank deficient")
    S = matvec(V)
    n_matvec = V.shape[1]
    T = V.T @ S

    last = None
    for iteration in range(1, max_iter + 1):
        theta, Y = np.linalg.eigh((T + T.T) / 2.0)
        X = V @ Y[:, :n_roots]
        SX = S @ Y[:, :n_roots]
        R = SX - X * theta[:n_roots]
        norms = np.linalg.norm(R, axis=0)
        last = DavidsonResult(theta[:n_roots].copy(), X, iteration, norms,
                              bool(np.all(norms <= tol)), n_matvec)
        if last.converged:
            return last

        # restart by collapsing onto the best Ritz vectors when full
        n_new_max = int(np.sum(norms > tol))
        if V.shape[1] + n_new_max > max_subspace:
            keep = min(max(2 * n_roots, n_roots + 4),
                       max_subspace - n_new_max)
            keep = max(keep, n_roots)
            V = V @ Y[:, :keep]
            S = S @ Y[:, :keep]
            T = np.diag(theta[:keep]).copy()

        news = []
        for k in range(n_roots):
            if norms[k] <= tol:
                continue
            denom = diagonal - theta[k]
            denom = np.where(np.abs(denom) < LEVEL_SHIFT,
                             np.copysign(LEVEL_SHIFT, denom), denom)
            news.append(R[:, k] / denom)
        block = _orthonormalize(np.stack(news, axis=1), against=V)
        if block.shape[1] == 0:
            # stagnation: inject the coordinate direction of the worst residual
            worst = int(np.argmax(np.abs(R[:, int(np.argmax(norms))])))
            unit = np.zeros((n, 1))
            unit[worst, 0] = 1.0
            block = _orthonormalize(unit, against=V)
            if block.shape[1] == 0:
                break
        Sb = matvec(block)
        n_matvec += block.shape[1]
        T = np.block([[T, V.T @ Sb],
                      [block.T @ S, block.T @ Sb]])
        V = np.hstack([V, block])
        S = np.hstack([S, Sb])

    assert last is not None
    last = DavidsonResult(last.energies, last.vectors, last.iterations,
                          last.residual_norms, False, n_matvec)
    raise DavidsonNotConverged(last)
