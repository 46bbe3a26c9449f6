"""One-particle densities, natural occupations and wave-function analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .casci import CiState, _string_links
from .detspace import CasSpace


@dataclass(frozen=True)
class RdmOne:
    """Spin-traced one-particle density matrix (dimensionless)."""

    matrix: np.ndarray


def spin_transition_densities(space: CasSpace, bra: np.ndarray,
                              ket: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(gamma_alpha, gamma_beta) with gamma_s[p,q] = <bra|a+_ps a_qs|ket>.

    Both vectors live in the same space.
    """
    n = space.n_orb
    na = len(space.alpha_strings)
    nb = len(space.beta_strings)
    B = np.asarray(bra).reshape(na, nb)
    K = np.asarray(ket).reshape(na, nb)
    a_src, _ = _string_links(space.alpha_strings, n)
    b_src, _ = _string_links(space.beta_strings, n)
    ga = np.zeros((n, n))
    gb = np.zeros((n, n))
    for g, (src, dst, sign) in enumerate(a_src):
        if src.size:
            ga[g // n, g % n] = np.sum(sign * np.einsum(
                "ec,ec->e", B[dst, :], K[src, :]))
    for g, (src, dst, sign) in enumerate(b_src):
        if src.size:
            gb[g // n, g % n] = np.sum(sign * np.einsum(
                "ce,ce->e", B[:, dst], K[:, src]))
    return ga, gb


def transition_density(space: CasSpace, bra: np.ndarray,
                       ket: np.ndarray) -> np.ndarray:
    """Spin-traced transition density <bra|E_pq|ket>."""
    ga, gb = spin_transition_densities(space, bra, ket)
    return ga + gb


def one_rdm(space: CasSpace, states: list[CiState] | list[np.ndarray],
            weights) -> RdmOne:
    """Weighted spin-traced one-particle density over states of one space."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be non-negative and sum to 1")
    if len(states) != weights.size:
        raise ValueError("one weight per state required")
    dm = np.zeros((space.n_orb, space.n_orb))
    for w, st in zip(weights, states):
        if w == 0.0:
            continue
        vec = st.coeffs if isinstance(st, CiState) else np.asarray(st)
        dm += w * transition_density(space, vec, vec)
    dm = (dm + dm.T) / 2.0
    trace_err = abs(np.trace(dm) - space.n_elec)
    if trace_err > 1e-10:
        raise ValueError(f"density trace off by {trace_err:.3e}")
    return RdmOne(matrix=dm)


def natural_occupations(rdm: RdmOne | np.ndarray) -> np.ndarray:
    """Eigenvalues of the one-particle density, descending, clipped to [0, 2]."""
    dm = rdm.matrix if isinstance(rdm, RdmOne) else np.asarray(rdm)
    if np.max(np.abs(dm - dm.T), initial=0.0) > 1e-10:
        raise ValueError("density matrix is not symmetric")
    occ = np.linalg.eigvalsh(dm)[::-1]
    overshoot = max(np.max(occ, initial=0.0) - 2.0, -np.min(occ, initial=0.0))
    if overshoot > 1e-10:
        raise ValueError(f"occupation outside [0, 2] by {overshoot:.3e}")
    return np.clip(occ, 0.0, 2.0)


# weights closer than this (in |c|^2) count as a conjugate pair
CONJUGATE_WEIGHT_TOL = 1e-6


def decompose(state: CiState, threshold_percent: float = 1.0):
    """Leading determinants of a CI vector as (rendered string, percent).

    Alpha/beta-conjugate partners of equal weight are merged into one
    line; the representative with the smaller basis index is printed, and
    the reported weight is the pair sum.  Sorted descending, truncated
    below threshold_percent.
    """
    space = state.space
    c2 = np.asarray(state.coeffs) ** 2
    entries: list[tuple[int, float]] = []
    merged: set[int] = set()
    for k in np.argsort(-c2, kind="stable"):
        k = int(k)
        if k in merged:
            continue
        det = space.determinant(k)
        weight = c2[k]
        conj = det.conjugate()
        if conj in space:
            kc = space.index(conj)
            if kc != k and kc not in merged and \
                    abs(c2[kc] - c2[k]) <= CONJUGATE_WEIGHT_TOL:
                weight += c2[kc]
                merged.add(kc)
                k = min(k, kc)
        merged.add(k)
        entries.append((k, 100.0 * weight))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [(space.determinant(k).to_string(), w)
            for k, w in entries if w >= threshold_percent]


def format_decomposition(lines) -> list[str]:
    """Render decomposition entries as '2 2 u 2 0 d 0 (49%)' strings."""
    return [f"{det} ({weight:.0f}%)" for det, weight in lines]
