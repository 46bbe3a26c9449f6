"""Spin ladder operators, <S^2> and spin-flip transition tables.

Determinants are stored as (alpha ops ascending)(beta ops ascending)
acting on the vacuum, so a beta-string operator picks up one extra sign
per alpha electron it crosses.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .detspace import CasSpace, enumerate_cas, occupied_orbitals


class LadderAnnihilation(ValueError):
    """S- (or S+) maps the state to zero: M_S is already extremal."""


def _bits_below(mask: int, p: int) -> int:
    return (mask & ((1 << p) - 1)).bit_count()


@lru_cache(maxsize=None)
def _raise_links(space: CasSpace):
    """Entries (src, dst, sign) of S+ = sum_p a+_pa a_pb into ms2+2."""
    if space.n_alpha + 1 > space.n_orb or space.n_beta - 1 < 0:
        return None
    upper = enumerate_cas(space.n_elec, space.n_orb, space.ms2 + 2)
    src, dst, sign = [], [], []
    nb = len(space.beta_strings)
    ub = len(upper.beta_strings)
    n_alpha = space.n_alpha
    for ia, a in enumerate(space.alpha_strings):
        for ib, b in enumerate(space.beta_strings):
            flippable = b & ~a
            for p in occupied_orbitals(flippable):
                a2 = a | (1 << p)
                b2 = b ^ (1 << p)
                # a_pb crosses n_alpha alphas + betas below p; a+_pa crosses
                # alphas below p
                par = n_alpha + _bits_below(b, p) + _bits_below(a, p)
                src.append(ia * nb + ib)
                dst.append(upper.alpha_index[a2] * ub + upper.beta_index[b2])
                sign.append(-1.0 if par & 1 else 1.0)
    return upper, (np.asarray(src, dtype=np.int64),
                   np.asarray(dst, dtype=np.int64),
                   np.asarray(sign))


@lru_cache(maxsize=None)
def _lower_links(space: CasSpace):
    """Entries (src, dst, sign) of S- = sum_p a+_pb a_pa into ms2-2."""
    if space.n_beta + 1 > space.n_orb or space.n_alpha - 1 < 0:
        return None
    lower = enumerate_cas(space.n_elec, space.n_orb, space.ms2 - 2)
    src, dst, sign = [], [], []
    nb = len(space.beta_strings)
    lb = len(lower.beta_strings)
    n_alpha = space.n_alpha
    for ia, a in enumerate(space.alpha_strings):
        for ib, b in enumerate(space.beta_strings):
            flippable = a & ~b
            for p in occupied_orbitals(flippable):
                a2 = a ^ (1 << p)
                b2 = b | (1 << p)
                # a_pa crosses alphas below p; a+_pb crosses the remaining
                # n_alpha-1 alphas + betas below p
                par = _bits_below(a, p) + (n_alpha - 1) + _bits_below(b, p)
                src.append(ia * nb + ib)
                dst.append(lower.alpha_index[a2] * lb + lower.beta_index[b2])
                sign.append(-1.0 if par & 1 else 1.0)
    return lower, (np.asarray(src, dtype=np.int64),
                   np.asarray(dst, dtype=np.int64),
                   np.asarray(sign))


def apply_s_plus(space: CasSpace, vec: np.ndarray):
    """Unnormalized S+ image; returns (upper space, vector)."""
    links = _raise_links(space)
    if links is None:
        raise LadderAnnihilation("S+ annihilates every state of this block")
    upper, (src, dst, sign) = links
    out = np.zeros(upper.size)
    np.add.at(out, dst, sign * np.asarray(vec)[src])
    return upper, out


def apply_s_minus(space: CasSpace, vec: np.ndarray, *, norm_tol: float = 1e-8):
    """Unnormalized S- image with norm^2 = S(S+1) - M(M-1).

    Raises LadderAnnihilation when the image norm falls below norm_tol,
    which signals M_S = -S.
    """
    links = _lower_links(space)
    if links is None:
        raise LadderAnnihilation("S- annihilates every state of this block")
    lower, (src, dst, sign) = links
    out = np.zeros(lower.size)
    np.add.at(out, dst, sign * np.asarray(vec)[src])
    if np.linalg.norm(out) < norm_tol:
        raise LadderAnnihilation("S- annihilated the state (M_S = -S)")
    return lower, out


def s_squared(space: CasSpace, vec: np.ndarray) -> float:
    """<v|S^2|v> via S^2 = S-S+ + Sz(Sz+1) for a normalized v."""
    ms = space.ms2 / 2.0
    base = ms * (ms + 1.0)
    links = _raise_links(space)
    if links is None:
        return base
    upper, (src, dst, sign) = links
    out = np.zeros(upper.size)
    np.add.at(out, dst, sign * np.asarray(vec)[src])
    return base + float(out @ out)


def s_squared_matrix(space: CasSpace, vecs: np.ndarray) -> np.ndarray:
    """<v_i|S^2|v_j> for the columns of vecs (all in the same space)."""
    vecs = np.asarray(vecs)
    k = vecs.shape[1]
    ms = space.ms2 / 2.0
    base = ms * (ms + 1.0) * (vecs.T @ vecs)
    links = _raise_links(space)
    if links is None:
        return base
    upper, (src, dst, sign) = links
    raised = np.zeros((upper.size, k))
    np.add.at(raised, dst, sign[:, None] * vecs[src, :])
    return base + raised.T @ raised


def multiplicity_label(s2: float, ms2: int, n_elec: int) -> int:
    """Nearest valid 2S+1 for an <S^2> value, honoring parity and |M_S|."""
    s_cont = 0.5 * (-1.0 + np.sqrt(max(0.0, 1.0 + 4.0 * s2)))
    two_s = round(2.0 * s_cont)
    if (two_s - n_elec) % 2:
        lower, upper = two_s - 1, two_s + 1
        two_s = lower if abs(lower / 2 * (lower / 2 + 1) - s2) <= \
            abs(upper / 2 * (upper / 2 + 1) - s2) else upper
    two_s = max(two_s, abs(ms2))
    return int(two_s + 1)


@lru_cache(maxsize=None)
def flip_lower_links(space: CasSpace):
    """Orbital-resolved spin-flip table a+_pb a_qa: ms2 -> ms2-2.

    Returns (lower_space, groups) with groups[p * n_orb + q] =
    (src, dst, sign) arrays.  Used for the Delta M_S = -1 blocks of the
    spin-orbit matrix.
    """
    if space.n_beta + 1 > space.n_orb or space.n_alpha - 1 < 0:
        return None
    lower = enumerate_cas(space.n_elec, space.n_orb, space.ms2 - 2)
    n_orb = space.n_orb
    groups: list[list[list]] = [[[], [], []] for _ in range(n_orb * n_orb)]
    nb = len(space.beta_strings)
    lb = len(lower.beta_strings)
    n_alpha = space.n_alpha
    for ia, a in enumerate(space.alpha_strings):
        for ib, b in enumerate(space.beta_strings):
            for q in occupied_orbitals(a):
                a2 = a ^ (1 << q)
                par_a = _bits_below(a, q)
                ja = lower.alpha_index[a2]
                for p in occupied_orbitals(~b & ((1 << n_orb) - 1)):
                    b2 = b | (1 << p)
                    par = par_a + (n_alpha - 1) + _bits_below(b, p)
                    g = groups[p * n_orb + q]
                    g[0].append(ia * nb + ib)
                    g[1].append(ja * lb + lower.beta_index[b2])
                    g[2].append(-1.0 if par & 1 else 1.0)
    packed = tuple((np.asarray(g[0], dtype=np.int64),
                    np.asarray(g[1], dtype=np.int64),
                    np.asarray(g[2])) for g in groups)
    return lower, packed
