"""CASCI Hamiltonian action, eigensolvers and spin multiplets.

The Hamiltonian lives entirely in the active space:

    H = E_core + sum_pq h[p,q] E_pq
        + 1/2 sum_pqrs (pq|rs) (E_pq E_rs - delta_qr E_ps)

Three independent routes to H are provided: per-element Slater-Condon
rules (`hamiltonian_element`), an explicit dense build
(`dense_hamiltonian`), and a string-driven matrix-free product (`sigma`)
used by the Davidson solver.  They are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .davidson import DavidsonNotConverged, davidson_lowest  # noqa: F401 (re-export)
from .detspace import (CasSpace, Determinant, enumerate_cas,  # noqa: F401
                       occupied_orbitals, relative_sign, single_excitation_sign)
from .ingest import DavidsonOptions, IntegralSet
from .spin import (apply_s_minus, multiplicity_label, s_squared,
                   s_squared_matrix)

DENSE_CAP = 20_000

# roots closer than this are treated as one degenerate group and rotated
# to the S^2 eigenbasis for deterministic spin labels
DEGENERACY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Slater-Condon rules
# ---------------------------------------------------------------------------

def hamiltonian_element(d1: Determinant, d2: Determinant,
                        ints: IntegralSet) -> float:
    """<d1|H|d2> for two determinants of the same space."""
    dega2 = (d1.alpha ^ d2.alpha).bit_count()
    degb2 = (d1.beta ^ d2.beta).bit_count()
    if dega2 + degb2 > 4:
        return 0.0
    h, g2 = ints.h, ints.g2
    if dega2 + degb2 == 0:
        return _diagonal_element(h, g2, d1.alpha, d1.beta, ints.core_energy)
    if dega2 == 2 and degb2 == 0:
        return _single_element(h, g2, d2.alpha, d1.alpha, d2.beta)
    if dega2 == 0 and degb2 == 2:
        return _single_element(h, g2, d2.beta, d1.beta, d2.alpha)
    if dega2 == 4 and degb2 == 0:
        return _double_same(g2, d2.alpha, d1.alpha)
    if dega2 == 0 and degb2 == 4:
        return _double_same(g2, d2.beta, d1.beta)
    # one alpha move and one beta move
    (i,) = occupied_orbitals(d2.alpha & ~d1.alpha)
    (a,) = occupied_orbitals(d1.alpha & ~d2.alpha)
    (j,) = occupied_orbitals(d2.beta & ~d1.beta)
    (b,) = occupied_orbitals(d1.beta & ~d2.beta)
    sign = (single_excitation_sign(d2.alpha, i, a)
            * single_excitation_sign(d2.beta, j, b))
    return sign * g2[a, i, b, j]


def _diagonal_element(h, g2, a_mask, b_mask, core):
    occ_a = occupied_orbitals(a_mask)
    occ_b = occupied_orbitals(b_mask)
    e = core
    for k in occ_a:
        e += h[k, k]
    for k in occ_b:
        e += h[k, k]
    for k in occ_a:
        for l in occ_a:
            e += 0.5 * (g2[k, k, l, l] - g2[k, l, l, k])
    for k in occ_b:
        for l in occ_b:
            e += 0.5 * (g2[k, k, l, l] - g2[k, l, l, k])
    for k in occ_a:
        for l in occ_b:
            e += g2[k, k, l, l]
    return float(e)


def _single_element(h, g2, ket_same, bra_same, ket_other):
    (i,) = occupied_orbitals(ket_same & ~bra_same)
    (a,) = occupied_orbitals(bra_same & ~ket_same)
    val = h[a, i]
    for k in occupied_orbitals(ket_same):
        val += g2[a, i, k, k] - g2[a, k, k, i]
    for k in occupied_orbitals(ket_other):
        val += g2[a, i, k, k]
    return single_excitation_sign(ket_same, i, a) * float(val)


def _double_same(g2, ket, bra):
    i, j = occupied_orbitals(ket & ~bra)
    a, b = occupied_orbitals(bra & ~ket)
    return relative_sign(ket, bra) * float(g2[a, i, b, j] - g2[a, j, b, i])


# ---------------------------------------------------------------------------
# Vectorized diagonal and string tables
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _occupations(space: CasSpace):
    return (_occ_matrix(space.alpha_strings, space.n_orb),
            _occ_matrix(space.beta_strings, space.n_orb))


def _occ_matrix(strings, n_orb):
    occ = np.zeros((len(strings), n_orb))
    for i, s in enumerate(strings):
        for p in occupied_orbitals(s):
            occ[i, p] = 1.0
    return occ


def hamiltonian_diagonal(space: CasSpace, ints: IntegralSet) -> np.ndarray:
    """Diagonal of H as an (n_alpha_strings, n_beta_strings) array."""
    occ_a, occ_b = _occupations(space)
    hd = np.diag(ints.h)
    J = np.einsum("ppqq->pq", ints.g2)
    K = np.einsum("pqqp->pq", ints.g2)
    ea = occ_a @ hd + 0.5 * np.einsum("ip,pq,iq->i", occ_a, J - K, occ_a)
    eb = occ_b @ hd + 0.5 * np.einsum("ip,pq,iq->i", occ_b, J - K, occ_b)
    return ea[:, None] + eb[None, :] + occ_a @ J @ occ_b.T + ints.core_energy


@lru_cache(maxsize=None)
def _string_links(strings: tuple[int, ...], n_orb: int):
    """E_pq action tables within one spin-string set.

    Returns (by_src, by_dst): each a tuple over p*n_orb+q groups of
    (src, dst, sign) arrays, sorted by src and dst respectively.  The
    diagonal p=q occupation entries are included.
    """
    index = {s: i for i, s in enumerate(strings)}
    groups = [([], [], []) for _ in range(n_orb * n_orb)]
    full = (1 << n_orb) - 1
    for src, s in enumerate(strings):
        occ = occupied_orbitals(s)
        virt = occupied_orbitals(full & ~s)
        for q in occ:
            g = groups[q * n_orb + q]
            g[0].append(src)
            g[1].append(src)
            g[2].append(1.0)
        for q in occ:
            removed = s ^ (1 << q)
            for p in virt:
                g = groups[p * n_orb + q]
                g[0].append(src)
                g[1].append(index[removed | (1 << p)])
                g[2].append(float(single_excitation_sign(s, q, p)))
    by_src = []
    by_dst = []
    for g in groups:
        src = np.asarray(g[0], dtype=np.int64)
        dst = np.asarray(g[1], dtype=np.int64)
        sign = np.asarray(g[2])
        by_src.append((src, dst, sign))
        order = np.argsort(dst, kind="stable")
        by_dst.append((src[order], dst[order], sign[order]))
    return tuple(by_src), tuple(by_dst)


@dataclass(frozen=True, eq=False)
class _SigmaPlan:
    """Flattened link tables for the single-batch sigma fast path.

    The spin with the larger link table becomes the row side: its scatter
    and gather run as single vectorized updates over fused (group, string)
    indices, with destination-sorted segment sums for the gather.  The
    other spin works per orbital-pair group on contiguous column blocks.
    """

    transpose: bool              # True when beta strings are the row side
    n_row: int
    n_col: int
    row_scatter_rows: np.ndarray   # g * n_row + dst, unique
    row_scatter_src: np.ndarray
    row_scatter_sign: np.ndarray
    row_gather_rows: np.ndarray    # g * n_row + src, dst-sorted
    row_gather_sign: np.ndarray
    row_gather_starts: np.ndarray
    row_gather_dst: np.ndarray
    col_groups: tuple              # (src, dst, sign) per orbital pair


def _flat_entries(groups):
    g_all, src_all, dst_all, sign_all = [], [], [], []
    for g, (src, dst, sign) in enumerate(groups):
        if src.size:
            g_all.append(np.full(src.size, g, dtype=np.int64))
            src_all.append(src)
            dst_all.append(dst)
            sign_all.append(sign)
    if not g_all:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy(), np.empty(0)
    return (np.concatenate(g_all), np.concatenate(src_all),
            np.concatenate(dst_all), np.concatenate(sign_all))


@lru_cache(maxsize=None)
def _sigma_plan(space: CasSpace) -> _SigmaPlan:
    n = space.n_orb
    a_src, _ = _string_links(space.alpha_strings, n)
    b_src, _ = _string_links(space.beta_strings, n)
    count_a = sum(s.size for s, _, _ in a_src)
    count_b = sum(s.size for s, _, _ in b_src)
    transpose = count_b > count_a
    row_groups, col_groups = (b_src, a_src) if transpose else (a_src, b_src)
    n_row = len(space.beta_strings) if transpose else len(space.alpha_strings)
    n_col = len(space.alpha_strings) if transpose else len(space.beta_strings)
    g, src, dst, sign = _flat_entries(row_groups)
    if dst.size:
        order = np.argsort(dst, kind="stable")
        gs, ss, ds, ws = g[order], src[order], dst[order], sign[order]
        starts = np.flatnonzero(np.r_[True, ds[1:] != ds[:-1]])
        gather = (gs * n_row + ss, ws, starts, ds[starts])
    else:
        empty = np.empty(0, dtype=np.int64)
        gather = (empty, np.empty(0), empty.copy(), empty.copy())
    return _SigmaPlan(
        transpose=transpose, n_row=n_row, n_col=n_col,
        row_scatter_rows=g * n_row + dst, row_scatter_src=src,
        row_scatter_sign=sign,
        row_gather_rows=gather[0], row_gather_sign=gather[1],
        row_gather_starts=gather[2], row_gather_dst=gather[3],
        col_groups=col_groups)


def _sigma_fast(plan: _SigmaPlan, h2: np.ndarray, C: np.ndarray,
                out: np.ndarray, n: int) -> None:
    """out += H2 action on C with C, out in (n_row, n_col) orientation."""
    n_row, n_col = plan.n_row, plan.n_col
    t1 = np.zeros((n * n, n_row, n_col))
    flat = t1.reshape(n * n * n_row, n_col)
    if plan.row_scatter_rows.size:
        flat[plan.row_scatter_rows] = \
            plan.row_scatter_sign[:, None] * C[plan.row_scatter_src, :]
    for g, (src, dst, sign) in enumerate(plan.col_groups):
        if src.size:
            t1[g][:, dst] += sign[None, :] * C[:, src]
    G = (h2 @ t1.reshape(n * n, n_row * n_col)).reshape(n * n, n_row, n_col)
    del t1
    Gflat = G.reshape(n * n * n_row, n_col)
    if plan.row_gather_rows.size:
        R = plan.row_gather_sign[:, None] * Gflat[plan.row_gather_rows]
        out[plan.row_gather_dst] += np.add.reduceat(
            R, plan.row_gather_starts, axis=0)
        del R
    for g, (src, dst, sign) in enumerate(plan.col_groups):
        if src.size:
            out[:, dst] += sign[None, :] * G[g][:, src]


@lru_cache(maxsize=64)
def _absorbed_eri(ints: IntegralSet, n_elec: int) -> np.ndarray:
    """Fold h and the -1/2 delta contraction into a single two-electron
    tensor so that H - E_core = sum_pq E_pq [sum_rs h2[pq,rs] E_rs] v."""
    n = ints.n_orb
    f = (ints.h - 0.5 * np.einsum("prrq->pq", ints.g2)) / n_elec
    h2 = ints.g2.copy()
    for k in range(n):
        h2[k, k, :, :] += f
        h2[:, :, k, k] += f
    return 0.5 * h2.reshape(n * n, n * n)


def sigma(space: CasSpace, ints: IntegralSet, vec: np.ndarray, *,
          max_memory_gb: float = 2.0) -> np.ndarray:
    """Matrix-free H @ vec over the determinant basis.

    Memory for the intermediate scales as n_orb^2 * size * 16 bytes; the
    alpha-string axis is processed in batches when that exceeds
    max_memory_gb.
    """
    v = np.asarray(vec, dtype=float)
    if v.size != space.size:
        raise ValueError(f"vector length {v.size} != space size {space.size}")
    shape_in = v.shape
    na = len(space.alpha_strings)
    nb = len(space.beta_strings)
    C = v.reshape(na, nb)
    out = ints.core_energy * C
    if space.n_elec == 0:
        return out.reshape(shape_in)
    n = space.n_orb
    h2 = _absorbed_eri(ints, space.n_elec)

    per_alpha = 2 * 8 * n * n * nb
    batch = max(1, min(na, int(max_memory_gb * 2**30 / max(per_alpha, 1))))
    if batch >= na:
        plan = _sigma_plan(space)
        if plan.transpose:
            Ct = np.ascontiguousarray(C.T)
            out_t = np.ascontiguousarray(out.T)
            _sigma_fast(plan, h2, Ct, out_t, n)
            out = out_t.T
        else:
            _sigma_fast(plan, h2, C, out, n)
        return np.ascontiguousarray(out).reshape(shape_in)

    a_src, a_dst = _string_links(space.alpha_strings, n)
    b_src, _ = _string_links(space.beta_strings, n)
    for a0 in range(0, na, batch):
        a1 = min(na, a0 + batch)
        m = a1 - a0
        t1 = np.zeros((n * n, m, nb))
        for g, (src, dst, sign) in enumerate(a_dst):
            lo, hi = np.searchsorted(dst, (a0, a1))
            if lo < hi:
                t1[g, dst[lo:hi] - a0, :] += sign[lo:hi, None] * C[src[lo:hi], :]
        Cb = C[a0:a1]
        for g, (src, dst, sign) in enumerate(b_src):
            if src.size:
                t1[g][:, dst] += sign[None, :] * Cb[:, src]
        G = (h2 @ t1.reshape(n * n, m * nb)).reshape(n * n, m, nb)
        for g, (src, dst, sign) in enumerate(a_src):
            lo, hi = np.searchsorted(src, (a0, a1))
            if lo < hi:
                out[dst[lo:hi], :] += sign[lo:hi, None] * G[g, src[lo:hi] - a0, :]
        ob = out[a0:a1]
        for g, (src, dst, sign) in enumerate(b_src):
            if src.size:
                ob[:, dst] += sign[None, :] * G[g][:, src]
    return out.reshape(shape_in)


def sigma_block(space: CasSpace, ints: IntegralSet, block: np.ndarray,
                **kw) -> np.ndarray:
    return np.column_stack([sigma(space, ints, block[:, k], **kw)
                            for k in range(block.shape[1])])


# ---------------------------------------------------------------------------
# Dense oracle
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _string_singles(strings: tuple[int, ...], n_orb: int):
    """All proper single excitations (I, J, created, annihilated, sign)."""
    index = {s: i for i, s in enumerate(strings)}
    out = []
    full = (1 << n_orb) - 1
    for I, s in enumerate(strings):
        for q in occupied_orbitals(s):
            removed = s ^ (1 << q)
            for p in occupied_orbitals(full & ~s):
                J = index[removed | (1 << p)]
                out.append((I, J, p, q, single_excitation_sign(s, q, p)))
    return tuple(out)


@lru_cache(maxsize=None)
def _string_doubles(strings: tuple[int, ...], n_orb: int):
    """All double excitations (I, J, a, i, b, j, sign), removed i<j, added a<b."""
    index = {s: i for i, s in enumerate(strings)}
    out = []
    full = (1 << n_orb) - 1
    for I, s in enumerate(strings):
        occ = occupied_orbitals(s)
        virt = occupied_orbitals(full & ~s)
        for ii in range(len(occ)):
            for jj in range(ii + 1, len(occ)):
                i, j = occ[ii], occ[jj]
                base = s ^ (1 << i) ^ (1 << j)
                for aa in range(len(virt)):
                    for bb in range(aa + 1, len(virt)):
                        a, b = virt[aa], virt[bb]
                        t = base | (1 << a) | (1 << b)
                        out.append((I, index[t], a, i, b, j, relative_sign(s, t)))
    return tuple(out)


def dense_hamiltonian(space: CasSpace, ints: IntegralSet,
                      cap: int = DENSE_CAP) -> np.ndarray:
    """Explicit H over the full determinant basis (for oracle-scale spaces)."""
    N = space.size
    if N > cap:
        raise ValueError(f"space size {N} exceeds dense cap {cap}")
    na = len(space.alpha_strings)
    nb = len(space.beta_strings)
    n = space.n_orb
    h, g2 = ints.h, ints.g2
    H = np.zeros((N, N))
    H[np.arange(N), np.arange(N)] = hamiltonian_diagonal(space, ints).ravel()
    if space.n_elec == 0:
        return H
    occ_a, occ_b = _occupations(space)
    Jt = np.einsum("pqkk->pqk", g2)
    Kt = np.einsum("pkkq->pqk", g2)

    singles_a = _string_singles(space.alpha_strings, n)
    singles_b = _string_singles(space.beta_strings, n)
    ar_b = np.arange(nb)
    ar_a = np.arange(na) * nb
    for I, J, p, q, s in singles_a:
        c0 = h[p, q] + occ_a[I] @ (Jt[p, q] - Kt[p, q])
        H[I * nb + ar_b, J * nb + ar_b] += s * (c0 + occ_b @ Jt[p, q])
    for I, J, p, q, s in singles_b:
        c0 = h[p, q] + occ_b[I] @ (Jt[p, q] - Kt[p, q])
        H[ar_a + I, ar_a + J] += s * (c0 + occ_a @ Jt[p, q])
    for I, J, a, i, b, j, s in _string_doubles(space.alpha_strings, n):
        H[I * nb + ar_b, J * nb + ar_b] += s * (g2[a, i, b, j] - g2[a, j, b, i])
    for I, J, a, i, b, j, s in _string_doubles(space.beta_strings, n):
        H[ar_a + I, ar_a + J] += s * (g2[a, i, b, j] - g2[a, j, b, i])
    if singles_b:
        Ib = np.array([e[0] for e in singles_b])
        Jb = np.array([e[1] for e in singles_b])
        rb = np.array([e[2] for e in singles_b])
        sb = np.array([e[3] for e in singles_b])
        sgb = np.array([e[4] for e in singles_b], dtype=float)
        for I, J, p, q, s in singles_a:
            H[I * nb + Ib, J * nb + Jb] += s * sgb * g2[p, q, rb, sb]
    return H


# ---------------------------------------------------------------------------
# CI states
# ---------------------------------------------------------------------------

@dataclass
class CiState:
    """One converged CI root with its spin diagnostics."""

    energy: float
    coeffs: np.ndarray
    space: CasSpace = field(repr=False)
    s2_expect: float
    multiplicity: int

    @property
    def ms2(self) -> int:
        return self.space.ms2

    @property
    def spin(self) -> float:
        return (self.multiplicity - 1) / 2.0

    def __repr__(self) -> str:
        return (f"CiState(E={self.energy:.10f}, mult={self.multiplicity}, "
                f"ms2={self.ms2}, <S2>={self.s2_expect:.6f})")


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def _finalize_states(space: CasSpace, energies: np.ndarray,
                     vectors: np.ndarray) -> list[CiState]:
    """Rotate degenerate groups to the S^2 eigenbasis and label spins."""
    energies = np.asarray(energies, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    k = energies.shape[0]
    states: list[CiState] = []
    i = 0
    while i < k:
        j = i + 1
        while j < k and energies[j] - energies[j - 1] <= DEGENERACY_TOL:
            j += 1
        block = vectors[:, i:j]
        evals = energies[i:j]
        if j - i > 1:
            s2m = s_squared_matrix(space, block)
            _, rot = np.linalg.eigh((s2m + s2m.T) / 2.0)
            block = block @ rot
            evals = np.einsum("ik,i,ik->k", rot, evals, rot)
        for c in range(block.shape[1]):
            v = _sign_fix(block[:, c])
            v = v / np.linalg.norm(v)
            s2 = s_squared(space, v)
            states.append(CiState(
                energy=float(evals[c]), coeffs=v, space=space,
                s2_expect=float(s2),
                multiplicity=multiplicity_label(s2, space.ms2, space.n_elec)))
        i = j
    states.sort(key=lambda st: st.energy)
    return states


def dense_solve(space: CasSpace, ints: IntegralSet, n_roots: int,
                cap: int = DENSE_CAP) -> list[CiState]:
    """Brute-force eigensolver on the explicitly built H."""
    if not 1 <= n_roots <= space.size:
        raise ValueError(f"n_roots={n_roots} outside [1, {space.size}]")
    H = dense_hamiltonian(space, ints, cap=cap)
    w, U = np.linalg.eigh(H)
    return _finalize_states(space, w[:n_roots], U[:, :n_roots])


def solve_davidson(space: CasSpace, ints: IntegralSet, n_roots: int,
                   options: DavidsonOptions | None = None) -> list[CiState]:
    """Lowest CI roots by block Davidson with a deterministic guess.

    The guess block diagonalizes H over the guess_dim determinants of
    lowest diagonal energy; when guess_dim reaches the space size this is
    already the exact solution.
    """
    options = options or DavidsonOptions()
    N = space.size
    if not 1 <= n_roots <= N:
        raise ValueError(f"n_roots={n_roots} outside [1, {N}]")
    diag = hamiltonian_diagonal(space, ints).ravel()
    gd = options.guess_dim or max(32, 2 * n_roots)
    gd = min(max(gd, n_roots), N)
    sel = np.argsort(diag, kind="stable")[:gd]
    dets = [space.determinant(int(idx)) for idx in sel]
    Hg = np.empty((gd, gd))
    for a in range(gd):
        for b in range(a + 1):
            Hg[a, b] = Hg[b, a] = hamiltonian_element(dets[a], dets[b], ints)
    w, U = np.linalg.eigh(Hg)
    if gd == N:
        vectors = np.zeros((N, n_roots))
        vectors[sel] = U[:, :n_roots]
        return _finalize_states(space, w[:n_roots], vectors)

    n_start = min(gd, n_roots + 3)
    v0 = np.zeros((N, n_start))
    v0[sel] = U[:, :n_start]
    result = davidson_lowest(
        lambda block: sigma_block(space, ints, block),
        diag, n_roots, v0, tol=options.tol,
        max_subspace=options.max_subspace, max_iter=options.max_iter)
    return _finalize_states(space, result.energies, result.vectors)


# ---------------------------------------------------------------------------
# Multiplets
# ---------------------------------------------------------------------------

@dataclass
class Multiplet:
    """The 2S+1 phase-aligned M_S components of one spin eigenstate."""

    two_s: int
    energy: float
    components: dict[int, CiState]   # key: 2*M_S

    @property
    def S(self) -> float:
        return self.two_s / 2.0

    @property
    def multiplicity(self) -> int:
        return self.two_s + 1

    def component(self, ms2: int) -> CiState:
        return self.components[ms2]

    def __repr__(self) -> str:
        return (f"Multiplet(2S+1={self.multiplicity}, "
                f"E={self.energy:.10f})")


def assemble_multiplets(states: list[CiState], ints: IntegralSet,
                        tol: float = 1e-8) -> list[Multiplet]:
    """Generate all M_S components of top-M_S roots by repeated S-.

    Every input state must satisfy 2S = M_S*2 (a top component); the
    ladder construction keeps the relative phases consistent across
    components, which the spin-orbit coupling matrix relies on.  Each
    component energy is re-verified as a Rayleigh quotient within tol.
    """
    multiplets = []
    for state in states:
        two_s = state.multiplicity - 1
        if two_s != state.ms2:
            raise ValueError(
                f"state with 2S={two_s} solved at ms2={state.ms2} is not a "
                f"top component; solve it at ms2={two_s}")
        components = {state.ms2: state}
        space = state.space
        vec = state.coeffs
        for ms2 in range(state.ms2 - 2, -state.ms2 - 1, -2):
            space, vec = apply_s_minus(space, vec)
            vec = vec / np.linalg.norm(vec)
            e = float(vec @ sigma(space, ints, vec))
            if abs(e - state.energy) > tol:
                raise ValueError(
                    f"Rayleigh quotient at ms2={ms2} deviates by "
                    f"{abs(e - state.energy):.3e} (> {tol:.0e}); "
                    f"degenerate roots may be mixed")
            components[ms2] = CiState(
                energy=e, coeffs=vec, space=space,
                s2_expect=float(s_squared(space, vec)),
                multiplicity=state.multiplicity)
        multiplets.append(Multiplet(two_s=two_s, energy=state.energy,
                                    components=components))
    multiplets.sort(key=lambda m: m.energy)
    return multiplets
