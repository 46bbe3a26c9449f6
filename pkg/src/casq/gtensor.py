"""g-tensor extraction and doublet/quartet gap reporting.

Two routes to g are implemented and cross-checked:

EHA: the Zeeman operator mu = L + g_e S is evaluated over the ground
Kramers pair of the QDPT eigenstates, expanded in the Pauli basis
(Lambda_K = 1/2 sum_L g_KL sigma_L) and read off as g_KL = Tr(Lambda_K
sigma_L).  Principal values are the singular values of g, equivalently
the square roots of the eigenvalues of G = g g^T.

SOS: the second-order sum over same-spin states,

  Dg_KL = -(1/S) sum_b Delta_b^-1 [ <0|L_K|b><b|Z_L sigma_z|0>
                                   + <0|Z_K sigma_z|b><b|L_L|0> ],

evaluated in the M_S = S components, with sigma_z the Pauli matrix (the
stored Z couples to sigma, see the soc module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import spin_transition_densities
from .casci import Multiplet
from .ingest import PropertyIntegrals
from .soc import SocStateBasis, SoEigenstates, time_reversal_matrix
from .units import G_E, HARTREE_TO_CM

_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


@dataclass(frozen=True)
class GTensor:
    """3x3 Zeeman coupling with unsigned principal values and axes."""

    matrix: np.ndarray
    principal: tuple[float, float, float]   # (g_x, g_y, g_z) by axis match
    axes: np.ndarray                        # columns = principal directions
    method: str

    def __post_init__(self):
        if any(g < 0 for g in self.principal):
            raise ValueError("principal g values must be non-negative")


def _principal_from_g(g: np.ndarray, method: str) -> GTensor:
    G = g @ g.T
    w, vecs = np.linalg.eigh((G + G.T) / 2.0)
    vals = np.sqrt(np.clip(w, 0.0, None))
    # assign each principal direction to the lab axis it overlaps most
    assigned = [-1, -1, -1]
    order = np.argsort(-np.abs(vecs), axis=None)
    for flat in order:
        axis, col = int(flat // 3), int(flat % 3)
        if assigned[axis] < 0 and col not in assigned:
            assigned[axis] = col
        if all(a >= 0 for a in assigned):
            break
    principal = tuple(float(vals[assigned[ax]]) for ax in range(3))
    axes = vecs[:, assigned]
    return GTensor(matrix=g, principal=principal, axes=axes, method=method)


def zeeman_basis_matrices(basis: SocStateBasis, multiplets: list[Multiplet],
                          prop: PropertyIntegrals) -> np.ndarray:
    """mu_K = L_K + g_e S_K over the basis entries, K in (x, y, z)."""
    n = basis.size
    mu = np.zeros((3, n, n), dtype=complex)
    # spin part: analytic within each multiplet (ladder-phased components)
    for ii, ei in enumerate(basis.entries):
        for jj, ej in enumerate(basis.entries):
            if ei.multiplet != ej.multiplet:
                continue
            s = ei.two_s / 2.0
            mj = ej.ms2 / 2.0
            if ei.ms2 == ej.ms2:
                mu[2, ii, jj] += G_E * mj
            elif ei.ms2 == ej.ms2 + 2:
                c = 0.5 * np.sqrt(s * (s + 1.0) - mj * (mj + 1.0))
                mu[0, ii, jj] += G_E * c
                mu[1, ii, jj] += G_E * (-1.0j) * c
            elif ei.ms2 == ej.ms2 - 2:
                c = 0.5 * np.sqrt(s * (s + 1.0) - mj * (mj - 1.0))
                mu[0, ii, jj] += G_E * c
                mu[1, ii, jj] += G_E * (1.0j) * c
    # orbital part: spin-free, couples equal M_S (and equal S in practice)
    for jj, ej in enumerate(basis.entries):
        ket = multiplets[ej.multiplet].component(ej.ms2)
        for ii, ei in enumerate(basis.entries):
            if ei.ms2 != ej.ms2:
                continue
            bra = multiplets[ei.multiplet].component(ei.ms2)
            ga, gb = spin_transition_densities(ket.space, bra.coeffs,
                                               ket.coeffs)
            dens = ga + gb
            for k in range(3):
                mu[k, ii, jj] += 1.0j * np.sum(prop.L[k] * dens)
    return mu


def g_tensor_eha(so: SoEigenstates, multiplets: list[Multiplet],
                 prop: PropertyIntegrals, *, pair: int = 0,
                 tr_tol: float = 1e-6) -> GTensor:
    """Effective-Hamiltonian g from one Kramers pair of QDPT eigenstates."""
    if not so.kramers_pairs:
        raise ValueError("no Kramers pairs available (even-electron system?)")
    i, j = so.kramers_pairs[pair]
    T = time_reversal_matrix(so.basis)
    overlap = abs(np.vdot(so.vectors[:, j], T @ np.conj(so.vectors[:, i])))
    if abs(overlap - 1.0) > tr_tol:
        raise ValueError(
            f"states {i},{j} are not time-reversal conjugate "
            f"(|<j|T|i>| = {overlap:.6f})")
    V = so.vectors[:, [i, j]]
    mu = zeeman_basis_matrices(so.basis, multiplets, prop)
    g = np.zeros((3, 3))
    for K in range(3):
        lam = V.conj().T @ mu[K] @ V
        for L in range(3):
            val = np.trace(lam @ _PAULI[L])
            g[K, L] = val.real
    return _principal_from_g(g, "EHA")


def g_tensor_sos(ground: Multiplet, excited: list[Multiplet],
                 prop: PropertyIntegrals, *,
                 min_gap: float = 1e-8) -> GTensor:
    """Sum-over-states g for the ground multiplet (Delta g from same-S
    excited states, evaluated in the top M_S = S components)."""
    s = ground.two_s / 2.0
    if s <= 0:
        raise ValueError("SOS g requires a spin-carrying ground state")
    top = ground.two_s
    v0 = ground.component(top)
    space = v0.space
    dg = np.zeros((3, 3))
    for mult in excited:
        if mult.two_s != ground.two_s:
            continue
        gap = mult.energy - ground.energy
        if gap < min_gap:
            raise ValueError(
                f"excited multiplet gap {gap:.3e} Hartree below {min_gap:.0e}; "
                f"degenerate ground manifold, use the effective Hamiltonian")
        vb = mult.component(top)
        ga_0b, gb_0b = spin_transition_densities(space, v0.coeffs, vb.coeffs)
        ga_b0, gb_b0 = spin_transition_densities(space, vb.coeffs, v0.coeffs)
        # all four factors are i * (real contraction); i*i = -1 overall
        l_0b = np.array([np.sum(prop.L[k] * (ga_0b + gb_0b)) for k in range(3)])
        z_b0 = np.array([np.sum(prop.Z[k] * (ga_b0 - gb_b0)) for k in range(3)])
        z_0b = np.array([np.sum(prop.Z[k] * (ga_0b - gb_0b)) for k in range(3)])
        l_b0 = np.array([np.sum(prop.L[k] * (ga_b0 + gb_b0)) for k in range(3)])
        dg += (np.outer(l_0b, z_b0) + np.outer(z_0b, l_b0)) / (s * gap)
    return _principal_from_g(G_E * np.eye(3) + dg, "SOS")


# ---------------------------------------------------------------------------
# Multiplet gap report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    rows: tuple[dict, ...]
    quartet_below_doublet: bool


def gap_report(multiplets: list[Multiplet]) -> GapReport:
    """Energies and pairwise gaps (cm^-1) of the multiplet ladder.

    Flags the ordering whenever any quartet lies below any doublet.
    """
    ordered = sorted(multiplets, key=lambda m: m.energy)
    rows = []
    e0 = ordered[0].energy if ordered else 0.0
    prev = None
    for k, m in enumerate(ordered):
        rel = (m.energy - e0) * HARTREE_TO_CM
        gap = (m.energy - prev) * HARTREE_TO_CM if prev is not None else 0.0
        rows.append({
            "index": k,
            "multiplicity": m.multiplicity,
            "energy_hartree": m.energy,
            "rel_cm": rel,
            "gap_to_previous_cm": gap,
        })
        prev = m.energy
    doublets = [m.energy for m in ordered if m.multiplicity == 2]
    quartets = [m.energy for m in ordered if m.multiplicity == 4]
    flag = bool(doublets and quartets and min(quartets) < max(doublets))
    return GapReport(rows=tuple(rows), quartet_below_doublet=flag)


def format_gap_report(report: GapReport) -> str:
    lines = ["idx  2S+1    E (Hartree)        dE_0 (cm^-1)   gap (cm^-1)"]
    for r in report.rows:
        lines.append(f"{r['index']:>3d}  {r['multiplicity']:>4d}  "
                     f"{r['energy_hartree']:>16.10f}  {r['rel_cm']:>12.2f}  "
                     f"{r['gap_to_previous_cm']:>12.2f}")
    if report.quartet_below_doublet:
        lines.append("flag: quartet below doublet ordering detected")
    return "\n".join(lines)
