"""Spin-orbit matrix over multiplet components, QDPT and Kramers pairing.

The one-electron spin-orbit operator couples to Pauli matrices,

    H_SO = sum_i z(i) . sigma(i),      <p|z_K|q> = i Z[K,p,q],

so a ligand-field Z = (zeta/2) L realizes zeta l.s exactly.  Matrix
elements over multiplet components reduce to spin-conserving and
spin-flip one-particle transition densities; phase consistency of the
ladder-built components makes the matrix Hermitian, which is verified
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import spin_transition_densities
from .casci import Multiplet
from .detspace import CasSpace
from .ingest import PropertyIntegrals
from .spin import flip_lower_links


class PhaseConsistencyError(ValueError):
    """Multiplet component phases are inconsistent (Hermiticity breach)."""


class KramersPairingError(ValueError):
    """QDPT eigenstates of an odd-electron system failed to pair."""


@dataclass(frozen=True)
class BasisEntry:
    multiplet: int      # index into the multiplet list
    two_s: int
    ms2: int


@dataclass(frozen=True)
class SocStateBasis:
    """Ordered (multiplet, S, M_S) component labels entering QDPT."""

    entries: tuple[BasisEntry, ...]

    @property
    def size(self) -> int:
        return len(self.entries)

    def index(self, multiplet: int, ms2: int) -> int:
        for k, e in enumerate(self.entries):
            if e.multiplet == multiplet and e.ms2 == ms2:
                return k
        raise KeyError((multiplet, ms2))


def soc_basis(multiplets: list[Multiplet]) -> SocStateBasis:
    """All 2S+1 components of every multiplet, M_S descending."""
    entries = []
    for idx, m in enumerate(multiplets):
        for ms2 in range(m.two_s, -m.two_s - 1, -2):
            entries.append(BasisEntry(idx, m.two_s, ms2))
    return SocStateBasis(tuple(entries))


def diagonal_energies(basis: SocStateBasis,
                      multiplets: list[Multiplet]) -> np.ndarray:
    return np.array([multiplets[e.multiplet].energy for e in basis.entries])


def _flip_tdm(space_ket: CasSpace, bra: np.ndarray,
              ket: np.ndarray) -> np.ndarray:
    """gamma[p,q] = <bra| a+_pb a_qa |ket> with bra in the ms2-2 space."""
    links = flip_lower_links(space_ket)
    if links is None:
        return np.zeros((space_ket.n_orb, space_ket.n_orb))
    _, groups = links
    n = space_ket.n_orb
    out = np.zeros((n, n))
    bra = np.asarray(bra).ravel()
    ket = np.asarray(ket).ravel()
    for g, (src, dst, sign) in enumerate(groups):
        if src.size:
            out[g // n, g % n] = float(np.sum(sign * bra[dst] * ket[src]))
    return out


def soc_matrix(basis: SocStateBasis, multiplets: list[Multiplet],
               prop: PropertyIntegrals, *,
               hermiticity_tol: float = 1e-8) -> np.ndarray:
    """Complex Hermitian H_SO over the basis entries (Hartree).

    Couples blocks with |Delta S| <= 1 and |Delta M_S| <= 1; every element
    is evaluated independently and the Hermiticity residual is checked
    against hermiticity_tol before symmetrizing.
    """
    n = basis.size
    zx, zy, zz = prop.Z
    H = np.zeros((n, n), dtype=complex)
    for jj, ej in enumerate(basis.entries):
        ket_state = multiplets[ej.multiplet].component(ej.ms2)
        for ii, ei in enumerate(basis.entries):
            if abs(ei.two_s - ej.two_s) > 2:
                continue
            dm = ei.ms2 - ej.ms2
            if dm == 0:
                bra_state = multiplets[ei.multiplet].component(ei.ms2)
                ga, gb = spin_transition_densities(
                    ket_state.space, bra_state.coeffs, ket_state.coeffs)
                H[ii, jj] = 1j * np.sum(zz * (ga - gb))
            elif dm == -2:
                bra_state = multiplets[ei.multiplet].component(ei.ms2)
                gflip = _flip_tdm(ket_state.space, bra_state.coeffs,
                                  ket_state.coeffs)
                H[ii, jj] = np.sum((1j * zx - zy) * gflip)
            elif dm == 2:
                bra_state = multiplets[ei.multiplet].component(ei.ms2)
                # <i|a+_pa a_qb|j> = <j|a+_qb a_pa|i> for real CI vectors
                gflip = _flip_tdm(bra_state.space, ket_state.coeffs,
                                  bra_state.coeffs).T
                H[ii, jj] = np.sum((1j * zx + zy) * gflip)
    resid = float(np.max(np.abs(H - H.conj().T)))
    if resid > hermiticity_tol:
        raise PhaseConsistencyError(
            f"SOC Hermiticity residual {resid:.3e} exceeds "
            f"{hermiticity_tol:.0e}; multiplet phases are inconsistent")
    return (H + H.conj().T) / 2.0


def time_reversal_matrix(basis: SocStateBasis) -> np.ndarray:
    """Antiunitary T as a signed permutation: T psi = Tmat @ conj(psi).

    T|S, M> = (-1)^(S-M) |S, -M> for ladder-phased components.
    """
    n = basis.size
    T = np.zeros((n, n))
    for k, e in enumerate(basis.entries):
        partner = basis.index(e.multiplet, -e.ms2)
        T[partner, k] = -1.0 if ((e.two_s - e.ms2) // 2) % 2 else 1.0
    return T


@dataclass
class SoEigenstates:
    """QDPT eigenstates: diag(E_spin_free) + H_SO diagonalized exactly."""

    energies: np.ndarray
    vectors: np.ndarray                 # complex columns over the basis
    kramers_pairs: list[tuple[int, int]]
    basis: SocStateBasis


def qdpt(basis: SocStateBasis, energies: np.ndarray, soc: np.ndarray, *,
         odd_electrons: bool | None = None, degeneracy_tol: float = 1e-10,
         overlap_tol: float = 1e-8) -> SoEigenstates:
    """Diagonalize diag(energies) + soc and establish Kramers pairing.

    For odd-electron systems every eigenvalue must be two-fold degenerate
    (Kramers theorem); the pairing is located through time-reversal
    overlaps and its failure signals broken Hermiticity or phases.
    """
    energies = np.asarray(energies, dtype=float)
    if soc.shape != (basis.size, basis.size):
        raise ValueError("soc matrix does not match basis size")
    H = np.diag(energies).astype(complex) + soc
    w, V = np.linalg.eigh(H)
    pairs: list[tuple[int, int]] = []
    if odd_electrons is None:
        odd_electrons = bool(basis.entries and basis.entries[0].two_s % 2)
    if odd_electrons:
        T = time_reversal_matrix(basis)
        used = np.zeros(basis.size, dtype=bool)
        for i in range(basis.size):
            if used[i]:
                continue
            tpsi = T @ np.conj(V[:, i])
            overlaps = np.abs(V.conj().T @ tpsi)
            overlaps[used] = -1.0
            overlaps[i] = -1.0
            j = int(np.argmax(overlaps))
            if overlaps[j] < overlap_tol:
                raise KramersPairingError(
                    f"no time-reversal partner for state {i} "
                    f"(best overlap {overlaps[j]:.3e})")
            if abs(w[i] - w[j]) > degeneracy_tol:
                raise KramersPairingError(
                    f"states {i},{j} are time-reversal partners but split "
                    f"by {abs(w[i] - w[j]):.3e} Hartree")
            used[i] = used[j] = True
            pairs.append((i, j))
    return SoEigenstates(energies=w, vectors=V, kramers_pairs=pairs,
                         basis=basis)
