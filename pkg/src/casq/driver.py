"""End-to-end workflows: multiplicity-resolved CASCI, QDPT and g-tensors.

Each requested multiplicity 2S+1 is solved in its top block M_S = S.
Because low-lying higher-multiplicity states drop into lower-M_S blocks
as extra components, the root count per block is padded and grown until
the requested number of roots of the right multiplicity is found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .casci import (CiState, Multiplet, assemble_multiplets, dense_solve,
                    enumerate_cas, solve_davidson)
from .gtensor import GapReport, GTensor, g_tensor_eha, g_tensor_sos, gap_report
from .ingest import IntegralSet, PropertyIntegrals, RunConfig
from .soc import SocStateBasis, SoEigenstates, diagonal_energies, qdpt, soc_basis, soc_matrix


def solve_multiplicity(ints: IntegralSet, config: RunConfig, mult: int,
                       count: int, *, method: str = "davidson") -> list[CiState]:
    """The lowest `count` roots of multiplicity 2S+1 = mult, solved at
    the top block M_S = S."""
    n_elec, n_orb = config.cas
    if n_orb != ints.n_orb:
        raise ValueError(f"cas_norb={n_orb} does not match the "
                         f"{ints.n_orb}-orbital integral set")
    ms2 = mult - 1
    space = enumerate_cas(n_elec, n_orb, ms2)
    intruders = sum(c for m, c in config.roots_per_multiplicity.items()
                    if m > mult)
    n_solve = min(space.size, count + intruders + 2)
    while True:
        states = _solve(space, ints, n_solve, config, method)
        found = [s for s in states if s.multiplicity == mult]
        if len(found) >= count or n_solve >= space.size:
            break
        n_solve = min(space.size, max(n_solve + 4, (3 * n_solve) // 2))
    if len(found) < count:
        raise ValueError(
            f"only {len(found)} roots of multiplicity {mult} exist in "
            f"CAS{config.cas} (requested {count})")
    return found[:count]


def _solve(space, ints, n_roots, config, method):
    if method == "dense":
        return dense_solve(space, ints, n_roots)
    if method == "davidson":
        return solve_davidson(space, ints, n_roots, config.davidson)
    raise ValueError(f"unknown solver method {method!r}")


def solve_multiplets(ints: IntegralSet, config: RunConfig, *,
                     method: str = "davidson") -> list[Multiplet]:
    """Solve every requested multiplicity and ladder down to full multiplets."""
    anchors: list[CiState] = []
    for mult, count in sorted(config.roots_per_multiplicity.items()):
        if count > 0:
            anchors.extend(solve_multiplicity(ints, config, mult, count,
                                              method=method))
    return assemble_multiplets(anchors, ints)


@dataclass
class MagneticResult:
    """QDPT + g-tensor bundle for one model."""

    multiplets: list[Multiplet]
    basis: SocStateBasis
    soc: np.ndarray
    so_states: SoEigenstates
    g_eha: GTensor
    g_sos: GTensor | None
    gaps: GapReport
    warnings: list[str] = field(default_factory=list)


def run_gtensor(ints: IntegralSet, prop: PropertyIntegrals,
                config: RunConfig, *, method: str = "davidson",
                multiplets: list[Multiplet] | None = None) -> MagneticResult:
    """CASCI -> multiplets -> SOC -> QDPT -> EHA and SOS g-tensors."""
    n_elec = config.cas[0]
    if n_elec % 2 == 0:
        raise ValueError("g-tensor extraction needs an odd electron count "
                         "(no Kramers pair otherwise)")
    if multiplets is None:
        multiplets = solve_multiplets(ints, config, method=method)
    basis = soc_basis(multiplets)
    soc = soc_matrix(basis, multiplets, prop)
    so_states = qdpt(basis, diagonal_energies(basis, multiplets), soc)
    g_eha = g_tensor_eha(so_states, multiplets, prop)
    warnings: list[str] = []
    ground = multiplets[0]
    try:
        g_sos = g_tensor_sos(ground, multiplets[1:], prop)
    except ValueError as exc:
        g_sos = None
        warnings.append(f"sum-over-states g unavailable: {exc}")
    return MagneticResult(multiplets=multiplets, basis=basis, soc=soc,
                          so_states=so_states, g_eha=g_eha, g_sos=g_sos,
                          gaps=gap_report(multiplets), warnings=warnings)
