"""Transition dipoles, oscillator strengths and broadened absorption curves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import transition_density
from .casci import CiState
from .detspace import CasSpace
from .ingest import PropertyIntegrals
from .units import FWHM_TO_SIGMA, HARTREE_TO_EV

# heuristic band tag threshold; tags carry an "(auto)" marker because the
# assignment is by intensity only, never by symmetry analysis
SORET_F_THRESHOLD = 0.5


@dataclass(frozen=True)
class SpectrumLine:
    """One absorption line of the stick spectrum."""

    delta_e_ev: float
    f_osc: float
    from_state: int
    to_state: int
    label: str = ""
    spin_forbidden: bool = False

    def __post_init__(self):
        if self.f_osc < 0:
            raise ValueError("oscillator strength must be non-negative")


def transition_dipole(space: CasSpace, state0: CiState, state_n: CiState,
                      prop: PropertyIntegrals) -> tuple[np.ndarray, bool]:
    """<0|D|N> (atomic units) via the one-particle transition density.

    Returns (mu, spin_forbidden); a multiplicity mismatch yields a zero
    vector flagged spin-forbidden rather than an error.
    """
    if state0.space is not space or state_n.space is not space:
        raise ValueError("both states must live in the given space")
    if state0.multiplicity != state_n.multiplicity:
        return np.zeros(3), True
    dens = transition_density(space, state0.coeffs, state_n.coeffs)
    mu = np.array([np.sum(prop.D[k] * dens) for k in range(3)])
    return mu, False


def oscillator_strength(delta_e_hartree: float, mu: np.ndarray) -> float:
    """f = (2/3) dE |mu|^2 in atomic units."""
    if delta_e_hartree < 0:
        raise ValueError("negative excitation energy")
    mu = np.asarray(mu, dtype=float)
    return (2.0 / 3.0) * float(delta_e_hartree) * float(mu @ mu)


def transition_table(states: list[CiState], prop: PropertyIntegrals,
                     labels: dict[int, str] | None = None) -> list[SpectrumLine]:
    """Stick spectrum from the first state to every higher one.

    Spin-forbidden transitions are listed with f = 0 rather than dropped.
    User labels win; otherwise strong lines get a marked heuristic tag.
    """
    labels = labels or {}
    if not states:
        return []
    ground = states[0]
    lines = []
    for k, state in enumerate(states[1:], start=1):
        if state.space is ground.space:
            mu, forbidden = transition_dipole(ground.space, ground, state, prop)
        else:
            mu, forbidden = np.zeros(3), True
        de = state.energy - ground.energy
        f = 0.0 if forbidden else oscillator_strength(de, mu)
        label = labels.get(k, "")
        if not label:
            if forbidden:
                label = "spin-forbidden"
            elif f >= SORET_F_THRESHOLD:
                label = "Soret-like (auto)"
        lines.append(SpectrumLine(delta_e_ev=de * HARTREE_TO_EV, f_osc=f,
                                  from_state=0, to_state=k, label=label,
                                  spin_forbidden=forbidden))
    return lines


def broaden(lines: list[SpectrumLine], fwhm_ev: float,
            grid: np.ndarray) -> np.ndarray:
    """Sum of Gaussians, each integrating to its oscillator strength."""
    if fwhm_ev <= 0:
        raise ValueError("fwhm must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty energy grid")
    sigma = fwhm_ev * FWHM_TO_SIGMA
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    out = np.zeros_like(grid)
    for line in lines:
        if line.f_osc == 0.0:
            continue
        out += line.f_osc * norm * np.exp(
            -0.5 * ((grid - line.delta_e_ev) / sigma) ** 2)
    return out


def energy_grid(min_ev: float, max_ev: float, step_ev: float) -> np.ndarray:
    if step_ev <= 0 or max_ev <= min_ev:
        raise ValueError("spectrum grid requires max > min and step > 0")
    n = int(round((max_ev - min_ev) / step_ev)) + 1
    return min_ev + step_ev * np.arange(n)


def spectrum_csv(grid: np.ndarray, intensity: np.ndarray) -> str:
    rows = ["energy_eV,intensity"]
    rows.extend(f"{e:.6f},{i:.8e}" for e, i in zip(grid, intensity))
    return "\n".join(rows) + "\n"


@dataclass
class LineTable:
    """Rendered line list in the state/weight/energy/band column layout."""

    lines: list[SpectrumLine] = field(default_factory=list)

    def to_rows(self) -> list[dict]:
        return [{
            "from": ln.from_state,
            "to": ln.to_state,
            "delta_e_ev": ln.delta_e_ev,
            "f_osc": ln.f_osc,
            "band": ln.label,
            "spin_forbidden": ln.spin_forbidden,
        } for ln in self.lines]
