"""Integral containers, file parsers and run configuration.

File formats
------------
FCIDUMP: header ``&FCI NORB=...,NELEC=...,MS2=.../`` followed by lines
``value i j k l`` with 1-based indices; ``i j 0 0`` is a one-electron
element, ``0 0 0 0`` the core energy, anything else the chemist-notation
two-electron integral (ij|kl).

Property file: sections ``ANGMOM_X/Y/Z``, ``SOC_X/Y/Z``, ``DIP_X/Y/Z``,
each followed by n_orb^2 whitespace-separated reals in row-major order.
``#`` starts a comment.  Missing sections default to zero matrices.
The SOC matrices couple to Pauli matrices: H_SO = sum_i z(i) . sigma(i).

Run configuration: flat ``key=value`` lines, ``#`` comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np


class ParseError(ValueError):
    """Malformed input file; message carries a line number where known."""


@dataclass(frozen=True)
class OrbitalSpace:
    """Active spatial orbitals with text labels and the core energy."""

    n_orb: int
    labels: tuple[str, ...]
    core_energy: float = 0.0

    def __post_init__(self):
        if self.n_orb < 1:
            raise ValueError(f"n_orb must be >= 1, got {self.n_orb}")
        if len(self.labels) != self.n_orb:
            raise ValueError(
                f"{len(self.labels)} labels for {self.n_orb} orbitals")


def default_labels(n_orb: int) -> tuple[str, ...]:
    return tuple(f"orb{p + 1}" for p in range(n_orb))


@dataclass(frozen=True, eq=False)
class IntegralSet:
    """One- and two-electron integrals over the active orbitals (Hartree).

    h is symmetric; g2 holds (pq|rs) in chemist notation with all eight
    permutational copies populated.
    """

    h: np.ndarray
    g2: np.ndarray
    core_energy: float = 0.0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        n = h.shape[0]
        if h.shape != (n, n):
            raise ValueError(f"h must be square, got {h.shape}")
        if g2.shape != (n, n, n, n):
            raise ValueError(f"g2 must be {n}^4, got {g2.shape}")
        if np.max(np.abs(h - h.T), initial=0.0) > 1e-12:
            raise ValueError("h is not symmetric to 1e-12")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if np.max(np.abs(g2 - g2.transpose(perm)), initial=0.0) > 1e-12:
                raise ValueError(f"g2 violates permutational symmetry {perm}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g2", g2)

    @property
    def n_orb(self) -> int:
        return self.h.shape[0]


def set_chem(g2: np.ndarray, i: int, j: int, k: int, l: int, value: float) -> None:
    """Assign (ij|kl) = value together with its 8 permutational images."""
    for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                       (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)):
        g2[a, b, c, d] = value


def symmetrize_8fold(g: np.ndarray) -> np.ndarray:
    """Average onto the 8-fold symmetric part, writing each canonical
    integral to all image slots so the result is bitwise symmetric."""
    n = g.shape[0]
    out = np.empty_like(g)
    for i in range(n):
        for j in range(i + 1):
            for k in range(i + 1):
                lmax = j if k == i else k
                for l in range(lmax + 1):
                    images = ((i, j, k, l), (j, i, k, l), (i, j, l, k),
                              (j, i, l, k), (k, l, i, j), (l, k, i, j),
                              (k, l, j, i), (l, k, j, i))
                    val = sum(g[t] for t in images) / 8.0
                    for t in images:
                        out[t] = val
    return out


@dataclass(frozen=True)
class PropertyIntegrals:
    """One-electron property matrices over the active orbitals.

    L and Z are real antisymmetric and store the imaginary parts of the
    angular-momentum and effective SOC operators: <p|l_K|q> = i L[K,p,q]
    and <p|z_K|q> = i Z[K,p,q].  D holds the real symmetric dipole
    matrices.  Axis order is (x, y, z).
    """

    L: np.ndarray
    Z: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        D = np.asarray(self.D, dtype=float)
        n = L.shape[-1]
        for name, arr in (("L", L), ("Z", Z), ("D", D)):
            if arr.shape != (3, n, n):
                raise ValueError(f"{name} must have shape (3, n, n), got {arr.shape}")
        for name, arr in (("L", L), ("Z", Z)):
            resid = np.max(np.abs(arr + arr.transpose(0, 2, 1)))
            if resid > 1e-12:
                raise ValueError(f"{name} not antisymmetric (residual {resid:.2e})")
        resid = np.max(np.abs(D - D.transpose(0, 2, 1)))
        if resid > 1e-12:
            raise ValueError(f"D not symmetric (residual {resid:.2e})")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "D", D)

    @property
    def n_orb(self) -> int:
        return self.L.shape[-1]


def zero_properties(n_orb: int) -> PropertyIntegrals:
    z = np.zeros((3, n_orb, n_orb))
    return PropertyIntegrals(L=z.copy(), Z=z.copy(), D=z.copy())


@dataclass(frozen=True)
class DavidsonOptions:
    """Iterative-solver controls."""

    max_subspace: int = 0          # 0 = auto (scaled from root count)
    tol: float = 1e-8              # residual norm threshold, Hartree
    max_iter: int = 200
    guess_dim: int = 0             # 0 = auto

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("davidson tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("davidson max_iter must be >= 1")


@dataclass(frozen=True)
class SpectrumOptions:
    fwhm_ev: float = 0.1
    min_ev: float = 0.0
    max_ev: float = 5.0
    step_ev: float = 0.01


@dataclass(frozen=True)
class RunConfig:
    """Complete run controls for the CASCI -> SOC -> spectra pipeline."""

    cas: tuple[int, int]
    roots_per_multiplicity: Mapping[int, int] = field(default_factory=dict)
    ms2_blocks: tuple[int, ...] = ()
    davidson: DavidsonOptions = field(default_factory=DavidsonOptions)
    soc_enabled: bool = True
    spectrum: SpectrumOptions = field(default_factory=SpectrumOptions)

    def __post_init__(self):
        n_elec, n_orb = self.cas
        for mult, count in self.roots_per_multiplicity.items():
            if count < 0:
                raise ValueError(f"root count for multiplicity {mult} is negative")
            if mult < 1 or (mult - 1) > n_elec or (n_elec - (mult - 1)) % 2:
                raise ValueError(
                    f"multiplicity {mult} impossible for {n_elec} electrons")
        total = self.total_roots
        if self.davidson.guess_dim and self.davidson.guess_dim < total:
            raise ValueError(
                f"guess_dim={self.davidson.guess_dim} < total roots {total}")
        if not self.ms2_blocks:
            blocks = tuple(sorted({m - 1 for m in self.roots_per_multiplicity}))
            object.__setattr__(self, "ms2_blocks", blocks)

    @property
    def total_roots(self) -> int:
        return sum(self.roots_per_multiplicity.values())


# ---------------------------------------------------------------------------
# FCIDUMP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FcidumpData:
    """Parsed FCIDUMP: integral payload plus the header electron counts."""

    orbitals: OrbitalSpace
    integrals: IntegralSet
    n_elec: int | None
    ms2: int | None


_HEADER_INT = {
    "NORB": re.compile(r"NORB\s*=\s*(-?\d+)", re.IGNORECASE),
    "NELEC": re.compile(r"NELEC\s*=\s*(-?\d+)", re.IGNORECASE),
    "MS2": re.compile(r"MS2\s*=\s*(-?\d+)", re.IGNORECASE),
}


def read_fcidump(text: str) -> FcidumpData:
    """Parse FCIDUMP text, keeping NELEC/MS2 as run-config defaults."""
    lines = text.splitlines()
    header_end = None
    header = []
    for lineno, line in enumerate(lines):
        header.append(line)
        if "/" in line or "&END" in line.upper():
            header_end = lineno
            break
    header_text = " ".join(header)
    if header_end is None or "&FCI" not in header_text.upper():
        raise ParseError("missing FCIDUMP header (&FCI ... /)")
    m = _HEADER_INT["NORB"].search(header_text)
    if m is None:
        raise ParseError("FCIDUMP header does not define NORB")
    n_orb = int(m.group(1))
    if n_orb < 1:
        raise ParseError(f"NORB={n_orb} invalid")
    m = _HEADER_INT["NELEC"].search(header_text)
    n_elec = int(m.group(1)) if m else None
    m = _HEADER_INT["MS2"].search(header_text)
    ms2 = int(m.group(1)) if m else None

    h = np.zeros((n_orb, n_orb))
    g2 = np.zeros((n_orb, n_orb, n_orb, n_orb))
    core = 0.0
    for lineno in range(header_end + 1, len(lines)):
        raw = lines[lineno]
        stripped = raw.strip()
        if not stripped:
            continue
        tokens = stripped.replace("−", "-").split()
        if len(tokens) != 5:
            raise ParseError(
                f"line {lineno + 1}: expected 'value i j k l', got {raw!r}")
        try:
            value = float(tokens[0])
            i, j, k, l = (int(t) for t in tokens[1:])
        except ValueError:
            raise ParseError(
                f"line {lineno + 1}: cannot parse {raw!r}") from None
        for idx in (i, j, k, l):
            if idx < 0 or idx > n_orb:
                raise ParseError(
                    f"line {lineno + 1}: orbital index {idx} outside [0, {n_orb}]")
        if i == j == k == l == 0:
            core = value
        elif k == 0 and l == 0 and i > 0 and j > 0:
            h[i - 1, j - 1] = value
            h[j - 1, i - 1] = value
        elif min(i, j, k, l) > 0:
            set_chem(g2, i - 1, j - 1, k - 1, l - 1, value)
        else:
            raise ParseError(
                f"line {lineno + 1}: unsupported index pattern {i} {j} {k} {l}")
    orbitals = OrbitalSpace(n_orb, default_labels(n_orb), core)
    return FcidumpData(orbitals, IntegralSet(h, g2, core), n_elec, ms2)


def parse_fcidump(text: str) -> tuple[OrbitalSpace, IntegralSet]:
    data = read_fcidump(text)
    return data.orbitals, data.integrals


def write_fcidump(integrals: IntegralSet, n_elec: int = 0, ms2: int = 0) -> str:
    """Serialize at full precision; unique integrals only."""
    n = integrals.n_orb
    out = [f"&FCI NORB={n},NELEC={n_elec},MS2={ms2},/"]
    seen = set()
    for i in range(n):
        for j in range(i + 1):
            for k in range(i + 1):
                lmax = j if k == i else k
                for l in range(lmax + 1):
                    val = float(integrals.g2[i, j, k, l])
                    if val != 0.0 and (i, j, k, l) not in seen:
                        seen.add((i, j, k, l))
                        out.append(f"{val!r} {i + 1} {j + 1} {k + 1} {l + 1}")
    for i in range(n):
        for j in range(i + 1):
            val = float(integrals.h[i, j])
            if val != 0.0:
                out.append(f"{val!r} {i + 1} {j + 1} 0 0")
    out.append(f"{float(integrals.core_energy)!r} 0 0 0 0")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Property matrices
# ---------------------------------------------------------------------------

_SECTIONS = ("ANGMOM_X", "ANGMOM_Y", "ANGMOM_Z",
             "SOC_X", "SOC_Y", "SOC_Z",
             "DIP_X", "DIP_Y", "DIP_Z")

SYMMETRY_TOL = 1e-8


def parse_property_integrals(text: str, n_orb: int) -> PropertyIntegrals:
    """Parse the sectioned property file; absent sections stay zero."""
    tokens: list[tuple[str, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        tokens.extend((tok, lineno) for tok in body.split())

    sections: dict[str, np.ndarray] = {}
    pos = 0
    n2 = n_orb * n_orb
    while pos < len(tokens):
        name, lineno = tokens[pos]
        key = name.upper()
        if key not in _SECTIONS:
            raise ParseError(f"line {lineno}: unknown section {name!r}")
        vals = []
        pos += 1
        while pos < len(tokens) and len(vals) < n2:
            tok, tok_line = tokens[pos]
            try:
                vals.append(float(tok.replace("−", "-")))
            except ValueError:
                raise ParseError(
                    f"line {tok_line}: expected a number in section {name}, "
                    f"got {tok!r}") from None
            pos += 1
        if len(vals) != n2:
            raise ParseError(
                f"section {name}: expected {n2} elements, got {len(vals)}")
        sections[key] = np.array(vals).reshape(n_orb, n_orb)

    L = np.zeros((3, n_orb, n_orb))
    Z = np.zeros((3, n_orb, n_orb))
    D = np.zeros((3, n_orb, n_orb))
    for axis, ax_name in enumerate("XYZ"):
        for prefix, target, antisym in (("ANGMOM", L, True), ("SOC", Z, True),
                                        ("DIP", D, False)):
            key = f"{prefix}_{ax_name}"
            if key not in sections:
                continue
            mat = sections[key]
            if antisym:
                resid = np.max(np.abs(mat + mat.T)) / 2.0
                fixed = (mat - mat.T) / 2.0
            else:
                resid = np.max(np.abs(mat - mat.T)) / 2.0
                fixed = (mat + mat.T) / 2.0
            if resid > SYMMETRY_TOL:
                kind = "antisymmetry" if antisym else "symmetry"
                raise ParseError(
                    f"section {key}: {kind} violation {resid:.3e} exceeds "
                    f"{SYMMETRY_TOL:.0e}")
            target[axis] = fixed
    return PropertyIntegrals(L=L, Z=Z, D=D)


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "cas_nelec", "cas_norb", "ms2_blocks", "davidson_tol",
    "davidson_max_subspace", "davidson_max_iter", "guess_dim", "soc",
    "spectrum_fwhm_ev", "spectrum_min_ev", "spectrum_max_ev",
    "spectrum_step_ev",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_run_config(text: str, *, default_cas: tuple[int, int] | None = None,
                     default_ms2: int | None = None) -> RunConfig:
    """Parse the flat key=value run configuration."""
    raw: dict[str, str] = {}
    roots: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"line {lineno}: expected key=value, got {body!r}")
        key, _, value = body.partition("=")
        key = key.strip().lower()
        value = value.strip()
        m = re.fullmatch(r"roots_mult_(\d+)", key)
        if m:
            roots[int(m.group(1))] = _parse_int(value, key, lineno)
            continue
        if key not in _CONFIG_KEYS:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value

    if "cas_nelec" in raw and "cas_norb" in raw:
        cas = (_parse_int(raw["cas_nelec"], "cas_nelec"),
               _parse_int(raw["cas_norb"], "cas_norb"))
    elif default_cas is not None:
        cas = default_cas
    else:
        raise ParseError("cas_nelec/cas_norb missing and no defaults available")

    ms2_blocks: tuple[int, ...] = ()
    if "ms2_blocks" in raw:
        ms2_blocks = tuple(int(tok) for tok in raw["ms2_blocks"].split(","))
    if not roots:
        # default: ground multiplicity block, enough roots to see low states
        ms2 = default_ms2 if default_ms2 is not None else cas[0] % 2
        roots = {abs(ms2) + 1: 5}

    davidson = DavidsonOptions(
        max_subspace=_parse_int(raw.get("davidson_max_subspace", "0"),
                                "davidson_max_subspace"),
        tol=float(raw.get("davidson_tol", "1e-8")),
        max_iter=_parse_int(raw.get("davidson_max_iter", "200"),
                            "davidson_max_iter"),
        guess_dim=_parse_int(raw.get("guess_dim", "0"), "guess_dim"),
    )
    soc = raw.get("soc", "true").lower()
    if soc in _TRUE:
        soc_enabled = True
    elif soc in _FALSE:
        soc_enabled = False
    else:
        raise ParseError(f"soc={soc!r} is not a boolean")
    spectrum = SpectrumOptions(
        fwhm_ev=float(raw.get("spectrum_fwhm_ev", "0.1")),
        min_ev=float(raw.get("spectrum_min_ev", "0.0")),
        max_ev=float(raw.get("spectrum_max_ev", "5.0")),
        step_ev=float(raw.get("spectrum_step_ev", "0.01")),
    )
    return RunConfig(cas=cas, roots_per_multiplicity=roots,
                     ms2_blocks=ms2_blocks, davidson=davidson,
                     soc_enabled=soc_enabled, spectrum=spectrum)


def _parse_int(value: str, key: str, lineno: int | None = None) -> int:
    try:
        return int(value)
    except ValueError:
        where = f"line {lineno}: " if lineno else ""
        raise ParseError(f"{where}{key} must be an integer, got {value!r}") from None


def with_roots(config: RunConfig, roots: Mapping[int, int]) -> RunConfig:
    return replace(config, roots_per_multiplicity=dict(roots), ms2_blocks=())
