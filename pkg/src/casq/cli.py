"""Command-line front end: count / casci / gtensor / spectrum.

Exit codes: 0 success, 1 input error, 2 numerical non-convergence,
3 internal invariant breach.  Every run writes out/manifest.json, on
failure paths included.  Heavy imports happen after thread setup so that
--threads / CASQ_THREADS can pin the BLAS pool before numpy loads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOCONV = 2
EXIT_INVARIANT = 3

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _setup_threads(threads: int | None) -> int | None:
    n = threads
    if n is None and os.environ.get("CASQ_THREADS"):
        try:
            n = int(os.environ["CASQ_THREADS"])
        except ValueError:
            raise SystemExit("CASQ_THREADS must be an integer")
    if n is not None:
        for var in _THREAD_VARS:
            os.environ[var] = str(n)
    return n


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """Run record emitted on every invocation, success or failure."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.data = {
            "command": command,
            "argv": sys.argv[1:],
            "config": {},
            "inputs": {},
            "artifact_version": _version(),
            "timings_s": {},
            "warnings": [],
            "status": "running",
            "exit_code": None,
        }
        self.out_dir = Path(getattr(args, "out", None) or "casq_out")
        self._t0 = {}

    def add_input(self, path: Path):
        self.data["inputs"][str(path)] = _sha256(path)

    def stage(self, name: str):
        self._t0[name] = time.perf_counter()

    def done(self, name: str):
        self.data["timings_s"][name] = round(
            time.perf_counter() - self._t0.pop(name), 6)

    def warn(self, message: str):
        self.data["warnings"].append(message)

    def finish(self, exit_code: int):
        self.data["status"] = "ok" if exit_code == EXIT_OK else "failed"
        self.data["exit_code"] = exit_code
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / "manifest.json"
            path.write_text(json.dumps(self.data, indent=2, default=str) + "\n")
        except OSError as exc:  # manifest failure must not mask the result
            print(f"warning: could not write manifest: {exc}", file=sys.stderr)


def _version() -> str:
    from casq import __version__

    return __version__


def _read_text(path_str: str, manifest: Manifest) -> str:
    path = Path(path_str)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    manifest.add_input(path)
    return path.read_text()


def _write(out_dir: Path, name: str, text: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casq",
        description="Determinant CASCI with spin-orbit QDPT, g-tensors "
                    "and absorption spectra.")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread count (or env CASQ_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    count = sub.add_parser("count", help="determinant count of a CAS block")
    count.add_argument("--nelec", type=int, required=True)
    count.add_argument("--norb", type=int, required=True)
    count.add_argument("--ms2", type=int, required=True)
    count.add_argument("--out", default=None)

    def common(p, need_inputs=True):
        p.add_argument("--config", default=None, help="key=value run config")
        if need_inputs:
            p.add_argument("--fcidump", default=None)
            p.add_argument("--prop", default=None,
                           help="property matrices (ANGMOM/SOC/DIP sections)")
            p.add_argument("--lf", default=None, metavar="PRESET",
                           help="built-in ligand-field preset "
                                "(d1-tetragonal, d9-planar)")
            p.add_argument("--zeta", type=float, default=None,
                           help="override preset SOC constant (cm^-1)")
        p.add_argument("--roots-mult", action="append", default=[],
                       metavar="N=K", help="roots per multiplicity, repeatable")
        p.add_argument("--ms2", default=None,
                       help="comma-separated 2*M_S blocks to solve")
        p.add_argument("--oracle", choices=["dense"], default=None)
        p.add_argument("--out", default=None, help="output directory")

    casci = sub.add_parser("casci", help="CASCI states and decompositions")
    common(casci)

    gt = sub.add_parser("gtensor", help="EHA and sum-over-states g-tensors")
    common(gt)

    spect = sub.add_parser("spectrum", help="oscillator strengths and curve")
    common(spect)
    spect.add_argument("--lines", default=None,
                       help="explicit line list file: delta_e_ev f_osc [label]")
    return parser


def _parse_roots_flags(flags: list[str]) -> dict[int, int]:
    roots = {}
    for item in flags:
        try:
            mult, count = item.split("=")
            roots[int(mult)] = int(count)
        except ValueError:
            raise ValueError(f"--roots-mult expects N=K, got {item!r}") from None
    return roots


def _load_problem(args, manifest: Manifest):
    """Assemble (orbitals, integrals, properties, config) from the inputs."""
    from dataclasses import asdict, replace

    from casq.ingest import (parse_property_integrals, parse_run_config,
                             read_fcidump, zero_properties)
    from casq.ligandfield import build_ligand_field_model, preset_model

    if (args.lf is None) == (args.fcidump is None):
        raise ValueError("exactly one of --lf or --fcidump is required")

    if args.lf is not None:
        model = preset_model(args.lf, zeta=args.zeta)
        orbitals, ints, prop, config = build_ligand_field_model(model)
        if args.config:
            config = parse_run_config(
                _read_text(args.config, manifest),
                default_cas=config.cas, default_ms2=config.cas[0] % 2)
    else:
        data = read_fcidump(_read_text(args.fcidump, manifest))
        orbitals, ints = data.orbitals, data.integrals
        prop = zero_properties(orbitals.n_orb)
        if args.prop:
            prop = parse_property_integrals(
                _read_text(args.prop, manifest), orbitals.n_orb)
        default_cas = (data.n_elec, orbitals.n_orb) if data.n_elec is not None \
            else None
        if args.config:
            config = parse_run_config(
                _read_text(args.config, manifest),
                default_cas=default_cas, default_ms2=data.ms2)
        elif default_cas is not None:
            config = parse_run_config("", default_cas=default_cas,
                                      default_ms2=data.ms2)
        else:
            raise ValueError("FCIDUMP lacks NELEC and no --config given")

    roots = _parse_roots_flags(args.roots_mult)
    if roots:
        config = replace(config, roots_per_multiplicity=roots, ms2_blocks=())
    if args.ms2 is not None:
        blocks = tuple(int(tok) for tok in args.ms2.split(","))
        config = replace(config, ms2_blocks=blocks)
    manifest.data["config"] = {
        "cas": list(config.cas),
        "roots_per_multiplicity": dict(config.roots_per_multiplicity),
        "ms2_blocks": list(config.ms2_blocks),
        "davidson": {
            "tol": config.davidson.tol,
            "max_subspace": config.davidson.max_subspace,
            "max_iter": config.davidson.max_iter,
            "guess_dim": config.davidson.guess_dim,
        },
        "soc_enabled": config.soc_enabled,
        "spectrum": asdict(config.spectrum),
    }
    return orbitals, ints, prop, config


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_count(args, manifest: Manifest) -> int:
    from casq.detspace import cas_dimension

    manifest.stage("count")
    n = cas_dimension(args.nelec, args.norb, args.ms2)
    manifest.done("count")
    print(n)
    manifest.data["config"] = {"nelec": args.nelec, "norb": args.norb,
                               "ms2": args.ms2, "count": n}
    return EXIT_OK


def _state_rows(multiplets, threshold=1.0):
    from casq.analysis import decompose, format_decomposition
    from casq.units import HARTREE_TO_CM, HARTREE_TO_EV

    rows = []
    e0 = min(m.energy for m in multiplets)
    for m in sorted(multiplets, key=lambda m: m.energy):
        top = m.component(m.two_s)
        lines = decompose(top, threshold_percent=threshold)
        rows.append({
            "multiplicity": m.multiplicity,
            "energy_hartree": m.energy,
            "delta_e_ev": (m.energy - e0) * HARTREE_TO_EV,
            "delta_e_cm": (m.energy - e0) * HARTREE_TO_CM,
            "s2": top.s2_expect,
            "decomposition": format_decomposition(lines),
        })
    return rows


def _format_state_table(rows) -> str:
    out = ["# weights merge alpha/beta-conjugate determinant pairs",
           "state  2S+1        E (Hartree)    dE (eV)    dE (cm^-1)    <S^2>"]
    for k, r in enumerate(rows):
        out.append(f"{k:>5d}  {r['multiplicity']:>4d}  {r['energy_hartree']:>17.10f}"
                   f"  {r['delta_e_ev']:>9.4f}  {r['delta_e_cm']:>12.2f}"
                   f"  {r['s2']:>7.4f}")
        for line in r["decomposition"]:
            out.append(f"           {line}")
    return "\n".join(out) + "\n"


def cmd_casci(args, manifest: Manifest) -> int:
    from casq.driver import solve_multiplets

    orbitals, ints, prop, config = _load_problem(args, manifest)
    manifest.stage("casci")
    multiplets = solve_multiplets(ints, config)
    manifest.done("casci")

    if args.oracle == "dense":
        manifest.stage("oracle")
        reference = solve_multiplets(ints, config, method="dense")
        manifest.done("oracle")
        for a, b in zip(multiplets, reference):
            if abs(a.energy - b.energy) > 1e-9:
                manifest.warn(
                    f"davidson/dense mismatch {abs(a.energy - b.energy):.3e} "
                    f"Hartree")
                raise InvariantBreach(
                    f"Davidson energy deviates from the dense oracle by "
                    f"{abs(a.energy - b.energy):.3e} Hartree")

    rows = _state_rows(multiplets)
    table = _format_state_table(rows)
    print(table, end="")
    _write(manifest.out_dir, "casci_report.txt", table)
    _write(manifest.out_dir, "casci_report.json",
           json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def cmd_gtensor(args, manifest: Manifest) -> int:
    from casq.driver import run_gtensor
    from casq.gtensor import format_gap_report

    orbitals, ints, prop, config = _load_problem(args, manifest)
    manifest.stage("gtensor")
    result = run_gtensor(ints, prop, config,
                         method="dense" if args.oracle == "dense" else "davidson")
    manifest.done("gtensor")
    for w in result.warnings:
        manifest.warn(w)

    roots_desc = ", ".join(
        f"{c} x (2S+1={m})" for m, c in
        sorted(config.roots_per_multiplicity.items()))
    rows = []
    for g in (result.g_eha, result.g_sos):
        if g is None:
            continue
        gx, gy, gz = g.principal
        rows.append({"method": g.method, "roots": roots_desc,
                     "g_x": round(gx, 3), "g_y": round(gy, 3),
                     "g_z": round(gz, 3),
                     "matrix": [list(map(float, r)) for r in g.matrix]})
    table = ["method    roots                          g_x      g_y      g_z"]
    for r in rows:
        table.append(f"{r['method']:<8s}  {r['roots']:<28s}  "
                     f"{r['g_x']:>6.3f}  {r['g_y']:>6.3f}  {r['g_z']:>6.3f}")
    gap_text = format_gap_report(result.gaps)
    text = "\n".join(table) + "\n\n" + gap_text + "\n"
    print(text, end="")
    _write(manifest.out_dir, "gtensor_report.txt", text)
    _write(manifest.out_dir, "gtensor_report.json", json.dumps({
        "g": rows,
        "gaps": [dict(r) for r in result.gaps.rows],
        "quartet_below_doublet": result.gaps.quartet_below_doublet,
    }, indent=2) + "\n")
    return EXIT_OK


def _parse_lines_file(text: str):
    from casq.spectra import SpectrumLine

    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split(None, 2)
        if len(parts) < 2:
            raise ValueError(f"lines file, line {lineno}: expected "
                             f"'delta_e_ev f_osc [label]'")
        label = parts[2] if len(parts) > 2 else ""
        lines.append(SpectrumLine(delta_e_ev=float(parts[0]),
                                  f_osc=float(parts[1]), from_state=0,
                                  to_state=lineno, label=label))
    return lines


def cmd_spectrum(args, manifest: Manifest) -> int:
    import numpy as np

    from casq.spectra import (LineTable, broaden, energy_grid, spectrum_csv,
                              transition_table)

    if args.lines is not None:
        lines = _parse_lines_file(_read_text(args.lines, manifest))
        from casq.ingest import SpectrumOptions

        spec_opts = SpectrumOptions()
        if args.config:
            from casq.ingest import parse_run_config

            cfg = parse_run_config(_read_text(args.config, manifest),
                                   default_cas=(1, 1), default_ms2=1)
            spec_opts = cfg.spectrum
    else:
        orbitals, ints, prop, config = _load_problem(args, manifest)
        if not np.any(prop.D):
            raise ValueError("no dipole matrices available: provide DIP "
                             "sections in --prop or use --lines")
        from casq.driver import solve_multiplicity

        manifest.stage("states")
        mult = min(config.roots_per_multiplicity)
        count = config.roots_per_multiplicity[mult]
        states = solve_multiplicity(ints, config, mult, count)
        manifest.done("states")
        lines = transition_table(states, prop)
        spec_opts = config.spectrum

    manifest.stage("broaden")
    grid = energy_grid(spec_opts.min_ev, spec_opts.max_ev, spec_opts.step_ev)
    curve = broaden(lines, spec_opts.fwhm_ev, grid)
    manifest.done("broaden")

    csv_text = spectrum_csv(grid, curve)
    _write(manifest.out_dir, "spectrum.csv", csv_text)
    rows = LineTable(lines=lines).to_rows()
    _write(manifest.out_dir, "lines.json", json.dumps(rows, indent=2) + "\n")
    table = ["from  to    dE (eV)      f_osc  band"]
    for r in rows:
        table.append(f"{r['from']:>4d}  {r['to']:>2d}  {r['delta_e_ev']:>9.4f}"
                     f"  {r['f_osc']:>9.6f}  {r['band']}")
    text = "\n".join(table) + "\n"
    print(text, end="")
    _write(manifest.out_dir, "lines.txt", text)
    return EXIT_OK


class InvariantBreach(RuntimeError):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_threads(args.threads)

    manifest = Manifest(args.command, args)
    handlers = {"count": cmd_count, "casci": cmd_casci,
                "gtensor": cmd_gtensor, "spectrum": cmd_spectrum}
    code = EXIT_OK
    try:
        code = handlers[args.command](args, manifest)
    except InvariantBreach as exc:
        print(f"error (invariant breach): {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    except Exception as exc:
        code = _classify_error(exc)
        kind = {EXIT_INPUT: "input error", EXIT_NOCONV: "non-convergence",
                EXIT_INVARIANT: "invariant breach"}[code]
        print(f"error ({kind}): {exc}", file=sys.stderr)
    finally:
        manifest.finish(code)
    return code


def _classify_error(exc: Exception) -> int:
    from casq.davidson import DavidsonNotConverged
    from casq.soc import KramersPairingError, PhaseConsistencyError

    if isinstance(exc, DavidsonNotConverged):
        return EXIT_NOCONV
    if isinstance(exc, (KramersPairingError, PhaseConsistencyError,
                        AssertionError)):
        return EXIT_INVARIANT
    if isinstance(exc, (ValueError, OSError, KeyError)):
        return EXIT_INPUT
    return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
