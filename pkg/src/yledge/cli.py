"""Command-line front end.

Exit status: 0 on success, 2 on usage errors (argparse), 1 when a
computation fails; failures print one ``error:`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import OPEN, PERIODIC, BasisError, build_momentum_sectors, enumerate_basis
from .cache import ENV_VAR, SpectrumCache
from .chain import PXPChain
from .criticality import FAMILIES, RL, RR, fidelity_susceptibility, fit_scaling, scan_phase_diagram
from .dynamics import (
    QuenchSpec, associated_echo, biorthogonal_echo, self_normal_echo, short_time_average_rate,
)
from .hamiltonian import (
    DETUNED_PXP, MODELS, ModelParams, build_ising_hamiltonian, build_pxp_hamiltonian,
    build_sector_hamiltonian, write_sparse_text,
)
from .observables import correlation_G, half_chain_entropy
from .output import format_csv, format_json, provenance, read_csv_table
from .pipelines import pmap
from .reproduce import RECIPES, reproduce
from .spectrum import REALITY_TOL, classify_spectrum_reality, eigenvalues_only


def parse_range(text: str) -> np.ndarray:
    """'A:B:STEP' -> inclusive grid A, A+STEP, ..., B (a single number is a one-point grid)."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; expected A:B:STEP") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; expected A:B:STEP")
    a, b, step = vals
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; need A <= B and STEP > 0")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(n), 12)


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


# --------------------------------------------------------------------------
# argument groups

def _model_args(p, model=False, m=True, m_name="--m"):
    if model:
        p.add_argument("--model", choices=MODELS, default=DETUNED_PXP)
    p.add_argument("--n", type=int, required=True, help="number of sites")
    p.add_argument("--bc", choices=(PERIODIC, OPEN), default=PERIODIC)
    p.add_argument("--hx", type=float, default=1.0, help="transverse amplitude h_x")
    p.add_argument("--g", type=float, default=0.0, help="non-Hermitian amplitude")
    p.add_argument("--alpha", type=float, default=np.pi / 2, help="phase of the non-Hermitian term (radians)")
    if m:
        p.add_argument(m_name, dest="m", type=float, default=0.0, help="half-detuning m")
    if model:
        p.add_argument("--J", type=float, default=1.0, help="Ising coupling (parent models)")
        p.add_argument("--hz", type=float, default=0.0, help="longitudinal field (parent models)")


def _common(p, out_help="output file (default: stdout)"):
    p.add_argument("--out", help=out_help)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--format", choices=("csv", "json"), default=None)
    fmt.add_argument("--json", dest="format", action="store_const", const="json")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv")
    p.add_argument("--cache-dir", "--cache", dest="cache_dir",
                   help=f"spectrum cache directory (default: ${ENV_VAR} when set, otherwise no cache)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for parameter sweeps")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="yledge", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("--version", action="version", version=f"yledge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basis", help="constrained basis and momentum sector dimensions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bc", choices=(PERIODIC, OPEN), default=PERIODIC)
    p.add_argument("--k", type=parse_int_list, default=None, help="momentum indices, e.g. '0,4'")
    _common(p)

    p = sub.add_parser("hamiltonian", help="write a Hamiltonian in sparse text form")
    _model_args(p, model=True)
    p.add_argument("--k", type=int, default=None, help="momentum sector (periodic detuned_pxp only)")
    _common(p)

    p = sub.add_parser("spectrum", help="eigenvalues as (re, im) rows")
    _model_args(p, model=True)
    p.add_argument("--k", type=parse_int_list, default=None, help="momentum sectors (default: all)")
    p.add_argument("--reality-tol", type=float, default=REALITY_TOL)
    _common(p)

    p = sub.add_parser("entropy", help="ground-state half-chain entropy over an m grid")
    _model_args(p, m=False)
    p.add_argument("--m-range", type=parse_range, required=True)
    p.add_argument("--cut", type=int, default=None, help="subsystem size (default N/2)")
    p.add_argument("--k", type=parse_int_list, default=[0], help="sectors searched for the ground state")
    p.add_argument("--self-normal", action="store_true", help="use |R><R| instead of |R><L|")
    _common(p)

    p = sub.add_parser("correlation", help="correlation spreading G(l, t)")
    _model_args(p)
    p.add_argument("--t-max", type=float, default=20.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--site", type=int, default=None, help="excited site (default N/2)")
    _common(p)

    p = sub.add_parser("echo", help="Loschmidt echo after a quench m_i -> m_i + dm")
    _model_args(p, m_name="--mi")
    p.add_argument("--kind", choices=("biortho", "assoc", "self"), required=True)
    p.add_argument("--dm", type=float, required=True)
    p.add_argument("--t-max", type=float, default=150.0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--raw", action="store_true", help="self-normal echo without per-time renormalization")
    p.add_argument("--association", choices=("final", "initial"), default="final")
    _common(p)

    p = sub.add_parser("rate-scan", help="short-time averaged rate function over an m grid")
    _model_args(p, m=False)
    p.add_argument("--m-range", type=parse_range, required=True)
    p.add_argument("--dm", type=float, default=0.01)
    p.add_argument("--T", type=float, default=20.0, help="averaging window")
    p.add_argument("--dt", type=float, default=0.05)
    _common(p)

    p = sub.add_parser("fidelity", help="fidelity susceptibility over an m grid")
    _model_args(p, m=False)
    p.add_argument("--kind", choices=("rr", "rl"), required=True)
    p.add_argument("--m-range", type=parse_range, required=True)
    p.add_argument("--dm", type=float, default=1e-4)
    _common(p)

    p = sub.add_parser("phase-diagram", help="phase labels on a (g, m) grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bc", choices=(PERIODIC, OPEN), default=PERIODIC)
    p.add_argument("--hx", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=np.pi / 2)
    p.add_argument("--g-range", type=parse_range, required=True)
    p.add_argument("--m-range", type=parse_range, required=True)
    p.add_argument("--m-tol", type=float, default=1e-4, help="bisection tolerance of transitions")
    p.add_argument("--no-bisect", action="store_true")
    p.add_argument("--no-spreading", action="store_true",
                   help="skip the correlation diagnostic when the analytic boundary is unavailable")
    p.add_argument("--max-points", type=int, default=None)
    p.add_argument("--reality-tol", type=float, default=REALITY_TOL)
    _common(p, out_help="output JSON file (default: stdout)")

    p = sub.add_parser("fit", help="finite-size scaling fit of a two-column table")
    p.add_argument("--family", choices=FAMILIES + ("power_law", "shifted_power", "log_law"), required=True)
    p.add_argument("--in", dest="infile", required=True, help="CSV file ('#' lines ignored)")
    p.add_argument("--x", default=None, help="x column name (default: first column)")
    p.add_argument("--y", default=None, help="y column name (default: second column)")
    _common(p)

    p = sub.add_parser("reproduce", help="desk-scale data sets for one figure")
    p.add_argument("figure", choices=sorted(RECIPES))
    p.add_argument("--out", default=None, help="output directory (default: ./yledge-<figure>)")
    p.add_argument("--sizes", type=parse_int_list, default=None, help="system sizes, N <= 20")
    p.add_argument("--jobs", type=int, default=1)
    return ap


# --------------------------------------------------------------------------
# helpers

def _params(a, m=None) -> ModelParams:
    return ModelParams(model=getattr(a, "model", DETUNED_PXP), N=a.n, bc=a.bc, h_x=a.hx, g=a.g,
                       alpha=a.alpha, m=a.m if m is None else float(m),
                       J=getattr(a, "J", 1.0), h_z=getattr(a, "hz", 0.0))


def _cache(a):
    path = a.cache_dir or os.environ.get(ENV_VAR)
    return SpectrumCache(path) if path else None


def _record(a) -> dict:
    skip = {"func", "out", "format", "jobs", "cache_dir"}
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in vars(a).items() if k not in skip}


def _emit(a, header, rows, payload=None, default="csv"):
    fmt = a.format or default
    meta = provenance(a.command, _record(a))
    if fmt == "json":
        text = format_json(payload if payload is not None else
                           {"columns": list(header), "rows": [list(r) for r in rows]}, meta)
    else:
        text = format_csv(header, rows, meta)
    _write(a.out, text)


def _write(out, text):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands

def cmd_basis(a):
    basis = enumerate_basis(a.n, a.bc)
    sectors = []
    if a.bc == PERIODIC:
        sectors = [{"k_index": s.k_index, "dim": s.dim} for s in build_momentum_sectors(basis, a.k)]
    payload = {"n": a.n, "bc": a.bc, "dim": basis.dim, "sectors": sectors}
    if a.format == "csv":
        _emit(a, ["k_index", "dim"], [(s["k_index"], s["dim"]) for s in sectors])
    else:
        _write(a.out, json.dumps(payload) + "\n")


def cmd_hamiltonian(a):
    p = _params(a)
    if p.model == DETUNED_PXP:
        if a.k is not None:
            if p.bc != PERIODIC:
                raise ValueError("--k needs periodic boundary conditions")
            op = build_sector_hamiltonian(p, a.k)
        else:
            op = build_pxp_hamiltonian(p)
    else:
        if a.k is not None:
            raise ValueError("--k applies to the constrained model only")
        op = build_ising_hamiltonian(p)
    import io
    buf = io.StringIO()
    for key, val in provenance(a.command, _record(a)).items():
        buf.write(f"# {key}: {json.dumps(val, sort_keys=True)}\n")
    write_sparse_text(op, buf)
    _write(a.out, buf.getvalue())


def cmd_spectrum(a):
    p = _params(a)
    if p.model == DETUNED_PXP:
        chain = PXPChain(p, cache=_cache(a))
        keys = chain.sector_keys(a.k)
        rows = []
        for k in keys:
            e = chain.spectrum(k).eigenvalues if chain.cache is not None else eigenvalues_only(chain.matrix(k))
            rows += [(-1 if k is None else k, z.real, z.imag) for z in e]
    else:
        rows = [(-1, z.real, z.imag) for z in eigenvalues_only(build_ising_hamiltonian(p))]
    e_all = np.array([r[1] + 1j * r[2] for r in rows])
    rep = classify_spectrum_reality(e_all, a.reality_tol)
    payload = {"eigenvalues": [{"k_index": k, "re": re, "im": im} for k, re, im in rows],
               "reality": rep.__dict__}
    _emit(a, ["k_index", "re", "im"], rows, payload)


def _entropy_task(args):
    p, ks, cut, self_normal, cache = args
    chain = PXPChain(p, cache=cache)
    gs = chain.ground_state(ks)
    return half_chain_entropy(gs.right, gs.left, chain.basis, cut=cut, self_normal=self_normal)


def cmd_entropy(a):
    cache = _cache(a)
    ks = None if a.bc == OPEN else a.k
    tasks = [(_params(a, m), ks, a.cut, a.self_normal, cache) for m in a.m_range]
    vals = pmap(_entropy_task, tasks, a.jobs)
    _emit(a, ["m", "S"], list(zip(a.m_range, vals)))


def cmd_correlation(a):
    t = np.arange(int(round(a.t_max / a.dt)) + 1) * a.dt
    field = correlation_G(_params(a), t, excitation_site=a.site, cache=_cache(a))
    rows = [(int(l), float(tt), field.values[i, j]) for i, l in enumerate(field.l_range)
            for j, tt in enumerate(field.t_grid)]
    _emit(a, ["l", "t", "G"], rows)


def cmd_echo(a):
    q = QuenchSpec(_params(a), dm=a.dm, t_max=a.t_max, dt=a.dt)
    cache = _cache(a)
    if a.kind == "biortho":
        s = biorthogonal_echo(q, cache=cache)
    elif a.kind == "assoc":
        s = associated_echo(q, association=a.association, cache=cache)
    else:
        s = self_normal_echo(q, normalize=not a.raw, cache=cache)
    logs = s.log_values if s.log_values is not None else np.log(s.values.astype(complex))
    rows = [(t, v.real, v.imag, lv.real) for t, v, lv in zip(s.t_grid, s.values, logs)]
    _emit(a, ["t", "re", "im", "ln_abs"], rows)


def _rate_task(args):
    p, dm, T, dt, cache = args
    return short_time_average_rate(QuenchSpec(p, dm=dm, t_max=T, dt=dt, T=T), cache=cache).rate


def cmd_rate_scan(a):
    cache = _cache(a)
    vals = pmap(_rate_task, [(_params(a, m), a.dm, a.T, a.dt, cache) for m in a.m_range], a.jobs)
    _emit(a, ["m", "rate"], list(zip(a.m_range, vals)))


def _fidelity_task(args):
    p, dm, kind, cache = args
    return fidelity_susceptibility(p, dm, kind, cache=cache)


def cmd_fidelity(a):
    kind = RR if a.kind == "rr" else RL
    cache = _cache(a)
    vals = pmap(_fidelity_task, [(_params(a, m), a.dm, kind, cache) for m in a.m_range], a.jobs)
    _emit(a, ["m", "chi"], list(zip(a.m_range, vals)))


def cmd_phase_diagram(a):
    base = ModelParams(N=a.n, bc=a.bc, h_x=a.hx, alpha=a.alpha)
    pd = scan_phase_diagram(a.g_range, a.m_range, a.n, base=base, tol=a.reality_tol, m_tol=a.m_tol,
                            bisect=not a.no_bisect, spreading=not a.no_spreading, jobs=a.jobs,
                            max_points=a.max_points, cache=_cache(a))
    points = pd.points()
    trans = {str(g): [{"m": m, "from": l, "to": r} for m, l, r in row] for g, row in pd.transitions.items()}
    if a.format == "csv":
        rows = [(p["g"], p["m"], p["label"], p.get("max_imag"), p.get("gap")) for p in points]
        _emit(a, ["g", "m", "label", "max_imag", "gap"], rows)
    else:
        meta = provenance(a.command, _record(a))
        _write(a.out, format_json({"points": points, "transitions": trans, "complete": pd.complete}, meta))


def cmd_fit(a):
    header, data = read_csv_table(a.infile)
    xi = header.index(a.x) if a.x else 0
    yi = header.index(a.y) if a.y else 1
    fit = fit_scaling(data[:, xi], data[:, yi], a.family)
    meta = provenance(a.command, _record(a))
    if a.format == "csv":
        d = fit.as_dict()
        rows = [(k, v) for k, v in d.items() if k != "stderr"] + [(f"stderr_{k}", v) for k, v in d["stderr"].items()]
        _write(a.out, format_csv(["key", "value"], rows, meta))
    else:
        _write(a.out, format_json({"fit": fit.as_dict()}, meta))


def cmd_reproduce(a):
    out = a.out or f"yledge-{a.figure}"
    fits, files = reproduce(a.figure, out, sizes=a.sizes, jobs=a.jobs)
    sys.stdout.write(json.dumps({"figure": a.figure, "out": str(out), "files": files}) + "\n")


COMMANDS = {
    "basis": cmd_basis, "hamiltonian": cmd_hamiltonian, "spectrum": cmd_spectrum, "entropy": cmd_entropy,
    "correlation": cmd_correlation, "echo": cmd_echo, "rate-scan": cmd_rate_scan, "fidelity": cmd_fidelity,
    "phase-diagram": cmd_phase_diagram, "fit": cmd_fit, "reproduce": cmd_reproduce,
}


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv):
    """Turn '--m-range -1:-0.5:0.1' into '--m-range=-1:-0.5:0.1' so argparse keeps it as a value."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_VALUE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _glue_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(a, "jobs", 1) < 1:
        parser.print_usage(sys.stderr)
        print("yledge: error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[a.command](a)
    except (ArithmeticError, ValueError, RuntimeError, BasisError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
