"""Command-line surface: build, evaluate, sweep, probe, relax, anneal, verify.

Artifacts are plain text so runs diff cleanly: field files carry a version
header and full-precision values, CSVs follow the column contracts of the
bounds and minimize modules.  Every command is deterministic given its flags
and seed; rerunning a command overwrites byte-identical files.

Exit codes: 0 success, 1 invalid flags or inputs, 2 a numerical check
failed, 3 I/O trouble.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds, minimize
from .construction import assemble_branching, choose_N
from .core import (
    Anchor,
    Bc,
    GridSpec,
    Magnetisation,
    Mode,
    StrayField,
    check_admissibility,
)
from .energy import total_energy
from .errors import NumericalCheckError
from .relaxed import BoundaryData, relaxed_competitor

__all__ = [
    "RunConfig",
    "UsageError",
    "parse_args",
    "run",
    "main",
    "save_field",
    "load_field",
    "save_boundary",
    "load_boundary",
]

_VERSION = "1"
_COMMANDS = ("construct", "energy", "sweep", "probe", "relax", "minimize", "verify")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    opts: dict


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated reals, got {text!r}")


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}")


def _scalar_or_tuple(values):
    return values[0] if len(values) == 1 else values


def _grid_flags(sub, with_levels: bool):
    sub.add_argument("--d", type=int, choices=(1, 2), default=1)
    sub.add_argument("--L", required=True, help="half-width, comma pair for d=2")
    sub.add_argument("--nh", required=True, help="horizontal cells, comma pair for d=2")
    sub.add_argument("--nv", type=int, required=True)
    sub.add_argument("--bc", default="zero-flux", help="periodic|zero-flux, comma pair for d=2")
    if with_levels:
        sub.add_argument("--levels", type=int, default=4)


def _build_grid(opts, T: float) -> GridSpec:
    return GridSpec(
        d=opts["d"],
        n_h=_scalar_or_tuple(_csv_ints(opts["nh"])),
        n_v=opts["nv"],
        L=_scalar_or_tuple(_csv_floats(opts["L"])),
        T=T,
        bc=_scalar_or_tuple(tuple(opts["bc"].split(","))),
    )


def parse_args(argv) -> RunConfig:
    parser = _Parser(prog="branchlab", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    con = subs.add_parser("construct", help="build the branching competitor")
    _grid_flags(con, with_levels=True)
    con.add_argument("--T", type=float, required=True)
    con.add_argument("--sigma", type=float, default=1.0)
    con.add_argument("--seed", type=int, default=None, help="seeded relaxed target")
    con.add_argument("--threads", type=int, default=None)
    con.add_argument("--out", default=".")

    ene = subs.add_parser("energy", help="evaluate a stored pair")
    ene.add_argument("--m", required=True)
    ene.add_argument("--h", default=None)
    ene.add_argument("--sigma", type=float, default=1.0)
    ene.add_argument("--threads", type=int, default=None)

    swe = subs.add_parser("sweep", help="energy density across heights")
    swe.add_argument("--d", type=int, choices=(1, 2), default=1)
    swe.add_argument("--T", required=True, help="comma-separated heights")
    swe.add_argument("--c-lt", type=float, default=4.0, dest="c_lt")
    swe.add_argument("--sigma", type=float, default=1.0)
    swe.add_argument("--nh", default="256")
    swe.add_argument("--nv", type=int, default=64)
    swe.add_argument("--levels", type=int, default=4)
    swe.add_argument("--bc", default="zero-flux")
    swe.add_argument("--seed", type=int, default=None)
    swe.add_argument("--threads", type=int, default=None)
    swe.add_argument("--out", default=".")

    pro = subs.add_parser("probe", help="shrinking sub-box statistics")
    pro.add_argument("--m", required=True)
    pro.add_argument("--h", required=True)
    pro.add_argument("--centre", default="0")
    pro.add_argument("--anchor", choices=("bottom", "top"), default="bottom")
    pro.add_argument("--theta", type=float, default=0.25)
    pro.add_argument("--depth", type=int, default=3)
    pro.add_argument("--l0", type=float, default=None)
    pro.add_argument("--t0", type=float, default=None)
    pro.add_argument("--f-bound", type=float, default=None, dest="f_bound")
    pro.add_argument("--n-bound", type=float, default=None, dest="n_bound")
    pro.add_argument("--out", default=".")

    rel = subs.add_parser("relax", help="admissible pair for boundary data")
    rel.add_argument("--data", required=True, help="boundary data file")
    rel.add_argument("--r", type=float, default=None, help="wall band width")
    rel.add_argument("--c-size", type=float, default=1.0, dest="c_size")
    rel.add_argument("--out", default=".")

    mini = subs.add_parser("minimize", help="anneal a sharp pattern")
    mini.add_argument("--m", required=True)
    mini.add_argument("--seed", type=int, default=1)
    mini.add_argument("--steps", type=int, default=1000)
    mini.add_argument("--beta0", type=float, default=1.0, help="inf for greedy")
    mini.add_argument("--rate", type=float, default=0.95)
    mini.add_argument("--moves", default="single-flip,column-swap")
    mini.add_argument("--sigma", type=float, default=1.0)
    mini.add_argument("--out", default=".")

    subs.add_parser("verify", help="run every module invariant suite")

    ns = parser.parse_args(argv)
    opts = {k: v for k, v in vars(ns).items() if k != "command"}
    if ns.command == "construct":
        try:
            _build_grid(opts, opts["T"])
        except ValueError as exc:
            raise UsageError(str(exc))
    elif ns.command == "sweep":
        heights = _csv_floats(opts["T"])
        if any(t <= 0 for t in heights):
            raise UsageError("heights must be positive")
        opts["T"] = heights
    return RunConfig(ns.command, opts)


def _write_rows(fh, values: np.ndarray, grid: GridSpec) -> None:
    rows = grid.n_v * (grid.n_h[0] if grid.d == 2 else 1)
    for row in values.reshape(rows, -1):
        fh.write(" ".join(repr(float(v)) for v in row))
        fh.write("\n")


def _header_lines(grid: GridSpec, mode: str) -> list[str]:
    return [
        f"version={_VERSION}",
        f"d={grid.d}",
        "n_h=" + ",".join(str(n) for n in grid.n_h),
        f"n_v={grid.n_v}",
        "L=" + ",".join(repr(l) for l in grid.L),
        "T=" + repr(grid.T),
        "bc=" + ",".join(b.value for b in grid.bc),
        f"mode={mode}",
    ]


def save_field(field: Magnetisation | StrayField, path) -> None:
    """Text field file: version header, grid header, blank line, then values
    slice-major from the bottom, row-major within a slice, full precision."""
    mode = field.mode.value if isinstance(field, Magnetisation) else "stray"
    with open(path, "w") as fh:
        fh.write("\n".join(_header_lines(field.grid, mode)))
        fh.write("\n\n")
        _write_rows(fh, field.values, field.grid)


def _parse_header(path, lines: list[str]) -> tuple[dict, int]:
    if not lines or not lines[0].startswith("version="):
        raise ValueError(f"malformed field file {path}: missing version header")
    found = lines[0].split("=", 1)[1]
    if found != _VERSION:
        raise ValueError(
            f"field file {path}: expected version {_VERSION}, found {found}"
        )
    header = {}
    k = 1
    while k < len(lines) and lines[k].strip():
        if "=" not in lines[k]:
            raise ValueError(f"malformed field file {path}: bad header line {lines[k]!r}")
        key, val = lines[k].split("=", 1)
        header[key] = val
        k += 1
    missing = {"d", "n_h", "n_v", "L", "T", "bc", "mode"} - set(header)
    if missing:
        raise ValueError(
            f"malformed field file {path}: missing keys {sorted(missing)}"
        )
    return header, k + 1


def _grid_from_header(header: dict) -> GridSpec:
    return GridSpec(
        d=int(header["d"]),
        n_h=_scalar_or_tuple(tuple(int(t) for t in header["n_h"].split(","))),
        n_v=int(header["n_v"]),
        L=_scalar_or_tuple(tuple(float(t) for t in header["L"].split(","))),
        T=float(header["T"]),
        bc=_scalar_or_tuple(tuple(header["bc"].split(","))),
    )


def _read_values(path, lines: list[str], start: int, shape) -> np.ndarray:
    tokens = " ".join(lines[start:]).split()
    want = int(np.prod(shape))
    if len(tokens) != want:
        raise ValueError(
            f"malformed field file {path}: expected {want} values, found {len(tokens)}"
        )
    return np.array([float(t) for t in tokens]).reshape(shape)


def load_field(path) -> Magnetisation | StrayField:
    """Inverse of `save_field`; bit-exact for files it wrote."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header, start = _parse_header(path, lines)
    grid = _grid_from_header(header)
    mode = header["mode"]
    if mode == "stray":
        return StrayField(grid, _read_values(path, lines, start, grid.h_shape))
    if mode in (Mode.SHARP.value, Mode.RELAXED.value):
        return Magnetisation(grid, _read_values(path, lines, start, grid.m_shape), Mode(mode))
    raise ValueError(f"malformed field file {path}: unknown mode {mode!r}")


def save_boundary(bd: BoundaryData, path) -> None:
    """Boundary data as a field file (`mode=boundary`): bottom trace rows,
    top trace rows, then one `g=axis,side` block per wall with flux data."""
    grid = bd.grid
    with open(path, "w") as fh:
        fh.write("\n".join(_header_lines(grid, "boundary")))
        fh.write("\n\n")
        _write_rows(fh, bd.m_bottom, grid.replace(n_v=1))
        _write_rows(fh, bd.m_top, grid.replace(n_v=1))
        for ax, side in sorted(bd.g):
            fh.write(f"g={ax},{side}\n")
            wall = bd.g[(ax, side)]
            for row in wall.reshape(grid.n_v, -1):
                fh.write(" ".join(repr(float(v)) for v in row))
                fh.write("\n")


def load_boundary(path) -> BoundaryData:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header, start = _parse_header(path, lines)
    if header["mode"] != "boundary":
        raise ValueError(f"malformed field file {path}: expected mode=boundary")
    grid = _grid_from_header(header)
    trace_rows = grid.n_h[0] if grid.d == 2 else 1
    k = start
    m_bottom = _read_values(path, lines[: k + trace_rows], k, grid.n_h)
    k += trace_rows
    m_top = _read_values(path, lines[: k + trace_rows], k, grid.n_h)
    k += trace_rows
    g = {}
    wall_rows = grid.n_v
    while k < len(lines) and lines[k].strip():
        if not lines[k].startswith("g="):
            raise ValueError(f"malformed field file {path}: expected g= block, got {lines[k]!r}")
        ax_s, side = lines[k].split("=", 1)[1].split(",")
        k += 1
        shape = (grid.n_v,) if grid.d == 1 else (grid.n_v, grid.n_h[1 - int(ax_s)])
        g[(int(ax_s), side)] = _read_values(path, lines[: k + wall_rows], k, shape)
        k += wall_rows
    return BoundaryData(grid, m_bottom, m_top, g)


def _resolve_threads(opts) -> int | None:
    threads = opts.get("threads")
    if threads is not None:
        return threads
    env = os.environ.get("BRANCHLAB_THREADS")
    return int(env) if env else None


def _status(command: str, **kv) -> None:
    parts = [f"status=ok command={command}"]
    for key, val in kv.items():
        if isinstance(val, float):
            parts.append(f"{key}={val:.12g}")
        else:
            parts.append(f"{key}={val}")
    print(" ".join(parts))


def _outdir(opts) -> str:
    out = opts["out"]
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_construct(opts) -> int:
    grid = _build_grid(opts, opts["T"])
    if opts["seed"] is None:
        target = np.zeros(grid.m_shape)
    else:
        target = bounds._seeded_input(grid, opts["seed"])
    m_rel = Magnetisation(grid, target, Mode.RELAXED)
    N = choose_N(min(grid.L), grid.T, opts["sigma"])
    build = assemble_branching(m_rel, N, opts["levels"], threads=_resolve_threads(opts))
    out = _outdir(opts)
    save_field(build.m, os.path.join(out, "m.field"))
    save_field(build.h, os.path.join(out, "h.field"))
    with open(os.path.join(out, "manifest.jsonl"), "w") as fh:
        for rec in build.manifest:
            geo = rec.geometry
            fh.write(json.dumps({
                "level": geo.level,
                "index": list(geo.index),
                "width": geo.width,
                "height": geo.height,
                "origin": list(geo.origin),
                "orientation": geo.orientation,
                "coarse_avg": rec.coarse_avg,
                "fine_avgs": list(rec.fine_avgs),
            }, sort_keys=True))
            fh.write("\n")
    report = total_energy(build.m, build.h, opts["sigma"])
    _status(
        "construct",
        d=grid.d, N=N, K=opts["levels"],
        interfacial=report.interfacial, stray=report.stray,
        total=report.total, density=report.density, out=out,
    )
    return 0


def _cmd_energy(opts) -> int:
    m = load_field(opts["m"])
    if not isinstance(m, Magnetisation):
        raise ValueError(f"{opts['m']} holds a stray field, not a magnetisation")
    h = None
    if opts["h"] is not None:
        h = load_field(opts["h"])
        if not isinstance(h, StrayField):
            raise ValueError(f"{opts['h']} holds a magnetisation, not a stray field")
    report = total_energy(m, h, opts["sigma"], threads=_resolve_threads(opts))
    _status(
        "energy",
        interfacial=report.interfacial, stray=report.stray,
        total=report.total, density=report.density,
    )
    return 0


def _cmd_sweep(opts) -> int:
    result = bounds.scaling_sweep(
        opts["T"],
        d=opts["d"],
        n_h=_scalar_or_tuple(_csv_ints(opts["nh"])),
        n_v=opts["nv"],
        c_LT=opts["c_lt"],
        K=opts["levels"],
        bc=_scalar_or_tuple(tuple(opts["bc"].split(","))),
        sigma=opts["sigma"],
        seed=opts["seed"],
        threads=_resolve_threads(opts),
    )
    out = _outdir(opts)
    path = os.path.join(out, "sweep.csv")
    bounds.write_sweep_csv(result.rows, path)
    kv = {"rows": len(result.rows), "out": out}
    if result.slope is not None:
        kv["slope"] = result.slope
    _status("sweep", **kv)
    return 0


def _cmd_probe(opts) -> int:
    m = load_field(opts["m"])
    h = load_field(opts["h"])
    if not isinstance(m, Magnetisation) or not isinstance(h, StrayField):
        raise ValueError("probe needs a magnetisation file and a stray field file")
    centre = _scalar_or_tuple(_csv_floats(opts["centre"]))
    probe = bounds.local_probe(
        m, h, centre,
        anchor=Anchor(opts["anchor"]),
        theta=opts["theta"],
        depth=opts["depth"],
        l0=opts["l0"],
        t0=opts["t0"],
        f_bound=opts["f_bound"],
        n_bound=opts["n_bound"],
    )
    out = _outdir(opts)
    bounds.write_probe_csv(probe, os.path.join(out, "probe.csv"))
    _status(
        "probe",
        rungs=len(probe.rungs), max_f=probe.max_f, max_n=probe.max_n,
        violations=len(probe.violations), out=out,
    )
    return 0


def _cmd_relax(opts) -> int:
    bd = load_boundary(opts["data"])
    m_rel, h_rel = relaxed_competitor(bd, r=opts["r"], c_size=opts["c_size"])
    report = check_admissibility(
        m_rel, h_rel,
        m_bottom=bd.m_bottom, m_top=bd.m_top, boundary_flux=bd.g,
    )
    if not report.passed:
        raise NumericalCheckError(
            f"relaxed pair failed admissibility: residual {report.max_residual:.2e}"
        )
    out = _outdir(opts)
    save_field(m_rel, os.path.join(out, "m.field"))
    save_field(h_rel, os.path.join(out, "h.field"))
    _status("relax", residual=report.max_residual, out=out)
    return 0


def _cmd_minimize(opts) -> int:
    m0 = load_field(opts["m"])
    if not isinstance(m0, Magnetisation):
        raise ValueError(f"{opts['m']} holds a stray field, not a magnetisation")
    cfg = minimize.AnnealConfig(
        seed=opts["seed"],
        steps=opts["steps"],
        initial_beta=opts["beta0"],
        rate=opts["rate"],
        moves=tuple(opts["moves"].split(",")),
    )
    result = minimize.anneal(m0, cfg, sigma=opts["sigma"])
    out = _outdir(opts)
    save_field(result.m, os.path.join(out, "m_star.field"))
    minimize.write_trace_csv(result.trace, os.path.join(out, "trace.csv"))
    _status(
        "minimize",
        steps=opts["steps"], energy=result.energy,
        accepted=result.accepted, rejected=result.rejected, out=out,
    )
    return 0


def _suite_elliptic_duality():
    from . import elliptic

    rng = np.random.default_rng(0)
    for bc in (("periodic",), ("zero-flux",)):
        rho = rng.normal(size=(4, 64))
        rho -= rho.mean(axis=-1, keepdims=True)
        a = elliptic.inv_grad_sq_norm(rho, (0.25,), bc, via="spectral")
        b = elliptic.inv_grad_sq_norm(rho, (0.25,), bc, via="solve")
        if np.max(np.abs(a - b)) > 1e-10 * max(1.0, float(np.max(a))):
            raise NumericalCheckError(f"spectral and solve routes disagree under {bc[0]}")
        u = rng.normal(size=(32,))
        F = rng.normal(size=(32, 1))
        if bc[0] != "periodic":
            F[-1] = 0.0
        lhs = float(np.sum(elliptic.gradient(u, (0.5,), bc) * F))
        rhs = -float(np.sum(u * elliptic.divergence(F, (0.5,), bc)))
        if abs(lhs - rhs) > 1e-12 * max(1.0, abs(lhs)):
            raise NumericalCheckError(f"gradient and divergence not adjoint under {bc[0]}")


def _suite_elliptic_residual():
    from . import elliptic

    rng = np.random.default_rng(1)
    for bc in (("periodic", "periodic"), ("zero-flux", "zero-flux")):
        rho = rng.normal(size=(16, 16))
        rho -= rho.mean()
        u = elliptic.solve_poisson(rho, (0.125, 0.125), bc)
        res = elliptic.divergence(elliptic.gradient(u, (0.125, 0.125), bc), (0.125, 0.125), bc) + rho
        if float(np.max(np.abs(res))) > 1e-10 * float(np.max(np.abs(rho))):
            raise NumericalCheckError(f"Poisson residual too large under {bc[0]}")


def _suite_energy_orthogonality():
    from .energy import field_energy, orthogonality_gap

    rng = np.random.default_rng(2)
    grid = GridSpec(1, 32, 16, 1.0, 1.0, Bc.ZERO_FLUX)
    for _ in range(5):
        h = StrayField(grid, rng.normal(size=grid.h_shape))
        if orthogonality_gap(h, 8) > 1e-12 * max(1.0, field_energy(h)):
            raise NumericalCheckError("height-average split is not orthogonal")


def _suite_energy_monotonicity():
    from .energy import monotonicity_profile

    rng = np.random.default_rng(3)
    grid = GridSpec(1, 16, 32, 1.0, 1.0, Bc.ZERO_FLUX)
    for _ in range(5):
        prof = monotonicity_profile(StrayField(grid, rng.normal(size=grid.h_shape)))
        if np.any(np.diff(prof) < -1e-12 * max(1.0, float(prof[-1]))):
            raise NumericalCheckError("slab profile decreased")


def _build_reference_competitor():
    grid = GridSpec(1, 64, 32, 4.0, 4.0, Bc.ZERO_FLUX)
    m_rel = Magnetisation(grid, np.zeros(grid.m_shape), Mode.RELAXED)
    return assemble_branching(m_rel, 2, 2)


def _suite_construction():
    build = _build_reference_competitor()
    report = check_admissibility(build.m, build.h)
    if not report.passed:
        raise NumericalCheckError(f"competitor residual {report.max_residual:.2e}")
    if float(np.max(np.abs(report.slice_means))) > 1e-12:
        raise NumericalCheckError("competitor slice means drifted")
    if build.mean_defect > 1e-10:
        raise NumericalCheckError(f"target averages missed by {build.mean_defect:.2e}")


def _suite_bounds():
    build = _build_reference_competitor()
    total = total_energy(build.m, build.h).total
    chain = bounds.lower_bound_chain(build.m, build.h)
    if not 0.0 < chain <= bounds.C_YOUNG * total * (1.0 + 1e-9):
        raise NumericalCheckError(f"chain {chain:.3e} outside (0, {bounds.C_YOUNG} * E]")
    x = (np.arange(64) + 0.5) / 64
    u = np.cos(2.0 * np.pi * x)
    ratio = bounds.interpolation_ratio(u, (1.0 / 64,))
    if not 0.0 < ratio <= bounds.C_INTERP:
        raise NumericalCheckError(f"interpolation ratio {ratio:.4f} above the recorded cap")


def _suite_relaxed():
    grid = GridSpec(1, 32, 6, 1.0, 2.0, Bc.ZERO_FLUX)
    g = {(0, "low"): np.full(6, 0.0625), (0, "high"): np.full(6, -0.0625)}
    bd = BoundaryData(grid, np.zeros(32), np.zeros(32), g)
    m_rel, h_rel = relaxed_competitor(bd, r=2 * grid.dx[0])
    report = check_admissibility(
        m_rel, h_rel, m_bottom=bd.m_bottom, m_top=bd.m_top, boundary_flux=bd.g
    )
    if not report.passed:
        raise NumericalCheckError(f"wall band residual {report.max_residual:.2e}")


def _suite_minimize():
    rng = np.random.default_rng(4)
    grid = GridSpec(1, 8, 4, 1.0, 1.0, Bc.ZERO_FLUX)
    slab = np.repeat([1.0, -1.0], 4)
    values = np.stack([rng.permutation(slab) for _ in range(4)])
    m = Magnetisation(grid, values, Mode.SHARP)
    cell = (1, 3)
    d1 = minimize.flip_delta(m, cell)
    m2 = m.copy()
    m2.values[cell] *= -1.0
    if abs(d1 + minimize.flip_delta(m2, cell)) > 1e-10:
        raise NumericalCheckError("flip deltas do not cancel on the way back")
    cfg = minimize.AnnealConfig(seed=7, steps=100, initial_beta=0.5)
    r1 = minimize.anneal(m, cfg)
    r2 = minimize.anneal(m, cfg)
    if r1.trace != r2.trace or not np.array_equal(r1.m.values, r2.m.values):
        raise NumericalCheckError("same seed did not replay the same chain")


_SUITES = (
    ("elliptic dual routes and adjointness", _suite_elliptic_duality),
    ("elliptic solve residual", _suite_elliptic_residual),
    ("energy orthogonality split", _suite_energy_orthogonality),
    ("energy slab monotonicity", _suite_energy_monotonicity),
    ("construction admissibility", _suite_construction),
    ("bounds chain and ratio caps", _suite_bounds),
    ("relaxed wall absorption", _suite_relaxed),
    ("minimize determinism and involution", _suite_minimize),
)


def _cmd_verify(opts) -> int:
    failures = 0
    for name, suite in _SUITES:
        try:
            suite()
        except (NumericalCheckError, ValueError) as exc:
            failures += 1
            print(f"{name}: FAIL ({exc})")
        else:
            print(f"{name}: pass")
    if failures:
        print(f"status=fail command=verify suites={len(_SUITES)} failed={failures}")
        return 2
    _status("verify", suites=len(_SUITES), failed=0)
    return 0


_HANDLERS = {
    "construct": _cmd_construct,
    "energy": _cmd_energy,
    "sweep": _cmd_sweep,
    "probe": _cmd_probe,
    "relax": _cmd_relax,
    "minimize": _cmd_minimize,
    "verify": _cmd_verify,
}


def run(config: RunConfig) -> int:
    """Execute a parsed command, mapping failures onto the exit-code contract."""
    try:
        return _HANDLERS[config.command](config.opts)
    except NumericalCheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    try:
        config = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
