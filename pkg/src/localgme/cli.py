"""Command-line interface: build states, certify them, run sweeps and simulations.

Exit codes: 0 success, 2 bad arguments, 3 degenerate map or size cap,
4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .config import DEFAULT, Tolerances
from .correlations import MeasurementAssignment, quantum_behavior, xy_direction
from .errors import ArgumentError, LocalGMEError, NoSolutionError
from .gme import analytic_concurrence, certify_gme, gme_score
from .lhvnet import (FiniteLHS, builtin_werner_lhs, compare_behaviors, lift,
                     random_projective_settings, simulate_behavior)
from .linalg import DensityMatrix, fidelity_with_pure
from .locality import (FULL_LOCAL, HYBRID, certify, optimize_svetlichny_xy,
                       svetlichny_value)
from .states import (QUARTER_PI, FamilyParams, NetworkSpec, analytic_filtered_state,
                     apply_local_filter, ghz_fidelity_formula, ghz_ket, ghz_projector_map,
                     is_unsteerable_family, project_qubit_subspace, rho_alpha_theta,
                     rho_gme_qutrit, saturating_theta, star_network_state, x_matrix_state)

log = logging.getLogger("localgme")

STATE_KINDS = ("family", "star", "xmatrix", "gme-qutrit", "filtered", "ghz")
SWEEP_COLUMNS = ("n", "alpha", "theta", "eps", "unsteerable", "C_analytic", "C_numeric",
                 "fidelity", "svetlichny", "note")
# hand-typed values such as 0.7854 overshoot pi/4 slightly; snap them back
THETA_SNAP = 1e-4


# ---------------------------------------------------------------- parsing helpers

def parse_tolerances(items: list[str] | None, cap: int | None) -> Tolerances:
    kinds = {f.name: f.type for f in fields(Tolerances)}
    over = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in kinds:
            raise ArgumentError(f"bad --tol entry {item!r}; known keys: {', '.join(kinds)}")
        try:
            over[key] = int(value) if kinds[key] in (int, "int") else float(value)
        except ValueError as exc:
            raise ArgumentError(f"bad value in --tol {item!r}") from exc
    if cap is not None:
        over["max_matrix_side"] = cap
    return DEFAULT.with_overrides(**over)


def resolve_theta(theta: str | float | None, alpha: float, tol: Tolerances = DEFAULT) -> float:
    """``auto`` gives the saturating theta; explicit values win and are snapped into range."""
    if theta is None or theta == "auto":
        return saturating_theta(alpha, tol)
    try:
        t = float(theta)
    except ValueError as exc:
        raise ArgumentError(f"theta must be a number or 'auto', got {theta!r}") from exc
    if QUARTER_PI < t <= QUARTER_PI + THETA_SNAP:
        t = QUARTER_PI
    return t


def resolve_eps(eps: str | float | None, theta: float) -> float:
    if eps is None or eps == "tan-theta":
        return float(np.tan(theta))
    try:
        return float(eps)
    except ValueError as exc:
        raise ArgumentError(f"eps must be a number or 'tan-theta', got {eps!r}") from exc


def parse_int_range(spec: str) -> list[int]:
    """``"2:6"`` (inclusive), ``"2,3,5"`` or ``""`` (empty)."""
    spec = spec.strip()
    if not spec:
        return []
    try:
        if ":" in spec:
            lo, hi = (int(s) for s in spec.split(":"))
            return list(range(lo, hi + 1))
        return [int(s) for s in spec.split(",") if s.strip()]
    except ValueError as exc:
        raise ArgumentError(f"bad integer range {spec!r}") from exc


def parse_float_grid(spec: str, auto_ok: bool = True) -> list[float] | str:
    """``"auto"``, ``"a:b:k"`` (k evenly spaced points), ``"0.5,0.9"`` or ``""``."""
    spec = spec.strip()
    if spec == "auto" and auto_ok:
        return "auto"
    if not spec:
        return []
    try:
        if ":" in spec:
            a, b, k = spec.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(k))]
        return [float(s) for s in spec.split(",") if s.strip()]
    except ValueError as exc:
        raise ArgumentError(f"bad grid {spec!r}") from exc


def _params(args, tol) -> FamilyParams:
    try:
        alpha = float(args.alpha)
    except ValueError as exc:
        raise ArgumentError(f"alpha must be a number, got {args.alpha!r}") from exc
    FamilyParams(alpha, 0.0)  # domain check before theta is resolved
    return FamilyParams(alpha, resolve_theta(args.theta, alpha, tol))


def _emit(doc: dict, out: str | None) -> None:
    text = io.dump(doc, out)
    if out is None:
        print(text)


# ---------------------------------------------------------------- state

def build_state(kind: str, n: int, p: FamilyParams, eps: float | None = None,
                keep_center: bool = False, tol: Tolerances = DEFAULT) -> tuple[DensityMatrix, dict]:
    """Construct one of the named states; returns it with extra metadata."""
    extra: dict = {}
    if kind == "family":
        rho = rho_alpha_theta(p)
    elif kind == "ghz":
        rho = DensityMatrix(ghz_ket(n).projector(), (2,) * n, tol=tol)
    elif kind == "star":
        spec = NetworkSpec.uniform(rho_alpha_theta(p), n, ghz_projector_map(n, keep_center), keep_center)
        rho, norm = star_network_state(spec, tol=tol)
        extra["normalization"] = norm
    elif kind == "xmatrix":
        rho = x_matrix_state(n, p, tol).to_density()
    elif kind == "gme-qutrit":
        rho = rho_gme_qutrit(n, p, tol)
    elif kind == "filtered":
        eps = float(np.tan(p.theta)) if eps is None else eps
        filtered, success = apply_local_filter(rho_gme_qutrit(n, p, tol), eps, tol)
        rho, prob = project_qubit_subspace(filtered, tol)
        extra.update(filter_success=success, subspace_probability=prob)
    else:
        raise ArgumentError(f"unknown state kind {kind!r}")
    return rho, extra


def cmd_state(args, tol: Tolerances) -> int:
    needs_params = args.kind != "ghz"
    p = _params(args, tol) if needs_params else None
    eps = resolve_eps(args.eps, p.theta) if args.kind == "filtered" else None
    rho, extra = build_state(args.kind, args.n, p, eps, args.keep_center, tol)
    params = {"kind": args.kind, "n": args.n if args.kind != "family" else 2}
    if p is not None:
        params.update(alpha=p.alpha, theta=p.theta)
    if eps is not None:
        params["eps"] = eps
    if args.kind == "star":
        params["keep_center"] = args.keep_center
    meta = io.envelope("state", params, tol)
    meta.update(extra)
    _emit(io.state_to_dict(rho, meta), args.out)
    return 0


# ---------------------------------------------------------------- certify

def chsh_settings() -> MeasurementAssignment:
    z, x = np.array([0.0, 0, 1]), np.array([1.0, 0, 0])
    return MeasurementAssignment.from_bloch([[z, x], [(z + x) / np.sqrt(2), (z - x) / np.sqrt(2)]])


def svetlichny_settings(n: int = 3) -> MeasurementAssignment:
    """x-y plane settings: angles {0, pi/2} for the first parties, {-pi/4, pi/4} for the last."""
    rows = [[xy_direction(0.0), xy_direction(np.pi / 2)] for _ in range(n - 1)]
    rows.append([xy_direction(-np.pi / 4), xy_direction(np.pi / 4)])
    return MeasurementAssignment.from_bloch(rows)


def z_settings(n: int) -> MeasurementAssignment:
    return MeasurementAssignment.from_bloch([[[0.0, 0, 1]] for _ in range(n)])


def settings_for(name: str, rho: DensityMatrix) -> tuple[MeasurementAssignment, dict]:
    n = rho.n_parties
    if name == "default":
        name = "chsh" if n == 2 else "svetlichny"
    qubits = all(d == 2 for d in rho.dims)
    if name in ("chsh", "svetlichny", "optimized", "z") and not qubits:
        raise ArgumentError(f"'{name}' settings need a qubit state; project or pass a settings file")
    if name == "chsh":
        if n != 2:
            raise ArgumentError("CHSH settings need 2 parties")
        return chsh_settings(), {"settings": "chsh"}
    if name == "svetlichny":
        return svetlichny_settings(n), {"settings": "svetlichny"}
    if name == "z":
        return z_settings(n), {"settings": "z"}
    if name == "optimized":
        if n != 3:
            raise ArgumentError("optimized settings are available for 3 qubits only")
        value, angles = optimize_svetlichny_xy(rho)
        m = MeasurementAssignment.from_bloch([[xy_direction(t) for t in row] for row in angles])
        return m, {"settings": "optimized", "angles": angles.tolist(), "optimized_value": value}
    path = Path(name)
    if not path.exists():
        raise ArgumentError(f"unknown settings {name!r} (not a preset and no such file)")
    return io.measurements_from_dict(io.load(path)), {"settings": str(path)}


def cmd_certify(args, tol: Tolerances) -> int:
    doc = io.load(args.input)
    params: dict = {"input": str(args.input), "mode": args.mode}
    report: dict = {}
    if "probabilities" in doc:
        if args.mode == "gme":
            raise ArgumentError("mode gme needs a state file, not a behavior")
        behavior = io.behavior_from_dict(doc)
    else:
        rho = io.state_from_dict(doc, tol)
        if args.mode == "gme":
            rep, prob = certify_gme(rho)
            report.update(rep.as_dict(), projection_probability=prob)
            _emit({**io.envelope("certificate", params, tol), "certificate": report}, args.out)
            return 0
        m, info = settings_for(args.settings, rho)
        params.update(info)
        behavior = quantum_behavior(rho, m)
    cert = certify(behavior, FULL_LOCAL if args.mode == "local" else HYBRID, tol=tol)
    report.update(cert.as_dict())
    if behavior.scenario.n_parties == 3 and behavior.scenario.shape == (2,) * 6:
        report["svetlichny_value"] = svetlichny_value(behavior)
    doc = {**io.envelope("certificate", params, tol), "certificate": report,
           "behavior": io.behavior_to_dict(behavior)}
    _emit(doc, args.out)
    return 0


# ---------------------------------------------------------------- sweep

def sweep_row(n: int, alpha: float, theta_spec, eps_spec, numeric: bool, svetlichny: bool,
              tol: Tolerances = DEFAULT) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(n=n, alpha=alpha)
    try:
        theta = resolve_theta(theta_spec, alpha, tol)
    except NoSolutionError:
        row["note"] = "no saturating theta"
        return row
    p = FamilyParams(alpha, theta)
    eps = resolve_eps(eps_spec, p.theta)
    row.update(theta=p.theta, eps=eps, unsteerable=int(is_unsteerable_family(p, tol)),
               C_analytic=analytic_concurrence(n, p))
    notes = []
    if numeric:
        spec = NetworkSpec.uniform(rho_alpha_theta(p), n, ghz_projector_map(n))
        row["C_numeric"] = gme_score(star_network_state(spec, tol=tol)[0]).score
    filtered = None
    if eps_spec in (None, "tan-theta"):
        # the tan(theta) filter output does not depend on theta; theta = 0 is its limit
        row["fidelity"] = ghz_fidelity_formula(n, alpha)
        if p.theta == 0:
            notes.append("theta=0 limit")
        if svetlichny and n == 3:
            filtered = analytic_filtered_state(n, p, tol).to_density()
    else:
        filtered, _ = apply_local_filter(rho_gme_qutrit(n, p, tol), eps, tol)
        filtered, _ = project_qubit_subspace(filtered, tol)
        row["fidelity"] = fidelity_with_pure(filtered, ghz_ket(n))
        notes.append("numeric fidelity")
    if svetlichny:
        if n == 3:
            row["svetlichny"] = optimize_svetlichny_xy(filtered)[0]
        else:
            notes.append("svetlichny only for n=3")
    row["note"] = ";".join(notes)
    return row


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def cmd_sweep(args, tol: Tolerances) -> int:
    ns = parse_int_range(args.n)
    alphas = parse_float_grid(args.alpha)
    thetas = parse_float_grid(args.theta)
    eps_list = ["tan-theta"] if args.eps == "tan-theta" else parse_float_grid(args.eps, auto_ok=False)
    theta_list = ["auto"] if thetas == "auto" else thetas
    points = []
    for n in ns:
        alpha_list = [1 - 1 / n ** 2] if alphas == "auto" else alphas
        points += list(product([n], alpha_list, theta_list, eps_list))
    if len(points) > tol.max_grid_points:
        raise ArgumentError(f"{len(points)} grid points exceed the cap of {tol.max_grid_points}")

    def run(pt):
        return sweep_row(*pt, args.numeric, args.svetlichny, tol)

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(pt) for pt in points]
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(args.out).write_text(buf.getvalue())
        params = {"n": args.n, "alpha": args.alpha, "theta": args.theta, "eps": args.eps,
                  "numeric": args.numeric, "svetlichny": args.svetlichny, "rows": len(rows)}
        io.dump(io.envelope("sweep", params, tol), str(args.out) + ".meta.json")
    return 0


# ---------------------------------------------------------------- simulate

def simulation_report(n: int, samples: int, seed: int, n_settings: int, settings_seed: int,
                      n_chunks: int | None = None, workers: int = 1, lhs: str = "werner",
                      tol: Tolerances = DEFAULT) -> dict:
    """Simulate the lifted model for an ``n``-arm star and compare with the quantum behavior."""
    if lhs == "werner":
        arm_model = builtin_werner_lhs()
        arm_state = rho_alpha_theta(FamilyParams(0.5, np.pi / 4))
        m = random_projective_settings(n, n_settings, np.random.default_rng(settings_seed))
    else:
        d = io.load(lhs)
        arm_model = FiniteLHS.from_dict(d)
        if "arm_state" not in d:
            raise ArgumentError("an LHS file must carry the 'arm_state' it models")
        arm_state = io.state_from_dict(d["arm_state"], tol)
        # every party uses the full measurement list of the finite model
        m = MeasurementAssignment(tuple(np.array(arm_model.measurements) for _ in range(n)))
    model = lift([arm_model] * n, ghz_projector_map(n))
    sim = simulate_behavior(model, m, samples, seed=seed, n_chunks=n_chunks, workers=workers)
    spec = NetworkSpec.uniform(arm_state, n, ghz_projector_map(n))
    target_state, norm = star_network_state(spec, tol=tol)
    target = quantum_behavior(target_state, m)
    cmp = compare_behaviors(sim, target)
    weight_z = abs(sim.weight_mean - norm) / sim.weight_se if sim.weight_se > 0 else float("inf")
    weight_pass = bool(weight_z <= 3)
    params = {"n": n, "samples": samples, "n_settings": m.scenario.inputs_per_party[0],
              "settings_seed": settings_seed, "n_chunks": sim.n_chunks, "lhs": lhs}
    stderr = np.where(np.isfinite(sim.stderr), sim.stderr, -1.0)
    return {
        **io.envelope("simulation", params, tol, seed),
        "status": "PASS" if cmp["tv_pass"] and weight_pass else "FAIL",
        "warnings": list(sim.warnings),
        "behavior": io.behavior_to_dict(sim.behavior),
        "stderr": stderr.ravel().tolist(),
        "quantum_behavior": io.behavior_to_dict(target),
        "comparison": cmp,
        "weight": {"mean": sim.weight_mean, "se": sim.weight_se, "normalization": norm,
                   "z": weight_z, "pass": weight_pass},
        "ess": sim.ess,
        "measurements": io.measurements_to_dict(m),
    }


def cmd_simulate(args, tol: Tolerances) -> int:
    settings_seed = args.seed if args.settings_seed is None else args.settings_seed
    report = simulation_report(args.n, args.samples, args.seed, args.settings, settings_seed,
                               args.chunks, args.workers, args.lhs, tol)
    for msg in report["warnings"]:
        print(f"warning: {msg}", file=sys.stderr)
    _emit(report, args.out)
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localgme", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"localgme {__version__}")
    ap.add_argument("--cap", type=int, help="maximum matrix side length")
    ap.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance field")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("state", help="build a state and write it as JSON")
    st.add_argument("kind", choices=STATE_KINDS)
    st.add_argument("--n", type=int, default=3)
    st.add_argument("--alpha", default="1.0")
    st.add_argument("--theta", default="auto", help="number or 'auto' (saturating theta)")
    st.add_argument("--eps", default="tan-theta", help="filter parameter or 'tan-theta'")
    st.add_argument("--keep-center", action="store_true")
    st.add_argument("--out")
    st.set_defaults(func=cmd_state)

    ce = sub.add_parser("certify", help="certify a state or behavior file")
    ce.add_argument("input")
    ce.add_argument("--mode", choices=("gme", "local", "gmnl"), default="gme")
    ce.add_argument("--settings", default="default",
                    help="chsh | svetlichny | optimized | z | path to a measurement JSON")
    ce.add_argument("--out")
    ce.set_defaults(func=cmd_certify)

    sw = sub.add_parser("sweep", help="tabulate formulas over a parameter grid (CSV)")
    sw.add_argument("--n", default="2:6")
    sw.add_argument("--alpha", default="auto", help="'auto' (1 - 1/n^2), 'a:b:k' or a comma list")
    sw.add_argument("--theta", default="auto")
    sw.add_argument("--eps", default="tan-theta")
    sw.add_argument("--numeric", action="store_true", help="add the numeric score of the star state")
    sw.add_argument("--svetlichny", action="store_true", help="add the optimized Svetlichny value (n=3)")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    si = sub.add_parser("simulate", help="simulate the lifted local model of a star network")
    si.add_argument("--n", type=int, default=2)
    si.add_argument("--samples", type=int, default=10 ** 5)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--settings", type=int, default=2, help="random projective settings per party")
    si.add_argument("--settings-seed", type=int)
    si.add_argument("--chunks", type=int)
    si.add_argument("--workers", type=int, default=1)
    si.add_argument("--lhs", default="werner", help="'werner' or a finite LHS JSON file")
    si.add_argument("--out")
    si.set_defaults(func=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        tol = parse_tolerances(args.tol, args.cap)
        return args.func(args, tol)
    except LocalGMEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ArgumentError.exit_code


if __name__ == "__main__":
    sys.exit(main())
