"""Reproducible experiment runner.

Every subcommand emits machine-readable JSON or CSV (UTF-8, "." decimals);
``--assert`` additionally checks the experiment against its published
tolerance and exits 1 on failure.  Usage errors exit 2 before any output
file is touched; output files are written atomically once complete.
Entropies in files are always nats; ``--bits`` adds a display-only bits
rendering of summary lines.  The state-size budget can be overridden with
the DULAB_MAX_AMPLITUDES environment variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import circuit as ckt
from . import ensemble, gates, mps
from .qinfo import bell_state, kron_states

SCHEMA_VERSION = "1"
EIGHT_THIRDS_PI = 8.0 / (3.0 * math.pi)

NAMED_GATES = ("identity", "swap", "cz", "fourier", "kicked-ising")


def load_gate(name_or_path: str, q: int, J: float, b: float, h: float) -> gates.Gate:
    """Resolve a named gate or a gate file path."""
    name = name_or_path.lower()
    if name == "identity":
        return gates.identity_gate(q)
    if name == "swap":
        return gates.swap_gate(q)
    if name == "cz":
        return gates.cz_gate(q)
    if name == "fourier":
        return gates.fourier_gate(q)
    if name == "kicked-ising":
        if q != 2:
            raise ValueError("kicked-ising is a qubit (q = 2) gate")
        return gates.kicked_ising_gate(J, b, h)
    if os.path.exists(name_or_path):
        g = gates.read_gate_file(name_or_path)
        if g.q != q:
            raise ValueError(f"{name_or_path}: gate has q = {g.q}, expected {q}")
        return g
    raise ValueError(
        f"unknown gate {name_or_path!r} (named gates: {', '.join(NAMED_GATES)})")


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".dulab-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _write_atomic(out, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json_text(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _status(ok: bool | None) -> int:
    if ok is None or ok:
        return 0
    return 1


def _summarize(args, doc: dict) -> None:
    if args.out:
        line = f"{doc.get('experiment')}: " + (
            "PASS" if doc.get("pass", True) else "FAIL"
        )
        print(line)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_zigzag(args, parser) -> int:
    q, L, T = args.q, args.L, args.steps
    gate = None
    bond_gates = None
    if args.gate == "mix":
        if q != 2:
            parser.error("--gate mix is defined for q = 2")
        kim = gates.kicked_ising_gate(args.J, args.b, args.h)
        swap = gates.swap_gate(2)
        bond_gates = {bnd: (swap if (bnd // 2) % 2 == 0 else kim) for bnd in range(L - 1)}
        gate = swap
    else:
        gate = load_gate(args.gate, q, args.J, args.b, args.h)
    if args.initial == "dimer":
        initial = ckt.dimer_state(L, q)
        parity = "odd"  # gates must act at the valleys of the dimer profile
    else:
        initial = ckt.product_state(L, q)
        parity = "even"
    if args.first_parity != "auto":
        parity = args.first_parity
    circ = ckt.BrickworkCircuit(L=L, q=q, gate=gate, first_parity=parity, bond_gates=bond_gates)
    rec = ckt.evolve(circ, initial, T)

    buf = io.StringIO()
    rec_path_written = False
    if args.format == "csv":
        w = csv.writer(buf)
        w.writerow(["t", "bond", "entropy_nats", "light_cone_valid"])
        for i, t in enumerate(rec.times):
            for bnd in range(rec.L - 1):
                w.writerow([t, bnd, repr(float(rec.profiles[i, bnd])),
                            str(bool(rec.light_cone_valid[i])).lower()])
        text = buf.getvalue()
    lnq = math.log(q)
    central = rec.central_series()
    even_ts = [t for t in rec.times if t and t % 2 == 0 and rec.light_cone_valid[t]]
    # growth form: S(t) - S(0) = t ln q at even t; identical to S(t) = t ln q
    # when the central cut starts at zero (a valley), and phase-correct when
    # the chain length puts a dimer peak on the central cut
    worst = 0.0
    for t in even_ts:
        worst = max(worst, abs((central[t] - central[0]) - t * lnq))
    ok = worst <= 1e-9
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "zigzag",
        "params": {"q": q, "L": L, "steps": T, "gate": args.gate, "J": args.J,
                   "b": args.b, "h": args.h, "initial": args.initial,
                   "first_parity": parity},
        "central_cut": rec.central_cut(),
        "central_entropy_nats": [float(x) for x in central],
        "max_step_increase": rec.max_step_increase(),
        "per_gate_bound_ok": rec.max_step_increase() <= 2 * lnq + 1e-9,
        "target": "S(t) - S(0) = t*ln(q) at even t within the light cone",
        "tolerance": 1e-9,
        "max_even_t_deviation": worst,
        "pass": bool(ok),
    }
    if args.bits:
        summary["central_entropy_bits_display"] = [float(x / math.log(2)) for x in central]
    if args.format == "json":
        summary["record"] = [
            {"t": int(t), "profile_nats": [float(x) for x in rec.profiles[i]],
             "light_cone_valid": bool(rec.light_cone_valid[i])}
            for i, t in enumerate(rec.times)
        ]
        text = _json_text(summary)
    _emit(text, args.out)
    if args.out:
        print(_json_text(summary), end="")
    if args.do_assert:
        return _status(ok and summary["per_gate_bound_ok"])
    return 0


def _cmd_kicked_ising(args, parser) -> int:
    L, T = args.L, args.steps
    u = gates.kicked_ising_gate(args.J, args.b, args.h)
    u0 = gates.kicked_ising_first_gate(args.J, args.h)
    circ = ckt.BrickworkCircuit(L=L, q=2, gate=u, first_layer_override=u0)
    if args.klass == "T":
        phases = [0.3 * k for k in range(L)]
        initial = ckt.xy_product_state(L, phases)
        zig_time = 1
    else:
        initial = ckt.z_product_state(L, [k % 2 for k in range(L)])
        zig_time = 2
    rec = ckt.evolve(circ, initial, T)
    ln2 = math.log(2)
    ok_zig, parity = ckt.zigzag_check(rec.profiles[zig_time], 2, tol=1e-9)
    central = rec.central_series()
    growth_ok = True
    for t in range(zig_time + 2, T + 1, 2):
        if rec.light_cone_valid[t]:
            growth_ok &= abs((central[t] - central[t - 2]) - 2 * ln2) <= 1e-9
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "kicked-ising",
        "params": {"L": L, "steps": T, "class": args.klass, "J": args.J,
                   "b": args.b, "h": args.h},
        "zigzag_time": zig_time,
        "zigzag_ok": bool(ok_zig),
        "zigzag_valley_parity": parity,
        "central_entropy_nats": [float(x) for x in central],
        "growth_per_two_layers_ok": bool(growth_ok),
        "tolerance": 1e-9,
        "pass": bool(ok_zig and growth_ok),
    }
    if args.bits:
        doc["central_entropy_bits_display"] = [float(x / ln2) for x in central]
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    if args.do_assert:
        return _status(doc["pass"])
    return 0


def _cmd_mps(args, parser) -> int:
    if args.load:
        pair = mps.load_mps(args.load, validate_solvable=False)
    else:
        pair = mps.random_solvable(args.q, args.chi, args.seed)
    if args.save:
        mps.save_mps(pair, args.save)
    defect = mps.solvability_defect(pair)
    gap = mps.transfer_gap(pair)
    e_ab, e_ba = mps.cut_entropies_exact(pair, n_cells=args.cells)
    pur2 = mps.replica_purity(pair, 2, n_cells=args.cells)
    pur3 = mps.replica_purity(pair, 3, n_cells=args.cells)
    chi_q = pair.chi * pair.q
    tol = 1e-8
    ok = (
        abs(e_ab - math.log(chi_q)) <= tol
        and abs(e_ba - math.log(pair.chi)) <= tol
        and abs(pur2 - 1.0 / chi_q) <= tol
        and abs(pur3 - 1.0 / chi_q ** 2) <= tol
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "mps",
        "params": {"q": pair.q, "chi": pair.chi, "cells": args.cells},
        "seed": args.seed,
        "solvability_defect": defect,
        "transfer_gap": gap,
        "E_AB": e_ab,
        "E_BA": e_ba,
        "E_AB_target": math.log(chi_q),
        "E_BA_target": math.log(pair.chi),
        "purity_n2": pur2,
        "purity_n3": pur3,
        "purity_n2_target": 1.0 / chi_q,
        "purity_n3_target": 1.0 / chi_q ** 2,
        "tolerance": tol,
        "pass": bool(ok),
    }
    if args.bits:
        doc["E_AB_bits_display"] = e_ab / math.log(2)
        doc["E_BA_bits_display"] = e_ba / math.log(2)
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    if args.do_assert:
        return _status(ok)
    return 0


def _ensemble_doc(args, experiment, stats, target, tolerance) -> dict:
    ok = abs(stats.mean - target) <= tolerance
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "params": {"q": args.q, "samples": args.samples},
        "seed": stats.master_seed,
        "n_samples": stats.n_samples,
        "mean": stats.mean,
        "standard_error": stats.standard_error,
        "target": target,
        "tolerance": tolerance,
        "pass": bool(ok),
    }


def _write_raw(path, values) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["index", "value"])
    for i, v in enumerate(values):
        w.writerow([i, repr(float(v))])
    _write_atomic(path, buf.getvalue())


def _cmd_haar_fidelity(args, parser) -> int:
    stats = ensemble.haar_choi_fidelity(args.q, args.samples, args.seed,
                                        keep_values=bool(args.raw))
    doc = _ensemble_doc(args, "haar-fidelity", stats, EIGHT_THIRDS_PI, args.tolerance)
    if args.raw:
        _write_raw(args.raw, stats.values)
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    return _status(doc["pass"]) if args.do_assert else 0


def _cmd_state_fidelity(args, parser) -> int:
    stats = ensemble.haar_state_fidelity(args.q, args.samples, args.seed,
                                         keep_values=bool(args.raw))
    doc = _ensemble_doc(args, "state-fidelity", stats, EIGHT_THIRDS_PI, args.tolerance)
    if args.raw:
        _write_raw(args.raw, stats.values)
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    return _status(doc["pass"]) if args.do_assert else 0


def _cmd_catalan(args, parser) -> int:
    results = []
    overall = True
    rel_tol = {2: 0.02, 3: 0.05, 4: 0.10}
    all_stats = ensemble.haar_purity_moments(args.q, args.n, args.samples, args.seed)
    for n in args.n:
        stats = all_stats[n]
        target = ensemble.purity_moment_target(args.q, n)
        cn = ensemble.catalan_number(n)
        scaled = stats.mean * args.q ** (2 * (n - 1))
        ok = abs(scaled - cn) <= rel_tol[n] * cn
        overall &= ok
        results.append({
            "n": n,
            "mean": stats.mean,
            "standard_error": stats.standard_error,
            "target": target,
            "catalan": cn,
            "scaled_mean": scaled,
            "tolerance_rel": rel_tol[n],
            "pass": bool(ok),
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "catalan",
        "params": {"q": args.q, "samples": args.samples, "n": list(args.n)},
        "seed": args.seed,
        "moments": results,
        "pass": bool(overall),
    }
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    return _status(overall) if args.do_assert else 0


def _cmd_audit_gate(args, parser) -> int:
    g = load_gate(args.gate, args.q, args.J, args.b, args.h)
    rep = gates.defects(g)
    state = kron_states(bell_state(args.q), bell_state(args.q))
    audit = ckt.four_party_report(g, state, with_reconstruction=args.reconstruct)
    ok = audit.all_hold(slack=1e-9) and rep.relation_ok
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "audit-gate",
        "params": {"gate": args.gate, "q": args.q, "J": args.J, "b": args.b, "h": args.h},
        "gram_defect": rep.gram_defect,
        "choi_defect": rep.choi_defect,
        "choi_defect_unnormalized": rep.choi_defect * args.q ** 2,
        "relation_ok": rep.relation_ok,
        "is_dual": rep.is_dual(),
        "report": audit.to_json_dict(),
        "pass": bool(ok),
    }
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    return _status(ok) if args.do_assert else 0


def _cmd_project_dual(args, parser) -> int:
    if args.gate == "haar":
        if args.seed is None:
            parser.error("--gate haar requires --seed")
        g = gates.haar_gate(args.q, args.seed)
    else:
        g = load_gate(args.gate, args.q, args.J, args.b, args.h)
    res = gates.project_dual_iterative(g, max_iters=args.max_iters, tol=args.tol)
    final_defect = res.defect_trace[-1]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "project-dual",
        "params": {"gate": args.gate, "q": args.q, "max_iters": args.max_iters,
                   "tol": args.tol},
        "seed": args.seed,
        "converged": res.converged,
        "iterations": res.iterations,
        "final_choi_defect": final_defect,
        "defect_trace": list(res.defect_trace),
        "distance_to_input": float(np.linalg.svd(
            g.matrix - res.gate.matrix, compute_uv=False).sum()),
    }
    ok = (not res.converged) or final_defect <= args.tol
    if args.q == 2:
        ux, dist = gates.nearest_dual_q2(g)
        doc["snap_distance"] = dist
        doc["snap_defect"] = gates.choi_defect(ux)
        ok = ok and doc["snap_defect"] <= 1e-10
    doc["pass"] = bool(ok)
    _emit(_json_text(doc), args.out)
    _summarize(args, doc)
    return _status(ok) if args.do_assert else 0


def _cmd_scan_eps_delta(args, parser) -> int:
    base = load_gate(args.base, args.q, args.J, args.b, args.h)
    thetas = [0.0] + list(np.logspace(math.log10(args.theta_min),
                                      math.log10(args.theta_max), args.points))
    try:
        points = ensemble.eps_delta_scan(base, thetas, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    slope, intercept = ensemble.loglog_slope(points)
    cert_ok = True
    for p in points:
        if p.dist_to_projection is None:
            continue
        d_un = p.delta_unnormalized
        if 0 < d_un <= 0.1:
            cert_ok &= p.dist_to_projection <= 14 * math.sqrt(d_un)
    zero_ok = points[0].epsilon == 0.0 and points[0].delta == 0.0
    if points[0].dist_to_projection is not None:
        zero_ok &= points[0].dist_to_projection == 0.0
    nonzero = [p for p in points if p.theta > 0]
    shrink_ok = nonzero[0].delta <= nonzero[-1].delta
    ok = zero_ok and 0.4 <= slope <= 1.1 and cert_ok and shrink_ok
    rows = [["theta", "epsilon", "delta", "delta_unnormalized", "dist_to_projection",
             "certificate_bound"]]
    for p in points:
        d_un = p.delta * args.q ** 2
        rows.append([
            repr(p.theta), repr(p.epsilon), repr(p.delta), repr(d_un),
            "" if p.dist_to_projection is None else repr(p.dist_to_projection),
            repr(14 * math.sqrt(d_un)),
        ])
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": "scan-eps-delta",
        "params": {"base": args.base, "q": args.q, "theta_min": args.theta_min,
                   "theta_max": args.theta_max, "points": args.points},
        "seed": args.seed,
        "loglog_slope": slope,
        "slope_band": [0.4, 1.1],
        "sqrt_law_constant": ensemble.sqrt_law_constant(points),
        "zero_point_exact": bool(zero_ok),
        "certificate_ok": bool(cert_ok),
        "pass": bool(ok),
    }
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf).writerows(rows)
        _emit(buf.getvalue(), args.out)
        if args.out:
            print(_json_text(summary), end="")
    else:
        summary["points"] = [
            {"theta": p.theta, "epsilon": p.epsilon, "delta": p.delta,
             "dist_to_projection": p.dist_to_projection}
            for p in points
        ]
        _emit(_json_text(summary), args.out)
    return _status(ok) if args.do_assert else 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, seed_required=False, fmt=None):
    p.add_argument("--out", help="output file (atomic write); stdout if omitted")
    p.add_argument("--assert", dest="do_assert", action="store_true",
                   help="check the published tolerance and exit 1 on failure")
    if fmt:
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
    if seed_required:
        p.add_argument("--seed", type=int, required=True,
                       help="master seed (mandatory for stochastic experiments)")


def _add_gate_params(p):
    p.add_argument("--J", type=float, default=math.pi / 4)
    p.add_argument("--b", type=float, default=math.pi / 4)
    p.add_argument("--h", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dulab",
        description="Entanglement-growth and dual-unitarity experiments on brickwork circuits.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zigzag", help="dual-unitary relay of the alternating bond profile")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--L", type=int, default=16)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--gate", default="swap",
                   help="swap | fourier | kicked-ising | mix | identity | cz | file path")
    p.add_argument("--initial", choices=("dimer", "product"), default="dimer")
    p.add_argument("--first-parity", choices=("auto", "even", "odd"), default="auto")
    p.add_argument("--bits", action="store_true", help="display-only bits rendering")
    _add_gate_params(p)
    _add_common(p, fmt="csv")
    p.set_defaults(func=_cmd_zigzag)

    p = sub.add_parser("kicked-ising", help="separating product states through the kicked-Ising circuit")
    p.add_argument("--L", type=int, default=14)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--class", dest="klass", choices=("T", "L"), required=True)
    p.add_argument("--bits", action="store_true")
    _add_gate_params(p)
    _add_common(p)
    p.set_defaults(func=_cmd_kicked_ising)

    p = sub.add_parser("mps", help="solvable matrix product state checks")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--chi", type=int, default=2)
    p.add_argument("--cells", type=int, default=3)
    p.add_argument("--load", help="load an MPS pair from a JSON file instead of sampling")
    p.add_argument("--save", help="save the pair to a JSON file")
    p.add_argument("--bits", action="store_true")
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_mps)

    p = sub.add_parser("haar-fidelity", help="mean operator-state fidelity to maximal mixing")
    p.add_argument("--q", type=int, default=16)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--raw", help="stream per-sample values to this CSV")
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_haar_fidelity)

    p = sub.add_parser("state-fidelity", help="mean single-qudit marginal fidelity for Haar states")
    p.add_argument("--q", type=int, default=32)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--raw", help="stream per-sample values to this CSV")
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_state_fidelity)

    p = sub.add_parser("catalan", help="Haar purity moments against Catalan targets")
    p.add_argument("--q", type=int, default=16)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--n", type=int, nargs="+", default=[2, 3], choices=(2, 3, 4))
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_catalan)

    p = sub.add_parser("audit-gate", help="defects and the four-party audit on Bell x Bell")
    p.add_argument("--gate", required=True)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--reconstruct", action="store_true",
                   help="include the distillable-structure reconstruction distance")
    _add_gate_params(p)
    _add_common(p)
    p.set_defaults(func=_cmd_audit_gate)

    p = sub.add_parser("project-dual", help="iterative projection onto the dual-unitary set")
    p.add_argument("--gate", default="haar", help="haar | named gate | file path")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, help="seed (required with --gate haar)")
    _add_gate_params(p)
    p.add_argument("--out", help="output file (atomic write); stdout if omitted")
    p.add_argument("--assert", dest="do_assert", action="store_true")
    p.set_defaults(func=_cmd_project_dual)

    p = sub.add_parser("scan-eps-delta", help="entanglement deficit vs dual defect along a perturbation")
    p.add_argument("--base", default="swap", help="dual base gate (swap | fourier | kicked-ising | file)")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--theta-min", type=float, default=1e-3)
    p.add_argument("--theta-max", type=float, default=1e-1)
    p.add_argument("--points", type=int, default=9)
    _add_gate_params(p)
    _add_common(p, seed_required=True, fmt="csv")
    p.set_defaults(func=_cmd_scan_eps_delta)

    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (ValueError, OSError, ckt.CapacityError, mps.DegenerateTransferError) as exc:
        parser.error(str(exc))
        return 2  # unreachable; parser.error raises SystemExit(2)


if __name__ == "__main__":
    sys.exit(main())
