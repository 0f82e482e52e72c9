"""Command-line workflow: condition checking, design, estimation, reproduction.

Subcommands:
  check      data informativity and window-extension selection on a dataset
  design     synthesize an estimator (open- or closed-loop) from a dataset
  estimate   run a saved realization over an output stream
  repro-sim  regenerate the two-input benchmark study end to end

Exit codes: 0 success, 1 design or condition infeasibility, 2 I/O or format
errors.  Datasets are CSV with a header row `t,u_1..,y_1..`; output-only
streams use `t,y_1..`.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Optional

import numpy as np

from .benchmark import reproduce_simulation, select_n_est
from .cl_uie import design_cl_uie
from .estimator import mae, run_batch, write_estimates_csv
from .gen_inverse import svd_with_rank
from .hankel import build_design_stack, is_persistently_exciting
from .lti import IoTrajectory, lag, load_system
from .op_uie import design_op_uie, load_realization, save_realization


class FormatError(ValueError):
    """Malformed input file (maps to exit code 2)."""


def read_dataset_csv(path) -> IoTrajectory:
    """Read a full dataset CSV with columns t, u_1.., y_1.. (header required)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        u_cols = [i for i, name in enumerate(header) if name.strip().startswith("u_")]
        y_cols = [i for i, name in enumerate(header) if name.strip().startswith("y_")]
        if not u_cols or not y_cols:
            raise FormatError(f"{path}: header must contain u_* and y_* columns, got {header}")
        us, ys = [], []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                us.append([float(row[i]) for i in u_cols])
                ys.append([float(row[i]) for i in y_cols])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{ln}: bad row: {exc}") from None
    if not us:
        raise FormatError(f"{path}: no data rows")
    return IoTrajectory(np.array(us), np.array(ys))


def read_outputs_csv(path) -> np.ndarray:
    """Read an outputs-only CSV with columns t, y_1.. (header required)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        y_cols = [i for i, name in enumerate(header) if name.strip().startswith("y_")]
        if not y_cols:
            raise FormatError(f"{path}: header must contain y_* columns, got {header}")
        ys = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ys.append([float(row[i]) for i in y_cols])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{ln}: bad row: {exc}") from None
    if not ys:
        raise FormatError(f"{path}: no data rows")
    return np.array(ys)


def write_dataset_csv(path, data: IoTrajectory) -> None:
    header = (
        ["t"]
        + [f"u_{i+1}" for i in range(data.n_u)]
        + [f"y_{i+1}" for i in range(data.n_y)]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(len(data)):
            writer.writerow(
                [t]
                + [f"{v:.16e}" for v in data.inputs[t]]
                + [f"{v:.16e}" for v in data.outputs[t]]
            )


def _achieved_pe_order(inputs: np.ndarray, rank_tol: float) -> int:
    """Largest k with the depth-k input Hankel matrix of full row rank."""
    T, n_u = inputs.shape
    best = 0
    k = 1
    while k * n_u <= T - k + 1:
        if is_persistently_exciting(inputs, k, rank_tol):
            best = k
        else:
            break
        k += 1
    return best


def _parse_mask(spec: Optional[str]):
    """Parse a LO:HI%PERIOD clamp window, e.g. 76:96%96 zeroes those phases."""
    if spec is None:
        return None
    try:
        window, period = spec.split("%")
        lo, hi = window.split(":")
        lo, hi, period = int(lo), int(hi), int(period)
    except ValueError:
        raise FormatError(f"bad mask spec {spec!r}, expected LO:HI%PERIOD") from None
    if period < 1:
        raise FormatError("mask period must be at least 1")
    return lambda t: lo <= (t % period) < hi


def _parse_z0(spec: Optional[str], n_z: int):
    if spec is None:
        return None
    try:
        values = [float(v) for v in spec.split(",")]
    except ValueError:
        raise FormatError(f"bad z0 spec {spec!r}, expected comma-separated floats") from None
    if len(values) != n_z:
        raise FormatError(f"z0 must have {n_z} entries, got {len(values)}")
    return np.array(values)


def _emit_json(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _select_n_est_informative(data, n_init, max_n_est, rank_tol):
    """Auto selection: uniqueness condition plus the necessary excitation order.

    Without a model the system order is unknown, so excitation of order
    n_init + n_est is required as the necessary part of the informativity
    assumption; the full order (plus n_x) is checked when a model is given.
    """
    pe_achieved = _achieved_pe_order(data.inputs, rank_tol)
    _, selection = select_n_est(data, n_init, max_n_est, rank_tol)
    chosen = None
    for entry in selection:
        entry["pe_ok"] = pe_achieved >= n_init + entry["n_est"]
        if chosen is None and entry.get("null_inclusion") and entry["pe_ok"]:
            chosen = entry["n_est"]
    return chosen, selection, pe_achieved


def _validate_config(args) -> None:
    if getattr(args, "n_init", 1) < 1:
        raise FormatError("n-init must be at least 1")
    if getattr(args, "max_n_est", 1) < 1:
        raise FormatError("max-n-est must be at least 1")
    if getattr(args, "rank_tol", 1.0) <= 0:
        raise FormatError("rank-tol must be positive")
    if getattr(args, "psd_margin", 1.0) <= 0:
        raise FormatError("psd-margin must be positive")
    n_est = getattr(args, "n_est", "auto")
    if n_est != "auto":
        try:
            value = int(n_est)
        except ValueError:
            raise FormatError(f"n-est must be an integer or 'auto', got {n_est!r}") from None
        if value < 1:
            raise FormatError("n-est must be at least 1")


def cmd_check(args) -> int:
    _validate_config(args)
    data = read_dataset_csv(args.data)
    chosen, selection, pe_achieved = _select_n_est_informative(
        data, args.n_init, args.max_n_est, args.rank_tol
    )
    diagnostics = {
        "T": len(data),
        "n_u": data.n_u,
        "n_y": data.n_y,
        "n_init": args.n_init,
        "pe_order_achieved": pe_achieved,
        "n_est_candidates": selection,
    }
    if args.n_est != "auto":
        requested = int(args.n_est)
        entry = next((s for s in selection if s.get("n_est") == requested), None)
        ok = bool(entry and entry.get("null_inclusion") and entry.get("pe_ok"))
        diagnostics["n_est"] = requested if ok else None
        diagnostics["requested_n_est_ok"] = ok
        chosen = requested if ok else None
    else:
        diagnostics["n_est"] = chosen
    if chosen is not None:
        stack = build_design_stack(data, args.n_init, chosen)
        f = svd_with_rank(stack.H, args.rank_tol)
        diagnostics["stack"] = {
            "n_c": stack.n_c,
            "rank": f.n_S,
            "singular_values": f.s.tolist(),
        }
    if args.model:
        sys_true = load_system(args.model)
        ell = lag(sys_true, args.rank_tol)
        diagnostics["model"] = {
            "lag": ell,
            "n_init_ok": args.n_init >= ell,
            "assumption_pe_order": (
                args.n_init + chosen + sys_true.n_x if chosen is not None else None
            ),
        }
        if chosen is not None:
            diagnostics["model"]["assumption_pe_ok"] = bool(
                is_persistently_exciting(
                    data.inputs, args.n_init + chosen + sys_true.n_x, args.rank_tol
                )
            )
    _emit_json(diagnostics, args.out)
    return 0 if chosen is not None else 1


def cmd_design(args) -> int:
    _validate_config(args)
    data = read_dataset_csv(args.data)
    if args.n_est == "auto":
        chosen, _, _ = _select_n_est_informative(
            data, args.n_init, args.max_n_est, args.rank_tol
        )
        if chosen is None:
            print("no admissible N_est found; run `check` for diagnostics", file=sys.stderr)
            return 1
        n_est = chosen
    else:
        n_est = int(args.n_est)
    stack = build_design_stack(data, args.n_init, n_est)
    pe_order = _achieved_pe_order(data.inputs, args.rank_tol)
    if args.kind == "op":
        real, report = design_op_uie(
            stack,
            rank_tol=args.rank_tol,
            eps=args.psd_margin,
            decay_rate=args.decay_rate,
            pe_order_checked=pe_order,
        )
        extra = None
    else:
        real, report, blocks = design_cl_uie(
            stack,
            rank_tol=args.rank_tol,
            eps=args.psd_margin,
            decay_rate=args.decay_rate,
            pe_order_checked=pe_order,
        )
        extra = (
            {
                "closed_loop": {
                    "L": blocks.L_gain.tolist() if blocks.L_gain is not None else None,
                    "C_eff": blocks.C_eff.tolist(),
                    "D_eff": blocks.D_eff.tolist(),
                }
            }
            if real is not None
            else None
        )
    payload = {"n_est": n_est, **report.to_dict()}
    _emit_json(payload, args.out_report)
    if real is None:
        print(f"design infeasible (status: {report.solver_status})", file=sys.stderr)
        return 1
    save_realization(real, args.out_realization, extra=extra)
    print(
        f"{real.kind} realization written to {args.out_realization} "
        f"(spectral radius {real.spectral_radius:.4f})"
    )
    return 0


def cmd_estimate(args) -> int:
    real = load_realization(args.realization)
    outputs = read_outputs_csv(args.outputs)
    if outputs.shape[1] != real.n_y:
        raise FormatError(
            f"output dimension {outputs.shape[1]} does not match realization ({real.n_y})"
        )
    z0 = _parse_z0(args.z0, real.n_z)
    mask = _parse_mask(args.mask)
    result = run_batch(real, outputs, z0=z0, mask=mask)
    if len(result) == 0:
        print("stream too short, nothing estimated", file=sys.stderr)
        return 1
    truth = None
    if args.truth:
        truth_data = read_dataset_csv(args.truth)
        truth = truth_data.inputs
        if truth.shape[0] <= int(result.times.max()):
            raise FormatError("truth file shorter than the estimated range")
    write_estimates_csv(args.out, result, truth=truth)
    print(f"{len(result)} estimates written to {args.out}")
    if truth is not None:
        print(f"MAE: {mae(result.estimates, truth[result.times]):.6g}")
    return 0


def cmd_repro_sim(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    result = reproduce_simulation(
        args.gamma,
        seed=args.seed,
        n_init=args.n_init,
        max_n_est=args.max_n_est,
        fresh_scale=args.fresh_scale,
        retries=args.retries,
        rank_tol=args.rank_tol,
        eps=args.psd_margin,
    )
    write_dataset_csv(os.path.join(args.out_dir, "dataset.csv"), result.data)
    write_dataset_csv(os.path.join(args.out_dir, "fresh.csv"), result.fresh)
    for kind, real in (("op", result.op), ("cl", result.cl)):
        if real is not None:
            save_realization(real, os.path.join(args.out_dir, f"{kind}_realization.json"))
    if result.errors:
        _write_error_curves(os.path.join(args.out_dir, "error_curves.csv"), result.errors)
    _emit_json(result.summary, os.path.join(args.out_dir, "summary.json"))
    if not result.feasible:
        print(
            "design infeasible for every attempted seed; see summary.json diagnostics",
            file=sys.stderr,
        )
        return 1
    radii = (result.op.spectral_radius, result.cl.spectral_radius)
    print(
        f"gamma={args.gamma}: N_est={result.n_est}, spectral radii "
        f"op={radii[0]:.4f} cl={radii[1]:.4f}; artifacts in {args.out_dir}"
    )
    return 0


def _write_error_curves(path, errors: dict) -> None:
    kinds = sorted(errors)
    index = {}
    for kind in kinds:
        times, du = errors[kind]
        for i, t in enumerate(times):
            index.setdefault(int(t), {})[kind] = du[i]
    n_u = next(iter(errors.values()))[1].shape[1]
    header = ["t"] + [f"du_{kind}_{i+1}" for kind in kinds for i in range(n_u)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in sorted(index):
            row = [t]
            for kind in kinds:
                du = index[t].get(kind)
                row += ["" for _ in range(n_u)] if du is None else [f"{v:.16e}" for v in du]
            writer.writerow(row)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uiekit", description="data-driven unknown-input estimator toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--n-init", type=int, default=5, help="past-window length")
        p.add_argument("--n-est", default="auto", help="window extension, integer or 'auto'")
        p.add_argument("--max-n-est", type=int, default=10, help="cap for the auto search")
        p.add_argument("--rank-tol", type=float, default=1e-8, help="relative rank tolerance")

    p_check = sub.add_parser("check", help="data informativity diagnostics")
    p_check.add_argument("data", help="dataset CSV (t,u_*,y_*)")
    add_common(p_check)
    p_check.add_argument("--model", help="optional true-system JSON for lag guidance")
    p_check.add_argument("--out", help="write diagnostics JSON here instead of stdout")
    p_check.set_defaults(func=cmd_check)

    p_design = sub.add_parser("design", help="synthesize an estimator")
    p_design.add_argument("data", help="dataset CSV (t,u_*,y_*)")
    add_common(p_design)
    p_design.add_argument("--kind", choices=("op", "cl"), default="op")
    p_design.add_argument("--psd-margin", type=float, default=1e-6)
    p_design.add_argument("--decay-rate", type=float, default=1.0,
                          help="certify spectral radius below this value")
    p_design.add_argument("--out-realization", default="realization.json")
    p_design.add_argument("--out-report", default=None,
                          help="write the design report JSON here instead of stdout")
    p_design.set_defaults(func=cmd_design)

    p_est = sub.add_parser("estimate", help="run a realization over an output stream")
    p_est.add_argument("realization", help="realization JSON from `design`")
    p_est.add_argument("outputs", help="outputs CSV (t,y_*)")
    p_est.add_argument("--out", default="estimates.csv")
    p_est.add_argument("--truth", help="dataset CSV with true inputs for evaluation")
    p_est.add_argument("--z0", help="initial guess, comma-separated floats")
    p_est.add_argument("--mask", help="clamp window LO:HI%%PERIOD, estimates forced to 0")
    p_est.set_defaults(func=cmd_estimate)

    p_repro = sub.add_parser("repro-sim", help="benchmark simulation study")
    p_repro.add_argument("--gamma", type=float, required=True, choices=(0.0, 1.0))
    p_repro.add_argument("--seed", type=int, default=0)
    p_repro.add_argument("--n-init", type=int, default=5)
    p_repro.add_argument("--max-n-est", type=int, default=10)
    p_repro.add_argument("--fresh-scale", type=float, default=0.15,
                         help="dither amplitude of the evaluation run")
    p_repro.add_argument("--retries", type=int, default=3)
    p_repro.add_argument("--rank-tol", type=float, default=1e-8)
    p_repro.add_argument("--psd-margin", type=float, default=1e-6)
    p_repro.add_argument("--out-dir", default="repro")
    p_repro.set_defaults(func=cmd_repro_sim)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
