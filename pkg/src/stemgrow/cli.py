"""Command-line entry points: run, twin, audit, oracle-check."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import SimConfig, config_from_dict, config_to_dict, load_config
from .diagnostics import audit_arrays, step_normal_rates
from .errors import (
    NoCandidateFeasible,
    ParseError,
    SimulationError,
    TooManyContacts,
    ValidationError,
)
from .reaction import ContactSet, ConstraintSystem, density_from_multipliers, oracle_solve_reaction
from .stepper import run as run_scenario
from .stepper import twin_run
from .trajectory import (
    read_jsonl,
    read_manifest,
    write_events,
    write_frames,
    write_manifest,
    _serialize,
)

log = logging.getLogger("stemgrow.cli")

EXIT_CODES = {"HorizonReached": 0, "Breakdown": 10, "IntegrityFailure": 20}


def _setup_logging() -> None:
    level = os.environ.get("STEMGROW_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _write_run(outdir: str, traj, config: SimConfig, argv: list[str]) -> dict:
    os.makedirs(outdir, exist_ok=True)
    frames_path = os.path.join(outdir, "frames.jsonl")
    events_path = os.path.join(outdir, "events.jsonl")
    n_written = write_frames(frames_path, traj.frames, config.stride)
    write_events(events_path, traj.events)
    outputs = {
        "frames": "frames.jsonl",
        "events": "events.jsonl",
        "exit_kind": traj.exit_kind,
        "frames_written": n_written,
        "frames_total": len(traj.frames),
    }
    return write_manifest(
        os.path.join(outdir, "manifest.json"),
        config_to_dict(config),
        argv,
        outputs,
        __version__,
    )


def _cmd_run(args, argv) -> int:
    config = load_config(args.config)
    if args.stride is not None:
        config.stride = args.stride
    if args.seed is not None:
        config.rng_seed = args.seed
    traj = run_scenario(config)
    _write_run(args.out, traj, config, argv)
    final = traj.final_frame
    print(
        f"{traj.exit_kind}: t={final.t:.6g} nodes={final.n_grown + 1} "
        f"frames={len(traj.frames)} events={len(traj.events)} -> {args.out}"
    )
    return EXIT_CODES[traj.exit_kind]


def _parse_perturbation(spec: str) -> tuple[float, np.ndarray]:
    parts = spec.split(":")
    if parts[0] != "tilt" or len(parts) not in (2, 3):
        raise ValidationError(
            f"--perturb must look like tilt:ANGLE[:X,Y,Z], got {spec!r}"
        )
    try:
        angle = float(parts[1])
    except ValueError:
        raise ValidationError(f"--perturb angle {parts[1]!r} is not a number")
    axis = np.array([0.0, 1.0, 0.0])
    if len(parts) == 3:
        try:
            axis = np.array([float(x) for x in parts[2].split(",")])
        except ValueError:
            raise ValidationError(f"--perturb axis {parts[2]!r} is not X,Y,Z")
        if axis.shape != (3,):
            raise ValidationError("--perturb axis needs three components")
    return angle, axis


def _cmd_twin(args, argv) -> int:
    config = load_config(args.config)
    if args.stride is not None:
        config.stride = args.stride
    angle, axis = _parse_perturbation(args.perturb)
    result = twin_run(config, angle, axis)

    os.makedirs(args.out, exist_ok=True)
    _write_run(os.path.join(args.out, "base"), result.base, config, argv)
    _write_run(os.path.join(args.out, "perturbed"), result.perturbed, config, argv)
    with open(os.path.join(args.out, "distances.jsonl"), "w") as fh:
        for t, d in zip(result.times, result.distances):
            fh.write(_serialize({"t": float(t), "distance": float(d)}))
            fh.write("\n")
    cert = {
        "growth_constant": result.growth_constant,
        "perturbation": {"kind": "tilt", "angle": angle, "axis": axis},
        **result.details,
    }
    with open(os.path.join(args.out, "certificate.json"), "w") as fh:
        fh.write(_serialize(cert))
        fh.write("\n")
    print(
        f"twin: C={result.growth_constant:.6g} "
        f"D0={result.details['initial_distance']:.6g} "
        f"DT={result.details['terminal_distance']:.6g} "
        f"({result.base.exit_kind}/{result.perturbed.exit_kind}) -> {args.out}"
    )
    return max(EXIT_CODES[result.base.exit_kind], EXIT_CODES[result.perturbed.exit_kind])


def _load_frame_arrays(rec: dict) -> dict:
    out = {
        "t": float(rec["t"]),
        "n": int(rec["n"]),
        "s": np.asarray(rec["s"], dtype=float),
        "gamma": np.asarray(rec["gamma"], dtype=float),
        "k": np.asarray(rec["k"], dtype=float),
        "nodes": np.array([c["node"] for c in rec["contacts"]], dtype=int),
        "phi": np.array([c["phi"] for c in rec["contacts"]], dtype=float),
        "normals": np.array([c["normal"] for c in rec["contacts"]], dtype=float).reshape(-1, 3),
    }
    mus = [c["mu"] for c in rec["contacts"]]
    bs = [c["b"] for c in rec["contacts"]]
    out["mu"] = None if (not mus or mus[0] is None) else np.asarray(mus, dtype=float)
    out["b"] = None if (not bs or bs[0] is None) else np.asarray(bs, dtype=float)
    out["tip"] = bool(out["nodes"].size and out["nodes"][-1] == out["n"])
    return out


def _cmd_audit(args) -> int:
    manifest_path = args.manifest or os.path.join(os.path.dirname(args.frames), "manifest.json")
    manifest = read_manifest(manifest_path)
    config = config_from_dict(manifest["config"])
    records = [_load_frame_arrays(rec) for rec in read_jsonl(args.frames)]
    if not records:
        print("audit: no frames")
        return 1
    bad: list[str] = []
    for idx, fr in enumerate(records):
        expect_n = round(fr["t"] / config.dt)
        if fr["n"] != expect_n or fr["s"].size != fr["n"] + 1:
            bad.append(f"frame {idx}: grown-node count disagrees with t={fr['t']}")
        bad.extend(
            f"frame {idx}: {msg}"
            for msg in audit_arrays(
                fr["s"],
                fr["gamma"],
                fr["k"],
                config.dt,
                scene=config.scene,
                eps_penetration=config.eps_penetration,
            )
        )
    for prev, nxt in zip(records, records[1:]):
        if nxt["n"] - prev["n"] != 1 or prev["mu"] is None or not prev["nodes"].size:
            continue
        rates = step_normal_rates(
            prev["gamma"], nxt["gamma"], prev["nodes"], prev["normals"], prev["tip"], config.dt
        )
        target = config.kappa * np.maximum(0.0, -prev["phi"]) / config.dt
        active = prev["mu"] > 0.0
        if np.any(active):
            resid = float(np.max(np.abs(rates[active] - target[active])))
            speed = float(np.max(np.abs(rates[active])))
            if resid > args.rate_tol * (1.0 + speed):
                bad.append(
                    f"frame t={prev['t']:.6g}: contact normal rate residual {resid:.3e}"
                )
    events = read_jsonl(os.path.join(os.path.dirname(args.frames), "events.jsonl")) if os.path.exists(
        os.path.join(os.path.dirname(args.frames), "events.jsonl")
    ) else []
    times = [ev["t"] for ev in events]
    if any(b < a for a, b in zip(times, times[1:])):
        bad.append("events are not ordered by time")
    for msg in bad:
        print(f"audit: {msg}")
    print(f"audit: {len(records)} frames, {len(bad)} violation(s)")
    return 0 if not bad else 1


def _cmd_oracle_check(args) -> int:
    manifest_path = args.manifest or os.path.join(os.path.dirname(args.frames), "manifest.json")
    manifest = read_manifest(manifest_path)
    config = config_from_dict(manifest["config"])
    beta = config.law.beta
    ds = config.dt
    checked = skipped = degenerate = mismatched = 0
    for idx, rec in enumerate(read_jsonl(args.frames)):
        fr = _load_frame_arrays(rec)
        if fr["mu"] is None or fr["b"] is None or not fr["nodes"].size:
            continue
        if fr["nodes"].size > args.max_contacts:
            skipped += 1
            continue
        contacts = ContactSet(
            nodes=fr["nodes"],
            arclengths=fr["s"][fr["nodes"]],
            normals=fr["normals"],
            phi=fr["phi"],
            tip=fr["tip"],
        )
        system = ConstraintSystem(
            contacts=contacts,
            gamma=fr["gamma"],
            s=fr["s"],
            ds=ds,
            t=fr["t"],
            beta=beta,
            b=fr["b"],
            weights=ds * np.exp(beta * (fr["t"] - fr["s"])),
            tip_row=int(fr["nodes"].size - 1) if fr["tip"] else None,
            tip_tangent=fr["k"][fr["n"]] if fr["tip"] else None,
        )
        try:
            oracle = oracle_solve_reaction(system, max_contacts=args.max_contacts)
        except (TooManyContacts, NoCandidateFeasible) as exc:
            print(f"oracle-check: frame {idx}: {exc}")
            mismatched += 1
            continue
        stored = density_from_multipliers(system, fr["mu"])
        diff = float(np.max(np.abs(stored - oracle.omega)))
        scale = 1.0 + float(np.max(np.abs(oracle.omega)))
        checked += 1
        if oracle.degenerate:
            degenerate += 1
        elif diff > args.tol * scale:
            mismatched += 1
            print(
                f"oracle-check: frame {idx} t={fr['t']:.6g}: density differs by "
                f"{diff:.3e} (tol {args.tol * scale:.3e})"
            )
    print(
        f"oracle-check: {checked} checked, {skipped} skipped (too many contacts), "
        f"{degenerate} degenerate, {mismatched} mismatched"
    )
    return 0 if mismatched == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stemgrow",
        description="Constrained stem growth simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config or manifest")
    p_run.add_argument("config", help="scenario config JSON (or a run manifest)")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--stride", type=int, default=None, help="frame decimation")
    p_run.add_argument("--seed", type=int, default=None, help="reserved RNG seed, recorded only")

    p_twin = sub.add_parser("twin", help="run a scenario and a perturbed twin")
    p_twin.add_argument("config")
    p_twin.add_argument("--perturb", required=True, help="tilt:ANGLE[:X,Y,Z]")
    p_twin.add_argument("--out", required=True)
    p_twin.add_argument("--stride", type=int, default=None)

    p_audit = sub.add_parser("audit", help="recheck invariants of a frames file")
    p_audit.add_argument("frames")
    p_audit.add_argument("--manifest", default=None)
    p_audit.add_argument("--rate-tol", type=float, default=1e-6)

    p_oc = sub.add_parser("oracle-check", help="re-solve stored reactions with the enumeration oracle")
    p_oc.add_argument("frames")
    p_oc.add_argument("--manifest", default=None)
    p_oc.add_argument("--max-contacts", type=int, default=12)
    p_oc.add_argument("--tol", type=float, default=1e-8)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, ["stemgrow"] + argv)
        if args.command == "twin":
            return _cmd_twin(args, ["stemgrow"] + argv)
        if args.command == "audit":
            return _cmd_audit(args)
        return _cmd_oracle_check(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES["IntegrityFailure"]


if __name__ == "__main__":
    sys.exit(main())
