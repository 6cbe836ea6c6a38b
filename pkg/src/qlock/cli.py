"""Command-line entry point: keygen, verify, prep-sweep, analyze, spectrum.

Exit codes: 0 success or accept, 1 reject, 2 usage or input error.  Every
artifact embeds the tool version, the resolved configuration and the seed,
and carries no timestamp, so a rerun with the same inputs is byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from qlock import __version__
from qlock import rng as rngmod
from qlock.dark import PairSplitting, is_dark
from qlock.hamiltonian import ModelParams, Propagator, build_hamiltonian
from qlock.prep import sweep
from qlock.protocol import (
    MODES,
    DetectorModel,
    LockInstance,
    ProtocolConfig,
    forge_lock,
    password_file_order,
    verify,
)
from qlock.security import ADVERSARIES, CSV_COLUMNS, analyze, detector_grid
from qlock.state import Space

log = logging.getLogger("qlock")
STATE_MAX_ATOMS = 16


class InputError(Exception):
    """Bad file or argument; maps to exit code 2."""


def _dump(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")


def _meta(command: str, seed: int | None, config: dict) -> dict:
    return {"tool": "qlock", "version": __version__, "command": command, "seed": seed, "config": config}


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}")


def _params(path: str | None, n_atoms: int | None) -> ModelParams:
    if path:
        data = _read_json(path)
        try:
            params = ModelParams.from_json(data.get("params", data))
        except (KeyError, TypeError) as exc:
            raise InputError(f"{path} is not a params file: missing {exc}")
        if n_atoms is not None and params.n_atoms != n_atoms:
            raise InputError(f"{path} describes {params.n_atoms} atoms, expected {n_atoms}")
        return params
    if n_atoms is None:
        raise InputError("give --n or --params")
    return ModelParams.default(n_atoms)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = rngmod.fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _floats(text: str) -> list[float]:
    """Comma list ``a,b,c`` or linspace ``start:stop:num``."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            if int(num) < 1:
                raise InputError(f"empty range {text!r}")
            return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot read numbers from {text!r}")
    if not values:
        raise InputError(f"empty range {text!r}")
    return values


def _detector(args) -> DetectorModel:
    return DetectorModel(args.eta1, args.eta2, args.p_loss, args.epsilon)


# ---------------------------------------------------------------- commands


def cmd_keygen(args) -> int:
    seed = _seed(args)
    params = _params(args.params, args.n)
    n = params.n_atoms
    if n < 2 or n % 2:
        raise InputError(f"need an even number of atoms >= 2, got {n}")
    params.check_rwa()
    key, lock = forge_lock(n, params, seed, certify=False)
    out = Path(args.out)
    meta = _meta("keygen", seed, {"n_atoms": n, "params": params.to_json()})
    _dump(out / "key.json", {**key.to_json(), "meta": meta})
    _dump(out / "lock.json", {"key": key.to_json(), "main": params.to_json(), "control": params.to_json(), "meta": meta})
    if n <= STATE_MAX_ATOMS:
        state = lock.state
        check = is_dark(state, params.couplings())
        if not check.dark:
            raise RuntimeError(f"lock state not dark (residual {check.residual:.2e})")
        _dump(out / "state.json", {**state.to_json(), "dark_residual": check.residual, "meta": meta})
    else:
        log.info("state vector not written for %d atoms", n)
    print(f"key with {len(key.pairs)} pairs written to {out}")
    return 0


def _load_lock(path: str) -> LockInstance:
    data = _read_json(path)
    try:
        key = PairSplitting.from_json(data["key"])
        main = ModelParams.from_json(data["main"])
        control = ModelParams.from_json(data.get("control", data["main"]))
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path} is not a lock file: missing {exc}")
    return LockInstance(key, main, control)


def cmd_verify(args) -> int:
    seed = _seed(args)
    lock = _load_lock(args.lock)
    pw_data = _read_json(args.password)
    try:
        password = PairSplitting.from_json(pw_data)
        order = password_file_order(pw_data)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.password} is not a password file: missing {exc}")
    if password.n_atoms != lock.n_atoms or not password.complete:
        raise InputError(f"password must pair all {lock.n_atoms} atoms of the lock")
    det = _detector(args)
    config = ProtocolConfig(early_exit=not args.run_to_completion)
    result = verify(lock, password, det, args.mode, seed, config, order)
    transcript = result.to_json()
    transcript["meta"] = _meta(
        "verify",
        seed,
        {"lock": lock.key.n_atoms, "detector": det.to_json(), "protocol": config.to_json(), "mode": args.mode},
    )
    _dump(Path(args.out) / "transcript.json", transcript)
    if result.accepted:
        print("accept")
        return 0
    pair = result.events[result.rejecting_pair].pair
    print(f"reject at pair {result.rejecting_pair} {list(pair)}")
    return 1


def cmd_prep_sweep(args) -> int:
    seed = _seed(args)
    params = _params(args.params, 2)
    params.check_rwa()
    ds, dg = _floats(args.ds), _floats(args.dg)
    if args.samples < 1:
        raise InputError("--samples must be positive")
    rows = sweep(params, ds, dg, args.t_max, args.samples, seed, args.threads)
    meta = _meta("prep-sweep", seed, {"params": params.to_json(), "ds": ds, "dg": dg, "t_max": args.t_max, "samples": args.samples})
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta) + "\n")
    writer = csv.DictWriter(buf, fieldnames=["ds", "dg", "T_max", "yield", "stderr", "n_samples", "seed"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "prep_sweep.csv").write_text(buf.getvalue())
    print(f"{len(rows)} rows written to {out / 'prep_sweep.csv'}")
    return 0


def cmd_analyze(args) -> int:
    seed = _seed(args)
    if args.key:
        n = PairSplitting.from_json(_read_json(args.key)).n_atoms
    elif args.n is not None:
        n = args.n
    else:
        raise InputError("give --n or --key")
    if n < 2 or n % 2:
        raise InputError(f"need an even number of atoms >= 2, got {n}")
    if args.trials < 1:
        raise InputError("--trials must be positive")
    adversary = args.adversary
    if n == 2 and adversary != "random-guess":
        raise InputError("with two atoms the only wrong-password adversary is random-guess")
    grid = detector_grid(_floats(args.eta1), _floats(args.eta2), _floats(args.p_loss), _floats(args.epsilon))
    params = _params(args.params, n) if args.params else None
    report = analyze(n, grid, args.trials, seed, adversary, args.mode, args.threads, params=params)
    data = report.to_json()
    data["meta"] = _meta(
        "analyze",
        seed,
        {
            "n_atoms": n,
            "eta1": args.eta1,
            "eta2": args.eta2,
            "p_loss": args.p_loss,
            "epsilon": args.epsilon,
            "trials": args.trials,
            "adversary": adversary,
            "mode": args.mode,
        },
    )
    out = Path(args.out)
    _dump(out / "report.json", data)
    buf = io.StringIO()
    buf.write("# " + json.dumps(data["meta"]) + "\n")
    writer = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    writer.writerows(report.rows)
    (out / "grid.csv").write_text(buf.getvalue())
    print(f"matchings: {data['matchings_count']}  guess probability: {data['guess_probability']:.4g}")
    print(f"meets 1e-8 target: {str(data['meets_target']).lower()}")
    for row in report.rows:
        print(f"eta1={row['eta1']} eta2={row['eta2']} p_loss={row['p_loss']} eps={row['epsilon']}: far={row['far']:.4g} frr={row['frr']:.4g}")
    return 0


def cmd_spectrum(args) -> int:
    params = _params(args.params, args.n)
    params.check_rwa()
    if not 0 <= args.sector <= params.n_atoms + args.cutoff:
        raise InputError(f"sector {args.sector} unreachable with cutoff {args.cutoff}")
    space = Space(params.n_atoms, args.cutoff, args.sector)
    energies = Propagator(build_hamiltonian(params, space)).energies
    data = {
        "sector": args.sector,
        "dimension": space.dim,
        "eigenvalues": [float(e) for e in energies],
        "meta": _meta("spectrum", None, {"params": params.to_json(), "cutoff": args.cutoff, "sector": args.sector}),
    }
    for e in energies:
        print(f"{e:.12g}")
    if args.out:
        _dump(Path(args.out) / "spectrum.json", data)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlock", description="Dark-state quantum lock simulator")
    parser.add_argument("--version", action="version", version=f"qlock {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out=True, threads=False):
        if seed:
            p.add_argument("--seed", type=int, default=None, help="master seed (random if omitted, then printed)")
        if out:
            p.add_argument("--out", default=".", help="output directory")
        if threads:
            p.add_argument("--threads", type=int, default=1)
        p.add_argument("--params", default=None, help="ModelParams JSON file")

    p = sub.add_parser("keygen", help="forge a lock with a random key")
    p.add_argument("n", type=int, nargs="?", default=None, help="number of atoms (even)")
    common(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("verify", help="try a password against a lock")
    p.add_argument("--lock", required=True)
    p.add_argument("--password", required=True)
    p.add_argument("--mode", choices=MODES, default="abstract")
    p.add_argument("--eta1", type=float, default=1.0)
    p.add_argument("--eta2", type=float, default=1.0)
    p.add_argument("--p-loss", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--run-to-completion", action="store_true", help="process all pairs even after a failure")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prep-sweep", help="singlet yield over a Stark-shift grid")
    p.add_argument("--ds", required=True, help="comma list or start:stop:num")
    p.add_argument("--dg", default="0", help="comma list or start:stop:num")
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--samples", type=int, default=20000)
    common(p, threads=True)
    p.set_defaults(func=cmd_prep_sweep)

    p = sub.add_parser("analyze", help="key-space numbers and FAR/FRR over a detector grid")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--key", default=None, help="key JSON (sets the atom count)")
    p.add_argument("--eta1", default="1")
    p.add_argument("--eta2", default="1")
    p.add_argument("--p-loss", default="0")
    p.add_argument("--epsilon", default="0")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--adversary", choices=ADVERSARIES, default="random-password")
    p.add_argument("--mode", choices=MODES, default="abstract")
    common(p, threads=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("spectrum", help="eigenvalues of one excitation sector")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--sector", type=int, default=1)
    p.add_argument("--cutoff", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--params", default=None)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    warnings.showwarning = lambda message, category, *rest: log.warning("%s: %s", category.__name__, message)
    try:
        return args.func(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
