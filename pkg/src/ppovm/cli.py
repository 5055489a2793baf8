"""Command-line front end: ``ppovm <command> [--eps X] [--seed N] [--out FILE] INPUTS...``.

Exit codes: 0 success, 1 domain failure, 2 parse failure, 3 Unknown verdict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import extremality as ex
from . import io
from . import naimark as nk
from . import process as pp
from . import sampling as sm
from . import selftest
from .errors import PpovmError
from .linalg import DEFAULT_EPS
from .quantum import Povm

OK, DOMAIN, PARSE, UNKNOWN = 0, 1, 2, 3


class DomainFailure(Exception):
    pass


def _env_default(name, cast, fallback):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise io.ParseError(f"{name}={raw!r} is not a valid value")


def _emit(args, payload):
    text = io.dumps(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _guard_dims(cfg, *dims):
    big = [d for d in dims if d > cfg.max_dim]
    if big:
        raise DomainFailure(f"dimension {max(big)} exceeds max_dim={cfg.max_dim}")


def _load(path, cfg, kinds=None):
    doc, obj = io.read_object(path, kinds)
    _guard_dims(cfg, *doc.dims.values())
    return doc, obj


def _require_valid(obj, cfg, what):
    failed = [c for c in io.validate(obj, cfg.eps) if not c.ok]
    if failed:
        lines = ", ".join(f"{c.name} residual {c.residual:.3e}" for c in failed)
        raise DomainFailure(f"{what} failed validation: {lines}")


# -- commands --------------------------------------------------------------


def cmd_validate(args, cfg):
    doc, obj = _load(args.file, cfg)
    checks = io.validate(obj, cfg.eps)
    for c in checks:
        print(f"{'pass' if c.ok else 'FAIL'} {c.name} residual={c.residual:.3e} limit={c.limit:.1e}")
    return OK if all(c.ok for c in checks) else DOMAIN


def cmd_realize(args, cfg):
    _, t = _load(args.file, cfg, ("triple",))
    _require_valid(t, cfg, "triple")
    F = pp.realize(t)
    _require_valid(F, cfg, "realized tester")
    _emit(args, io.scene_from_object(F))
    return OK


def cmd_minimize(args, cfg):
    _, F = _load(args.file, cfg, ("process_povm",))
    _require_valid(F, cfg, "process POVM")
    t = pp.minimal_representation(F)
    _require_valid(t, cfg, "minimal triple")
    residual = pp.tester_distance(pp.realize(t), F)
    print(f"round trip residual {residual:.3e}", file=sys.stderr)
    if residual > max(cfg.eps, DEFAULT_EPS):
        raise DomainFailure(f"round trip residual {residual:.3e} exceeds eps")
    _emit(args, io.scene_from_object(t, {"round_trip_residual": repr(residual)}))
    return OK


def cmd_certify(args, cfg):
    _, F = _load(args.file, cfg, ("process_povm",))
    _require_valid(F, cfg, "process POVM")
    tol = max(1e-8, cfg.eps)
    cert = ex.certify_process_extremal(F, seed=cfg.seed, tol=tol)
    out = {"verdict": cert.verdict.value, "purity_dim": cert.purity_dim, "diagnostics": list(cert.diagnostics)}
    if cert.minimal is not None:
        out["minimal"] = io.scene_from_object(cert.minimal).to_json()
    if cert.witness is not None:
        w = cert.witness
        first, second = pp.realize(w.first_triple), pp.realize(w.second_triple)
        recombined = [w.weight * a + (1 - w.weight) * b for a, b in zip(first, second)]
        residual = max(float(np.abs(r - f).max()) for r, f in zip(recombined, F))
        gap = pp.tester_distance(first, second)
        if residual > tol or gap <= tol:
            raise DomainFailure(f"witness failed re-verification (residual {residual:.3e}, gap {gap:.3e})")
        out["witness"] = {
            "weight": w.weight,
            "first": io.scene_from_object(w.first_triple).to_json(),
            "second": io.scene_from_object(w.second_triple).to_json(),
            "recombination_residual": residual,
            "gap": gap,
        }
    _emit(args, out)
    if cert.verdict is ex.Verdict.UNKNOWN:
        print("verdict Unknown: " + "; ".join(cert.diagnostics), file=sys.stderr)
        return UNKNOWN
    return OK


def _povm_of(obj):
    if isinstance(obj, Povm):
        return obj
    if isinstance(obj, pp.RepresentationTriple):
        return obj.M
    raise DomainFailure(f"expected a POVM, got a {type(obj).__name__}")


def cmd_naimark(args, cfg):
    _, obj = _load(args.file, cfg, ("povm", "triple"))
    M = _povm_of(obj)
    _require_valid(M, cfg, "POVM")
    dil = nk.minimal_naimark(M)
    residuals = dil.residuals(M)
    bad = {k: v for k, v in residuals.items() if v > max(cfg.eps, DEFAULT_EPS)}
    if bad or not dil.is_minimal():
        raise DomainFailure(f"dilation failed its checks: {bad or 'not minimal'}")
    _emit(
        args,
        {
            "dilated_dim": dil.dilated_dim,
            "block_sizes": list(dil.block_sizes),
            "E": io.scene_from_object(dil.E).to_json(),
            "J": io.matrix_to_json(dil.J),
            "residuals": residuals,
        },
    )
    return OK


def cmd_commutant(args, cfg):
    _, obj = _load(args.file, cfg)
    if isinstance(obj, ex.Subalgebra):
        mats = list(obj.basis)
    elif isinstance(obj, pp.ProcessPovm):
        mats = list(obj.effects)
    elif isinstance(obj, pp.RepresentationTriple):
        mats = list(obj.M)
    elif isinstance(obj, Povm):
        mats = list(obj)
    else:
        mats = list(obj.kraus)
    basis = nk.commutant(mats)
    A = ex.Subalgebra(mats[0].shape[0], tuple(basis))
    _emit(args, io.scene_from_object(A, {"source": os.path.basename(args.file)}))
    return OK


def cmd_face_sample(args, cfg):
    _, obj = _load(args.povm, cfg, ("povm", "triple"))
    M = _povm_of(obj)
    _require_valid(M, cfg, "POVM")
    T = io.read_matrix(args.T)
    X = io.read_matrix(args.X)
    _guard_dims(cfg, *T.shape, *X.shape)
    F = nk.face_sample(T, M, X, tol=max(cfg.eps, DEFAULT_EPS))
    _require_valid(F, cfg, "face element")
    _emit(args, io.scene_from_object(F))
    return OK


def cmd_random(args, cfg):
    dK, dH, dH0 = args.dims
    if min(args.dims) < 1 or args.n < 1:
        raise DomainFailure("dimensions and n must be positive")
    _guard_dims(cfg, dK, dH, dH0)
    rng = np.random.default_rng(cfg.seed)
    kind = args.kind
    if kind == "povm":
        obj = sm.random_povm(dK * dH0, args.n, rng)
    elif kind == "pvm":
        obj = sm.random_pvm(dK * dH0, args.n, rng)
    elif kind == "channel":
        obj = sm.random_channel(dH, dK, rng)
    elif kind == "triple":
        obj = sm.random_triple(dK, dH, dH0, args.n, rng)
    else:
        obj = pp.realize(sm.random_triple(dK, dH, dH0, args.n, rng))
    meta = {"generator": kind, "seed": str(cfg.seed)}
    _emit(args, io.scene_from_object(obj, meta))
    return OK


def cmd_selftest(args, cfg):
    results = selftest.run(cfg, only=args.suite, mutate=args.mutate, repro_dir=args.repro_dir)
    passed = sum(r.ok for r in results)
    print(f"{passed}/{len(results)} suites passed")
    if args.out:
        summary = [{"suite": r.name, "passed": r.passed, "total": r.total, "ok": r.ok, "repro": r.repro or ""} for r in results]
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=1)
    return OK if passed == len(results) else DOMAIN


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, default=None, help="tolerance (env PPOVM_EPS, default 1e-9)")
    common.add_argument("--seed", type=int, default=None, help="random seed (env PPOVM_SEED, default 0)")
    common.add_argument("--out", default=None, help="write the result here instead of stdout")
    common.add_argument("--max-dim", type=int, default=8, help="refuse dimensions above this")

    parser = argparse.ArgumentParser(prog="ppovm", description="Quantum tester toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check the invariants of a document").add_argument("file")
    add("realize", cmd_realize, "triple -> process POVM").add_argument("file")
    add("minimize", cmd_minimize, "process POVM -> minimal triple").add_argument("file")
    add("certify", cmd_certify, "decide extremality of a process POVM").add_argument("file")
    add("naimark", cmd_naimark, "minimal Naimark dilation of a POVM").add_argument("file")
    add("commutant", cmd_commutant, "commutant of the matrices in a document").add_argument("file")
    p = add("face-sample", cmd_face_sample, "face element mu^-1 T^dag X^dag M X T")
    p.add_argument("povm")
    p.add_argument("T")
    p.add_argument("X")
    p = add("random", cmd_random, "seeded random document")
    p.add_argument("kind", choices=("povm", "pvm", "channel", "triple", "process_povm"))
    p.add_argument("--dims", type=int, nargs=3, metavar=("dK", "dH", "dH0"), default=(2, 2, 1))
    p.add_argument("--n", type=int, default=2)
    p = add("selftest", cmd_selftest, "run the property suites")
    p.add_argument("--suite", action="append", choices=sorted(selftest.SUITES))
    p.add_argument("--mutate", choices=selftest.MUTATIONS, help="corrupt an internal constant (harness check)")
    p.add_argument("--repro-dir", default=".")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        eps = args.eps if args.eps is not None else _env_default("PPOVM_EPS", float, 1e-9)
        seed = args.seed if args.seed is not None else _env_default("PPOVM_SEED", int, 0)
        try:
            cfg = selftest.RunConfig(eps=eps, seed=seed, max_dim=args.max_dim)
        except ValueError as exc:
            raise io.ParseError(str(exc))
        return args.func(args, cfg)
    except io.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return PARSE
    except (DomainFailure, PpovmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN


if __name__ == "__main__":
    sys.exit(main())
