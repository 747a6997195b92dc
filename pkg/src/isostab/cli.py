"""Command-line entry point.

Exit codes: 0 when every verdict passes, 1 on any violation, 2 on usage or
input-validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bodies import SymmetricBody
from .errors import IsostabError
from .experiments import ExperimentConfig, report_emit, run_experiment
from .gauss import ell_mc, gaussian_measure, mean_width_mc
from .isotropy import IsotropicMeasure, sparsify, verify_isotropy
from .lemmas import lemma_property_suite
from .metrics import (align_over_On, hausdorff_bodies, hausdorff_points, vol_diff,
                      wasserstein_sphere)
from .transport import bl_verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _measure(path: str) -> IsotropicMeasure:
    doc = _load_json(path)
    if not isinstance(doc, dict) or "atoms" not in doc:
        raise UsageError(f"{path}: not a measure document")
    return IsotropicMeasure.from_dict(doc)


def _body(path: str) -> SymmetricBody:
    doc = _load_json(path)
    if not isinstance(doc, dict) or "generators" not in doc:
        raise UsageError(f"{path}: not a body document")
    return SymmetricBody.from_dict(doc)


def _is_measure(path: str) -> bool:
    doc = _load_json(path)
    return isinstance(doc, dict) and "atoms" in doc


def cmd_verify_isotropy(args) -> int:
    m = _measure(args.file)
    chk = verify_isotropy(m, args.tol)
    _dump({"residual": chk.residual, "ok": bool(chk.ok), "mass_gap": chk.mass_gap,
           "max_weight": chk.max_weight, "atoms": m.size, "dim": m.dim})
    return EXIT_OK if chk.ok else EXIT_FAIL


def cmd_sparsify(args) -> int:
    m = _measure(args.file)
    out = sparsify(m)
    chk = verify_isotropy(out, 1e-8)
    ok = chk.ok and out.size <= m.dim * (m.dim + 1) // 2
    doc = out.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _dump({"measure": doc, "residual": chk.residual, "atoms_in": m.size, "atoms_out": out.size})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_estimate(args) -> int:
    b = _body(args.file)
    if args.kind == "ell":
        est = ell_mc(b, args.samples, args.seed, workers=args.workers)
    elif args.kind == "width":
        est = mean_width_mc(b, args.samples, args.seed, workers=args.workers)
    else:
        est = gaussian_measure(b, args.t, args.samples, args.seed, workers=args.workers)
    _dump(est.to_dict())
    return EXIT_OK


def cmd_distance(args) -> int:
    kind = args.kind
    out: dict = {"kind": kind}
    if kind in ("w", "wo"):
        mu, nu = _measure(args.a), _measure(args.b)
        if kind == "w":
            out["distance"] = wasserstein_sphere(mu, nu)
        else:
            res = align_over_On("wasserstein", mu, nu, budget=args.budget, seed=args.seed)
            out.update(distance=res.distance, certificate=res.certificate,
                       rotation=res.rotation.tolist(), evaluations=res.evaluations)
    elif kind in ("h", "ho") and _is_measure(args.a):
        x, y = _measure(args.a).support(), _measure(args.b).support()
        if kind == "h":
            out["distance"] = hausdorff_points(x, y)
        else:
            res = align_over_On("hausdorff_points", x, y, budget=args.budget, seed=args.seed)
            out.update(distance=res.distance, certificate=res.certificate,
                       rotation=res.rotation.tolist(), evaluations=res.evaluations)
    else:
        p, q = _body(args.a), _body(args.b)
        if kind == "h":
            out["distance"] = hausdorff_bodies(p, q).value
        elif kind == "ho":
            res = align_over_On("hausdorff_bodies", p, q, budget=args.budget, seed=args.seed)
            out.update(distance=res.distance, certificate=res.certificate,
                       rotation=res.rotation.tolist(), evaluations=res.evaluations)
        else:
            v = vol_diff(p, q, args.samples, args.seed)
            out.update(distance=v.value, std_error=v.std_error, method=v.method)
    _dump(out)
    return EXIT_OK


def cmd_bl_verify(args) -> int:
    m = _measure(args.file)
    res = bl_verify(m, args.b, args.method, args.samples, args.seed, workers=args.workers)
    _dump(res.to_dict())
    return EXIT_OK if res.ok else EXIT_FAIL


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    report = run_experiment(cfg, workers=args.workers)
    for fmt, path in sorted(cfg.outputs.items()):
        report_emit(report, fmt, path)
    doc = report.body()
    doc["metadata"] = report.metadata
    _dump(doc)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_lemmas(args) -> int:
    if args.trials < 100:
        raise UsageError("--trials must be at least 100")
    rep = lemma_property_suite(args.seed, args.trials, metric_trials=args.metric_trials)
    _dump(rep)
    return EXIT_OK if rep["ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isostab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify-isotropy", help="check sum c_i u_i u_i^T = Id")
    s.add_argument("file")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_verify_isotropy)

    s = sub.add_parser("sparsify", help="reduce support to at most n(n+1)/2 atoms")
    s.add_argument("file")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sparsify)

    s = sub.add_parser("estimate", help="Monte-Carlo l-norm, mean width or Gaussian measure")
    s.add_argument("kind", choices=["ell", "width", "gauss"])
    s.add_argument("file")
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--t", type=float, default=1.0, help="scale for the Gaussian measure")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("distance", help="distance between two bodies or two measures")
    s.add_argument("kind", choices=["h", "ho", "vol", "w", "wo"])
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--budget", type=int, default=400)
    s.add_argument("--samples", type=int, default=200_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("bl-verify", help="Gaussian measure of b Z*(mu) against the cube")
    s.add_argument("file")
    s.add_argument("--b", type=float, required=True)
    s.add_argument("--method", choices=["mc", "theta_quadrature"], default="mc")
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_bl_verify)

    s = sub.add_parser("experiment", help="run a perturbation family from a JSON config")
    s.add_argument("config")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("lemmas", help="randomized lemma property suite")
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--metric-trials", type=int, default=100)
    s.set_defaults(func=cmd_lemmas)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, IsostabError, ValueError, OSError) as exc:
        sys.stderr.write(f"isostab: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
