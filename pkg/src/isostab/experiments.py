"""Perturbation families, deficit/distance records and report serialization.

No absolute stability constant is assumed.  Each instance records the
non-stability inequality verdicts, the normalized deficit against the
extremal body on common random numbers, and aligned distances; the report
summary adds monotonicity verdicts and log-log slope fits over the grid.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bodies import SymmetricBody, cut_corner_cube, make_standard, polar, z_bodies
from .errors import ValidationError
from .gauss import (ExactConstants, ell_cube_exact, ell_paired, width_cross_exact, width_cube_exact,
                    width_paired)
from .isotropy import (Infeasible, IsotropicMeasure, OrthonormalFrame, cross_measure,
                       john_weights_from_contacts, perturbed_cross, random_isotropic, verify_isotropy)
from .metrics import align_over_On

FAMILIES = ("cut_corner_cube", "perturbed_cross", "random_isotropic")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    family: str
    grid: list
    samples: int = 1_000_000
    seed: int = 0
    sigma: float = 3.0
    draws: int = 1
    align_budget: int = 120
    workers: int = 1
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 2 <= int(self.n) <= 6:
            raise ValidationError("n must lie in 2..6")
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}")
        if not isinstance(self.grid, (list, tuple)):
            raise ValidationError("grid must be a list")
        if self.samples < 1000:
            raise ValidationError("samples must be at least 1000")
        if self.sigma <= 0 or self.draws < 1 or self.workers < 1 or self.align_budget < 1:
            raise ValidationError("sigma, draws, workers and align_budget must be positive")
        for p in self.grid:
            if self.family == "cut_corner_cube" and not 0 < p < 0.5:
                raise ValidationError(f"eps={p} outside (0, 1/2)")
            if self.family == "perturbed_cross" and not 0 < p < math.pi / 4:
                raise ValidationError(f"alpha={p} outside (0, pi/4)")
            if self.family == "random_isotropic" and (int(p) != p or p < self.n):
                raise ValidationError(f"atom count {p} must be an integer >= n")
        unknown = set(self.outputs) - {"json", "csv", "plotdata"}
        if unknown:
            raise ValidationError(f"unknown output kinds {sorted(unknown)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


# -- per-instance evaluation ----------------------------------------------------------

# Record columns in CSV order; the type tag drives the CSV reader.
COLUMNS = [
    ("id", "str"), ("family", "str"), ("side", "str"), ("n", "int"), ("param", "float"),
    ("draw", "int"), ("hypothesis_ok", "bool"),
    ("ell", "float"), ("ell_se", "float"), ("ell_extremal", "float"), ("ell_diff", "float"),
    ("ell_diff_se", "float"),
    ("width", "float"), ("width_se", "float"), ("width_extremal", "float"), ("width_diff", "float"),
    ("width_diff_se", "float"),
    ("deficit_ell", "float"), ("deficit_ell_se", "float"),
    ("deficit_width", "float"), ("deficit_width_se", "float"),
    ("delta_h", "float"), ("delta_vol", "float"), ("delta_w", "float"),
    ("verdict_ell", "bool"), ("verdict_width", "bool"), ("strict_ell", "bool"), ("strict_width", "bool"),
    ("ratio_ell_h", "float"), ("ratio_ell_h4n", "float"), ("ratio_ell_vol4", "float"),
    ("ratio_width_h", "float"),
    ("error", "str"),
]
COLUMN_NAMES = [c for c, _ in COLUMNS]


def _ratio(num, den):
    if num is None or den is None or den <= 0:
        return None
    return float(num / den)


def _side_record(cfg: ExperimentConfig, side: str, body: SymmetricBody, extremal: SymmetricBody,
                 lower_side: bool, streams: str, hypothesis: bool) -> dict:
    """Deficits of ``body`` against ``extremal``.

    ``lower_side`` means the extremal body maximizes ``ell`` and minimizes
    ``W`` (crosspolytope); otherwise it minimizes ``ell`` and maximizes ``W`` (cube).
    """
    n = cfg.n
    (_, e_k), (_, d1) = ell_paired([extremal, body], cfg.samples, cfg.seed, stream=f"{streams}/ell")
    (_, w_k), (_, width_d) = width_paired([extremal, body], cfg.samples, cfg.seed, stream=f"{streams}/width")
    ell_d = d1
    if lower_side:
        ell_ext, w_ext = ExactConstants.for_dim(n).ell_cross, width_cross_exact(n)
        dell = -ell_d.value / ell_ext
        dw = width_d.value / w_ext
    else:
        ell_ext, w_ext = ell_cube_exact(n), width_cube_exact(n)
        dell = ell_d.value / ell_ext
        dw = -width_d.value / w_ext
    dell_se = ell_d.std_error / ell_ext
    dw_se = width_d.std_error / w_ext
    k = cfg.sigma
    return {
        "side": side, "hypothesis_ok": bool(hypothesis),
        "ell": e_k.value, "ell_se": e_k.std_error, "ell_extremal": ell_ext,
        "ell_diff": ell_d.value, "ell_diff_se": ell_d.std_error,
        "width": w_k.value, "width_se": w_k.std_error, "width_extremal": w_ext,
        "width_diff": width_d.value, "width_diff_se": width_d.std_error,
        "deficit_ell": dell, "deficit_ell_se": dell_se,
        "deficit_width": dw, "deficit_width_se": dw_se,
        "verdict_ell": bool(dell >= -k * dell_se), "verdict_width": bool(dw >= -k * dw_se),
        "strict_ell": bool(dell > k * dell_se), "strict_width": bool(dw > k * dw_se),
    }


def _body_distances(cfg, body, extremal, seed) -> tuple[float, float]:
    h = align_over_On("hausdorff_bodies", body, extremal, budget=cfg.align_budget, seed=seed)
    v = align_over_On("vol_diff", body, extremal, budget=cfg.align_budget, seed=seed,
                      extra_starts=[h.rotation])
    return h.distance, v.distance


def _finish(cfg: ExperimentConfig, rec: dict) -> dict:
    n = cfg.n
    dell, dw = rec.get("deficit_ell"), rec.get("deficit_width")
    dh, dv = rec.get("delta_h"), rec.get("delta_vol")
    rec["ratio_ell_h"] = _ratio(dell, dh)
    rec["ratio_ell_h4n"] = _ratio(dell, dh ** (4 * n) if dh else None)
    rec["ratio_ell_vol4"] = _ratio(dell, dv ** 4 if dv else None)
    rec["ratio_width_h"] = _ratio(dw, dh)
    return {name: rec.get(name) for name in COLUMN_NAMES}


def _cut_corner(cfg: ExperimentConfig, eps: float) -> list[dict]:
    n = cfg.n
    k = cut_corner_cube(n, eps)
    cube, cross = make_standard("cube", n), make_standard("cross", n)
    contacts = np.eye(n)
    feasible = not isinstance(john_weights_from_contacts(contacts, n), Infeasible)
    out = []
    john_hyp = feasible and k.inradius >= 1 - 1e-12
    rec = _side_record(cfg, "john", k, cube, False, "cut_corner/john", john_hyp)
    rec["delta_h"], rec["delta_vol"] = _body_distances(cfg, k, cube, cfg.seed)
    out.append(rec)
    kp = polar(k)
    lowner_hyp = feasible and kp.circumradius <= 1 + 1e-12
    rec = _side_record(cfg, "lowner", kp, cross, True, "cut_corner/lowner", lowner_hyp)
    rec["delta_h"], rec["delta_vol"] = _body_distances(cfg, kp, cross, cfg.seed)
    out.append(rec)
    return out


def _measure_records(cfg: ExperimentConfig, m: IsotropicMeasure, streams: str, seed: int) -> list[dict]:
    n = cfg.n
    nu = cross_measure(OrthonormalFrame.standard(n))
    hyp = verify_isotropy(m).ok
    z, z_star = z_bodies(m)
    dh = align_over_On("hausdorff_points", m.support(), nu.support(), budget=cfg.align_budget, seed=seed)
    dw = align_over_On("wasserstein", m, nu, budget=cfg.align_budget, seed=seed, extra_starts=[dh.rotation])
    out = []
    for side, body, ext, lower in (("z", z, make_standard("cross", n), True),
                                   ("z_star", z_star, make_standard("cube", n), False)):
        rec = _side_record(cfg, side, body, ext, lower, f"{streams}/{side}", hyp)
        rec["delta_h"], rec["delta_w"] = dh.distance, dw.distance
        out.append(rec)
    return out


def _instances(cfg: ExperimentConfig) -> list[tuple[str, float, int]]:
    out = []
    for i, p in enumerate(cfg.grid):
        for d in range(cfg.draws if cfg.family == "random_isotropic" else 1):
            out.append((f"{cfg.family}/{i:03d}/{d:03d}", float(p), d))
    return out


def _run_instance(cfg: ExperimentConfig, inst) -> list[dict]:
    iid, p, d = inst
    base = {"id": iid, "family": cfg.family, "n": cfg.n, "param": p, "draw": d}
    try:
        if cfg.family == "cut_corner_cube":
            recs = _cut_corner(cfg, p)
        elif cfg.family == "perturbed_cross":
            recs = _measure_records(cfg, perturbed_cross(cfg.n, p), "perturbed_cross", cfg.seed)
        else:
            seed = cfg.seed * 1_000_003 + int(p) * 1009 + d
            m = random_isotropic(cfg.n, int(p), seed)
            recs = _measure_records(cfg, m, f"random_isotropic/{iid}", cfg.seed)
    except Exception as exc:  # recorded per instance, the run continues
        return [_finish(cfg, {**base, "side": "error", "error": f"{type(exc).__name__}: {exc}"})]
    return [_finish(cfg, {**base, **r}) for r in recs]


# -- report -------------------------------------------------------------------

@dataclass
class StabilityReport:
    config: dict
    records: list[dict]
    summary: dict
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.summary.get("ok", False))

    def body(self) -> dict:
        """Everything except the metadata block (the reproducible part)."""
        return {"config": self.config, "records": self.records, "summary": self.summary}

    def to_json(self, with_metadata: bool = True) -> str:
        doc = self.body()
        if with_metadata:
            doc["metadata"] = self.metadata
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False)


def _slope(x, y) -> float | None:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _summarize(cfg: ExperimentConfig, records: list[dict]) -> dict:
    errors = [r["id"] for r in records if r["error"]]
    good = [r for r in records if not r["error"]]
    sides = sorted({r["side"] for r in good})
    per_side = {}
    ok = not errors
    for side in sides:
        rs = sorted((r for r in good if r["side"] == side), key=lambda r: (r["param"], r["draw"]))
        s = {
            "instances": len(rs),
            "violations_ell": sum(not r["verdict_ell"] for r in rs),
            "violations_width": sum(not r["verdict_width"] for r in rs),
            "strict_ell": sum(r["strict_ell"] for r in rs),
            "strict_width": sum(r["strict_width"] for r in rs),
            "slope_ell_vs_h": _slope([r["delta_h"] for r in rs], [r["deficit_ell"] for r in rs]),
            "slope_width_vs_h": _slope([r["delta_h"] for r in rs], [r["deficit_width"] for r in rs]),
        }
        if cfg.family != "random_isotropic":
            s["slope_ell_vs_vol"] = _slope([r["delta_vol"] for r in rs], [r["deficit_ell"] for r in rs])
            d = [r["deficit_ell"] for r in rs]
            s["monotone_ell"] = bool(all(b > a for a, b in zip(d, d[1:])))
            s["all_strict_ell"] = s["strict_ell"] == len(rs)
        if cfg.family == "perturbed_cross":
            s["slope_ell_vs_w"] = _slope([r["delta_w"] for r in rs], [r["deficit_ell"] for r in rs])
        if cfg.family == "cut_corner_cube":
            sl = s["slope_ell_vs_h"]
            s["slope_in_range"] = sl is not None and 0.8 <= sl <= cfg.n + 1
        verdicts = [s["violations_ell"] == 0, s["violations_width"] == 0]
        verdicts += [s[key] for key in ("monotone_ell", "all_strict_ell", "slope_in_range") if key in s]
        s["ok"] = bool(all(verdicts))
        ok = ok and s["ok"]
        per_side[side] = s
    return {"sides": per_side, "errors": errors, "ok": bool(ok)}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> StabilityReport:
    start = time.time()
    workers = cfg.workers if workers is None else workers
    insts = _instances(cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda i: _run_instance(cfg, i), insts))
    else:
        chunks = [_run_instance(cfg, i) for i in insts]
    records = sorted((r for c in chunks for r in c), key=lambda r: (r["id"], r["side"]))
    summary = _summarize(cfg, records)
    meta = {"version": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "workers": workers, "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(start)),
            "elapsed_s": round(time.time() - start, 3)}
    return StabilityReport(cfg.to_dict(), records, summary, meta)


# -- emitters -----------------------------------------------------------------

def _csv_cell(value, kind: str) -> str:
    if value is None:
        return ""
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    return str(value)


def _csv_parse(text: str, kind: str):
    if text == "":
        return None
    if kind == "bool":
        return text == "true"
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text)
    return text


def write_csv(records: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMN_NAMES)
        for r in records:
            w.writerow([_csv_cell(r.get(c), k) for c, k in COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != COLUMN_NAMES:
        raise ValidationError(f"{path}: unexpected CSV header")
    kinds = dict(COLUMNS)
    return [{c: _csv_parse(v, kinds[c]) for c, v in zip(COLUMN_NAMES, row)} for row in rows[1:]]


PLOT_SERIES = ["deficit_ell", "deficit_width", "delta_h", "delta_vol", "delta_w",
               "ratio_ell_h", "ratio_ell_h4n", "ratio_ell_vol4"]


def write_plotdata(records: list[dict], stem) -> list[Path]:
    """One whitespace-separated file per side: ``x`` then the plotted series."""
    stem = Path(stem)
    paths = []
    for side in sorted({r["side"] for r in records if not r["error"]}):
        rs = sorted((r for r in records if r["side"] == side and not r["error"]),
                    key=lambda r: (r["param"], r["draw"]))
        p = stem.with_name(f"{stem.name}.{side}.dat")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write("# x " + " ".join(PLOT_SERIES) + "\n")
            for r in rs:
                vals = ["nan" if r[c] is None else repr(float(r[c])) for c in PLOT_SERIES]
                fh.write(repr(float(r["param"])) + " " + " ".join(vals) + "\n")
        paths.append(p)
    return paths


def report_emit(r: StabilityReport, fmt: str, path) -> list[Path]:
    try:
        if fmt == "json":
            Path(path).write_text(r.to_json() + "\n", encoding="utf-8")
            return [Path(path)]
        if fmt == "csv":
            write_csv(r.records, path)
            return [Path(path)]
        if fmt == "plotdata":
            return write_plotdata(r.records, path)
    except OSError as exc:
        raise OSError(f"cannot write report to {os.fspath(path)}: {exc}") from exc
    raise ValidationError(f"unknown report format {fmt!r}")


def load_report(path) -> StabilityReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return StabilityReport(doc["config"], doc["records"], doc["summary"], doc.get("metadata", {}))
