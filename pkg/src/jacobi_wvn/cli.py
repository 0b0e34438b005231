"""Command-line front end.

Every subcommand reads a JSON config (``--config``), writes JSON/CSV artifacts
into ``--out`` and prints the main JSON document.  Exit codes: 0 success,
1 failed verification, 2 validation, 3 domain, 4 numerical, 5 degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import pipelines, suites
from . import simulate as sim
from .bands import find_bands, invert_theta, theta_table
from .core import PeriodicOperator, classify
from .errors import DomainError, JacobiError, ValidationError
from .potential import WvnPotential
from .resonance import closed_form_E_oracle, plan_resonance

log = logging.getLogger("jacobi_wvn")


# output ---------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, complex):
        return _encode({"re": obj.real, "im": obj.imag}, indent)
    if obj is None:
        return "null"
    if hasattr(obj, "value") and isinstance(obj.value, str):  # enums
        return json.dumps(obj.value)
    return json.dumps(str(obj))


def dumps(doc: dict) -> str:
    """JSON with 17 significant digits for every float."""
    return _encode(doc) + "\n"


def write_json(path: Path, doc: dict, timestamp: bool = True) -> dict:
    if timestamp:
        doc = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), **doc}
    path.write_text(dumps(doc))
    return doc


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


# config ---------------------------------------------------------------------

def bundled_configs() -> list:
    return sorted(p.name for p in resources.files("jacobi_wvn.configs").iterdir()
                  if p.name.endswith(".json"))


def load_config(path: str | None) -> dict:
    """Read a JSON config from a path or a bundled config name."""
    if path is None:
        return {}
    p = Path(path)
    if p.is_file():
        text = p.read_text()
        where = str(p)
    else:
        name = path if path.endswith(".json") else path + ".json"
        res = resources.files("jacobi_wvn.configs").joinpath(name)
        if not res.is_file():
            raise ValidationError(f"config {path!r}: no such file or bundled config")
        text = res.read_text()
        where = f"bundled:{name}"
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{where}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{where}: top level must be an object")
    return cfg


def _get(cfg, key, default=None, kind=None):
    v = cfg.get(key, default)
    if kind is not None and v is not None:
        try:
            v = kind(v)
        except (TypeError, ValueError):
            raise ValidationError(f"{key}: expected {kind.__name__}, got {v!r}") from None
    return v


def _operator(cfg) -> PeriodicOperator:
    if "operator" not in cfg:
        raise ValidationError("operator: missing")
    return PeriodicOperator.from_dict(cfg["operator"])


def _lambda(cfg, key="lambda") -> float:
    if key not in cfg:
        raise ValidationError(f"{key}: missing")
    return _get(cfg, key, kind=float)


# commands -------------------------------------------------------------------

def cmd_bands(cfg, args, out: Path) -> dict:
    op = _operator(cfg)
    bc = cfg.get("bands", {})
    bands = find_bands(op, grid=_get(bc, "grid", 4096, int))
    n = _get(bc, "theta_points", 201, int)
    rows = []
    for band in bands:
        lam, th = theta_table(op, band, n=n)
        rows += [(band.index, float(l), float(t)) for l, t in zip(lam, th)]
    write_csv(out / "theta_table.csv", ["band", "lambda", "theta"], rows)
    write_csv(out / "bands.csv", ["index", "lo", "hi", "direction"],
              [(b.index, b.lo, b.hi, b.theta_direction) for b in bands])
    doc = {"operator": op.to_dict(), "bands": [b.to_dict() for b in bands]}
    write_json(out / "bands.json", doc)
    return doc


def cmd_classify(cfg, args, out: Path) -> dict:
    op = _operator(cfg)
    lams = cfg.get("lambdas", [cfg["lambda"]] if "lambda" in cfg else None)
    if not lams:
        raise ValidationError("lambdas: missing")
    pts = []
    for lam in lams:
        pt = classify(op, float(lam))
        pts.append({"lambda": pt.lam, "kind": pt.kind.value, "trace": pt.trace,
                    "theta": pt.theta if pt.is_elliptic else None})
    doc = {"operator": op.to_dict(), "points": pts}
    write_json(out / "classify.json", doc)
    return doc


def _oracle_names(op):
    if op.period == 1:
        return [("T1", 1)]
    if op.period == 2 and not np.any(op.b):
        return [("T2_B", 1), ("T2_A", 2)]
    return []


def cmd_resonance(cfg, args, out: Path) -> dict:
    op = _operator(cfg)
    lam = _lambda(cfg)
    case = _get(cfg, "case", "case1", str)
    phi = _get(cfg, "phi", 0.0, float)
    k = _get(cfg, "k", None, int)
    plan = plan_resonance(op, lam, case=case, k=k, phi=phi)
    doc = {"operator": op.to_dict(), "plan": plan.to_dict()}
    if cfg.get("oracle_check"):
        names = _oracle_names(op)
        if not names:
            raise ValidationError("oracle_check: closed forms exist for T=1 and "
                                  "T=2 with zero diagonal only")
        bands = find_bands(op)
        pts = cfg.get("oracle_points", 200)
        worst = 0.0
        count = 0
        for band in bands:
            th = np.linspace(0.02, 0.98, pts // len(bands)) * math.pi
            for t in th:
                if abs(t - math.pi / 2) < 1e-6:
                    continue
                pt = classify(op, invert_theta(op, band, t))
                for name, kk in names:
                    got = plan_resonance(op, pt, k=kk, phi=phi).E_value
                    want = closed_form_E_oracle(op, pt, name, phi)
                    worst = max(worst, abs(got - want) / abs(want))
                    count += 1
        doc["oracle_check"] = {"comparisons": count, "max_rel_deviation": worst}
    sweep = cfg.get("sweep")
    if sweep:
        bands = find_bands(op)
        bi = _get(sweep, "band", 0, int)
        if not 0 <= bi < len(bands):
            raise ValidationError(f"sweep.band: index {bi} out of range 0..{len(bands) - 1}")
        band = bands[bi]
        margin = _get(sweep, "margin", 1e-3, float)
        lams = np.linspace(band.lo, band.hi, _get(sweep, "points", 101, int))
        lams = lams[(lams > band.lo + margin) & (lams < band.hi - margin)]
        rows, vanishing = [], []
        for l in lams:
            try:
                pl = plan_resonance(op, float(l), case=case, phi=phi)
            except DomainError:
                vanishing.append(float(l))
                continue
            rows.append((float(l), abs(pl.E_value), pl.exponent_per_c, pl.c_threshold))
        write_csv(out / "sweep.csv", ["lambda", "abs_E", "exponent_per_c", "c_threshold"], rows)
        doc["sweep"] = {"band": bi, "rows": len(rows), "skipped": vanishing}
    write_json(out / "plan.json", doc)
    return doc


def _potential_for(cfg, op, lam):
    if "potential" in cfg:
        return WvnPotential.from_dict(cfg["potential"]), None
    pc = cfg.get("plan")
    if pc is None:
        return WvnPotential(), None
    plan = plan_resonance(op, lam, case=_get(pc, "case", "case1", str), k=_get(pc, "k", None, int),
                          phi=_get(pc, "phi", 0.0, float))
    c = _get(pc, "c", None, float)
    if c is None:
        c = _get(pc, "c_factor", 2.0, float) * plan.c_threshold
    return WvnPotential.from_plans([plan], c), (plan, c)


def cmd_simulate(cfg, args, out: Path) -> dict:
    op = _operator(cfg)
    lam = _lambda(cfg)
    N = args.N or _get(cfg, "N", 10 ** 6, int)
    if args.quick and not args.N:
        N = min(N, 10 ** 5)
    if N < 16:
        raise ValidationError(f"N: must be >= 16, got {N}")
    stride = _get(cfg, "stride", max(1, N // 1000), int)
    mode = _get(cfg, "mode", "search", str)
    rescale = bool(cfg.get("rescale", True))
    p, planinfo = _potential_for(cfg, op, lam)
    doc = {"operator": op.to_dict(), "lambda": lam, "N": N, "mode": mode,
           "potential": p.to_dict()}
    if planinfo:
        plan, c = planinfo
        doc["plan"] = plan.to_dict()
        doc["predicted_gamma"] = plan.exponent(c)
    fw = cfg.get("fit_window")
    if fw is not None:
        fw = (int(fw[0]), int(fw[1]))
    if mode == "head":
        head = cfg.get("head", [1.0, 0.0])
        trace = sim.iterate(op, p, lam, head, N, rescale=rescale)
        elliptic = classify(op, lam).is_elliptic
        if elliptic and N >= 10 ** 5:
            bd = sim.boundedness_check(trace)
            doc["boundedness"] = bd.to_dict()
            verdict = bd.verdict
        else:
            verdict = sim.Verdict.UNDETERMINED
        lo, hi = fw or (max(1, N // 100), N - 2 * op.period)
        if hi >= 4 * lo:
            method = None if elliptic else "window"
            fit = sim.fit_decay_exponent(trace, lo, hi, method=method)
            if not elliptic:
                verdict = sim.classify_fit(fit)
            trace = trace.with_fit(fit, verdict)
        else:
            trace = trace.with_fit(None, verdict)
        traces = {"trace": trace}
    elif mode == "subordinate":
        trace = sim.subordinate_solution(op, p, lam, N)
        lo, hi = fw or (max(1, N // 100), N - 2 * op.period)
        fit = sim.fit_decay_exponent(trace, lo, hi)
        trace = trace.with_fit(fit, sim.classify_fit(fit))
        traces = {"trace": trace}
    elif mode == "search":
        sr = sim.subordination_search(op, p, lam, N, fit_window=fw)
        doc["subordination"] = sr.to_dict()
        gen = sr.trace_generic
        sub = sr.trace_sub
        if N >= 10 ** 5:
            doc["boundedness"] = {"sub": sim.boundedness_check(sub).to_dict(),
                                  "generic": sim.boundedness_check(gen).to_dict()}
        if sr.verdict is sim.Verdict.DECAYING:
            sub = sub.with_fit(sr.fit, sim.Verdict.DECAYING)
        elif "boundedness" in doc:
            sub = sub.with_fit(None, doc["boundedness"]["sub"]["verdict"])
        traces = {"trace": sub, "trace_generic": gen}
    else:
        raise ValidationError(f"mode: expected head, subordinate or search, got {mode!r}")
    main = traces["trace"]
    doc["verdict"] = main.verdict.value
    if main.fit is not None:
        doc["fit"] = main.fit.to_dict(main.verdict)
        if "predicted_gamma" in doc:
            doc["fit"]["rel_error"] = abs(main.fit.gamma - doc["predicted_gamma"]) / doc["predicted_gamma"]
    for name, tr in traces.items():
        if tr.rescaled:
            # mantissa and decimal exponent, since the values overflow doubles
            write_csv(out / f"{name}.csv", ["n", "u_n", "log10_scale"],
                      [(int(n), float(u), float(e)) for n, u, e in tr.samples(stride, split=True)])
            write_csv(out / f"{name}_norms.csv", ["N", "log10_norm"],
                      [(int(n), float(v)) for n, v in tr.window_norms(log10=True)])
        else:
            write_csv(out / f"{name}.csv", ["n", "u_n"],
                      [(int(n), float(u)) for n, u in tr.samples(stride)])
            write_csv(out / f"{name}_norms.csv", ["N", "norm"],
                      [(int(n), float(v)) for n, v in tr.window_norms()])
    fit_doc = {"verdict": main.verdict.value}
    if main.fit is not None:
        fit_doc = main.fit.to_dict(main.verdict)
    write_json(out / "fit.json", fit_doc)
    write_json(out / "simulate.json", doc)
    return doc


def cmd_embed(cfg, args, out: Path) -> dict:
    op = _operator(cfg)
    mode = _get(cfg, "mode", "single", str)
    N = args.N or _get(cfg, "N", 10 ** 5, int)
    rN = _get(cfg, "residual_N", 10 ** 4, int)
    cf = _get(cfg, "c_factor", 2.0, float)
    if mode == "single":
        res = pipelines.single_embedding(op, _lambda(cfg), c_factor=cf, N=N, residual_N=rN)
    elif mode == "pair":
        lams = cfg.get("lambdas")
        if not isinstance(lams, list) or len(lams) != 2:
            raise ValidationError("lambdas: pair mode needs a list of two targets")
        res = pipelines.pair_embedding(op, [float(x) for x in lams], c_factor=cf, N=N,
                                       residual_N=rN)
    else:
        raise ValidationError(f"mode: expected single or pair, got {mode!r}")
    doc = {"operator": op.to_dict(), "mode": mode, **res.to_dict()}
    write_json(out / "embed.json", doc)
    return doc


def cmd_verify(cfg, args, out: Path) -> dict:
    ops = [PeriodicOperator.from_dict(d) for d in cfg.get("operators", [])]
    seed = args.seed if args.seed is not None else _get(cfg, "seed", 0, int)
    results = suites.run_all(seed, quick=args.quick, operators=ops)
    doc = {"seed": seed, "quick": bool(args.quick), "suites": [r.to_dict() for r in results],
           "ok": all(r.ok for r in results)}
    write_json(out / "verify.json", doc)
    return doc


COMMANDS = {
    "bands": cmd_bands, "classify": cmd_classify, "resonance": cmd_resonance,
    "simulate": cmd_simulate, "embed": cmd_embed, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jacobi-wvn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config path or bundled config name")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--N", type=int, default=None)
        sp.add_argument("--quick", action="store_true")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = COMMANDS[args.command](cfg, args, out)
    except JacobiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(dumps(doc))
    if args.command == "verify" and not doc["ok"]:
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
