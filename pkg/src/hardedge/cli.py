"""Command line front end: ``hardedge sample | kernel | transition | freeconv | verify``.

Every command writes a JSON manifest next to its outputs. Passing that
manifest back through ``--config`` re-runs the command with the same
resolved parameters.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from . import ensembles as ens
from . import freeconv as fc
from . import kernels as kn
from .errors import ConditioningError, ConfigurationError, UnsupportedConfiguration

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONDITIONING = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# small parsers


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma separated list of numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise UsageError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _grid(text: str) -> np.ndarray:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must look like start:stop:count, got {text!r}")
    a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    if k < 1:
        raise UsageError("grid count must be >= 1")
    return np.linspace(a, b, k)


def eps_tag(eps: float) -> str:
    """File-name tag for an epsilon value, e.g. ``0.5 -> 0p5``."""
    return repr(float(eps)).rstrip("0").rstrip(".").replace(".", "p").replace("-", "m") or "0"


def threads() -> int:
    env = os.environ.get("RMT_THREADS")
    cpu = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpu))
        except ValueError as exc:
            raise UsageError(f"RMT_THREADS must be an integer, got {env!r}") from exc
    return cpu


# ---------------------------------------------------------------------------
# sample


def _variant(a) -> ens.Variant:
    name = a.ensemble
    if name == "gue":
        return ens.GUE(a.n)
    if name == "wishart":
        return ens.Wishart(a.n, int(a.alpha))
    if name == "ginibre":
        return ens.GinibreProduct(a.n, tuple(_ints(a.nu)), a.normalization, a.scale)
    if name == "truncated":
        if a.ell is None:
            raise UsageError("--ell is required for the truncated ensemble")
        return ens.TruncatedUnitaryProduct(a.n, tuple(_ints(a.nu)), tuple(_ints(a.ell)))
    if name == "mb":
        return ens.MuttalibBorodinMatrix(a.n, int(a.theta), int(a.alpha), a.rows)
    raise UsageError(f"unknown ensemble {name!r}")


def cmd_sample(a) -> tuple[int, dict]:
    base = _variant(a)
    outdir = Path(a.out)
    outdir.mkdir(parents=True, exist_ok=True)
    files, ranges = [], {}
    for eps in _floats(a.eps):
        v = base if eps == 0 else ens.PerturbedSum(base, eps)
        spec = ens.EnsembleSpec(v, a.seed)
        with ThreadPoolExecutor(max_workers=threads()) as pool:
            spectra = list(pool.map(lambda d: ens.sample_spectrum(spec, d).eigenvalues,
                                    range(a.draws)))
        if a.range:
            lo, hi = _floats(a.range.replace(":", ","))
        else:
            allv = np.concatenate(spectra)
            pad = 0.01 * (allv.max() - allv.min() or 1.0)
            lo, hi = float(allv.min() - pad), float(allv.max() + pad)
        hist = ens.Histogram.empty(a.bins, lo, hi)
        for s in spectra:
            hist.add(s)
            hist.total += 1
        path = outdir / f"{a.ensemble}_mat{a.n}_e{eps_tag(eps)}.plot"
        path.write_text(hist.to_plot())
        files.append(str(path))
        ranges[eps_tag(eps)] = {"range": [lo, hi], "underflow": hist.underflow,
                                "overflow": hist.overflow}
        print(f"wrote {path}")
    return EXIT_OK, {"outputs": files, "histograms": ranges}


# ---------------------------------------------------------------------------
# kernel


def _kernel_object(a):
    name = a.name
    if name == "bessel":
        return kn.BesselKernel(a.alpha)
    if name == "airy":
        return kn.AiryContourKernel() if a.form == "contour" else kn.AiryKernel()
    if name == "ginibre":
        return kn.GinibreKernel(nu=tuple(_ints(a.nu)))
    if name == "truncated":
        return kn.TruncatedUnitaryKernel(nu=tuple(_ints(a.nu)), mu=tuple(_floats(a.mu or "")))
    if name == "mb":
        if a.form == "series":
            placement, _ = kn.mb_series_placement(a.alpha, a.theta)
            return kn.MBSeriesKernel(a.alpha, a.theta, placement)
        return kn.MBContourKernel(a.alpha, a.theta, a.delta)
    if name == "lue":
        return kn.ScaledKernel(base=kn.LUEFiniteKernel(n=a.n, alpha=a.alpha), lam=4.0 * a.n**2)
    if name == "ginibre-finite":
        return kn.GinibreFiniteKernel(n=a.n, nu=tuple(_ints(a.nu)), hard_edge=True)
    raise UsageError(f"unknown kernel {name!r}")


def _kernel_grid(a, xs, ys):
    if a.name == "airy" and a.form == "both":
        cd, _ = kn.AiryKernel().matrix(xs, ys)
        ct, _ = kn.AiryContourKernel().matrix(xs, ys)
        return cd, np.abs(cd - ct)
    k = _kernel_object(a)
    if a.sigma and a.sigma > 0:
        spec = kn.PerturbedKernelSpec(base=k, sigma=a.sigma)
        vals = np.empty((len(xs), len(ys)), dtype=complex)
        errs = np.empty((len(xs), len(ys)))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                vals[i, j], errs[i, j] = kn.perturb_kernel(spec, x, y, return_error=True)
        return vals, errs
    vals, err = k.matrix(xs, ys)
    return vals, np.broadcast_to(np.asarray(err, dtype=float), vals.shape)


def cmd_kernel(a) -> tuple[int, dict]:
    xs = _grid(a.grid)
    ys = _grid(a.ygrid) if a.ygrid else xs
    vals, errs = _kernel_grid(a, xs, ys)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "re", "im", "err"])
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            if a.diagonal and i != j:
                continue
            v = complex(vals[i, j])
            w.writerow([repr(float(x)), repr(float(y)), repr(v.real), repr(v.imag),
                        repr(float(errs[i, j]))])
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(buf.getvalue())
    print(f"wrote {out}")
    return EXIT_OK, {"outputs": [str(out)]}


# ---------------------------------------------------------------------------
# transition


def _transition_rows(a):
    rows = []
    ns = _ints(a.ns)
    u = a.point
    if a.ensemble == "wishart":
        law, s = fc.mp_from_k(1)
        law = law.scaled(s)
        for sched in a.schedule.split(","):
            for n in ns:
                lam = 4.0 * n * n
                kern = kn.LUEFiniteKernel(n=n, alpha=0.0)
                try:
                    if sched == "sub":
                        eps = float(n) ** -2
                        got = np.real(kn.perturb_finite_kernel(n, kern, eps, u / lam, u / lam)) / lam
                        ref = float(kn.bessel_kernel(0.0, u, u).real)
                    elif sched == "critical":
                        eps = 1.0 / (4.0 * n**1.5)
                        got = np.real(kn.perturb_finite_kernel(n, kern, eps, u / lam, u / lam)) / lam
                        ref = float(np.real(kn.perturb_kernel(
                            kn.PerturbedKernelSpec(base=kn.BesselKernel(0.0), sigma=1.0), u, u)))
                    elif sched == "super":
                        eps = float(n) ** -0.25
                        e = fc.solve_edges(law, eps)
                        sc = e.airy_scale * n ** (2.0 / 3.0)
                        pt = e.a_left - u / sc
                        got = np.real(kn.perturb_finite_kernel(n, kern, eps, pt, pt)) / sc
                        ref = float(kn.airy_kernel_cd(u, u))
                    else:
                        raise UsageError(f"unknown schedule {sched!r}")
                    rows.append((sched, n, eps, float(got), ref, abs(got - ref) / abs(ref), ""))
                except ConditioningError as exc:
                    rows.append((sched, n, math.nan, math.nan, math.nan, math.nan, str(exc)))
    elif a.ensemble == "ginibre":
        nu = tuple(_ints(a.nu))
        m = len(nu) - 1
        for sched in a.schedule.split(","):
            if sched == "super":
                rows.append((sched, 0, math.nan, math.nan, math.nan, math.nan,
                             "no soft-edge law available for Ginibre products"))
                continue
            for n in ns:
                base = kn.GinibreFiniteKernel(n=n, nu=nu, hard_edge=True)
                # in hard-edge coordinates sigma = eps sqrt(n)^-1 n^(m+1)
                if sched == "sub":
                    eps = float(n) ** -(m + 1.0)
                    ref = float(kn.ginibre_limit_kernel(nu, u, u).real)
                elif sched == "critical":
                    eps = float(n) ** -(m + 0.5)
                    ref = float(np.real(kn.perturb_kernel(
                        kn.PerturbedKernelSpec(base=kn.GinibreKernel(nu=nu), sigma=1.0), u, u)))
                else:
                    raise UsageError(f"unknown schedule {sched!r}")
                sigma = eps / math.sqrt(n) * n ** (m + 1.0)
                try:
                    got = float(np.real(kn.perturb_kernel(
                        kn.PerturbedKernelSpec(base=base, sigma=sigma), u, u)))
                    rows.append((sched, n, eps, got, ref, abs(got - ref) / abs(ref), ""))
                except ConditioningError as exc:
                    rows.append((sched, n, eps, math.nan, ref, math.nan, str(exc)))
    else:
        raise UsageError("transition supports --ensemble wishart or ginibre")
    return rows


def cmd_transition(a) -> tuple[int, dict]:
    rows = _transition_rows(a)
    header = ("schedule", "n", "eps", "value", "limit", "rel_err", "note")
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join([r[0], str(r[1])] + [repr(float(v)) for v in r[2:6]] + [r[6]]))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    outputs = []
    if a.out:
        Path(a.out).write_text(text)
        outputs.append(a.out)
    return EXIT_OK, {"outputs": outputs,
                     "rows": [dict(zip(header, r)) for r in rows]}


# ---------------------------------------------------------------------------
# freeconv


def cmd_freeconv(a) -> tuple[int, dict]:
    law, s = fc.mp_from_k(a.k)
    law = law.scaled(s)
    conv = fc.FreeConvolution(law, a.eps)
    e = conv.edges
    info = e.as_dict()
    info["a_over_eps43"] = e.a_left / a.eps ** (4.0 / 3.0)
    print(json.dumps(info, indent=2))
    outdir = Path(a.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []
    if a.points > 0:
        xs = np.linspace(e.a_left, e.b_right, a.points)
        rho = np.zeros_like(xs)
        rho[1:-1] = conv.density(xs[1:-1])
        path = outdir / f"freeconv_k{a.k}_e{eps_tag(a.eps)}.plot"
        path.write_text("".join(f"{float(x)!r} {float(r)!r}\n" for x, r in zip(xs, rho)))
        outputs.append(str(path))
        print(f"wrote {path}")
    if a.acp:
        p = fc.acp_heat_flow(fc.laguerre_acp(a.acp, 0.0), a.acp, a.eps) if a.k == 1 else None
        if p is None:
            raise UsageError("--acp is available for --k 1 (Wishart) only")
        roots = fc.real_roots(p)
        ks = fc.ks_distance(fc.EmpiricalMeasure(roots), conv.cdf)
        info["acp_n"] = a.acp
        info["ks"] = ks
        print(f"KS distance of {a.acp} ACP zeros: {ks!r}")
    return EXIT_OK, {"outputs": outputs, "edges": info}


# ---------------------------------------------------------------------------
# verify


def cmd_verify(a) -> tuple[int, dict]:
    only = None
    if a.only:
        only = [t for chunk in a.only for t in chunk.split(",") if t]
        bad = [t for t in only if t not in acceptance.CRITERIA]
        if bad:
            raise UsageError(f"unknown criterion {bad[0]!r}; choose from "
                             f"{', '.join(acceptance.CRITERIA)}")
    results = acceptance.run_all(only, seed=a.seed, echo=print)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    table = {r.name: {"passed": r.passed, "summary": r.summary, "seconds": r.seconds}
             for r in results}
    return (EXIT_FAIL if failed else EXIT_OK), {"outputs": [], "criteria": table}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardedge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with flag values (or a manifest)")
        sp.add_argument("--manifest", help="manifest path (default: next to outputs)")
        sp.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)

    s = sub.add_parser("sample", help="eigenvalue histograms")
    common(s)
    s.add_argument("--ensemble", choices=["gue", "wishart", "ginibre", "truncated", "mb"],
                   default="wishart")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--alpha", type=int, default=0)
    s.add_argument("--nu", default="0,0")
    s.add_argument("--ell")
    s.add_argument("--theta", type=int, default=1)
    s.add_argument("--rows", type=int)
    s.add_argument("--normalization", choices=["standard", "wishart"], default="standard")
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--eps", default="0")
    s.add_argument("--bins", type=int, default=200)
    s.add_argument("--draws", type=int, default=1)
    s.add_argument("--range", help="lo:hi (default: data range plus 1%%)")
    s.add_argument("--out", default="out")

    k = sub.add_parser("kernel", help="kernel values on a grid (CSV)")
    common(k)
    k.add_argument("--name", required=True,
                   choices=["bessel", "airy", "ginibre", "truncated", "mb", "lue",
                            "ginibre-finite"])
    k.add_argument("--alpha", type=float, default=0.0)
    k.add_argument("--nu", default="0,0,0")
    k.add_argument("--mu", default="")
    k.add_argument("--theta", type=float, default=2.0)
    k.add_argument("--delta", type=float, default=0.4)
    k.add_argument("--n", type=int, default=50)
    k.add_argument("--form", choices=["cd", "contour", "both", "series"], default="cd")
    k.add_argument("--sigma", type=float, default=0.0)
    k.add_argument("--grid", default="0.5:4:8")
    k.add_argument("--ygrid")
    k.add_argument("--diagonal", action="store_true")
    k.add_argument("--out", default="out/kernel.csv")

    t = sub.add_parser("transition", help="sub/critical/super-critical comparison table")
    common(t)
    t.add_argument("--ensemble", choices=["wishart", "ginibre"], default="wishart")
    t.add_argument("--nu", default="0,0,0")
    t.add_argument("--schedule", default="sub,critical,super")
    t.add_argument("--ns", default="50,100,200")
    t.add_argument("--point", type=float, default=1.0)
    t.add_argument("--out")

    f = sub.add_parser("freeconv", help="edges and density of mu boxplus semicircle")
    common(f)
    f.add_argument("--k", type=int, default=1)
    f.add_argument("--eps", type=float, required=True)
    f.add_argument("--points", type=int, default=201)
    f.add_argument("--acp", type=int, default=0)
    f.add_argument("--out", default="out")

    v = sub.add_parser("verify", help="run the acceptance suite")
    common(v)
    v.add_argument("--only", action="append")
    v.set_defaults(seed=None)
    return p


_COMMANDS = {"sample": cmd_sample, "kernel": cmd_kernel, "transition": cmd_transition,
             "freeconv": cmd_freeconv, "verify": cmd_verify}


def _apply_config(argv, args):
    """Fill values from ``--config`` for flags that were not given explicitly."""
    if not args.config:
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if "parameters" in data:  # a manifest
        data = data["parameters"]
    # flags typed on the command line win over the file
    explicit = set()
    for tok in argv:
        if tok.startswith("--"):
            explicit.add(tok[2:].split("=")[0].replace("-", "_"))
    for key, val in data.items():
        key = key.replace("-", "_")
        if key in ("command", "config", "manifest") or key in explicit:
            continue
        if not hasattr(args, key):
            raise UsageError(f"config key {key!r} is not a flag of {args.command}")
        setattr(args, key, val)
    return args


def _manifest_path(args, result) -> Path:
    if args.manifest:
        return Path(args.manifest)
    out = getattr(args, "out", None)
    if args.command == "kernel" and out:
        return Path(out).with_suffix(".manifest.json")
    if out and args.command in ("sample", "freeconv"):
        return Path(out) / f"{args.command}.manifest.json"
    return Path(f"{args.command}.manifest.json")


_VALUE_FLAGS = ("--grid", "--ygrid", "--range", "--eps")


def _glue_negative_values(argv):
    # "--grid -3:3:5" would otherwise be read as an unknown flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        args = _apply_config(argv, args)
        code, result = _COMMANDS[args.command](args)
    except (UsageError, ConfigurationError, UnsupportedConfiguration, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConditioningError as exc:
        print(f"conditioning failure: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    params = {k: v for k, v in vars(args).items() if k not in ("config", "manifest")}
    manifest = {
        "command_line": ["hardedge"] + argv,
        "parameters": params,
        "seed": args.seed,
        "version": __version__,
        "outputs": result.pop("outputs", []),
        "wall_clock_seconds": time.perf_counter() - t0,
        "result": result,
    }
    path = _manifest_path(args, result)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    return code


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
