"""Command line entry point.

    spirallike spiralcheck --builtin hartogs --samples 1000 --horizon 20
    spirallike refute --matrix "diag(i, 1)"
    spirallike linearize --builtin hartogs
    spirallike loewner-verify --builtin hartogs
    spirallike conditions --matrix "diag(-2, -3)" --alpha 2
    spirallike report --out run1

Every command writes report.json (plus data/*.csv and plots/*.svg where it
makes sense) into --out. Exit status: 0 pass, 2 finding (a violation, a
refutation certificate, a failed identity), 1 error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import tempfile

import numpy as np

from . import cxlinalg, domains, fields, linearize, loewner, refuter
from .errors import ConfigError, SpiralError
from .svg import Plot

SCHEMA = "spiral-report/1"
EXIT_PASS, EXIT_ERROR, EXIT_FINDING = 0, 1, 2

COMMANDS = ("spiralcheck", "refute", "linearize", "loewner-verify", "conditions", "report")


# ---------------------------------------------------------------------------
# input parsing


def _load_json_arg(text: str):
    """A path to a JSON file, or inline JSON."""
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as fh:
            return json.load(fh)
    return json.loads(text)


_COMPLEX_RE = re.compile(r"^[\s0-9eE.+\-ij()]+$")


def _parse_scalar(tok) -> complex:
    if isinstance(tok, (list, tuple)) and len(tok) == 2 and all(isinstance(v, (int, float)) for v in tok):
        return complex(tok[0], tok[1])
    if isinstance(tok, (int, float)):
        return complex(tok)
    if isinstance(tok, str):
        s = tok.strip().replace(" ", "").replace("i", "j")
        if not s or not _COMPLEX_RE.match(s):
            raise ConfigError(f"cannot read {tok!r} as a complex number")
        if s in ("j", "+j", "-j"):
            s = s.replace("j", "1j")
        s = re.sub(r"(?<![0-9.eE])j", "1j", s)
        try:
            return complex(s)
        except ValueError:
            raise ConfigError(f"cannot read {tok!r} as a complex number") from None
    raise ConfigError(f"cannot read {tok!r} as a complex number")


def parse_matrix(text: str) -> np.ndarray:
    """diag(a, b, ...), a JSON file, or inline JSON.

    JSON may be nested row lists whose entries are numbers, strings such as
    "1-2i", or [re, im] pairs, or the {"n", "entries"} object form.
    """
    s = text.strip()
    m = re.fullmatch(r"diag\((.*)\)", s)
    if m:
        parts = [p for p in m.group(1).split(",") if p.strip()]
        if not parts:
            raise ConfigError("diag() needs at least one entry")
        return np.diag([_parse_scalar(p) for p in parts])
    try:
        obj = _load_json_arg(s)
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"cannot parse matrix {text!r}: {exc}") from None
    if isinstance(obj, dict):
        return cxlinalg.cmat_from_json(obj)
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigError("matrix must be a list of rows")
    rows = [[_parse_scalar(v) for v in row] for row in obj]
    return cxlinalg.as_cmat(np.array(rows, dtype=complex))


def _parse_spec(text: str):
    """A builtin name, a JSON file path, or inline JSON."""
    s = text.strip()
    if s.startswith("{") or s.startswith("[") or os.path.isfile(s):
        try:
            return _load_json_arg(s)
        except (json.JSONDecodeError, OSError) as exc:
            raise ConfigError(f"cannot parse {text!r}: {exc}") from None
    return s


def _field_domain(args, default_pair: str | None = "hartogs"):
    if args.builtin:
        if args.field or args.domain:
            raise ConfigError("--builtin names a (domain, field) pair; do not combine it with --field/--domain")
        dom, fld = domains.builtin_pair(args.builtin)
        return dom, fld, args.builtin
    if args.field or args.domain:
        if not (args.field and args.domain):
            raise ConfigError("--field and --domain must be given together")
        fld = fields.field_from_json(_parse_spec(args.field))
        dom = domains.domain_from_json(_parse_spec(args.domain))
        if fld.n != dom.n:
            raise ConfigError(f"field lives on C^{fld.n} but domain on C^{dom.n}")
        return dom, fld, None
    if default_pair is None:
        raise ConfigError("give --builtin or --field with --domain")
    dom, fld = domains.builtin_pair(default_pair)
    return dom, fld, default_pair


# ---------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _atomic_write(path: str, text: str):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Run:
    def __init__(self, args, command: str):
        self.out = args.out
        self.command = command
        self.config = {
            k: getattr(args, k)
            for k in ("builtin", "field", "domain", "matrix", "alpha", "samples", "horizon", "tol", "seed")
            if getattr(args, k) is not None
        }
        self.files = []

    def write(self, rel: str, text: str):
        _atomic_write(os.path.join(self.out, rel), text)
        self.files.append(rel)

    def finish(self, status: str, result: dict) -> int:
        report = {
            "schema": SCHEMA,
            "command": self.command,
            "config": self.config,
            "status": status,
            "files": sorted(self.files),
            "result": result,
        }
        _atomic_write(os.path.join(self.out, "report.json"), json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n")
        print(f"{self.command}: {status} (report: {os.path.join(self.out, 'report.json')})")
        return EXIT_PASS if status == "pass" else EXIT_FINDING


def _slice_plot(title: str, dom, curves, marks=()) -> str:
    """Trajectories in the (Re z1, |z2|) slice, with the Hartogs boundary if relevant."""
    p = Plot(title=title, xlabel="Re z1", ylabel="|z2|")
    xs = [float(v) for c in curves for v in np.asarray(c)[:, 0].real]
    if dom.spec and dom.spec.get("builtin") == "hartogs" and xs:
        lo, hi = min(min(xs), -3.0), max(max(xs), 3.0)
        grid = np.linspace(lo, min(hi, 3.0), 200)
        p.line(grid, np.exp(-grid / 2), label="|z2| = exp(-Re z1 / 2)", color="#000000", dashed=True)
    for k, c in enumerate(curves):
        c = np.asarray(c)
        p.line(c[:, 0].real, np.abs(c[:, 1]), label="trajectory" if k == 0 else None, color="#1f77b4")
    for label, pt, color in marks:
        p.points([pt[0].real], [abs(pt[1])], label=label, color=color, radius=4)
    return p.render()


# ---------------------------------------------------------------------------
# commands


def cmd_spiralcheck(args) -> int:
    dom, fld, pair = _field_domain(args)
    run = _Run(args, "spiralcheck")
    samples = 1000 if args.samples is None else args.samples
    horizon = 20.0 if args.horizon is None else args.horizon
    tol = 1e-10 if args.tol is None else args.tol
    rep = domains.spirallike_verify(dom, fld, n_samples=samples, horizon=horizon, tol=tol, seed=args.seed)
    run.write("data/violations.csv", rep.violations_csv())
    if fld.n >= 2:
        starts = dom.sample(8, args.seed)
        times = np.linspace(0.0, min(horizon, 10.0), 201)
        trajs = [fields.trajectory(fld, times, z, tol=tol) for z in starts]
        run.write("data/trajectories.csv", "".join(f"# start {k}\n" + t.to_csv() for k, t in enumerate(trajs)))
        marks = [("violation", v[2], "#d62728") for v in rep.violations[:20]]
        run.write("plots/trajectories.svg", _slice_plot(f"{fld.name} on {dom.name}", dom, [t.points for t in trajs], marks))
    print(f"domain {dom.name}, field {fld.name}: {len(rep.violations)} violations over {rep.n_samples} starts, min margin {rep.min_margin:.4g}")
    result = rep.to_json()
    result["pair"] = pair
    return run.finish("pass" if rep.verified else "finding", result)


def cmd_refute(args) -> int:
    run = _Run(args, "refute")
    budget = 32 if args.samples is None else args.samples
    if args.matrix:
        A = parse_matrix(args.matrix)
        cert = refuter.refute_any(A, budget=budget, seed=args.seed)
        dom = domains.hartogs(2)
    else:
        dom, fld, _ = _field_domain(args, default_pair=None)
        cert = refuter.numeric_exit_search(fld, dom, budget=budget, seed=args.seed)
        if cert is None:
            print(f"no exit found for {fld.name} on {dom.name} with {budget} starts")
            return run.finish("pass", {"certificate": None, "budget": budget})
    for line in cert.trace:
        print(line)
    if cert.matrix is not None:
        times = np.linspace(0.0, cert.t_exit, 201)
        path = np.array([cxlinalg.mat_exp(cert.matrix, float(t)) @ cert.start for t in times])
        rows = ["t,re_w1,im_w1,re_w2,im_w2"] + [
            f"{t!r},{w[0].real!r},{w[0].imag!r},{w[1].real!r},{w[1].imag!r}" for t, w in zip(times.tolist(), path)
        ]
        run.write("data/exit_path.csv", "\n".join(rows) + "\n")
        marks = [("start", cert.start, "#2ca02c"), ("exit", path[-1], "#d62728")]
        run.write("plots/exit.svg", _slice_plot(f"exit certificate ({cert.case_label})", dom, [path], marks))
    return run.finish("finding", {"certificate": cert.to_json()})


def cmd_linearize(args) -> int:
    dom, fld, pair = _field_domain(args)
    run = _Run(args, "linearize")
    tol = 1e-10 if args.tol is None else args.tol
    samples = 64 if args.samples is None else args.samples
    compact = dom.sample(samples, args.seed)
    res = linearize.limit_map(fld, dom, compact=compact, tol=tol, alpha=args.alpha, seed=args.seed)
    inj = linearize.injectivity_scan(res.F_eval, compact)
    run.write("data/cauchy_log.csv", "t,sup_difference\n" + "".join(f"{t!r},{d!r}\n" for t, d in res.cauchy_log))
    ts = [t for t, _ in res.cauchy_log]
    ds = [d for _, d in res.cauchy_log]
    p = Plot(title=f"Cauchy differences for {fld.name}", xlabel="T", ylabel="sup |f_(T+1) - f_T|", logy=True)
    p.line(ts, ds, label="observed")
    if ds and ds[0] > 0:
        p.line(ts, [ds[0] * math.exp(-res.C_theoretical * t) for t in ts], label="rate exp(-C T)", dashed=True)
    run.write("plots/cauchy.svg", p.render())
    ok = res.DF0_defect <= 1e-6 and res.rate_ok()
    print(f"horizon T={res.horizon:g}, |DF(0) - I|={res.DF0_defect:.3g}, tail ratio {res.tail_ratio:.4g} (bound {res.tail_ratio_bound():.4g})")
    result = res.to_json()
    result["injectivity"] = inj.to_json()
    result["pair"] = pair
    return run.finish("pass" if ok else "finding", result)


def cmd_loewner(args) -> int:
    dom, fld, pair = _field_domain(args)
    run = _Run(args, "loewner-verify")
    tol = 1e-12 if args.tol is None else args.tol
    samples = 10 if args.samples is None else args.samples
    horizon = 3.0 if args.horizon is None else args.horizon
    rng = np.random.default_rng(args.seed)
    g = rng.normal(size=(samples, 2 * fld.n))
    K = (g[:, : fld.n] + 1j * g[:, fld.n :]) * (rng.uniform(size=samples) ** (1 / (2 * fld.n)) / np.linalg.norm(g, axis=1))[:, None]
    lin = linearize.limit_map(fld, dom, compact=dom.sample(32, args.seed), tol=tol, alpha=args.alpha, seed=args.seed)
    chain = loewner.chain_from_spirallike(fld, lin)
    H = loewner.autonomous(fld)
    ts = np.linspace(0.0, horizon, 7)
    pde_rows = []
    for t in ts:
        for k, z in enumerate(K):
            pde_rows.append((float(t), k, loewner.pde_residual(chain, H, float(t), z)))
    grid = [(float(s), float(t)) for t in ts[1:] for s in ts if s < t]
    fun = loewner.chain_functional_check(chain, H, grid, K, tol=tol)
    run.write("data/pde_residual.csv", "t,point,residual\n" + "".join(f"{t!r},{k},{r!r}\n" for t, k, r in pde_rows))
    run.write("data/functional.csv", fun.to_csv())
    p = Plot(title=f"Loewner PDE residual ({fld.name})", xlabel="t", ylabel="max residual", logy=True)
    p.line(ts, [max(r for t2, _, r in pde_rows if t2 == t) for t in ts.tolist()], label="pde residual")
    run.write("plots/pde_residual.svg", p.render())
    pde_max = max(r for _, _, r in pde_rows)
    ok = pde_max <= 1e-5 and fun.passed
    print(f"max PDE residual {pde_max:.3g}, max functional defect {fun.max_defect:.3g}")
    return run.finish("pass" if ok else "finding", {"pde_max": pde_max, "functional": fun.to_json(), "horizon": lin.horizon, "pair": pair})


def cmd_conditions(args) -> int:
    if not args.matrix:
        raise ConfigError("conditions needs --matrix")
    run = _Run(args, "conditions")
    A = parse_matrix(args.matrix)
    rep = cxlinalg.condition_checks(A, alpha=args.alpha)
    for name, c in rep["checks"].items():
        print(f"{name}: {'pass' if c['pass'] else 'fail'} (margin {c['margin']:.6g})")
    # each check is a sufficient hypothesis of a different statement, so one
    # passing check is enough for the matrix to qualify
    rep["any_pass"] = any(c["pass"] for c in rep["checks"].values())
    return run.finish("pass" if rep["any_pass"] else "finding", rep)


def cmd_report(args) -> int:
    path = os.path.join(args.out, "report.json")
    if not os.path.isfile(path):
        raise ConfigError(f"no report at {path}")
    with open(path, encoding="utf-8") as fh:
        rep = json.load(fh)
    if rep.get("schema") != SCHEMA:
        raise ConfigError(f"{path} has schema {rep.get('schema')!r}, expected {SCHEMA!r}")
    print(f"command: {rep['command']}")
    print(f"status:  {rep['status']}")
    for k, v in sorted(rep.get("config", {}).items()):
        print(f"  {k} = {v}")
    for f in rep.get("files", []):
        print(f"  file: {f}")
    return EXIT_PASS if rep["status"] == "pass" else EXIT_FINDING


HANDLERS = {
    "spiralcheck": cmd_spiralcheck,
    "refute": cmd_refute,
    "linearize": cmd_linearize,
    "loewner-verify": cmd_loewner,
    "conditions": cmd_conditions,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spirallike", description="Numerical checks for spirallike domains in C^n.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "spiralcheck": "sample a domain and check that forward trajectories stay inside",
        "refute": "find a point and time at which a linear flow leaves the Hartogs domain",
        "linearize": "compute the linearizing limit map and certify its convergence",
        "loewner-verify": "check the Loewner PDE and functional equation for the induced chain",
        "conditions": "evaluate the spectral hypotheses for a matrix",
        "report": "summarize an existing report directory",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--builtin", help=f"builtin (domain, field) pair: {', '.join(domains.PAIR_NAMES)}")
        p.add_argument("--field", help="field: builtin name, JSON file or inline JSON")
        p.add_argument("--domain", help="domain: builtin name, JSON file or inline JSON")
        p.add_argument("--matrix", help='matrix: "diag(i, 1)", JSON file or inline JSON rows')
        p.add_argument("--alpha", type=float, help="decay rate alpha")
        p.add_argument("--samples", type=int, help="number of sample points (search starts for refute)")
        p.add_argument("--horizon", type=float, help="time horizon")
        p.add_argument("--tol", type=float, help="integration / convergence tolerance")
        p.add_argument("--seed", type=int, default=0, help="PRNG seed (default 0)")
        p.add_argument("--out", default="spirallike-out", help="output directory (default spirallike-out)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.samples is not None and args.samples < 1:
        print("error: --samples must be positive", file=sys.stderr)
        return EXIT_ERROR
    if args.horizon is not None and not args.horizon > 0:
        print("error: --horizon must be positive", file=sys.stderr)
        return EXIT_ERROR
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        return HANDLERS[args.command](args)
    except (SpiralError, ValueError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
