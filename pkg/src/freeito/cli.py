"""Command line interface: ``freeito <command> ...``.

Exit codes: 0 success (or check passed), 1 check failed, 2 usage or input
error.  Output files are written atomically; JSON outputs embed a run
manifest and CSV outputs get a ``<file>.manifest.json`` sidecar.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .biprocess import ONE, OperatorTensor
from .cumulants import (
    CumulantSequence,
    MomentSequence,
    as_rational,
    catalog,
    cumulants_from_moments,
    moments_from_cumulants,
)
from .errors import FreeItoError, ValidationError
from .lab import (
    MatrixModelConfig,
    SimpleBiprocess,
    convergence_trend,
    spectrum,
    spectrum_ks,
    trial_rngs,
    verify_contraction,
    verify_diagonal_measure,
    verify_functional_ito,
    verify_ito_isometry,
    verify_moment_inequality,
    verify_product_formula,
    verify_trace_formula,
    Report,
)
from .scalar import (
    StepFunction,
    bdg_check,
    diagonal_cumulants,
    extrapolate_tail,
    integral_cumulants,
    moment_flow_trajectory,
    mu_norm,
    mu_norm_power,
    mu_norm_tail,
)
from .transforms import density, pde_residual, verify_functional_relation


class UsageError(Exception):
    """Bad command line or input file; exit code 2."""


# ----------------------------------------------------------------------------
# input helpers


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _bundled(name: str):
    ref = resources.files("freeito") / "data" / f"{name}.json"
    if not ref.is_file():
        return None
    return json.loads(ref.read_text())


def bundled_configs() -> list[str]:
    return sorted(p.name[:-5] for p in (resources.files("freeito") / "data").iterdir() if p.name.endswith(".json"))


def _parse_params(text: str) -> dict:
    params = {}
    for item in filter(None, text.split(",")):
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def load_base(entry: str) -> CumulantSequence:
    """A cumulant JSON file, or ``name[:key=value,...]`` from the catalog."""
    if os.path.exists(entry):
        obj = _read_json(entry)
        try:
            return CumulantSequence.from_json(obj)
        except ValidationError as exc:
            raise UsageError(f"{entry}: {exc}") from exc
    name, _, rest = entry.partition(":")
    params = _parse_params(rest)
    if "order" in params:
        params["order"] = int(params["order"])
    try:
        return catalog(name, **params)
    except ValidationError as exc:
        raise UsageError(f"--base {entry!r}: {exc}") from exc


def load_step(entry: str) -> StepFunction:
    """A step-function JSON file, or inline ``breakpoints;values`` like ``0,1,2;1,3``."""
    try:
        if os.path.exists(entry):
            return StepFunction.from_json(_read_json(entry))
        bps, _, vals = entry.partition(";")
        return StepFunction(bps.split(","), vals.split(","))
    except ValidationError as exc:
        raise UsageError(f"step function {entry!r}: {exc}") from exc


def _factor(entry, N: int):
    if entry in (None, "identity", 1, "1"):
        return ONE
    if isinstance(entry, dict):
        if "diagonal" in entry:
            d = entry["diagonal"]
            if isinstance(d, dict) and "linspace" in d:
                a, b = d["linspace"]
                return np.linspace(float(a), float(b), N)
            arr = np.asarray([complex(x) for x in d])
            if arr.shape != (N,):
                raise ValidationError(f"diagonal has {arr.size} entries, expected {N}")
            return arr
        if "matrix" in entry:
            arr = np.asarray(entry["matrix"], dtype=complex)
            if arr.shape != (N, N):
                raise ValidationError(f"matrix has shape {arr.shape}, expected ({N}, {N})")
            return arr
        if "gaussian" in entry:
            rng = np.random.default_rng(int(entry["gaussian"]))
            return rng.standard_normal((N, N)) * float(entry.get("scale", 1.0)) / np.sqrt(N)
    raise ValidationError(f"unrecognized factor {entry!r}")


def load_biprocess(obj, N: int) -> SimpleBiprocess:
    """``{"pieces": [{"interval": [a, b], "left": F, "right": F, "coeff": c}, ...]}``."""
    if not isinstance(obj, dict) or not isinstance(obj.get("pieces"), list):
        raise ValidationError("biprocess: expected {\"pieces\": [...]}")
    pieces = []
    for i, piece in enumerate(obj["pieces"]):
        try:
            a, b = piece["interval"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"biprocess.pieces[{i}]: needs an interval [a, b]") from exc
        coeff = complex(piece.get("coeff", 1))
        tensor = OperatorTensor(N, 2, [(coeff, (_factor(piece.get("left"), N), _factor(piece.get("right"), N)))])
        pieces.append((a, b, tensor))
    return SimpleBiprocess(pieces)


# ----------------------------------------------------------------------------
# output helpers


def manifest(command: str, params: dict, seed=None) -> dict:
    return {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the target directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".freeito-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dec(x) -> str:
    return f"{float(x):.12g}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit_table(args, command: str, params: dict, header, rows, payload: dict | None = None) -> None:
    """Print a CSV table; with ``--out`` also write it (plus manifest)."""
    text = _csv(rows, header)
    if args.out:
        if args.out.endswith(".json"):
            body = {"manifest": manifest(command, params), "result": payload if payload is not None else
                    [dict(zip(header, r)) for r in rows]}
            atomic_write(args.out, json.dumps(body, indent=2) + "\n")
        else:
            atomic_write(args.out + ".manifest.json", json.dumps(manifest(command, params), indent=2) + "\n")
            atomic_write(args.out, text)
    sys.stdout.write(text)


# ----------------------------------------------------------------------------
# commands


def _warn_normalization(r: CumulantSequence):
    if r[2] != 1:
        print(f"warning: r_2 = {r[2]}; the formulas do not assume unit variance", file=sys.stderr)


def cmd_moments(args) -> int:
    r = load_base(args.base)
    m = moments_from_cumulants(r, args.n)
    rows = [(k, str(m[k]), _dec(m[k])) for k in range(1, args.n + 1)]
    emit_table(args, "moments", {"base": r.to_json(), "n": args.n}, ["k", "exact", "decimal"], rows,
               {"moments": m.to_json()})
    return 0


def cmd_cumulants(args) -> int:
    if os.path.exists(args.moments):
        try:
            m = MomentSequence.from_json(_read_json(args.moments))
        except ValidationError as exc:
            raise UsageError(f"{args.moments}: {exc}") from exc
    else:
        m = MomentSequence(as_rational(v, "moment") for v in args.moments.split(","))
    n = args.n or m.order
    r = cumulants_from_moments(m, n)
    rows = [(k, str(r[k]), _dec(r[k])) for k in range(1, n + 1)]
    emit_table(args, "cumulants", {"moments": m.to_json(), "n": n}, ["k", "exact", "decimal"], rows,
               {"cumulants": r.to_json()})
    return 0


def cmd_integral_dist(args) -> int:
    r, f = load_base(args.base), load_step(args.step)
    nu = integral_cumulants(f, r, args.n)
    m = moments_from_cumulants(nu, args.n)
    rows = [(k, str(nu[k]), str(m[k]), _dec(m[k])) for k in range(1, args.n + 1)]
    emit_table(args, "integral-dist", {"base": r.to_json(), "step": f.to_json(), "n": args.n},
               ["k", "cumulant", "moment", "moment_decimal"], rows,
               {"cumulants": nu.to_json(), "moments": m.to_json()})
    return 0


def cmd_diagonal(args) -> int:
    r = load_base(args.base)
    t = as_rational(args.t, "t")
    d = diagonal_cumulants(r, args.k, t, args.n)
    rows = [(i, str(d[i]), _dec(d[i])) for i in range(1, args.n + 1)]
    emit_table(args, "diagonal", {"base": r.to_json(), "k": args.k, "t": str(t), "n": args.n},
               ["i", "cumulant", "decimal"], rows, {"cumulants": d.to_json(), "mean": str(t * r[args.k])})
    return 0


def cmd_norm(args) -> int:
    r, f = load_base(args.base), load_step(args.step)
    _warn_normalization(r)
    if args.tail:
        tail = mu_norm_tail(f, r, args.n)
        rows = [(n, _dec(v)) for n, v in tail]
        if len(tail) >= 2:
            print(f"# extrapolated limit estimate (not certified): {_dec(extrapolate_tail(tail))}", file=sys.stderr)
    else:
        rows = [(args.n, str(mu_norm_power(f, r, args.n)), _dec(mu_norm(f, r, args.n)))]
    header = ["n", "norm"] if args.tail else ["n", "norm_power_exact", "norm"]
    emit_table(args, "norm", {"base": r.to_json(), "step": f.to_json(), "n": args.n, "tail": args.tail}, header, rows)
    return 0


def cmd_moment_flow(args) -> int:
    r, f = load_base(args.base), load_step(args.step)
    t_end = float(args.t) if args.t is not None else float(f.breakpoints[-1])
    times, states = moment_flow_trajectory(f, r, args.n, t_end, args.steps)
    stride = max(1, len(times) // args.samples) if args.samples else 1
    rows = []
    for idx in list(range(0, len(times), stride)) + ([len(times) - 1] if (len(times) - 1) % stride else []):
        for n in range(1, args.n + 1):
            rows.append((_dec(times[idx]), n, _dec(states[idx, n - 1])))
    emit_table(args, "moment-flow", {"base": r.to_json(), "step": f.to_json(), "n": args.n, "t": t_end,
                                     "steps": args.steps}, ["t", "n", "moment"], rows)
    return 0


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise UsageError(f"cannot parse {text!r} as a complex number") from exc


def cmd_pde_check(args) -> int:
    r = load_base(args.base)
    zs = [_complex(z) for z in args.z]
    rows = []
    worst = 0.0
    for t in args.t:
        for z in zs:
            res = pde_residual(r, z, float(t), args.h)
            worst = max(worst, res)
            rows.append((_dec(t), f"{z.real:.12g}{z.imag:+.12g}j", f"{res:.6e}"))
    emit_table(args, "pde-check", {"base": r.to_json(), "z": args.z, "t": args.t, "h": args.h},
               ["t", "z", "residual"], rows)
    if args.threshold is not None:
        return 0 if worst < args.threshold else 1
    return 0


def cmd_density(args) -> int:
    r = load_base(args.base)
    xs = np.linspace(args.xmin, args.xmax, args.points)
    ys = density(r, xs, args.eps)
    rows = [(_dec(x), _dec(y)) for x, y in zip(xs, ys)]
    emit_table(args, "density", {"base": r.to_json(), "xmin": args.xmin, "xmax": args.xmax,
                                 "points": args.points, "eps": args.eps}, ["x", "density"], rows)
    return 0


def _config_from_args(args) -> MatrixModelConfig:
    return MatrixModelConfig(N=args.n, steps=args.steps, T=as_rational(args.T, "T"), base=load_base(args.base),
                             trials=args.trials, master_seed=args.seed, model=args.model)


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    rows = []
    for i, rng in enumerate(trial_rngs(config.master_seed, config.trials)):
        for value in np.sort(spectrum(config, rng)):
            rows.append((i, repr(float(value))))
    if args.out:
        atomic_write(args.out + ".manifest.json",
                     json.dumps(manifest("simulate", config.to_json(), config.master_seed), indent=2) + "\n")
        atomic_write(args.out, _csv(rows, ["trial", "eigenvalue"]))
    else:
        sys.stdout.write(_csv(rows, ["trial", "eigenvalue"]))
    return 0


# verify -----------------------------------------------------------------------


def _allowed(entry: dict, keys: set, check: str):
    extra = set(entry) - keys - {"check", "config", "description"}
    if extra:
        raise ValidationError(f"{check}: unknown fields {sorted(extra)}")


def _lab_config(entry) -> MatrixModelConfig:
    if "config" not in entry:
        raise ValidationError("missing field 'config'")
    return MatrixModelConfig.from_json(entry["config"])


def _check_ito_isometry(entry):
    _allowed(entry, {"v", "u"}, "ito_isometry")
    c = _lab_config(entry)
    return verify_ito_isometry(c, load_biprocess(entry["v"], c.N), load_biprocess(entry["u"], c.N))


def _check_trace_formula(entry):
    _allowed(entry, {"u"}, "trace_formula")
    c = _lab_config(entry)
    return verify_trace_formula(c, load_biprocess(entry["u"], c.N))


def _check_product_formula(entry):
    _allowed(entry, {"v", "u", "i", "j", "mode", "tol", "trend"}, "product_formula")
    c = _lab_config(entry)
    i, j, mode, tol = entry.get("i", 1), entry.get("j", 1), entry.get("mode", "trace"), entry.get("tol", 0.05)

    def run(cfg):
        return verify_product_formula(cfg, i, j, load_biprocess(entry["v"], cfg.N), load_biprocess(entry["u"], cfg.N),
                                      mode=mode, tol=tol)

    return convergence_trend(run, c, entry["trend"]) if entry.get("trend") else run(c)


def _check_functional_ito(entry):
    _allowed(entry, {"p", "u", "mode", "tol", "trend"}, "functional_ito")
    c = _lab_config(entry)
    mode, tol = entry.get("mode", "trace"), entry.get("tol", 0.05)

    def run(cfg):
        return verify_functional_ito(cfg, entry["p"], load_biprocess(entry["u"], cfg.N), mode=mode, tol=tol)

    return convergence_trend(run, c, entry["trend"]) if entry.get("trend") else run(c)


def _check_diagonal_measure(entry):
    _allowed(entry, {"k", "tol"}, "diagonal_measure")
    return verify_diagonal_measure(_lab_config(entry), entry.get("k", 2), entry.get("tol", 0.05))


def _check_moment_inequality(entry):
    _allowed(entry, {"biprocesses"}, "moment_inequality")
    c = _lab_config(entry)
    return verify_moment_inequality(c, [load_biprocess(b, c.N) for b in entry["biprocesses"]])


def _check_contraction(entry):
    _allowed(entry, {"f", "n", "rtol"}, "contraction")
    c = _lab_config(entry)
    return verify_contraction(c, StepFunction.from_json(entry["f"]), entry.get("n", 4), entry.get("rtol", 0.02))


def _check_spectrum_ks(entry):
    _allowed(entry, {"tol"}, "spectrum_ks")
    return spectrum_ks(_lab_config(entry), entry.get("tol", 0.05))


def _check_pde_residual(entry):
    _allowed(entry, {"base", "z", "t", "h", "tol"}, "pde_residual")
    r = load_base_json(entry.get("base", "semicircular"))
    h, tol = float(entry.get("h", 1e-4)), float(entry.get("tol", 1e-6))
    residuals = [pde_residual(r, _complex(z), float(t), h) for z in entry.get("z", ["2j"]) for t in entry.get("t", [1.0])]
    worst = max(residuals)
    return Report("pde_residual", {"base": r.to_json(), "h": h}, 0.0, worst, 0.0, worst < tol,
                  {"residuals": residuals, "tolerance": tol})


def _check_functional_relation(entry):
    _allowed(entry, {"base", "order"}, "functional_relation")
    r = load_base_json(entry.get("base", "semicircular"))
    order = entry.get("order", 12)
    ok = verify_functional_relation(r, order)
    return Report("functional_relation", {"base": r.to_json(), "order": order}, 0.0, 0.0, 0.0, ok, {})


def _check_bdg(entry):
    _allowed(entry, {"base", "f", "k", "n"}, "bdg")
    r = load_base_json(entry.get("base", "free_poisson"))
    lhs, rhs, ok = bdg_check(StepFunction.from_json(entry["f"]), r, entry.get("k", 2), entry.get("n", 2))
    return Report("bdg", {"base": r.to_json()}, rhs, lhs, 0.0, ok, {"slack": rhs - lhs})


def load_base_json(obj) -> CumulantSequence:
    if isinstance(obj, str):
        return load_base(obj)
    if isinstance(obj, dict) and "name" in obj:
        return catalog(obj["name"], **dict(obj.get("params", {})))
    return CumulantSequence.from_json(obj)


CHECKS = {
    "ito_isometry": _check_ito_isometry,
    "trace_formula": _check_trace_formula,
    "product_formula": _check_product_formula,
    "functional_ito": _check_functional_ito,
    "diagonal_measure": _check_diagonal_measure,
    "moment_inequality": _check_moment_inequality,
    "contraction": _check_contraction,
    "spectrum_ks": _check_spectrum_ks,
    "pde_residual": _check_pde_residual,
    "functional_relation": _check_functional_relation,
    "bdg": _check_bdg,
}


def run_check(check: str, entry: dict) -> Report:
    """Run a named check on a parsed config object."""
    if check not in CHECKS:
        raise UsageError(f"unknown check {check!r}; choose from {', '.join(sorted(CHECKS))}")
    if not isinstance(entry, dict):
        raise UsageError("config must be a JSON object")
    if "check" in entry and entry["check"] != check:
        raise UsageError(f"config is for check {entry['check']!r}, not {check!r}")
    try:
        return CHECKS[check](entry)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed config for {check}: {exc!r}") from exc
    except ValidationError as exc:
        raise UsageError(f"config for {check}: {exc}") from exc


def cmd_verify(args) -> int:
    if args.check not in CHECKS:
        raise UsageError(f"unknown check {args.check!r}; choose from {', '.join(sorted(CHECKS))}")
    source = args.config or args.check
    if os.path.exists(source):
        entry = _read_json(source)
    else:
        entry = _bundled(source)
        if entry is None:
            raise UsageError(f"no config file or bundled config named {source!r}")
    report = run_check(args.check, entry)
    body = {"manifest": manifest("verify", {"check": args.check, "config": source}, report.config.get("master_seed")),
            "report": report.to_json()}
    out = args.out or f"{args.check}_report.json"
    atomic_write(out, json.dumps(body, indent=2, sort_keys=True) + "\n")
    print(report.line())
    return 0 if report.passed else 1


def cmd_list(args) -> int:
    print("checks:", ", ".join(sorted(CHECKS)))
    print("bundled configs:", ", ".join(bundled_configs()))
    return 0


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freeito", description="Free stochastic calculus toolkit.")
    parser.add_argument("--version", action="version", version=f"freeito {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, base=True, out=True):
        p = sub.add_parser(name, help=help_text)
        if base:
            p.add_argument("--base", default="semicircular",
                           help="cumulant JSON file or catalog name, e.g. free_poisson:rate=1/2")
        if out:
            p.add_argument("--out", help="also write the result to this file (.json or .csv)")
        p.set_defaults(func=func)
        return p

    p = add("moments", cmd_moments, "moments from free cumulants")
    p.add_argument("-n", type=int, required=True)

    p = add("cumulants", cmd_cumulants, "free cumulants from moments", base=False)
    p.add_argument("--moments", required=True, help="moment JSON file or comma list m_1,m_2,...")
    p.add_argument("-n", type=int)

    p = add("integral-dist", cmd_integral_dist, "law of a scalar integral of a step function")
    p.add_argument("--step", required=True, help="step JSON file or inline '0,1,2;1,3'")
    p.add_argument("-n", type=int, default=6)

    p = add("diagonal", cmd_diagonal, "cumulants of a diagonal measure")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("-t", default="1")
    p.add_argument("-n", type=int, default=6)

    p = add("norm", cmd_norm, "mu-norm of a step function")
    p.add_argument("--step", required=True)
    p.add_argument("-n", type=int, default=4)
    p.add_argument("--tail", action="store_true", help="report n = 2, 4, ..., n")

    p = add("moment-flow", cmd_moment_flow, "integrate the moment ODE (CSV: t, n, moment)")
    p.add_argument("--step", required=True)
    p.add_argument("-n", type=int, default=4)
    p.add_argument("-t", default=None, help="final time (default: end of the step function)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--samples", type=int, default=50, help="time samples in the output (0 = all)")

    p = add("pde-check", cmd_pde_check, "finite-difference residual of the Cauchy-transform PDE")
    p.add_argument("-z", nargs="+", default=["2j"])
    p.add_argument("-t", nargs="+", type=float, default=[1.0])
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, help="exit 1 if any residual reaches this value")

    p = add("density", cmd_density, "density by Stieltjes inversion (CSV: x, density)")
    p.add_argument("--xmin", type=float, default=-3.0)
    p.add_argument("--xmax", type=float, default=3.0)
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--eps", type=float, default=1e-6)

    p = add("simulate", cmd_simulate, "eigenvalues of X(T) from the matrix model (CSV)")
    p.add_argument("--n", type=int, default=256, help="matrix size N")
    p.add_argument("--steps", type=int, default=16)
    p.add_argument("-T", default="1")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default="auto", choices=["auto", "gaussian_hermitian", "haar_quantile"])

    p = add("verify", cmd_verify, "run a named check; exit 0 iff it passes", base=False)
    p.add_argument("check")
    p.add_argument("--config", help="config JSON file or bundled config name (default: the check name)")

    add("list", cmd_list, "list checks and bundled configs", base=False, out=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FreeItoError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
