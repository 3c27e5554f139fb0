"""Command-line entry point.

Subcommands: solve, divisibility, regression, validate, bathscan.
Structured reports are JSON, time series are CSV; every file is written
atomically (temp file + rename) and reruns with identical configuration
and seeds are byte-identical.  GSB_THREADS caps the sweep worker pool.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import divisibility as div
from . import regression as reg
from .channels import DensityBlock, choi_scan
from .dynamics import closed_form_flat, solve_survival, survival_to_csv
from .errors import GsbError, InvariantViolation
from .fock import extract_survival
from .spectral import Flat, Lorentzian, ModelSpec, discretize_bath, load_model

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _load_model_or_exit(path: str) -> ModelSpec:
    try:
        return load_model(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot load model {path!r}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _survival(spec: ModelSpec, horizon: float, step: float):
    if spec.all_flat:
        return closed_form_flat(spec, horizon=horizon, step=step)
    return solve_survival(spec, horizon=horizon, step=step)


def _survival_metadata(spec: ModelSpec) -> dict:
    meta = {"flat": int(spec.all_flat)}
    if spec.all_flat and spec.n == 1:
        rates = [ff.gamma for ff in spec.form_factors]
        total = sum(g * float(np.abs(b[0]) ** 2) for g, b in zip(rates, spec.betas))
        meta["gamma"] = repr(total)
    return meta


def cmd_solve(args) -> int:
    spec = _load_model_or_exit(args.model)
    A = _survival(spec, args.T, args.h)
    out = os.path.join(args.out, "survival.csv")
    _write_atomic(out, survival_to_csv(A, extra_metadata=_survival_metadata(spec)))
    print(out)
    return 0


def cmd_divisibility(args) -> int:
    spec = _load_model_or_exit(args.model)
    A = _survival(spec, args.T, args.h)
    report = div.classify(A, tol=args.tol)
    worst = div.trace_norm_contraction_scan(A, samples=args.samples, seed=args.seed)

    payload = {
        "cp_divisible": report.cp_divisible,
        "p_divisible": report.p_divisible,
        "semigroup": report.semigroup,
        "first_violation_time": report.first_violation_time,
        "semigroup_residual": report.semigroup_residual,
        "tol": report.tol,
        "semigroup_tol": report.semigroup_tol,
        "excluded_grid_points": int(np.sum(report.excluded)),
        "contraction_scan": {"samples": args.samples, "seed": args.seed, "worst_derivative": worst},
        "grid": {"T": args.T, "h": args.h},
        "model": os.path.basename(args.model),
        "provenance": A.provenance,
    }
    out_json = os.path.join(args.out, "divisibility.json")
    _write_atomic(out_json, _json_text(payload))

    rows = ["t,opnorm,dnorm_dt,min_step_choi_eig"]
    K = A.times.size - 1
    for k, t in enumerate(A.times):
        dn = repr(float(report.dnorm_dt[k])) if k < K else ""
        ce = repr(float(report.step_choi_min[k])) if k < K and not np.isnan(report.step_choi_min[k]) else ""
        rows.append(f"{float(t)!r},{float(report.opnorms[k])!r},{dn},{ce}")
    out_ts = os.path.join(args.out, "divisibility_timeseries.csv")
    _write_atomic(out_ts, "\n".join(rows) + "\n")

    eigs, cp_flags = choi_scan(A)
    d2 = eigs.shape[1]
    header = "t," + ",".join(f"eig_{i + 1}" for i in range(d2)) + ",min_eig,cp_flag"
    lines = [header]
    for k, t in enumerate(A.times):
        vals = ",".join(repr(float(v)) for v in eigs[k])
        lines.append(f"{float(t)!r},{vals},{float(eigs[k, -1])!r},{int(cp_flags[k])}")
    out_scan = os.path.join(args.out, "choi_scan.csv")
    _write_atomic(out_scan, "\n".join(lines) + "\n")
    print(out_json)
    print(out_ts)
    print(out_scan)
    return 0


def _named_state(name: str, n: int) -> DensityBlock:
    dim = n + 1
    if name == "excited":
        mat = np.zeros((dim, dim), dtype=complex)
        mat[0, 0] = 1.0
    elif name == "ground":
        mat = np.zeros((dim, dim), dtype=complex)
        mat[n, n] = 1.0
    elif name == "plus":
        vec = np.zeros(dim, dtype=complex)
        vec[0] = vec[n] = 1 / np.sqrt(2)
        mat = np.outer(vec, vec.conj())
    else:
        raise ValueError(f"unknown state name {name!r}")
    return DensityBlock.from_matrix(mat)


def _named_ops(name: str, n: int, count: int):
    dim = n + 1
    eye = np.eye(dim, dtype=complex)
    if name == "identity":
        pair = (eye, eye)
    elif name == "xbasis":
        flip = np.zeros((dim, dim), dtype=complex)
        flip[0, n] = flip[n, 0] = 1.0
        pair = (flip, eye)
    else:
        raise ValueError(f"unknown op set {name!r}")
    return tuple(pair[0] for _ in range(count)), tuple(pair[1] for _ in range(count))


def cmd_regression(args) -> int:
    spec = _load_model_or_exit(args.model)
    try:
        times = tuple(float(x) for x in args.times.split(","))
    except ValueError:
        print(f"error: cannot parse --times {args.times!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        xs, ys = _named_ops(args.ops, spec.n, len(times))
        rho = _named_state(args.rho, spec.n)
        corr = reg.CorrelationSpec(times=times, xs=xs, ys=ys, rho=rho)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    n_max = args.nmax if args.nmax is not None else corr.default_n_max()
    A = reg.reference_survival(spec, corr, step=args.h)

    if args.sweep:
        ws = [float(x) for x in args.sweep.split(",")]
        ladder = [(W, int(round(args.ratio * W))) for W in ws]
        report = reg.convergence_sweep(spec, corr, ladder, survival=A, n_max=n_max)
        lines = ["W,M,n_max,gap"]
        for (W, M), gap in zip(report.refinements, report.gap_series):
            lines.append(f"{W!r},{M},{n_max},{gap!r}")
        out_csv = os.path.join(args.out, "regression_sweep.csv")
        _write_atomic(out_csv, "\n".join(lines) + "\n")
        print(out_csv)
    else:
        bath = discretize_bath(spec, half_width=args.W, modes_per_channel=args.M)
        report = reg.regression_gap(spec, bath, A, corr, n_max=n_max)

    payload = {
        "lhs": {"re": report.lhs.real, "im": report.lhs.imag},
        "rhs": {"re": report.rhs.real, "im": report.rhs.imag},
        "gap": report.gap,
        "metadata": report.metadata,
        "times": list(times),
        "ops": args.ops,
        "rho": args.rho,
        "n_max": n_max,
        "model": os.path.basename(args.model),
    }
    if report.gap_series is not None:
        payload["gap_series"] = list(report.gap_series)
        payload["refinements"] = [[W, M] for W, M in report.refinements]
    out_json = os.path.join(args.out, "regression.json")
    _write_atomic(out_json, _json_text(payload))
    print(out_json)
    return 0


def cmd_bathscan(args) -> int:
    spec = _load_model_or_exit(args.model)
    bath = discretize_bath(spec, half_width=args.W, modes_per_channel=args.M)
    lines = ["channel,mode,omega,g"]
    for j in range(spec.r):
        for k in range(args.M):
            lines.append(f"{j},{k},{float(bath.omegas[j, k])!r},{float(bath.amplitudes[j, k])!r}")
    out_csv = os.path.join(args.out, "bath.csv")
    _write_atomic(out_csv, "\n".join(lines) + "\n")

    fine = discretize_bath(spec, half_width=args.W, modes_per_channel=64 * args.M)
    channels = []
    for j in range(spec.r):
        got = float(np.sum(bath.amplitudes[j] ** 2))
        ref = float(np.sum(fine.amplitudes[j] ** 2))
        channels.append({
            "channel": j,
            "sum_g_sq": got,
            "windowed_weight_ref": ref,
            "rel_error": abs(got - ref) / ref if ref else 0.0,
        })
    payload = {
        "W": args.W,
        "M": args.M,
        "delta_omega": bath.delta_omega,
        "recurrence_time": bath.recurrence_time,
        "channels": channels,
        "model": os.path.basename(args.model),
    }
    out_json = os.path.join(args.out, "bath.json")
    _write_atomic(out_json, _json_text(payload))
    print(out_csv)
    print(out_json)
    return 0


def _check(name: str, ok: bool, detail: str, failures: list) -> None:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if not ok:
        failures.append(name)


def cmd_validate(args) -> int:
    """Built-in invariant suite over the channel equivalences,
    divisibility consistency and the photon-profile identities."""
    failures: list[str] = []
    rng = np.random.default_rng(args.seed)

    from .channels import is_cp, is_positive_map
    from .dynamics import operator_norm, semigroup_residual

    disagreements = 0
    for i in range(60):
        n = (1, 2, 3)[i % 3]
        mat = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        target = rng.uniform(0.2, 1.5)
        mat *= target / np.linalg.svd(mat, compute_uv=False)[0]
        cp = is_cp(mat)
        pos = is_positive_map(mat, samples=200, seed=args.seed + i)
        contractive = operator_norm(mat) <= 1 + 1e-10
        if not (cp == pos == contractive):
            disagreements += 1
    _check("cp/positivity/norm equivalence", disagreements == 0,
           f"{disagreements} disagreements over 60 random operators", failures)

    qubit = ModelSpec(n=1, r=1, H_e=np.zeros((1, 1)), betas=np.array([[1.0]]),
                      form_factors=(Lorentzian(gamma=8.0, lam=1.0),))
    A = solve_survival(qubit, horizon=3.0, step=5e-3)
    rep = div.classify(A)
    agree = bool(np.array_equal(rep.mono_flags(), rep.choi_flags()))
    _check("monotonicity vs one-step Choi flags", agree,
           "per-grid-point flags identical on the underdamped benchmark", failures)

    flat = ModelSpec(n=1, r=1, H_e=np.zeros((1, 1)), betas=np.array([[1.0]]),
                     form_factors=(Flat(gamma=1.0),))
    res = semigroup_residual(closed_form_flat(flat, horizon=4.0, step=0.01))
    _check("flat semigroup residual", res <= 1e-10, f"residual {res:.2e}", failures)

    bath = discretize_bath(flat, half_width=20.0, modes_per_channel=400)
    prof = reg.photon_profile_identities(flat, bath, 1.0, 2.0)
    _check("photon profile overlap", prof.overlap_modulus <= 5e-2,
           f"overlap {prof.overlap_modulus:.3e}", failures)
    _check("two-photon pair-counting identity", prof.permanent_residual <= 1e-8,
           f"residual {prof.permanent_residual:.2e}", failures)

    small_bath = discretize_bath(flat, half_width=5.0, modes_per_channel=50)
    A_fock = extract_survival(flat, small_bath, horizon=2.0, step=0.125)
    flip = np.array([[0, 1], [1, 0]], dtype=complex)
    probe = np.diag([1.0, 0.0]).astype(complex)
    corr = reg.CorrelationSpec(times=(1.0, 2.0), xs=(flip, probe), ys=(flip, probe),
                               rho=_named_state("ground", 1))
    gap = reg.regression_gap(flat, small_bath, A_fock, corr).gap
    _check("ground-state regression identity", gap <= 1e-9, f"gap {gap:.2e}", failures)

    if failures:
        raise InvariantViolation(f"{len(failures)} checks failed: {', '.join(failures)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsb",
        description="Reduced dynamics, divisibility and regression checks for "
                    "generalized spin-boson models (all rates/frequencies in 1/time units)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--model", required=True, help="model JSON file path")
        p.add_argument("--out", default=".", help="output directory (default: current)")

    p = sub.add_parser("solve", help="sample the survival operator and write survival.csv")
    add_common(p)
    p.add_argument("--T", type=float, required=True, help="horizon, units of time")
    p.add_argument("--h", type=float, required=True, help="grid step, units of time")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("divisibility", help="classify CP/P-divisibility and semigroup property")
    add_common(p)
    p.add_argument("--T", type=float, required=True, help="horizon, units of time")
    p.add_argument("--h", type=float, required=True, help="grid step, units of time")
    p.add_argument("--tol", type=float, default=None,
                   help="monotonicity slack, dimensionless (default 1e-9*(1+max norm))")
    p.add_argument("--samples", type=int, default=100, help="trace-norm scan sample count")
    p.add_argument("--seed", type=int, default=202, help="seed for the trace-norm scan")
    p.set_defaults(func=cmd_divisibility)

    p = sub.add_parser("regression", help="two-sided multi-time correlation gap")
    add_common(p)
    p.add_argument("--times", required=True, help="comma-separated insertion times, units of time")
    p.add_argument("--ops", default="xbasis", choices=["xbasis", "identity"],
                   help="insertion operator set")
    p.add_argument("--rho", default="excited", choices=["excited", "ground", "plus"],
                   help="initial system state")
    p.add_argument("--W", type=float, default=20.0, help="bath half-bandwidth, units 1/time")
    p.add_argument("--M", type=int, default=400, help="modes per bath channel")
    p.add_argument("--nmax", type=int, default=None, help="excitation truncation (default: gaps+1)")
    p.add_argument("--h", type=float, default=1e-3,
                   help="reduced-side grid step, units of time")
    p.add_argument("--sweep", default=None,
                   help="comma-separated W ladder; M scales as ratio*W")
    p.add_argument("--ratio", type=float, default=10.0, help="modes per unit bandwidth in sweeps")
    p.set_defaults(func=cmd_regression)

    p = sub.add_parser("bathscan", help="write the discretized bath and its quadrature summary")
    add_common(p)
    p.add_argument("--W", type=float, required=True, help="bath half-bandwidth, units 1/time")
    p.add_argument("--M", type=int, required=True, help="modes per bath channel")
    p.set_defaults(func=cmd_bathscan)

    p = sub.add_parser("validate", help="run the built-in invariant suite")
    p.add_argument("--seed", type=int, default=11, help="seed for randomized checks")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "out"):
        os.makedirs(args.out, exist_ok=True)
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except GsbError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
