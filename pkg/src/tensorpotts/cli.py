"""Command-line front end: plot-ready phase diagrams, exact and simulated laws,
limit-law comparisons, estimates and confidence sets.

Commands emit CSV density/sample tables and JSON summaries; no rendering.
All floats are printed with 17 significant digits so files round-trip exactly,
and identical invocations (including seeds) produce byte-identical output.

Exit codes: 0 success, 2 precondition violation, 3 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import exact, inference, laws, phase, sampling
from .errors import NonConvergenceError, PreconditionError, TensorPottsError
from .model import ModelSpec
from .phase import PointTag

EXIT_PRECONDITION = 2
EXIT_NONCONVERGENCE = 3


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_table(path, fmt: str, columns: list, rows) -> None:
    """Write a table as CSV (floats at 17 significant digits) or JSON records."""
    if fmt == "json":
        records = [dict(zip(columns, [v if isinstance(v, str) else float(v) for v in row]))
                   for row in rows]
        with open(path, "w") as fh:
            json.dump(records, fh, indent=2)
            fh.write("\n")
        return
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")


def _spec(args) -> ModelSpec:
    return ModelSpec(args.p, args.q, args.beta, args.h)


def cmd_classify(args) -> None:
    pc = phase.classify_point(_spec(args), tol_class=args.tol_class)
    _emit(pc.to_json_dict())


def cmd_landmarks(args) -> None:
    sp = phase.compute_special_point(args.p, args.q)
    bc = phase.compute_beta_c(args.p, args.q)
    _emit({
        "beta_c": bc,
        "beta_tilde": sp.beta_tilde,
        "h_tilde": sp.h_tilde,
        "s_pq": sp.s_pq,
        "type": sp.type,
    })


def cmd_curve(args) -> None:
    samples = phase.critical_curve(args.p, args.q, args.samples)
    if args.out:
        _write_table(args.out, args.format, ["h", "beta", "s_low", "s_high"],
                     [(c.h, c.beta, c.s_low, c.s_high) for c in samples])
    _emit({"n_samples": len(samples),
           "h_range": [samples[0].h, samples[-1].h] if samples else [],
           "beta_range": [samples[-1].beta, samples[0].beta] if samples else [],
           "out": args.out})


def cmd_phase_diagram(args) -> None:
    diagram = phase.phase_diagram(
        args.p, args.q, (args.beta_min, args.beta_max), (args.h_min, args.h_max),
        args.resolution, tol_class=args.tol_class, curve_samples=args.samples)
    if args.out:
        rows = [(float(b), float(h), diagram.tags[i, j].value)
                for i, h in enumerate(diagram.h_values)
                for j, b in enumerate(diagram.beta_values)]
        _write_table(args.out, args.format, ["beta", "h", "tag"], rows)
    _emit({
        "beta_c": diagram.beta_c,
        "special": {"beta_tilde": diagram.special.beta_tilde,
                    "h_tilde": diagram.special.h_tilde,
                    "s_pq": diagram.special.s_pq,
                    "type": diagram.special.type},
        "curve": [{"h": c.h, "beta": c.beta, "s_low": c.s_low, "s_high": c.s_high}
                  for c in diagram.curve],
        "grid": {"beta": [args.beta_min, args.beta_max],
                 "h": [args.h_min, args.h_max],
                 "resolution": args.resolution},
        "out": args.out,
    })


def cmd_exact(args) -> None:
    spec = _spec(args)
    law = exact.magnetization_law(spec, args.N)
    u1 = float(law.probs() @ (law.support[:, 0] / args.N))
    up = float(law.probs() @ np.sum((law.support / args.N) ** spec.p, axis=1))
    if args.out:
        grid, _ = law.marginal(0)
        pmfs = [law.marginal(r)[1] for r in range(spec.q)]
        cols = ["x"] + [f"pmf_x{r + 1}" for r in range(spec.q)]
        rows = [(float(x),) + tuple(float(p[i]) for p in pmfs) for i, x in enumerate(grid)]
        _write_table(args.out, args.format, cols, rows)
    _emit({"u_N1": u1, "u_Np": up,
           "log_partition": exact.log_partition(spec, args.N),
           "support_size": int(len(law.log_probs)), "out": args.out})


_SCALINGS = {"auto": None, "sqrt": 0.5, "quartic": 0.25, "sextic": 1.0 / 6.0}


def cmd_simulate(args) -> None:
    spec = _spec(args)
    pc = phase.classify_point(spec, tol_class=args.tol_class)
    law = exact.magnetization_law(spec, args.N)
    draws = sampling.exact_sample(law, args.samples, args.seed)
    rescaled = sampling.rescale(draws, spec, pc, args.N)
    if args.out:
        sampling.write_samples_csv(args.out, rescaled, spec, args.N, args.seed)
    overlay = None
    if pc.tag is PointTag.REGULAR:
        overlay = laws.gaussian_limit_regular(spec, point_class=pc).project(
            np.asarray(args.project)) if args.project else None
    elif pc.tag is PointTag.SPECIAL_TYPE_I:
        overlay = laws.quartic_law(spec, point_class=pc)
    elif pc.tag is PointTag.SPECIAL_TYPE_II:
        overlay = laws.sextic_law(0.0)
    elif args.project:
        overlay = laws.critical_mixture_law(spec, point_class=pc).project(
            np.asarray(args.project))
    density_out = None
    if overlay is not None and args.out:
        density_out = args.out + ".density.csv"
        laws.density_table_csv(overlay, density_out)
    _emit({"tag": pc.tag.value, "n_samples": int(len(rescaled)),
           "scale_exponent": rescaled[0].scale_exponent if rescaled else None,
           "out": args.out, "density_out": density_out})


def _load_data_vector(args, spec: ModelSpec):
    if args.data:
        raw = np.loadtxt(args.data, delimiter=",", comments="#", ndmin=2)
        vec = raw[0]
        if vec.shape[0] != spec.q:
            raise PreconditionError(f"data row has {vec.shape[0]} columns, expected q={spec.q}")
        return vec
    if args.simulate:
        law = exact.magnetization_law(spec, args.N)
        return sampling.exact_sample(law, 1, args.seed)[0]
    raise PreconditionError("provide --data FILE or --simulate")


def _estimate_payload(args, method: str) -> dict:
    spec = _spec(args)
    data = _load_data_vector(args, spec)
    if args.param == "h":
        est = inference.mle_h(spec, float(data[0]), args.N)
        if method == "two_step":
            cs = inference.two_step_ci(spec, data, args.N, args.alpha, param="h")
        else:
            cs = inference.ci_h(spec, data, args.N, args.alpha, estimate=est)
            if method == "augmented":
                cs = inference.augment_ci(
                    cs, inference.critical_slice_h(spec.p, spec.q, spec.beta))
    else:
        est = inference.mle_beta(spec, float(np.sum(data ** spec.p)), args.N)
        if method == "two_step":
            cs = inference.two_step_ci(spec, data, args.N, args.alpha, param="beta")
        else:
            cs = inference.ci_beta(spec, data, args.N, args.alpha, estimate=est)
            if method == "augmented":
                cs = inference.augment_ci(
                    cs, inference.critical_slice_beta(spec.p, spec.q, spec.h))
    payload = est.to_json_dict()
    payload["ci"] = cs.to_json_dict()
    payload["param"] = args.param
    if not est.converged:
        raise NonConvergenceError("estimator bisection did not converge")
    return payload


def cmd_estimate(args) -> None:
    _emit(_estimate_payload(args, "plain"))


def cmd_ci(args) -> None:
    _emit(_estimate_payload(args, args.method))


def cmd_limit_check(args) -> None:
    spec = _spec(args)
    pc = phase.classify_point(spec, tol_class=args.tol_class)
    law = exact.magnetization_law(spec, args.N)
    draws = sampling.exact_sample(law, args.samples, args.seed)
    rescaled = sampling.rescale(draws, spec, pc, args.N)
    if pc.tag is PointTag.SPECIAL_TYPE_I:
        stat = np.array([r.t_n for r in rescaled])
        target = laws.quartic_law(spec, point_class=pc)
        descriptor = "quartic T_N limit"
    elif pc.tag is PointTag.SPECIAL_TYPE_II:
        stat = np.array([r.t_n for r in rescaled])
        target = laws.sextic_law(0.0)
        descriptor = "sextic T_N limit"
    else:
        direction = np.asarray(args.project if args.project else [1.0] + [0.0] * (spec.q - 1))
        stat = np.array([r.w @ direction for r in rescaled])
        if pc.tag is PointTag.REGULAR:
            target = laws.gaussian_limit_regular(spec, point_class=pc).project(direction)
            descriptor = "projected Gaussian limit"
        else:
            target = laws.critical_mixture_law(spec, point_class=pc).project(direction)
            descriptor = "projected Gaussian-mixture limit"
    ks = laws.ks_distance(stat, target)
    _emit({"ks_distance": ks, "pass": bool(ks <= args.ks_tol),
           "law": descriptor, "tag": pc.tag.value, "n_samples": int(len(stat))})


def _add_common(sub):
    sub.add_argument("--p", type=int, required=True, help="interaction order (>= 2)")
    sub.add_argument("--q", type=int, required=True, help="number of colors (>= 2)")
    return sub


def _add_point(sub):
    sub.add_argument("--beta", type=float, required=True, help="interaction strength (>= 0)")
    sub.add_argument("--h", type=float, default=0.0, help="external field (>= 0)")
    return sub


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tensorpotts",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("classify", help="classify a parameter point; JSON {tag, s_values, f_values, warnings}")
    _add_point(_add_common(sp))
    sp.add_argument("--tol-class", dest="tol_class", type=float, default=phase.CLASS_TOL,
                    help="|f''| tolerance for the special tags (widen for figure-rounded points)")
    sp.set_defaults(func=cmd_classify)

    sp = subs.add_parser("landmarks", help="beta_c and the special point; JSON")
    _add_common(sp)
    sp.set_defaults(func=cmd_landmarks)

    sp = subs.add_parser("curve", help="strongly-critical curve samples; CSV h,beta,s_low,s_high")
    _add_common(sp)
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.set_defaults(func=cmd_curve)

    sp = subs.add_parser("phase-diagram", help="per-cell tags over a rectangle; CSV beta,h,tag + landmark JSON")
    _add_common(sp)
    sp.add_argument("--beta-min", type=float, required=True)
    sp.add_argument("--beta-max", type=float, required=True)
    sp.add_argument("--h-min", type=float, default=0.0)
    sp.add_argument("--h-max", type=float, required=True)
    sp.add_argument("--resolution", type=int, default=33)
    sp.add_argument("--samples", type=int, default=128, help="curve samples for the overlay")
    sp.add_argument("--tol-class", dest="tol_class", type=float, default=phase.CLASS_TOL)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.set_defaults(func=cmd_phase_diagram)

    sp = subs.add_parser("exact", help="exact law marginals and u_{N,1}, u_{N,p}; CSV columns x,pmf_x1..pmf_xq")
    _add_point(_add_common(sp))
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.set_defaults(func=cmd_exact)

    sp = subs.add_parser("simulate", help="rescaled exact samples (columns x1..xq[,t_n,v_2..v_q]) + density table (x,pdf,cdf)")
    _add_point(_add_common(sp))
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scaling", choices=sorted(_SCALINGS), default="auto",
                    help="informational; the exponent follows the point class")
    sp.add_argument("--project", type=float, nargs="+", default=None,
                    help="projection direction for the density overlay")
    sp.add_argument("--tol-class", dest="tol_class", type=float, default=phase.CLASS_TOL)
    sp.add_argument("--out", type=str, default=None)
    sp.set_defaults(func=cmd_simulate)

    for name, fn in (("estimate", cmd_estimate), ("ci", cmd_ci)):
        sp = subs.add_parser(name, help="ML estimate and confidence set; JSON")
        _add_point(_add_common(sp))
        sp.add_argument("--param", choices=["h", "beta"], required=True,
                        help="which parameter to estimate (the other is fixed at its flag value)")
        sp.add_argument("--N", type=int, required=True)
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--data", type=str, default=None,
                        help="CSV whose first row is the observed magnetization x1..xq")
        sp.add_argument("--simulate", action="store_true",
                        help="draw the data vector from the exact law at (beta, h)")
        sp.add_argument("--seed", type=int, default=0)
        if name == "ci":
            sp.add_argument("--method", choices=["plain", "augmented", "two_step"],
                            default="plain")
        sp.set_defaults(func=fn)

    sp = subs.add_parser("limit-check", help="KS distance of rescaled exact samples to the limit law; JSON")
    _add_point(_add_common(sp))
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ks-tol", dest="ks_tol", type=float, default=0.05)
    sp.add_argument("--project", type=float, nargs="+", default=None)
    sp.add_argument("--tol-class", dest="tol_class", type=float, default=phase.CLASS_TOL)
    sp.set_defaults(func=cmd_limit_check)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NonConvergenceError as exc:
        sys.stderr.write(f"non-convergence: {exc}\n")
        return EXIT_NONCONVERGENCE
    except (PreconditionError, TensorPottsError) as exc:
        sys.stderr.write(f"precondition violation: {exc}\n")
        return EXIT_PRECONDITION
    return 0


if __name__ == "__main__":
    sys.exit(main())
