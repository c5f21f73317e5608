"""Command-line front end: build instanton data, run the verification suites,
compute actions, integrate flows, and classify families.

Exit codes: 0 success, 1 failed checks, 2 usage or configuration errors.  All
reports are JSON with a config echo, the tolerances used, and the wall-clock
runtime; trajectory output is CSV at full precision."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from .adhm import (
    ADHMData,
    OneInstantonParams,
    PatchingField,
    closed_form_G,
    closed_form_G_modes,
    one_instanton_data,
    patching_matrix,
    validate,
)
from .deform import (
    ADHMFamily,
    NotInduced,
    Scaling,
    classify_flow,
    family_from_config,
)
from .errors import BlowupReached, QuadratureTail, SdymError
from .gauge import GridSpec, action_integral, effective_scale, grid_summary
from .geometry import AnnulusSpec, R4Point
from .rhsplit import j_function, split_line
from .symmetry import TwistorPoly, g_flow_exp

log = logging.getLogger("sdymflow")

EXPECTED_ACTION_PER_CHARGE = 8 * np.pi**2


def _parse_complex(text: str) -> complex:
    return complex(text.strip().replace("i", "j"))


def _parse_center(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("--center expects 'alpha,beta' (e.g. 1+0i,0+0i)")
    return _parse_complex(parts[0]), _parse_complex(parts[1])


def _parse_grid(text: str) -> GridSpec:
    lo, hi, n = text.split(",")
    return GridSpec.cube(float(lo), float(hi), int(n))


def _parse_annulus(text: str) -> AnnulusSpec:
    eps, n = text.split(",")
    return AnnulusSpec(epsilon=float(eps), n_samples=int(n))


def _parse_tols(items) -> dict:
    tols = {}
    for item in items or []:
        if "=" in item:
            name, val = item.split("=", 1)
            tols[name.strip()] = float(val)
        else:
            tols["default"] = float(item)
    for name, val in tols.items():
        if val <= 0:
            raise ValueError(f"tolerance {name} must be positive")
    return tols


def _parse_family(text: str) -> ADHMFamily:
    """Family from inline JSON, a JSON file path, or 'name:key=val,...'."""
    text = text.strip()
    if text.startswith("{"):
        return family_from_config(json.loads(text))
    if os.path.exists(text):
        with open(text) as fh:
            return family_from_config(json.load(fh))
    if ":" in text:
        name, rest = text.split(":", 1)
        spec = {"type": name}
        for kv in rest.split(","):
            if not kv:
                continue
            key, val = kv.split("=")
            spec[key] = _parse_complex(val) if key in ("dalpha", "dbeta") else float(val)
        cfg = dict(spec)
        for key in ("dalpha", "dbeta"):
            if key in cfg and isinstance(cfg[key], complex):
                cfg[key] = [cfg[key].real, cfg[key].imag]
        return family_from_config(cfg)
    return family_from_config({"type": text})


def _params_from_args(args) -> OneInstantonParams:
    lam = args.lam if args.lam is not None else 1.0
    alpha, beta = (0j, 0j)
    if args.center:
        alpha, beta = _parse_center(args.center)
    return OneInstantonParams(lam, alpha, beta)


def _load_data(args):
    """(ADHMData, OneInstantonParams or None) from --adhm or --lambda/--center."""
    if args.adhm:
        return ADHMData.load(args.adhm), None
    p = _params_from_args(args)
    return one_instanton_data(p), p


def _emit(args, command, results, passed, extra_files=None):
    report = {
        "command": command,
        "config": {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "_t0") and v is not None
        },
        "tolerances": _parse_tols(args.tol),
        "results": results,
        "passed": bool(passed),
    }
    if extra_files:
        report["files"] = extra_files
    # sorted keys make identical configs give byte-identical reports except
    # for the runtime field
    report["runtime_s"] = time.time() - args._t0
    full = json.dumps(report, indent=2, sort_keys=True, default=str)
    print(full)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{command}.json"), "w") as fh:
            fh.write(full + "\n")
    return 0 if passed else 1


def cmd_build(args) -> int:
    data, p = _load_data(args)
    rep = validate(data)
    files = {}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "adhm.json")
        data.save(path)
        files["adhm"] = path
    results = {
        "k": data.k,
        "params": p.to_json() if p is not None else None,
        "validation": rep.to_json(),
    }
    return _emit(args, "build", results, rep.passed, files)


def cmd_verify(args) -> int:
    data, p = _load_data(args)
    tols = _parse_tols(args.tol)
    tol = tols.get("default", 1e-10)
    rng = np.random.default_rng(args.seed)
    spec = _parse_annulus(args.annulus) if args.annulus else AnnulusSpec()

    rep = validate(data)
    checks = {c["name"]: c for c in rep.to_json()}
    for c in checks.values():
        c["tol"] = max(c["tol"], tol) if "default" not in tols else tol
        c["passed"] = c["residual"] < c["tol"]

    field = PatchingField.from_adhm(data)
    det_r, real_r, agree_r = 0.0, 0.0, 0.0
    try:
        for _ in range(args.n_samples):
            x = R4Point(*rng.uniform(-2, 2, size=4))
            z = np.exp(2j * np.pi * rng.random())
            G, _ = patching_matrix(data, x, z)
            det_r = max(det_r, abs(np.linalg.det(G) - 1))
            Gs, _ = patching_matrix(data, x, -1 / np.conj(z))
            real_r = max(real_r, float(np.abs(Gs.conj().T - G).max()))
            if p is not None:
                Gc, _ = closed_form_G(p, x, z)
                agree_r = max(agree_r, float(np.abs(G - Gc).max()))
    except SdymError as exc:
        log.warning("patching sampling aborted: %s", exc)
        det_r = real_r = agree_r = float("inf")
    checks["patching_det"] = {"name": "patching_det", "residual": det_r, "tol": tol}
    checks["patching_reality"] = {"name": "patching_reality", "residual": real_r, "tol": tol}
    if p is not None:
        checks["closed_form_agreement"] = {
            "name": "closed_form_agreement", "residual": agree_r, "tol": tol,
        }

    rec_r = tail_r = herm_r = jdet_r = 0.0
    field_split = PatchingField.from_one_instanton(p) if p is not None else field
    try:
        for _ in range(args.n_lines):
            x = R4Point(*rng.uniform(-2, 2, size=4))
            s = split_line(field_split, x, spec)
            from .rhsplit import LoopMatrix

            loop = LoopMatrix.from_field(field_split, x, spec)
            rec_r = max(rec_r, s.reconstruction_residual(loop))
            tail_r = max(tail_r, max(s.analyticity_tails()))
            J = j_function(s)
            herm_r = max(herm_r, float(np.abs(J - J.conj().T).max()))
            jdet_r = max(jdet_r, abs(np.linalg.det(J) - 1))
    except SdymError as exc:
        log.warning("splitting sampling aborted: %s", exc)
        rec_r = tail_r = herm_r = jdet_r = float("inf")
    for name, r in [
        ("splitting_reconstruction", rec_r),
        ("splitting_tails", tail_r),
        ("J_hermitian", herm_r),
        ("J_det", jdet_r),
    ]:
        checks[name] = {"name": name, "residual": float(r), "tol": tol}

    for c in checks.values():
        c["passed"] = c["residual"] < c["tol"]
    passed = all(c["passed"] for c in checks.values())
    return _emit(args, "verify", {"checks": list(checks.values())}, passed)


def cmd_split(args) -> int:
    data, p = _load_data(args)
    spec = _parse_annulus(args.annulus) if args.annulus else AnnulusSpec()
    x = R4Point(*(float(t) for t in (args.point or "0,0,0,0").split(",")))
    field = PatchingField.from_one_instanton(p) if p is not None else PatchingField.from_adhm(data)
    from .rhsplit import LoopMatrix

    loop = LoopMatrix.from_field(field, x, spec)
    s = split_line(field, x, spec)
    J = j_function(s)
    tol = _parse_tols(args.tol).get("default", 1e-10)
    results = {
        "point": [x.x1, x.x2, x.x3, x.x4],
        "reconstruction_residual": s.reconstruction_residual(loop),
        "analyticity_tails": list(s.analyticity_tails()),
        "reality_residual": s.reality_residual(),
        "J": np.stack([J.real, J.imag], axis=-1).tolist(),
        "J_det_residual": abs(np.linalg.det(J) - 1),
        "J_hermiticity": float(np.abs(J - J.conj().T).max()),
    }
    passed = (
        results["reconstruction_residual"] < tol
        and max(results["analyticity_tails"]) < tol
        and results["J_det_residual"] < tol
    )
    return _emit(args, "split", results, passed)


def cmd_action(args) -> int:
    data, p = _load_data(args)
    if p is None:
        raise ValueError("action requires k = 1 parameters (--lambda/--center)")
    field = PatchingField.from_one_instanton(p)
    expected = EXPECTED_ACTION_PER_CHARGE * data.k
    tols = _parse_tols(args.tol)
    center = R4Point.from_complex(p.alpha, p.beta)
    warning = None
    if args.quadrature == "lattice":
        if args.grid:
            grid = _parse_grid(args.grid)
        else:
            # pad by the two stencil layers lost at each face so the summed
            # interior still covers the requested box
            h = 2.0 * args.extent / (args.n - 1)
            grid = GridSpec.cube(-args.extent - 2 * h, args.extent + 2 * h, args.n + 4)
        action = action_integral(field, quadrature="lattice", grid=grid)
        bound = tols.get("action_rel", 0.15)
        warning = "coarse lattice sum; tail outside the box not integrated"
    else:
        action = action_integral(field, quadrature="radial", center=center)
        bound = tols.get("action_rel", 0.01)
    rel_err = abs(action - expected) / expected
    results = {
        "action": action,
        "expected": expected,
        "rel_err": rel_err,
        "bound": bound,
        "quadrature": args.quadrature,
    }
    if warning:
        results["warning"] = warning
    return _emit(args, "action", results, rel_err < bound)


def _batched_family_d(fam: ADHMFamily, t):
    """Vectorized k = 1 deformation parameter over arrays (u, v, z)."""
    p = fam.k1_params(t)
    ld, ad, bd = fam.k1_derivative(t)

    def d(u, v, z):
        A3 = (p.alpha - u) - z * (np.conj(p.beta) - np.conj(v))
        A4 = (p.beta - v) + z * (np.conj(p.alpha) - np.conj(u))
        A3d = ad - z * np.conj(bd)
        A4d = bd + z * np.conj(ad)
        c0 = A4d / p.lam - ld * A4 / p.lam**2
        c1 = -A3d / p.lam + ld * A3 / p.lam**2
        r0 = A3 / p.lam
        r1 = A4 / p.lam
        iz = 1.0 / z
        out = np.empty(np.broadcast(u, z).shape + (2, 2), dtype=complex)
        out[..., 0, 0] = iz * c0 * r0
        out[..., 0, 1] = iz * c0 * r1
        out[..., 1, 0] = iz * c1 * r0
        out[..., 1, 1] = iz * c1 * r1
        return out

    return d


def flowed_family_field(fam: ADHMFamily, t_end: float, steps: int = 96,
                        n_circle: int = 32, tail_tol: float = 1e-7) -> PatchingField:
    """G(t) = alpha(t) G(0) alpha(t)* for a k = 1 family, by RK4 of
    alpha-dot = d(t) alpha vectorized over all requested lines at once.

    The result stays bandwidth 1 (the family moves within the k = 1 class),
    so a reduced circle sampling recovers the modes exactly; the discarded
    Fourier tail is checked against tail_tol."""
    spec = AnnulusSpec(n_samples=n_circle)
    circle = spec.circle
    n = len(circle)
    p0 = fam.k1_params(0.0)

    def alpha_samples(u, v):
        uu = u[:, None]
        vv = v[:, None]
        al = np.broadcast_to(np.eye(2, dtype=complex), (len(u), n, 2, 2)).copy()
        if t_end == 0:
            return al
        h = t_end / steps
        d_next = _batched_family_d(fam, 0.0)(uu, vv, circle)
        t = 0.0
        for _ in range(steps):
            d1 = d_next
            k1 = d1 @ al
            dm = _batched_family_d(fam, t + h / 2)(uu, vv, circle)
            k2 = dm @ (al + h / 2 * k1)
            k3 = dm @ (al + h / 2 * k2)
            d_next = _batched_family_d(fam, t + h)(uu, vv, circle)
            k4 = d_next @ (al + h * k3)
            al = al + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return al

    def modes_fn(u, v):
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        shape = np.broadcast(u, v).shape
        uf = np.broadcast_to(u, shape).ravel()
        vf = np.broadcast_to(v, shape).ravel()
        al = alpha_samples(uf, vf)
        al_star = np.conj(np.swapaxes(np.roll(al, -n // 2, axis=1), -1, -2))
        m0 = closed_form_G_modes(p0, uf, vf)
        zpow = circle[:, None] ** np.array([-1, 0, 1])
        g0 = np.einsum("zm,xmij->xzij", zpow, m0)
        gt = al @ g0 @ al_star
        modes = np.fft.fft(gt, axis=1) / n
        tail = float(np.abs(modes[:, 2 : n - 1]).max())
        if tail > tail_tol:
            raise QuadratureTail(f"flowed loop tail {tail:.2e} exceeds {tail_tol:.1e}")
        out = np.stack([modes[:, -1], modes[:, 0], modes[:, 1]], axis=1)
        return out.reshape(shape + (3, 2, 2))

    def ev(x, z):
        m = modes_fn(np.array([x.u]), np.array([x.v]))[0]
        z = complex(z)
        return m[0] / z + m[1] + m[2] * z

    return PatchingField(ev, provenance="flowed-family", modes_fn=modes_fn, bandwidth=1)


def cmd_flow(args) -> int:
    grid = _parse_grid(args.grid) if args.grid else GridSpec.cube(-2.0, 2.0, 9)
    t_samples = np.linspace(0.0, args.t_end, args.rows)
    tols = _parse_tols(args.tol)

    fam = _parse_family(args.family) if args.family else None
    T = TwistorPoly.load(args.T) if args.T else None
    if fam is None and T is None:
        raise ValueError("flow needs --family or --T")

    base_params = _params_from_args(args)
    rows = []
    truncated = False
    for t in t_samples:
        try:
            if fam is not None:
                field_t = flowed_family_field(fam, float(t), steps=args.steps)
                pt = fam.k1_params(float(t))
                center = R4Point.from_complex(pt.alpha, pt.beta)
            else:
                field_t = g_flow_exp(T, float(t), PatchingField.from_one_instanton(base_params))
                center = R4Point.from_complex(base_params.alpha, base_params.beta)
        except BlowupReached as exc:
            log.warning("trajectory truncated at t=%g: %s", t, exc)
            truncated = True
            break
        _, summary = grid_summary(field_t, grid)
        try:
            lam_eff = effective_scale(field_t, center)
        except SdymError:
            lam_eff = float("nan")
        r = summary["residuals"]
        rows.append((float(t), lam_eff, summary["action"], r["r1"], r["r2"], r["r3"]))

    files = {}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "flow.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lambda_eff", "action", "r1", "r2", "r3"])
            for row in rows:
                w.writerow([f"{val:.17g}" for val in row])
        files["trajectory"] = path

    results = {
        "rows": [
            dict(zip(["t", "lambda_eff", "action", "r1", "r2", "r3"], row)) for row in rows
        ],
        "truncated": truncated,
        "grid": grid.to_json(),
    }
    passed = len(rows) > 0
    if fam is not None and rows and not truncated:
        final = rows[-1]
        pt = fam.k1_params(final[0])
        rel = abs(final[1] - pt.lam) / pt.lam
        results["final_scale_rel_err"] = rel
        passed = rel < tols.get("scale_rel", 0.05)
    return _emit(args, "flow", results, passed, files)


def cmd_classify(args) -> int:
    if not args.family:
        raise ValueError("classify needs --family")
    fam = _parse_family(args.family)
    t_samples = [float(s) for s in args.t_samples.split(",")]
    verdict = classify_flow(fam, t_samples)
    if isinstance(verdict, Scaling):
        results = {"verdict": "Scaling", "flow_k": verdict.flow_k}
    else:
        results = {
            "verdict": "NotInduced",
            "witness": verdict.witness,
            "variation": verdict.variation,
        }
    return _emit(args, "classify", results, True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sdymflow",
        description="Self-dual Yang-Mills fields from twistor patching data.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--lambda", dest="lam", type=float, help="instanton scale")
        sp.add_argument("--center", help="alpha,beta as complex (e.g. 1+0i,0+0i)")
        sp.add_argument("--adhm", help="path to ADHM data JSON")
        sp.add_argument("--grid", help="min,max,n lattice cube")
        sp.add_argument("--annulus", help="epsilon,n sampling spec")
        sp.add_argument("--family", help="family spec (json, file, or name:k=v,...)")
        sp.add_argument("--T", help="path to symmetry generator JSON")
        sp.add_argument("--out", help="output directory for reports")
        sp.add_argument("--tol", action="append", help="name=value tolerance override")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("build", help="construct and validate instanton data")
    common(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("verify", help="run the invariant suites")
    common(sp)
    sp.add_argument("--n-samples", type=int, default=200)
    sp.add_argument("--n-lines", type=int, default=20)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("split", help="factor the loop on one line")
    common(sp)
    sp.add_argument("--point", help="x1,x2,x3,x4 of the line center")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("action", help="total action vs 8 pi^2 k")
    common(sp)
    sp.add_argument("--quadrature", choices=["radial", "lattice"], default="radial")
    sp.add_argument("--extent", type=float, default=2.0)
    sp.add_argument("--n", type=int, default=9)
    sp.set_defaults(func=cmd_action)

    sp = sub.add_parser("flow", help="integrate a flow and record the trajectory")
    common(sp)
    sp.add_argument("--t-end", type=float, default=0.75)
    sp.add_argument("--rows", type=int, default=4)
    sp.add_argument("--steps", type=int, default=96)
    sp.set_defaults(func=cmd_flow)

    sp = sub.add_parser("classify", help="decide whether a family is a scaling flow")
    common(sp)
    sp.add_argument("--t-samples", default="0.0,0.1,0.2")
    sp.set_defaults(func=cmd_classify)

    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("SDYM_LOG", "WARNING").upper(), logging.WARNING)
    )
    ap = build_parser()
    args = ap.parse_args(argv)
    args._t0 = time.time()
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SdymError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
