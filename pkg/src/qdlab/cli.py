"""Command line entry point: ``qdlab <command> ...``.

Every command prints a JSON document and exits 0 iff all of its verdicts pass
(1 when one fails, 2 on bad input).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import scenarios as sc
from .domains import (Cardioid, EllipseExterior, JoukowskyAirfoilExterior, NeumannOval, boundary,
                      from_json as domain_from_json, poly3, quadrature_data,
                      to_json as domain_to_json, univalence_check)
from .errors import QdlabError
from .numerics import RationalFunction, is_inf
from .quadcheck import check_identity, default_battery
from .raster import RasterDroplet
from .svg import Layer, chain_svg, mask_layer, node_layer, orbit_layer, render_svg
from .topology import (check_ovals_bound, check_theorem_A, minimal_degree, packing_check,
                       set_labels, topology_report)

SCHEMA = 1


class ConfigError(Exception):
    pass


def _round(x, nd: int = 10):
    """Recursively round floats to ``nd`` significant digits so manifests are stable in the last bits."""
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        r = float(f"{x:.{nd}g}")
        return 0.0 if r == 0 else r
    if isinstance(x, complex):
        return [_round(x.real, nd), _round(x.imag, nd)]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _round(x.item(), nd)
    if isinstance(x, dict):
        return {str(k): _round(v, nd) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v, nd) for v in x]
    return x


def dumps(doc) -> str:
    return json.dumps(_round(doc), indent=1, sort_keys=True) + "\n"


def verdict(name: str, passed: bool, **detail) -> dict:
    return {"name": name, "passed": bool(passed), **detail}


class Run:
    """Collects verdicts and writes artifacts into an output directory."""

    def __init__(self, out: str | None):
        self.out = Path(out) if out else None
        self.verdicts: list[dict] = []
        self.artifacts: list[str] = []
        self.data: dict = {}
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def add(self, v: dict) -> dict:
        self.verdicts.append(v)
        return v

    def write(self, name: str, text: str) -> None:
        if self.out:
            (self.out / name).write_text(text)
            self.artifacts.append(name)

    def save_mask(self, stem: str, K: RasterDroplet) -> None:
        if self.out:
            K.save(self.out / stem)
            self.artifacts.extend([stem + ".pgm", stem + ".json"])

    @property
    def ok(self) -> bool:
        return all(v["passed"] for v in self.verdicts)

    def manifest(self, command: str) -> dict:
        return {"schema": SCHEMA, "command": command, "passed": self.ok, "verdicts": self.verdicts,
                "artifacts": sorted(self.artifacts), "data": self.data}

    def finish(self, command: str) -> int:
        doc = dumps(self.manifest(command))
        self.write("manifest.json", doc)
        sys.stdout.write(doc)
        return 0 if self.ok else 1


# -- scenario files ---------------------------------------------------------

def load_scenario_file(path: str) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1:1: scenario must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"{path}:1:1: unsupported schema {doc.get('schema')!r} (expected {SCHEMA})")
    return doc


def scenario_from_doc(doc: dict, grid: int | None) -> sc.Scenario:
    """A scenario JSON names a builder or gives a saved mask plus h."""
    h = 1 / grid if grid else None
    if "builder" in doc:
        S = sc.build(doc["builder"], h)
    elif "mask" in doc and "h" in doc:
        K0 = RasterDroplet.load(doc["mask"])
        S = sc.Scenario(doc.get("name", "custom"), K0, RationalFunction.from_json(doc["h"]), [], {})
    else:
        raise ConfigError("scenario needs either 'builder' or both 'mask' and 'h'")
    if "times" in doc:
        S.times = [float(t) for t in doc["times"]]
    S.meta.update(doc.get("expect", {}))
    if "name" in doc:
        S.name = doc["name"]
    return S


def resolve_scenario(arg: str, grid: int | None) -> tuple[sc.Scenario, dict]:
    if arg.endswith(".json") or Path(arg).is_file():
        doc = load_scenario_file(arg)
        return scenario_from_doc(doc, grid), doc
    return sc.build(arg, 1 / grid if grid else None), {}


# -- heleshaw pipelines -----------------------------------------------------

def _potential(S: sc.Scenario):
    from .heleshaw import build_potential

    return build_potential(S.h_rat, S.K0, box_factor=S.meta.get("box_factor", 2.0))


def _droplet_checks(run: Run, S: sc.Scenario, P, K: RasterDroplet, t: float, tag: str) -> None:
    from .heleshaw import area_law_ok
    from .transforms import verify_equilibrium

    ok, err, allowed = area_law_ok(K, t)
    run.add(verdict(f"{tag} area law", ok, error=err, allowed=allowed))
    _, dev = verify_equilibrium(K, np.where(K.mask, P.Q, 0.0))
    run.add(verdict(f"{tag} equilibrium", dev <= 10 * K.h, deviation=dev, allowed=10 * K.h))
    b = sc.droplet_bounds(K, S.h_rat)
    run.add(verdict(f"{tag} bounds", b["passed"], ovals=b["ovals"], components=b["components"]))


def chain_pipeline(run: Run, S: sc.Scenario, tol: float) -> None:
    from .heleshaw import chain

    P = _potential(S)
    times = S.times or [P.t_max]
    C = chain(P, times, tol=tol)
    run.data["chain"] = C.manifest()
    for i, (t, K) in enumerate(zip(C.times, C.droplets)):
        run.save_mask(f"droplet_{i:03d}", K)
        _droplet_checks(run, S, P, K, t, f"t={t:.6g}")
    bad = C.monotonicity_violations()
    run.add(verdict("monotone", not any(bad), violations=bad))
    strong = C.strong_monotonicity()
    run.add(verdict("strongly monotone", all(strong), pairs=strong))
    if "components" in S.meta:
        want = S.meta["components"]
        run.add(verdict("component count", all(c == want for c in C.component_counts),
                        counts=C.component_counts, expected=want))
    if S.name.startswith("cubic"):
        n, peaks = sc.curvature_peaks(C.droplets[-1])
        run.add(verdict("terminal cusps", n == 3, peaks=n, curvatures=peaks.tolist()))
    run.write("chain.svg", chain_svg(C.droplets, C.times))


def perturb_pipeline(run: Run, S: sc.Scenario, tol: float) -> int:
    """Back up from t0 and count components; returns the count."""
    from .heleshaw import perturb_to_nonsingular

    P = _potential(S)
    r = perturb_to_nonsingular(P)
    K = r.droplet
    run.save_mask(f"{S.name}_perturbed", K)
    c = set_labels(K)[1]
    run.data[S.name] = {"t0": P.t_max, "t": r.t, "components": c}
    _droplet_checks(run, S, P, K, r.t, S.name)
    if "c" in S.meta:
        run.add(verdict(f"{S.name} components", c == S.meta["c"], value=c, expected=S.meta["c"]))
    if "packing" in S.meta:
        v = packing_check(S.meta["packing"], S.meta["m"], c)
        run.add(verdict(f"{S.name} packing bound", v.passed, check=v.to_json(), equality=v.slack == 0))
    run.write(f"{S.name}.svg", render_svg([mask_layer(S.K0, "K0", "#999999"), mask_layer(K, "perturbed")],
                                          title=S.name))
    return c


# -- presets ----------------------------------------------------------------

GALLERY = {
    "cardioid": Cardioid(1.0),
    "neumann-oval": NeumannOval(0.15, 1.0),
    "ellipse": EllipseExterior(1.5, 1.0, 0j),
    "joukowsky": JoukowskyAirfoilExterior(-0.1 + 0.1j),
}


def identity_verdict(run: Run, name: str, spec, tol: float) -> dict:
    qd = quadrature_data(spec)
    rep = check_identity(spec, qd, default_battery(spec))
    return run.add(verdict(f"{name} quadrature identity", rep.max_error <= tol, max_error=rep.max_error,
                           battery=rep.battery, tol=tol, nodes=qd.to_json()))


def domain_svg(spec, title: str) -> str:
    """Shaded compact piece (the domain, or its complement when unbounded) with the finite nodes."""
    curves = boundary(spec, 1024).points
    qd = quadrature_data(spec)
    pts = [nd.a for nd in qd.nodes if not is_inf(nd.a)]
    shade = Layer("mask", list(curves), "complement" if spec.unbounded else "domain")
    return render_svg([shade, node_layer(pts, "nodes")], title=title)


def preset_fig1(run: Run, args) -> None:
    for name, spec in GALLERY.items():
        identity_verdict(run, name, spec, args.tol or 1e-7)
        run.write(f"{name}.svg", domain_svg(spec, name))


def preset_cubic(run: Run, args) -> None:
    S = sc.build("cubic", 1 / args.grid if args.grid else None)
    S.meta["components"] = 1
    chain_pipeline(run, S, args.tol or 1e-10)


def preset_sharp_uqd(run: Run, args) -> None:
    h = 1 / args.grid if args.grid else None
    cases = {"cardioid-in-disc": "UQD", "half-discs": "UQD", "disc-in-ellipse": "UQD-node-at-inf"}
    for name in cases:
        perturb_pipeline(run, sc.build(name, h), args.tol or 1e-10)
    # the pole-at-infinity-only case is the deltoid: simply connected by the bound
    S = sc.build("cubic", h)
    S.meta["c"] = 1
    perturb_pipeline(run, S, args.tol or 1e-10)


def preset_sharp_bqd(run: Run, args) -> None:
    spec = poly3()
    u = univalence_check(spec.phi)
    run.add(verdict("poly3 univalent", u.univalent, contact=u.nearest_distance))
    identity_verdict(run, "poly3", spec, args.tol or 1e-7)
    qd = quadrature_data(spec)
    d, n = qd.order, qd.n_nodes
    v = check_theorem_A(d, n, "BQD", 2)
    run.add(verdict("triple node bound", v.passed and v.bound == 2, d=d, n=n, check=v.to_json()))
    for parts in ((2, 1), (1, 1, 1)):
        v = check_theorem_A(sum(parts), len(parts), "BQD-no-triple-nodes", 2)
        label = "+".join(map(str, parts))
        run.add(verdict(f"partition {label} bound", v.passed and v.bound == 2, check=v.to_json()))
    run.write("poly3.svg", domain_svg(spec, "poly3"))


def preset_packing_discs(run: Run, args) -> None:
    perturb_pipeline(run, sc.build("packing", 1 / args.grid if args.grid else None), args.tol or 1e-10)


def preset_packing_cardioids(run: Run, args) -> None:
    perturb_pipeline(run, sc.build("cardioid-in-ellipse", 1 / args.grid if args.grid else None),
                     args.tol or 1e-10)


def preset_apollonian(run: Run, args) -> None:
    h = 1 / args.grid if args.grid else None
    for name in ("half-discs", "cardioid-in-ellipse"):
        perturb_pipeline(run, sc.build(name, h), args.tol or 1e-10)


def preset_concentric(run: Run, args, k: int) -> None:
    K = sc.concentric_circles(k)
    rep = topology_report(K)
    d = minimal_degree(rep)
    v = check_ovals_bound(rep, d)
    run.data["topology"] = rep.to_json()
    run.add(verdict(f"{k} concentric circles", v.passed and v.slack == 0, degree=d, check=v.to_json()))
    run.write(f"concentric_{k}.svg", render_svg([mask_layer(K)], title=f"{k} concentric circles"))


PRESETS = {
    "fig1-gallery": preset_fig1,
    "cubic-chain": preset_cubic,
    "sharp-uqd-order2": preset_sharp_uqd,
    "sharp-bqd-order3": preset_sharp_bqd,
    "packing-discs": preset_packing_discs,
    "packing-cardioids": preset_packing_cardioids,
    "apollonian-setups": preset_apollonian,
}


# -- commands ---------------------------------------------------------------

def _domain_arg(text: str):
    if text in GALLERY:
        return GALLERY[text]
    if text == "poly3":
        return poly3()
    try:
        return domain_from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"domain:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def cmd_domain(args) -> int:
    spec = _domain_arg(args.domain)
    qd = quadrature_data(spec)
    run = Run(args.out)
    run.data.update({"domain": domain_to_json(spec), "nodes": qd.to_json(), "order": qd.order,
                     "distinct_nodes": qd.n_nodes})
    run.write("domain.svg", domain_svg(spec, args.domain if args.domain in GALLERY else "domain"))
    return run.finish("domain")


def cmd_check(args) -> int:
    spec = _domain_arg(args.domain)
    run = Run(args.out)
    identity_verdict(run, "domain", spec, args.tol or 1e-7)
    return run.finish("check")


def cmd_chain(args) -> int:
    S, doc = resolve_scenario(args.scenario, args.grid)
    run = Run(args.out)
    run.data["scenario"] = S.name
    if S.times:
        chain_pipeline(run, S, args.tol or 1e-10)
    else:
        perturb_pipeline(run, S, args.tol or 1e-10)
    return run.finish("chain")


def cmd_topo(args) -> int:
    run = Run(args.out)
    if args.mask.startswith("concentric-circles"):
        k = int(args.mask.split(":")[1]) if ":" in args.mask else 4
        K = sc.concentric_circles(k)
    else:
        K = RasterDroplet.load(args.mask)
    rep = topology_report(K, allow_pinch=args.allow_pinch)
    d = args.degree if args.degree is not None else minimal_degree(rep)
    v = check_ovals_bound(rep, d)
    run.data["topology"] = rep.to_json()
    run.add(verdict("oval inequality", v.passed, degree=d, check=v.to_json()))
    return run.finish("topo")


def _map_arg(args) -> RationalFunction:
    if args.map:
        try:
            return RationalFunction.from_json(json.loads(args.map))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"map:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    from .dynamics import random_rational

    return random_rational(np.random.default_rng(args.seed), args.degree)


def cmd_dyn(args) -> int:
    from .dynamics import critical_orbit_audit, fixed_point_search
    from .numerics import critical_points

    R = _map_arg(args)
    run = Run(args.out)
    fp = fixed_point_search(R)
    crit = critical_points(R) if R.degree >= 2 else []
    mult = sum(m for _, m in crit)
    run.data["map"] = R.to_json()
    run.data["fixed_points"] = [{"location": "infinity" if is_inf(r.location) else complex(r.location),
                                 "multiplier": r.multiplier_modulus, "kind": r.kind} for r in fp.records]
    run.add(verdict("fixed-point routes agree", fp.algebraic <= fp.multistart,
                    algebraic=fp.algebraic, multistart=fp.multistart))
    if R.degree >= 2:
        d = R.degree
        run.add(verdict("critical multiplicity", mult == 2 * d - 2, value=mult, expected=2 * d - 2))
        audit = critical_orbit_audit(R, fixed=fp.records)
        run.add(verdict("attracting fixed points captured", audit.ok,
                        attracting=len(audit.attracting), violations=len(audit.violations)))
        orbits = []
        for c, _ in crit:
            if is_inf(c):
                continue
            z, path = complex(c), [complex(c)]
            for _ in range(64):
                with np.errstate(all="ignore"):
                    z = complex(np.conj(R(z)))
                if not np.isfinite(z) or abs(z) > 1e6:
                    break
                path.append(z)
            orbits.append(np.array(path))
        pts = [r.location for r in fp.records if not is_inf(r.location)]
        run.write("orbits.svg", render_svg([orbit_layer(orbits, "critical orbits"), node_layer(pts, "fixed")],
                                           title="critical orbits"))
    return run.finish("dyn")


def cmd_render(args) -> int:
    K = RasterDroplet.load(args.mask)
    doc = render_svg([mask_layer(K, Path(args.mask).name)], title=Path(args.mask).name)
    if args.out:
        Path(args.out).write_text(doc)
    else:
        sys.stdout.write(doc)
    return 0


def cmd_run(args) -> int:
    run = Run(args.out)
    name = args.preset
    if name.startswith("concentric-circles"):
        k = int(name.split(":")[1]) if ":" in name else 4
        preset_concentric(run, args, k)
    elif name in PRESETS:
        PRESETS[name](run, args)
    else:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS) + ['concentric-circles:K']}")
    run.data["preset"] = name
    return run.finish("run")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=None, help="cells per unit length (h = 1/N)")
    common.add_argument("--tol", type=float, default=None, help="verdict / solver tolerance")
    common.add_argument("--out", default=None, help="output directory for artifacts")
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="qdlab", description="Quadrature domains and Hele-Shaw droplets.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("domain", parents=[common], help="quadrature data of a domain")
    s.add_argument("domain", help="gallery name, 'poly3' or domain JSON")
    s.set_defaults(func=cmd_domain)

    s = sub.add_parser("check", parents=[common], help="quadrature identity check")
    s.add_argument("domain")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("chain", parents=[common], help="Hele-Shaw chain or perturbation of a droplet")
    s.add_argument("--scenario", required=True, help="scenario JSON file or builder name")
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("topo", parents=[common], help="topology report of a saved mask")
    s.add_argument("mask", help="mask stem (stem.pgm + stem.json) or concentric-circles:K")
    s.add_argument("--degree", type=int, default=None)
    s.add_argument("--allow-pinch", action="store_true")
    s.set_defaults(func=cmd_topo)

    s = sub.add_parser("dyn", parents=[common], help="fixed points and critical orbits of z -> conj(R(z))")
    s.add_argument("--map", default=None, help='RationalFunction JSON {"num": [...], "den": [...]}')
    s.add_argument("--degree", type=int, default=2, help="degree of a random map (with --seed)")
    s.set_defaults(func=cmd_dyn)

    s = sub.add_parser("render", parents=[common], help="SVG of a saved mask")
    s.add_argument("mask")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("run", parents=[common], help="named preset")
    s.add_argument("preset")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QdlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
