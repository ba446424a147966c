"""hodgelab command line: spectra, inequality checks, convergence tables, meshes.

Exit codes: 0 success / check passed, 1 check failed, 2 usage error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

CHECKS = (
    "friedlander",
    "rohleder",
    "prop51",
    "conjecture",
    "freitas",
    "base_estimate",
    "top_shift",
    "curl_curl",
    "alternating_sum",
)

FEEC_DOMAINS = ("square", "rectangle_sqrt2", "cube", "disc", "annulus", "l_shape", "disc_g", "ball3d")

DEFAULTS = {
    "domain": None,
    "method": "oracle",
    "bc": "dirichlet",
    "route": "primal",
    "count": 20,
    "refine": 3,
    "levels": 3,
    "resolution": None,
    "genus": 2,
    "check": None,
    "indices": "1..10",
    "shift": None,
    "k": None,
    "margin": None,
    "quantity": "neumann",
    "format": "json",
    "output": None,
    "seed": 0,
}


class UsageError(Exception):
    pass


def _apply_threads():
    n = os.environ.get("HODGELAB_THREADS", "0")
    try:
        n = int(n)
    except ValueError:
        raise UsageError(f"HODGELAB_THREADS must be an integer, got {n!r}")
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def build_parser():
    p = argparse.ArgumentParser(prog="hodgelab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hodgelab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--config", help="JSON file with option values; flags override it")
        sp.add_argument("--domain", default=None)
        sp.add_argument("--refine", type=int, default=None, help="refinement level of the finest mesh")
        sp.add_argument("--resolution", type=int, default=None, help="base mesh resolution (disc, annulus, ball)")
        sp.add_argument("--genus", type=int, default=None, help="number of holes for disc_g")
        sp.add_argument("--output", "-o", default=None)
        if fmt:
            sp.add_argument("--format", choices=("json", "csv", "md"), default=None)

    s = sub.add_parser("spectrum", help="eigenvalues of one operator")
    common(s)
    s.add_argument("--method", choices=("oracle", "feec"), default=None)
    s.add_argument("--bc", choices=("dirichlet", "neumann", "curl_curl"), default=None)
    s.add_argument("--route", choices=("primal", "top_form"), default=None)
    s.add_argument("--count", type=int, default=None)

    v = sub.add_parser("verify", help="run an inequality or identity check")
    common(v)
    v.add_argument("--check", choices=CHECKS, default=None)
    v.add_argument("--method", choices=("oracle", "feec"), default=None)
    v.add_argument("--indices", default=None, help="index range such as 1..30")
    v.add_argument("--shift", type=int, default=None, help="override the shift of conjecture/freitas checks")
    v.add_argument("--k", type=int, default=None, help="form degree for base_estimate")
    v.add_argument("--margin", type=float, default=None, help="relative margin for discrete data")
    v.add_argument("--levels", type=int, default=None, help="levels of the margin convergence study")
    v.add_argument("--seed", type=int, default=None)

    c = sub.add_parser("converge", help="eigenvalues under uniform refinement")
    common(c)
    c.add_argument("--quantity", choices=("neumann", "dirichlet", "dirichlet_top", "curl_curl"), default=None)
    c.add_argument("--levels", type=int, default=None)
    c.add_argument("--count", type=int, default=None)

    m = sub.add_parser("mesh", help="write a mesh as JSON")
    common(m, fmt=False)
    return p


def resolve(args):
    """Merge defaults, the optional JSON config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}")
        unknown = set(loaded) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    if not cfg["domain"]:
        raise UsageError("--domain is required")
    if cfg["count"] < 1:
        raise UsageError("count must be >= 1")
    return {k: cfg[k] for k in ["command"] + sorted(DEFAULTS)}


def parse_indices(text):
    text = str(text)
    try:
        if ".." in text:
            a, b = text.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse indices {text!r}; use a..b or a,b,c")
    if not out or min(out) < 1:
        raise UsageError("indices must be >= 1")
    return out


# ---------------------------------------------------------------------------
# domain helpers


def domain_spec(cfg, level=None):
    from .mesh import DomainSpec

    name = cfg["domain"]
    level = cfg["refine"] if level is None else level
    res = cfg["resolution"]
    if level < 0:
        raise UsageError("refinement level must be >= 0")
    if name == "square":
        return DomainSpec.rectangle(1.0, 1.0, level)
    if name == "rectangle_sqrt2":
        return DomainSpec.rectangle(1.0, math.sqrt(2.0), level)
    if name == "cube":
        return DomainSpec.box(level=level)
    if name == "disc":
        return DomainSpec.disc(resolution=res or 6, level=level)
    if name == "annulus":
        return DomainSpec.annulus(resolution=res or 16, level=level)
    if name == "l_shape":
        return DomainSpec.l_shape(level=level)
    if name == "disc_g":
        return DomainSpec.disc_with_g_holes(cfg["genus"], level=level)
    if name == "ball3d":
        return DomainSpec.ball(resolution=res or 2, level=level)
    if name == "ball4d":
        raise UsageError("meshes are limited to d <= 3; use --method oracle for ball4d")
    raise UsageError(f"unknown feec domain {name!r}; choose from {FEEC_DOMAINS}")


def oracle_domain(cfg):
    from .oracle import DOMAIN_DIM

    if cfg["domain"] not in DOMAIN_DIM:
        raise UsageError(f"no closed-form spectrum for {cfg['domain']!r}; choose from {sorted(DOMAIN_DIM)}")
    return cfg["domain"], DOMAIN_DIM[cfg["domain"]]


def oracle_spectrum(name, bc, count):
    from .oracle import DOMAINS

    return DOMAINS[name](bc, count)


def _mesh(cfg, level=None):
    from .mesh import generate

    return generate(domain_spec(cfg, level))


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg):
    if cfg["method"] == "oracle":
        name, _ = oracle_domain(cfg)
        if cfg["bc"] == "curl_curl":
            raise UsageError("curl_curl spectra are only available with --method feec")
        lab = oracle_spectrum(name, cfg["bc"], cfg["count"])
        payload = lab.to_dict()
        payload["values"] = payload["values"][: cfg["count"]]
        payload["labels"] = payload["labels"][: cfg["count"]]
        return payload, EXIT_OK
    from . import feec

    mesh = _mesh(cfg)
    if cfg["bc"] == "neumann":
        s = feec.neumann_spectrum(mesh, cfg["count"])
    elif cfg["bc"] == "dirichlet":
        s = feec.dirichlet_spectrum(mesh, cfg["count"], cfg["route"])
    else:
        s = feec.curl_curl_spectrum(mesh, cfg["count"])
    payload = {
        "domain": cfg["domain"],
        "bc": cfg["bc"],
        "values": s.values[: cfg["count"]].tolist(),
        "mesh_counts": list(mesh.counts),
        "h": mesh.max_edge_length(),
    }
    return payload, EXIT_OK


def _study_margin(cfg, quantities):
    from .verify import convergence_study

    if cfg["margin"] is not None:
        return cfg["margin"], {}
    levels = cfg["levels"]
    start = cfg["refine"] - levels + 1
    if levels < 2 or start < 0:
        raise UsageError(f"margin study needs >= 2 levels ending at --refine {cfg['refine']}")
    tables = {}
    for q, n in quantities:
        tables[q] = convergence_study(domain_spec(cfg, start), levels, q, n)
    margin = max(t.margin for t in tables.values())
    if margin >= 1:
        raise UsageError(f"estimated relative discretisation error {margin:.3g} is too large; raise --refine")
    return margin, {q: t.to_dict() for q, t in tables.items()}


def cmd_verify(cfg):
    from . import feec, verify
    from .hilbert_complex import laplacian_spectrum
    from .spectrum import Spectrum

    check = cfg["check"]
    if check is None:
        raise UsageError("--check is required")
    js = parse_indices(cfg["indices"])
    jmax = max(js)
    extra = {}
    oracle = cfg["method"] == "oracle"
    if oracle:
        name, d = oracle_domain(cfg)
    else:
        spec = domain_spec(cfg)
        d = spec.dimension

    shift_checks = {"friedlander", "rohleder", "prop51", "conjecture", "freitas"}
    if check in shift_checks:
        if check == "friedlander":
            rule = verify.ShiftRule("constant", 1)
        elif check == "rohleder":
            rule = verify.ShiftRule("constant", 2)
        elif check == "conjecture":
            rule = verify.ShiftRule("conjecture", d if cfg["shift"] is None else cfg["shift"])
        elif check == "freitas":
            rule = verify.ShiftRule("freitas", d) if cfg["shift"] is None else verify.ShiftRule("constant", cfg["shift"])
        else:
            chi = 1 if oracle else _mesh(cfg).euler_characteristic()
            rule = verify.ShiftRule("chi_plus_multiplicity", chi)
        if cfg["shift"] is not None and check not in ("conjecture", "freitas"):
            raise UsageError("--shift only applies to conjecture and freitas checks")
        from .oracle import freitas_shift

        top = max(freitas_shift(max(d, 2), jmax)[1], d + 1) if check == "freitas" else d + 1
        ncount = jmax + top + (cfg["shift"] or 0) + 12
        if oracle:
            N = oracle_spectrum(name, "neumann", ncount).spectrum()
            D = oracle_spectrum(name, "dirichlet", jmax + 2).spectrum()
            margin = None
        else:
            mesh = _mesh(cfg)
            N = feec.neumann_spectrum(mesh, ncount)
            D = feec.dirichlet_spectrum(mesh, jmax + 2, "primal")
            # only the eigenvalues that enter the comparison need an error estimate
            margin, extra = _study_margin(cfg, [("neumann", jmax + top + (cfg["shift"] or 0) + 1), ("dirichlet", jmax)])
        report = verify.check_shift(N, D, rule, js, margin, cfg["domain"])
        return report, extra

    if check == "curl_curl":
        if oracle:
            if name != "disc":
                raise UsageError("closed-form curl curl data exist for the disc only")
            neu = oracle_spectrum(name, "neumann", 2 * jmax + 12).spectrum()
            C = Spectrum(neu.values[1:], neu.cluster_tol, neu.reliable_max, "curl_curl/disc")
            D = oracle_spectrum(name, "dirichlet", jmax + 2).spectrum()
            from .oracle import disc_bundle_2d

            bundle = disc_bundle_2d(4 * jmax + 20)
            probes = verify.lambda_grid(D, jmax)
            return verify.check_curl_curl(C, D, 2, js, None, name, bundle, probes), extra
        mesh = _mesh(cfg)
        need = (d - 1) * jmax + 8
        C = feec.curl_curl_spectrum(mesh, need)
        D = feec.dirichlet_spectrum(mesh, jmax + 2, "primal")
        margin, extra = _study_margin(cfg, [("curl_curl", (d - 1) * jmax + 1), ("dirichlet", jmax)])
        return verify.check_curl_curl(C, D, d, js, margin, cfg["domain"]), extra

    # bundle-based checks
    if oracle:
        if name != "disc":
            raise UsageError("closed-form Hodge bundles exist for the disc only")
        from .oracle import disc_bundle_2d

        bundle = disc_bundle_2d(6 * jmax + 40)
        margin = None
    else:
        mesh = _mesh(cfg)
        bundle = feec.full_bundle(mesh)
        margin = None
    Dsp = laplacian_spectrum(bundle, bundle.d)
    grid = verify.lambda_grid(Dsp, jmax)
    if check == "alternating_sum":
        report = verify.check_alternating_sum(bundle, grid, cfg["domain"])
        report.notes.append(f"chi = {bundle.chi}, betti = {list(bundle.betti)}")
        return report, extra
    if not oracle:
        margin, extra = _study_margin(
            cfg, [("neumann", 2 * jmax + 4), ("dirichlet_top", jmax + 1)]
        )
    if check == "base_estimate":
        k = bundle.d - 1 if cfg["k"] is None else cfg["k"]
        if not 0 <= k <= bundle.d:
            raise UsageError(f"--k must lie in 0..{bundle.d}")
        return verify.check_base_estimate(bundle, k, grid, margin, cfg["domain"]), extra
    if check == "top_shift":
        return verify.check_top_shift(bundle, grid, margin, cfg["domain"]), extra
    raise UsageError(f"unknown check {check!r}")


def cmd_converge(cfg):
    from .verify import convergence_study

    levels = cfg["levels"]
    if levels < 2:
        raise UsageError("a convergence study needs at least 2 levels")
    start = cfg["refine"] - levels + 1
    if start < 0:
        raise UsageError(f"--refine {cfg['refine']} is too coarse for {levels} levels")
    reference = _reference(cfg, cfg["quantity"], cfg["count"])
    return convergence_study(domain_spec(cfg, start), levels, cfg["quantity"], cfg["count"], reference)


def _reference(cfg, quantity, count):
    from .oracle import DOMAINS

    name = cfg["domain"]
    if name not in DOMAINS or quantity == "curl_curl":
        return None
    bc = "neumann" if quantity == "neumann" else "dirichlet"
    return DOMAINS[name](bc, count).values[:count]


def _header(cfg):
    return {"tool": "hodgelab", "version": __version__, "config": cfg}


def _write(cfg, text):
    if cfg["output"]:
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(cfg, body, render=None):
    """JSON embeds the config; CSV and Markdown carry it in a leading comment."""
    fmt = cfg.get("format", "json")
    if fmt == "json" or render is None:
        return json.dumps({**_header(cfg), **body}, indent=2) + "\n"
    head = json.dumps(_header(cfg), sort_keys=True)
    if fmt == "csv":
        return f"# {head}\n" + render(fmt)
    return f"<!-- {head} -->\n\n" + render(fmt)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_threads()
        cfg = resolve(args)
        from .errors import HodgeLabError, RangeError, UnsupportedError
        from .verify import MarginRequiredError

        try:
            if cfg["command"] == "mesh":
                mesh = _mesh(cfg)
                _write(cfg, mesh.to_json() + "\n")
                return EXIT_OK
            if cfg["command"] == "spectrum":
                payload, code = cmd_spectrum(cfg)
                if cfg["format"] == "json":
                    text = _render(cfg, {"spectrum": payload})
                else:
                    rows = list(enumerate(payload["values"], start=1))
                    if cfg["format"] == "csv":
                        body = "j,value\n" + "".join(f"{j},{v:.12g}\n" for j, v in rows)
                    else:
                        body = "| j | value |\n|---|---|\n" + "".join(f"| {j} | {v:.12g} |\n" for j, v in rows)
                    text = _render(cfg, {}, lambda fmt: body)
                _write(cfg, text)
                return code
            if cfg["command"] == "verify":
                report, studies = cmd_verify(cfg)
                body = {"report": report.to_dict()}
                if studies:
                    body["margin_studies"] = studies
                _write(cfg, _render(cfg, body, report.render))
                return EXIT_OK if report.passed else EXIT_FAIL
            if cfg["command"] == "converge":
                table = cmd_converge(cfg)
                _write(cfg, _render(cfg, {"convergence": table.to_dict()}, table.render))
                return EXIT_OK
        except (UnsupportedError, MarginRequiredError, RangeError) as exc:
            raise UsageError(str(exc))
        except HodgeLabError as exc:
            print(f"hodgelab: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    except UsageError as exc:
        print(f"hodgelab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
