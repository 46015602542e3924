"""Batch command line: ``magbloch {check-conditions,bands,thomas,verify}``.

A run is described by one INI-style config file (see README for the full
grammar).  Reports are JSON with sorted keys; CSV values carry 17
significant digits, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .conditions import AveragingMeasure, check_conditions, search_gamma, validate_measure
from .dirac import admissible_thomas_k, check_projection_identities, clifford_rep, theorem31_probe, verify_dirac_square
from .fiber import FiberPoint, PlaneWaveBasis
from .lattice import DirectionFrame, build_lattice
from .potential import TrigPolynomial, fourier_coefficients, read_coefficients, read_grid
from .spectrum import band_structure, flat_band_scan, fmt, path_from_fractional, pmap, thomas_probe
from .verify import annulus_cutoff, probe_bernstein, probe_lemma11, probe_relative_bound, probe_thm11, probe_thm12

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_CONTRACT = 0, 1, 2, 3

PROBES = ("thm12", "lemma11", "bernstein", "relative_bound", "thm11", "dirac_square", "projections", "thm31")

# checks that are identities or proven bounds on the truncation; a failure
# is a contract violation.  Monotonicity checks are empirical and only reported.
HARD_CHECKS = ("finite", "gamma_bound", "sup_form_identity")
DIRAC_TOL = 1e-9
SANDWICH_TOL = 1e-12
NORM_LAW_TOL = 1e-10


class ConfigError(ValueError):
    pass


# value parsing -------------------------------------------------------------------


def parse_number(text: str) -> float:
    """A float, optionally a product like ``2pi*4`` or ``pi/2``."""
    text = text.strip().replace(" ", "")
    if not text:
        raise ConfigError("empty number")
    value, op, token = 1.0, "*", ""
    for ch in text + "*":
        if ch in "*/" and token:
            if token.endswith("pi"):
                head = token[:-2]
                num = (float(head) if head not in ("", "+", "-") else float(head + "1")) * np.pi
            else:
                num = float(token)
            value = value * num if op == "*" else value / num
            op, token = ch, ""
        else:
            token += ch
    return value


def parse_vector(text: str) -> list[float]:
    try:
        return [parse_number(t) for t in text.split()]
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None


def parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(";") if t.strip()]


@dataclass
class RunConfig:
    lattice: object
    A: TrigPolynomial
    V: TrigPolynomial
    V2: TrigPolynomial
    cutoff: float
    gamma: tuple | None
    gamma_search: int
    measure: AveragingMeasure
    x_grid: tuple | None
    sphere_points: int
    path: list
    segment_points: int
    flat_tol: float
    kappas: list
    lambdas: list
    k: list | None
    seed: int = 0
    battery: int = 64
    verify: dict = field(default_factory=dict)
    out: Path = Path("out")


def _field(text: str, lat, d: int, base: Path, grid_cutoff: float) -> TrigPolynomial:
    kind, _, body = text.partition(":")
    kind, body = kind.strip().lower(), body.strip()
    if kind == "zero":
        return TrigPolynomial.zero(lat, d)
    if kind == "const":
        vals = parse_vector(body)
        if len(vals) != d:
            raise ConfigError(f"const needs {d} value(s)")
        return TrigPolynomial.constant(lat, vals if d > 1 else vals[0])
    if kind == "cos":
        total = TrigPolynomial.zero(lat, d)
        for term in parse_list(body):
            coords, _, amp = term.partition("|")
            c = [int(round(v)) for v in parse_vector(coords)]
            a = parse_vector(amp)
            if len(c) != lat.n or len(a) != d:
                raise ConfigError(f"cos term {term!r}: need {lat.n} coordinates and {d} amplitude(s)")
            total = total + TrigPolynomial.cosine(lat, c, a if d > 1 else a[0])
        return total
    if kind in ("file", "grid"):
        path = Path(body)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"referenced file does not exist: {path}")
        if kind == "file":
            return read_coefficients(path, lat, d)
        sampled = read_grid(path, lat)
        if sampled.d != d:
            raise ConfigError(f"{path}: expected {d} component(s), found {sampled.d}")
        return fourier_coefficients(sampled, grid_cutoff)
    raise ConfigError(f"unknown field source {kind!r} (use zero, const, cos, file or grid)")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read(path)
    base = path.parent

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        if default is None:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    rows = [parse_vector(r) for r in parse_list(get("lattice", "basis"))]
    lat = build_lattice(np.array(rows))
    n = lat.n
    cutoff = parse_number(get("basis", "cutoff"))
    if cutoff <= 0:
        raise ConfigError("cutoff must be positive")
    grid_cutoff = parse_number(get("potential", "grid_cutoff", "2pi*2"))
    A = _field(get("potential", "A", "zero"), lat, n, base, grid_cutoff)
    V = _field(get("potential", "V", "zero"), lat, 1, base, grid_cutoff)
    V2 = _field(get("potential", "V2", "zero"), lat, 1, base, grid_cutoff)

    gtext = get("conditions", "gamma", "search").strip()
    if gtext == "search":
        gamma = None
    else:
        gamma = tuple(int(round(v)) for v in parse_vector(gtext))
        if len(gamma) != n or not any(gamma):
            raise ConfigError("gamma must be a nonzero vector of n integers")
    mtext = get("conditions", "measure", "dirac").split()
    if mtext[0] == "dirac":
        measure = AveragingMeasure.dirac()
    elif mtext[0] == "windowed" and len(mtext) == 3:
        measure = AveragingMeasure("windowed", parse_number(mtext[1]), parse_number(mtext[2]))
    else:
        raise ConfigError("measure must be 'dirac' or 'windowed h H'")
    xg = get("conditions", "x_grid", "auto").strip()
    x_grid = None if xg == "auto" else tuple(int(v) for v in xg.split())

    k = get("thomas", "k", "auto").strip()
    verify = {
        "probes": parse_list(get("verify", "probes", "; ".join(PROBES))),
        "kappa": [parse_number(v) for v in parse_list(get("verify", "kappa", "10; 20; 40"))],
        "epsilon": [parse_number(v) for v in parse_list(get("verify", "epsilon", "0; 0.1; 0.5; 1; 2"))],
        "k_list": [parse_vector(v) for v in parse_list(get("verify", "k_list", "0 " * n))],
        "W": get("verify", "W", get("potential", "V", "zero")),
        "w_grid": int(get("verify", "w_grid", "32")),
        "bernstein": [parse_vector(v) for v in parse_list(get("verify", "bernstein", "24 6; 24 12; 48 12"))],
        "dirac_kappa": [parse_number(v) for v in parse_list(get("verify", "dirac_kappa", "0; 3; 10"))],
        "thm31_a": parse_number(get("verify", "thm31_a", "0.5")),
        "thm31_delta": parse_number(get("verify", "thm31_delta", "0.5")),
        "projection_k": get("verify", "projection_k", "auto").strip(),
        "projection_kappa": parse_number(get("verify", "projection_kappa", "10")),
        "lambda": parse_number(get("verify", "lambda", "0")),
        "grid_cutoff": grid_cutoff,
        "base": base,
    }
    unknown = [p for p in verify["probes"] if p not in PROBES]
    if unknown:
        raise ConfigError(f"unknown probe(s) {unknown}; choose from {list(PROBES)}")
    return RunConfig(
        lattice=lat,
        A=A,
        V=V,
        V2=V2,
        cutoff=cutoff,
        gamma=gamma,
        gamma_search=int(get("conditions", "search_max", "1")),
        measure=measure,
        x_grid=x_grid,
        sphere_points=int(get("conditions", "sphere_points", "64")),
        path=[parse_vector(v) for v in parse_list(get("bands", "path", "0 " * n))],
        segment_points=int(get("bands", "segment_points", "1")),
        flat_tol=parse_number(get("bands", "flat_tol", "1e-8")),
        kappas=[parse_number(v) for v in parse_list(get("thomas", "kappa", "5; 10; 20; 40"))],
        lambdas=[parse_number(v) for v in parse_list(get("thomas", "lambda", "0"))],
        k=None if k == "auto" else parse_vector(k),
        seed=int(get("verify", "seed", "0")),
        battery=int(get("verify", "battery", "64")),
        verify=verify,
        out=Path(get("output", "dir", "out")),
    )


# output ------------------------------------------------------------------------------


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def resolve_frame(cfg: RunConfig) -> tuple[DirectionFrame, list]:
    """The configured gamma, or the best-ranked one of a search."""
    if cfg.gamma is not None:
        return DirectionFrame.from_coords(cfg.lattice, cfg.gamma), []
    reports = search_gamma(cfg.A, cfg.lattice, cfg.gamma_search, cfg.measure, cfg.x_grid, cfg.sphere_points)
    return DirectionFrame.from_coords(cfg.lattice, reports[0].gamma_coords), reports


# commands ---------------------------------------------------------------------------


def cmd_check_conditions(cfg: RunConfig, out: Path) -> int:
    measure = validate_measure(cfg.measure)
    if cfg.gamma is not None:
        frame = DirectionFrame.from_coords(cfg.lattice, cfg.gamma)
        reports = [check_conditions(cfg.A, frame, cfg.measure, cfg.x_grid, cfg.sphere_points)]
    else:
        reports = search_gamma(cfg.A, cfg.lattice, cfg.gamma_search, cfg.measure, cfg.x_grid, cfg.sphere_points)
    best = reports[0]
    write_json(out / "conditions.json", {"best": best.to_dict(), "table": [r.to_dict() for r in reports], "measure_check": measure})
    print(f"best gamma {list(best.gamma_coords)}: theta = {fmt(best.theta)}")
    return EXIT_OK if best.theta < 1 else EXIT_HYPOTHESIS


def _path_points(cfg: RunConfig) -> np.ndarray:
    corners = np.array(cfg.path, dtype=float)
    if len(corners) < 2 or cfg.segment_points <= 1:
        return corners
    pts = [corners[0]]
    for a, b in zip(corners[:-1], corners[1:]):
        for t in np.arange(1, cfg.segment_points + 1) / cfg.segment_points:
            pts.append(a + t * (b - a))
    return np.array(pts)


def cmd_bands(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    basis = PlaneWaveBasis(cfg.lattice, cfg.cutoff)
    path = path_from_fractional(cfg.lattice, _path_points(cfg))
    bs = band_structure(cfg.A, cfg.V, basis, path, threads)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bands.csv").write_text(bs.to_csv())
    report = {"cutoff": cfg.cutoff, "basis_size": len(basis), "path": path.tolist()}
    if len(path) >= 2:
        report["flat_bands"] = flat_band_scan(bs, cfg.flat_tol)
    write_json(out / "bands.json", report)
    print(f"{len(path)} path points, {len(basis)} bands")
    return EXIT_OK


def cmd_thomas(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    frame, _ = resolve_frame(cfg)
    basis = PlaneWaveBasis(cfg.lattice, cfg.cutoff)
    V = cfg.V + cfg.V2
    runs = []
    out.mkdir(parents=True, exist_ok=True)
    for i, lam in enumerate(cfg.lambdas):
        rep = thomas_probe(cfg.A, V, lam, frame, basis, cfg.kappas, cfg.k, threads)
        (out / f"thomas_{i}.csv").write_text(rep.to_csv())
        runs.append(rep.to_dict())
        print(f"lambda = {fmt(lam)}: tail min s_min = {fmt(rep.tail_min)}")
    write_json(out / "thomas.json", {"cutoff": cfg.cutoff, "basis_size": len(basis), "runs": runs})
    return EXIT_OK if all(r["tail_min"] > 1e-3 for r in runs) else EXIT_HYPOTHESIS


def _run_probe(name: str, cfg: RunConfig, seed: int, frame: DirectionFrame, basis: PlaneWaveBasis) -> dict:
    v = cfg.verify
    lat = cfg.lattice
    if name == "thm12":
        W = _field(v["W"], lat, 1, v["base"], v["grid_cutoff"])
        rep = probe_thm12(W.sample((v["w_grid"],) * lat.n), W, frame, basis, v["kappa"], cfg.battery, seed, cfg.k)
        return rep.to_dict()
    if name == "lemma11":
        return probe_lemma11(cfg.V, frame, basis, v["k_list"], v["epsilon"], cfg.battery, seed).to_dict()
    if name == "relative_bound":
        return probe_relative_bound(cfg.A, basis, v["epsilon"], cfg.battery, seed).to_dict()
    if name == "thm11":
        rep = probe_thm11(cfg.A, cfg.V, cfg.V2, v["lambda"], frame, basis, v["kappa"], cfg.battery, seed, cfg.k)
        return rep.to_dict()
    if name == "bernstein":
        rows = []
        for kappa, a in v["bernstein"]:
            fiber = FiberPoint.thomas(frame, kappa, cfg.k)
            big = PlaneWaveBasis(lat, annulus_cutoff(fiber, a))
            rows.append(probe_bernstein(big, fiber, a, cfg.battery, seed).to_dict())
        passed = all(all(r["checks"].values()) for r in rows)
        return {"probe": "bernstein", "runs": rows, "checks": {"finite": passed}, "passed": passed}
    rep = clifford_rep(lat.n)
    if name == "dirac_square":
        res = [verify_dirac_square(cfg.A, FiberPoint(np.zeros(lat.n), kappa, frame), basis, rep, seed=seed)
               for kappa in v["dirac_kappa"]]
        ok = bool(max(res) < DIRAC_TOL)
        return {"probe": name, "kappa": v["dirac_kappa"], "residual": res, "checks": {"identity": ok}, "passed": ok}
    if name == "projections":
        k = None if v["projection_k"] == "auto" else parse_vector(v["projection_k"])
        if k is None:
            fiber = FiberPoint.thomas(frame, v["projection_kappa"], cfg.k or admissible_thomas_k(frame))
        else:
            fiber = FiberPoint(np.array(k), v["projection_kappa"], frame)
        res = check_projection_identities(fiber, basis, rep, seed=seed)
        ok = bool(res["sandwich"] < SANDWICH_TOL and res["norm_law"] < NORM_LAW_TOL and res["algebra"] < SANDWICH_TOL)
        return {"probe": name, **res, "checks": {"identity": ok}, "passed": ok}
    if name == "thm31":
        fibers = [FiberPoint.thomas(frame, kappa, cfg.k or admissible_thomas_k(frame)) for kappa in v["kappa"]]
        res = theorem31_probe(cfg.A, fibers, basis, rep, v["thm31_a"], v["thm31_delta"], cfg.battery, seed)
        ok = bool(np.isfinite(res["c_envelope"]))
        return {"probe": name, **res, "checks": {"finite": ok}, "passed": ok}
    raise ConfigError(f"unknown probe {name!r}")


def cmd_verify(cfg: RunConfig, out: Path, probe_names=None, seed: int | None = None, threads: int = 1) -> int:
    names = list(probe_names or cfg.verify["probes"])
    seed = cfg.seed if seed is None else seed
    frame, _ = resolve_frame(cfg)
    basis = PlaneWaveBasis(cfg.lattice, cfg.cutoff)
    results = pmap(lambda nm: _run_probe(nm, cfg, seed, frame, basis), names, threads)
    failed = []
    for name, res in zip(names, results):
        write_json(out / f"verify_{name}.json", res)
        hard = {k: c for k, c in res["checks"].items() if k in HARD_CHECKS or k == "identity"}
        if not all(hard.values()):
            failed.append(name)
    summary = {
        "seed": seed,
        "gamma": list(frame.coords),
        "cutoff": cfg.cutoff,
        "probes": {nm: {"checks": r["checks"], "passed": r["passed"]} for nm, r in zip(names, results)},
        "contract_violations": failed,
    }
    write_json(out / "verify_summary.json", summary)
    for nm, r in zip(names, results):
        print(f"{nm}: {'pass' if r['passed'] else 'FAIL'}")
    if failed:
        print(f"contract violation in: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_OK


# entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magbloch", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["check-conditions", "bands", "thomas", "verify"])
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=int, help="probe seed (overrides [verify] seed)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for independent tasks")
    parser.add_argument("--probes", help="';'-separated probe names for verify")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; 2 is reserved for hypothesis failures
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else cfg.out
        # one BLAS thread: results must not depend on the thread count
        with threadpool_limits(limits=1):
            if args.command == "check-conditions":
                return cmd_check_conditions(cfg, out)
            if args.command == "bands":
                return cmd_bands(cfg, out, args.threads)
            if args.command == "thomas":
                return cmd_thomas(cfg, out, args.threads)
            probes = parse_list(args.probes) if args.probes else None
            return cmd_verify(cfg, out, probes, args.seed, args.threads)
    except (ValueError, configparser.Error, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
