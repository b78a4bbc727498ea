"""Command-line front end.

Subcommands: ``solve``, ``operator-eval``, ``verify``, ``green``,
``fit-decay``.  Global flags: ``--config <path>`` (TOML or JSON, chosen by
extension), ``--out <dir>``, ``--threads <k>``, ``--strict``,
``--seed <int>``.  Exit codes: 0 success, 1 verification failure, 2
usage/config error, 3 numerical failure.

CSV output uses 17-significant-digit scientific notation so downstream
pipelines can diff files exactly; ``report.json`` embeds the fully resolved
configuration so a run can be reproduced from its own report.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, solver
from .discretization import p1_basis
from .domain import Disk, DiskMesh, FracParams, Interval, IntervalMesh, graded_mesh
from .funcexpr import ParseError, parse
from .gridfn import GridFunction
from .operators import eval_pv, phi

__all__ = ["main", "RunConfig"]

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_PROBLEM_KINDS = ("classical", "weak_l2", "very_weak", "nonzero_boundary")
_KNOWN_CHECKS = (
    "ibp",
    "decay",
    "phi_bound",
    "hardy",
    "poincare",
    "green",
    "constant_annihilation",
    "normal_derivative",
)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated run configuration; ``raw`` keeps the resolved dictionary."""

    alpha: float
    domain: object
    mesh_n: int
    mesh_q: float
    problem_kind: str | None
    problem: dict
    checks: list = field(default_factory=list)
    output_dir: str = "."
    seed: int = 0
    n_angles: int | None = None
    raw: dict = field(default_factory=dict)

    @property
    def params(self) -> FracParams:
        return FracParams(self.alpha, dim=self.domain.dim)

    def build_mesh(self):
        kwargs = {}
        if isinstance(self.domain, Disk) and self.n_angles:
            kwargs["n_angles"] = self.n_angles
        return graded_mesh(self.domain, self.mesh_n, self.mesh_q, **kwargs)


def _load_raw(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    if p.suffix == ".toml":
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    if p.suffix == ".json":
        with open(p) as fh:
            return json.load(fh)
    raise ConfigError(f"config must be .toml or .json, got {p.suffix!r}")


def parse_config(raw: dict, *, require_problem: bool = True) -> RunConfig:
    alpha = raw.get("alpha")
    if not isinstance(alpha, (int, float)) or not 0.5 < alpha < 1.0:
        raise ConfigError(
            f"alpha must lie in the open interval (1/2, 1); got {alpha!r}"
        )
    dom_spec = raw.get("domain", {"shape": "interval", "a": -1.0, "b": 1.0})
    shape = dom_spec.get("shape", "interval")
    if shape == "interval":
        domain = Interval(float(dom_spec.get("a", -1.0)), float(dom_spec.get("b", 1.0)))
    elif shape == "disk":
        center = dom_spec.get("center", [0.0, 0.0])
        domain = Disk((float(center[0]), float(center[1])),
                      float(dom_spec.get("radius", 1.0)))
    else:
        raise ConfigError(f"unknown domain shape {shape!r}")
    mesh_spec = raw.get("mesh", {})
    mesh_n = int(mesh_spec.get("n", 64))
    mesh_q = float(mesh_spec.get("q", 2.0))
    n_angles = mesh_spec.get("n_angles")

    present = [k for k in _PROBLEM_KINDS if k in raw]
    if require_problem and len(present) != 1:
        raise ConfigError(
            f"exactly one problem section of {_PROBLEM_KINDS} is required; "
            f"found {present or 'none'}"
        )
    kind = present[0] if present else None
    problem = dict(raw.get(kind, {})) if kind else {}
    if kind == "very_weak":
        # atoms are rows [x, weight] on an interval, [x, y, weight] on a disk
        for atom in problem.get("atoms", []):
            if len(atom) != domain.dim + 1:
                raise ConfigError(
                    f"atom rows need {domain.dim + 1} entries (location, weight)"
                )
            pt = atom[0] if domain.dim == 1 else np.asarray(atom[:2], dtype=float)
            if not domain.contains(pt):
                raise ConfigError(f"measure atom at {atom[:-1]} lies outside the domain")

    cfg = RunConfig(
        alpha=float(alpha),
        domain=domain,
        mesh_n=mesh_n,
        mesh_q=mesh_q,
        problem_kind=kind,
        problem=problem,
        checks=list(raw.get("checks", [])),
        output_dir=str(raw.get("output_dir", ".")),
        seed=int(raw.get("seed", 0)),
        n_angles=int(n_angles) if n_angles else None,
        raw=raw,
    )
    return cfg


def _parse_expr(text, name):
    if text is None:
        raise ConfigError(f"missing expression {name!r}")
    try:
        return parse(str(text))
    except ParseError as exc:
        raise ConfigError(f"cannot parse {name}={text!r}: {exc}") from exc


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def _write_csv(path: Path, header: list, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_svg(path: Path, xs, ys, xlabel: str, ylabel: str) -> None:
    """Minimal self-contained SVG line plot."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[keep], ys[keep]
    W, H, pad = 640, 400, 50
    if len(xs) < 2:
        path.write_text(f'<svg xmlns="http://www.w3.org/2000/svg" '
                        f'width="{W}" height="{H}"/>\n')
        return
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    sx = (W - 2 * pad) / (x1 - x0 if x1 > x0 else 1.0)
    sy = (H - 2 * pad) / (y1 - y0 if y1 > y0 else 1.0)
    pts = " ".join(
        f"{pad + (x - x0) * sx:.2f},{H - pad - (y - y0) * sy:.2f}"
        for x, y in zip(xs, ys)
    )
    path.write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">\n'
        f'<rect width="{W}" height="{H}" fill="white"/>\n'
        f'<polyline points="{pts}" fill="none" stroke="steelblue" '
        f'stroke-width="1.5"/>\n'
        f'<text x="{W // 2}" y="{H - 10}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>\n'
        f'<text x="15" y="{H // 2}" font-size="13" '
        f'transform="rotate(-90 15 {H // 2})" text-anchor="middle">{ylabel}</text>\n'
        f"</svg>\n"
    )


def _solve_from_config(cfg: RunConfig):
    mesh = cfg.build_mesh()
    basis = p1_basis(mesh)
    params = cfg.params
    kind, prob = cfg.problem_kind, cfg.problem
    if kind == "classical":
        f = _parse_expr(prob.get("f"), "classical.f")
        return solver.solve_classical(f, mesh, basis, params), mesh
    if kind == "weak_l2":
        f = _parse_expr(prob.get("f"), "weak_l2.f")
        return solver.solve_weak_l2(f, mesh, basis, params), mesh
    if kind == "very_weak":
        dim = cfg.domain.dim
        atoms = [
            (a[0] if dim == 1 else tuple(a[:2]), a[-1])
            for a in prob.get("atoms", [])
        ]
        density = prob.get("density")
        density = _parse_expr(density, "very_weak.density") if density else None
        mu = solver.MeasureData(atoms=atoms, density=density, mesh=mesh,
                                params=params)
        return solver.solve_very_weak(mu, mesh, basis, params), mesh
    if kind == "nonzero_boundary":
        f = _parse_expr(prob.get("f"), "nonzero_boundary.f")
        g = _parse_expr(prob.get("g"), "nonzero_boundary.g")
        return solver.solve_nonzero_boundary(f, g, mesh, basis, params), mesh
    raise ConfigError("no problem section in config")


def cmd_solve(cfg: RunConfig, out: Path, strict: bool) -> int:
    try:
        report, mesh = _solve_from_config(cfg)
    except ConfigError:
        raise
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rho = mesh.rho_nodes()
    u = report.solution.coeffs
    if isinstance(mesh, IntervalMesh):
        header = ["x", "rho", "u"]
        rows = np.column_stack([mesh.nodes, rho, u])
        xplot = mesh.nodes
    else:
        header = ["x", "y", "rho", "u"]
        rows = np.column_stack([mesh.nodes, rho, u])
        xplot = rho
    _write_csv(out / "solution.csv", header, rows)
    (out / "report.json").write_text(report.to_json(config=cfg.raw))
    _write_svg(out / "solution.svg", xplot, u,
               "x" if isinstance(mesh, IntervalMesh) else "rho", "u")
    with np.errstate(divide="ignore"):
        _write_svg(out / "decay.svg", np.log(rho), np.log(np.abs(u)),
                   "log rho", "log |u|")
    return EXIT_OK


def cmd_operator_eval(cfg: RunConfig, out: Path, strict: bool) -> int:
    raw = cfg.raw.get("operator_eval", {})
    expr = _parse_expr(raw.get("expr"), "operator_eval.expr")
    domain = cfg.domain
    if not isinstance(domain, Interval):
        raise ConfigError("operator-eval supports interval domains")
    pts = raw.get("points")
    if pts is None:
        npts = int(raw.get("n_points", 9))
        a, b = domain.a, domain.b
        margin = 0.1 * (b - a) / 2.0
        pts = list(np.linspace(a + margin, b - margin, npts))
    params = cfg.params
    rows = []
    all_converged = True
    for x in pts:
        x = float(x)
        if not domain.contains(x):
            raise ConfigError(f"evaluation point {x} lies outside the domain")
        res = eval_pv(expr, x, params, domain)
        rows.append((x, res.value, res.err_est, phi(x, params, domain)))
        all_converged = all_converged and res.converged
    _write_csv(out / "operator.csv", ["x", "pv_value", "err_est", "phi"], rows)
    if strict and not all_converged:
        print("error: principal-value extrapolation did not converge",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _run_check(name: str, cfg: RunConfig, rng: np.random.Generator) -> list:
    mesh = cfg.build_mesh()
    basis = p1_basis(mesh)
    params = cfg.params
    meta = {"alpha": cfg.alpha, "n": cfg.mesh_n, "q": cfg.mesh_q}
    if name == "ibp":
        if not isinstance(mesh, IntervalMesh):
            raise ConfigError("check 'ibp' needs an interval domain")
        x = mesh.nodes
        worst = 0.0
        for _ in range(5):
            c = rng.normal(size=8)
            u = GridFunction(mesh, (c[0] * np.sin(np.pi * x) + c[1] * np.cos(2 * x)
                                    + c[2] * x**2 + c[3]) * (1 - x**2))
            v = GridFunction(mesh, (c[4] * np.sin(np.pi * x) + c[5] * np.cos(2 * x)
                                    + c[6] * x**2 + c[7]) * (1 - x**2))
            rep = analysis.ibp_check(u, v, mesh, basis, params)
            scale = max(abs(rep.lhs), abs(rep.bilinear), abs(rep.rhs))
            worst = max(worst, rep.max_pairwise_gap / scale)
        return [analysis.verdict("ibp", meta, worst, 0.02, worst <= 0.02)]
    if name == "decay":
        f = parse("1")
        rep = solver.solve_classical(f, mesh, basis, params) \
            if isinstance(mesh, IntervalMesh) \
            else solver.solve_weak_l2(f, mesh, basis, params)
        rho = mesh.rho_nodes()
        window = (3.0 * float(rho.min()), 0.1 * mesh.domain.diameter)
        fit = analysis.decay_fit(rep.solution, window)
        err = abs(fit.exponent - params.beta)
        return [analysis.verdict("decay", {**meta, "exponent": fit.exponent},
                                 err, 0.1, err <= 0.1)]
    if name == "phi_bound":
        lo, hi = analysis.phi_bound_check(mesh, params)
        ok = lo > 0 and math.isfinite(hi)
        return [
            analysis.verdict("phi_bound_lower", meta, lo, 0.0, lo > 0),
            analysis.verdict("phi_bound_upper", meta, hi, math.inf, ok),
        ]
    if name == "hardy":
        if not isinstance(mesh, IntervalMesh):
            raise ConfigError("check 'hardy' needs an interval domain")
        q = analysis.hardy_quotient(mesh, basis, params)
        return [analysis.verdict("hardy", meta, q, 0.0, q > 0)]
    if name == "poincare":
        cP = analysis.poincare_constant(mesh, basis, params)
        return [analysis.verdict("poincare", meta, cP, 0.0,
                                 cP > 0 and math.isfinite(cP))]
    if name == "green":
        G = solver.green_matrix(mesh, basis, params)
        ratio, _table = analysis.green_bound_check(G, mesh, params)
        sym = float(np.max(np.abs(G.K - G.K.T)))
        scale = float(np.max(np.abs(G.K)))
        return [
            analysis.verdict("green_ratio_sup", meta, ratio, math.inf,
                             math.isfinite(ratio)),
            analysis.verdict("green_symmetry", meta, sym, 1e-10 * scale,
                             sym <= 1e-10 * scale),
        ]
    if name == "constant_annihilation":
        if not isinstance(mesh, IntervalMesh):
            raise ConfigError("check 'constant_annihilation' needs an interval")
        one = parse("1")
        pts = mesh.domain.a + (mesh.domain.b - mesh.domain.a) * rng.uniform(
            0.1, 0.9, size=10
        )
        worst = max(abs(eval_pv(one, float(x), params, mesh.domain).value)
                    for x in pts)
        return [analysis.verdict("constant_annihilation", meta, worst, 1e-10,
                                 worst <= 1e-10)]
    if name == "normal_derivative":
        if not isinstance(mesh, IntervalMesh):
            raise ConfigError("check 'normal_derivative' needs an interval")
        dom = mesh.domain
        prof = lambda x: np.minimum(np.asarray(x) - dom.a, dom.b - np.asarray(x)) \
            ** params.beta
        val, conv = analysis.frac_normal_derivative(prof, dom.b, params, dom)
        err = abs(val + 1.0)
        return [analysis.verdict("normal_derivative", meta, err, 1e-3,
                                 conv and err <= 1e-3)]
    raise ConfigError(f"unknown check {name!r}; known checks: {_KNOWN_CHECKS}")


def cmd_verify(cfg: RunConfig, out: Path, strict: bool) -> int:
    if not cfg.checks:
        raise ConfigError("empty checks list: nothing to verify")
    for name in cfg.checks:
        if name not in _KNOWN_CHECKS:
            raise ConfigError(
                f"unknown check {name!r}; known checks: {_KNOWN_CHECKS}"
            )
    rng = np.random.default_rng(cfg.seed)
    verdicts = []
    for name in cfg.checks:
        verdicts.extend(_run_check(name, cfg, rng))
    (out / "verdicts.json").write_text(json.dumps(verdicts, indent=2))
    if not all(v["pass"] for v in verdicts):
        failed = [v["check"] for v in verdicts if not v["pass"]]
        print(f"verification failed: {failed}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_green(cfg: RunConfig, out: Path, strict: bool) -> int:
    mesh = cfg.build_mesh()
    basis = p1_basis(mesh)
    params = cfg.params
    G = solver.green_matrix(mesh, basis, params)
    ratio_sup, table = analysis.green_bound_check(G, mesh, params)
    with open(out / "green_table.csv", "w") as fh:
        fh.write("i,j,kernel,bound,ratio\n")
        for i, j, kern, bound, ratio in table:
            fh.write(f"{int(i)},{int(j)},{_fmt(kern)},{_fmt(bound)},{_fmt(ratio)}\n")
    sym = float(np.max(np.abs(G.K - G.K.T)))
    summary = {
        "ratio_sup": ratio_sup,
        "symmetry_gap": sym,
        "rows": int(table.shape[0]),
        "finite": bool(math.isfinite(ratio_sup)),
    }
    (out / "green_summary.json").write_text(json.dumps(summary, indent=2))
    return EXIT_OK if summary["finite"] else EXIT_VERIFY


def cmd_fit_decay(cfg: RunConfig, out: Path, strict: bool) -> int:
    try:
        report, mesh = _solve_from_config(cfg)
    except ConfigError:
        raise
    except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    rho = mesh.rho_nodes()
    spec = cfg.raw.get("fit", {})
    window = tuple(spec.get("window",
                            (3.0 * float(rho.min()), 0.1 * mesh.domain.diameter)))
    try:
        fit = analysis.decay_fit(report.solution, window)
    except ValueError as exc:
        print(f"error: decay fit failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    payload = {
        "exponent": fit.exponent,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "fit_window": list(fit.fit_window),
        "points_used": fit.points_used,
        "beta": cfg.params.beta,
    }
    (out / "decay.json").write_text(json.dumps(payload, indent=2))
    return EXIT_OK


_COMMANDS = {
    "solve": (cmd_solve, True),
    "operator-eval": (cmd_operator_eval, False),
    "verify": (cmd_verify, False),
    "green": (cmd_green, False),
    "fit-decay": (cmd_fit_decay, True),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="regfrac",
        description="Numerical workbench for the regional fractional "
                    "Laplacian on intervals and disks.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML or JSON config")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--strict", action="store_true")
    parser.add_argument("--seed", type=int, default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    if args.threads is not None:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(limits=max(1, args.threads))
        except ImportError:
            pass  # single linear-algebra backend default

    handler, needs_problem = _COMMANDS[args.command]
    try:
        raw = _load_raw(args.config)
        cfg = parse_config(raw, require_problem=needs_problem)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.raw["seed"] = args.seed
        out = Path(args.out if args.out is not None else cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        cfg.raw["output_dir"] = str(out)
        return handler(cfg, out, args.strict)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        print(f"error: cannot parse config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
