"""Command line surface: build graphs, analyze, simulate, run experiments.

Every command is deterministic given its flags and seed.  Exit codes: 0 on
success, 1 on input or validation errors, 2 when an analysis ran on a graph
with nonzero long-run drift (the centered results are still written), 3 when
a simulation refuses its preconditions.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import geometry, homogenize, simulate, svg, variational
from .errors import (DriftNotCentered, NotAPermutation, NotReversible,
                     PeriwalkError)
from .geometry import InteractionKind
from .graph import dump_graph, load_graph, save_graph

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DRIFT = 2
EXIT_SIM = 3

PATH_LENGTH_H = ("1/2", "1/4", "1/8", "1/16", "1/32", "1/64", "1/128",
                 "1/256", "1/512")
COMPARISON_H = ("1/4", "1/8", "1/16")


class _Parser(argparse.ArgumentParser):
    """Argument errors are input errors, so they exit 1 rather than 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_h(text):
    """Mesh widths arrive as fractions like 1/8 or as plain floats."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        value = float(num) / float(den)
    else:
        value = float(text)
    if value <= 0.0:
        raise ValueError(f"mesh width must be positive, got {text!r}")
    return value


def _h_label(h):
    inv = 1.0 / h
    if abs(inv - round(inv)) < 1e-9 and round(inv) >= 1:
        return f"1/{round(inv)}" if round(inv) > 1 else "1"
    return repr(float(h))


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# build

def cmd_build(args):
    if args.geometry == "square-quadrant":
        g = geometry.build_obstructed_lattice(parse_h(args.h),
                                              interaction=args.interaction)
    elif args.geometry == "diagonal":
        g = geometry.build_diagonal_lattice(
            parse_h(args.h), include_antidiagonal=args.include_antidiagonal)
    elif args.geometry == "unobstructed":
        g = geometry.build_unobstructed_lattice(parse_h(args.h),
                                                dim=args.dim)
    else:
        g = geometry.whirlpool_fixture(lambda_bar=args.lambda_bar)
    _write_text(args.output, dump_graph(g))
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args):
    g = load_graph(args.graph)
    result = homogenize.analyze(g, gauge=args.gauge, method=args.method)
    _write_text(args.output, result.to_report() + "\n")
    return EXIT_DRIFT if result.drift_centered else EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args):
    g = load_graph(args.graph)
    if args.t_end is not None:
        if args.t_end <= 0.0:
            raise ValueError("--t-end must be positive")
        grid = np.linspace(0.0, args.t_end, args.grid_points)
    else:
        grid = simulate.default_time_grid(g, n_points=args.grid_points)
    try:
        est = simulate.estimate_msd(g, grid, args.n_paths, args.seed,
                                    center=args.center, backend=args.backend,
                                    n_threads=args.threads)
    except DriftNotCentered as exc:
        print(f"error: DriftNotCentered: {exc}", file=sys.stderr)
        return EXIT_SIM
    if args.events is not None:
        events = simulate.simulate_ctmc(g, float(grid[-1]), args.seed)
        simulate.write_events_csv(args.events, events, args.seed, est.source)
    _write_text(args.output, simulate.format_msd_csv(est))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def _verify_lines(g, seed, tolerance):
    """Run the invariant battery; yields (name, status, detail) rows."""
    rows = []
    result = homogenize.analyze(g)
    drifty = result.drift_centered
    rows.append(("stationary_distribution", "pass",
                 f"min {np.min(result.pi):.3e}"))
    rows.append(("null_drift", "pass" if result.checks["null_drift"]
                 else "info", "holds" if result.checks["null_drift"]
                 else "nonzero drift, centered analysis"))
    rows.append(("detailed_balance", "info",
                 result.detailed_balance.status))

    if drifty:
        rows.append(("diffusivity_cross_check", "skipped", "nonzero drift"))
    else:
        gap = result.diagnostics["k_c_gap"]
        bound = tolerance * (1.0 + np.max(np.abs(result.C)))
        rows.append(("diffusivity_cross_check",
                     "pass" if gap <= bound else "fail",
                     f"gap {gap:.3e} bound {bound:.3e}"))

    try:
        variational.ensure_reversible(g)
        reversible = True
    except NotReversible as exc:
        reversible = False
        rows.append(("variational_suite", "skipped",
                     f"NotReversible: {exc}"))
    if reversible:
        ok = True
        details = []
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(g.n_nodes)
        lhs = variational.divergence(g, variational.apply_edge_matrix(
            g, variational.gradient(g, f)))
        rhs = homogenize.apply_generator(g, f)
        gap = float(np.max(np.abs(lhs - rhs)))
        scale = tolerance * (1.0 + float(np.max(np.abs(rhs))))
        if gap > scale:
            ok = False
        details.append(f"div_identity {gap:.3e}")
        for k in range(g.dim):
            xi = np.zeros(g.dim)
            xi[k] = 1.0
            pot = variational.potential_for_direction(g, xi)
            e_val = variational.energy(g, xi, pot.upsilon)
            quad = float(xi @ result.K @ xi)
            if abs(e_val - quad) > tolerance * (1.0 + abs(quad)):
                ok = False
            check = variational.verify_minimizer(g, xi, pot.upsilon,
                                                 n_trials=20, seed=seed)
            if not check.holds:
                ok = False
            details.append(f"energy_axis{k} {abs(e_val - quad):.3e}")
        rows.append(("variational_suite", "pass" if ok else "fail",
                     " ".join(details)))

    perms = []
    for twice_center in (0.75, 0.0):
        try:
            perms = geometry.reflection_permutations(
                g, twice_center=twice_center)
            break
        except (NotAPermutation, PeriwalkError):
            continue
    if not perms:
        rows.append(("reflection_symmetry", "skipped",
                     "no grid-compatible reflection"))
    else:
        sym = homogenize.check_symmetry_null_drift(g, perms)
        if not sym.holds:
            rows.append(("reflection_symmetry", "skipped",
                         "dynamics not symmetric under candidate reflection"))
        elif result.checks["null_drift"]:
            # symmetry on every axis forces the drift to vanish
            rows.append(("reflection_symmetry", "pass",
                         f"axes {sym.axis_holds}"))
        else:
            rows.append(("reflection_symmetry", "fail",
                         "symmetric dynamics but nonzero measured drift"))
    return rows


def cmd_verify(args):
    g = load_graph(args.graph)
    rows = _verify_lines(g, args.seed, args.tolerance)
    lines = [f"{name}: {status} ({detail})" for name, status, detail in rows]
    _write_text(args.output, "\n".join(lines) + "\n")
    failed = any(status == "fail" for _, status, _ in rows)
    return EXIT_INPUT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentConfig:
    experiment: str
    h_list: list
    n_paths: int
    t_end: float
    seed: int
    output_dir: str
    pde_reference: float = None
    backend: str = None
    threads: int = None
    tolerance: float = 1e-8

    def __post_init__(self):
        if not self.h_list:
            raise ValueError("h_list must be nonempty")
        if self.experiment == "continuous_comparison" and self.n_paths < 100:
            raise ValueError("Monte Carlo experiments need n_paths >= 100")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")


def _scalar_diffusivity(C, tolerance, allow_offdiag=False):
    """Collapse a 2x2 diffusivity to its first diagonal entry.

    The geometries here are symmetric under swapping the axes, so the two
    diagonal entries must agree.  The off-diagonal entry vanishes for the
    axis-jump graphs but is genuinely nonzero for the diagonal-jump graph,
    which therefore reports it alongside instead of asserting it away.
    """
    scale = tolerance * (1.0 + float(np.max(np.abs(C))))
    if abs(C[0, 0] - C[1, 1]) > scale:
        raise ValueError(
            f"diagonal entries disagree: {C[0, 0]!r} vs {C[1, 1]!r}")
    if not allow_offdiag and abs(C[0, 1]) > scale:
        raise ValueError(f"unexpected off-diagonal entry {C[0, 1]!r}")
    return float(C[0, 0]), float(C[0, 1])


def _experiment_path_length(cfg):
    values = []
    for h in cfg.h_list:
        result = homogenize.analyze(geometry.build_obstructed_lattice(h))
        d_e, _ = _scalar_diffusivity(result.C, cfg.tolerance)
        values.append(d_e)
    lines = [f"# seed={cfg.seed}"]
    if cfg.pde_reference is not None:
        lines.append(f"# pde_reference={float(cfg.pde_reference)!r}")
    lines.append("h,d_e,abs_diff_next")
    for i, (h, d_e) in enumerate(zip(cfg.h_list, values)):
        diff = ("" if i + 1 == len(values)
                else repr(abs(values[i + 1] - d_e)))
        lines.append(f"{_h_label(h)},{d_e!r},{diff}")
    return "\n".join(lines) + "\n"


def _experiment_interactions(cfg):
    h = cfg.h_list[0]
    lines = [f"# seed={cfg.seed}", f"# h={_h_label(h)}", "interaction,d_e"]
    for kind in InteractionKind:
        result = homogenize.analyze(
            geometry.build_obstructed_lattice(h, interaction=kind))
        d_e, _ = _scalar_diffusivity(result.C, cfg.tolerance)
        lines.append(f"{kind.value},{d_e!r}")
    return "\n".join(lines) + "\n"


def _experiment_continuous(cfg):
    lines = [f"# seed={cfg.seed}",
             f"# n_paths={cfg.n_paths} t_end={float(cfg.t_end)!r}",
             "h,plain_d_e,plain_offdiag,diag_d_e,diag_offdiag,"
             "mc_d_e,mc_ci_lo,mc_ci_hi"]
    grid = np.linspace(0.0, cfg.t_end, 50)
    for i, h in enumerate(cfg.h_list):
        plain = homogenize.analyze(geometry.build_obstructed_lattice(h))
        p_de, p_off = _scalar_diffusivity(plain.C, cfg.tolerance)
        diag = homogenize.analyze(geometry.build_diagonal_lattice(h))
        d_de, d_off = _scalar_diffusivity(diag.C, cfg.tolerance,
                                          allow_offdiag=True)
        walk = simulate.ReflectingWalkConfig(step=h)
        est = simulate.estimate_msd(walk, grid, cfg.n_paths, cfg.seed + i,
                                    backend=cfg.backend,
                                    n_threads=cfg.threads)
        lines.append(f"{_h_label(h)},{p_de!r},{p_off!r},{d_de!r},{d_off!r},"
                     f"{est.d_e!r},{float(est.ci95[0])!r},"
                     f"{float(est.ci95[1])!r}")
    return "\n".join(lines) + "\n"


def run_experiment(cfg):
    """Produce the experiment's CSV text, then render its SVG from the CSV.

    The plot is a function of the file content alone so replotting a stored
    CSV reproduces the SVG byte for byte.
    """
    builders = {"path_length": _experiment_path_length,
                "interactions": _experiment_interactions,
                "continuous_comparison": _experiment_continuous}
    csv_text = builders[cfg.experiment](cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.csv")
    with open(csv_path, "w") as fh:
        fh.write(csv_text)
    svg_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.svg")
    svg.write_svg(svg_path, svg_from_csv(csv_path))
    return csv_path, svg_path


def cmd_experiment(args):
    if args.h_list is not None:
        h_list = [parse_h(tok) for tok in args.h_list.split(",")]
    elif args.experiment == "path_length":
        h_list = [parse_h(tok) for tok in PATH_LENGTH_H]
    elif args.experiment == "interactions":
        h_list = [parse_h("1/8")]
    else:
        h_list = [parse_h(tok) for tok in COMPARISON_H]
    cfg = ExperimentConfig(experiment=args.experiment, h_list=h_list,
                           n_paths=args.n_paths, t_end=args.t_end,
                           seed=args.seed, output_dir=args.output_dir,
                           pde_reference=args.pde_reference,
                           backend=args.backend, threads=args.threads,
                           tolerance=args.tolerance)
    csv_path, svg_path = run_experiment(cfg)
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# replotting

def _read_csv(path):
    comments = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                for token in body.split():
                    if "=" in token:
                        key, _, value = token.partition("=")
                        comments[key] = value
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise ValueError(f"no header row in {path}")
    return comments, header, rows


def _exponent_ticks(labels):
    """Mesh widths plot against log2(1/h) with the fractions as labels."""
    xs = []
    ticks = []
    for lab in labels:
        h = parse_h(lab)
        x = float(np.log2(1.0 / h))
        xs.append(x)
        ticks.append((x, lab))
    return np.array(xs), ticks


def svg_from_csv(path):
    """Render the chart for any CSV this package writes."""
    comments, header, rows = _read_csv(path)
    cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}

    if header == ["time", "msd", "stderr", "n_paths"]:
        t = np.array([float(v) for v in cols["time"]])
        msd = np.array([float(v) for v in cols["msd"]])
        err = np.array([float(v) for v in cols["stderr"]])
        series = [svg.Series(x=t, y=msd, label="mean squared displacement",
                             err_lo=msd - 1.96 * err,
                             err_hi=msd + 1.96 * err, marker=False)]
        title = comments.get("graph", "walk")
        return svg.line_chart(series, f"msd: {title}", "time",
                              "mean squared displacement")

    if header == ["h", "d_e", "abs_diff_next"]:
        xs, ticks = _exponent_ticks(cols["h"])
        d_e = np.array([float(v) for v in cols["d_e"]])
        series = [svg.Series(x=xs, y=d_e, label="quotient graph")]
        hline = None
        if "pde_reference" in comments:
            hline = (float(comments["pde_reference"]), "reference")
        return svg.line_chart(series, "diffusivity vs path length",
                              "step width", "effective diffusivity",
                              x_ticks=ticks, hline=hline)

    if header == ["interaction", "d_e"]:
        values = [float(v) for v in cols["d_e"]]
        h_lab = comments.get("h", "")
        return svg.bar_chart(cols["interaction"], values,
                             f"interaction regimes at h={h_lab}",
                             "effective diffusivity")

    if header[:2] == ["h", "plain_d_e"]:
        xs, ticks = _exponent_ticks(cols["h"])
        plain = np.array([float(v) for v in cols["plain_d_e"]])
        diag = np.array([float(v) for v in cols["diag_d_e"]])
        mc = np.array([float(v) for v in cols["mc_d_e"]])
        lo = np.array([float(v) for v in cols["mc_ci_lo"]])
        hi = np.array([float(v) for v in cols["mc_ci_hi"]])
        series = [svg.Series(x=xs, y=plain, label="axis jumps"),
                  svg.Series(x=xs, y=diag, label="with diagonal jumps",
                             dash="4,3"),
                  svg.Series(x=xs, y=mc, label="reflecting walk (MC)",
                             err_lo=lo, err_hi=hi)]
        return svg.line_chart(series, "discrete vs continuous diffusivity",
                              "step width", "effective diffusivity",
                              x_ticks=ticks)

    raise ValueError(f"unrecognized CSV columns: {header}")


def cmd_replot(args):
    text = svg_from_csv(args.csv)
    if args.output is None:
        base, _ = os.path.splitext(args.csv)
        out = base + ".svg"
    else:
        out = args.output
    svg.write_svg(out, text)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring

def build_parser():
    parser = _Parser(prog="periwalk",
                     description="effective diffusivity of periodic walks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--output", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--tolerance", type=float, default=1e-8)

    p = sub.add_parser("build", help="emit a geometry as a graph file")
    common(p)
    p.add_argument("--geometry", required=True,
                   choices=("square-quadrant", "diagonal", "unobstructed",
                            "whirlpool"))
    p.add_argument("--h", default="1/8", help="mesh width, e.g. 1/8")
    p.add_argument("--interaction", default="neutral",
                   choices=[k.value for k in InteractionKind])
    p.add_argument("--include-antidiagonal", action="store_true")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--lambda-bar", type=float, default=1.0)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("analyze", help="effective diffusivity report")
    common(p)
    p.add_argument("graph")
    p.add_argument("--gauge", default="mean_zero",
                   choices=("mean_zero", "pin_first"))
    p.add_argument("--method", default="auto",
                   choices=("auto", "dense", "sparse"))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo MSD estimate")
    common(p)
    p.add_argument("graph")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--n-paths", type=int, default=1000)
    p.add_argument("--grid-points", type=int, default=50)
    p.add_argument("--center", action="store_true",
                   help="subtract the exact long-run drift")
    p.add_argument("--backend", default=None, choices=("numpy", "numba"))
    p.add_argument("--events", default=None,
                   help="also write a jump event trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="reproduce a study end to end")
    common(p)
    p.add_argument("experiment",
                   choices=("path_length", "interactions",
                            "continuous_comparison"))
    p.add_argument("--output-dir", default="experiments")
    p.add_argument("--h-list", default=None,
                   help="comma-separated mesh widths, e.g. 1/4,1/8")
    p.add_argument("--n-paths", type=int, default=20000)
    p.add_argument("--t-end", type=float, default=150.0)
    p.add_argument("--pde-reference", type=float, default=None,
                   help="external reference diffusivity drawn as a line")
    p.add_argument("--backend", default=None, choices=("numpy", "numba"))
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="run the invariant battery on a graph")
    common(p)
    p.add_argument("graph")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("replot", help="regenerate the SVG for a CSV")
    common(p)
    p.add_argument("csv")
    p.set_defaults(func=cmd_replot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PeriwalkError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
