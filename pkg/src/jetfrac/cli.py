"""Command-line entry point: scenario ingestion, experiments, reports.

Verbs mirror the experiments a scenario can declare::

    jetfrac evaluate  --scenario s.yaml --out results/
    jetfrac certify   --scenario s.yaml --out results/
    jetfrac recovery  --scenario s.yaml --out results/
    jetfrac minimize  --scenario s.yaml --out results/
    jetfrac full-gamma --scenario s.yaml --out results/
    jetfrac validate  --scenario s.yaml

Each run writes CSV tables, a JSON summary, PNG figures, and a
``manifest.json`` listing every output with its SHA-256.  Exit codes:
0 complete, 2 scenario parse failure, 3 at least one flagged row (a solver
that did not converge or a certificate bound that failed).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .energy import hessian_quadratic_form, nonlinear_energy, relaxed_energy
from .linearize import build_recovery, limsup_check
from .minimize import select_best, solve_crack_family
from .minimize import minima_convergence_sweep
from .presets import build_field, single_label, two_piece_labels
from .report import (
    figure_candidate_energies,
    figure_energy_terms,
    figure_loglog_decay,
    sha256_of,
    write_csv,
    write_json,
)
from .rigidity import certify_sweep, partition_from_labels
from .scenario import Scenario, ScenarioError, build_displacement, parse_scenario


def _facet_list(facets) -> list:
    return sorted([int(v) for v in f] for f in facets)


def _report_dict(rep) -> dict:
    return {
        "elastic": rep.elastic,
        "second_gradient": rep.second_gradient,
        "surface": rep.surface,
        "finite": rep.finite,
        "constraint_ok": rep.constraint_ok,
        "total": rep.total_label(),
    }


# ---------------------------------------------------------------------------
# experiment runners (each returns (output paths, flagged, summary dict))
# ---------------------------------------------------------------------------


def _run_evaluate(sc: Scenario, out: Path):
    rows = []
    entries = []
    first_reports = []
    first_labels = []
    for k, spec in enumerate(sc.field_specs):
        params = {kk: vv for kk, vv in spec.items() if kk != "name"}
        for eps in sc.sweep_eps():
            m = sc.model.with_eps(eps)
            y = build_field(spec["name"], sc.grid, eps=eps, **params)
            rep = nonlinear_energy(m, y, check=False)
            rel = relaxed_energy(m, y, check=False)
            rows.append(
                [
                    k,
                    spec["name"],
                    eps,
                    rep.elastic,
                    rep.second_gradient,
                    rep.surface,
                    rep.total,
                    rel.total,
                    rep.constraint_ok,
                ]
            )
            entries.append(
                {
                    "field": spec,
                    "eps": eps,
                    "nonlinear": _report_dict(rep),
                    "relaxed": _report_dict(rel),
                }
            )
            if eps == sc.sweep_eps()[0]:
                first_reports.append(rel)
                first_labels.append(f"{k}:{spec['name']}")
    csv_path = write_csv(
        out / f"{sc.name}_evaluate.csv",
        [
            "field_index",
            "field",
            "eps",
            "elastic",
            "second_gradient",
            "surface",
            "nonlinear_total",
            "relaxed_total",
            "constraint_ok",
        ],
        rows,
    )
    json_path = write_json(out / f"{sc.name}_evaluate.json", {"entries": entries})
    fig_path = figure_energy_terms(
        out / f"{sc.name}_evaluate.png",
        first_labels,
        first_reports,
        f"{sc.name}: relaxed energy terms",
    )
    return [csv_path, json_path, fig_path], False, {"n_rows": len(rows)}


def _partition_builder(sc: Scenario):
    kind = sc.partition_spec.get("kind", "auto")
    if kind == "auto":
        return None
    if kind == "single":
        return lambda y, m: partition_from_labels(y, single_label(y.grid))
    cut = float(sc.partition_spec["cut"])
    return lambda y, m: partition_from_labels(y, two_piece_labels(y.grid, cut))


def _run_certify(sc: Scenario, out: Path):
    spec = sc.field_specs[0]
    params = {kk: vv for kk, vv in spec.items() if kk != "name"}

    def build(eps):
        return build_field(spec["name"], sc.grid, eps=eps, **params)

    sweep = certify_sweep(
        build,
        sc.model,
        sc.eps_values,
        h_bc=sc.boundary,
        partition_builder=_partition_builder(sc),
    )
    rows = []
    for r in sweep.rows:
        c = r.certificate
        rows.append(
            [
                r.eps,
                c.frame_deviation,
                c.frame_budget,
                c.jump_excess,
                c.excess_budget,
                c.partition_excess,
                r.coarea_budget,
                c.sym_defect,
                c.sym_budget,
                c.grad_defect,
                c.grad_budget,
                r.relaxed_total,
                c.n_grains,
                c.ok and r.coarea_ok,
                sweep.slopes["sym"],
                sweep.slopes["grad"],
                sweep.slopes["excess"],
            ]
        )
    csv_path = write_csv(
        out / f"{sc.name}_certify.csv",
        [
            "eps",
            "frame_deviation",
            "frame_budget",
            "jump_excess",
            "excess_budget",
            "partition_excess",
            "coarea_budget",
            "sym_defect",
            "sym_budget",
            "grad_defect",
            "grad_budget",
            "relaxed_total",
            "n_grains",
            "ok",
            "slope_sym",
            "slope_grad",
            "slope_excess",
        ],
        rows,
    )
    json_path = write_json(
        out / f"{sc.name}_certify.json",
        {
            "slopes": sweep.slopes,
            "energy_bound": sweep.energy_bound,
            "all_ok": sweep.all_ok,
            "constants": {
                "frame": sweep.constants.frame,
                "excess": sweep.constants.excess,
                "sym": sweep.constants.sym,
                "grad": sweep.constants.grad,
            },
        },
    )
    eps = [r.eps for r in sweep.rows]
    fig_path = figure_loglog_decay(
        out / f"{sc.name}_certify.png",
        eps,
        {
            "sym defect": [r.certificate.sym_defect for r in sweep.rows],
            "sym budget": [r.certificate.sym_budget for r in sweep.rows],
            "grad defect": [r.certificate.grad_defect for r in sweep.rows],
            "grad budget": [r.certificate.grad_budget for r in sweep.rows],
        },
        f"{sc.name}: rigidity defects",
    )
    flagged = not sweep.all_ok
    return [csv_path, json_path, fig_path], flagged, {"slopes": sweep.slopes}


def _run_recovery(sc: Scenario, out: Path):
    u = build_displacement(sc)
    family = build_recovery(u, sc.model, sc.eps_values, h_bc=sc.boundary)
    table = limsup_check(family)
    rows = []
    for r, s, b, m in zip(
        table.rows, family.blend_factors, family.budgets, family.sup_norms
    ):
        rows.append(
            [
                r.eps,
                r.nonlinear_total,
                r.linear_total,
                r.gap,
                r.second_gradient_term,
                s,
                b,
                m,
            ]
        )
    csv_path = write_csv(
        out / f"{sc.name}_recovery.csv",
        [
            "eps",
            "nonlinear_total",
            "limit_total",
            "gap",
            "second_gradient_term",
            "blend_factor",
            "sup_budget",
            "sup_norm",
        ],
        rows,
    )
    json_path = write_json(
        out / f"{sc.name}_recovery.json",
        {
            "limit_energy": table.limit_energy,
            "final_relative_gap": table.final_relative_gap(),
        },
    )
    fig_path = figure_loglog_decay(
        out / f"{sc.name}_recovery.png",
        [r.eps for r in table.rows],
        {
            "|gap|": [abs(r.gap) for r in table.rows],
            "second gradient": [r.second_gradient_term for r in table.rows],
        },
        f"{sc.name}: limsup recovery",
    )
    return [csv_path, json_path, fig_path], False, {
        "final_relative_gap": table.final_relative_gap()
    }


def _competitor_energies(sc: Scenario, eps: float) -> list:
    out = []
    m = sc.model.with_eps(eps)
    for spec in sc.competitors:
        params = {kk: vv for kk, vv in spec.items() if kk != "name"}
        y = build_field(spec["name"], sc.grid, eps=eps, **params)
        rep = nonlinear_energy(m, y, check=False)
        out.append((spec["name"], rep.total))
    return out


def _run_minimize(sc: Scenario, out: Path):
    eps = sc.model.eps
    q = hessian_quadratic_form(sc.model, dim=sc.grid.dim)
    nonlinear = solve_crack_family(
        sc.model, sc.grid, sc.crack_family, "nonlinear", h_bc=sc.boundary
    )
    linear = solve_crack_family(
        sc.model, sc.grid, sc.crack_family, "linear", h_bc=sc.boundary, q=q
    )
    best_nl = select_best(nonlinear)
    best_lin = select_best(linear)
    rows = []
    flagged = False
    for rn, rl in zip(nonlinear, linear):
        flagged = flagged or not (rn.converged and rl.converged)
        rows.append(
            [
                rn.candidate_index,
                len(rn.crack),
                rn.energy,
                rn.converged,
                rn.iterations,
                rn.grad_norm,
                rl.energy,
                rl.converged,
            ]
        )
    competitors = _competitor_energies(sc, eps)
    comp_flag = any(
        t is not None and best_nl.energy > float(t) * (1.0 + 1e-9)
        for _, t in competitors
    )
    flagged = flagged or comp_flag
    csv_path = write_csv(
        out / f"{sc.name}_minimize.csv",
        [
            "candidate",
            "n_facets",
            "nonlinear_total",
            "nonlinear_converged",
            "iterations",
            "grad_norm",
            "linear_total",
            "linear_converged",
        ],
        rows,
    )
    json_path = write_json(
        out / f"{sc.name}_minimize.json",
        {
            "eps": eps,
            "best_nonlinear": {
                "candidate": best_nl.candidate_index,
                "energy": best_nl.report.total_label(),
                "crack": _facet_list(best_nl.crack),
            },
            "best_linear": {
                "candidate": best_lin.candidate_index,
                "energy": best_lin.report.total_label(),
                "crack": _facet_list(best_lin.crack),
            },
            "competitors": [
                {"name": n, "energy": "INF" if t is None else t}
                for n, t in competitors
            ],
            "competitor_bound_ok": not comp_flag,
        },
    )
    fig_path = figure_candidate_energies(
        out / f"{sc.name}_minimize.png",
        [r.energy for r in nonlinear],
        best_nl.candidate_index,
        f"{sc.name}: candidate energies (eps={eps:g})",
    )
    return [csv_path, json_path, fig_path], flagged, {
        "best_candidate": best_nl.candidate_index
    }


def _run_full_gamma(sc: Scenario, out: Path):
    sweep = minima_convergence_sweep(
        sc.model,
        sc.grid,
        sc.crack_family,
        sc.eps_values,
        h_bc=sc.boundary,
    )
    rows = []
    for r in sweep.rows:
        rows.append(
            [
                r.eps,
                r.nonlinear_energy,
                r.linear_energy,
                r.gap,
                r.strain_discrepancy,
                len(r.nonlinear_crack),
                len(r.linear_crack),
                r.cracks_agree,
                r.flagged,
            ]
        )
    csv_path = write_csv(
        out / f"{sc.name}_full_gamma.csv",
        [
            "eps",
            "nonlinear_min",
            "linear_min",
            "gap",
            "strain_discrepancy",
            "nonlinear_crack_facets",
            "linear_crack_facets",
            "cracks_agree",
            "flagged",
        ],
        rows,
    )
    json_path = write_json(
        out / f"{sc.name}_full_gamma.json",
        {
            "gaps_decreasing": sweep.gaps_decreasing,
            "linear_min": sweep.linear_result.report.total_label(),
            "linear_crack": _facet_list(sweep.linear_result.crack),
        },
    )
    fig_path = figure_loglog_decay(
        out / f"{sc.name}_full_gamma.png",
        [r.eps for r in sweep.rows],
        {
            "|gap|": [abs(r.gap) for r in sweep.rows],
            "strain discrepancy": [r.strain_discrepancy for r in sweep.rows],
        },
        f"{sc.name}: convergence of minima",
    )
    return [csv_path, json_path, fig_path], sweep.any_flagged, {
        "gaps": sweep.gaps()
    }


_RUNNERS = {
    "evaluate": _run_evaluate,
    "certify": _run_certify,
    "recovery": _run_recovery,
    "minimize": _run_minimize,
    "full-gamma": _run_full_gamma,
}


def run_scenario(sc: Scenario, out_dir, seed: int | None = None) -> tuple[dict, int]:
    """Execute a parsed scenario; returns (manifest, exit_code)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng_seed = sc.seed if seed is None else int(seed)
    np.random.seed(rng_seed % 2**32)  # fixes any library-internal sampling
    t0 = time.perf_counter()
    files, flagged, summary = _RUNNERS[sc.experiment](sc, out)
    wall = time.perf_counter() - t0
    manifest = {
        "tool_version": __version__,
        "scenario_name": sc.name,
        "scenario_digest": sc.digest,
        "experiment": sc.experiment,
        "seed": rng_seed,
        "outputs": [
            {"path": str(p.name), "sha256": sha256_of(p)} for p in files
        ],
        "wall_clock_s": wall,
        "flagged": bool(flagged),
        "summary": summary,
    }
    write_json(out / "manifest.json", manifest)
    return manifest, (3 if flagged else 0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jetfrac",
        description="Griffith-type energies on jet fields: evaluation, "
        "rigidity certificates, recovery sweeps, and minimization.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in (*_RUNNERS, "validate"):
        p = sub.add_parser(verb)
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        if verb != "validate":
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--seed", type=int, default=None, help="override seed")
            p.add_argument(
                "--threads",
                type=int,
                default=1,
                help="worker threads (accepted for interface stability; "
                "experiments run sequentially)",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
    except ScenarioError as exc:
        for p in exc.problems:
            print(f"scenario error: {p}", file=sys.stderr)
        return 2
    if args.verb == "validate":
        print(f"scenario '{sc.name}' OK (experiment: {sc.experiment})")
        return 0
    if sc.experiment != args.verb:
        print(
            f"scenario error: scenario declares experiment {sc.experiment!r} "
            f"but verb {args.verb!r} was requested",
            file=sys.stderr,
        )
        return 2
    if args.threads < 1:
        print("scenario error: --threads must be >= 1", file=sys.stderr)
        return 2
    _, code = run_scenario(sc, args.out, seed=args.seed)
    return code


if __name__ == "__main__":
    sys.exit(main())
