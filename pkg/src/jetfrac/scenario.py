"""Scenario files: one YAML document describing grid, model, fields and runs.

Parsing is strict and collects *all* violations before failing, so a broken
file reports every problem at once.  The data model is JSON-compatible
key-value with nested tables; YAML is the concrete syntax.

A scenario selects one experiment:

``evaluate``
    energy reports for one or more named fields;
``certify``
    the rigidity pipeline over an ``eps_list`` sweep;
``recovery``
    recovery family plus limsup table for a declared displacement;
``minimize``
    fixed-scale brute-force minimization over the crack family;
``full-gamma``
    the minima-convergence sweep (nonlinear per scale vs. linearized limit).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .energy import EnergyModel, ModelError, make_density
from .fields import BoundaryDatum, FieldSpecError, Grid
from .minimize import CrackFamily, MinimizeError
from .presets import build_boundary

EXPERIMENTS = ("evaluate", "certify", "recovery", "minimize", "full-gamma")

_TOP_KEYS = {
    "name",
    "experiment",
    "seed",
    "grid",
    "model",
    "eps_list",
    "boundary",
    "field",
    "fields",
    "displacement",
    "cracks",
    "partition",
    "competitors",
}

_PARTITION_KINDS = ("auto", "single", "two_piece")


class ScenarioError(ValueError):
    """All problems found while parsing a scenario, joined into one message."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Scenario:
    """A fully validated scenario description."""

    name: str
    experiment: str
    seed: int
    grid: Grid
    model: EnergyModel
    eps_values: tuple
    boundary: BoundaryDatum
    field_specs: tuple
    displacement_spec: dict | None
    crack_family: CrackFamily | None
    partition_spec: dict
    competitors: tuple
    digest: str

    def sweep_eps(self) -> tuple:
        """The eps values an experiment sweeps (falls back to the model's)."""
        return self.eps_values if self.eps_values else (self.model.eps,)


def _require_mapping(doc, what: str, problems: list) -> dict:
    if not isinstance(doc, dict):
        problems.append(f"{what} must be a mapping, got {type(doc).__name__}")
        return {}
    return doc


def _parse_grid(spec, problems: list) -> Grid | None:
    spec = _require_mapping(spec, "grid", problems)
    missing = [k for k in ("outer", "inner", "cell_size") if k not in spec]
    if missing:
        problems.append(f"grid is missing keys: {', '.join(missing)}")
        return None
    unknown = sorted(set(spec) - {"outer", "inner", "cell_size"})
    if unknown:
        problems.append(f"grid has unknown keys: {', '.join(unknown)}")
    try:
        return Grid(
            outer=tuple(tuple(b) for b in spec["outer"]),
            inner=tuple(tuple(b) for b in spec["inner"]),
            cell_size=float(spec["cell_size"]),
        )
    except (FieldSpecError, TypeError, ValueError) as exc:
        problems.append(f"grid: {exc}")
        return None


def _parse_model(spec, eps_values, problems: list) -> EnergyModel | None:
    spec = _require_mapping(spec, "model", problems)
    known = {"eps", "beta", "gamma", "kappa", "density"}
    unknown = sorted(set(spec) - known)
    if unknown:
        problems.append(f"model has unknown keys: {', '.join(unknown)}")
    density_spec = spec.get("density", "so_distance")
    if isinstance(density_spec, str):
        density_spec = {"name": density_spec}
    density_spec = dict(_require_mapping(density_spec, "model.density", problems))
    dname = density_spec.pop("name", "so_distance")
    try:
        density = make_density(dname, **density_spec)
    except (ModelError, TypeError) as exc:
        problems.append(f"model.density: {exc}")
        density = make_density("so_distance")
    eps = spec.get("eps")
    if eps is None:
        if eps_values:
            eps = eps_values[0]
        else:
            problems.append("model.eps is required when no eps_list is given")
            return None
    try:
        return EnergyModel(
            density=density,
            eps=float(eps),
            beta=float(spec.get("beta", 0.8)),
            gamma=float(spec.get("gamma", 0.7)),
            kappa=float(spec.get("kappa", 1.0)),
        )
    except (ModelError, TypeError, ValueError) as exc:
        problems.append(f"model: {exc}")
        return None


def _parse_eps_list(doc, problems: list) -> tuple:
    raw = doc.get("eps_list")
    if raw is None:
        return ()
    if not isinstance(raw, (list, tuple)) or not raw:
        problems.append("eps_list must be a nonempty list of positive numbers")
        return ()
    out = []
    for v in raw:
        try:
            x = float(v)
        except (TypeError, ValueError):
            problems.append(f"eps_list entry {v!r} is not a number")
            continue
        if not x > 0.0:
            problems.append(f"eps_list entry {x} must be positive")
            continue
        out.append(x)
    return tuple(out)


def _parse_boundary(doc, problems: list) -> BoundaryDatum:
    spec = doc.get("boundary", {"name": "zero"})
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(_require_mapping(spec, "boundary", problems))
    name = spec.pop("name", "zero")
    try:
        return build_boundary(name, **spec)
    except (FieldSpecError, TypeError) as exc:
        problems.append(f"boundary: {exc}")
        return build_boundary("zero")


def _parse_field_specs(doc, problems: list) -> tuple:
    specs = []
    if "field" in doc and "fields" in doc:
        problems.append("give either 'field' or 'fields', not both")
    raw = doc.get("fields", None)
    if raw is None and "field" in doc:
        raw = [doc["field"]]
    if raw is None:
        return ()
    if not isinstance(raw, list):
        problems.append("fields must be a list of field specs")
        return ()
    for k, entry in enumerate(raw):
        entry = dict(_require_mapping(entry, f"fields[{k}]", problems))
        if "name" not in entry:
            problems.append(f"fields[{k}] is missing 'name'")
            continue
        specs.append(entry)
    return tuple(specs)


def _facets_from_spec(grid: Grid, spec, problems: list, where: str):
    """One crack-candidate entry: a list of plane specs or raw facets."""
    facets = set()
    if spec is None:
        spec = []
    if not isinstance(spec, list):
        problems.append(f"{where} must be a list of plane specs")
        return frozenset()
    for j, item in enumerate(spec):
        item = dict(_require_mapping(item, f"{where}[{j}]", problems))
        if "axis" in item and "coordinate" in item:
            bounds = item.get("bounds")
            if bounds is not None:
                bounds = [tuple(float(v) for v in b) for b in bounds]
            try:
                facets |= grid.facet_plane(
                    int(item["axis"]), float(item["coordinate"]), bounds=bounds
                )
            except FieldSpecError as exc:
                problems.append(f"{where}[{j}]: {exc}")
        else:
            problems.append(
                f"{where}[{j}] needs 'axis' and 'coordinate' (a facet plane)"
            )
    return frozenset(facets)


def _parse_cracks(doc, grid: Grid | None, problems: list) -> CrackFamily | None:
    raw = doc.get("cracks")
    if raw is None:
        return None
    raw = _require_mapping(raw, "cracks", problems)
    unknown = sorted(set(raw) - {"candidates"})
    if unknown:
        problems.append(f"cracks has unknown keys: {', '.join(unknown)}")
    cands = raw.get("candidates")
    if not isinstance(cands, list) or not cands:
        problems.append("cracks.candidates must be a nonempty list")
        return None
    if grid is None:
        return None
    sets = [
        _facets_from_spec(grid, entry, problems, f"cracks.candidates[{k}]")
        for k, entry in enumerate(cands)
    ]
    try:
        family = CrackFamily(tuple(sets))
        family.validate(grid)
        return family
    except MinimizeError as exc:
        problems.append(f"cracks: {exc}")
        return None


def _parse_partition(doc, problems: list) -> dict:
    spec = doc.get("partition", {"kind": "auto"})
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(_require_mapping(spec, "partition", problems))
    kind = spec.get("kind", "auto")
    if kind not in _PARTITION_KINDS:
        problems.append(
            f"partition.kind must be one of {_PARTITION_KINDS}, got {kind!r}"
        )
    if kind == "two_piece" and "cut" not in spec:
        problems.append("partition.kind two_piece requires 'cut'")
    return spec


def _parse_competitors(doc, problems: list) -> tuple:
    raw = doc.get("competitors")
    if raw is None:
        return ()
    if not isinstance(raw, list):
        problems.append("competitors must be a list of field specs")
        return ()
    out = []
    for k, entry in enumerate(raw):
        entry = dict(_require_mapping(entry, f"competitors[{k}]", problems))
        if "name" not in entry:
            problems.append(f"competitors[{k}] is missing 'name'")
            continue
        out.append(entry)
    return tuple(out)


def parse_scenario_text(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate a scenario document, collecting every violation."""
    problems: list[str] = []
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"not valid YAML: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario root must be a mapping"])
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        problems.append(f"unknown top-level keys: {', '.join(unknown)}")
    name = str(doc.get("name", Path(source).stem))
    experiment = doc.get("experiment")
    if experiment not in EXPERIMENTS:
        problems.append(
            f"experiment must be one of {', '.join(EXPERIMENTS)}; got {experiment!r}"
        )
        experiment = "evaluate"
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        problems.append(f"seed must be a non-negative integer, got {seed!r}")
        seed = 0
    eps_values = _parse_eps_list(doc, problems)
    grid = _parse_grid(doc.get("grid", {}), problems)
    model = _parse_model(doc.get("model", {}), eps_values, problems)
    boundary = _parse_boundary(doc, problems)
    field_specs = _parse_field_specs(doc, problems)
    displacement_spec = doc.get("displacement")
    if displacement_spec is not None:
        displacement_spec = dict(
            _require_mapping(displacement_spec, "displacement", problems)
        )
        if "name" not in displacement_spec:
            problems.append("displacement is missing 'name'")
    crack_family = _parse_cracks(doc, grid, problems)
    partition_spec = _parse_partition(doc, problems)
    competitors = _parse_competitors(doc, problems)

    needs = {
        "evaluate": ("field specs", bool(field_specs)),
        "certify": ("an eps_list and a field spec", bool(eps_values and field_specs)),
        "recovery": (
            "an eps_list and a displacement",
            bool(eps_values and displacement_spec),
        ),
        "minimize": ("a crack family", crack_family is not None),
        "full-gamma": (
            "an eps_list and a crack family",
            bool(eps_values) and crack_family is not None,
        ),
    }
    what, ok = needs[experiment]
    if not ok:
        problems.append(f"experiment {experiment!r} requires {what}")

    if problems:
        raise ScenarioError(problems)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Scenario(
        name=name,
        experiment=experiment,
        seed=int(seed),
        grid=grid,
        model=model,
        eps_values=eps_values,
        boundary=boundary,
        field_specs=field_specs,
        displacement_spec=displacement_spec,
        crack_family=crack_family,
        partition_spec=partition_spec,
        competitors=competitors,
        digest=digest,
    )


def parse_scenario(path) -> Scenario:
    """Read a scenario file; raises :class:`ScenarioError` with all problems."""
    p = Path(path)
    if not p.is_file():
        raise ScenarioError([f"scenario file not found: {p}"])
    return parse_scenario_text(p.read_text(encoding="utf-8"), source=str(p))


# ---------------------------------------------------------------------------
# displacement construction (shared by the recovery experiment and tests)
# ---------------------------------------------------------------------------


def build_displacement(scenario: Scenario):
    """Instantiate the scenario's displacement spec as a jet."""
    from .presets import (
        affine_step_displacement,
        boxed_step_displacement,
        displacement_from_boundary,
    )

    spec = dict(scenario.displacement_spec or {})
    name = spec.pop("name", None)
    if name == "from_boundary":
        return displacement_from_boundary(scenario.grid, scenario.boundary)
    if name == "affine_step":
        if "matrix" in spec:
            spec["matrix"] = np.asarray(spec["matrix"], dtype=float)
        if "offset" in spec:
            spec["offset"] = np.asarray(spec["offset"], dtype=float)
        return affine_step_displacement(scenario.grid, **spec)
    if name == "boxed_step":
        return boxed_step_displacement(scenario.grid, **spec)
    raise ScenarioError(
        [
            f"unknown displacement form {name!r}; known: from_boundary, "
            "affine_step, boxed_step"
        ]
    )


__all__ = [
    "EXPERIMENTS",
    "Scenario",
    "ScenarioError",
    "build_displacement",
    "parse_scenario",
    "parse_scenario_text",
]
