"""System and pair definition files, check suites, and run reports.

JSON documents declare a chart, a Lagrangian, and optionally a force map,
a control slice, a feedback law, and a translation symmetry.  Loading
validates the document against the shipped schema, parses every
expression, and runs the construction-time certificates, so a loaded
system is ready for the dynamics and reduction machinery.  The check
suites package the library's sampled identities into report rows with
stable ids, and reports serialize deterministically (sorted keys, fixed
layout) apart from the wallclock field.
"""

import importlib.resources
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np

from .control import (
    ControlLaw,
    ControlSubset,
    FiberMap,
    RCLSystem,
    check_rcl_equivalence,
    controlled_field,
)
from .dynamics import check_fl_related, euler_lagrange_field, euler_lagrange_ode, integrate
from .expr import (
    BinOp,
    ExprError,
    Num,
    VELOCITY_SUFFIX,
    differentiate,
    fold_constants,
    free_names,
    substitute,
    to_source,
)
from .geometry import ConfigSpace, PointMap, TangentPoint
from .lagrangian import (
    LagrangianSystem,
    Tolerances,
    action_energy,
    inverse_legendre,
    lagrangian_two_form,
    lagrangian_two_form_blocks,
    legendre_transform,
)
from .reduction import (
    ReducibleSystem,
    check_commutation,
    check_reduced_legendre,
    check_rocl_equivalence,
    check_rpcl_equivalence,
    check_section_independence,
    orbit_reduce,
    point_reduce,
    reduced_field,
    routhian_expression,
    theorem_harness,
)
from .symmetry import (
    LieAlgebra,
    TranslationSymmetry,
    check_equivariance,
    check_invariance,
    check_momentum_composition,
    check_momentum_generates_action,
    check_noether_pointwise,
    check_regular_value,
    momentum_monitor,
)

__all__ = [
    "BUILTIN_PAIRS",
    "BUILTIN_SYSTEMS",
    "CheckRow",
    "DefinitionError",
    "LoadedPair",
    "LoadedSystem",
    "ReductionError",
    "Report",
    "SimulationResult",
    "SuiteInapplicable",
    "SUITES",
    "builtin_document",
    "load_pair",
    "load_system",
    "read_document",
    "reduce_emit",
    "run_equivalence",
    "run_suite",
    "run_validate",
    "simulate",
]

SUITES = ("legendre", "dynamics", "noether", "reduction", "all")
EQUIVALENCE_KINDS = ("rcl", "rpcl", "rocl", "lag-point", "lag-orbit")
BUILTIN_SYSTEMS = ("free_particle", "harmonic_oscillator", "central_force", "pendulum_cart")
BUILTIN_PAIRS = ("ho_scaling_pair", "ho_scaling_bad", "translation_pair", "translation_bad")

FLOW_T1 = 10.0
FLOW_STEP = 1e-3
DRIFT_TOL = 1e-6


class DefinitionError(ValueError):
    """A system or pair document failed schema, parse, or certification."""


class SuiteInapplicable(RuntimeError):
    """The requested checks do not apply to the supplied system."""


class ReductionError(RuntimeError):
    """The system cannot be reduced or emitted at the requested momentum."""


# -- documents ----------------------------------------------------------------


def _schema(name: str) -> dict:
    text = importlib.resources.files("rclab").joinpath("schemas", name).read_text()
    return json.loads(text)


_SCHEMA_CACHE: Dict[str, jsonschema.Draft7Validator] = {}


def _validator(name: str) -> jsonschema.Draft7Validator:
    if name not in _SCHEMA_CACHE:
        _SCHEMA_CACHE[name] = jsonschema.Draft7Validator(_schema(name))
    return _SCHEMA_CACHE[name]


def _validate_doc(doc: dict, schema_name: str, where: str) -> None:
    errors = sorted(_validator(schema_name).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        loc = "/".join(str(p) for p in err.absolute_path) or "<document>"
        raise DefinitionError(f"{where}: schema violation at {loc}: {err.message}")


def read_document(path) -> dict:
    import pathlib

    p = pathlib.Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise DefinitionError(f"cannot read {p}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise DefinitionError(f"{p}: not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise DefinitionError(f"{p}: the document must be a JSON object")
    return doc


def builtin_document(name: str) -> dict:
    if name not in BUILTIN_SYSTEMS + BUILTIN_PAIRS:
        known = ", ".join(BUILTIN_SYSTEMS + BUILTIN_PAIRS)
        raise DefinitionError(f"unknown built-in {name!r}; known names: {known}")
    text = importlib.resources.files("rclab").joinpath("data", name + ".json").read_text()
    return json.loads(text)


def _resolve(ref, base_dir=None) -> Tuple[dict, str]:
    """A document reference: an inline object, a built-in name, or a path."""
    import pathlib

    if isinstance(ref, dict):
        return dict(ref), "inline"
    if ref in BUILTIN_SYSTEMS + BUILTIN_PAIRS:
        return builtin_document(ref), f"builtin:{ref}"
    p = pathlib.Path(ref)
    if not p.is_absolute() and base_dir is not None:
        p = pathlib.Path(base_dir) / p
    return read_document(p), str(p)


# -- loaded systems -----------------------------------------------------------


@dataclass(frozen=True)
class LoadedSystem:
    """A fully constructed system plus the document it came from."""

    name: str
    doc: dict
    rcl: RCLSystem
    symmetry: Optional[TranslationSymmetry]
    algebra: Optional[LieAlgebra]
    source: str

    @property
    def sys(self) -> LagrangianSystem:
        return self.rcl.sys

    @property
    def space(self) -> ConfigSpace:
        return self.rcl.sys.space

    @property
    def controlled(self) -> bool:
        return self.rcl.force is not None or self.rcl.law is not None


@dataclass(frozen=True)
class LoadedPair:
    name: str
    doc: dict
    a: LoadedSystem
    b: LoadedSystem
    pmap: PointMap
    mu_a: Optional[np.ndarray]
    mu_b: Optional[np.ndarray]
    source: str


def _build_space(spec: dict, where: str) -> ConfigSpace:
    coords = spec["coords"]
    box = spec.get("box") or {}
    periodic = spec.get("periodic")
    if periodic is not None and len(periodic) != len(coords):
        raise DefinitionError(f"{where}: periodic flags must match the coordinate count")
    try:
        return ConfigSpace(coords,
                           q_box=box.get("q", (-1.0, 1.0)),
                           v_box=box.get("qdot", (-1.0, 1.0)),
                           periodic=periodic)
    except ValueError as err:
        raise DefinitionError(f"{where}: {err}") from err


def _build_system(doc: dict, name: str, source: str) -> LoadedSystem:
    _validate_doc(doc, "system.schema.json", name)
    space = _build_space(doc["space"], name)
    params = {k: float(v) for k, v in (doc.get("params") or {}).items()}
    tols = None
    if doc.get("tolerances"):
        try:
            tols = Tolerances(**doc["tolerances"])
        except TypeError as err:
            raise DefinitionError(f"{name}: unknown tolerance field ({err})") from err

    def _blame(stage, fn):
        try:
            return fn()
        except (ExprError, ValueError) as err:
            raise DefinitionError(f"{name}: {stage}: {err}") from err

    sys = _blame("lagrangian", lambda: LagrangianSystem(
        space, doc["lagrangian"], params=params, tolerances=tols))

    force = None
    if doc.get("force") is not None:
        force = _blame("force", lambda: FiberMap.for_system(sys, doc["force"]))

    control = None
    cspec = doc.get("control")
    if cspec is not None:
        for a in cspec["actuated"]:
            if a not in space.coords:
                raise DefinitionError(f"{name}: control: unknown actuated coordinate {a!r}")
        control = _blame("control", lambda: ControlSubset(
            space, cspec["actuated"], offset=cspec.get("offset"),
            bounds=cspec.get("bounds"), params=params))

    law = None
    if doc.get("law") is not None:
        if control is None:
            raise DefinitionError(f"{name}: a control law needs a declared control subset")
        law_map = _blame("law", lambda: FiberMap.for_system(sys, doc["law"]))
        law = _blame("law", lambda: ControlLaw(space, law_map, control))

    rcl = _blame("system", lambda: RCLSystem(sys, force=force, control=control, law=law))

    symmetry = None
    algebra = None
    sspec = doc.get("symmetry")
    if sspec is not None:
        symmetry = _blame("symmetry", lambda: TranslationSymmetry(space, sspec["cyclic"]))
        aspec = sspec.get("algebra")
        if aspec is not None:
            if aspec["dim"] != symmetry.k:
                raise DefinitionError(
                    f"{name}: symmetry: algebra dimension {aspec['dim']} does not match "
                    f"the {symmetry.k} declared cyclic coordinates")
            algebra = _blame("symmetry", lambda: LieAlgebra(
                np.asarray(aspec["structure_constants"], dtype=float)))
            if algebra.d != symmetry.k:
                raise DefinitionError(
                    f"{name}: symmetry: structure constants have dimension {algebra.d}, "
                    f"expected {symmetry.k}")

    return LoadedSystem(name=name, doc=doc, rcl=rcl, symmetry=symmetry,
                        algebra=algebra, source=source)


def load_system(ref, base_dir=None) -> LoadedSystem:
    """Load a system document from a path, a built-in name, or a dict."""
    doc, source = _resolve(ref, base_dir)
    name = doc.get("name") or (ref if isinstance(ref, str) else "system")
    return _build_system(doc, name, source)


def load_pair(ref, base_dir=None) -> LoadedPair:
    """Load a pair document: two systems plus an invertible chart map."""
    import pathlib

    doc, source = _resolve(ref, base_dir)
    _validate_doc(doc, "pair.schema.json", str(ref))
    child_base = base_dir
    if source not in ("inline",) and not source.startswith("builtin:"):
        child_base = pathlib.Path(source).parent
    name = doc.get("name") or (ref if isinstance(ref, str) else "pair")
    a = load_system(doc["a"], child_base)
    b = load_system(doc["b"], child_base)

    mspec = doc["map"]
    if mspec.get("inverse") is None:
        raise DefinitionError(
            f"{name}: equivalence checks need an invertible map: supply inverse expressions")
    try:
        pmap = PointMap(a.space, b.space, mspec["forward"], inverse_exprs=mspec["inverse"])
    except (ExprError, ValueError) as err:
        raise DefinitionError(f"{name}: map: {err}") from err

    def _mu(key):
        v = doc.get(key)
        if v is None:
            return None
        return np.atleast_1d(np.asarray(v, dtype=float))

    return LoadedPair(name=name, doc=doc, a=a, b=b, pmap=pmap,
                      mu_a=_mu("mu_a"), mu_b=_mu("mu_b"), source=source)


# -- reports ------------------------------------------------------------------


def _json_number(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _witness_dict(w) -> Optional[dict]:
    if w is None:
        return None
    return {"q": [float(v) for v in w.q], "qdot": [float(v) for v in w.qdot]}


@dataclass(frozen=True)
class CheckRow:
    """One named identity with its sampled verdict."""

    id: str
    identity: str
    ok: bool
    max_residual: float
    tol: float
    witness: Optional[TangentPoint] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "identity": self.identity,
            "pass": bool(self.ok),
            "max_residual": _json_number(self.max_residual),
            "tol": _json_number(self.tol),
            "witness": _witness_dict(self.witness),
            "detail": self.detail,
        }


@dataclass(frozen=True)
class Report:
    """Outcome of one command run; serializes deterministically."""

    command: str
    seed: int
    samples: int
    tol: Optional[float]
    checks: Tuple[CheckRow, ...]
    wallclock: float
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.checks)

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "pass": self.ok,
            "seed": self.seed,
            "samples": self.samples,
            "tol": None if self.tol is None else _json_number(self.tol),
            "checks": [row.as_dict() for row in self.checks],
            "wallclock": self.wallclock,
        }
        for key, value in self.extra.items():
            out[key] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


# -- check suites -------------------------------------------------------------


def _row_from_sampled(id_, identity, rep, tol=None, detail="") -> CheckRow:
    return CheckRow(id=id_, identity=identity, ok=rep.ok,
                    max_residual=rep.max_discrepancy,
                    tol=rep.tol if tol is None else tol,
                    witness=rep.witness, detail=detail)


def _suite_legendre(loaded: LoadedSystem, samples: int, seed: int) -> List[CheckRow]:
    sys = loaded.sys
    rng = np.random.default_rng(seed)
    tol = sys.tol.legendre_roundtrip

    worst, witness = 0.0, None
    for _ in range(samples):
        v = sys.space.sample(rng)
        back = inverse_legendre(sys, legendre_transform(sys, v))
        r = max(float(np.max(np.abs(sys.space.coord_delta(back.q, v.q)))),
                float(np.max(np.abs(back.qdot - v.qdot))))
        if r > worst:
            worst, witness = r, v
    rows = [CheckRow("round-trip", "fiber-derivative-inverse", worst <= tol,
                     worst, tol, witness)]

    worst, witness = 0.0, None
    for _ in range(samples):
        v = sys.space.sample(rng)
        gap = float(np.max(np.abs(lagrangian_two_form(sys, v).matrix
                                  - lagrangian_two_form_blocks(sys, v).matrix)))
        if gap > worst:
            worst, witness = gap, v
    rows.append(CheckRow("form-agreement", "two-form-route-agreement",
                         worst <= 1e-10, worst, 1e-10, witness))

    cert = sys.certificate
    rows.append(CheckRow("hyperregular", "hyperregularity", cert.ok, 0.0,
                         cert.threshold, cert.witness,
                         detail=f"smallest mass singular value {cert.min_singular_value:.3e}"))
    return rows


def _flow_drift_row(id_, identity, sys, field_fn, monitors, seed, detail="") -> CheckRow:
    v0 = sys.space.sample(np.random.default_rng(seed))
    traj = integrate(field_fn, v0, FLOW_T1, FLOW_STEP, monitors=monitors)
    if traj.blown_up:
        return CheckRow(id_, identity, False, float("inf"), DRIFT_TOL, v0,
                        detail=f"integration aborted: {traj.reason}")
    drift = 0.0
    for values in traj.monitors.values():
        drift = max(drift, float(np.max(np.abs(values - values[0]))))
    note = detail or f"t in [0, {FLOW_T1:g}], step {FLOW_STEP:g}, seeded start"
    return CheckRow(id_, identity, drift <= DRIFT_TOL, drift, DRIFT_TOL, v0, detail=note)


def _suite_dynamics(loaded: LoadedSystem, samples: int, seed: int) -> List[CheckRow]:
    sys = loaded.sys
    rng = np.random.default_rng(seed)
    xi = euler_lagrange_field(sys)
    rows = []

    worst, witness = 0.0, None
    for _ in range(samples):
        v = sys.space.sample(rng)
        r = float(np.max(np.abs(xi(v).dq - v.qdot)))
        if r > worst:
            worst, witness = r, v
    rows.append(CheckRow("second-order", "second-order-form", worst <= 0.0,
                         worst, 0.0, witness))

    if loaded.controlled:
        fld = controlled_field(loaded.rcl)
        worst, witness = 0.0, None
        for _ in range(samples):
            v = sys.space.sample(rng)
            r = float(np.max(np.abs(fld(v).dq - v.qdot)))
            if r > worst:
                worst, witness = r, v
        rows.append(CheckRow("controlled-second-order", "second-order-form",
                             worst <= 0.0, worst, 0.0, witness))

    worst, witness = 0.0, None
    for _ in range(samples):
        v = sys.space.sample(rng)
        move = xi(v)
        grad = _energy_gradient(sys, v)
        r = abs(float(grad[:sys.n] @ move.dq + grad[sys.n:] @ move.dqdot))
        if r > worst:
            worst, witness = r, v
    rows.append(CheckRow("energy-conservation", "energy-conservation",
                         worst <= 1e-9, worst, 1e-9, witness))

    worst, witness = 0.0, None
    for _ in range(samples):
        v = sys.space.sample(rng)
        r = float(np.max(np.abs(xi(v).dqdot - euler_lagrange_ode(sys, v))))
        if r > worst:
            worst, witness = r, v
    rows.append(CheckRow("dual-route", "field-route-agreement",
                         worst <= 1e-9, worst, 1e-9, witness))

    rel = check_fl_related(sys, samples=samples, seed=seed)
    rows.append(CheckRow("chart-relatedness", "fiber-derivative-relatedness",
                         rel.ok, rel.max_residual, rel.tol, rel.witness))

    rows.append(_flow_drift_row("flow-energy-drift", "energy-conservation", sys, xi,
                                {"E": lambda v: action_energy(sys, v)[1]}, seed))
    return rows


def _energy_gradient(sys: LagrangianSystem, v: TangentPoint) -> np.ndarray:
    b = sys.blocks(v)
    return np.concatenate([b.B.T @ v.qdot - b.L_q, b.M @ v.qdot])


def _invariance_maps(rcl: RCLSystem) -> Dict[str, object]:
    maps = {}
    if rcl.force is not None:
        maps["force"] = rcl.force.value
    if rcl.control is not None and rcl.control.offset_map is not None:
        maps["control offset"] = rcl.control.offset_map.value
    if rcl.law is not None:
        maps["law"] = rcl.law.map.value
    return maps


def _suite_noether(loaded: LoadedSystem, samples: int, seed: int) -> List[CheckRow]:
    sym = loaded.symmetry
    sys = loaded.sys
    rows = [
        _row_from_sampled("invariance", "translation-invariance",
                          check_invariance(sym, sys, samples=samples, seed=seed,
                                           extra_maps=_invariance_maps(loaded.rcl))),
        _row_from_sampled("pointwise-conservation", "momentum-conservation",
                          check_noether_pointwise(sym, sys, samples=samples, seed=seed)),
        _row_from_sampled("generates-action", "momentum-generates-action",
                          check_momentum_generates_action(sym, sys, samples=samples,
                                                          seed=seed)),
        _row_from_sampled("composition", "momentum-composition",
                          check_momentum_composition(sym, sys, samples=samples, seed=seed)),
        _row_from_sampled("equivariance", "momentum-equivariance",
                          check_equivariance(sym, sys, samples=samples, seed=seed)),
    ]
    reg = check_regular_value(sym, sys, samples=samples, seed=seed)
    rows.append(CheckRow("regular-value", "regular-value", reg.ok, 0.0, reg.threshold,
                         reg.witness,
                         detail=f"smallest cyclic mass singular value "
                                f"{reg.min_singular_value:.3e}"))
    monitors = {f"J_{name}": momentum_monitor(sym, sys, i)
                for i, name in enumerate(sym.names)}
    rows.append(_flow_drift_row("flow-momentum-drift", "momentum-conservation",
                                sys, euler_lagrange_field(sys), monitors, seed))
    return rows


def _suite_reduction(loaded: LoadedSystem, mu: np.ndarray, samples: int,
                     seed: int) -> List[CheckRow]:
    sym = loaded.symmetry
    notes: List[str] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            red = point_reduce(loaded.rcl, sym, mu, samples=samples, seed=seed)
        notes.extend(str(w.message) for w in caught)
    except ValueError as err:
        return [CheckRow("reducibility", "level-set-reducibility", False,
                         float("inf"), 0.0, detail=str(err))]
    rows = [CheckRow("reducibility", "level-set-reducibility", True, 0.0, 0.0,
                     detail="; ".join(notes))]

    rows.append(_row_from_sampled("commutation", "projection-commutation",
                                  check_commutation(red, samples=samples, seed=seed)))
    rows.append(_row_from_sampled("section-independence", "section-independence",
                                  check_section_independence(red, samples=min(samples, 50),
                                                             seed=seed)))
    rows.append(_row_from_sampled("reduced-fiber-derivative",
                                  "reduced-fiber-derivative-pullback",
                                  check_reduced_legendre(red, samples=samples, seed=seed)))

    plain = red
    if loaded.controlled or loaded.rcl.control is not None:
        plain = point_reduce(loaded.sys, sym, mu, samples=samples, seed=seed)
    fld = reduced_field(plain)
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    for _ in range(samples):
        x = plain.space.sample(rng)
        move = fld(x)
        grad = plain.energy_gradient(x)
        m = plain.space.n
        r = abs(float(grad[:m] @ move.dq + grad[m:] @ move.dqdot))
        if r > worst:
            worst, witness = r, x
    rows.append(CheckRow("reduced-energy-conservation", "energy-conservation",
                         worst <= 1e-9, worst, 1e-9, witness))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        orb = orbit_reduce(loaded.rcl, sym, mu, algebra=loaded.algebra,
                           samples=samples, seed=seed)
    f_point = reduced_field(red)
    f_orbit = reduced_field(orb)
    worst, witness = 0.0, None
    for _ in range(samples):
        x = red.space.sample(rng)
        a, b = f_point(x), f_orbit(x)
        r = max(float(np.max(np.abs(a.dq - b.dq))),
                float(np.max(np.abs(a.dqdot - b.dqdot))))
        if r > worst:
            worst, witness = r, x
    rows.append(CheckRow("orbit-point-coincidence", "orbit-point-coincidence",
                         worst <= 1e-12, worst, 1e-12, witness))
    cert = orb.orbit_certificate
    rows.append(CheckRow("orbit-correction", "orbit-correction-form",
                         cert.correction_max == 0.0, cert.correction_max, 0.0,
                         detail="abelian translation group"))
    return rows


def _applicable_suites(loaded: LoadedSystem) -> Tuple[str, ...]:
    out = ["legendre", "dynamics"]
    if loaded.symmetry is not None:
        out.append("noether")
        if loaded.symmetry.shape:
            out.append("reduction")
    return tuple(out)


def run_suite(loaded: LoadedSystem, suite: str, mu=None, samples: int = 100,
              seed: int = 0) -> List[CheckRow]:
    """Rows for one named suite; raises SuiteInapplicable when it cannot run."""
    if suite not in SUITES:
        raise DefinitionError(f"unknown suite {suite!r}; expected one of {SUITES}")
    if suite == "all":
        rows = []
        for name in _applicable_suites(loaded):
            rows.extend(run_suite(loaded, name, mu=mu, samples=samples, seed=seed))
        return rows
    if suite in ("noether", "reduction") and loaded.symmetry is None:
        raise SuiteInapplicable(
            f"the {suite} suite needs a declared symmetry and {loaded.name} has none")
    if suite == "legendre":
        return _suite_legendre(loaded, samples, seed)
    if suite == "dynamics":
        return _suite_dynamics(loaded, samples, seed)
    if suite == "noether":
        return _suite_noether(loaded, samples, seed)
    if not loaded.symmetry.shape:
        raise SuiteInapplicable(
            "every coordinate is cyclic; nothing remains to reduce to")
    k = loaded.symmetry.k
    mu = np.zeros(k) if mu is None else np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (k,):
        raise DefinitionError(f"momentum value must have {k} components")
    return _suite_reduction(loaded, mu, samples, seed)


# -- validation ---------------------------------------------------------------


def run_validate(loaded: LoadedSystem, samples: int = 100, seed: int = 0) -> List[CheckRow]:
    """Construction certificates as rows: schema, regularity, invariance."""
    cert = loaded.sys.certificate
    rows = [
        CheckRow("schema", "document-schema", True, 0.0, 0.0,
                 detail=f"source {loaded.source}"),
        CheckRow("hyperregular", "hyperregularity", cert.ok, 0.0, cert.threshold,
                 cert.witness,
                 detail=f"smallest mass singular value {cert.min_singular_value:.3e}"),
    ]
    if loaded.symmetry is not None:
        rep = check_invariance(loaded.symmetry, loaded.sys, samples=samples, seed=seed,
                               extra_maps=_invariance_maps(loaded.rcl))
        rows.append(_row_from_sampled("invariance", "translation-invariance", rep))
        reg = check_regular_value(loaded.symmetry, loaded.sys, samples=samples, seed=seed)
        rows.append(CheckRow("regular-value", "regular-value", reg.ok, 0.0,
                             reg.threshold, reg.witness,
                             detail=f"smallest cyclic mass singular value "
                                    f"{reg.min_singular_value:.3e}"))
    if loaded.rcl.law is not None:
        law_cert = loaded.rcl.law.certificate
        rows.append(CheckRow("law-membership", "slice-membership", law_cert.ok,
                             law_cert.max_gap, law_cert.tol, law_cert.witness))
    return rows


# -- simulation ---------------------------------------------------------------


@dataclass(frozen=True)
class SimulationResult:
    header: Tuple[str, ...]
    rows: List[List[float]]
    blown_up: bool
    reason: Optional[str]

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(repr(float(x)) for x in row))
        return "\n".join(lines) + "\n"


def simulate(loaded: LoadedSystem, state: Sequence[float], t1: float,
             dt: float) -> SimulationResult:
    """Integrate the (controlled) dynamics and tabulate energy and momenta."""
    sys = loaded.sys
    n = sys.n
    state = np.asarray(state, dtype=float).reshape(-1)
    if state.size != 2 * n:
        raise DefinitionError(
            f"state needs {2 * n} components (coordinates then velocities), got {state.size}")
    v0 = TangentPoint(state[:n], state[n:])
    fld = controlled_field(loaded.rcl) if loaded.controlled else euler_lagrange_field(sys)
    monitors = {"E": lambda v: action_energy(sys, v)[1]}
    names = []
    if loaded.symmetry is not None:
        for i, name in enumerate(loaded.symmetry.names):
            monitors[f"J_{name}"] = momentum_monitor(loaded.symmetry, sys, i)
            names.append(f"J_{name}")
    traj = integrate(fld, v0, t1, dt, monitors=monitors)
    header = (("t",) + sys.space.coords
              + tuple(c + VELOCITY_SUFFIX for c in sys.space.coords)
              + ("E",) + tuple(names))
    rows = []
    for i, t in enumerate(traj.times):
        v = traj.states[i]
        row = [t, *v.q, *v.qdot, traj.monitors["E"][i]]
        row.extend(traj.monitors[name][i] for name in names)
        rows.append([float(x) for x in row])
    return SimulationResult(header=header, rows=rows, blown_up=traj.blown_up,
                            reason=traj.reason)


# -- equivalence --------------------------------------------------------------


_CONDITION_IDENTITIES = {
    "RCL-1": "slice-transport",
    "RCL-2": "controlled-field-relatedness",
    "level-sets": "level-set-transport",
    "equivariance": "action-equivariance",
    "control-subsets": "slice-transport",
    "fields": "field-relatedness",
    "correction-form": "orbit-correction-form",
}


DEFAULT_EQUIV_TOL_VALUE = 1e-8


def _condition_rows(conditions, tol: float) -> List[CheckRow]:
    return [CheckRow(c.condition.lower(), _CONDITION_IDENTITIES[c.condition],
                     c.ok, c.max_residual, tol, c.witness, detail=c.detail)
            for c in conditions]


def _reducible_bundles(pair: LoadedPair) -> Tuple[ReducibleSystem, ReducibleSystem]:
    for side, loaded in (("a", pair.a), ("b", pair.b)):
        if loaded.symmetry is None:
            raise SuiteInapplicable(
                f"system {side} of {pair.name} declares no symmetry; "
                "reducible matching does not apply")
    if pair.mu_a is None or pair.mu_b is None:
        raise SuiteInapplicable(
            f"{pair.name} declares no momentum values (mu_a, mu_b)")
    return (ReducibleSystem(pair.a.rcl, pair.a.symmetry, pair.mu_a),
            ReducibleSystem(pair.b.rcl, pair.b.symmetry, pair.mu_b))


def run_equivalence(pair: LoadedPair, kind: str, samples: int = 100, seed: int = 0,
                    tol: float = DEFAULT_EQUIV_TOL_VALUE) -> Tuple[List[CheckRow], dict]:
    """Rows and report metadata for one equivalence kind on a loaded pair."""
    if kind not in EQUIVALENCE_KINDS:
        raise DefinitionError(
            f"unknown equivalence kind {kind!r}; expected one of {EQUIVALENCE_KINDS}")
    if kind == "rcl":
        rep = check_rcl_equivalence(pair.a.rcl, pair.b.rcl, pair.pmap,
                                    samples=samples, seed=seed, tol=tol)
        return _condition_rows((rep.rcl1, rep.rcl2), tol), {"kind": kind, "mode": rep.mode}
    if kind in ("rpcl", "rocl"):
        A, B = _reducible_bundles(pair)
        try:
            if kind == "rpcl":
                rep = check_rpcl_equivalence(A, B, pair.pmap, samples=samples,
                                             seed=seed, tol=tol)
            else:
                rep = check_rocl_equivalence(A, B, pair.pmap,
                                             algebra_a=pair.a.algebra,
                                             algebra_b=pair.b.algebra,
                                             samples=samples, seed=seed, tol=tol)
        except ValueError as err:
            raise DefinitionError(str(err)) from err
        return _condition_rows(rep.conditions, tol), {"kind": kind, "mode": rep.mode}

    A, B = _reducible_bundles(pair)
    internal = {"lag-point": "lagrangian-point", "lag-orbit": "lagrangian-orbit"}[kind]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = theorem_harness(internal, [(pair.name, A, B, pair.pmap)],
                              samples=samples, seed=seed, tol=tol)
    entry = rep.entries[0]
    rows = [
        CheckRow("upstairs", "form-pullback-and-field-relatedness",
                 entry.upstairs_ok, entry.upstairs_residual, tol),
        CheckRow("downstairs", "reduced-form-pullback-and-field-relatedness",
                 entry.downstairs_ok, entry.downstairs_residual, tol),
        CheckRow("verdict-agreement", "verdict-agreement", entry.agree, 0.0, 0.0,
                 detail=f"upstairs pass={entry.upstairs_ok}, "
                        f"downstairs pass={entry.downstairs_ok}"),
    ]
    return rows, {"kind": kind}


# -- reduced-system emission --------------------------------------------------


def _solved_velocity_substitution(red) -> dict:
    """{cyclic velocity -> solved expression, cyclic coordinate -> offset}."""
    c = red.cyclic[0]
    name_c = red.sys.space.coords[c]
    vel_c = name_c + VELOCITY_SUFFIX
    p_c = differentiate(red.sys.lagrangian, vel_c)
    mass = differentiate(p_c, vel_c)
    if free_names(mass) & set(red.sys.symbols.velocities):
        raise ReductionError("cyclic momentum is not affine in the cyclic velocity")
    rest = substitute(p_c, {vel_c: Num(0.0)})
    solved = BinOp("/", BinOp("-", Num(float(red.mu[0])), rest), mass)
    offset = Num(float(red.offsets[0]))
    solved = substitute(solved, {name_c: offset})
    return {vel_c: solved, name_c: offset}


def _descend_exprs(red, exprs, sub) -> List[str]:
    shape = [i for i in range(red.sys.n) if i not in red.cyclic]
    return [to_source(fold_constants(substitute(exprs[i], sub))) for i in shape]


def _space_doc(space: ConfigSpace) -> dict:
    return {
        "coords": list(space.coords),
        "periodic": [bool(b) for b in space.periodic],
        "box": {"q": [[float(lo), float(hi)] for lo, hi in space.q_box],
                "qdot": [[float(lo), float(hi)] for lo, hi in space.v_box]},
    }


def reduce_emit(loaded: LoadedSystem, mu, offsets=None, samples: int = 100,
                seed: int = 0) -> Tuple[dict, List[str]]:
    """Reduce at mu and emit a self-contained document for the shape chart.

    The Lagrangian is the symbolically eliminated one, and any force,
    control offset, or law expressions are descended by the same
    substitution.  Exactly one cyclic coordinate is supported.  Returns
    the document and a list of notes (dropped directions, warnings).
    """
    if loaded.symmetry is None:
        raise DefinitionError(f"{loaded.name} declares no symmetry; nothing to reduce")
    sym = loaded.symmetry
    if sym.k != 1:
        raise ReductionError("emission supports exactly one cyclic coordinate")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    notes: List[str] = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            red = point_reduce(loaded.rcl, sym, mu, section_offsets=offsets,
                               samples=samples, seed=seed)
        notes.extend(str(w.message) for w in caught)
        lagrangian = to_source(routhian_expression(red))
    except ValueError as err:
        raise ReductionError(str(err)) from err

    sub = _solved_velocity_substitution(red)
    rcl = loaded.rcl
    doc: Dict[str, object] = {
        "name": f"{loaded.name}_reduced",
        "space": _space_doc(red.space),
        "params": dict(loaded.doc.get("params") or {}),
        "lagrangian": lagrangian,
        "reduction": {
            "parent": loaded.name,
            "mu": [float(v) for v in red.mu],
            "section_offsets": [float(v) for v in red.offsets],
        },
    }
    if loaded.doc.get("tolerances"):
        doc["tolerances"] = dict(loaded.doc["tolerances"])

    if rcl.force is not None:
        doc["force"] = _descend_exprs(red, rcl.force.exprs, sub)

    dropped_law = False
    if rcl.control is not None:
        survivors = [i for i in rcl.control.actuated if i not in red.cyclic]
        if survivors:
            shape = [i for i in range(loaded.sys.n) if i not in red.cyclic]
            spec: Dict[str, object] = {
                "actuated": [loaded.space.coords[i] for i in survivors]}
            if rcl.control.offset_map is not None:
                spec["offset"] = _descend_exprs(red, rcl.control.offset_map.exprs, sub)
            bounds = []
            for pos, i in enumerate(rcl.control.actuated):
                if i in survivors:
                    lo, hi = rcl.control.lo[pos], rcl.control.hi[pos]
                    bounds.append([None if not math.isfinite(lo) else float(lo),
                                   None if not math.isfinite(hi) else float(hi)])
            if any(b != [None, None] for b in bounds):
                spec["bounds"] = bounds
            doc["control"] = spec
            if rcl.law is not None:
                doc["law"] = _descend_exprs(red, rcl.law.map.exprs, sub)
        else:
            dropped = [loaded.space.coords[i] for i in rcl.control.actuated]
            doc["reduction"]["dropped_actuated"] = dropped
            if rcl.law is not None:
                dropped_law = True
                doc["reduction"]["dropped_law"] = True
    if dropped_law:
        notes.append("the declared law actuates only cyclic directions; it was dropped")

    try:
        _build_system(doc, str(doc["name"]), "emitted")
    except DefinitionError as err:
        raise ReductionError(f"emitted document fails to reload: {err}") from err
    return doc, notes
