"""Scenario files (JSON, ``"schema": 1``) and their parsed form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (ControlSystem, FieldFamily, Sampler, Section, build_family,
                      control_model_from_json)
from .flow import IntegratorConfig
from .orbits import DEFAULT_RADIUS, DEFAULT_SV_CUTOFF
from .poly import Polynomial
from .smooth import SmoothMap, SubsetModel
from .symmetry import CATALOG, GroupAction, InvariantMap, QuotientModel, catalog_action

SCHEMA = 1


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    system: ControlSystem
    sections: list[Section]
    base_point: np.ndarray
    sampler: Sampler = field(default_factory=Sampler)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    action: GroupAction | None = None
    action_spec: object = None
    invariant_map: InvariantMap | None = None
    radius: float = DEFAULT_RADIUS
    sv_cutoff: float = DEFAULT_SV_CUTOFF
    bracket_depth: int = 2
    classify_field: str | None = None
    probes: list | None = None
    witness_samples: np.ndarray | None = None
    raw: dict = field(default_factory=dict)
    _family: FieldFamily | None = None

    @property
    def family(self) -> FieldFamily:
        if self._family is None:
            self._family = build_family(self.system, self.sections)
        return self._family

    @property
    def seeded_sampler(self) -> Sampler:
        return Sampler(self.sampler.word_count, self.sampler.max_letters, self.sampler.time_scale,
                       self.seed, self.sampler.durations)


def _poly(data, nvars: int, nout: int, what: str) -> Polynomial:
    try:
        p = Polynomial.from_json(data, nvars=nvars)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: {exc}") from None
    if p.nout != nout:
        raise ScenarioError(f"{what} has {p.nout} outputs, expected {nout}")
    return p


def _model(data, what: str) -> SubsetModel:
    try:
        return SubsetModel.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: {exc}") from None


def parse_action(spec, n: int):
    """Catalog name or explicit matrices/generator; returns (action, invariant map or None)."""
    if spec is None:
        return None, None
    if isinstance(spec, str):
        if spec not in CATALOG:
            raise ScenarioError(f"unknown catalog action {spec!r}; known: {', '.join(CATALOG)}")
        action, inv = catalog_action(spec)
    elif isinstance(spec, dict) and "matrices" in spec:
        action, inv = GroupAction.finite(spec["matrices"]), None
    elif isinstance(spec, dict) and "generator" in spec:
        action, inv = GroupAction.one_parameter(spec["generator"], spec.get("sample_params")), None
    else:
        raise ScenarioError("action must be a catalog name or {'matrices': ...} / {'generator': ...}")
    if action.dim != n:
        raise ScenarioError(f"action acts on R^{action.dim}, state space is R^{n}")
    return action, inv


def from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if data.get("schema") != SCHEMA:
        raise ScenarioError(f"unsupported scenario schema {data.get('schema')!r} (expected {SCHEMA})")
    try:
        state = _model(data["state_model"], "state_model")
        n = state.ambient_dim
        control = control_model_from_json(data["control_model"])
        m = control.dim
        dyn = _poly(data["dynamics"], n + m, n, "dynamics")
        system = ControlSystem(state, control, SmoothMap.poly(dyn))
        sections = []
        for i, s in enumerate(data["sections"]):
            label = s.get("label", f"sigma{i}")
            dom = _model(s["domain"], f"section {label} domain") if "domain" in s else state
            sections.append(Section(SmoothMap.poly(_poly(s["map"], n, m, f"section {label}")), dom, label))
        if not sections:
            raise ScenarioError("scenario needs at least one section")
        labels = [s.label for s in sections]
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"duplicate section labels: {labels}")
        base = np.asarray(data.get("base_point", [0.0] * n), dtype=float)
        if base.shape != (n,):
            raise ScenarioError(f"base_point must have {n} coordinates")
        action, inv = parse_action(data.get("action"), n)
        if data.get("invariant_map") is not None:
            if action is None:
                raise ScenarioError("invariant_map given without an action")
            im = data["invariant_map"]
            quotient = _model(im["quotient"], "invariant_map quotient")
            rho = _poly(im["rho"], n, quotient.ambient_dim, "invariant_map rho")
            inv = InvariantMap(SmoothMap.poly(rho), action, QuotientModel(quotient))
        analysis = data.get("analysis", {})
        classify = data.get("classify") or {}
        if classify.get("field") is not None and classify["field"] not in labels:
            raise ScenarioError(f"classify field {classify['field']!r} is not a section label")
        witnesses = data.get("witness_samples")
        return Scenario(
            name=str(data.get("name", "scenario")),
            system=system,
            sections=sections,
            base_point=base,
            sampler=Sampler.from_json(data.get("sampler")),
            integrator=IntegratorConfig.from_json(data.get("integrator")),
            seed=int(data.get("seed", 0)),
            action=action,
            action_spec=data.get("action"),
            invariant_map=inv,
            radius=float(analysis.get("radius", DEFAULT_RADIUS)),
            sv_cutoff=float(analysis.get("sv_cutoff", DEFAULT_SV_CUTOFF)),
            bracket_depth=int(analysis.get("bracket_depth", 2)),
            classify_field=classify.get("field"),
            probes=classify.get("probes"),
            witness_samples=None if witnesses is None else np.asarray(witnesses, dtype=float).reshape(-1, n),
            raw=data,
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc.__class__.__name__}: {exc}") from None


def load(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    return from_dict(data)
