"""Built-in demo scenarios."""
from __future__ import annotations

import copy


def _t(c, *e):
    return {"c": float(c), "e": list(e)}


def _box(lo, hi):
    return {"box": {"lower": lo, "upper": hi}}


_R1 = {"dim": 1, "equalities": [], "inequalities": []}
_R2 = {"dim": 2, "equalities": [], "inequalities": []}
_HALFLINE = {"dim": 1, "equalities": [], "inequalities": [[_t(1, 1)]]}

# each demo: scenario dict plus the commands `symctl demo` runs on it
_DEMOS = {
    "z2-line-scale": ({
        "name": "z2-line-scale",
        "state_model": _R1,
        "control_model": _box([-2.0], [2.0]),
        "dynamics": [[_t(1, 1, 1)]],
        "sections": [{"label": "scale", "map": [[_t(1, 0)]]}],
        "action": "z2-line",
        "base_point": [1.0],
        "sampler": {"word_count": 200, "max_letters": 4, "time_scale": 0.5},
        "classify": {"field": "scale", "probes": [[0.0], [1.0]]},
    }, ("check", "reduce", "orbit-dim")),
    "so2-radial": ({
        "name": "so2-radial",
        "state_model": _R2,
        "control_model": _box([-1.0], [1.0]),
        "dynamics": [[_t(1, 1, 0, 1)], [_t(1, 0, 1, 1)]],
        "sections": [
            {"label": "radial", "map": [[_t(1, 0, 0)]]},
            {"label": "invariant-gain", "map": [[_t(0.1, 2, 0), _t(0.1, 0, 2)]]},
        ],
        "action": "so2-plane",
        "base_point": [1.0, 0.0],
        "sampler": {"word_count": 200, "max_letters": 4, "time_scale": 0.5},
    }, ("check", "reduce")),
    "so2-rotation-only": ({
        "name": "so2-rotation-only",
        "state_model": _R2,
        "control_model": _box([-1.0], [1.0]),
        "dynamics": [[_t(-1, 0, 1, 1)], [_t(1, 1, 0, 1)]],
        "sections": [{"label": "rotate", "map": [[_t(1, 0, 0)]]}],
        "action": "so2-plane",
        "base_point": [1.0, 0.0],
    }, ("check", "reduce")),
    "so2-broken": ({
        "name": "so2-broken",
        "state_model": _R2,
        "control_model": _box([-1.0], [1.0]),
        "dynamics": [[_t(1, 1, 0, 1), _t(1, 0, 0, 0)], [_t(1, 0, 1, 1)]],
        "sections": [{"label": "drift", "map": [[_t(1, 0, 0)]]}],
        "action": "so2-plane",
        "base_point": [1.0, 0.0],
    }, ("check", "reduce")),
    "z2-plane-cone": ({
        "name": "z2-plane-cone",
        "state_model": _R2,
        "control_model": _box([-0.5], [0.5]),
        "dynamics": [
            [_t(0.2, 1, 0, 0), _t(-1, 0, 1, 0), _t(1, 1, 0, 1)],
            [_t(1, 1, 0, 0), _t(0.2, 0, 1, 0), _t(1, 0, 1, 1)],
        ],
        "sections": [
            {"label": "spiral", "map": [[]]},
            {"label": "spiral-grow", "map": [[_t(0.3, 0, 0)]]},
        ],
        "action": "z2-plane",
        "base_point": [1.0, 0.5],
        "sampler": {"word_count": 200, "max_letters": 4, "time_scale": 0.5},
    }, ("check", "reduce")),
    "brockett-pair": ({
        "name": "brockett-pair",
        "state_model": _R2,
        "control_model": _box([-1.0, -1.0], [1.0, 1.0]),
        "dynamics": [[_t(1, 0, 0, 1, 0)], [_t(1, 1, 0, 0, 1)]],
        "sections": [
            {"label": "X1", "map": [[_t(1, 0, 0)], []]},
            {"label": "X2", "map": [[], [_t(1, 0, 0)]]},
        ],
        "base_point": [0.0, 0.0],
        "sampler": {"word_count": 200, "max_letters": 4, "time_scale": 0.5},
    }, ("reach", "orbit-dim")),
    "circle-orbit": ({
        "name": "circle-orbit",
        "state_model": _R2,
        "control_model": _box([-1.0], [1.0]),
        "dynamics": [[_t(-1, 0, 1, 1)], [_t(1, 1, 0, 1)]],
        "sections": [{"label": "rotate", "map": [[_t(1, 0, 0)]]}],
        "action": "so2-plane",
        "base_point": [1.0, 0.0],
        "sampler": {"word_count": 200, "max_letters": 4, "time_scale": 1.6},
        "analysis": {"radius": 0.2},
    }, ("check", "reach", "orbit-dim")),
    "halfline": ({
        "name": "halfline",
        "state_model": _HALFLINE,
        "control_model": _box([-1.0, -1.0], [1.0, 1.0]),
        "dynamics": [[_t(1, 1, 1, 0), _t(1, 0, 0, 1)]],
        "sections": [
            {"label": "scale", "map": [[_t(1, 0)], []]},
            {"label": "drift", "map": [[], [_t(1, 0)]]},
            {"label": "drift-back", "map": [[], [_t(-1, 0)]]},
        ],
        "base_point": [1.0],
        "classify": {"field": "scale", "probes": [[0.0], [1.0]]},
    }, ("classify",)),
    "fullline": ({
        "name": "fullline",
        "state_model": _R1,
        "control_model": _box([-1.0, -1.0], [1.0, 1.0]),
        "dynamics": [[_t(1, 1, 1, 0), _t(1, 0, 0, 1)]],
        "sections": [
            {"label": "scale", "map": [[_t(1, 0)], []]},
            {"label": "drift", "map": [[], [_t(1, 0)]]},
            {"label": "drift-back", "map": [[], [_t(-1, 0)]]},
        ],
        "base_point": [1.0],
        "classify": {"field": "drift", "probes": [[0.0], [1.0]]},
    }, ("classify",)),
}

NAMES = tuple(_DEMOS)


def demo_scenario(name: str) -> dict:
    """Scenario dict for a demo (a fresh copy, safe to mutate)."""
    if name not in _DEMOS:
        raise KeyError(f"unknown demo {name!r}; known: {', '.join(NAMES)}")
    data = copy.deepcopy(_DEMOS[name][0])
    data["schema"] = 1
    data.setdefault("seed", 0)
    return data


def demo_commands(name: str) -> tuple[str, ...]:
    return _DEMOS[name][1]
