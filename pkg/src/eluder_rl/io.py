"""JSON descriptions of environments, policy classes and shattered trees.

Numbers may be JSON numbers or strings such as ``"3/8"``. Schema and
invariant violations become :class:`ConfigError` with a ``file:line $.path``
location.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from pathlib import Path

import jsonschema

from .complexity import ShatteredTree, gf2_standard_tree
from .env import DeterministicMdp, StochasticSim
from .errors import ConfigError, EluderError
from .exact import as_fraction
from .gf2 import bits_to_int, int_to_bits
from .policy import FourierSupport, Gf2Linear, LinearThreshold, TabularAll, Finite

_NUM = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$|^-?\d*\.\d+$"}]}
_STATE = {"type": ["integer", "string"]}
_DIST = {"type": "array", "minItems": 1, "items": {"type": "array", "prefixItems": [{}, _NUM],
                                                     "minItems": 2, "maxItems": 2}}

ENV_SCHEMA = {
    "type": "object",
    "required": ["horizon", "states", "actions", "transitions", "rewards", "start"],
    "properties": {
        "horizon": {"type": "integer", "minimum": 1},
        "states": {"type": "array", "items": _STATE, "minItems": 1},
        "actions": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "start": _STATE,
        "reward_bound": _NUM,
        "initial_action": {"type": ["integer", "null"]},
        "transitions": {"type": "array", "items": {
            "type": "array", "minItems": 4, "maxItems": 4,
            "prefixItems": [_STATE, {"type": "integer"}, {"type": "integer", "minimum": 0},
                            {"oneOf": [_STATE, _DIST]}]}},
        "rewards": {"type": "array", "items": {
            "type": "array", "minItems": 4, "maxItems": 4,
            "prefixItems": [_STATE, {"type": "integer"}, {"type": "integer", "minimum": 0},
                            {"oneOf": [_NUM, _DIST]}]}},
    },
}

_PAIR_ROW = {"type": "array", "minItems": 3}

SPACE_SCHEMA = {
    "type": "object",
    "required": ["class"],
    "properties": {"class": {"enum": ["gf2", "threshold", "fourier", "tabular", "finite"]}},
    "allOf": [
        {"if": {"properties": {"class": {"const": "gf2"}}},
         "then": {"required": ["dimension", "features"],
                  "properties": {"dimension": {"type": "integer", "minimum": 1},
                                 "features": {"type": "array", "items": _PAIR_ROW}}}},
        {"if": {"properties": {"class": {"const": "threshold"}}},
         "then": {"required": ["dimension", "features"],
                  "properties": {"dimension": {"type": "integer", "minimum": 1},
                                 "features": {"type": "array", "items": {"type": "array", "minItems": 4}}}}},
        {"if": {"properties": {"class": {"const": "fourier"}}},
         "then": {"required": ["dimension", "support_family", "features"],
                  "properties": {"dimension": {"type": "integer", "minimum": 1, "maximum": 4},
                                 "support_family": {"type": "array"},
                                 "mode": {"enum": ["relaxation", "exact"]},
                                 "features": {"type": "array", "items": _PAIR_ROW}}}},
        {"if": {"properties": {"class": {"const": "tabular"}}},
         "then": {"required": ["pairs", "actions"],
                  "properties": {"pairs": {"type": "array", "items": {"type": "array", "minItems": 2,
                                                                        "maxItems": 2}},
                                 "actions": {"type": "array", "items": {"type": "integer"}}}}},
        {"if": {"properties": {"class": {"const": "finite"}}},
         "then": {"required": ["policies"],
                  "properties": {"policies": {"type": "array", "minItems": 1,
                                              "items": {"type": "array", "items": _PAIR_ROW}},
                                 "actions": {"type": "array", "items": {"type": "integer"}}}}},
    ],
}

TREE_SCHEMA = {
    "type": "object",
    "required": ["depth", "nodes", "witnesses", "space"],
    "properties": {
        "depth": {"type": "integer", "minimum": 1},
        "nodes": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3}},
        "witnesses": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}},
        "space": {"type": "object"},
    },
}


# ---------------------------------------------------------------------------
# locating errors in the source text

def locate(text: str, path) -> int:
    """1-based line of the JSON value at ``path`` (keys and list indices), best effort."""
    pos = 0
    for part in path:
        if isinstance(part, str):
            m = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
            if m is None:
                break
            pos = m.end()
        else:
            pos = _skip_to_element(text, pos, part)
    return text.count("\n", 0, pos) + 1


def _skip_to_element(text, pos, index):
    """Position of element ``index`` of the array starting at or after ``pos``."""
    start = text.find("[", pos)
    if start < 0:
        return pos
    if index == 0:
        return start + 1
    depth, i, count, in_str = 0, start + 1, 0, False
    while i < len(text):
        c = text[i]
        if in_str:
            if c == "\\":
                i += 1
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c in "[{":
            depth += 1
        elif c in "]}":
            if depth == 0:
                return i
            depth -= 1
        elif c == "," and depth == 0:
            count += 1
            if count == index:
                return i + 1
        i += 1
    return pos


def _where(source, text, path) -> str:
    dotted = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)
    if text is None:
        return f"{source} {dotted}"
    return f"{source}:{locate(text, path)} {dotted}"


def error_path(error) -> list:
    """Path of a schema error; a missing required key is appended so the message names it."""
    path = list(error.absolute_path)
    if error.validator == "required" and isinstance(error.instance, dict):
        missing = [k for k in error.validator_value if k not in error.instance]
        path += missing[:1]
    return path


def schema_check(data, schema, source, text):
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _where(source, text, error_path(e)))


def read_json(path) -> tuple[object, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"{path}:{exc.lineno}") from None


def _num(x) -> Fraction:
    return as_fraction(Fraction(x) if isinstance(x, str) else x)


# ---------------------------------------------------------------------------
# environments

def env_from_dict(data: dict, source: str = "<env>", text: str | None = None):
    """Build a DeterministicMdp (all rows single-valued) or an explicit StochasticSim."""
    schema_check(data, ENV_SCHEMA, source, text)
    H = data["horizon"]
    stochastic = any(isinstance(row[3], list) for row in data["transitions"] + data["rewards"]) \
        or data.get("initial_action") is not None
    rbar = _num(data["reward_bound"]) if "reward_bound" in data else None
    for i, row in enumerate(data["transitions"] + data["rewards"]):
        if row[2] >= H:
            key = "transitions" if i < len(data["transitions"]) else "rewards"
            j = i if key == "transitions" else i - len(data["transitions"])
            raise ConfigError(f"epoch {row[2]} outside 0..{H - 1}", _where(source, text, [key, j, 2]))
    try:
        if not stochastic:
            transitions = {(s, a, h): s2 for s, a, h, s2 in data["transitions"]}
            rewards = {(s, a, h): _num(r) for s, a, h, r in data["rewards"]}
            return DeterministicMdp(H, data["states"], data["actions"], transitions, rewards,
                                    data["start"], rbar)
        kernel = {(s, a, h): (tuple((t, _num(p)) for t, p in d) if isinstance(d, list) else ((d, 1),))
                  for s, a, h, d in data["transitions"]}
        rdist = {(s, a, h): (tuple((_num(r), _num(p)) for r, p in d) if isinstance(d, list)
                             else ((_num(d), 1),))
                 for s, a, h, d in data["rewards"]}
        if rbar is None:
            raise ConfigError("stochastic environments need an explicit reward_bound",
                              _where(source, text, []))
        return StochasticSim(H, data["states"], data["actions"], data["start"], rbar,
                             kernel=kernel, reward_dist=rdist,
                             initial_action=data.get("initial_action"))
    except ConfigError:
        raise
    except (EluderError, ValueError) as exc:
        raise ConfigError(str(exc), _where(source, text, _blame(data, str(exc)))) from None


def _blame(data, message):
    """Guess the offending row from an invariant message quoting ``(s, a, h)``."""
    m = re.search(r"\(([^()]*)\)", message)
    if m:
        for key in ("transitions", "rewards"):
            for i, row in enumerate(data.get(key, [])):
                if ", ".join(repr(v) for v in row[:3]) == m.group(1):
                    return [key, i]
    if "reward_bound" in message and "reward_bound" in data:
        return ["reward_bound"]
    return []


def load_env(path):
    data, text = read_json(path)
    return env_from_dict(data, str(path), text)


def _frac_str(x) -> str | int:
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def env_to_dict(env) -> dict:
    out = {"horizon": env.horizon, "states": list(env.states), "actions": list(env.actions),
           "start": env.start, "reward_bound": _frac_str(env.reward_bound)}
    if isinstance(env, DeterministicMdp):
        out["transitions"] = [[s, a, h, t] for (s, a, h), t in sorted(env.transitions.items(), key=repr)]
        out["rewards"] = [[s, a, h, _frac_str(r)] for (s, a, h), r in sorted(env.rewards.items(), key=repr)]
        return out
    out["initial_action"] = env.initial_action
    out["transitions"] = [[s, a, h, [[t, _frac_str(p)] for t, p in d]]
                          for (s, a, h), d in sorted(env.kernel.items(), key=repr)]
    out["rewards"] = [[s, a, h, [[_frac_str(r), _frac_str(p)] for r, p in d]]
                      for (s, a, h), d in sorted(env.reward_dist.items(), key=repr)]
    return out


def dump_env(env, path) -> None:
    Path(path).write_text(json.dumps(env_to_dict(env), indent=1) + "\n")


# ---------------------------------------------------------------------------
# policy classes

def _bits(v):
    return bits_to_int(v) if isinstance(v, str) else int(v)


def space_from_dict(data: dict, source: str = "<space>", text: str | None = None):
    schema_check(data, SPACE_SCHEMA, source, text)
    kind = data["class"]
    try:
        if kind == "gf2":
            feats = {(s, h): _bits(v) for s, h, v in data["features"]}
            for i, (s, h, v) in enumerate(data["features"]):
                if _bits(v) >> data["dimension"]:
                    raise ConfigError(f"feature wider than dimension {data['dimension']}",
                                      _where(source, text, ["features", i, 2]))
            return Gf2Linear(data["dimension"], feats)
        if kind == "threshold":
            feats = {(s, h): ([_num(x) for x in phi], _num(c)) for s, h, phi, c in data["features"]}
            return LinearThreshold(data["dimension"], feats)
        if kind == "fourier":
            family = [tuple(S) for S in data["support_family"]]
            feats = {(s, h): tuple(x) for s, h, x in data["features"]}
            return FourierSupport(data["dimension"], family, feats, mode=data.get("mode", "relaxation"))
        if kind == "tabular":
            return TabularAll([tuple(p) for p in data["pairs"]], data["actions"])
        policies = [{(s, h): a for s, h, a in table} for table in data["policies"]]
        return Finite(policies, data.get("actions"))
    except ConfigError:
        raise
    except (EluderError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), _where(source, text, [])) from None


def load_space(path):
    data, text = read_json(path)
    return space_from_dict(data, str(path), text)


def space_to_dict(space) -> dict:
    if isinstance(space, Gf2Linear):
        return {"class": "gf2", "dimension": space.dimension,
                "features": [[s, h, int_to_bits(v, space.dimension)]
                             for (s, h), v in sorted(space.features.items(), key=repr)]}
    if isinstance(space, LinearThreshold):
        return {"class": "threshold", "dimension": space.dimension,
                "features": [[s, h, [_frac_str(x) for x in phi], _frac_str(c)]
                             for (s, h), (phi, c) in sorted(space.features.items(), key=repr)]}
    if isinstance(space, FourierSupport):
        return {"class": "fourier", "dimension": space.dimension, "mode": space.mode,
                "support_family": [list(S) for S in space.family],
                "features": [[s, h, list(x)] for (s, h), x in sorted(space.features.items(), key=repr)]}
    if isinstance(space, TabularAll):
        return {"class": "tabular", "pairs": [list(p) for p in space.domain], "actions": list(space.actions)}
    if isinstance(space, Finite):
        return {"class": "finite", "actions": list(space.actions),
                "policies": [[[s, h, a] for (s, h), a in sorted(table.items(), key=repr)]
                             for table in space.tables]}
    raise TypeError(f"no JSON form for {type(space).__name__}")


def dump_space(space, path) -> None:
    Path(path).write_text(json.dumps(space_to_dict(space), indent=1) + "\n")


# ---------------------------------------------------------------------------
# shattered trees

def tree_from_dict(data: dict, source: str = "<tree>", text: str | None = None):
    """``{"depth", "space", "nodes": [[prefix bits, s, h]], "witnesses": [[labels bits, theta]]}``."""
    schema_check(data, TREE_SCHEMA, source, text)
    space = space_from_dict(data["space"], source, text)
    nodes = {tuple(int(c) for c in p): (s, h) for p, s, h in data["nodes"]}
    witnesses = {tuple(int(c) for c in p): (_bits(t) if isinstance(space, Gf2Linear) else t)
                 for p, t in data["witnesses"]}
    tree = ShatteredTree(data["depth"], nodes, witnesses)
    if not tree.verify(space):
        raise ConfigError("tree is not shattered by its witnesses", _where(source, text, ["witnesses"]))
    return space, tree


def load_tree(path):
    data, text = read_json(path)
    return tree_from_dict(data, str(path), text)


def standard_tree(dimension: int):
    return gf2_standard_tree(dimension)
