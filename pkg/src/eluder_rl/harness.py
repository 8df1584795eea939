"""Experiment orchestration: config validation, per-seed runs, CSV/JSON artifacts, exit status.

Exit status: 0 when every enabled audit passes, 1 on an audit failure, 2 on a
configuration error, 3 when an environment or class breaks its contract at
run time.
"""

from __future__ import annotations

import copy
import csv
import io as _io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import adversary as adv
from . import io
from .complexity import (eluder_dim_exact, fourier_dim_check, degree_family, littlestone_dim_exact,
                         random_feature_experiment, sphere_packing)
from .det_elim import audit_deterministic, run_deterministic_elimination, stack_episode_bound, det_regret_bound
from .env import DeterministicMdp, augment_initial, q_gap
from .errors import (AssumptionViolation, ConfigError, DPLimitExceeded, EmptyClassError,
                     EnvironmentContractError, NotEnumerableError)
from .instances import random_det_instance, random_stoch_instance
from .policy import Gf2Linear, brute_force_oracle, elimination_oracle, ConstraintSet
from .stoch_elim import RunConfig, audit_trace, check_outcome, run_policy_elimination

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG, EXIT_CONTRACT = 0, 1, 2, 3
RUN_COLUMNS = ["episode", "event", "reward", "cum_regret", "stack_depth", "z_size"]
FEATURE_COLUMNS = ["trial", "length", "bound", "exceeded"]
SUBCOMMANDS = ("run-det", "run-stoch", "adversary", "dims", "oracle-check", "audit")
ENV_PREFIX = "ELUDER_RL_"

_FILE_OR_INLINE = {"type": ["string", "object"]}
_GENERATOR = {"type": "object", "required": ["kind"],
              "properties": {"kind": {"enum": ["random-det", "random-stoch"]},
                             "horizon": {"type": "integer", "minimum": 1},
                             "dimension": {"type": "integer", "minimum": 1}}}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["subcommand"],
    "properties": {
        "subcommand": {"enum": list(SUBCOMMANDS)},
        "env": _FILE_OR_INLINE,
        "space": _FILE_OR_INLINE,
        "generator": _GENERATOR,
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "out": {"type": "string"},
        "jobs": {"type": "integer", "minimum": 1},
        "episodes": {"type": ["integer", "string"]},
        "params": {"type": "object", "properties": {
            "gap": {"oneOf": [_POS, {"const": "auto"}]},
            "epsilon": _POS, "delta": _POS,
            "dim_e": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "auto"}]},
            "t_star": {"type": "integer", "minimum": 1},
            "n_paths": {"type": "integer", "minimum": 1}}},
        "limits": {"type": "object", "properties": {
            "budget": {"type": "integer", "minimum": 1},
            "enum": {"type": "integer", "minimum": 1}}},
        "class": {"enum": ["gf2", "tree"]},
        "tree": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "reward_bound": {"type": ["number", "string"]},
        "agent": {"enum": ["greedy", "det-elim", "scripted"]},
        "script": {"type": "array", "items": {"type": "array", "items": {"enum": [0, 1]}}},
        "which": {"type": "array", "items": {"enum": ["eluder", "littlestone"]}},
        "universe": {"type": "array", "items": {"type": "array", "minItems": 2}},
        "experiment": {"type": "object",
                       "required": ["d", "epsilon", "size", "delta", "trials"],
                       "properties": {"d": {"type": "integer", "minimum": 1}, "epsilon": _POS,
                                      "size": {"type": "integer", "minimum": 2}, "delta": _POS,
                                      "trials": {"type": "integer", "minimum": 1}}},
        "fourier": {"type": "object", "required": ["dimension", "degree"],
                    "properties": {"dimension": {"type": "integer", "minimum": 1, "maximum": 4},
                                   "degree": {"type": "integer", "minimum": 0}}},
        "queries": {"type": "integer", "minimum": 1},
        "constraint_sets": {"type": "integer", "minimum": 1},
        "runs": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"subcommand": {"enum": ["run-det", "run-stoch"]}}},
         "then": {"anyOf": [{"required": ["env", "space"]}, {"required": ["generator"]}]}},
        {"if": {"properties": {"subcommand": {"const": "adversary"}}},
         "then": {"required": ["horizon", "episodes"],
                  "anyOf": [{"required": ["dimension"]}, {"required": ["tree"]}]}},
        {"if": {"properties": {"subcommand": {"const": "oracle-check"}}},
         "then": {"required": ["space"]}},
        {"if": {"properties": {"subcommand": {"const": "audit"}}},
         "then": {"required": ["runs"]}},
    ],
}


@dataclass
class ExperimentConfig:
    subcommand: str
    data: dict
    seeds: list = field(default_factory=lambda: [0])
    out: Path = Path("out")
    jobs: int = 1
    source: str = "<config>"
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data: dict, source="<config>", text=None, base_dir=".") -> "ExperimentConfig":
        io.schema_check(data, CONFIG_SCHEMA, source, text)
        return cls(data["subcommand"], data, list(data.get("seeds", [0])), Path(data.get("out", "out")),
                   data.get("jobs", 1), source, Path(base_dir))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        data, text = io.read_json(path)
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", str(path))
        return cls.from_dict(data, str(path), text, Path(path).parent)

    def get(self, key, default=None):
        return self.data.get(key, default)

    def resolve(self, key):
        """Inline object or path (relative to the config file) for ``env``/``space``."""
        value = self.data.get(key)
        if value is None:
            raise ConfigError(f"'{key}' is required", f"{self.source} $.{key}")
        if isinstance(value, dict):
            return value, f"{self.source} $.{key}", None
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        data, text = io.read_json(path)
        return data, str(path), text


def apply_env_overrides(data: dict, environ=None) -> dict:
    """``ELUDER_RL_<KEY>`` overrides top-level config keys; values are parsed as JSON when possible."""
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(data)
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key == "config":
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if key == "seed":
            key, value = "seeds", [value]
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# formatting

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, float):
        return "inf" if math.isinf(x) else format(x, ".12g")
    return str(x)


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def csv_text(columns, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# one seed of each experiment; each returns (summary dict, csv text, extra files)

def _load_pair(cfg: ExperimentConfig, seed: int):
    gen = cfg.get("generator")
    if gen is not None:
        if gen["kind"] == "random-det":
            inst = random_det_instance(seed, gen.get("horizon"), gen.get("dimension"))
        else:
            inst = random_stoch_instance(seed, gen.get("horizon", 2), gen.get("dimension", 2))
        return inst.env, inst.space
    env_data, env_src, env_text = cfg.resolve("env")
    space_data, sp_src, sp_text = cfg.resolve("space")
    return io.env_from_dict(env_data, env_src, env_text), io.space_from_dict(space_data, sp_src, sp_text)


def _dim_e(space, env, cfg) -> int:
    budget = cfg.get("limits", {}).get("budget", 200_000)
    pairs = _pairs(space, env)
    result = eluder_dim_exact(space, pairs, budget=budget)
    if not result.exact:
        raise ConfigError("eluder dimension search hit its budget; give params.dim_e explicitly",
                          f"{cfg.source} $.params.dim_e")
    return result.value


def _pairs(space, env):
    feats = getattr(space, "features", None)
    if isinstance(feats, dict):
        return sorted(feats, key=repr)
    from .env import reachable
    return sorted(((s, h) for h, ss in reachable(env).items() for s in ss), key=repr)


def run_det_seed(cfg: ExperimentConfig, seed: int):
    mdp, space = _load_pair(cfg, seed)
    if not isinstance(mdp, DeterministicMdp):
        raise ConfigError("run-det needs a deterministic environment", f"{cfg.source} $.env")
    params = cfg.get("params", {})
    dim = params.get("dim_e", "auto")
    dim = _dim_e(space, mdp, cfg) if dim == "auto" else dim
    episodes = cfg.get("episodes", "auto")
    if episodes == "auto":
        episodes = stack_episode_bound(mdp.horizon, dim) + mdp.horizon
    rep = run_deterministic_elimination(mdp, space, int(episodes))
    audit = audit_deterministic(rep, space, mdp)
    bound = det_regret_bound(mdp.reward_bound, mdp.horizon, dim)
    regret = rep.regret()
    ok = audit.ok and regret <= bound
    rows = [(r.episode, r.event, r.reward, c, r.stack_depth, r.z_size)
            for r, c in zip(rep.episodes, rep.cumulative_regret())]
    summary = {"kind": "run-det", "seed": seed, "episodes": int(episodes), "horizon": mdp.horizon,
               "dim_e": dim, "reward_bound": mdp.reward_bound, "v_star": rep.v_star, "regret": regret,
               "bound": bound, "margin": bound - regret, "audit": audit.as_dict(), "ok": ok}
    return summary, csv_text(RUN_COLUMNS, rows), {}


def run_stoch_seed(cfg: ExperimentConfig, seed: int):
    sim, space = _load_pair(cfg, seed)
    if isinstance(sim, DeterministicMdp):
        sim = sim.as_stochastic()
    if sim.initial_action is None:
        sim = augment_initial(sim, {sim.start: 1})
        space = space.shifted(1)
    params = cfg.get("params", {})
    eps, delta = params.get("epsilon", 0.1), params.get("delta", 0.1)
    gap = params.get("gap", "auto")
    if gap == "auto":
        gap = q_gap(sim, space)
        if gap == math.inf:
            gap = float(sim.reward_bound)
    dim = params.get("dim_e", "auto")
    dim = _dim_e(space, sim, cfg) if dim == "auto" else dim
    run_cfg = RunConfig.from_theory(sim.horizon, dim, float(gap), float(sim.reward_bound), eps, delta,
                                    seed=seed)
    if "t_star" in params:
        run_cfg.t_star = params["t_star"]
    if "n_paths" in params:
        run_cfg.n_paths = params["n_paths"]
    rep = run_policy_elimination(sim, space, run_cfg)
    audit = audit_trace(rep, space)
    call_cap = 4 * run_cfg.t_star * run_cfg.n_paths * sim.horizon
    audit.checked.append("oracle-accounting")
    if rep.oracle_calls > call_cap:
        audit.fail("oracle-accounting", run_cfg.t_star, f"{rep.oracle_calls} calls exceed {call_cap}")
    if rep.max_constraints > run_cfg.t_star:
        audit.fail("oracle-accounting", run_cfg.t_star,
                   f"constraint list of length {rep.max_constraints} exceeds T* = {run_cfg.t_star}")
    outcome = None
    try:
        oc = check_outcome(rep, sim, space, eps)
        outcome = {"optimal_survived": oc.optimal_survived, "all_eps_optimal": oc.all_eps_optimal,
                   "worst_value": oc.worst_value, "v_star": oc.v_star, "survivors": oc.n_survivors}
    except NotEnumerableError:
        pass
    rows = [(r.round, r.event, r.reward, None, r.stack_depth, r.z_size) for r in rep.rounds]
    summary = {"kind": "run-stoch", "seed": seed, "horizon": sim.horizon, "dim_e": dim, "gap": gap,
               "t_star": run_cfg.t_star, "n_paths": run_cfg.n_paths, "oracle_calls": rep.oracle_calls,
               "oracle_call_cap": call_cap, "max_constraints": rep.max_constraints,
               "samples": rep.samples, "outcome": outcome, "audit": audit.as_dict(), "ok": audit.ok}
    return summary, csv_text(RUN_COLUMNS, rows), {}


def run_adversary_seed(cfg: ExperimentConfig, seed: int):
    H, T = cfg.get("horizon"), int(cfg.get("episodes"))
    if cfg.get("tree"):
        path = Path(cfg.get("tree"))
        base, tree = io.load_tree(path if path.is_absolute() else cfg.base_dir / path)
    else:
        base, tree = io.standard_tree(cfg.get("dimension"))
    rbar = Fraction(str(cfg.get("reward_bound", 1)))
    session = adv.new_session(tree, base, H, rbar)
    agent = adv.make_agent(cfg.get("agent", "greedy"), session, cfg.get("script"))
    rec = adv.play(session, agent, T)
    lower = adv.lower_bound_value(tree.depth, H, T, rbar)
    ok = rec.optimal_in_class and rec.path_witness_ok and rec.regret >= lower
    rows = [(t, "episode", r, c, None, None) for t, (r, c) in enumerate(zip(rec.rewards, rec.cumulative_regret()))]
    summary = {"kind": "adversary", "seed": seed, "agent": cfg.get("agent", "greedy"), "episodes": T,
               "horizon": H, "dim_l": tree.depth, "regret": rec.regret, "lower_bound": lower,
               "proof_bound": rec.proof_bound, "margin": rec.regret - lower,
               "optimal_in_class": rec.optimal_in_class, "path_witness_ok": rec.path_witness_ok,
               "optimal_parameter": rec.optimal_parameter, "ok": ok}
    extra = {f"frozen-mdp-seed{seed}.json": json.dumps(io.env_to_dict(rec.frozen), indent=1) + "\n"}
    return summary, csv_text(RUN_COLUMNS, rows), extra


def run_dims_seed(cfg: ExperimentConfig, seed: int):
    exp = cfg.get("experiment")
    if exp is not None:
        rng = np.random.SeedSequence(seed)
        pack_seed, trial_seed = rng.spawn(2)
        thetas = sphere_packing(exp["d"], exp["epsilon"], exp["size"], np.random.default_rng(pack_seed))
        rep = random_feature_experiment(exp["epsilon"], thetas, exp["delta"], exp["trials"], trial_seed)
        summary = {"kind": "feature-experiment", "seed": seed, "bound": rep.bound,
                   "exceed_fraction": rep.exceed_fraction, "mean_length": float(np.mean(rep.lengths)),
                   "ok": rep.exceed_fraction <= exp["delta"]}
        return summary, csv_text(FEATURE_COLUMNS, rep.rows), {}
    budget = cfg.get("limits", {}).get("budget", 200_000)
    four = cfg.get("fourier")
    if four is not None:
        result, bound = fourier_dim_check(four["dimension"], degree_family(four["dimension"], four["degree"]),
                                          budget=budget)
        summary = {"kind": "dims", "seed": seed, "class": "fourier", "universe_size": result.universe_size,
                   "dimension": result.value, "witness": [list(w) for w in result.witness.items],
                   "mode": result.mode, "bound": bound, "ok": result.value <= bound}
        return summary, "", {}
    data, src, text = cfg.resolve("space")
    space = io.space_from_dict(data, src, text)
    universe = [tuple(u) for u in cfg.get("universe", [])] or _pairs(space, None)
    summary = {"kind": "dims", "seed": seed, "class": data["class"], "universe_size": len(universe), "ok": True}
    for which in cfg.get("which", ["eluder"]):
        fn = eluder_dim_exact if which == "eluder" else littlestone_dim_exact
        res = fn(space, universe, budget=budget)
        witness = res.witness
        if which == "eluder":
            witness = [list(w) for w in witness.items]
        else:
            witness = None if witness is None else {"depth": witness.depth,
                                                    "nodes": [[list(p), *k] for p, k in witness.nodes.items()]}
        summary[which] = {"dimension": res.value, "witness": witness, "mode": res.mode, "method": res.method}
    return summary, "", {}


def run_oracle_check_seed(cfg: ExperimentConfig, seed: int):
    data, src, text = cfg.resolve("space")
    space = io.space_from_dict(data, src, text)
    rng = np.random.default_rng(seed)
    pairs = _pairs(space, None)
    limit = cfg.get("limits", {}).get("enum", 1 << 12)
    mismatches, checked = [], 0
    for _ in range(cfg.get("constraint_sets", 20)):
        members = space.members(limit)
        theta = members[int(rng.integers(len(members)))]
        z = ConstraintSet()
        for _ in range(int(rng.integers(0, len(pairs) + 1))):
            s, h = pairs[int(rng.integers(len(pairs)))]
            others = [a for a in space.actions if a != space.action(theta, s, h)]
            if others:
                z.add(s, others[int(rng.integers(len(others)))], h)
        for _ in range(cfg.get("queries", 200)):
            s, h = pairs[int(rng.integers(len(pairs)))]
            fast = elimination_oracle(space, z, s, h)
            slow = brute_force_oracle(space, z, s, h, limit)
            checked += 1
            if tuple(fast) != tuple(slow):
                mismatches.append({"pair": [s, h], "oracle": list(fast), "brute": list(slow)})
    summary = {"kind": "oracle-check", "seed": seed, "queries": checked, "mismatches": mismatches[:20],
               "ok": not mismatches}
    return summary, "", {}


RUNNERS = {"run-det": run_det_seed, "run-stoch": run_stoch_seed, "adversary": run_adversary_seed,
           "dims": run_dims_seed, "oracle-check": run_oracle_check_seed}


def _one(args):
    cfg, seed = args
    try:
        return "ok", RUNNERS[cfg.subcommand](cfg, seed)
    except ConfigError as exc:
        return "config", str(exc)
    except (EnvironmentContractError, AssumptionViolation, DPLimitExceeded, EmptyClassError) as exc:
        return "contract", f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every seed, write ``<kind>-seed<k>.csv`` and ``summary.json`` under ``cfg.out``."""
    if cfg.subcommand == "audit":
        return audit_artifacts(Path(cfg.get("runs")))
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_one, jobs))
    else:
        results = [_one(j) for j in jobs]

    cfg.out.mkdir(parents=True, exist_ok=True)
    summaries, status = [], EXIT_OK
    for seed, (tag, payload) in zip(cfg.seeds, results):
        if tag == "config":
            print(f"config error: {payload}")
            return EXIT_CONFIG
        if tag == "contract":
            print(f"contract breach (seed {seed}): {payload}")
            summaries.append({"kind": cfg.subcommand, "seed": seed, "ok": False, "error": payload})
            status = max(status, EXIT_CONTRACT)
            continue
        summary, csv_body, extra = payload
        if csv_body:
            (cfg.out / f"{cfg.subcommand}-seed{seed}.csv").write_text(csv_body)
        for name, body in extra.items():
            (cfg.out / name).write_text(body)
        summaries.append(summary)
        if not summary["ok"] and status == EXIT_OK:
            status = EXIT_AUDIT
    (cfg.out / "summary.json").write_text(json.dumps(_jsonable(summaries), indent=1, sort_keys=True) + "\n")
    table, _ = summarize(summaries)
    if table:
        print(table)
    return status


# ---------------------------------------------------------------------------

_TABLE_COLS = ("kind", "seed", "observed", "bound", "margin", "ok")


def summarize(artifacts) -> tuple[str, dict]:
    """Table of per-run totals, bound values and margins; ``artifacts`` is a list of summaries or a directory."""
    if isinstance(artifacts, (str, Path)):
        artifacts = load_summaries(Path(artifacts))
    rows = []
    for s in artifacts:
        kind = s.get("kind")
        if kind == "adversary":
            observed, bound = s.get("regret"), s.get("lower_bound")
            margin = None if observed is None else Fraction(str(observed)) - Fraction(str(bound))
        elif kind == "run-det":
            observed, bound = s.get("regret"), s.get("bound")
            margin = None if observed is None else Fraction(str(bound)) - Fraction(str(observed))
        elif kind == "run-stoch":
            observed, bound = s.get("oracle_calls"), s.get("oracle_call_cap")
            margin = None if observed is None else bound - observed
        elif kind == "feature-experiment":
            observed, bound, margin = s.get("exceed_fraction"), None, None
        else:
            observed, bound, margin = s.get("dimension"), s.get("bound"), None
        rows.append({"kind": kind, "seed": s.get("seed"), "observed": _show(observed),
                     "bound": _show(bound), "margin": _show(margin), "ok": bool(s.get("ok"))})
    if not rows:
        return "", {"rows": [], "ok": True}
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in _TABLE_COLS}
    lines = ["  ".join(c.ljust(widths[c]) for c in _TABLE_COLS)]
    lines += ["  ".join(str(r[c]).ljust(widths[c]) for c in _TABLE_COLS) for r in rows]
    return "\n".join(lines), {"rows": rows, "ok": all(r["ok"] for r in rows)}


def _show(x):
    if x is None:
        return "-"
    if isinstance(x, str):
        try:
            x = Fraction(x)
        except ValueError:
            return x
    if isinstance(x, Fraction):
        return str(x) if x.denominator == 1 else format(float(x), ".6g")
    return format(x, ".6g") if isinstance(x, float) else str(x)


def load_summaries(directory: Path) -> list:
    if not directory.exists():
        raise ConfigError("no such artifact directory", str(directory))
    out = []
    for path in sorted(directory.rglob("summary.json")):
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"corrupted artifact: {exc.msg}", f"{path}:{exc.lineno}") from None
        if not isinstance(data, list):
            raise ConfigError("corrupted artifact: expected a list of run summaries", str(path))
        out.extend(data)
    return out


def audit_artifacts(directory: Path) -> int:
    """Re-check saved runs: per-run verdicts and CSV consistency of cumulative regret."""
    summaries = load_summaries(directory)
    table, data = summarize(summaries)
    if table:
        print(table)
    bad = not data["ok"]
    regrets = {(s.get("kind"), s.get("seed")): s.get("regret") for s in summaries}
    for path in sorted(directory.rglob("*-seed*.csv")):
        with path.open() as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header not in (RUN_COLUMNS, FEATURE_COLUMNS):
                raise ConfigError(f"corrupted artifact: unexpected columns {header}", str(path))
            rows = list(reader)
        kind, _, seed = path.stem.rpartition("-seed")
        expected = regrets.get((kind, int(seed))) if seed.isdigit() else None
        if header == RUN_COLUMNS and expected is not None and rows and rows[-1][3]:
            if not math.isclose(float(rows[-1][3]), float(Fraction(str(expected))), rel_tol=1e-9, abs_tol=1e-12):
                print(f"{path.name}: final cum_regret {rows[-1][3]} disagrees with summary regret {expected}")
                bad = True
    return EXIT_AUDIT if bad else EXIT_OK
