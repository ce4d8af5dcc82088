"""Command-line front end: ``invlab {gen-data,train,eval,probe,bench}``.

One experiment is one JSON config::

    {
      "seed": 0,
      "data":   {"n": 1000, "H": 32, "flags": {"dual": false, "returns": false}},
      "env":    {"kind": "lead_time", "params": {"L": 2}},
      "policy": {"mlp_width": 32},
      "train":  {"epochs": 1000, "penalty": {"lam": 0.0}},
      "eval":   {"n": 10000, "periods": 520, "burn_in": 20},
      "probe":  {"product": 0, "t": 0, "axes": [{"slot": 0, "lo": 0, "hi": 200, "n": 41}]},
      "output_dir": "runs/lt2",
      "sweep":  [{"name": "L3", "env": {"params": {"L": 3}}}]
    }

File-backed data replaces ``n`` with ``products_csv`` + ``trace_csv`` (and an
optional ``calendar`` list of event periods); ``eval`` accepts the same keys.
Each ``sweep`` entry is deep-merged over the base config and runs in
``output_dir/<name>``.

Exit codes: 0 ok, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

# numpy and the rest of the package are imported lazily so that --threads can
# still reach the BLAS/OpenMP runtimes before they initialise.

log = logging.getLogger("invlab")

SECTIONS = {"seed", "data", "env", "policy", "train", "eval", "probe", "output_dir", "sweep", "name"}
DATA_KEYS = {"n", "seed", "H", "flags", "products_csv", "trace_csv", "calendar", "event_scale"}
EVAL_KEYS = {"n", "seed", "periods", "burn_in", "chunk", "products_csv", "trace_csv", "calendar", "event_scale"}
PROBE_KEYS = {"product", "t", "axes", "fixed"}
DERIVED_POLICY = {"static_features", "endo_dim", "action_dim", "head_mode", "quantile_levels"}
HEURISTICS = {
    "lost_sales": ("omniscient", "non_omniscient"),
    "lead_time": ("vector_base_stock", "base_stock"),
    "perishable": ("standard_base_stock", "best_base_stock"),
    "dual_sourcing": ("single_index",),
    "returns": ("interval_stock",),
}


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config


def deep_merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_sweep(config: dict) -> list[dict]:
    """One resolved config per child run (the config itself when there is no sweep)."""
    sweep = config.get("sweep")
    base = {k: v for k, v in config.items() if k != "sweep"}
    if not sweep:
        return [base]
    root = Path(base.get("output_dir", "."))
    children = []
    for i, patch in enumerate(sweep):
        child = deep_merge(base, patch)
        name = str(patch.get("name", f"run{i:02d}"))
        child["name"] = name
        child["output_dir"] = str(root / name)
        children.append(child)
    return children


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _dataclass_fields(cls) -> set:
    return set(cls.__dataclass_fields__)


def _check_source(section: dict, where: str, problems: list, base_dir: Path) -> None:
    files = [k for k in ("products_csv", "trace_csv") if k in section]
    if files and len(files) != 2:
        problems.append(f"{where}: products_csv and trace_csv must be given together")
    for k in files:
        if not (base_dir / section[k]).is_file():
            problems.append(f"{where}.{k}: file not found: {section[k]}")
    if "n" in section and (not isinstance(section["n"], int) or section["n"] < 1):
        problems.append(f"{where}.n: must be a positive integer")
    if "calendar" in section and not files:
        problems.append(f"{where}.calendar: only applies to trace_csv data")


def validate(config: dict, base_dir: Path = Path(".")) -> None:
    """Raise ConfigError listing every problem found in a resolved (non-sweep) config."""
    from .envs import EnvSpec
    from .evaluator import EvalProtocol
    from .policy import PolicyConfig
    from .trainer import PenaltyConfig, TrainConfig

    problems: list[str] = []
    if not isinstance(config, dict):
        raise ConfigError(["config: must be a JSON object"])
    for k in sorted(set(config) - SECTIONS):
        problems.append(f"{k}: unknown section")
    if "seed" in config and not isinstance(config["seed"], int):
        problems.append("seed: must be an integer")

    data = config.get("data", {})
    if not isinstance(data, dict):
        problems.append("data: must be an object")
        data = {}
    for k in sorted(set(data) - DATA_KEYS):
        problems.append(f"data.{k}: unknown key")
    _check_source(data, "data", problems, base_dir)
    flags = data.get("flags", {})
    if not isinstance(flags, dict) or set(flags) - {"dual", "returns"}:
        problems.append("data.flags: only 'dual' and 'returns' are allowed")
        flags = {}

    env = config.get("env", {})
    spec = None
    if not isinstance(env, dict) or set(env) - {"kind", "params"}:
        problems.append("env: expected {kind, params}")
    else:
        params = env.get("params", {})
        unknown = set(params) - (_dataclass_fields(EnvSpec) - {"kind"})
        for k in sorted(unknown):
            problems.append(f"env.params.{k}: unknown parameter")
        try:
            spec = EnvSpec(env.get("kind", "lost_sales"), **{k: v for k, v in params.items() if k not in unknown})
        except (TypeError, ValueError) as exc:
            problems.append(f"env: {exc}")
    if spec is not None:
        if spec.kind == "dual_sourcing" and flags.get("dual") is False:
            problems.append("data.flags.dual: dual sourcing needs dual cost fields")
        if spec.kind == "returns" and flags.get("returns") is False:
            problems.append("data.flags.returns: the returns model needs a return price")
        if "products_csv" in data and spec.kind in ("dual_sourcing", "returns"):
            pass  # product CSVs always carry c_e, c_r and r

    pol = config.get("policy", {})
    if not isinstance(pol, dict):
        problems.append("policy: must be an object")
        pol = {}
    for k in sorted(set(pol) - _dataclass_fields(PolicyConfig)):
        problems.append(f"policy.{k}: unknown field")
    if spec is not None:
        from .rollout import STATIC_FIELDS

        derived = {"static_features": len(STATIC_FIELDS[spec.kind]), "endo_dim": spec.endo_dim,
                   "action_dim": spec.action_dim, "head_mode": "control"}
        for k, want in derived.items():
            if k in pol and pol[k] != want:
                problems.append(f"policy.{k}: {pol[k]!r} is inconsistent with env {spec.kind} (needs {want!r})")
    if "H" in data and "H" in pol and data["H"] != pol["H"]:
        problems.append("data.H: differs from policy.H")
    try:
        pcfg_kw = {k: v for k, v in pol.items() if k in _dataclass_fields(PolicyConfig) and k not in DERIVED_POLICY}
        if "H" in data:
            pcfg_kw.setdefault("H", data["H"])
        PolicyConfig(**pcfg_kw)
    except (TypeError, ValueError) as exc:
        problems.append(f"policy: {exc}")

    tr = config.get("train", {})
    if not isinstance(tr, dict):
        problems.append("train: must be an object")
        tr = {}
    allowed = _dataclass_fields(TrainConfig) - {"lam_schedule", "checkpoint_path"}
    for k in sorted(set(tr) - allowed):
        problems.append(f"train.{k}: unknown field")
    pen = tr.get("penalty", {})
    if isinstance(pen, dict):
        for k in sorted(set(pen) - _dataclass_fields(PenaltyConfig)):
            problems.append(f"train.penalty.{k}: unknown field")
    try:
        kw = {k: v for k, v in tr.items() if k in allowed}
        if isinstance(pen, dict):
            kw["penalty"] = {k: v for k, v in pen.items() if k in _dataclass_fields(PenaltyConfig)}
        TrainConfig(**kw)
    except (TypeError, ValueError) as exc:
        problems.append(f"train: {exc}")
    if spec is not None and spec.kind == "dual_sourcing" and isinstance(pen, dict) and pen.get("lam", 0):
        problems.append("train.penalty.lam: no structural penalty is defined for dual sourcing")

    ev = config.get("eval", {})
    if not isinstance(ev, dict):
        problems.append("eval: must be an object")
        ev = {}
    for k in sorted(set(ev) - EVAL_KEYS):
        problems.append(f"eval.{k}: unknown key")
    _check_source(ev, "eval", problems, base_dir)
    try:
        EvalProtocol(ev.get("periods", 520), ev.get("burn_in", 20))
    except (TypeError, ValueError) as exc:
        problems.append(f"eval: {exc}")

    pr = config.get("probe")
    if pr is not None:
        if not isinstance(pr, dict):
            problems.append("probe: must be an object")
        else:
            for k in sorted(set(pr) - PROBE_KEYS):
                problems.append(f"probe.{k}: unknown key")
            axes = pr.get("axes")
            if not isinstance(axes, list) or not 1 <= len(axes) <= 2:
                problems.append("probe.axes: one or two axes are required")
            else:
                for i, ax in enumerate(axes):
                    if not isinstance(ax, dict) or not {"slot", "lo", "hi", "n"} <= set(ax):
                        problems.append(f"probe.axes[{i}]: needs slot, lo, hi and n")
                    elif spec is not None and not 0 <= ax["slot"] < spec.endo_dim:
                        problems.append(f"probe.axes[{i}].slot: out of range for {spec.endo_dim}-slot state")
                    elif ax["n"] < 1 or ax["hi"] < ax["lo"]:
                        problems.append(f"probe.axes[{i}]: need n >= 1 and hi >= lo")
            if spec is not None and "fixed" in pr and len(pr["fixed"]) != spec.endo_dim:
                problems.append(f"probe.fixed: needs {spec.endo_dim} values")

    if "sweep" in config:
        problems.append("sweep: nested sweeps are not supported")
    if problems:
        raise ConfigError(problems)


def load_config(path: str | None, seed: int | None, output: str | None) -> tuple[dict, Path]:
    if path is None:
        config, base_dir = {}, Path(".")
    else:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file not found: {p}")
        try:
            config = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from None
        base_dir = p.parent
    if not isinstance(config, dict):
        raise ConfigError(["config: must be a JSON object"])
    if seed is not None:
        config["seed"] = seed
        for sec in ("data", "eval", "train"):
            if isinstance(config.get(sec), dict):
                config[sec].pop("seed", None)
    if output is not None:
        config["output_dir"] = output
    config.setdefault("output_dir", ".")
    return config, base_dir


# ---------------------------------------------------------------- run context


class Run:
    """Resolved objects for one child config."""

    def __init__(self, config: dict, base_dir: Path, command: str):
        from .envs import EnvSpec

        self.config = config
        self.base_dir = base_dir
        self.command = command
        self.out = Path(config.get("output_dir", "."))
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = int(config.get("seed", 0))
        env = config.get("env", {})
        self.spec = EnvSpec(env.get("kind", "lost_sales"), **env.get("params", {}))
        self.artifacts: dict[str, str] = {}
        self.walls: dict[str, float] = {}
        self.t0 = time.perf_counter()
        self._test = None

    @property
    def seeds(self) -> dict:
        d, e, t = self.config.get("data", {}), self.config.get("eval", {}), self.config.get("train", {})
        return {"data": int(d.get("seed", self.seed)), "eval": int(e.get("seed", self.seed + 1)),
                "train": int(t.get("seed", self.seed))}

    def policy_config(self, ts_features: int = 1):
        from .policy import PolicyConfig
        from .rollout import STATIC_FIELDS

        pol = {k: v for k, v in self.config.get("policy", {}).items() if k not in DERIVED_POLICY}
        pol.setdefault("H", self.config.get("data", {}).get("H", 32))
        return PolicyConfig(static_features=len(STATIC_FIELDS[self.spec.kind]), endo_dim=self.spec.endo_dim,
                            action_dim=self.spec.action_dim, ts_features=ts_features, **pol)

    def train_config(self):
        from .trainer import TrainConfig

        tr = dict(self.config.get("train", {}))
        tr["seed"] = self.seeds["train"]
        return TrainConfig(**tr)

    def _dataset(self, section: dict, n_default: int, periods: int, seed: int):
        from .datagen import Dataset, load_products, load_traces, synthetic_dataset

        H = self.config.get("data", {}).get("H", self.config.get("policy", {}).get("H", 32))
        flags = dict(self.config.get("data", {}).get("flags", {}))
        flags.setdefault("dual", self.spec.kind == "dual_sourcing")
        flags.setdefault("returns", self.spec.kind == "returns")
        if "trace_csv" not in section:
            return synthetic_dataset(section.get("n", n_default), H, periods, seed, **flags)
        traces = load_traces(self.base_dir / section["trace_csv"], section.get("calendar"),
                             section.get("event_scale", 1.0 / 52.0))
        prods = load_products(self.base_dir / section["products_csv"])
        pos = {int(p): i for i, p in enumerate(prods.id)}
        missing = [p for p in traces.product_ids if int(p) not in pos]
        if missing:
            raise ValueError(f"products missing from {section['products_csv']}: {missing[:5]}")
        prods = prods.take([pos[int(p)] for p in traces.product_ids])
        return Dataset(prods, traces.demand, H, traces.features)

    def train_data(self):
        tr = self.train_config()
        return self._dataset(self.config.get("data", {}), 1000, tr.T, self.seeds["data"])

    def test_data(self):
        if self._test is None:
            ev = self.config.get("eval", {})
            self._test = self._dataset(ev, 1000, ev.get("periods", 520), self.seeds["eval"])
        return self._test

    def protocol(self):
        from .evaluator import EvalProtocol

        ev = self.config.get("eval", {})
        return EvalProtocol(ev.get("periods", 520), ev.get("burn_in", 20))

    def artifact(self, key: str, name: str) -> Path:
        path = self.out / name
        self.artifacts[key] = str(path)
        return path

    def write_manifest(self) -> Path:
        import numpy as np
        import scipy

        from . import __version__
        from ._kernels import BACKEND

        self.walls["total"] = time.perf_counter() - self.t0
        doc = {
            "command": self.command,
            "config_hash": config_hash(self.config),
            "config": self.config,
            "seeds": self.seeds,
            "artifacts": self.artifacts,
            "versions": {"invlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "kernels": BACKEND},
            "wall_seconds": {k: round(v, 3) for k, v in self.walls.items()},
        }
        path = self.out / f"manifest-{self.command}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True))
        os.replace(tmp, path)
        return path


def _load_actor(run: Run, checkpoint: str):
    from .policy import NeuralActor, load_checkpoint

    path = Path(checkpoint)
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    params, pcfg, _ = load_checkpoint(path)
    if pcfg.endo_dim != run.spec.endo_dim or pcfg.action_dim != run.spec.action_dim:
        raise UsageError(f"checkpoint {path} was trained for a different environment shape")
    return NeuralActor(params, pcfg, run.spec)


def heuristic_actor(run: Run, name: str):
    """Build a named benchmark policy; search-based ones are tuned on the test products."""
    from . import heuristics as hz

    spec = run.spec
    if name not in HEURISTICS[spec.kind]:
        raise UsageError(f"heuristic {name!r} does not apply to {spec.kind}; choose from {HEURISTICS[spec.kind]}")
    if name == "omniscient":
        return hz.omniscient_newsvendor()
    if name == "non_omniscient":
        return hz.NonOmniscientNewsvendor()
    if name == "vector_base_stock":
        return hz.VectorBaseStockActor(spec.L)
    if name == "base_stock":
        return hz.leadtime_base_stock_actor(spec.L)
    if name == "standard_base_stock":
        return hz.perishable_standard_actor()
    if name == "best_base_stock":
        ctx = run.test_data().context(spec)
        return hz.BaseStockActor(hz.perishable_best_levels(spec, ctx, run.protocol().burn_in), position="last")
    if name == "single_index":
        ctx = run.test_data().context(spec)
        s_e, s_r = hz.optimize_regular_level(spec, ctx, run.protocol().burn_in)
        return hz.SingleIndexDualActor(s_e, s_r, spec.demand_mode, spec.L_e)
    return hz.IntervalStockActor()


# ---------------------------------------------------------------- commands


def cmd_gen_data(run: Run, args) -> int:
    from .datagen import save_products, save_traces

    t = time.perf_counter()
    for tag, ds in (("train", run.train_data()), ("test", run.test_data())):
        save_products(run.artifact(f"{tag}_products", f"{tag}_products.csv"), ds.products)
        save_traces(run.artifact(f"{tag}_traces", f"{tag}_traces.csv"), ds.products.id, ds.demand)
    run.walls["gen_data"] = time.perf_counter() - t
    return 0


def cmd_train(run: Run, args) -> int:
    from .policy import save_checkpoint
    from .trainer import train

    data = run.train_data()
    feats = 1 if data.features is None else 1 + data.features.shape[1]
    pcfg = run.policy_config(feats)
    tcfg = run.train_config()
    ckpt = run.artifact("checkpoint", "checkpoint.json")
    if tcfg.checkpoint_every:
        tcfg.checkpoint_path = str(ckpt)
    t = time.perf_counter()
    params, curve = train(run.spec, data, pcfg, tcfg, log=log.info)
    run.walls["train"] = time.perf_counter() - t
    save_checkpoint(ckpt, params, pcfg, {"epochs": tcfg.epochs, "seed": tcfg.seed, "kind": run.spec.kind})
    curve.to_csv(run.artifact("curve", "curve.csv"))
    return 0


def _evaluate_named(run: Run, name: str, actor):
    from .evaluator import evaluate, write_eval_csv

    data = run.test_data()
    t = time.perf_counter()
    res = evaluate(actor, run.spec, data, run.protocol(), chunk=run.config.get("eval", {}).get("chunk", 1000))
    run.walls[f"eval_{name}"] = time.perf_counter() - t
    write_eval_csv(run.artifact(f"eval_{name}", f"eval_{name}.csv"), name, data.products.id, res.per_product,
                   res.service)
    log.info("%s: mean reward %.4f", name, res.mean_reward)
    return res


def cmd_eval(run: Run, args) -> int:
    if bool(args.checkpoint) == bool(args.heuristic):
        raise UsageError("eval needs exactly one of --checkpoint or --heuristic")
    if args.checkpoint:
        res = _evaluate_named(run, "drl", _load_actor(run, args.checkpoint))
    else:
        res = _evaluate_named(run, args.heuristic, heuristic_actor(run, args.heuristic))
    print(f"mean reward {res.mean_reward:.4f}")
    return 0


def cmd_probe(run: Run, args) -> int:
    import csv

    import numpy as np

    from .evaluator import ProbeGrid, probe_grid

    pr = run.config.get("probe")
    if pr is None:
        raise UsageError("probe needs a 'probe' section in the config")
    if bool(args.checkpoint) == bool(args.heuristic):
        raise UsageError("probe needs exactly one of --checkpoint or --heuristic")
    actor = _load_actor(run, args.checkpoint) if args.checkpoint else heuristic_actor(run, args.heuristic)
    axes = [(ax["slot"], np.linspace(ax["lo"], ax["hi"], ax["n"])) for ax in pr["axes"]]
    grid = ProbeGrid(pr.get("product", 0), pr.get("t", 0), axes, pr.get("fixed"))
    ctx = run.test_data().context(run.spec)
    acts = probe_grid(actor, run.spec, ctx, grid)
    mesh = np.meshgrid(*[v for _, v in axes], indexing="ij")
    for a in range(acts.shape[-1]):
        with open(run.artifact(f"probe_{a}", f"probe_action{a}.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"y{k}" for k, _ in axes] + [f"action{a}"])
            for row in zip(*[m.ravel() for m in mesh], acts[..., a].ravel()):
                w.writerow([repr(float(v)) for v in row])
    return 0


def format_table(rows: list[tuple[str, float]]) -> str:
    """Reward table with gap = (A - B) / B, A the first row's reward."""
    ref = rows[0][1]
    width = max(len(r[0]) for r in rows)
    lines = [f"{'policy':<{width}}  {'reward':>12}  {'gap':>8}"]
    for i, (name, reward) in enumerate(rows):
        g = "-" if i == 0 else f"{100 * (ref - reward) / abs(reward):.2f}%"
        lines.append(f"{name:<{width}}  {reward:>12,.2f}  {g:>8}")
    return "\n".join(lines)


def cmd_bench(run: Run, args) -> int:
    import csv

    rows = []
    ckpt = args.checkpoint
    if ckpt is None and (run.out / "checkpoint.json").is_file():
        ckpt = str(run.out / "checkpoint.json")
    if ckpt is not None:
        rows.append(("drl", _evaluate_named(run, "drl", _load_actor(run, ckpt)).mean_reward))
    for name in HEURISTICS[run.spec.kind]:
        rows.append((name, _evaluate_named(run, name, heuristic_actor(run, name)).mean_reward))
    ref = rows[0][1]
    with open(run.artifact("bench", "bench.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "reward", "gap_pct"])
        for i, (name, reward) in enumerate(rows):
            w.writerow([name, repr(reward), "" if i == 0 else repr(100 * (ref - reward) / abs(reward))])
    print(format_table(rows))
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "probe": cmd_probe, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run config")
    common.add_argument("--output", metavar="DIR", help="override output_dir")
    common.add_argument("--threads", type=int, metavar="N", help="BLAS/OpenMP threads")
    common.add_argument("--seed", type=int, help="override every config seed (data, train, eval = seed + 1)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="invlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="write product and trace CSVs")
    sub.add_parser("train", parents=[common], help="train a policy; writes checkpoint.json and curve.csv")
    for name, text in (("eval", "evaluate one policy"), ("probe", "probe actions over a state grid")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--checkpoint", metavar="PATH")
        p.add_argument("--heuristic", metavar="NAME")
    p = sub.add_parser("bench", parents=[common], help="compare a checkpoint against every applicable heuristic")
    p.add_argument("--checkpoint", metavar="PATH")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        config, base_dir = load_config(args.config, args.seed, args.output)
        children = expand_sweep(config)
        for child in children:
            validate(child, base_dir)
        for child in children:
            run = Run(child, base_dir, args.command)
            COMMANDS[args.command](run, args)
            path = run.write_manifest()
            log.info("wrote %s", path)
    except ConfigError as exc:
        print("error: invalid config:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
