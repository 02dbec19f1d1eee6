"""``mixfam`` command line: run catalog problems from JSON inputs and sweep gamma.

Exit status: 0 converged, 1 input error, 2 iteration cap, 3 descent violation.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import problems as pb
from .family import ExponentialFamily, InfeasibleFamilyError, MixtureFamily
from .oracle import GridSpec, grid_minimize
from .solver import DivergenceError, SolverConfig, Status

EXIT_CODES = {Status.CONVERGED: 0, Status.ITER_CAP: 2, Status.DESCENT_VIOLATION: 3}
PROBLEMS = ("capacity", "reliability", "strong-converse", "wiretap", "wiretap-degraded",
            "commitment", "em", "reverse-em", "ib")
ALGORITHMS = ("exact", "approx", "gradient")
SWEEP_ACCURACY = 1e-6
NATS_PER_BIT = math.log(2)

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["problem", "algorithm", "gamma", "gamma_used", "status", "iterations",
                 "objective", "minimizer", "headline", "restarts", "seed"],
    "properties": {
        "problem": {"enum": list(PROBLEMS)},
        "algorithm": {"enum": list(ALGORITHMS)},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "gamma_used": {"type": "number", "exclusiveMinimum": 0},
        "status": {"enum": [s.value for s in Status]},
        "iterations": {"type": "integer", "minimum": 0},
        "objective": {"type": "number"},
        "minimizer": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "headline": {"type": "object", "additionalProperties": {"type": "number"}},
        "restarts": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "trace": {"type": "string"},
        "info": {"type": "object"},
    },
    "additionalProperties": False,
}


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1); 2 is reserved for the iteration cap
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class InputError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _load_json(path, field):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(field, f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InputError(field, f"{path} is not valid JSON ({e.msg} at line {e.lineno})") from None


def _key(obj, key, field):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{field}.{key}", "missing")
    return obj[key]


def _matrix(value, field):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InputError(field, "must be a list of numeric rows") from None
    if arr.ndim != 2:
        raise InputError(field, "must be a list of equal-length numeric rows")
    return arr


def load_channel(path, field="--channel"):
    rows = _matrix(_key(_load_json(path, field), "rows", field), f"{field}.rows")
    try:
        return pb.Channel(rows, tol=1e-9)
    except ValueError as e:
        raise InputError(f"{field}.rows", str(e)) from None


def load_joint_source(path, field="--joint"):
    data = _load_json(path, field)
    joint = _matrix(_key(data, "joint", field), f"{field}.joint")
    t_size = _key(data, "t_size", field)
    if not isinstance(t_size, int) or isinstance(t_size, bool):
        raise InputError(f"{field}.t_size", "must be an integer")
    try:
        return pb.JointSource(joint, t_size)
    except ValueError as e:
        raise InputError(f"{field}.joint", str(e)) from None


def load_mixture_family(path, field="--family"):
    data = _load_json(path, field)
    F = _matrix(_key(data, "features", field), f"{field}.features")
    a = np.array(_key(data, "targets", field), dtype=float).reshape(-1)
    try:
        return MixtureFamily(F.shape[1], F, a)
    except ValueError as e:
        raise InputError(f"{field}.targets", str(e)) from None


def load_exponential_family(path, field="--efam"):
    data = _load_json(path, field)
    base = np.array(_key(data, "base", field), dtype=float).reshape(-1)
    G = _matrix(_key(data, "generators", field), f"{field}.generators")
    try:
        return ExponentialFamily(base, G)
    except ValueError as e:
        raise InputError(f"{field}.generators", str(e)) from None


def _floats(text, field):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(field, f"cannot parse {text!r} as comma-separated numbers") from None
    if not vals:
        raise InputError(field, "empty list")
    return vals


def _need(args, name, problem):
    v = getattr(args, name)
    if v is None:
        raise InputError("--" + name.replace("_", "-"), f"required for --problem {problem}")
    return v


def build_instance(args):
    """Translate parsed arguments into a :class:`ProblemInstance`."""
    p = args.problem
    try:
        if p in ("capacity", "reliability", "strong-converse", "commitment", "wiretap", "wiretap-degraded"):
            w = load_channel(_need(args, "channel", p))
            if args.restrict:
                idx = [int(v) - 1 for v in _floats(args.restrict, "--restrict")]
                if min(idx) < 0 or max(idx) >= w.full_matrix.shape[0]:
                    raise InputError("--restrict", f"indices must lie in 1..{w.full_matrix.shape[0]}")
                w = w.restrict_inputs(idx)
            if p == "capacity":
                inst = pb.channel_capacity(w)
            elif p == "commitment":
                inst = pb.commitment_capacity(w)
            elif p == "reliability":
                inst = pb.reliability_exponent(w, _need(args, "alpha", p))
            elif p == "strong-converse":
                inst = pb.strong_converse_exponent(w, _need(args, "alpha", p))
            elif p == "wiretap":
                eve = load_channel(_need(args, "eve", p), "--eve")
                inst = pb.wiretap_general(w, eve, args.v_size or w.n_x)
            else:
                inst = pb.wiretap_degraded(w, _need(args, "z_size", p))
        elif p in ("em", "reverse-em"):
            fam = load_mixture_family(_need(args, "family", p))
            efam = load_exponential_family(_need(args, "efam", p))
            inst = (pb.em_problem if p == "em" else pb.reverse_em)(fam, efam)
        else:
            src = load_joint_source(_need(args, "joint", p))
            if args.t_size is not None:
                src = pb.JointSource(src.joint, args.t_size)
            inst = pb.information_bottleneck(src, _need(args, "alpha", p), _need(args, "beta", p))
    except InputError:
        raise
    except ValueError as e:
        field = "--alpha" if "alpha" in str(e) else "--beta" if "beta" in str(e) else "--problem"
        raise InputError(field, str(e)) from None
    if args.cost is not None or args.budget is not None:
        cost = _floats(_need(args, "cost", p), "--cost")
        budget = _need(args, "budget", p)
        try:
            inst = pb.with_cost_constraint(inst, cost, budget)
        except InfeasibleFamilyError as e:
            raise InputError("--budget", str(e)) from None
        except ValueError as e:
            raise InputError("--cost", str(e)) from None
    return inst


def _gammas(args):
    gammas = _floats(args.gamma, "--gamma") if args.gamma else [None]
    for g in gammas:
        if g is not None and not (g > 0 and math.isfinite(g)):
            raise InputError("--gamma", f"gamma must be positive, got {g!r}")
    return gammas


def _workers(n):
    env = os.environ.get("MIXFAM_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise InputError("MIXFAM_THREADS", f"not an integer: {env!r}") from None
    return max(1, min(cap, n))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    return v


def _run_one(inst, args, gamma, algorithm):
    cfg = SolverConfig(
        gamma=gamma if gamma is not None else inst.recommended_gamma,
        max_iter=args.max_iter,
        stop_tol=args.tol,
    )
    restarts = args.restarts or (10 if inst.multi_restart else 1)
    res, headline = pb.run_instance(inst, algorithm=algorithm, cfg=cfg, restarts=restarts, seed=args.seed)
    info = {k: v for k, v in res.info.items() if k in ("t1", "t2", "eps1", "eps2", "advice", "lipschitz", "multipliers")}
    gamma_used = headline.pop("gamma_used")
    result = {
        "problem": args.problem,
        "algorithm": algorithm,
        "gamma": cfg.gamma,
        "gamma_used": gamma_used,
        "status": res.status.value,
        "iterations": res.iterations,
        "objective": res.objective,
        "minimizer": res.minimizer,
        "headline": headline,
        "restarts": restarts,
        "seed": args.seed,
        "info": info,
    }
    return _jsonable(result), res


def _tag(gamma):
    return "default" if gamma is None else np.format_float_positional(float(gamma), trim="-")


def _iterations_to(objectives, reference, accuracy=SWEEP_ACCURACY):
    hits = np.flatnonzero(np.abs(np.asarray(objectives) - reference) <= accuracy)
    return int(hits[0]) if hits.size else -1


def _human(result, bits):
    unit, scale = ("bits", 1 / NATS_PER_BIT) if bits else ("nats", 1.0)
    parts = []
    for k, v in result["headline"].items():
        if k.endswith("_nats"):
            parts.append(f"{k[:-5]}={v * scale:.10g} {unit}")
        else:
            parts.append(f"{k}={v:.10g}")
    return (f"gamma={result['gamma']:g} status={result['status']} iterations={result['iterations']} "
            + " ".join(parts))


def execute(args, sweep=False):
    inst = build_instance(args)
    gammas = _gammas(args)
    if sweep and len(gammas) < 2:
        raise InputError("--gamma", "a sweep needs at least two values")
    algorithm = args.algorithm or inst.meta.get("preferred_algorithm", "exact")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=_workers(len(gammas))) as pool:
        runs = list(pool.map(lambda g: _run_one(inst, args, g, algorithm), gammas))
    stem = args.problem
    code = 0
    for gamma, (result, res) in zip(gammas, runs):
        name = f"{stem}_gamma{_tag(gamma)}"
        trace_path = out / f"{name}.csv"
        res.trace.to_csv(trace_path)
        result["trace"] = trace_path.name
        with open(out / f"{name}.json", "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(_human(result, args.bits))
        code = max(code, EXIT_CODES[res.status])
    if sweep:
        reference = min(r.objective for _, r in runs)
        lines = ["gamma,status,iterations,iterations_to_1e-6,final_objective"]
        print(f"{'gamma':>8} {'status':>16} {'iters':>6} {'to 1e-6':>8} {'final objective':>22}")
        for gamma, (result, res) in zip(gammas, runs):
            k = _iterations_to(res.trace.objectives, reference)
            lines.append(f"{_tag(gamma)},{result['status']},{result['iterations']},{k},{res.objective:.17g}")
            print(f"{result['gamma']:>8g} {result['status']:>16} {result['iterations']:>6} {k:>8} {res.objective:>22.15g}")
        (out / f"{stem}_summary.csv").write_text("\n".join(lines) + "\n")
    return code


def execute_grid(args):
    inst = build_instance(args)
    try:
        g = grid_minimize(inst.psi, inst.family, GridSpec(args.resolution, args.constraint_tolerance, args.mode, args.refine))
    except ValueError as e:
        raise InputError("--resolution", str(e)) from None
    print(json.dumps({"point": g.point.tolist(), "value": g.value, "lipschitz": g.lipschitz,
                      "error_bound": g.error_bound, "points": g.points_evaluated}))
    return 0


def _add_problem_args(p):
    p.add_argument("--problem", required=True, choices=PROBLEMS)
    p.add_argument("--channel", help="JSON {\"rows\": [[...], ...]}; joint-output channel for wiretap-degraded")
    p.add_argument("--eve", help="eavesdropper channel file (wiretap)")
    p.add_argument("--z-size", type=int, help="eavesdropper alphabet size (wiretap-degraded)")
    p.add_argument("--v-size", type=int, help="auxiliary alphabet size (wiretap; default |X|)")
    p.add_argument("--joint", help="JSON {\"joint\": [[...]], \"t_size\": N} (ib)")
    p.add_argument("--t-size", type=int, help="override t_size from the joint file")
    p.add_argument("--family", help="JSON {\"features\": [[...]], \"targets\": [...]}")
    p.add_argument("--efam", help="JSON {\"base\": [...], \"generators\": [[...]]}")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--cost", help="comma-separated cost per input")
    p.add_argument("--budget", type=float)
    p.add_argument("--restrict", help="comma-separated 1-based input indices to keep")


def make_parser():
    parser = _Parser(prog="mixfam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="{run,sweep}", parser_class=_Parser)
    for name in ("run", "sweep"):
        p = sub.add_parser(name, help="solve one problem" if name == "run" else "compare several gamma values")
        _add_problem_args(p)
        p.add_argument("--algorithm", choices=ALGORITHMS)
        p.add_argument("--gamma", help="gamma or comma-separated list")
        p.add_argument("--max-iter", type=int, default=10000)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--restarts", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".")
        p.add_argument("--bits", action="store_true", help="show headline values in bits (files stay in nats)")
    g = sub.add_parser("grid")
    _add_problem_args(g)
    g.add_argument("--resolution", type=int, required=True)
    g.add_argument("--mode", default="simplex", choices=("simplex", "slice", "conditional"))
    g.add_argument("--constraint-tolerance", type=float, default=1e-9)
    g.add_argument("--refine", type=int, default=0, help="zoom levels around the coarse optimum")
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "grid":
            return execute_grid(args)
        return execute(args, sweep=args.command == "sweep")
    except InputError as e:
        print(f"mixfam: error: {e}", file=sys.stderr)
        return 1
    except DivergenceError as e:
        print(f"mixfam: error: {e}; try a larger Lipschitz estimate or another algorithm", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
