"""``volspan`` command line.

Every command writes plain CSV/JSON outputs plus a run manifest next to them.
Exit codes: 0 success, 1 verification failure, 2 input/output or usage
error, 3 numerical failure. Failures print a JSON error object on stderr.
"""
import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io as vio
from .errors import VolspanError

EXIT_OK, EXIT_VERIFY, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = {
    "mvee": {"inputs": ("input",), "params": {"eps": 1e-6}},
    "john": {"inputs": ("input",), "params": {"eps": 1e-9, "tol": 1e-6}},
    "spanner-exact": {"inputs": ("input",), "params": {"tol": 1e-6}},
    "spanner-fast": {"inputs": ("input",),
                     "params": {"c_sample": 10.0, "base_threshold": None, "max_retries": 64, "tol": 1e-6,
                                "stats": None}},
    "spanner-barycentric": {"inputs": ("input",), "params": {"C": 2.0}},
    "sample": {"inputs": (), "params": {"body": "box", "dim": None, "radius": 1.0, "density": "uniform",
                                        "n": 1000, "burn_in": None, "thin": None}},
    "blo-run": {"inputs": ("actions",), "params": {"adversary": "random", "T": 1024, "seeds": 1,
                                                   "gamma": "auto", "eta": "auto", "c_sample": 8.0}},
    "verify": {"inputs": ("spanner", "points"), "params": {"tol": 1e-6}},
}


def _version():
    try:
        return metadata.version("volspan")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def content_hash(path):
    """Git blob hash of a file."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class ExperimentConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str = None

    def __post_init__(self):
        spec = COMMANDS.get(self.command)
        if spec is None:
            raise VolspanError("bad_config", f"unknown command {self.command!r}", module="cli")
        extra = set(self.params) - set(spec["params"])
        if extra:
            raise VolspanError("bad_config", f"unknown parameters {sorted(extra)}", module="cli")
        extra = set(self.inputs) - set(spec["inputs"])
        if extra:
            raise VolspanError("bad_config", f"unknown inputs {sorted(extra)}", module="cli")
        self.params = {**spec["params"], **self.params}

    @classmethod
    def from_dict(cls, obj):
        unknown = set(obj) - {"command", "inputs", "params", "seed", "output"}
        if unknown:
            raise VolspanError("bad_config", f"unknown keys {sorted(unknown)}", module="cli")
        return cls(**obj)

    def check_inputs(self):
        for name in COMMANDS[self.command]["inputs"]:
            path = self.inputs.get(name)
            if path is None:
                raise VolspanError("bad_config", f"missing input {name!r}", module="cli")
            if not Path(path).is_file():
                raise VolspanError("io_missing_input", f"input file not found: {path}", module="io",
                                   path=str(path))


@dataclass
class RunManifest:
    tool_version: str
    config: dict
    wall_clock: float = 0.0
    timings: dict = field(default_factory=dict)
    input_hashes: dict = field(default_factory=dict)
    status: str = "ok"

    def write(self, path):
        vio.atomic_write_text(path, vio.dumps(asdict(self)))


class _Stages:
    def __init__(self):
        self.timings = {}

    def __call__(self, name, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        self.timings[name] = round(time.perf_counter() - t0, 6)
        return out


def _manifest_path(cfg):
    out = Path(cfg.output)
    if cfg.command == "blo-run" or out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


def _emit(cfg, obj):
    _write_text(cfg, vio.dumps(obj))


def _write_text(cfg, text):
    if cfg.output:
        vio.atomic_write_text(cfg.output, text)
    else:
        sys.stdout.write(text)


def _workers():
    """CPU count, capped by ``VOLSPAN_THREADS`` when set."""
    n = os.cpu_count() or 1
    env = os.environ.get("VOLSPAN_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise VolspanError("bad_config", f"VOLSPAN_THREADS={env!r} is not an integer", module="cli") from None
    return n


# command bodies ------------------------------------------------------------------

def _cmd_mvee(cfg, st):
    from .mvee import mvee_approx
    K = st("read", vio.read_points, cfg.inputs["input"])
    E = st("mvee", mvee_approx, K, float(cfg.params["eps"]))
    d = E.shape.shape[0]
    _emit(cfg, {"dim": d, "shape": [float(v) for v in E.shape.reshape(-1)],
                "log_volume": float(E.log_volume), "gap": float(E.gap)})
    return EXIT_OK


def _cmd_john(cfg, st):
    from .mvee import john_decomposition
    K = st("read", vio.read_points, cfg.inputs["input"])
    Kj, cert = st("john", john_decomposition, K, float(cfg.params["eps"]), float(cfg.params["tol"]))
    # rows of K come first in the symmetrised set; later rows are negated copies
    lines = [f"# residual {vio.fmt(cert.residual)}", f"# weight_sum {vio.fmt(cert.weight_sum)}",
             "# transform " + " ".join(vio.fmt(v) for v in cert.transform.reshape(-1)),
             "index,weight"]
    lines += [f"{j},{vio.fmt(w)}" for j, w in enumerate(cert.weights) if w > 0]
    _write_text(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def _spanner_out(cfg, K, S, method, extra=None):
    from .geometry import is_volumetric_spanner
    rep = is_volumetric_spanner(S, K, float(cfg.params.get("tol", 1e-6)))
    obj = vio.spanner_to_dict(S, rep.max_norm)
    obj.update({"method": method, "size": int(S.size), "dim": K.dim})
    obj.update(extra or {})
    _emit(cfg, obj)
    return EXIT_OK


def _cmd_spanner_exact(cfg, st):
    from .sparsify import exact_volumetric_spanner
    K = st("read", vio.read_points, cfg.inputs["input"])
    S = st("spanner", exact_volumetric_spanner, K, float(cfg.params["tol"]))
    return _spanner_out(cfg, K, S, "exact")


def _cmd_spanner_fast(cfg, st):
    from .fast import FastSpannerConfig, fast_spanner_run
    K = st("read", vio.read_points, cfg.inputs["input"])
    p = cfg.params
    fc = FastSpannerConfig(c_sample=float(p["c_sample"]), base_threshold=p["base_threshold"],
                           max_retries=int(p["max_retries"]), rng_seed=int(cfg.seed))
    res = st("spanner", fast_spanner_run, K, fc)
    levels = [asdict(lv) for lv in res.levels]
    if p["stats"]:
        rows = ["level,n_active,retries,n_sampled,n_uncovered"]
        rows += [f"{lv.level},{lv.n_active},{lv.retries},{lv.n_sampled},{lv.n_uncovered}" for lv in res.levels]
        vio.atomic_write_text(p["stats"], "\n".join(rows) + "\n")
    return _spanner_out(cfg, K, res.spanner, "fast", {"levels": levels})


def _cmd_spanner_barycentric(cfg, st):
    from .barycentric import LinearOptOracle, barycentric_spanner
    from .geometry import SpannerSet, ellipsoid_norms
    K = st("read", vio.read_points, cfg.inputs["input"])
    bb = st("spanner", barycentric_spanner, LinearOptOracle(K), K.dim, float(cfg.params["C"]))
    S = SpannerSet.from_points(K, bb.indices)
    coef = np.abs(bb.coefficients(K.points)).max()
    _emit(cfg, {"indices": [int(i) for i in bb.indices], "C": bb.approx_C, "det_value": bb.det_value,
                "max_coefficient": float(coef), "max_norm": float(ellipsoid_norms(S, K.points).max()),
                "oracle_calls": bb.oracle_calls, "call_envelope": bb.call_envelope,
                "method": "barycentric", "dim": K.dim})
    return EXIT_OK


def _parse_body(spec, dim, radius):
    from .sampler import ConvexBodyOracle
    if spec == "box":
        return ConvexBodyOracle.box(dim, radius)
    if spec == "ball":
        return ConvexBodyOracle.ball(dim, radius)
    if spec == "simplex":
        return ConvexBodyOracle.simplex(dim)
    if spec.startswith("halfspace:"):
        A, b = vio.read_halfspaces(spec.split(":", 1)[1])
        return ConvexBodyOracle.polytope(A, b)
    raise VolspanError("bad_config", f"unknown body {spec!r}", module="cli")


def _parse_density(spec):
    from .sampler import LogDensity
    if spec == "uniform":
        return LogDensity.uniform()
    if spec.startswith("linear:"):
        return LogDensity.linear([float(v) for v in spec.split(":", 1)[1].split(",")])
    raise VolspanError("bad_config", f"unknown density {spec!r}", module="cli")


def _cmd_sample(cfg, st):
    from .sampler import hit_and_run_sample
    p = cfg.params
    density = _parse_density(p["density"])
    dim = p["dim"] or (len(density.direction) if density.direction is not None else 2)
    body = _parse_body(p["body"], int(dim), float(p["radius"]))
    if density.direction is not None and len(density.direction) != body.dim:
        raise VolspanError("dim_mismatch", "density and body dimensions differ", module="cli")
    X = st("sample", hit_and_run_sample, body, density, int(p["n"]), p["burn_in"], int(cfg.seed), p["thin"])
    _write_text(cfg, vio.points_to_csv(X))
    return EXIT_OK


def _read_adversary(spec):
    from .blo import FixedAdversary, RandomAdversary
    if spec == "random":
        return RandomAdversary()
    if spec.startswith("fixed:"):
        path = spec.split(":", 1)[1]
        if not Path(path).is_file():
            raise VolspanError("io_missing_input", f"input file not found: {path}", module="io", path=path)
        return FixedAdversary(vio.parse_points_csv(Path(path).read_text(), source=path))
    raise VolspanError("bad_config", f"unknown adversary {spec!r}", module="cli")


def _trace_csv(trace):
    lines = ["round,chosen_index,loss,cum_regret"]
    for t in range(len(trace)):
        lines.append(f"{t + 1},{int(trace.chosen_index[t])},{vio.fmt(trace.losses[t])},"
                     f"{vio.fmt(trace.cum_regret[t])}")
    return "\n".join(lines) + "\n"


def _cmd_blo_run(cfg, st):
    from .blo import BanditInstance, HedgeParams, regret_bound, run_seeds
    from .geometry import span_basis
    p = cfg.params
    K = st("read", vio.read_points, cfg.inputs["actions"])
    adv = _read_adversary(p["adversary"])
    T = int(p["T"])
    inst = st("instance", BanditInstance.from_adversary, K, adv, T, int(cfg.seed))
    gamma = p["gamma"] if p["gamma"] == "auto" else float(p["gamma"])
    eta = p["eta"] if p["eta"] == "auto" else float(p["eta"])
    params = HedgeParams(gamma=gamma, eta=eta, c_sample=float(p["c_sample"]))
    seeds = [int(cfg.seed) + k for k in range(int(p["seeds"]))]
    traces = st("runs", run_seeds, inst, params, seeds, min(_workers(), len(seeds)))
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    d = span_basis(K.points).shape[1]
    rows = ["seed,final_regret,bound_ratio"]
    for tr in traces:
        vio.atomic_write_text(out / f"run_seed{tr.seed}.csv", _trace_csv(tr))
        bound = regret_bound(tr, len(K), max(d, 1))
        rows.append(f"{tr.seed},{vio.fmt(tr.final_regret)},{vio.fmt(tr.final_regret / bound)}")
    vio.atomic_write_text(out / "summary.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def _cmd_verify(cfg, st):
    from .verify import verify_spanner
    pts = st("read", vio.read_points, cfg.inputs["points"])
    S = st("read_spanner", vio.read_spanner, cfg.inputs["spanner"], pts)
    rep = st("verify", verify_spanner, S.indices, pts.points, float(cfg.params["tol"]))
    _emit(cfg, rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_VERIFY


HANDLERS = {
    "mvee": _cmd_mvee,
    "john": _cmd_john,
    "spanner-exact": _cmd_spanner_exact,
    "spanner-fast": _cmd_spanner_fast,
    "spanner-barycentric": _cmd_spanner_barycentric,
    "sample": _cmd_sample,
    "blo-run": _cmd_blo_run,
    "verify": _cmd_verify,
}


def exit_code_for(err):
    if err.code == "verification_failed":
        return EXIT_VERIFY
    if err.code.startswith("io_") or err.code in ("parse_error", "bad_config"):
        return EXIT_IO
    return EXIT_NUMERIC


def _fail(err, stream=None):
    stream = stream or sys.stderr
    stream.write(json.dumps(err.to_dict(), sort_keys=True) + "\n")
    return exit_code_for(err)


def dispatch(cfg):
    """Run one configured command; returns the exit status."""
    t0 = time.perf_counter()
    st = _Stages()
    manifest = RunManifest(_version(), asdict(cfg))
    try:
        cfg.check_inputs()
        manifest.input_hashes = {k: content_hash(v) for k, v in sorted(cfg.inputs.items())}
        for key in ("adversary", "body"):
            spec = str(cfg.params.get(key, ""))
            if ":" in spec and Path(spec.split(":", 1)[1]).is_file():
                manifest.input_hashes[key] = content_hash(spec.split(":", 1)[1])
        code = HANDLERS[cfg.command](cfg, st)
    except VolspanError as err:
        code = _fail(err)
        manifest.status = err.qualified_code
    except OSError as exc:
        code = _fail(VolspanError("io_error", str(exc), module="io"))
        manifest.status = "io.io_error"
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        code = _fail(VolspanError("numerical_failure", str(exc), module="cli"))
        manifest.status = "cli.numerical_failure"
    if code == EXIT_VERIFY and manifest.status == "ok":
        manifest.status = "verification_failed"
    if cfg.output:
        manifest.timings = st.timings
        manifest.wall_clock = round(time.perf_counter() - t0, 6)
        try:
            manifest.write(_manifest_path(cfg))
        except OSError:
            pass
    return code


# argument parsing ------------------------------------------------------------------

def _auto_or_float(s):
    return s if s == "auto" else float(s)


def build_parser():
    ap = argparse.ArgumentParser(prog="volspan", description="Volumetric spanners and bandit linear optimisation.")
    ap.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_help="output file (stdout when omitted)"):
        p.add_argument("--seed", type=int, default=None, dest="sub_seed", help=argparse.SUPPRESS)
        p.add_argument("--out", default=None, help=out_help)
        return p

    p = common(sub.add_parser("mvee", help="approximate minimum-volume enclosing ellipsoid"))
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, default=1e-6)

    p = common(sub.add_parser("john", help="John position and decomposition weights"))
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--tol", type=float, default=1e-6)

    sp = sub.add_parser("spanner", help="volumetric spanner constructions")
    kinds = sp.add_subparsers(dest="kind", required=True)
    p = common(kinds.add_parser("exact", help="at most 12d points"))
    p.add_argument("--input", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p = common(kinds.add_parser("fast", help="randomised recursive construction"))
    p.add_argument("--input", required=True)
    p.add_argument("--c-sample", type=float, default=10.0)
    p.add_argument("--base-threshold", type=int, default=None)
    p.add_argument("--max-retries", type=int, default=64)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--stats", default=None, help="per-level statistics CSV")
    p = common(kinds.add_parser("barycentric", help="C-approximate barycentric basis"))
    p.add_argument("--input", required=True)
    p.add_argument("--C", type=float, default=2.0)

    p = common(sub.add_parser("sample", help="hit-and-run samples from a convex body"))
    p.add_argument("--body", default="box", help="box, ball, simplex or halfspace:FILE")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--density", default="uniform", help="uniform or linear:L1,L2,...")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)

    bp = sub.add_parser("blo", help="bandit linear optimisation")
    bsub = bp.add_subparsers(dest="kind", required=True)
    p = common(bsub.add_parser("run", help="GeometricHedge runs over several seeds"), "output directory")
    p.add_argument("--actions", required=True)
    p.add_argument("--adversary", default="random", help="random or fixed:FILE")
    p.add_argument("--T", type=int, default=1024)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--gamma", type=_auto_or_float, default="auto")
    p.add_argument("--eta", type=_auto_or_float, default="auto")
    p.add_argument("--c-sample", type=float, default=8.0)

    p = common(sub.add_parser("verify", help="check a spanner against a point set"))
    p.add_argument("--spanner", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    return ap


def config_from_args(ns):
    command = ns.command if ns.command in ("mvee", "john", "sample", "verify") else f"{ns.command}-{ns.kind}"
    seed = ns.sub_seed if ns.sub_seed is not None else (ns.seed or 0)
    inputs, params = {}, {}
    for name in COMMANDS[command]["inputs"]:
        inputs[name] = getattr(ns, name)
    for name in COMMANDS[command]["params"]:
        params[name] = getattr(ns, name)
    return ExperimentConfig(command, inputs, params, seed, ns.out)


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if cfg.command == "blo-run" and not cfg.output:
            raise VolspanError("bad_config", "blo run needs --out DIR", module="cli")
    except VolspanError as err:
        return _fail(err)
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
