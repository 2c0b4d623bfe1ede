"""Command line driver: ``glvortex <verb> --config FILE --out DIR``.

The config is INI text with one section per experiment kind. Every verb reads
the section of the same name (``lambda-beta`` reads ``[lambda_beta]``). Each
parameter point runs as an independent job; results are merged by parameter
key, so the worker count never changes the files written.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Optional

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

KINDS = ("profile", "spectrum", "lambda_beta", "dirichlet", "core_energy", "branch", "qbreve")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


# ---------------------------------------------------------------------------
# Config schema: key -> (parser, validator, default, required)


def _floats(s):
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.replace(";", ",").split(",") if x.strip())


def _degrees(s):
    out = []
    for part in s.split(";"):
        if part.strip():
            a, b = (int(x) for x in part.split(","))
            out.append((a, b))
    return tuple(out)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _all(pred, msg):
    def check(v):
        vals = v if isinstance(v, tuple) else (v,)
        if not vals or not all(pred(x) for x in vals):
            return msg
        return None
    return check


def _deg_ok(v):
    if not v or any(a not in (0, 1) or b not in (0, 1) or a + b == 0 for a, b in v):
        return "degrees must be pairs n+,n- in {0,1}, not both zero"
    return None


POS = _all(lambda x: x > 0, "must be > 0")
BETA = _all(lambda x: x > 0, "β>0 required")
EPS = _all(lambda x: 0 < x < 1, "epsilon must lie in (0, 1)")
NONNEG_INT = _all(lambda x: x >= 0, "must be >= 0")


def _min(k):
    return _all(lambda x: x >= k, f"must be >= {k}")


def _even_min(k):
    return _all(lambda x: x >= k and x % 2 == 0, f"must be even and >= {k}")


COMMON = {
    "seed": (int, NONNEG_INT, 0, False),
    "out": (str, None, None, False),
}

SCHEMA = {
    "profile": {
        "R": (_floats, POS, None, True),
        "n": (int, _min(10), 400, False),
        "tol": (float, POS, 1e-10, False),
    },
    "spectrum": {
        "beta": (_floats, BETA, None, True),
        "lambda": (_floats, POS, None, False),
        "R": (_floats, POS, None, False),
        "modes": (_ints, NONNEG_INT, (1,), False),
        "n": (int, _even_min(20), 400, False),
        "k": (int, _min(1), 1, False),
    },
    "lambda_beta": {
        "beta": (_floats, BETA, None, True),
        "levels": (_ints, _even_min(20), (400, 800), False),
        "tol": (float, POS, 1e-6, False),
    },
    "dirichlet": {
        "beta": (_floats, BETA, None, True),
        "epsilon": (_floats, EPS, None, True),
        "degrees": (_degrees, _deg_ok, ((1, 1),), False),
        "n_r": (int, _min(8), 256, False),
        "n_theta": (int, _even_min(8), 256, False),
        "tol": (float, POS, 1e-6, False),
        "snapshot": (_bool, None, False, False),
    },
    "core_energy": {
        "beta": (_floats, BETA, None, True),
        "epsilon": (_floats, EPS, None, True),
        "degrees": (_degrees, _deg_ok, ((1, 1),), False),
        "n_r": (int, _min(8), 256, False),
        "n_theta": (int, _even_min(8), 256, False),
        "tol": (float, POS, 1e-6, False),
        "gl": (_bool, None, True, False),
    },
    "branch": {
        "beta": (_floats, _all(lambda x: 0 < x < 1, "branch needs 0 < β < 1"), None, True),
        "t_max": (float, POS, 0.1, False),
        "steps": (int, _min(4), 10, False),
        "n_r": (int, _min(8), 64, False),
        "n_theta": (int, _even_min(8), 64, False),
        "tol": (float, POS, 1e-10, False),
    },
    "qbreve": {
        "beta": (_floats, BETA, None, True),
        "r_max": (float, _min(20.0), 40.0, False),
        "n": (int, _min(100), 16000, False),
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict
    seed: int = 0
    out: Optional[str] = None
    source: str = ""

    def echo(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params), "seed": self.seed}


@dataclass
class JobRecord:
    key: list
    status: str
    seconds: float
    error: str = ""


@dataclass
class RunManifest:
    config: dict
    version: str
    jobs: list = field(default_factory=list)
    files: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(j.status != "ok" for j in self.jobs)

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    return v


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    out, sec = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            sec = m.group(1).strip()
            out[(sec, None)] = i
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and sec is not None:
            out[(sec, m.group(1).strip().lower())] = i
    return out


def parse_config(text: str, kind: str, source: str = "<config>") -> ExperimentConfig:
    """Validate section ``kind`` of an INI text; raises ConfigError listing every problem."""
    if kind not in SCHEMA:
        raise ConfigError([f"{source}: unknown experiment kind {kind!r}"])
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}".replace("\n", " ")]) from None
    lines = _key_lines(text)
    unknown_sections = [s for s in cp.sections() if s not in SCHEMA]
    errors = [f"{source}:{lines.get((s, None), '?')}: unknown section [{s}]" for s in unknown_sections]
    if not cp.has_section(kind):
        errors.append(f"{source}: missing section [{kind}]")
        raise ConfigError(errors)
    schema = {k.lower(): (k, v) for k, v in {**SCHEMA[kind], **COMMON}.items()}
    sec = cp[kind]
    params, seed, out = {}, 0, None
    seen = set()
    for key in sec:
        where = f"{source}:{lines.get((kind, key), '?')}"
        if key not in schema:
            errors.append(f"{where}: unknown key {key!r} in [{kind}]")
            continue
        name, (conv, check, _, _) = schema[key]
        seen.add(name)
        try:
            val = conv(sec[key])
        except (ValueError, TypeError):
            errors.append(f"{where}: cannot parse {key} = {sec[key]!r}")
            continue
        msg = check(val) if check else None
        if msg:
            errors.append(f"{where}: {key}: {msg}")
            continue
        if name == "seed":
            seed = val
        elif name == "out":
            out = val
        else:
            params[name] = val
    for name, (_, _, default, required) in SCHEMA[kind].items():
        if name in params or name in seen:
            continue
        if required:
            errors.append(f"{source}:{lines.get((kind, None), '?')}: [{kind}] missing required key {name!r}")
        else:
            params[name] = default
    if kind == "spectrum" and not errors:
        if (params["lambda"] is None) == (params["R"] is None):
            errors.append(f"{source}:{lines.get((kind, None), '?')}: [spectrum] give exactly one of lambda, R")
    if kind == "core_energy" and not errors:
        if len(params["epsilon"]) < 3:
            errors.append(f"{source}:{lines.get((kind, 'epsilon'), '?')}: epsilon: need at least three values")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(kind, params, seed, out, source)


# ---------------------------------------------------------------------------
# Jobs. Each returns {filename: text} or a list of CSV rows for merging.


def _g(x):
    return f"{x:.17g}"


def _tag(x):
    return f"{x:.6g}".replace(".", "p").replace("-", "m")


def _job_profile(R, n, tol):
    from . import radial_profile as rp

    res = rp.solve_bvp(R, tol=tol, n=n)
    return {f"profile_R{_tag(R)}.csv": rp.profile_to_csv(res.profile)}


def _job_spectrum(beta, lam, modes, n, k):
    from . import radial_profile as rp
    from . import spectral as spc

    n = spc._resolution_for(lam, n)
    prof = rp.profile_f_lambda(lam, n=n)
    rows = []
    for m in modes:
        op = spc.assemble_mode1(lam, beta, prof) if m == 1 else spc.assemble_mode_n(m, lam, beta, prof)
        rows += spc.ground_eigenpair(op, k=k)
    return {"spectrum.csv": spc.sweep_to_csv(rows).splitlines()[1:]}


def _job_lambda_beta(beta, levels, tol):
    from . import spectral as spc

    cc = spc.find_lambda_beta(beta, tol=tol, levels=levels)
    return {f"lambda_beta_{_tag(beta)}.json": spc.critical_coupling_to_json(cc)}


def _minimize(degrees, eps, beta, n_r, n_theta, tol):
    from . import field2d as f2

    grid = f2.DiskGrid(n_r, n_theta)
    if degrees == "GL":
        return f2.minimize_gl(eps, tol=tol, grid=grid)[2]
    return f2.minimize_degrees(degrees, eps, beta, grid, tol=tol)


def _job_dirichlet(beta, degrees, eps, n_r, n_theta, tol, snapshot):
    from . import field2d as f2

    fld = _minimize(degrees, eps, beta, n_r, n_theta, tol)
    if not fld.info.get("converged", False):
        raise RuntimeError(f"minimizer stopped at residual {fld.info.get('residual_norm')}")
    e = f2.energy(fld)
    row = ",".join([_g(beta), str(degrees[0]), str(degrees[1]), _g(eps), _g(e.total), _g(e.dirichlet),
                    _g(e.potential_iso), _g(e.potential_spin), _g(f2.spin_l2(fld)),
                    str(fld.info["iterations"]), _g(fld.info["residual_norm"])])
    out = {"dirichlet.csv": [row]}
    if snapshot:
        stem = f"field_b{_tag(beta)}_d{degrees[0]}{degrees[1]}_e{_tag(eps)}"
        out[stem + ".csv"] = f2.field_to_csv(fld)
        out[stem + ".json"] = json.dumps(f2.field_metadata(fld), indent=2, sort_keys=True) + "\n"
        out[stem + ".gp"] = f2.plot_script(stem + ".csv")
    return out


def _job_core_sample(beta, degrees, eps, n_r, n_theta, tol):
    from . import field2d as f2

    fld = _minimize(degrees, eps, beta, n_r, n_theta, tol)
    if not fld.info.get("converged", False):
        raise RuntimeError(f"minimizer stopped at residual {fld.info.get('residual_norm')}")
    return {"__sample__": (f2.energy(fld).total, f2.spin_l2(fld))}


def _job_branch(beta, t_max, steps, n_r, n_theta, tol):
    from . import bifurcation as bif
    from . import field2d as f2
    from . import spectral as spc

    cc = spc.find_lambda_beta(beta)
    br = bif.continue_branch(beta, cc, t_max=t_max, n_steps=steps, grid=f2.DiskGrid(n_r, n_theta), tol=tol)
    if br.flagged:
        raise RuntimeError(br.message)
    return {f"branch_{_tag(beta)}.csv": bif.branch_to_csv(br), f"branch_{_tag(beta)}.json": bif.branch_summary_json(br)}


def _job_qbreve(beta, r_max, n):
    from . import radial_profile as rp
    from . import spectral as spc

    Finf = rp.entire_profile(r_max)
    direct, closed = spc.qbreve_infinity(beta, Finf, r_max=r_max, n=n)
    return {"qbreve.csv": [",".join([_g(beta), _g(r_max), _g(direct), _g(closed)])]}


JOB_FUNCS = {
    "profile": _job_profile,
    "spectrum": _job_spectrum,
    "lambda_beta": _job_lambda_beta,
    "dirichlet": _job_dirichlet,
    "core_energy": _job_core_sample,
    "branch": _job_branch,
    "qbreve": _job_qbreve,
}

HEADERS = {
    "spectrum.csv": "beta,lambda,R,mode,index,mu,residual",
    "dirichlet.csv": "beta,n_plus,n_minus,epsilon,energy,dirichlet,potential_iso,potential_spin,spin_l2,iterations,residual_norm",
    "qbreve.csv": "beta,r_max,direct,closed_form",
}


def plan_jobs(cfg: ExperimentConfig) -> list:
    """(key, kwargs) per independent parameter point, in key order."""
    p = cfg.params
    jobs = []
    if cfg.kind == "profile":
        jobs = [((R,), dict(R=R, n=p["n"], tol=p["tol"])) for R in p["R"]]
    elif cfg.kind == "spectrum":
        lams = p["lambda"] if p["lambda"] is not None else tuple(R * R for R in p["R"])
        jobs = [((b, lam), dict(beta=b, lam=lam, modes=p["modes"], n=p["n"], k=p["k"]))
                for b in p["beta"] for lam in lams]
    elif cfg.kind == "lambda_beta":
        jobs = [((b,), dict(beta=b, levels=p["levels"], tol=p["tol"])) for b in p["beta"]]
    elif cfg.kind == "dirichlet":
        grid = dict(n_r=p["n_r"], n_theta=p["n_theta"], tol=p["tol"])
        jobs = [((b, d, e), dict(beta=b, degrees=d, eps=e, snapshot=p["snapshot"], **grid))
                for b in p["beta"] for d in p["degrees"] for e in p["epsilon"]]
    elif cfg.kind == "core_energy":
        grid = dict(n_r=p["n_r"], n_theta=p["n_theta"], tol=p["tol"])
        pts = [(b, d) for b in p["beta"] for d in p["degrees"]]
        if p["gl"]:
            pts.append((1.0, "GL"))
        jobs = [((b, d, e), dict(beta=b, degrees=d, eps=e, **grid)) for b, d in pts for e in p["epsilon"]]
    elif cfg.kind == "branch":
        jobs = [((b,), dict(beta=b, t_max=p["t_max"], steps=p["steps"], n_r=p["n_r"], n_theta=p["n_theta"],
                            tol=p["tol"])) for b in p["beta"]]
    elif cfg.kind == "qbreve":
        jobs = [((b,), dict(beta=b, r_max=p["r_max"], n=p["n"])) for b in p["beta"]]
    return sorted(jobs, key=lambda j: _sort_key(j[0]))


def _sort_key(key):
    return tuple((1, 0, 0) if v == "GL" else (0, v, 0) if not isinstance(v, tuple) else (0, 0, v) for v in key)


def _run_one(kind, kwargs):
    t0 = time.perf_counter()
    try:
        out = JOB_FUNCS[kind](**kwargs)
        return "ok", out, time.perf_counter() - t0, ""
    except Exception as exc:  # recorded per job
        return "failed", {}, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"


def default_jobs() -> int:
    env = os.environ.get("GLVORTEX_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _core_energy_rows(cfg, jobs, results):
    """Fit Q for each (beta, degrees) from its successful samples."""
    import numpy as np

    groups = {}
    for (key, _), (status, out, _, _) in zip(jobs, results):
        if status == "ok":
            b, d, e = key
            groups.setdefault((b, d), []).append((e, *out["__sample__"]))
    rows = []
    for (b, d), samples in sorted(groups.items(), key=lambda kv: _sort_key(kv[0])):
        samples.sort(reverse=True)
        if len(samples) < 3:
            continue
        n_tot = 2 if d == "GL" else d[0] + d[1]
        x = np.array([s[0] for s in samples])
        y = np.array([s[1] for s in samples]) - 0.5 * math.pi * n_tot * np.abs(np.log(x))
        A = np.vstack([np.ones_like(x), x]).T
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        fit = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
        label = "GL" if d == "GL" else f"{d[0]}{d[1]}"
        eps = ";".join(_g(s[0]) for s in samples)
        energies = ";".join(_g(s[1]) for s in samples)
        rows.append(",".join([label, _g(b), _g(coef[0]), _g(coef[1]), _g(fit), eps, energies]))
    return rows


def run(cfg: ExperimentConfig, out_dir: str, jobs: Optional[int] = None) -> RunManifest:
    plan = plan_jobs(cfg)
    n_workers = min(jobs or default_jobs(), max(1, len(plan)))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            futs = [ex.submit(_run_one, cfg.kind, kw) for _, kw in plan]
            results = [f.result() for f in futs]
    else:
        results = [_run_one(cfg.kind, kw) for _, kw in plan]

    files, tables = {}, {}
    man = RunManifest(config=cfg.echo(), version=_version())
    for (key, _), (status, out, secs, err) in zip(plan, results):
        man.jobs.append(JobRecord(_jsonable(list(key)), status, secs, err))
        for name, body in out.items():
            if isinstance(body, list):
                tables.setdefault(name, []).extend(body)
            elif not name.startswith("__"):
                files[name] = body
    if cfg.kind == "core_energy":
        files["core_energy.csv"] = ("label,beta,Q,c1,fit_residual,epsilons,energies\n"
                                    + "".join(r + "\n" for r in _core_energy_rows(cfg, plan, results)))
    for name, rows in tables.items():
        files[name] = HEADERS[name] + "\n" + "".join(r + "\n" for r in rows)

    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(files):
        data = files[name].encode()
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)
        man.files[name] = hashlib.sha256(data).hexdigest()
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(man.to_json())
    return man


def verify_digests(out_dir: str) -> list:
    """Names whose content no longer matches the manifest digest."""
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        man = json.load(fh)
    bad = []
    for name, digest in man["files"].items():
        with open(os.path.join(out_dir, name), "rb") as fh:
            if hashlib.sha256(fh.read()).hexdigest() != digest:
                bad.append(name)
    return bad


# ---------------------------------------------------------------------------


VERBS = {
    "profile": "profile",
    "spectrum": "spectrum",
    "lambda-beta": "lambda_beta",
    "dirichlet": "dirichlet",
    "core-energy": "core_energy",
    "branch": "branch",
    "qbreve": "qbreve",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glvortex", description="Two-component vortex experiments.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in (*VERBS, "verify"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=verb != "verify", help="INI file with a section for this experiment")
        p.add_argument("--out", help="output directory (overrides 'out' in the config)")
        p.add_argument("--jobs", type=int, help="worker processes (default $GLVORTEX_JOBS or all cores)")
        p.add_argument("--seed", type=int, help="seed for randomized test vectors")
        if verb == "verify":
            p.add_argument("--criteria", help="comma-separated subset, e.g. 1,5,6")
    return ap


def _verify(args) -> int:
    from . import acceptance

    nums = None
    if args.criteria:
        try:
            nums = [int(x) for x in args.criteria.split(",")]
        except ValueError:
            print(f"bad --criteria {args.criteria!r}", file=sys.stderr)
            return EXIT_CONFIG
        bad = [k for k in nums if k not in acceptance.CRITERIA]
        if bad:
            print(f"unknown criteria {bad}", file=sys.stderr)
            return EXIT_CONFIG
    if args.seed is not None:
        acceptance.CRITERIA[10] = lambda: acceptance.criterion_10(seed=args.seed)
    res = acceptance.run_all(nums)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "acceptance.txt"), "w") as fh:
            fh.write("".join(r.line() + "\n" for r in res))
    return EXIT_OK if all(r.passed for r in res) else EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        print("--seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "verify":
        return _verify(args)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, VERBS[args.verb], source=args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.out
    if not out:
        print("no output directory: pass --out or set 'out' in the config", file=sys.stderr)
        return EXIT_CONFIG
    man = run(cfg, out, args.jobs)
    for j in man.jobs:
        if j.status != "ok":
            print(f"job {j.key} failed: {j.error}", file=sys.stderr)
    return EXIT_NUMERICAL if man.failed else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
