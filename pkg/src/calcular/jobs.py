"""Job documents: parsing, validation and dispatch to the library."""

import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

import jsonschema
import numpy as np

from .errors import CertificateInvalid, Infeasible, SchemaError
from .functions import Domain, MatrixFunction, eval_point, function_from_literal
from .kernels import (AglerDecomposition, FinitePointSet, KernelMatrix, agler_norm, builtin_kernel,
                      finite_multiplier_norm, function_values, model_tuple, verify_decomposition)
from .linalg import operator_norm
from .oracles import (SearchBudget, closure_report, kernel_search_lower_bound, ruan_check,
                      von_neumann_check, worker_count)
from .realization import (build_realization, realization_from_dict, realization_to_dict,
                          verify_realization)
from .sdp import Constraint, SdpProblem, solve_min, verify_solution
from .tuples import (ClassSpec, apply_function, coordinate_class, tuple_from_literal,
                     tuple_to_literal)

VERSION = "0.1.0"
DEFAULT_OPTIONS = {"seed": 0}


def load_schema():
    return json.loads(resources.files("calcular").joinpath("schema.json").read_text())


def to_json(obj):
    """Plain JSON form: complex numbers as [re, im], arrays as nested lists."""
    if isinstance(obj, dict):
        return {str(k): to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj):
    return json.dumps(to_json(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _pointer(parts):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def _find_non_finite(obj, path=()):
    if isinstance(obj, float) and not math.isfinite(obj):
        return path
    items = obj.items() if isinstance(obj, dict) else enumerate(obj) if isinstance(obj, list) else ()
    for k, v in items:
        found = _find_non_finite(v, path + (k,))
        if found is not None:
            return found
    return None


def _complex(pair):
    return complex(pair[0], pair[1])


def _matrix(lit):
    arr = np.asarray(lit, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
        raise SchemaError("matrix must be square")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass
class Job:
    command: str
    config: dict
    domain: Domain
    points: np.ndarray = None
    point: np.ndarray = None
    function: object = None
    functions: list = None
    values: np.ndarray = None
    spec: ClassSpec = None
    tuples: list = None
    kernel: dict = None
    matrix_functions: list = None
    realization: object = None
    certificate: dict = None
    sdp: SdpProblem = None
    options: dict = field(default_factory=dict)


def _parse_point(lit, d, where):
    if len(lit) != d:
        raise SchemaError(f"point must have {d} coordinates", where)
    return np.array([_complex(c) for c in lit], dtype=np.complex128)


def _sdp_from_literal(lit):
    cons = []
    for c in lit["constraints"]:
        terms = {}
        for t in c["terms"]:
            key = (t["block"], t["i"], t["j"])
            terms[key] = terms.get(key, 0j) + _complex(t["coeff"])
        free = {f["index"]: _complex(f["coeff"]).real for f in c.get("free", [])}
        cons.append(Constraint(terms, _complex(c["rhs"]), free))
    blocks = {b["block"]: _matrix(b["matrix"]) for b in lit.get("objective_blocks", [])}
    try:
        return SdpProblem(tuple(lit["block_sizes"]), cons, lit.get("n_free", 0),
                          tuple(lit.get("objective_free", ())), blocks)
    except ValueError as exc:
        raise SchemaError(str(exc), "/sdp") from exc


def parse_job(text):
    """Validate a job document (strict: unknown fields are rejected) and build its objects."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from exc
    bad = _find_non_finite(raw)
    if bad is not None:
        raise SchemaError("non-finite number", _pointer(bad))
    validator = jsonschema.Draft202012Validator(load_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        raise SchemaError(err.message, _pointer(err.absolute_path))

    config = json.loads(json.dumps(raw))
    config["options"] = {**DEFAULT_OPTIONS, **config.get("options", {})}
    dom_lit = config["domain"]
    domain = Domain(dom_lit["kind"], dom_lit["d"], dom_lit.get("margin", 1e-6))
    job = Job(config["command"], config, domain, options=config["options"])

    if "points" in config:
        pts = [_parse_point(p, domain.d, f"/points/{i}") for i, p in enumerate(config["points"])]
        job.points = np.array(pts, dtype=np.complex128).reshape(len(pts), domain.d)
        # strict interior and distinctness are checked here, before any work
        FinitePointSet(domain, job.points)
    if "point" in config:
        job.point = _parse_point(config["point"], domain.d, "/point")
        if not domain.contains(job.point, strict=True):
            raise ValueError("point is not strictly inside the domain")
    if "function" in config:
        job.function = function_from_literal(config["function"])
    if "functions" in config:
        job.functions = [function_from_literal(f) for f in config["functions"]]
    if "values" in config:
        job.values = np.array([_complex(v) for v in config["values"]], dtype=np.complex128)
        if job.points is None or len(job.values) != len(job.points):
            raise SchemaError("values need one entry per point", "/values")
    if "constraints" in config:
        job.spec = ClassSpec(tuple(function_from_literal(f) for f in config["constraints"]), domain)
    else:
        job.spec = coordinate_class(domain)
    if "tuples" in config:
        job.tuples = []
        for i, lit in enumerate(config["tuples"]):
            try:
                job.tuples.append(tuple_from_literal(lit))
            except ValueError as exc:
                raise SchemaError(str(exc), f"/tuples/{i}") from exc
    job.kernel = config.get("kernel")
    if "matrix_functions" in config:
        job.matrix_functions = [MatrixFunction([[function_from_literal(f) for f in row] for row in mf])
                                for mf in config["matrix_functions"]]
    if "realization" in config:
        job.realization = realization_from_dict(config["realization"])
    job.certificate = config.get("certificate")
    if "sdp" in config:
        job.sdp = _sdp_from_literal(config["sdp"])
    return job


# -- command handlers --------------------------------------------------------------

def _need(job, *names):
    for name in names:
        if getattr(job, name) is None:
            raise SchemaError(f"command {job.command!r} needs {name!r}", "")


def _pointset(job):
    _need(job, "points")
    return FinitePointSet(job.domain, job.points)


def _data(job):
    F = _pointset(job)
    if job.values is not None:
        return F, job.values
    _need(job, "function")
    return F, function_values(job.function, F.points)


def _budget(job):
    b = job.options.get("budget", {})
    return SearchBudget(b.get("samples", 10_000), b.get("refine_steps", 200), job.options["seed"])


def _solver_opts(job):
    return {"tol": job.options.get("tol", 1e-10), "max_iter": job.options.get("max_iter", 100),
            "seed": job.options["seed"]}


def _certificate_dict(dec):
    return {"bound": dec.bound, "certificates": list(dec.certificates), "residual": dec.residual,
            "solver": dec.solver}


def _kernel(job, F):
    _need(job, "kernel")
    if "builtin" in job.kernel:
        return builtin_kernel(job.kernel["builtin"], F, job.kernel.get("truncation"))
    return KernelMatrix(F, _matrix(job.kernel["gram"]))


def _cmd_eval(job):
    _need(job, "function")
    out = {}
    if job.point is not None:
        out["result"] = eval_point(job.function, job.point, job.domain)
    if job.points is not None:
        out["values"] = [eval_point(job.function, p, job.domain) for p in job.points]
        out.setdefault("result", out["values"])
    if job.tuples:
        mats = [apply_function(job.function, T, job.domain) for T in job.tuples]
        out["matrices"] = mats
        out["norms"] = [operator_norm(M) for M in mats]
        out.setdefault("result", out["norms"])
    if "result" not in out:
        raise SchemaError("eval needs 'point', 'points' or 'tuples'", "")
    return out


def _cmd_norm(job):
    F, vals = _data(job)
    if job.kernel is not None:
        k = _kernel(job, F)
        return {"result": finite_multiplier_norm(vals, k), "kind": "multiplier", "tail_bound": k.tail_bound}
    M, dec = agler_norm(vals, F, job.spec, **_solver_opts(job))
    return {"result": M, "kind": "agler", "certificate": _certificate_dict(dec)}


def _cmd_decompose(job):
    if job.sdp is not None:
        sol = solve_min(job.sdp, **_solver_opts(job))
        sol.raise_for_status()
        return {"result": sol.summary(), "verification": verify_solution(job.sdp, sol)}
    F, vals = _data(job)
    M, dec = agler_norm(vals, F, job.spec, **_solver_opts(job))
    res = verify_decomposition(vals, F, job.spec, dec)
    return {"result": _certificate_dict(dec), "verified_residual": res}


def _cmd_realize(job):
    F, vals = _data(job)
    M, dec = agler_norm(vals, F, job.spec, **_solver_opts(job))
    if M > 1 + 1e-9:
        raise CertificateInvalid(f"norm {M:.12g} exceeds 1; the data admit no contractive realization")
    R = build_realization(vals, F, job.spec, dec)
    report = verify_realization(R, F, vals, samples=job.options.get("samples", 200), seed=job.options["seed"])
    return {"result": realization_to_dict(R), "norm": M, "certificate": _certificate_dict(dec),
            "verification": report}


def _cmd_verify(job):
    if job.realization is not None:
        F, vals = (_data(job) if job.points is not None else (None, None))
        report = verify_realization(job.realization, F, vals, samples=job.options.get("samples", 200),
                                    seed=job.options["seed"])
        if not report["ok"]:
            raise CertificateInvalid(f"realization failed verification: {report}")
        return {"result": report}
    _need(job, "certificate")
    F, vals = _data(job)
    dec = AglerDecomposition(job.certificate["bound"],
                             tuple(_matrix(G) for G in job.certificate["certificates"]))
    if len(dec.certificates) != len(job.spec):
        raise SchemaError("one certificate per constraint is required", "/certificate/certificates")
    res = verify_decomposition(vals, F, job.spec, dec)
    return {"result": {"ok": True, "residual": res}}


def _cmd_oracle(job):
    F, vals = _data(job)
    r = kernel_search_lower_bound(vals, F, job.spec, _budget(job))
    out = {"result": r.value, "accepted": r.accepted, "rejected": r.rejected,
           "rejection_rate": r.rejection_rate, "kernel": r.kernel.gram}
    if job.options.get("compare", False):
        M, _ = agler_norm(vals, F, job.spec, **_solver_opts(job))
        out["agler_norm"] = M
        out["gap"] = M - r.value
    return out


def _cmd_model(job):
    F = _pointset(job)
    k = _kernel(job, F)
    T = model_tuple(k)
    out = {"result": tuple_to_literal(T), "tail_bound": k.tail_bound}
    if job.function is not None or job.values is not None:
        _, vals = _data(job)
        V = T.eigen[0]
        out["norm_phi_T"] = operator_norm((V * vals) @ np.linalg.inv(V))
        out["multiplier_norm"] = finite_multiplier_norm(vals, k)
    return out


def _cmd_closure(job):
    _need(job, "tuples", "functions")
    budget = _budget(job)
    rep = closure_report(job.spec, job.tuples, job.functions, budget)
    return {"result": "pass" if rep["counterexamples"] == 0 else "fail", "report": rep}


def _cmd_ruan(job):
    _need(job, "matrix_functions", "tuples")
    rep = ruan_check(job.matrix_functions, job.tuples, job.options.get("trials", 100), job.options["seed"])
    return {"result": rep["verdict"], "report": rep}


def _cmd_vn(job):
    _need(job, "function", "tuples")
    reports = [von_neumann_check(T, job.function, job.options.get("resolution", 256),
                                 job.options.get("exploratory", False)) for T in job.tuples]
    verdicts = {r["verdict"] for r in reports}
    verdict = "FAIL" if "FAIL" in verdicts else "exploratory" if "exploratory" in verdicts else "pass"
    return {"result": verdict, "reports": reports}


HANDLERS = {
    "eval": _cmd_eval, "norm": _cmd_norm, "decompose": _cmd_decompose, "realize": _cmd_realize,
    "verify": _cmd_verify, "oracle": _cmd_oracle, "model": _cmd_model, "closure": _cmd_closure,
    "ruan": _cmd_ruan, "vn": _cmd_vn,
}


@dataclass
class Report:
    report: dict
    metadata: dict

    def document(self):
        return {"report": self.report, "metadata": self.metadata}


def run_job(job):
    """Execute a parsed job.  Timing lives in ``metadata``, everything else in ``report``."""
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    body = HANDLERS[job.command](job)
    report = {"command": job.command, "job": job.config, "seed": job.options["seed"], **body}
    meta = {"wall_time_s": time.perf_counter() - t0, "started_utc": started.isoformat(),
            "version": VERSION, "threads": worker_count()}
    return Report(to_json(report), meta)


def error_report(exc, config=None, code=4):
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, SchemaError):
        err["path"] = exc.path
    if isinstance(exc, Infeasible) and exc.certificate is not None:
        err["certificate"] = exc.certificate
    report = {"error": err}
    if config is not None:
        report["command"] = config.get("command")
        report["job"] = config
    return to_json(report)
