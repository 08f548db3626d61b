"""Experiment configs, protocol runners and result records.

A config is a JSON document::

    {"protocol": "fidelity", "seed": 0, "repeat": 5, "params": {...}}

and a record is a JSON document with ``schema_version``, the config echo,
``columns`` (name + type), ``rows`` and a ``summary`` block.
"""

from __future__ import annotations

import copy
import json
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, ProtocolError, QaeKitError
from .fidelity import (
    estimate_fidelity_qae,
    estimate_fidelity_resource_efficient,
    noisy_state,
    psi_one,
    psi_zero,
    ssfb_interval,
)
from .gibbs import GibbsConfig, solve_gibbs
from .linalg import DensityOperator, random_density_operator, uhlmann_fidelity
from .pauli import PauliHamiltonian, ising_ring, z_sum
from .qae import QaeConfig, train, write_json_atomic
from .qfi import QfiConfig, optimize_probe

SCHEMA_VERSION = "1.0"
PROTOCOLS = ("train-qae", "fidelity", "fidelity-re", "gibbs", "qfi")

DEFAULTS: dict[str, dict] = {
    "train-qae": {
        "num_qubits": 4,
        "latent_qubits": 2,
        "layers": 5,
        "learning_rate": 0.8,
        "iterations": 200,
        "state": {"base": "psi0", "p": 0.1, "r": 4, "a": 2.0},
    },
    "fidelity": {
        "num_qubits": 6,
        "latent_qubits": [1, 2, 3, 4, 5],
        "layers": 5,
        "learning_rate": 0.8,
        "iterations": 200,
        "rho": {"base": "psi0", "p": 0.1, "r": 8, "a": 2.0},
        "kappa": {"base": "psi1", "p": 0.5, "r": 16, "a": 5.0, "seed": 0},
    },
    "gibbs": {
        "hamiltonian": {"ising": 3},
        "beta": 1.2,
        "truncation": 2,
        "outer_iterations": 200,
        "outer_lr": 0.2,
        "ansatz_layers": 5,
        "ancilla_qubits": 1,
        "eigen_source": "qae",
        "warm_start": True,
        "qae": {"latent_qubits": 2, "layers": 4, "learning_rate": 0.2, "iterations": 100},
    },
    "qfi": {
        "probe_qubits": 4,
        "generator": {"z_sum": 4},
        "theta": 0.1,
        "tau": 1e-2,
        "outer_iterations": 75,
        "outer_lr": 0.01,
        "ansatz_layers": 5,
        "fidelity_method": "exact",
        "fd_step": 1e-3,
        "warm_start": True,
        "qae": {"latent_qubits": 2, "layers": 4, "learning_rate": 0.1, "iterations": 200},
    },
}
DEFAULTS["fidelity-re"] = copy.deepcopy(DEFAULTS["fidelity"])

FULL_SCALE = {
    "fidelity": {"num_qubits": 8, "latent_qubits": [1, 2, 3, 4, 5, 6, 7]},
    "fidelity-re": {"num_qubits": 8, "latent_qubits": [1, 2, 3, 4, 5, 6, 7]},
}

DEFAULT_SEED = {"gibbs": 1, "qfi": 1}

AXIS_ALIASES = {"K": "latent_qubits", "N": "num_qubits", "T": "iterations", "lr": "learning_rate"}


@dataclass
class ExperimentConfig:
    protocol: str
    params: dict
    seed: int = 0
    repeat: int = 1
    output_path: str | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "seed": self.seed, "repeat": self.repeat, "params": self.params}


@dataclass
class ExperimentRecord:
    config: dict
    columns: list[tuple[str, str]]
    rows: list[list]
    summary: dict
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "config": self.config,
            "columns": [{"name": n, "type": t} for n, t in self.columns],
            "rows": self.rows,
            "summary": self.summary,
            "meta": self.meta,
        }

    def column(self, name: str) -> list:
        i = [n for n, _ in self.columns].index(name)
        return [row[i] for row in self.rows]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentRecord":
        version = str(data.get("schema_version", ""))
        if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
            raise ConfigError(f"unsupported schema version {version!r}", "schema_version")
        return cls(
            data["config"],
            [(c["name"], c["type"]) for c in data["columns"]],
            data["rows"],
            data["summary"],
            data.get("status", "ok"),
            data.get("meta", {}),
        )


def read_record(path) -> ExperimentRecord:
    with open(path) as fh:
        return ExperimentRecord.from_dict(json.load(fh))


def write_record(path, record: ExperimentRecord) -> None:
    write_json_atomic(path, record.to_dict())


def git_describe() -> str:
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


# --- config parsing -----------------------------------------------------------


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("hamiltonian", "generator"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(data: dict, *, full_scale: bool = False) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", "")
    protocol = data.get("protocol")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"must be one of {PROTOCOLS}", "protocol")
    unknown = set(data) - {"protocol", "params", "seed", "repeat", "output_path", "workers"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("must be an object", "params")
    unknown = set(params) - set(DEFAULTS[protocol])
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "params")
    merged = _merge(DEFAULTS[protocol], FULL_SCALE.get(protocol, {}) if full_scale else {})
    merged = _merge(merged, params)
    cfg = ExperimentConfig(
        protocol,
        merged,
        seed=_int(data.get("seed", DEFAULT_SEED.get(protocol, 0)), "seed"),
        repeat=_int(data.get("repeat", 1), "repeat"),
        output_path=data.get("output_path"),
        workers=_int(data.get("workers", 1), "workers"),
    )
    validate(cfg)
    return cfg


def _int(x, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        raise ConfigError(f"expected an integer, got {x!r}", path)
    return int(x)


def validate(cfg: ExperimentConfig) -> None:
    """Build every sub-config once so invariant failures surface before running."""
    if cfg.repeat < 1:
        raise ConfigError("must be >= 1", "repeat")
    if cfg.workers < 1:
        raise ConfigError("must be >= 1", "workers")
    p = cfg.params
    try:
        if cfg.protocol == "train-qae":
            _qae_config(p, p["latent_qubits"], cfg.seed)
            build_state(p["state"], p["num_qubits"], "params.state")
        elif cfg.protocol in ("fidelity", "fidelity-re"):
            for k in _as_list(p["latent_qubits"]):
                _qae_config(p, k, cfg.seed)
            build_state(p["rho"], p["num_qubits"], "params.rho")
            build_state(p["kappa"], p["num_qubits"], "params.kappa")
        elif cfg.protocol == "gibbs":
            _gibbs_config(p, cfg.seed)
        elif cfg.protocol == "qfi":
            _qfi_config(p, cfg.seed, 1)
    except ConfigError as exc:
        path = exc.path if exc.path.startswith("params") else f"params.{exc.path}" if exc.path else "params"
        raise ConfigError(exc.message, path) from None
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc), "params") from None


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _qae_config(p: dict, k: int, seed: int) -> QaeConfig:
    return QaeConfig(int(p["num_qubits"]), int(k), int(p["layers"]), float(p["learning_rate"]), int(p["iterations"]), seed)


def build_state(spec: dict, num_qubits: int, path: str = "state") -> DensityOperator:
    if not isinstance(spec, dict):
        raise ConfigError("state spec must be an object", path)
    kind = spec.get("base")
    if kind == "random":
        rank = spec.get("rank")
        return random_density_operator(num_qubits, np.random.default_rng(spec.get("seed", 0)), rank=rank)
    if kind == "psi0":
        base = psi_zero(num_qubits)
    elif kind == "psi1":
        base = psi_one(num_qubits, spec.get("seed", 0))
    else:
        raise ConfigError("base must be 'psi0', 'psi1' or 'random'", f"{path}.base")
    try:
        return noisy_state(base, float(spec["p"]), int(spec["r"]), float(spec["a"]))
    except ConfigError as exc:
        raise ConfigError(exc.message, f"{path}.{exc.path}") from None
    except KeyError as exc:
        raise ConfigError("missing field", f"{path}.{exc.args[0]}") from None


def build_hamiltonian(spec) -> PauliHamiltonian:
    if isinstance(spec, str):
        return PauliHamiltonian.loads(spec)
    if isinstance(spec, dict):
        if "ising" in spec:
            return ising_ring(int(spec["ising"]), float(spec.get("coupling", 1.0)))
        if "z_sum" in spec:
            return z_sum(int(spec.get("num_qubits", spec["z_sum"])), int(spec["z_sum"]))
        if "terms" in spec:
            return PauliHamiltonian.from_dict(spec)
    raise ConfigError("expected Pauli text, {'ising': n}, {'z_sum': J} or {'num_qubits', 'terms'}", "hamiltonian")


def _gibbs_config(p: dict, seed: int) -> GibbsConfig:
    h = build_hamiltonian(p["hamiltonian"])
    q = p["qae"]
    qae = QaeConfig(h.num_qubits, int(q["latent_qubits"]), int(q["layers"]), float(q["learning_rate"]), int(q["iterations"]), seed)
    return GibbsConfig(
        h, float(p["beta"]), int(p["truncation"]), int(p["outer_iterations"]), float(p["outer_lr"]),
        int(p["ansatz_layers"]), int(p["ancilla_qubits"]), qae, str(p["eigen_source"]), seed, bool(p["warm_start"]),
    )


def _qfi_config(p: dict, seed: int, workers: int) -> QfiConfig:
    gspec = p["generator"]
    if isinstance(gspec, dict) and "z_sum" in gspec and "num_qubits" not in gspec:
        gspec = {**gspec, "num_qubits": p["probe_qubits"]}
    try:
        g = build_hamiltonian(gspec)
    except ConfigError as exc:
        raise ConfigError(exc.message, "generator") from None
    n = int(p["probe_qubits"])
    q = p["qae"]
    qae = QaeConfig(n, int(q["latent_qubits"]), int(q["layers"]), float(q["learning_rate"]), int(q["iterations"]), seed)
    return QfiConfig(
        n, g, float(p["theta"]), float(p["tau"]), int(p["outer_iterations"]), float(p["outer_lr"]),
        int(p["ansatz_layers"]), qae, str(p["fidelity_method"]), seed, float(p["fd_step"]), bool(p["warm_start"]), workers,
    )


# --- runners ------------------------------------------------------------------


def _seeds(cfg: ExperimentConfig) -> list[int]:
    return [cfg.seed + i for i in range(cfg.repeat)]


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _run_train_qae(cfg: ExperimentConfig):
    p = cfg.params
    rho = build_state(p["state"], p["num_qubits"])
    columns = [("seed", "int"), ("iteration", "int"), ("loss", "float")]
    rows, finals = [], []
    for s in _seeds(cfg):
        model = train(rho, _qae_config(p, p["latent_qubits"], s))
        rows += [[s, i, float(x)] for i, x in enumerate(model.loss_trace)]
        finals.append(model.final_loss)
    return columns, rows, {"final_loss": finals, "converged_1e-4": sum(f < 1e-4 for f in finals)}


def _fidelity_job(job):
    protocol, p, k, s = job
    rho = build_state(p["rho"], p["num_qubits"])
    kappa = build_state(p["kappa"], p["num_qubits"])
    qc = _qae_config(p, k, s)
    if protocol == "fidelity":
        est = estimate_fidelity_qae(rho, kappa, qc)
    else:
        est = estimate_fidelity_resource_efficient(rho, kappa, qc, qc.replace(seed=s + 7919))
    lo, hi = ssfb_interval(rho, kappa)
    exact = uhlmann_fidelity(rho, kappa)
    sub_cap = bool(rho.rank() > 2**k)
    return [p["num_qubits"], k, s, est.delta, est.value, est.lower, est.upper, exact, lo, hi, sub_cap]


def _run_fidelity(cfg: ExperimentConfig):
    p = cfg.params
    columns = [
        ("N", "int"), ("K", "int"), ("seed", "int"), ("delta", "float"),
        ("QAEF", "float"), ("QAEFL", "float"), ("QAEFU", "float"), ("exact", "float"),
        ("SSFBL", "float"), ("SSFBU", "float"), ("sub_capacity", "bool"),
    ]
    jobs = [(cfg.protocol, p, int(k), s) for k in _as_list(p["latent_qubits"]) for s in _seeds(cfg)]
    rows = _map(_fidelity_job, jobs, cfg.workers)
    per_k = {}
    for row in rows:
        per_k.setdefault(row[1], []).append(row)
    summary = {
        "per_K": {
            str(k): {
                "mean_abs_error": float(np.mean([abs(r[4] - r[7]) for r in rs])),
                "mean_QAEF": float(np.mean([r[4] for r in rs])),
                "mean_QAEFL": float(np.mean([r[5] for r in rs])),
                "mean_QAEFU": float(np.mean([r[6] for r in rs])),
                "mean_delta": float(np.mean([r[3] for r in rs])),
                "band_violations": sum(not (r[5] - 1e-9 <= r[7] <= r[6] + 1e-9) for r in rs),
            }
            for k, rs in per_k.items()
        },
        "exact": rows[0][7] if rows else None,
        "SSFB": [rows[0][8], rows[0][9]] if rows else None,
    }
    return columns, rows, summary


def _run_gibbs(cfg: ExperimentConfig):
    columns = [
        ("seed", "int"), ("iteration", "int"), ("free_energy_est", "float"), ("free_energy_exact", "float"),
        ("fidelity", "float"), ("delta", "float"), ("spectral_error", "float"), ("spectral_error_bound", "float"),
        ("eigen_source", "str"), ("fallback", "bool"),
    ]
    rows, summaries = [], []
    for s in _seeds(cfg):
        gc = _gibbs_config(cfg.params, s)
        res = solve_gibbs(gc)
        for r in res.rows:
            rows.append([s, r["iteration"], r["free_energy_est"], r["free_energy_exact"], r["fidelity"], r["delta"],
                         r["spectral_error"], r["spectral_error_bound"], gc.eigen_source, r["fallback"]])
        summaries.append({"seed": s, **res.summary(gc), "epsilon1_is_surrogate": True})
    return columns, rows, {"runs": summaries}


def _run_qfi(cfg: ExperimentConfig):
    columns = [
        ("seed", "int"), ("iteration", "int"), ("qfi_surrogate", "float"), ("qfi_surrogate_exact_fidelity", "float"),
        ("qfi_exact", "float"), ("delta", "float"), ("band", "float"), ("clamped", "bool"),
    ]
    rows, summaries, status = [], [], "ok"
    for s in _seeds(cfg):
        qc = _qfi_config(cfg.params, s, cfg.workers)
        res = optimize_probe(qc)
        for r in res.rows:
            rows.append([s, r["iteration"], r["qfi_surrogate"], r["qfi_surrogate_exact_fidelity"], r["qfi_exact"],
                         r["delta"], r["band"], r["clamped"]])
        optimum = _max_eig_gap(qc.generator) ** 2
        summaries.append({"seed": s, "status": res.status, "final_qfi_exact": res.final_qfi,
                          "final_qfi_surrogate": res.rows[-1]["qfi_surrogate"], "optimal_qfi": optimum})
        if res.status != "ok":
            status = "failed"
    return columns, rows, {"runs": summaries, "status": status}


def _max_eig_gap(g: PauliHamiltonian) -> float:
    e = np.linalg.eigvalsh(g.matrix())
    return float(e[-1] - e[0])


RUNNERS = {
    "train-qae": _run_train_qae,
    "fidelity": _run_fidelity,
    "fidelity-re": _run_fidelity,
    "gibbs": _run_gibbs,
    "qfi": _run_qfi,
}


def run(cfg: ExperimentConfig, out_path=None) -> ExperimentRecord:
    """Run one experiment; write the record atomically when a path is given.

    Protocol failures produce a record with ``status = "failed"`` and the error
    in the summary, then re-raise as ``ProtocolError``.
    """
    out_path = out_path or cfg.output_path
    t0 = time.perf_counter()
    meta = {"git_describe": git_describe(), "wall_time_s": None}
    try:
        columns, rows, summary = RUNNERS[cfg.protocol](cfg)
        status = summary.pop("status", "ok") if isinstance(summary.get("status"), str) else "ok"
    except QaeKitError as exc:
        meta["wall_time_s"] = time.perf_counter() - t0
        rec = ExperimentRecord(cfg.to_dict(), [], [], {"error": type(exc).__name__, "message": str(exc)}, "failed", meta)
        if out_path:
            write_record(out_path, rec)
        raise ProtocolError(str(exc)) from exc
    meta["wall_time_s"] = time.perf_counter() - t0
    rec = ExperimentRecord(cfg.to_dict(), columns, _plain(rows), _plain(summary), status, meta)
    if out_path:
        write_record(out_path, rec)
    return rec


def _plain(x: Any):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


# --- sweeps -------------------------------------------------------------------


def resolve_axis(params: dict, axis: str) -> tuple[str, ...]:
    """Key path of a scalar field; accepts dotted paths, aliases and unique leaf names."""
    name = AXIS_ALIASES.get(axis, axis)
    if "." in name:
        path = tuple(name.split("."))
        node = params
        for key in path:
            if not isinstance(node, dict) or key not in node:
                raise ConfigError(f"unknown axis {axis!r}", "axis")
            node = node[key]
        return path
    hits = []

    def walk(node, prefix):
        for k, v in node.items():
            if k == name and not isinstance(v, dict):
                hits.append(prefix + (k,))
            elif isinstance(v, dict) and k not in ("hamiltonian", "generator"):
                walk(v, prefix + (k,))

    walk(params, ())
    if not hits:
        raise ConfigError(f"unknown axis {axis!r}", "axis")
    hits.sort(key=len)
    if len(hits) > 1 and len(hits[0]) == len(hits[1]):
        raise ConfigError(f"ambiguous axis {axis!r}: {['.'.join(h) for h in hits]}", "axis")
    return hits[0]


def _set(params: dict, path: tuple[str, ...], value) -> dict:
    out = copy.deepcopy(params)
    node = out
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return out


def _sweep_job(job):
    cfg, out = job
    try:
        return run(cfg, out).status
    except ProtocolError:
        return "failed"


def sweep(base: ExperimentConfig, axis: str, values: list, out_dir) -> list[str]:
    """One record per value in ``out_dir`` plus ``index.json`` listing them."""
    if not values:
        raise ConfigError("no values given", "values")
    path = resolve_axis(base.params, axis)
    key = ".".join(path)
    jobs = []
    for i, v in enumerate(values):
        cfg = ExperimentConfig(base.protocol, _set(base.params, path, v), base.seed, base.repeat, None, 1)
        validate(cfg)
        jobs.append((cfg, os.path.join(out_dir, f"{base.protocol}-{key}-{i:03d}.json")))
    os.makedirs(out_dir, exist_ok=True)
    statuses = _map(_sweep_job, jobs, base.workers)
    entries = [{"value": _plain(v), "path": os.path.basename(out), "status": st} for (cfg, out), v, st in zip(jobs, values, statuses)]
    write_json_atomic(os.path.join(out_dir, "index.json"),
                      {"schema_version": SCHEMA_VERSION, "protocol": base.protocol, "axis": key, "entries": entries})
    return [out for _, out in jobs]
