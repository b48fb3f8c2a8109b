"""Command-line surface: config parsing, filter runs, reports, CSV export.

Configs are YAML with row-major numeric arrays. A run report is one JSON
document on stdout carrying both trajectories (quantum and classical),
the normalization ledger, inversion metadata, operation counts, and
sampling statistics in sampled mode. Every error category exits with its
own documented code (see EXIT_CODES).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np
import yaml

from .block_encoding import decode, encode_data_structure, pad_to_square
from .errors import (
    ApproximationError,
    ConfigError,
    DegenerateInputError,
    DimensionError,
    MeasurementBudgetError,
    NumericalFailureError,
    ParityError,
    QkError,
    SigmaRangeError,
    SingularityError,
    SolverError,
)
from .inversion import (
    be_invert,
    format_angles,
    inverse_poly,
    solve_phase_factors,
)
from .kalman import (
    FilterState,
    KalmanModel,
    KappaPolicy,
    classical_step,
    q_filter_run,
)
from .tensor_ops import op_stats

EXIT_CODES = {
    "ok": 0,
    "unexpected": 1,
    ConfigError: 2,
    DimensionError: 3,
    DegenerateInputError: 4,
    SingularityError: 5,
    SigmaRangeError: 6,
    SolverError: 7,
    ApproximationError: 8,
    NumericalFailureError: 9,
    MeasurementBudgetError: 10,
    ParityError: 11,
}

_MATRIX_KEYS = ("A", "B", "H", "Q", "R", "P0")
_REQUIRED_KEYS = ("A", "B", "H", "Q", "R", "x0", "P0",
                  "controls", "measurements", "steps")
_OPTIONAL_KEYS = ("readout_mode", "shots", "iterations", "seed",
                  "kappa", "kappa_margin", "eps_prime", "degree_cap")


@dataclass
class RunConfig:
    """Validated model + run parameters; kappa=None means margin policy."""

    A: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray
    P0: np.ndarray
    controls: list
    measurements: list
    steps: int
    readout_mode: str = "exact"
    shots: int = 16384
    iterations: int = 100
    seed: int = 0
    kappa: float | None = None
    kappa_margin: float = 1.1
    eps_prime: float = 0.01
    degree_cap: int = 501

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(np.asarray(a), np.asarray(b)):
                    return False
            elif isinstance(a, (list, tuple)):
                if not isinstance(b, (list, tuple)) or len(a) != len(b):
                    return False
                if any(not np.array_equal(np.asarray(x), np.asarray(y))
                       for x, y in zip(a, b)):
                    return False
            elif a != b:
                return False
        return True

    @property
    def model(self) -> KalmanModel:
        return KalmanModel(self.A, self.B, self.H, self.Q, self.R)

    @property
    def init(self) -> FilterState:
        return FilterState(self.x0, self.P0, 0)

    @property
    def kappa_policy(self) -> KappaPolicy:
        if self.kappa is not None:
            return KappaPolicy.fixed(self.kappa)
        return KappaPolicy.margin(self.kappa_margin)


def _as_matrix_field(value, path: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric array ({exc})") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ConfigError(f"{path}: expected a 2-D array, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: entries must be finite")
    return arr


def _as_vector_field(value, path: str) -> np.ndarray:
    try:
        arr = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric vector ({exc})") from None
    if arr.ndim != 1:
        raise ConfigError(f"{path}: expected a flat vector, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: entries must be finite")
    return arr


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def parse_config(text: str) -> RunConfig:
    """Validate a YAML config document into a RunConfig.

    Unknown keys are rejected with their location; every error message
    names the offending field.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping at the top level")
    for key in doc:
        if key not in _REQUIRED_KEYS + _OPTIONAL_KEYS:
            raise ConfigError(f"unknown key {key!r} at top level")
    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")

    kwargs = {}
    for key in _MATRIX_KEYS:
        kwargs[key] = _as_matrix_field(doc[key], key)
    kwargs["x0"] = _as_vector_field(doc["x0"], "x0")
    for name in ("controls", "measurements"):
        seq = doc[name]
        if not isinstance(seq, list):
            raise ConfigError(f"{name}: expected a list of vectors")
        kwargs[name] = [_as_vector_field(v, f"{name}[{i}]")
                        for i, v in enumerate(seq)]
    kwargs["steps"] = _as_int(doc["steps"], "steps", minimum=0)

    if "readout_mode" in doc:
        mode = doc["readout_mode"]
        if mode not in ("exact", "sampled"):
            raise ConfigError(
                f"readout_mode: must be 'exact' or 'sampled', got {mode!r}")
        kwargs["readout_mode"] = mode
    if "shots" in doc:
        kwargs["shots"] = _as_int(doc["shots"], "shots", minimum=1)
    if "iterations" in doc:
        kwargs["iterations"] = _as_int(doc["iterations"], "iterations", minimum=1)
    if "seed" in doc:
        kwargs["seed"] = _as_int(doc["seed"], "seed")
    else:
        env = os.environ.get("QKALMAN_SEED")
        if env is not None:
            try:
                kwargs["seed"] = int(env)
            except ValueError:
                raise ConfigError(
                    f"QKALMAN_SEED: expected an integer, got {env!r}") from None
    if "kappa" in doc and doc["kappa"] is not None:
        kappa = _as_float(doc["kappa"], "kappa")
        if not kappa > 1:
            raise ConfigError(f"kappa: must exceed 1, got {kappa}")
        kwargs["kappa"] = kappa
    if "kappa_margin" in doc:
        margin = _as_float(doc["kappa_margin"], "kappa_margin")
        if not margin >= 1:
            raise ConfigError(f"kappa_margin: must be >= 1, got {margin}")
        kwargs["kappa_margin"] = margin
    if "eps_prime" in doc:
        eps = _as_float(doc["eps_prime"], "eps_prime")
        if not 0 < eps < 1:
            raise ConfigError(f"eps_prime: must lie in (0,1), got {eps}")
        kwargs["eps_prime"] = eps
    if "degree_cap" in doc:
        kwargs["degree_cap"] = _as_int(doc["degree_cap"], "degree_cap", minimum=1)

    config = RunConfig(**kwargs)
    model = config.model  # dimension validation with field-named errors
    n = model.state_dim
    if config.x0.size != n:
        raise DimensionError(f"x0 has {config.x0.size} entries, A is {n}x{n}")
    if config.P0.shape != (n, n):
        raise DimensionError(f"P0 must be {n}x{n}, got {config.P0.shape}")
    return config


def emit_config(config: RunConfig) -> str:
    """YAML text that parses back to an equal RunConfig."""
    doc = {
        "A": config.A.tolist(),
        "B": config.B.tolist(),
        "H": config.H.tolist(),
        "Q": config.Q.tolist(),
        "R": config.R.tolist(),
        "x0": config.x0.tolist(),
        "P0": config.P0.tolist(),
        "controls": [np.asarray(u).tolist() for u in config.controls],
        "measurements": [np.asarray(z).tolist() for z in config.measurements],
        "steps": config.steps,
        "readout_mode": config.readout_mode,
        "shots": config.shots,
        "iterations": config.iterations,
        "seed": config.seed,
        "kappa_margin": config.kappa_margin,
        "eps_prime": config.eps_prime,
        "degree_cap": config.degree_cap,
    }
    if config.kappa is not None:
        doc["kappa"] = config.kappa
    return yaml.safe_dump(doc, sort_keys=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def run_report(config: RunConfig) -> dict:
    """Execute the quantum filter and the classical oracle, build the report."""
    model = config.model
    init = config.init
    trajectory, ledger = q_filter_run(
        model, init, config.controls, config.measurements, config.steps,
        config.readout_mode, shots=config.shots, iterations=config.iterations,
        seed=config.seed, kappa_policy=config.kappa_policy,
        eps_prime=config.eps_prime, degree_cap=config.degree_cap)

    classical = [init]
    for j in range(config.steps):
        classical.append(classical_step(
            model, classical[-1], config.controls[j], config.measurements[j]))

    steps_out = []
    for q, c in zip(trajectory, classical):
        steps_out.append({
            "step": q.k,
            "x_hat_q": q.x_hat, "x_hat_c": c.x_hat,
            "P_q_diag": np.diag(q.P), "P_c_diag": np.diag(c.P),
            "P_q": q.P, "P_c": c.P,
        })
    report = {
        "config": yaml.safe_load(emit_config(config)),
        "readout_mode": config.readout_mode,
        "steps": steps_out,
        "ledger": ledger.rows(),
        "qsvt": ledger.qsvt_info,
        "op_counts": ledger.op_info,
    }
    if config.readout_mode == "sampled":
        report["sampling"] = ledger.sampling_info
    return _jsonable(report)


def emit_csv(report: dict, kind: str, path: str | None = None) -> str:
    """Render one report facet as headered CSV; optionally write it."""
    if kind == "trajectory":
        n = len(report["steps"][0]["x_hat_q"])
        cols = (["step"]
                + [f"x_hat_q[{i}]" for i in range(n)]
                + [f"x_hat_c[{i}]" for i in range(n)]
                + [f"P_q_diag[{i}]" for i in range(n)]
                + [f"P_c_diag[{i}]" for i in range(n)])
        lines = [",".join(cols)]
        for row in report["steps"]:
            vals = ([row["step"]] + list(row["x_hat_q"]) + list(row["x_hat_c"])
                    + list(row["P_q_diag"]) + list(row["P_c_diag"]))
            lines.append(",".join(_fmt(v) for v in vals))
    elif kind == "ledger":
        lines = ["step,label,alpha,ancillas,eps"]
        for step, label, alpha, ancillas, eps in report["ledger"]:
            lines.append(f"{step},{label},{_fmt(alpha)},{ancillas},{_fmt(eps)}")
    elif kind == "histogram":
        sampling = report.get("sampling")
        if not sampling:
            raise ConfigError("histogram export needs a sampled-mode report")
        last = sampling[max(sampling, key=int)]
        counts = last["x_hat"]["counts_nonzero"]
        lines = ["basis_index,count"]
        for idx in sorted(counts, key=int):
            lines.append(f"{idx},{counts[idx]}")
    else:
        raise ConfigError(f"unknown CSV kind {kind!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _load_matrix_file(path: str, paired_complex: bool) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: not a numeric CSV matrix ({exc})") from None
    if paired_complex:
        if arr.shape[1] % 2 != 0:
            raise ConfigError(
                f"{path}: paired-column complex input needs an even column "
                f"count, got {arr.shape[1]}")
        arr = arr[:, 0::2] + 1j * arr[:, 1::2]
    return arr


def _encode_padded(mat: np.ndarray):
    s = max(1, math.ceil(math.log2(max(mat.shape))))
    return encode_data_structure(pad_to_square(mat, s), shape=mat.shape)


def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    config = parse_config(text)
    report = run_report(config)
    if args.csv_dir:
        os.makedirs(args.csv_dir, exist_ok=True)
        emit_csv(report, "trajectory", os.path.join(args.csv_dir, "trajectory.csv"))
        emit_csv(report, "ledger", os.path.join(args.csv_dir, "ledger.csv"))
        if report.get("sampling"):
            emit_csv(report, "histogram",
                     os.path.join(args.csv_dir, "histogram.csv"))
    json.dump(report, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_encode(args) -> int:
    mat = _load_matrix_file(args.matrix, args.complex)
    be = _encode_padded(mat)
    block = decode(be)
    out = {
        "alpha": be.alpha,
        "ancillas": be.ancillas,
        "system_qubits": be.system_qubits,
        "eps": be.eps,
        "shape": list(mat.shape),
        "op_counts": op_stats(be.op),
        "decoded_block_re": block.real,
        "decoded_block_im": block.imag,
    }
    json.dump(_jsonable(out), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_invert(args) -> int:
    mat = _load_matrix_file(args.matrix, args.complex)
    if mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"inversion needs a square matrix, got {mat.shape}")
    be = _encode_padded(mat)
    inv = be_invert(be, args.kappa, args.eps, degree_cap=args.degree_cap)
    block = decode(inv)
    out = {
        "kappa": args.kappa,
        "eps_prime": args.eps,
        "alpha": inv.alpha,
        "ancillas": inv.ancillas,
        "eps": inv.eps,
        "op_counts": op_stats(inv.op),
        "inverse_re": block.real,
        "inverse_im": block.imag,
    }
    json.dump(_jsonable(out), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_angles(args) -> int:
    poly = inverse_poly(args.kappa, args.eps, args.degree_cap)
    phi = solve_phase_factors(poly)
    text = format_angles(phi)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(
        f"degree {poly.degree}  scale {poly.scale:.8f}  "
        f"residual {phi.residual:.3g}\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkalman",
        description="Block-encoded Kalman filtering on a statevector simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a filter config and print the report")
    p_run.add_argument("config", help="YAML config path")
    p_run.add_argument("--csv-dir", help="also write trajectory/ledger/histogram CSVs")
    p_run.set_defaults(fn=_cmd_run)

    p_enc = sub.add_parser("encode", help="block-encode a CSV matrix")
    p_enc.add_argument("matrix", help="CSV matrix path")
    p_enc.add_argument("--complex", action="store_true",
                       help="treat columns as re,im pairs")
    p_enc.set_defaults(fn=_cmd_encode)

    p_inv = sub.add_parser("invert", help="invert a CSV matrix via the transform")
    p_inv.add_argument("matrix", help="CSV matrix path")
    p_inv.add_argument("--kappa", type=float, required=True)
    p_inv.add_argument("--eps", type=float, required=True)
    p_inv.add_argument("--degree-cap", type=int, default=501)
    p_inv.add_argument("--complex", action="store_true",
                       help="treat columns as re,im pairs")
    p_inv.set_defaults(fn=_cmd_invert)

    p_ang = sub.add_parser("angles", help="emit inversion phase factors")
    p_ang.add_argument("--kappa", type=float, required=True)
    p_ang.add_argument("--eps", type=float, required=True)
    p_ang.add_argument("--degree-cap", type=int, default=501)
    p_ang.add_argument("--out", help="write angles here instead of stdout")
    p_ang.set_defaults(fn=_cmd_angles)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except QkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
