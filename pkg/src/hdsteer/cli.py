"""Scenario-driven command-line front end.

A scenario is a JSON file whose ``kind`` selects the operation::

    witness     evaluate the dimension witness and certify levels
    thresholds  emit the closed-form region table as CSV
    sweep       visibility sweep of the isotropic family as CSV
    map         convert assemblage <-> measurements
    weight      convex weights (steering / incompatibility / entanglement /
                the multiplicative inequality check)
    channel     Kraus-rank certificate plus witness refutation for a channel

Reports are JSON (CSV for ``thresholds``/``sweep``), printed to stdout and
optionally written to ``--out``.  Floats are rendered with 9 significant
digits so identical scenarios produce byte-identical output.

Exit codes: 0 success, 2 scenario parse error, 3 payload validation error,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import channels, quantifiers, steering, witnesses
from .qcore import (
    BipartiteState,
    DensityMatrix,
    MeasurementSet,
    ValidationError,
    matrix_from_json,
    matrix_to_json,
)

__all__ = ["main", "run", "ScenarioError", "SWEEP_HEADER"]

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SOLVER = 4

SWEEP_HEADER = "eta,witness_value,largest_certified_n,sn_lower_bound,pvm_simulable_level"


class ScenarioError(ValueError):
    """Scenario file is malformed (missing/unknown keys, bad JSON shapes)."""


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _canonical(obj):
    """Round every float to 9 significant digits for byte-stable reports."""
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def _dump_report(report: dict) -> str:
    return json.dumps(_canonical(report), indent=2, sort_keys=True) + "\n"


def _require(scenario: dict, key: str):
    if key not in scenario:
        raise ScenarioError(f"scenario is missing required key {key!r}")
    return scenario[key]


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{key} must be an integer, got {value!r}")
    return value


def _as_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_object(value, key: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(f"{key} must be an object, got {value!r}")
    return value


# --------------------------------------------------------------------------
# payload builders
# --------------------------------------------------------------------------


def _build_state(spec, tol: float | None) -> BipartiteState:
    if not isinstance(spec, dict):
        raise ScenarioError("state payload must be an object")
    if "isotropic" in spec:
        params = _as_object(spec["isotropic"], "state.isotropic")
        return steering.isotropic(_as_int(params.get("d"), "state.isotropic.d"),
                                  _as_float(params.get("eta"), "state.isotropic.eta"))
    if "max_entangled" in spec:
        params = _as_object(spec["max_entangled"], "state.max_entangled")
        return steering.max_entangled_state(_as_int(params.get("d"), "state.max_entangled.d"))
    if "matrix" in spec:
        mat = matrix_from_json(spec["matrix"])
        dim_a = _as_int(_require(spec, "dim_a"), "state.dim_a")
        dim_b = _as_int(_require(spec, "dim_b"), "state.dim_b")
        tols = {"tol_herm": tol, "tol_psd": tol, "tol_trace": tol} if tol else {}
        return BipartiteState.from_matrix(mat, dim_a, dim_b, **tols)
    raise ScenarioError("state payload needs 'isotropic', 'max_entangled', or 'matrix'")


def _build_measurements(spec, rng: np.random.Generator, tol: float | None) -> MeasurementSet:
    if spec == "mub_pair":
        raise ScenarioError("'mub_pair' needs a dimension: use {\"mub_pair\": {\"d\": ...}}")
    if not isinstance(spec, dict):
        raise ScenarioError("measurements payload must be an object")
    if "mub_pair" in spec:
        params = _as_object(spec["mub_pair"], "measurements.mub_pair")
        d = _as_int(params.get("d"), "measurements.mub_pair.d")
        base = witnesses.mub_measurements(d)
        visibility = params.get("visibility", 1.0)
        return steering.add_white_noise(base, _as_float(visibility, "visibility"))
    if "haar_pvms" in spec:
        params = _as_object(spec["haar_pvms"], "measurements.haar_pvms")
        family = steering.NoisyPvmFamily.haar(
            _as_int(params.get("d"), "measurements.haar_pvms.d"),
            _as_int(params.get("count"), "measurements.haar_pvms.count"),
            _as_float(params.get("visibility", 1.0), "visibility"),
            rng,
        )
        return family.measurement_set()
    if "inputs" in spec:
        tols = {"tol_psd": tol, "tol_completeness": tol} if tol else {}
        return MeasurementSet.from_json(spec, **tols)
    raise ScenarioError("measurements payload needs 'mub_pair', 'haar_pvms', or 'inputs'")


def _build_assemblage(scenario: dict, rng: np.random.Generator, tol: float | None) -> steering.Assemblage:
    if "assemblage" in scenario:
        tols = (
            {"tol_psd": tol, "tol_nosignaling": tol, "tol_trace": tol} if tol else {}
        )
        return steering.Assemblage.from_json(scenario["assemblage"], **tols)
    if "state" in scenario and "measurements" in scenario:
        state = _build_state(scenario["state"], tol)
        measurements = _build_measurements(scenario["measurements"], rng, tol)
        tols = {"tol_psd": tol, "tol_nosignaling": tol, "tol_trace": tol} if tol else {}
        return steering.steer(state, measurements, **tols)
    raise ScenarioError("payload needs an 'assemblage' or a 'state' plus 'measurements'")


def _build_channel(spec, tol: float | None) -> channels.KrausChannel:
    if not isinstance(spec, dict):
        raise ScenarioError("channel payload must be an object")
    if "depolarizing" in spec:
        params = _as_object(spec["depolarizing"], "channel.depolarizing")
        return channels.depolarizing(
            _as_int(params.get("d"), "channel.depolarizing.d"),
            _as_float(params.get("eta"), "channel.depolarizing.eta"),
        )
    if "kraus" in spec:
        tols = {"tol_completeness": tol} if tol else {}
        return channels.KrausChannel.from_json(spec, **tols)
    raise ScenarioError("channel payload needs 'depolarizing' or 'kraus'")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_witness(scenario: dict, rng: np.random.Generator, tol: float | None) -> dict:
    assemblage = _build_assemblage(scenario, rng, tol)
    result = witnesses.certify(assemblage)
    d = assemblage.dim
    report = result.to_json()
    report["d"] = d
    report["bounds"] = {str(n): witnesses.witness_bound(d, n) for n in range(1, d + 1)}
    return report


def cmd_thresholds(scenario: dict) -> str:
    return witnesses.region_table_csv(_as_int(_require(scenario, "d"), "d"))


def _sweep_grid(scenario: dict) -> list[float]:
    grid = _require(scenario, "eta_grid")
    if isinstance(grid, dict):
        start = _as_float(_require(grid, "start"), "eta_grid.start")
        stop = _as_float(_require(grid, "stop"), "eta_grid.stop")
        points = _as_int(_require(grid, "points"), "eta_grid.points")
        if points < 0:
            raise ScenarioError("eta_grid.points must be >= 0")
        if points == 0:
            return []
        if points == 1:
            return [start]
        return list(np.linspace(start, stop, points))
    if isinstance(grid, list):
        return [_as_float(v, "eta_grid entry") for v in grid]
    raise ScenarioError("eta_grid must be a list or {start, stop, points}")


def _sweep_row(d: int, eta: float) -> str:
    assemblage = steering.steer(steering.isotropic(d, eta), witnesses.mub_measurements(d))
    cert = witnesses.certify(assemblage)
    sn_bound = witnesses.sn_lower_bound_from_fraction(steering.isotropic(d, eta))
    pvm_level = next(
        (n for n in range(1, d + 1) if eta <= witnesses.pvm_nsim_threshold(d, n)), d
    )
    return ",".join(
        [_fmt(eta), _fmt(cert.witness_value), str(cert.not_simulable), str(sn_bound), str(pvm_level)]
    )


def cmd_sweep(scenario: dict) -> str:
    d = _as_int(_require(scenario, "d"), "d")
    grid = _sweep_grid(scenario)
    workers = _thread_cap()
    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda eta: _sweep_row(d, eta), grid))
    else:
        rows = [_sweep_row(d, eta) for eta in grid]
    return "\n".join([SWEEP_HEADER, *rows]) + "\n"


def cmd_map(scenario: dict, rng: np.random.Generator, tol: float | None) -> dict:
    if "assemblage" in scenario or ("state" in scenario and "measurements" in scenario):
        assemblage = _build_assemblage(scenario, rng, tol)
        result = steering.assemblage_to_measurements(assemblage)
        return {
            "direction": "assemblage_to_measurements",
            "measurements": result.measurements.to_json(),
            "marginal": matrix_to_json(result.marginal.matrix),
            "support_dim": result.measurements.dim,
        }
    if "measurements" in scenario and "marginal" in scenario:
        measurements = _build_measurements(scenario["measurements"], rng, tol)
        marginal = DensityMatrix(matrix_from_json(scenario["marginal"]))
        assemblage = steering.measurements_to_assemblage(measurements, marginal)
        return {
            "direction": "measurements_to_assemblage",
            "assemblage": assemblage.to_json(),
        }
    raise ScenarioError("map payload needs an assemblage, or measurements plus a marginal")


def cmd_weight(scenario: dict, rng: np.random.Generator, tol: float | None) -> dict:
    kind = _require(scenario, "weight_kind")
    if kind == "steering":
        result = quantifiers.steering_weight(_build_assemblage(scenario, rng, tol))
    elif kind == "incompatibility":
        result = quantifiers.incompatibility_weight(
            _build_measurements(_require(scenario, "measurements"), rng, tol)
        )
    elif kind == "entanglement":
        result = quantifiers.entanglement_weight_ppt(_build_state(_require(scenario, "state"), tol))
    elif kind == "inequality":
        check = quantifiers.check_weight_inequality(
            _build_measurements(_require(scenario, "measurements"), rng, tol),
            _build_state(_require(scenario, "state"), tol),
        )
        return {"weight_kind": kind, **check.to_json()}
    else:
        raise ScenarioError(f"unknown weight_kind {kind!r}")
    return {"weight_kind": kind, **result.to_json()}


def cmd_channel(scenario: dict, tol: float | None) -> dict:
    channel = _build_channel(_require(scenario, "channel"), tol)
    level = _as_int(scenario.get("n", 1), "n")
    if "sigma" in scenario:
        sigma = DensityMatrix(matrix_from_json(scenario["sigma"]))
    else:
        sigma = DensityMatrix(np.eye(channel.dim_in) / channel.dim_in)
    report: dict = {"peb_certificate": channels.peb_certificate(channel).to_json()}
    if channel.dim_in == channel.dim_out:
        report["pib_witness_check"] = channels.pib_witness_check(channel, sigma, level).to_json()
    return report


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _thread_cap() -> int:
    raw = os.environ.get("HDSTEER_THREADS")
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def _emit(text: str, out_path: str | None) -> None:
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hdsteer", description="Steering / simulability / channel certification scenarios"
    )
    parser.add_argument("--scenario", required=True, help="path to the scenario JSON file")
    parser.add_argument("--out", default=None, help="also write the report to this path")
    parser.add_argument("--seed", type=int, default=None, help="seed for sampled unitaries")
    parser.add_argument("--tol", type=float, default=None, help="payload validation tolerance")
    args = parser.parse_args(argv)

    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            scenario = json.load(fh)
        if not isinstance(scenario, dict):
            raise ScenarioError("scenario file must hold a JSON object")
        kind = _require(scenario, "kind")
        out_path = args.out if args.out is not None else scenario.get("out")
        seed = args.seed if args.seed is not None else scenario.get("seed")
        if seed is not None:
            seed = _as_int(seed, "seed")
    except (OSError, json.JSONDecodeError, ScenarioError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    rng = np.random.default_rng(seed)
    try:
        if kind == "witness":
            report = cmd_witness(scenario, rng, args.tol)
        elif kind == "thresholds":
            _emit(cmd_thresholds(scenario), out_path)
            return 0
        elif kind == "sweep":
            _emit(cmd_sweep(scenario), out_path)
            return 0
        elif kind == "map":
            report = cmd_map(scenario, rng, args.tol)
        elif kind == "weight":
            report = cmd_weight(scenario, rng, args.tol)
        elif kind == "channel":
            report = cmd_channel(scenario, args.tol)
        else:
            print(f"scenario error: unknown kind {kind!r}", file=sys.stderr)
            return EXIT_PARSE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except quantifiers.SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    report["kind"] = kind
    if seed is not None:
        report["seed"] = seed
    _emit(_dump_report(report), out_path)
    return 0


def run() -> None:  # pragma: no cover - console entry point
    sys.exit(main())
