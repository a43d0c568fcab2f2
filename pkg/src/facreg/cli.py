"""Command-line front end.

Three verbs:

* ``simulate`` -- run Monte Carlo study scenarios and emit the summary table
* ``fit``      -- fit the factor-augmented (or plain) penalty path to CSV data
* ``select-k`` -- evaluate the factor-count criterion on a CSV matrix

Configuration comes from an optional JSON file (``--config``) with
command-line flags taking precedence.  The effective merged configuration
is echoed (stderr for csv/text output, embedded for json) so a run can be
reproduced exactly from its own output.

Exit codes: 0 success, 2 config/usage error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .augmented import build_augmented_design, fit_augmented, fit_standard
from .covariance import (
    DataMatrix,
    bai_ng_select,
    default_k_max,
    eigendecompose_scaled,
    empirical_covariance,
)
from .errors import DataError, FacregError, InputError, NumericalError
from .lasso import GridSpec, cp_statistic
from .simulate import SimulationScenario, emit_table, run_study

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


@dataclass
class Dataset:
    """A numeric matrix with an optional response and column names."""

    x: np.ndarray
    y: np.ndarray | None = None
    names: list | None = None


def load_csv(path, has_header=False) -> Dataset:
    """Read a rectangular numeric CSV file.

    Raises DataError with the offending row/column on ragged rows,
    non-numeric cells, or an empty file.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: file is empty")
    names = None
    if has_header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows after the header")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}: ragged row at row {i + 1}: expected {width} fields, "
                f"got {len(row)}"
            )
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError as exc:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {i + 1}, "
                    f"column {j + 1}"
                ) from exc
    return Dataset(x=data, names=names)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"config {path}: top level must be a JSON object")
    return cfg


def _merge(cfg, args, keys):
    """Flags override config-file values; None means 'not given'."""
    merged = dict(cfg)
    for key in keys:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            merged[key] = val
    return merged


def _expect(cfg, key, types, path, default=None, required=False):
    if key not in cfg or cfg[key] is None:
        if required:
            raise InputError(f"{path}.{key}: required field is missing")
        return default
    val = cfg[key]
    if types is float and isinstance(val, int):
        val = float(val)
    if types is int and isinstance(val, bool):
        raise InputError(f"{path}.{key}: expected int, got bool")
    if not isinstance(val, types if isinstance(types, tuple) else (types,)):
        raise InputError(
            f"{path}.{key}: expected {getattr(types, '__name__', types)}, "
            f"got {type(val).__name__}"
        )
    return val


def _scenario_from_config(cfg, idx, defaults):
    path = f"scenarios[{idx}]"
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: must be an object")
    support = cfg.get("beta_support")
    if support is None:
        support = defaults.get("beta_support")
    kwargs = dict(
        n=_expect(cfg, "n", int, path, required=True),
        p=_expect(cfg, "p", int, path, required=True),
        lambda1=_expect(cfg, "lambda1", float, path, required=True),
        lambda2=_expect(cfg, "lambda2", float, path, required=True),
        alpha1=_expect(cfg, "alpha1", float, path, required=True),
        alpha2=_expect(cfg, "alpha2", float, path, required=True),
        sigma2_eps=_expect(cfg, "sigma2_eps", float, path, default=0.1),
        k_fit=_expect(cfg, "k_fit", int, path, default=2),
        reps=_expect(cfg, "reps", int, path, default=defaults.get("reps", 200)),
        base_seed=_expect(
            cfg, "base_seed", int, path, default=defaults.get("base_seed", 0)
        ),
        grid=GridSpec(
            n_points=_expect(
                cfg, "grid_points", int, path, default=defaults.get("grid_points", 100)
            ),
            ratio=_expect(
                cfg, "grid_ratio", float, path, default=defaults.get("grid_ratio", 1e-3)
            ),
        ),
    )
    if support is not None:
        if not isinstance(support, (list, tuple)):
            raise InputError(f"{path}.beta_support: expected a list of [index, value]")
        pairs = []
        for k, item in enumerate(support):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise InputError(
                    f"{path}.beta_support[{k}]: expected an [index, value] pair"
                )
            pairs.append((int(item[0]), float(item[1])))
        kwargs["beta_support"] = tuple(pairs)
    try:
        return SimulationScenario(**kwargs)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _write_output(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid_spec_from(cfg):
    return GridSpec(
        n_points=int(cfg.get("grid_points", 100)),
        ratio=float(cfg.get("grid_ratio", 1e-3)),
    )


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    cfg = _merge(cfg, args, ["seed", "workers", "format", "out"])
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "text", "json"):
        raise InputError(f"format: expected csv, text, or json, got {fmt!r}")
    raw_scenarios = cfg.get("scenarios")
    if not isinstance(raw_scenarios, list) or not raw_scenarios:
        raise InputError("scenarios: config must provide a non-empty list")
    defaults = {
        k: cfg[k]
        for k in ("reps", "grid_points", "grid_ratio", "beta_support")
        if k in cfg
    }
    if "seed" in cfg and cfg["seed"] is not None:
        defaults["base_seed"] = int(cfg["seed"])
    scenarios = [
        _scenario_from_config(sc, i, defaults) for i, sc in enumerate(raw_scenarios)
    ]
    workers = int(cfg.get("workers", 1))

    summaries = [run_study(sc, workers=workers) for sc in scenarios]
    effective = {
        "command": "simulate",
        "format": fmt,
        "workers": workers,
        "scenarios": [s.to_dict()["scenario"] for s in summaries],
    }

    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": effective,
            "summaries": [s.to_dict() for s in summaries],
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", cfg.get("out"))
    else:
        _write_output(emit_table(summaries, format=fmt), cfg.get("out"))
        print("effective config: " + json.dumps(effective, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _fit_rows(k, grid, grid_table, n_active, cp_values, alphas, betas):
    header = ["rho_internal", "rho_table", "n_active", "cp"]
    header += [f"alpha_{r + 1}" for r in range(k)]
    header += [f"beta_{j + 1}" for j in range(betas.shape[1])]
    rows = []
    for g in range(len(grid)):
        row = [
            format(grid[g], ".10g"),
            format(grid_table[g], ".10g"),
            str(int(n_active[g])),
            "" if cp_values is None else format(cp_values[g], ".10g"),
        ]
        row += [format(v, ".10g") for v in alphas[g]] if k else []
        row += [format(v, ".10g") for v in betas[g]]
        rows.append(row)
    return header, rows


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    cfg = _merge(
        cfg,
        args,
        ["x", "y", "y_col", "k", "sigma2", "center", "grid_points", "grid_ratio",
         "format", "out", "header"],
    )
    if not cfg.get("x"):
        raise InputError("x: a predictor CSV file is required")
    fmt = cfg.get("format", "json")
    if fmt not in ("csv", "json"):
        raise InputError(f"format: expected csv or json, got {fmt!r}")
    has_header = bool(cfg.get("header", False))
    dataset = load_csv(cfg["x"], has_header=has_header)
    x = dataset.x

    y_col = cfg.get("y_col")
    if cfg.get("y"):
        y = load_csv(cfg["y"], has_header=has_header).x
        if y.shape[1] != 1:
            raise DataError(f"{cfg['y']}: response file must have one column")
        y = y[:, 0]
    elif y_col is not None:
        if dataset.names and str(y_col) in dataset.names:
            j = dataset.names.index(str(y_col))
        else:
            try:
                j = int(y_col)
            except (TypeError, ValueError):
                raise InputError(f"y_col: unknown column {y_col!r}")
            if not (0 <= j < x.shape[1]):
                raise InputError(f"y_col: index {j} out of range")
        y = x[:, j]
        x = np.delete(x, j, axis=1)
    else:
        raise InputError("y: a response (separate file or --y-col) is required")
    if y.shape[0] != x.shape[0]:
        raise DataError(
            f"response length {y.shape[0]} does not match {x.shape[0]} rows of X"
        )

    data = DataMatrix.from_array(x, center=bool(cfg.get("center", False)))
    grid_spec = _grid_spec_from(cfg)
    k_req = cfg.get("k", "auto")

    spectrum = eigendecompose_scaled(empirical_covariance(data))
    if isinstance(k_req, str) and k_req == "auto":
        k, _ = bai_ng_select(data, spectrum, default_k_max(data.n, data.p))
        k_source = "auto"
    else:
        try:
            k = int(k_req)
        except (TypeError, ValueError):
            raise InputError(f"k: expected 'auto' or an integer, got {k_req!r}")
        if k < 0:
            raise InputError(f"k: must be >= 0, got {k}")
        k_source = "explicit"

    if k == 0:
        fit = fit_standard(data, y, grid_spec)
        path = fit.path
        alphas = np.zeros((path.grid.size, 0))
        betas = fit.betas
    else:
        design = build_augmented_design(data, k, spectrum=spectrum)
        fit = fit_augmented(design, y, grid_spec)
        path = fit.path
        alphas = np.stack([e.alpha for e in fit.estimates])
        betas = np.stack([e.beta for e in fit.estimates])

    sigma2 = cfg.get("sigma2")
    sigma2_source = "user"
    if sigma2 is None:
        # Heuristic fallback: residual variance of the least-penalized fit.
        sigma2 = float(path.rss[-1] / data.n)
        sigma2_source = "heuristic-least-penalized"
    cp_values = None
    if sigma2 > 0:
        cp_values = cp_statistic(path, y, float(sigma2)).cp_values

    lam = spectrum.leading_values(k) if k else np.zeros(0)
    shares = spectrum.explained_shares()[:k] if k else np.zeros(0)
    effective = {
        "command": "fit",
        "x": cfg["x"],
        "y": cfg.get("y"),
        "y_col": y_col,
        "k": k,
        "k_source": k_source,
        "center": bool(cfg.get("center", False)),
        "grid_points": grid_spec.n_points,
        "grid_ratio": grid_spec.ratio,
        "sigma2": float(sigma2),
        "sigma2_source": sigma2_source,
        "format": fmt,
    }

    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": effective,
            "k": k,
            "eigenvalues": [float(v) for v in lam],
            "explained_shares": [float(v) for v in shares],
            "rho_internal": [float(v) for v in path.grid],
            "rho_table": [float(v) for v in path.grid_table_scale],
            "n_active": [int(v) for v in path.n_active],
            "cp": None if cp_values is None else [float(v) for v in cp_values],
            "alpha": alphas.tolist(),
            "beta": betas.tolist(),
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", cfg.get("out"))
    else:
        header, rows = _fit_rows(
            k, path.grid, path.grid_table_scale, path.n_active, cp_values, alphas, betas
        )
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        _write_output(buf.getvalue(), cfg.get("out"))
        print("effective config: " + json.dumps(effective, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def cmd_select_k(args) -> int:
    cfg = _load_config(args.config)
    cfg = _merge(cfg, args, ["x", "k_max", "center", "format", "out", "header"])
    if not cfg.get("x"):
        raise InputError("x: a predictor CSV file is required")
    fmt = cfg.get("format", "text")
    if fmt not in ("text", "json", "csv"):
        raise InputError(f"format: expected text, json, or csv, got {fmt!r}")
    dataset = load_csv(cfg["x"], has_header=bool(cfg.get("header", False)))
    data = DataMatrix.from_array(dataset.x, center=bool(cfg.get("center", False)))
    k_max = cfg.get("k_max")
    k_max = default_k_max(data.n, data.p) if k_max is None else int(k_max)

    spectrum = eigendecompose_scaled(empirical_covariance(data))
    k_hat, values = bai_ng_select(data, spectrum, k_max)

    effective = {"command": "select-k", "x": cfg["x"], "k_max": k_max, "format": fmt,
                 "center": bool(cfg.get("center", False))}
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": effective,
            "k_hat": int(k_hat),
            "kappa": list(range(1, k_max + 1)),
            "criterion": [float(v) for v in values],
            "eigenvalues": [float(v) for v in spectrum.leading_values(k_max)],
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", cfg.get("out"))
    else:
        lines = ["kappa,criterion" if fmt == "csv" else "kappa  criterion"]
        sep = "," if fmt == "csv" else "  "
        for kappa, v in enumerate(values, start=1):
            lines.append(f"{kappa}{sep}{format(v, '.10g')}")
        if fmt == "text":
            lines.append(f"selected k = {k_hat}")
        _write_output("\n".join(lines) + "\n", cfg.get("out"))
        if fmt == "csv":
            print(f"selected k = {k_hat}", file=sys.stderr)
        print("effective config: " + json.dumps(effective, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="facreg",
        description="Factor-augmented sparse regression: simulate, fit, select-k.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--format", help="output format")
        sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("simulate", help="run Monte Carlo study scenarios")
    common(sp)
    sp.add_argument("--seed", type=int, help="base seed applied to all scenarios")
    sp.add_argument("--workers", type=int, help="parallel replication workers")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit the penalty path to CSV data")
    common(sp)
    sp.add_argument("--x", help="predictor matrix CSV")
    sp.add_argument("--y", help="response CSV (single column)")
    sp.add_argument("--y-col", help="response column (name or 0-based index) in the X file")
    sp.add_argument("--k", help="factor count: 'auto', 0 (plain Lasso), or a positive integer")
    sp.add_argument("--sigma2", type=float, help="error variance for the Cp column")
    sp.add_argument("--center", action="store_const", const=True, default=None,
                    help="subtract column means before fitting")
    sp.add_argument("--header", action="store_const", const=True, default=None,
                    help="first CSV row holds column names")
    sp.add_argument("--grid-points", type=int, help="penalty grid size (default 100)")
    sp.add_argument("--grid-ratio", type=float, help="grid floor ratio (default 1e-3)")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select-k", help="factor-count criterion on a CSV matrix")
    common(sp)
    sp.add_argument("--x", help="predictor matrix CSV")
    sp.add_argument("--k-max", type=int, help="largest factor count to consider")
    sp.add_argument("--center", action="store_const", const=True, default=None)
    sp.add_argument("--header", action="store_const", const=True, default=None)
    sp.set_defaults(func=cmd_select_k)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        hint = ""
        if "reduce k" in str(exc) or "zero variance" in str(exc):
            hint = " (try a smaller k)"
        print(f"numerical failure: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FacregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
