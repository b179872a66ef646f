"""Batch command line: ingest CSVs, run forecasts, compare reports.

Four subcommands: ``ingest`` fuses provenance-tagged CSVs into one canonical
panel, ``synth`` draws a synthetic panel, ``run`` executes one forecasting
method end to end, and ``compare`` turns metric reports into an improvement
rate table. Run outputs embed the effective configuration so any file can be
reproduced from its own preamble; nothing here depends on wall-clock time.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .baselines import ar_fit, ar_forecast, naive_forecast, univariate_lag_features
from .evaluation import evaluate, format_report, improvement_rate, parse_report
from .numerics import NumericalError
from .panel import (
    FeaturePanel,
    atomic_write_text,
    fuse,
    read_panel_csv,
    read_tags_csv,
    train_test_split,
    write_panel_csv,
    write_tags_csv,
)
from .pipeline import PipelineConfig, granger_filter, pipeline_fit, pipeline_predict
from .regressors import elm_fit, elm_predict, kelm_fit, kelm_predict
from .synth import SynthSpec, synth_generate

METHODS = (
    "naive",
    "ar",
    "elm",
    "kelm",
    "kpca+elm",
    "kpca+kelm",
    "kmeans+kpca+elm",
    "kmeans+kpca+kelm",
)


class CliError(Exception):
    """Input or configuration problem; reported on stderr, exit code 1."""


def _opt(parser):
    def parse(text: str):
        text = text.strip()
        return None if text == "" else parser(text)

    return parse


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# key -> (parser, default); declaration order is the echo order
CONFIG_KEYS = {
    "panel": (str, ""),
    "tags": (str, ""),
    "synth_seed": (_opt(int), None),
    "synth_months": (int, 180),
    "synth_factors": (int, 3),
    "synth_series_per_factor": (int, 10),
    "synth_noise": (float, 0.05),
    "synth_target_noise": (float, 0.5),
    "synth_lag": (int, 1),
    "synth_start": (str, "2004-01"),
    "split": (str, ""),
    "mode": (str, "H"),
    "method": (str, "kmeans+kpca+kelm"),
    "label": (str, ""),
    "k": (_opt(int), None),
    "k_lo": (int, 1),
    "k_hi": (int, 8),
    "n_components": (_opt(int), None),
    "theta": (_opt(float), 0.95),
    "sigma": (_opt(float), None),
    "c": (float, 100.0),
    "n_hidden": (int, 100),
    "lag": (int, 1),
    "granger": (_bool, False),
    "max_lag": (int, 3),
    "p_threshold": (float, 0.1),
    "ar_d": (int, 1),
    "ar_max_p": (int, 12),
    "ar_criterion": (str, "aic"),
    "uni_lags": (int, 12),
    "seed": (int, 0),
}


def _set_key(config: dict, key: str, raw: str, origin: str) -> None:
    if key not in CONFIG_KEYS:
        raise CliError(f"{origin}: unknown config key {key!r}")
    parser, _ = CONFIG_KEYS[key]
    try:
        config[key] = parser(raw)
    except ValueError as err:
        raise CliError(f"{origin}: bad value for {key!r}: {err}") from None


def load_config(path: str | None, overrides: list[str]) -> dict:
    """Defaults, then the flat key = value file, then --set overrides."""
    config = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as err:
            raise CliError(f"cannot read config {path}: {err}") from None
        for lineno, line in enumerate(lines, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise CliError(f"{path}: line {lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            _set_key(config, key.strip(), raw.strip(), f"{path}: line {lineno}")
    for item in overrides:
        if "=" not in item:
            raise CliError(f"--set {item!r}: expected key=value")
        key, _, raw = item.partition("=")
        _set_key(config, key.strip(), raw.strip(), f"--set {key.strip()}")
    return config


def _echo_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_echo_string(config: dict, extras: dict) -> str:
    parts = [f"{key}={_echo_value(config[key])}" for key in CONFIG_KEYS]
    parts.extend(f"{key}={_echo_value(value)}" for key, value in extras.items())
    return ";".join(parts)


def _config_preamble(config: dict, extras: dict) -> str:
    # stripping the '# ' prefix from the predictions file yields a valid
    # config file again; derived values are kept behind a second '#'
    lines = [f"{key} = {_echo_value(config[key])}" for key in CONFIG_KEYS]
    lines.extend(f"# {key} = {_echo_value(value)}" for key, value in extras.items())
    return "\n".join(lines)


def _load_run_panel(config: dict) -> FeaturePanel:
    if config["panel"]:
        try:
            panel = read_panel_csv(config["panel"])
        except OSError as err:
            raise CliError(str(err)) from None
        tags_path = config["tags"] or f"{os.path.splitext(config['panel'])[0]}.tags.csv"
        try:
            tags = read_tags_csv(tags_path)
        except OSError as err:
            raise CliError(str(err)) from None
        untagged = [name for name in panel.columns if name not in tags]
        if untagged:
            raise CliError(f"{tags_path}: no tag for columns {untagged}")
        return FeaturePanel(dates=panel.dates, columns=panel.columns, tags=tags)
    if config["synth_seed"] is not None:
        spec = SynthSpec(
            seed=config["synth_seed"],
            months=config["synth_months"],
            factors=config["synth_factors"],
            series_per_factor=config["synth_series_per_factor"],
            noise=config["synth_noise"],
            target_noise=config["synth_target_noise"],
            lag=config["synth_lag"],
            start=config["synth_start"],
        )
        panel, _, _ = synth_generate(spec)
        return panel
    raise CliError("config needs either panel = <csv> or synth_seed = <int>")


def _univariate_rolling(model, predict_fn, y_norm: np.ndarray, n_train: int, lags: int) -> np.ndarray:
    rows = np.stack(
        [y_norm[t - lags : t][::-1] for t in range(n_train, y_norm.size)]
    )
    return predict_fn(model, rows)


def _run_forecast(config: dict, panel: FeaturePanel, n_train: int) -> tuple[np.ndarray, dict]:
    """Forecast the test rows; returns raw-scale values plus echo extras."""
    method = config["method"]
    target = panel.target_name
    y = panel.columns[target]
    y_train = y[:n_train]
    n_test = panel.n_rows - n_train
    extras: dict = {}

    if method == "naive":
        return naive_forecast(y_train, n_test), extras
    if method == "ar":
        model = ar_fit(
            y_train,
            max_p=config["ar_max_p"],
            d=config["ar_d"],
            criterion=config["ar_criterion"],
        )
        extras["ar_p_selected"] = model.p
        return ar_forecast(model, y_train, n_test), extras
    if method in ("elm", "kelm"):
        lags = config["uni_lags"]
        if n_train <= lags + 1:
            raise CliError(f"uni_lags={lags} needs more than {lags + 1} training rows")
        mu, sd = float(y_train.mean()), float(y_train.std())
        if sd == 0.0:
            raise CliError("target is constant over the training window")
        y_norm = (y - mu) / sd
        x_tr, z_tr = univariate_lag_features(y_norm[:n_train], lags=lags)
        if method == "kelm":
            model = kelm_fit(x_tr, z_tr, c=config["c"], sigma=config["sigma"])
            z_hat = _univariate_rolling(model, kelm_predict, y_norm, n_train, lags)
        else:
            model = elm_fit(
                x_tr, z_tr, n_hidden=config["n_hidden"], c=config["c"], seed=config["seed"]
            )
            z_hat = _univariate_rolling(model, elm_predict, y_norm, n_train, lags)
        return z_hat * sd + mu, extras

    # multivariate pipeline variants
    clustered = method.startswith("kmeans+")
    pipeline_config = PipelineConfig(
        k=(config["k"] if clustered else 1),
        k_range=(config["k_lo"], config["k_hi"]),
        n_components=config["n_components"],
        theta=(None if config["n_components"] is not None else config["theta"]),
        sigma=config["sigma"],
        c=config["c"],
        regressor=("elm" if method.endswith("+elm") else "kelm"),
        n_hidden=config["n_hidden"],
        lag=config["lag"],
        seed=config["seed"],
    )
    names = panel.indicator_names(config["mode"])
    if not names:
        raise CliError(f"no indicator columns for mode {config['mode']}")
    train = panel.row_slice(range(n_train))
    if config["granger"]:
        result = granger_filter(
            train, names, max_lag=config["max_lag"], p_threshold=config["p_threshold"]
        )
        extras["granger_retained"] = "|".join(result.retained)
        if result.inconclusive:
            extras["granger_inconclusive"] = "|".join(result.inconclusive)
        if not result.retained:
            raise CliError("granger filter retained no indicator columns")
        names = result.retained
    view = panel.select(list(names) + [panel.target_name])
    model = pipeline_fit(view.row_slice(range(n_train)), pipeline_config)
    extras["k_selected"] = model.cluster.k
    lag = pipeline_config.lag
    origins = view.row_slice(range(n_train - lag, view.n_rows - lag))
    return pipeline_predict(model, origins), extras


def cmd_run(args) -> int:
    config = load_config(args.config, args.set or [])
    if config["method"] not in METHODS:
        raise CliError(f"unknown method {config['method']!r}; expected one of {METHODS}")
    if config["mode"] not in ("E", "G", "H"):
        raise CliError(f"unknown mode {config['mode']!r}; expected E, G or H")
    if not config["split"]:
        raise CliError("config needs split = YYYY-MM (last training month)")

    panel = _load_run_panel(config)
    if panel.target_name is None:
        raise CliError("panel has no target column")
    train, test = train_test_split(panel, config["split"])
    if test.n_rows < 2:
        raise CliError(f"split leaves {test.n_rows} test rows; need at least 2")
    n_train = train.n_rows

    forecast_raw, extras = _run_forecast(config, panel, n_train)
    actual = test.columns[panel.target_name]
    mu = float(train.columns[panel.target_name].mean())
    sd = float(train.columns[panel.target_name].std())
    if sd == 0.0:
        raise CliError("target is constant over the training window")
    forecast_norm = (forecast_raw - mu) / sd

    label = config["label"] or f"{config['method']}:{config['mode']}"
    extras = {"test_start": test.dates[0], "test_end": test.dates[-1], **extras}
    echo = config_echo_string(config, extras)
    report = evaluate(actual, forecast_raw, label=label, config_echo=echo)

    os.makedirs(args.out_dir, exist_ok=True)
    lines = [f"# {ln}" for ln in _config_preamble(config, extras).splitlines()]
    lines.append("date,actual,forecast_raw,forecast_normalized")
    for date, a, fr, fn in zip(test.dates, actual, forecast_raw, forecast_norm):
        lines.append(f"{date},{float(a)!r},{float(fr)!r},{float(fn)!r}")
    atomic_write_text(
        os.path.join(args.out_dir, "predictions.csv"), "\n".join(lines) + "\n"
    )
    atomic_write_text(os.path.join(args.out_dir, "metrics.txt"), format_report(report))
    print(
        f"{label}: n={report.n} mape={report.mape_pct:.4f}% rmse={report.rmse:.6f} "
        f"mae={report.mae:.6f} da={report.da_pct:.4f}%"
    )
    return 0


def _read_fragment(path: str, tag: str) -> FeaturePanel:
    try:
        fragment = read_panel_csv(path)
    except OSError as err:
        raise CliError(str(err)) from None
    if tag == "target" and len(fragment.columns) != 1:
        raise CliError(
            f"{path}: target file must hold exactly one column, "
            f"got {list(fragment.columns)}"
        )
    tags = {name: tag for name in fragment.columns}
    return FeaturePanel(dates=fragment.dates, columns=fragment.columns, tags=tags)


def cmd_ingest(args) -> int:
    fragments = []
    sources = []
    for path in args.economic or []:
        fragments.append(_read_fragment(path, "economic"))
        sources.append((path, fragments[-1]))
    for path in args.gsvi or []:
        fragments.append(_read_fragment(path, "gsvi"))
        sources.append((path, fragments[-1]))
    target_fragment = _read_fragment(args.target, "target")
    fragments.append(target_fragment)
    sources.append((args.target, target_fragment))
    if len(fragments) < 2:
        raise CliError("ingest needs a target plus at least one indicator file")

    panel = fuse(fragments)
    write_panel_csv(panel, f"{args.out}.csv")
    write_tags_csv(panel.tags, f"{args.out}.tags.csv")
    for path, fragment in sources:
        dropped = fragment.n_rows - panel.n_rows
        print(f"{path}: {fragment.n_rows} rows, {len(fragment.columns)} columns, {dropped} dropped")
    print(
        f"panel: {panel.n_rows} rows x {len(panel.columns)} columns "
        f"({panel.dates[0]}..{panel.dates[-1]}) -> {args.out}.csv"
    )
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        seed=args.seed,
        months=args.months,
        factors=args.factors,
        series_per_factor=args.series_per_factor,
        noise=args.noise,
        target_noise=args.target_noise,
        lag=args.lag,
        start=args.start,
    )
    panel, _, labels = synth_generate(spec)
    write_panel_csv(panel, f"{args.out}.csv")
    write_tags_csv(panel.tags, f"{args.out}.tags.csv")
    names = panel.indicator_names("H")
    label_lines = ["name,factor"] + [f"{n},{f}" for n, f in zip(names, labels)]
    atomic_write_text(f"{args.out}.labels.csv", "\n".join(label_lines) + "\n")
    print(
        f"panel: {panel.n_rows} rows x {len(panel.columns)} columns "
        f"({panel.dates[0]}..{panel.dates[-1]}) -> {args.out}.csv"
    )
    return 0


def _echo_fields(report) -> dict:
    fields = {}
    for part in report.config_echo.split(";"):
        if "=" in part:
            key, _, value = part.partition("=")
            fields[key] = value
    return fields


def cmd_compare(args) -> int:
    if len(args.reports) < 2:
        raise CliError("compare needs at least two report files")
    if len(args.reports) % 2 != 0:
        raise CliError("compare pairs consecutive reports; give an even count")
    reports = []
    for path in args.reports:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                reports.append(parse_report(fh.read()))
        except OSError as err:
            raise CliError(str(err)) from None
        except ValueError as err:
            raise CliError(f"{path}: {err}") from None

    rows = []
    for first, second in zip(reports[::2], reports[1::2]):
        fa, fb = _echo_fields(first), _echo_fields(second)
        window_a = (fa.get("test_start"), fa.get("test_end"), first.n)
        window_b = (fb.get("test_start"), fb.get("test_end"), second.n)
        if window_a != window_b:
            raise CliError(
                f"incompatible test windows for {first.label!r} vs {second.label!r}: "
                f"{window_a} vs {window_b}"
            )
        if "method" in fa and "method" in fb:
            if args.pairing == "dataset-pairs" and (
                fa["method"] != fb["method"] or fa.get("mode") == fb.get("mode")
            ):
                raise CliError(
                    f"dataset-pairs expects same method, different mode; got "
                    f"{first.label!r} vs {second.label!r}"
                )
            if args.pairing == "method-pairs" and (
                fa.get("mode") != fb.get("mode") or fa["method"] == fb["method"]
            ):
                raise CliError(
                    f"method-pairs expects same mode, different method; got "
                    f"{first.label!r} vs {second.label!r}"
                )
        try:
            rates = improvement_rate(first, second)
        except ValueError as err:
            raise CliError(str(err)) from None
        rows.append(
            f"{first.label} vs {second.label},{rates.ir_mape_pct!r},"
            f"{rates.ir_rmse_pct!r},{rates.ir_da_pct!r}"
        )

    table = "\n".join(["pair,ir_mape_pct,ir_rmse_pct,ir_da_pct"] + rows) + "\n"
    atomic_write_text(args.out, table)
    print(table, end="")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oilcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="fuse tagged CSVs into one panel")
    ingest.add_argument("--economic", action="append", metavar="CSV")
    ingest.add_argument("--gsvi", action="append", metavar="CSV")
    ingest.add_argument("--target", required=True, metavar="CSV")
    ingest.add_argument("--out", required=True, metavar="PREFIX")
    ingest.set_defaults(fn=cmd_ingest)

    synth = sub.add_parser("synth", help="write a synthetic panel")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--months", type=int, default=180)
    synth.add_argument("--factors", type=int, default=3)
    synth.add_argument("--series-per-factor", type=int, default=10)
    synth.add_argument("--noise", type=float, default=0.05)
    synth.add_argument("--target-noise", type=float, default=0.5)
    synth.add_argument("--lag", type=int, default=1)
    synth.add_argument("--start", default="2004-01")
    synth.add_argument("--out", required=True, metavar="PREFIX")
    synth.set_defaults(fn=cmd_synth)

    run = sub.add_parser("run", help="run one forecasting method end to end")
    run.add_argument("--config", metavar="FILE")
    run.add_argument("--set", action="append", metavar="KEY=VALUE")
    run.add_argument("--out-dir", default=".", metavar="DIR")
    run.set_defaults(fn=cmd_run)

    compare = sub.add_parser("compare", help="improvement-rate table from reports")
    compare.add_argument("reports", nargs="+", metavar="METRICS")
    compare.add_argument(
        "--pairing",
        choices=("dataset-pairs", "method-pairs"),
        default="method-pairs",
    )
    compare.add_argument("--out", required=True, metavar="CSV")
    compare.set_defaults(fn=cmd_compare)
    return parser


def _exit_code_for(err: BaseException) -> int:
    cause: BaseException | None = err
    while cause is not None:
        if isinstance(cause, NumericalError):
            return 2
        cause = cause.__cause__
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as err:
        code = _exit_code_for(err)
        print(f"error: {err}", file=sys.stderr)
        return code
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except RuntimeError as err:
        code = _exit_code_for(err)
        print(f"error: {err}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
