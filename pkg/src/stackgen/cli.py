"""Command-line interface: dataset generation, evaluation, stacking, prediction."""
from __future__ import annotations

import json

import click
import numpy as np

from .data import Dataset, load_csv, load_schema, save_csv, save_schema
from .harness import (
    BestCvMethod,
    Level0Method,
    Report,
    StackedMethod,
    derive_seed,
    emit_report,
    outer_cv_eval,
    parse_gen_spec,
    parse_method,
    render_table,
    repeated_trials_eval,
    se_count,
    split_method_list,
    weight_dump,
)
from .stacking import load_model, save_model

CONFIG_VERSION = 1


@click.group()
def main():
    """Stacked generalization toolkit: combine heterogeneous classifiers through
    cross-validated meta-learning, and benchmark against standard baselines."""


@main.command()
@click.option("--dataset", "name", type=click.Choice(["led24", "waveform"]), required=True)
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", type=float, default=0.1, show_default=True, help="led24 segment-flip probability")
@click.option("--variant", type=click.Choice(["21", "40"]), default="40", show_default=True,
              help="waveform attribute count")
@click.option("--out", type=click.Path(), required=True, help="CSV path; the schema sidecar gets '.schema' appended")
def gen(name, n, seed, noise, variant, out):
    """Generate a synthetic dataset as CSV plus schema sidecar."""
    spec = parse_gen_spec(f"led24:noise={noise}" if name == "led24" else f"waveform:variant={variant}")
    data = spec.generate(n, seed)
    save_csv(data, out)
    save_schema(data.schema, f"{out}.schema")
    click.echo(f"wrote {len(data)} instances to {out}")


def _load(data_path, schema_path, header):
    return load_csv(data_path, load_schema(schema_path), has_header=header)


def _dataset_descriptor(data_path, dataset: Dataset) -> dict:
    return {
        "path": str(data_path),
        "n": len(dataset),
        "n_attributes": dataset.schema.n_attributes,
        "classes": list(dataset.schema.class_values),
    }


@main.command("eval")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--method", "method_text", required=True)
@click.option("--w", type=int, default=10, show_default=True, help="outer evaluation folds")
@click.option("--j", type=int, default=10, show_default=True, help="internal cross-validation folds")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--header/--no-header", default=False, show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
def eval_cmd(data_path, schema_path, method_text, w, j, seed, jobs, header, report_path):
    """Outer cross-validation of one method on a CSV dataset."""
    dataset = _load(data_path, schema_path, header)
    method = parse_method(method_text)
    result = outer_cv_eval(dataset, method, w=w, n_folds=j, seed=seed, jobs=jobs)
    report = Report(
        dataset=_dataset_descriptor(data_path, dataset),
        results=(result,),
        config={
            "command": "eval",
            "data": str(data_path),
            "schema": str(schema_path),
            "method": method.canonical(),
            "w": w,
            "j": j,
            "seed": seed,
            "header": header,
        },
    )
    emit_report(report, report_path)
    click.echo(render_table(report), nl=False)


@main.command()
@click.option("--gen", "gen_text", required=True, help="led24[:noise=F] or waveform[:variant=21|40]")
@click.option("--train-n", type=int, required=True)
@click.option("--test-n", type=int, required=True)
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--method", "method_text", required=True)
@click.option("--j", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
def trials(gen_text, train_n, test_n, trials, method_text, j, seed, jobs, report_path):
    """Repeated fresh-sample trials of one method on a synthetic generator."""
    spec = parse_gen_spec(gen_text)
    method = parse_method(method_text)
    result = repeated_trials_eval(spec, train_n, test_n, method, trials=trials, seed=seed, n_folds=j, jobs=jobs)
    report = Report(
        dataset={"generator": spec.canonical(), "train_n": train_n, "test_n": test_n},
        results=(result,),
        config={
            "command": "trials",
            "gen": spec.canonical(),
            "train_n": train_n,
            "test_n": test_n,
            "trials": trials,
            "method": method.canonical(),
            "j": j,
            "seed": seed,
        },
    )
    emit_report(report, report_path)
    click.echo(render_table(report), nl=False)


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--header/--no-header", default=False, show_default=True)
@click.option("--out", "model_path", type=click.Path(), required=True)
def stack(data_path, schema_path, config_path, header, model_path):
    """Fit a stacked model per a JSON config and save it.

    Config keys: version (=1), method (a stack:... spec), j, seed.
    """
    with open(config_path) as f:
        config = json.load(f)
    if config.get("version") != CONFIG_VERSION:
        raise click.ClickException(f"unsupported config version {config.get('version')!r}")
    method = parse_method(config.get("method", "stack:repr=probs,l1=mlr(iii)"))
    if not isinstance(method, StackedMethod):
        raise click.ClickException("the stack command needs a stack:... method")
    dataset = _load(data_path, schema_path, header)
    model = method.fit(dataset, int(config.get("j", 10)), int(config.get("seed", 0)))
    save_model(model, model_path)
    click.echo(f"wrote model to {model_path}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--header/--no-header", default=False, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def predict(model_path, data_path, header, out_path):
    """Classify a CSV with a saved model; writes one class value per line.

    Rows may include a trailing class column (detected by width); it is ignored.
    """
    model = load_model(model_path)
    schema = model.schema
    import csv as _csv

    with open(data_path, newline="") as f:
        rows = [r for r in _csv.reader(f) if r and any(cell.strip() for cell in r)]
    if header and rows:
        rows = rows[1:]
    labeled = bool(rows) and len(rows[0]) == schema.n_attributes + 1
    import tempfile, os

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False, newline="") as tmp:
        _csv.writer(tmp, lineterminator="\n").writerows(rows)
        tmp_path = tmp.name
    try:
        dataset = load_csv(tmp_path, schema, labeled=labeled)
    finally:
        os.unlink(tmp_path)
    if dataset.schema != schema:
        raise click.ClickException("prediction data introduced categories the model has not seen")
    predicted = model.predict_batch(dataset.x)
    with open(out_path, "w") as f:
        for c in predicted:
            f.write(schema.class_values[int(c)] + "\n")
    click.echo(f"wrote {len(predicted)} predictions to {out_path}")


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--schema", "schema_path", type=click.Path(exists=True), required=True)
@click.option("--methods", "methods_text", required=True, help="comma-separated method specs")
@click.option("--w", type=int, default=10, show_default=True)
@click.option("--j", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--header/--no-header", default=False, show_default=True)
@click.option("--dump-weights/--no-dump-weights", default=False, show_default=True,
              help="fit the first linear stacked method on the full data and dump its weights")
@click.option("--report", "report_path", type=click.Path(), required=True)
def compare(data_path, schema_path, methods_text, w, j, seed, jobs, header, dump_weights, report_path):
    """Evaluate several methods side by side; the table stars the best one."""
    dataset = _load(data_path, schema_path, header)
    methods = [parse_method(t) for t in split_method_list(methods_text)]
    results = tuple(outer_cv_eval(dataset, m, w=w, n_folds=j, seed=seed, jobs=jobs) for m in methods)

    spread = None
    best = next((r for m, r in zip(methods, results) if isinstance(m, BestCvMethod)), None)
    level0 = [r for m, r in zip(methods, results) if isinstance(m, Level0Method)]
    if best is not None and level0 and best.std_error > 0:
        spread = se_count(best.mean_error, max(r.mean_error for r in level0), best.std_error)

    weights = None
    if dump_weights:
        stacked = next((m for m in methods if isinstance(m, StackedMethod) and m.level1 == "mlr"), None)
        if stacked is not None:
            model = stacked.fit(dataset, j, derive_seed(seed, "weights"))
            names = [lvl0.canonical() for lvl0 in
                     (Level0Method("tree"), Level0Method("nb"), Level0Method("knn"))]
            weights = weight_dump(model.level1, names, dataset.schema.class_values)

    report = Report(
        dataset=_dataset_descriptor(data_path, dataset),
        results=results,
        se_count=spread,
        weights=weights,
        config={
            "command": "compare",
            "data": str(data_path),
            "schema": str(schema_path),
            "methods": [m.canonical() for m in methods],
            "w": w,
            "j": j,
            "seed": seed,
            "header": header,
            "dump_weights": dump_weights,
        },
    )
    emit_report(report, report_path)
    click.echo(render_table(report), nl=False)


if __name__ == "__main__":
    main()
