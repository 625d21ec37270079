use std::collections::BTreeSet;
use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use sfcast_core::data::{self, CityKey, CitySeries};
use sfcast_core::model::{build_model, cnn_lstm_spec_with_window, Model};
use sfcast_core::tensor::Tensor;
use sfcast_core::train::TrainConfig;
use sfcast_core::{baseline, make_windows, prepare_datasets, train as train_mod, Error};

use crate::manifest::RunManifest;
use crate::{CliError, CliResult, CompareArgs, EvaluateArgs, IngestArgs, PredictArgs, SourceArgs, TrainArgs};

fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn require_readable(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(input_err(format!("input file '{}' not found", path.display())));
    }
    Ok(())
}

/// Resolves the seed: the flag when present, otherwise a fresh random one
/// (always recorded in the manifest).
fn resolve_seed(seed: Option<u64>, quiet: bool) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            if !quiet {
                eprintln!("no --seed given; using recorded seed {s}");
            }
            s
        }
    }
}

/// Loads a cleaned series from the CSV or the synthetic generator.
fn load_series(source: &SourceArgs, seed: u64, quiet: bool) -> Result<CitySeries, CliError> {
    if source.synthetic {
        if source.csv_path.is_some() {
            return Err(input_err("give either a CSV path or --synthetic, not both"));
        }
        return Ok(data::synthesize_series(source.length, seed, source.noise_std));
    }
    let path = source
        .csv_path
        .as_ref()
        .ok_or_else(|| input_err("either a CSV path or --synthetic is required"))?;
    require_readable(path)?;
    let outcome = data::parse_csv(path, source.missing_threshold)?;
    report_bad_rows(&outcome.bad_rows, quiet);
    let key = select_city(&outcome.records, source.city.as_deref())?;
    if !quiet {
        eprintln!("selected series {key}");
    }
    Ok(data::clean_series(
        &outcome.records,
        &key,
        source.missing,
        source.missing_threshold,
    )?)
}

fn report_bad_rows(bad_rows: &[data::BadRow], quiet: bool) {
    if quiet || bad_rows.is_empty() {
        return;
    }
    eprintln!("skipped {} unparsable row(s):", bad_rows.len());
    for row in bad_rows.iter().take(10) {
        eprintln!("  line {}: {}", row.line, row.reason);
    }
    if bad_rows.len() > 10 {
        eprintln!("  ... and {} more", bad_rows.len() - 10);
    }
}

/// Picks one city key: by exact full key, then by case-insensitive city
/// name; unique match required.
fn select_city(records: &[data::RawRecord], query: Option<&str>) -> Result<CityKey, CliError> {
    let keys: BTreeSet<CityKey> = records.iter().map(|r| r.city_key()).collect();
    match query {
        None => {
            if keys.len() == 1 {
                Ok(keys.into_iter().next().expect("one key"))
            } else {
                Err(input_err(format!(
                    "input contains {} cities; pick one with --city",
                    keys.len()
                )))
            }
        }
        Some(q) => {
            if let Some(key) = keys.iter().find(|k| k.to_string() == q) {
                return Ok(key.clone());
            }
            let by_name: Vec<&CityKey> = keys
                .iter()
                .filter(|k| k.city.eq_ignore_ascii_case(q))
                .collect();
            match by_name.len() {
                0 => Err(CliError::from(Error::UnknownCity(q.to_string()))),
                1 => Ok(by_name[0].clone()),
                n => Err(input_err(format!(
                    "city '{q}' is ambiguous ({n} matches); use a full key such as '{}'",
                    by_name[0]
                ))),
            }
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    fs::write(path, format!("{value:#}\n"))?;
    Ok(())
}

pub fn ingest(args: IngestArgs, quiet: bool) -> CliResult {
    require_readable(&args.csv_path)?;
    let outcome = data::parse_csv(&args.csv_path, args.missing_threshold)?;
    report_bad_rows(&outcome.bad_rows, quiet);

    let stats = serde_json::to_value(&outcome.stats).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{stats:#}");
    if let Some(out) = &args.stats_out {
        write_json(out, &stats)?;
    }

    let mut manifest = RunManifest::new(
        "ingest",
        json!({
            "csv_path": args.csv_path.display().to_string(),
            "missing_threshold": args.missing_threshold,
            "stats_out": args.stats_out.as_ref().map(|p| p.display().to_string()),
        }),
        0,
    );
    manifest.record_input(&args.csv_path)?;
    if let Some(out) = &args.stats_out {
        manifest.record_output(out);
    }
    manifest.write(args.stats_out.as_deref())?;
    Ok(())
}

fn default_curve_path(model_out: &Path) -> PathBuf {
    let name = model_out
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "model.sfmodel.json".to_string());
    let stem = name.strip_suffix(".sfmodel.json").unwrap_or(&name);
    model_out.with_file_name(format!("{stem}.curve.csv"))
}

pub fn train(args: TrainArgs, quiet: bool) -> CliResult {
    if args.epochs == 0 {
        return Err(input_err("--epochs must be at least 1"));
    }
    let seed = resolve_seed(args.seed, quiet);
    let series = load_series(&args.source, seed, quiet)?;
    let prepared = prepare_datasets(&series, args.window, 1, args.split)?;

    let spec = cnn_lstm_spec_with_window(args.window);
    let mut model = build_model(spec, seed, prepared.normalization)?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed,
        patience: args.patience,
        ..TrainConfig::default()
    };

    let curve_path = args.curve_out.clone().unwrap_or_else(|| default_curve_path(&args.model_out));
    let mut curve = BufWriter::new(File::create(&curve_path)?);
    if !quiet {
        eprintln!(
            "training on {} windows ({} validation), {} epochs, batch {}",
            prepared.train.len(),
            prepared.test.len(),
            config.epochs,
            config.batch_size
        );
    }
    let history = train_mod::train(
        &mut model,
        &prepared.train,
        &prepared.test,
        &config,
        Some(&mut curve),
    )?;
    curve.flush()?;
    model.save(&args.model_out)?;

    let last = history.records.last().expect("at least one epoch");
    if !quiet {
        eprintln!(
            "done: epoch {} train_mae {:.4} val_mae {:.4}; model -> {}",
            last.epoch,
            last.train_mae,
            last.val_mae,
            args.model_out.display()
        );
    }
    println!(
        "{:#}",
        json!({
            "model": args.model_out.display().to_string(),
            "curve": curve_path.display().to_string(),
            "epochs_run": history.records.len(),
            "optimizer_steps": history.optimizer_steps,
            "final_train_mae": last.train_mae,
            "final_val_mae": last.val_mae,
        })
    );

    let mut manifest = RunManifest::new(
        "train",
        json!({
            "source": source_config(&args.source),
            "window": args.window,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "split": args.split,
            "patience": args.patience,
            "model_out": args.model_out.display().to_string(),
            "curve_out": curve_path.display().to_string(),
            "train_config": serde_json::to_value(&config).map_err(|e| CliError::Internal(e.to_string()))?,
        }),
        seed,
    );
    if let Some(csv) = &args.source.csv_path {
        manifest.record_input(csv)?;
    }
    manifest.record_output(&args.model_out);
    manifest.record_output(&curve_path);
    manifest.write(Some(&args.model_out))?;
    Ok(())
}

fn source_config(source: &SourceArgs) -> serde_json::Value {
    json!({
        "csv_path": source.csv_path.as_ref().map(|p| p.display().to_string()),
        "synthetic": source.synthetic,
        "city": source.city,
        "missing": format!("{:?}", source.missing).to_lowercase(),
        "missing_threshold": source.missing_threshold,
        "length": source.length,
        "noise_std": source.noise_std,
    })
}

/// Builds the evaluation windows for a saved model: the chronological test
/// slice of the series, normalized with the model's stored statistics so
/// inputs arrive in the frame the model was trained in.
fn eval_dataset(
    series: &CitySeries,
    model: &Model,
    split: f64,
) -> Result<sfcast_core::WindowedDataset, CliError> {
    let norm = model.meta().normalization;
    let (_, test_points) = data::chronological_split(&series.points, split)?;
    let values: Vec<f64> = test_points.iter().map(|(_, v)| *v).collect();
    let provenance = sfcast_core::Provenance {
        source: series.key.clone(),
        start: test_points.first().map(|(d, _)| *d),
        end: test_points.last().map(|(d, _)| *d),
    };
    Ok(make_windows(
        &norm.apply_slice(&values),
        model.input_window(),
        1,
        norm,
        provenance,
    )?)
}

pub fn evaluate(args: EvaluateArgs, quiet: bool) -> CliResult {
    require_readable(&args.model_path)?;
    let model = Model::load(&args.model_path)?;
    if let Some(window) = args.window {
        if window != model.input_window() {
            return Err(input_err(format!(
                "--window {window} does not match the model's window {}",
                model.input_window()
            )));
        }
    }
    let seed = resolve_seed(args.seed, quiet);
    let series = load_series(&args.source, seed, quiet)?;
    let ds = eval_dataset(&series, &model, args.split)?;
    let report = train_mod::evaluate(&model, &ds)?;

    let payload = json!({
        "model": args.model_path.display().to_string(),
        "variance": report.variance,
        "r2": report.r2,
        "mae": report.mae,
    });
    println!("{payload:#}");
    if let Some(out) = &args.report_out {
        write_json(out, &payload)?;
    }

    let mut manifest = RunManifest::new(
        "evaluate",
        json!({
            "model_path": args.model_path.display().to_string(),
            "source": source_config(&args.source),
            "split": args.split,
            "report_out": args.report_out.as_ref().map(|p| p.display().to_string()),
        }),
        seed,
    );
    manifest.record_input(&args.model_path)?;
    if let Some(csv) = &args.source.csv_path {
        manifest.record_input(csv)?;
    }
    if let Some(out) = &args.report_out {
        manifest.record_output(out);
    }
    manifest.write(args.report_out.as_deref())?;
    Ok(())
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| input_err(format!("'{t}' is not a number")))
        })
        .collect()
}

pub fn predict(args: PredictArgs, quiet: bool) -> CliResult {
    require_readable(&args.model_path)?;
    let model = Model::load(&args.model_path)?;
    let text = match (&args.input, &args.input_file) {
        (Some(text), None) => text.clone(),
        (None, Some(path)) => {
            require_readable(path)?;
            fs::read_to_string(path)?
        }
        _ => return Err(input_err("give exactly one of --input or --input-file")),
    };
    let values = parse_values(&text)?;
    let window = model.input_window();
    if values.len() != window {
        return Err(input_err(format!(
            "expected exactly {window} input values, got {}",
            values.len()
        )));
    }

    let norm = model.meta().normalization;
    let normalized = norm.apply_slice(&values);
    let x = Tensor::new(vec![1, window, 1], normalized).map_err(CliError::from)?;
    let prediction = model.predict(&x)?.data()[0];
    println!("{prediction}");
    if !quiet {
        eprintln!("next-step prediction from {window} observations");
    }

    let mut manifest = RunManifest::new(
        "predict",
        json!({
            "model_path": args.model_path.display().to_string(),
            "input_file": args.input_file.as_ref().map(|p| p.display().to_string()),
            "values": values.len(),
        }),
        model.meta().seed,
    );
    manifest.record_input(&args.model_path)?;
    manifest.write(None)?;
    Ok(())
}

pub fn compare(args: CompareArgs, quiet: bool) -> CliResult {
    if args.epochs == 0 {
        return Err(input_err("--epochs must be at least 1"));
    }
    let seed = resolve_seed(args.seed, quiet);
    let seeds: Vec<u64> = if args.seeds.is_empty() {
        vec![seed]
    } else {
        args.seeds.clone()
    };
    let series = load_series(&args.source, seed, quiet)?;
    let prepared = prepare_datasets(&series, args.window, 1, args.split)?;
    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed,
        ..TrainConfig::default()
    };
    if !quiet {
        eprintln!(
            "comparing 4 models on {} train / {} test windows, seeds {:?}",
            prepared.train.len(),
            prepared.test.len(),
            seeds
        );
    }
    let rows = baseline::compare_models(&prepared.train, &prepared.test, &config, &seeds);
    if rows.iter().all(|r| r.mean.is_none()) {
        let first = rows
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_else(|| "all models failed".to_string());
        return Err(CliError::Internal(format!("all models failed: {first}")));
    }

    let payload = serde_json::to_value(&rows).map_err(|e| CliError::Internal(e.to_string()))?;
    println!("{payload:#}");
    let table = baseline::render_table(&rows);
    eprint!("{table}");
    if let Some(out) = &args.table_out {
        fs::write(out, &table)?;
    }

    let mut manifest = RunManifest::new(
        "compare",
        json!({
            "source": source_config(&args.source),
            "window": args.window,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "lr": args.lr,
            "split": args.split,
            "seeds": seeds,
            "table_out": args.table_out.as_ref().map(|p| p.display().to_string()),
            "data_hash": rows.first().map(|r| r.data_hash.clone()),
        }),
        seed,
    );
    if let Some(csv) = &args.source.csv_path {
        manifest.record_input(csv)?;
    }
    if let Some(out) = &args.table_out {
        manifest.record_output(out);
    }
    manifest.write(args.table_out.as_deref())?;
    Ok(())
}
