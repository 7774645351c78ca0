use std::io;
use std::path::Path;

use debias_core::data::cache::{self, DigitSource, Sidecar};
use debias_core::data::idx::{load_mnist, Split};
use debias_core::data::{generate, synthesize_glyphs, DatasetConfig, GrayDigits, Variant};
use debias_core::par::Execution;
use debias_core::runner::plot::{render_svg, series_from_csvs};
use debias_core::runner::sweep::{run_sweep, Axis, Sweep};
use debias_core::runner::{evaluate_checkpoint, run_experiment, Experiment};
use debias_core::trainer::{Method, TrainConfig};
use debias_core::{Error, Result};

use crate::args::{AxisArg, DataShapeArgs, EvalArgs, GenerateArgs, PlotArgs, SourceArgs, SweepArgs, TrainArgs, VariantArg};
use crate::config_file::FileConfig;

fn dataset_config(shape: &DataShapeArgs, seed: u64) -> DatasetConfig {
    let base = match shape.variant {
        VariantArg::MultiColor => DatasetConfig::multi_color(shape.ratio_left, shape.ratio_right, seed),
        VariantArg::ColoredFg => DatasetConfig::colored(Variant::ColoredFg, shape.ratio_left, seed),
        VariantArg::ColoredBg => DatasetConfig::colored(Variant::ColoredBg, shape.ratio_left, seed),
    };
    DatasetConfig {
        train_count: shape.train_count,
        test_count: shape.test_count,
        jitter_std: shape.jitter_std,
        ..base
    }
}

fn load_sources(source: &SourceArgs, config: &DatasetConfig) -> Result<(GrayDigits, GrayDigits, DigitSource)> {
    if source.synthetic {
        let glyphs = DatasetConfig::glyphs(config.train_count, config.test_count, config.seed);
        let (train, test) = synthesize_glyphs(&glyphs)?;
        return Ok((train, test, DigitSource::SyntheticGlyph));
    }
    let dir = source.mnist_dir.as_deref().ok_or_else(|| {
        Error::Config("no MNIST directory: pass --mnist-dir, set DEBIAS_DATA_DIR, or use --synthetic".into())
    })?;
    let hint = |e: Error| match e {
        Error::Io { path, source } => Error::io(
            path,
            io::Error::new(
                source.kind(),
                format!("{source}; the directory must hold the uncompressed MNIST IDX files (or pass --synthetic)"),
            ),
        ),
        other => other,
    };
    let train = load_mnist(dir, Split::Train).map_err(hint)?;
    let test = load_mnist(dir, Split::Test).map_err(hint)?;
    Ok((train, test, DigitSource::Mnist))
}

pub fn generate_cmd(args: &GenerateArgs) -> Result<()> {
    let config = dataset_config(&args.shape, args.seed);
    config.validate()?;
    let (train_src, test_src, source) = load_sources(&args.source, &config)?;
    let pair = generate(&train_src, &test_src, &config)?;
    let sidecar = Sidecar::describe(&pair, &config, source);
    cache::save_pair(&args.out, &pair, &sidecar)?;
    let fractions = |f: &[f64]| f.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    println!(
        "wrote {} train / {} test samples to {} (aligned fractions train {}, test {})",
        pair.train.len(),
        pair.test.len(),
        args.out.display(),
        fractions(&sidecar.train_aligned_fraction),
        fractions(&sidecar.test_aligned_fraction)
    );
    Ok(())
}

/// Defaults, then the config file, then explicit flags.
pub fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let file = match &args.config {
        Some(p) => FileConfig::read(p)?,
        None => FileConfig::default(),
    };
    let method_name = args
        .method
        .clone()
        .or(file.method)
        .ok_or_else(|| Error::Config("no method given (use --method or `method` in --config)".into()))?;
    let mut c = TrainConfig::new(method_name.parse::<Method>()?, 0);
    let pick = |flag: Option<f64>, file: Option<f64>, cur: f64| flag.or(file).unwrap_or(cur);
    c.epochs = args.epochs.or(file.epochs).unwrap_or(c.epochs);
    c.batch_size = args.batch_size.or(file.batch_size).unwrap_or(c.batch_size);
    c.optimizer.lr = pick(args.lr, file.lr, c.optimizer.lr);
    c.seed = args.seed.or(file.seed).unwrap_or(c.seed);
    c.focal_alpha = pick(args.alpha, file.alpha, c.focal_alpha);
    c.focal_gamma = pick(args.gamma, file.gamma, c.focal_gamma);
    c.gce_q = pick(args.q, file.q, c.gce_q);
    c.eval_every = args.eval_every.or(file.eval_every).unwrap_or(c.eval_every);
    c.checkpoint_every = args.checkpoint_every.or(file.checkpoint_every).unwrap_or(c.checkpoint_every);
    if let Some(h) = file.hidden {
        c.hidden = h;
    }
    c.validate()?;
    if c.method == Method::DiscoverOnly && args.classifier_ckpt.is_none() {
        return Err(Error::Config("discover-only requires --classifier-ckpt".into()));
    }
    Ok(c)
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let train = resolve_train_config(args)?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let exp = Experiment {
        name,
        train,
        data_dir: args.data.clone(),
        out_dir: args.out.clone(),
        classifier_ckpt: args.classifier_ckpt.clone(),
        exec: execution(args.sequential),
    };
    let report = run_experiment(&exp)?;
    let m = &report.summary.final_metrics;
    println!(
        "{} finished {} epochs: unbiased {:.4}, worst group {:.4}; run written to {}",
        report.summary.method,
        report.summary.epochs,
        m.unbiased,
        m.worst_group,
        args.out.display()
    );
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let rec = evaluate_checkpoint(
        &args.ckpt,
        args.discoverer_ckpt.as_deref(),
        &args.data,
        args.allow_mismatch,
        Execution::Parallel,
    )?;
    let mut json = serde_json::to_string_pretty(&rec).expect("metrics serialize");
    json.push('\n');
    print!("{json}");
    let out = args.out.clone().unwrap_or_else(|| args.ckpt.with_extension("eval.json"));
    std::fs::write(&out, json).map_err(|e| Error::io(out, e))
}

pub fn plot_cmd(args: &PlotArgs) -> Result<()> {
    let series = series_from_csvs(&args.csv, &args.columns)?;
    let svg = render_svg(&series, &args.title, &args.y_label)?;
    write_file(&args.out, svg.as_bytes())?;
    println!("wrote {} series to {}", series.len(), args.out.display());
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let data = dataset_config(&args.shape, args.data_seed);
    data.validate()?;
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    if methods.contains(&Method::DiscoverOnly) {
        return Err(Error::Config("discover-only needs a classifier checkpoint and cannot be swept".into()));
    }
    let mut base_train = TrainConfig::new(Method::Vanilla, 0);
    base_train.epochs = args.epochs;
    base_train.batch_size = args.batch_size;
    base_train.optimizer.lr = args.lr;
    base_train.eval_every = args.eval_every;
    base_train.validate()?;
    let (train_src, test_src, source) = load_sources(&args.source, &data)?;
    let sweep = Sweep {
        axis: match args.axis {
            AxisArg::BatchSize => Axis::BatchSize,
            AxisArg::Ratio => Axis::Ratio,
        },
        methods,
        seeds: args.seeds.clone(),
        base_train,
        base_data: data,
        out_dir: args.out.clone(),
        exec: execution(args.sequential),
    };
    let results = run_sweep(&sweep, &train_src, &test_src, source)?;
    for r in &results {
        println!("{:<40} unbiased {:.4}", r.point.tag, r.summary.final_metrics.unbiased);
    }
    Ok(())
}
