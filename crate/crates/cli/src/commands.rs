use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use leafnet_core::augment::{expand_dataset, DatasetManifest, ExpansionTargets};
use leafnet_core::baselines::{evaluate, ClassReport, ClassifierOptions, ClassifierRegistry, CnnClassifier};
use leafnet_core::cnn::default_network_with;
use leafnet_core::experiment::sweep::presets;
use leafnet_core::experiment::{
    make_synthetic_corpus, split_dataset, sweep, train_with, write_curve, write_sweep, Dataset, RunRecord, SummaryRow,
};
use leafnet_core::imaging::{segment_pipeline, Raster};
use leafnet_core::{Error, Rng};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::{Cli, Command, DataArgs, Preset, TrainArgs};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.propagate_seed(seed);

    match cli.command {
        Command::MakeCorpus { out, classes, per_class } => {
            let classes = classes.unwrap_or(cfg.corpus.classes);
            let per_class = per_class.unwrap_or(cfg.corpus.per_class);
            let corpus = make_synthetic_corpus(classes, per_class, &Rng::new(seed))?;
            let manifest = corpus.write(&out)?;
            println!("wrote {} images in {} classes to {}", manifest.total(), classes, out.display());
            Ok(())
        }
        Command::Segment { input, output } => segment(&cfg, &input, &output),
        Command::Augment { input, output, targets } => augment(&cfg, &input, &output, targets.as_deref()),
        Command::Split { input, output, fraction } => {
            if let Some(f) = fraction {
                cfg.split.fraction = f;
            }
            split(&cfg, &input, &output)
        }
        Command::Train { data, train } => {
            apply_train_args(&mut cfg, &train);
            train_cnn(&cfg, &data)
        }
        Command::Sweep { data, preset, iterations, list, parallel } => {
            run_sweep(&cfg, &data, preset, iterations, list, parallel)
        }
        Command::Baseline { data, methods, train } => {
            apply_train_args(&mut cfg, &train);
            baseline(&cfg, &data, &methods)
        }
        Command::Evaluate { model, kind, manifest, out } => {
            evaluate_model(&cfg, &model, &kind, &manifest, out.as_deref())
        }
        Command::Report { work } => report(&work),
    }
}

fn apply_train_args(cfg: &mut PipelineConfig, a: &TrainArgs) {
    let t = &mut cfg.train;
    if let Some(lr) = a.lr {
        t.lr = lr;
    }
    if let Some(n) = a.iterations {
        t.max_iterations = n;
    }
    if let Some(b) = a.batch {
        t.batch_size = b;
    }
    if let Some(i) = a.eval_interval {
        t.eval_interval = i;
    }
    if a.dropout {
        t.dropout = true;
    }
    if a.no_dropout {
        t.dropout = false;
    }
    cfg.classifiers.cnn = t.clone();
}

fn require_dir(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        bail!("{} is not a readable directory", dir.display());
    }
    Ok(())
}

fn is_image(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    v.sort();
    Ok(v)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// The dataset under `dir`: its `manifest.json` if present, otherwise one
/// class per subdirectory plus an `unlabeled` class for loose images.
fn discover(dir: &Path) -> Result<DatasetManifest> {
    require_dir(dir)?;
    let manifest = dir.join("manifest.json");
    if manifest.is_file() {
        return Ok(DatasetManifest::load(&manifest)?);
    }
    let mut classes = Vec::new();
    let mut loose = Vec::new();
    for p in sorted_entries(dir)? {
        if p.is_dir() {
            let name = file_name(&p);
            let files: Vec<String> = sorted_entries(&p)?
                .iter()
                .filter(|f| is_image(f))
                .map(|f| format!("{name}/{}", file_name(f)))
                .collect();
            if !files.is_empty() {
                classes.push((name, files));
            }
        } else if is_image(&p) {
            loose.push(file_name(&p));
        }
    }
    if !loose.is_empty() {
        classes.push(("unlabeled".to_string(), loose));
    }
    if classes.is_empty() {
        bail!("no images found under {}", dir.display());
    }
    Ok(DatasetManifest::from_files(classes))
}

fn segment(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let manifest = discover(input)?;
    let jobs: Vec<(usize, String)> =
        manifest.entries.iter().enumerate().flat_map(|(c, e)| e.files.iter().map(move |f| (c, f.clone()))).collect();
    for e in &manifest.entries {
        fs::create_dir_all(output.join(&e.class))?;
    }
    let results: Vec<Option<String>> = jobs
        .par_iter()
        .map(|(c, f)| {
            let src = leafnet_core::augment::resolve(input, f);
            let stem = src.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let rel = format!("{}/{stem}.png", manifest.entries[*c].class);
            let done = Raster::load(&src)
                .and_then(|img| segment_pipeline(&img, &cfg.segment))
                .and_then(|seg| seg.output.save_png(&output.join(&rel)));
            match done {
                Ok(()) => Some(rel),
                Err(e) => {
                    log::warn!("skipping {}: {e}", src.display());
                    None
                }
            }
        })
        .collect();
    let mut per_class: Vec<(String, Vec<String>)> =
        manifest.entries.iter().map(|e| (e.class.clone(), Vec::new())).collect();
    let mut failed = 0;
    for ((c, _), r) in jobs.iter().zip(results) {
        match r {
            Some(rel) => per_class[*c].1.push(rel),
            None => failed += 1,
        }
    }
    let out = DatasetManifest::from_files(per_class);
    out.save(&output.join("manifest.json"))?;
    println!("segmented {} images, {failed} failed", out.total());
    Ok(())
}

fn augment(cfg: &PipelineConfig, input: &Path, output: &Path, targets: Option<&Path>) -> Result<()> {
    let manifest = discover(input)?;
    let targets: Option<ExpansionTargets> = match targets {
        Some(p) => Some(
            serde_json::from_str(&fs::read_to_string(p)?)
                .with_context(|| format!("invalid targets {}", p.display()))?,
        ),
        None => None,
    };
    fs::create_dir_all(output)?;
    let out = expand_dataset(&manifest, &cfg.augment, &Rng::new(cfg.seed), targets.as_ref(), input, output)?;
    out.save(&output.join("manifest.json"))?;
    println!("expanded {} images to {}", manifest.total(), out.total());
    Ok(())
}

fn absolute_files(m: &DatasetManifest, root: &Path) -> DatasetManifest {
    let mut m = m.clone();
    for e in &mut m.entries {
        for f in &mut e.files {
            *f = leafnet_core::augment::resolve(root, f).to_string_lossy().into_owned();
        }
    }
    m
}

fn split(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let root = input.canonicalize().with_context(|| format!("cannot read {}", input.display()))?;
    let manifest = absolute_files(&discover(&root)?, &root);
    let (train, test) = split_dataset(&manifest, &cfg.split)?;
    fs::create_dir_all(output)?;
    train.save(&output.join("train.json"))?;
    test.save(&output.join("test.json"))?;
    println!("split {} images into {} train / {} test", manifest.total(), train.total(), test.total());
    Ok(())
}

fn load_split(cfg: &PipelineConfig, dir: &Path) -> Result<(Dataset, Dataset)> {
    require_dir(dir)?;
    let side = cfg.network.input_side;
    let load = |name: &str| -> Result<Dataset> {
        let path = dir.join(name);
        let m = DatasetManifest::load(&path)
            .with_context(|| format!("cannot load {}; run `split` first", path.display()))?;
        Ok(Dataset::load(&m, dir, side)?)
    };
    let (train, test) = (load("train.json")?, load("test.json")?);
    if train.classes() != test.classes() {
        bail!("train and test manifests list different classes");
    }
    Ok((train, test))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn train_cnn(cfg: &PipelineConfig, data: &DataArgs) -> Result<()> {
    let (train, test) = load_split(cfg, &data.split)?;
    let spec = default_network_with(train.classes().len(), &cfg.network)?;
    let dir = data.work.join("runs").join("cnn");
    fs::create_dir_all(&dir)?;
    let out = train_with(&spec, &train, &test, &cfg.train, &cfg.thresholds, &mut |p| {
        println!("iteration {:>6}  loss {:.4}  train {:.4}  test {:.4}", p.iteration, p.loss, p.train_acc, p.test_acc)
    });
    let out = match out {
        Err(Error::Divergence { context, partial_curve }) => {
            write_curve(&partial_curve, &dir.join("curve.csv"))?;
            return Err(Error::Divergence { context, partial_curve }.into());
        }
        other => other?,
    };
    write_json(&dir.join("record.json"), &out.record)?;
    write_curve(&out.record.curve, &dir.join("curve.csv"))?;
    let net = leafnet_core::cnn::Network::new(leafnet_core::experiment::effective_spec(&spec, &cfg.train))?;
    leafnet_core::cnn::container::save_parameters(&dir.join("model.bin"), &net, &out.params)?;
    fs::write(CnnClassifier::spec_path(&dir.join("model.bin")), net.spec().to_json()?)?;
    println!(
        "{}: final train {:.4}, test {:.4}",
        out.record.verdict, out.record.final_train_acc, out.record.final_test_acc
    );
    Ok(())
}

fn run_sweep(
    cfg: &PipelineConfig,
    data: &DataArgs,
    preset: Preset,
    iterations: Option<usize>,
    list: bool,
    parallel: bool,
) -> Result<()> {
    let grid = match preset {
        Preset::Desk => presets::desk(cfg.seed, iterations.unwrap_or(cfg.train.max_iterations)),
        Preset::PaperTable6 => presets::paper_table6(cfg.seed),
    };
    if list {
        println!("lr,iterations,batch,dropout");
        for c in &grid {
            println!("{},{},{},{}", c.lr, c.max_iterations, c.batch_size, c.dropout);
        }
        return Ok(());
    }
    let (train, test) = load_split(cfg, &data.split)?;
    let spec = default_network_with(train.classes().len(), &cfg.network)?;
    let outcome = sweep(&spec, &train, &test, &grid, &cfg.thresholds, parallel)?;
    if outcome.runs.iter().all(|r| r.is_err()) {
        bail!("no configuration of the sweep ran: {}", outcome.summary[0].verdict);
    }
    let dir = data.work.join("sweep");
    write_sweep(&outcome, &dir)?;
    print_summary(&outcome.summary);
    Ok(())
}

fn print_summary(rows: &[SummaryRow]) {
    println!("{:>10} {:>10} {:>6} {:>8}  {:>7} {:>7}  verdict", "lr", "iters", "batch", "dropout", "train", "test");
    let acc = |a: Option<f64>| a.map_or("-".to_string(), |v| format!("{v:.4}"));
    for r in rows {
        println!(
            "{:>10} {:>10} {:>6} {:>8}  {:>7} {:>7}  {}",
            r.lr,
            r.iterations,
            r.batch,
            r.dropout,
            acc(r.final_train_acc),
            acc(r.final_test_acc),
            r.verdict
        );
    }
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct ComparisonRow {
    method: String,
    accuracy: f64,
}

fn baseline(cfg: &PipelineConfig, data: &DataArgs, methods: &[String]) -> Result<()> {
    let registry = ClassifierRegistry::default();
    let models =
        methods.iter().map(|m| registry.build(m, &cfg.classifiers)).collect::<leafnet_core::Result<Vec<_>>>()?;
    let (train, test) = load_split(cfg, &data.split)?;
    let dir = data.work.join("baselines");
    fs::create_dir_all(&dir)?;
    let mut rows = Vec::new();
    for mut model in models {
        let name = model.name();
        log::info!("fitting {name}");
        model.fit(&train, &test)?;
        let report = evaluate(model.as_ref(), &test)?;
        model.save(&dir.join(format!("{name}.bin")))?;
        write_report(&report, &dir.join(name))?;
        println!("{name:>4}: test accuracy {:.4}", report.accuracy);
        rows.push(ComparisonRow { method: name.to_string(), accuracy: report.accuracy });
    }
    let mut w = csv::Writer::from_path(dir.join("comparison.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_report(report: &ClassReport, stem: &Path) -> Result<()> {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    write_json(&with(".json"), report)?;
    report.write_csv(&with("_confusion.csv"))?;
    Ok(())
}

fn evaluate_model(cfg: &PipelineConfig, model: &Path, kind: &str, manifest: &Path, out: Option<&Path>) -> Result<()> {
    let mut m = ClassifierRegistry::default().build(kind, &ClassifierOptions::default())?;
    m.load(model).with_context(|| format!("cannot load model {}", model.display()))?;
    let man = DatasetManifest::load(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let data = Dataset::load(&man, root, cfg.network.input_side)?;
    let report = evaluate(m.as_ref(), &data)?;
    println!("accuracy {:.4} on {} images", report.accuracy, report.total());
    for (name, row) in report.classes.iter().zip(&report.confusion) {
        println!("{name:>20} {row:?}");
    }
    if let Some(stem) = out {
        write_report(&report, stem)?;
    }
    Ok(())
}

fn report(work: &Path) -> Result<()> {
    require_dir(work)?;
    let mut runs: Vec<(String, RunRecord)> = Vec::new();
    let runs_dir = work.join("runs");
    if runs_dir.is_dir() {
        for d in sorted_entries(&runs_dir)? {
            let rec = d.join("record.json");
            if rec.is_file() {
                runs.push((file_name(&d), serde_json::from_str(&fs::read_to_string(&rec)?)?));
            }
        }
    }
    let summary_path = work.join("sweep").join("summary.json");
    let sweep_rows: Vec<SummaryRow> =
        if summary_path.is_file() { serde_json::from_str(&fs::read_to_string(&summary_path)?)? } else { Vec::new() };
    let cmp_path = work.join("baselines").join("comparison.csv");
    let baselines: Vec<ComparisonRow> = if cmp_path.is_file() {
        csv::Reader::from_path(&cmp_path)?.deserialize().collect::<std::result::Result<_, _>>()?
    } else {
        Vec::new()
    };
    if runs.is_empty() && sweep_rows.is_empty() && baselines.is_empty() {
        bail!("no runs, sweeps or baselines under {}", work.display());
    }

    let out = work.join("report");
    fs::create_dir_all(&out)?;
    let mut curves = csv::Writer::from_path(out.join("curves.csv"))?;
    curves.write_record(["run", "iteration", "loss", "train_acc", "test_acc"])?;
    let mut add_curve = |name: &str, path: &Path| -> Result<()> {
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.records() {
            let rec = rec?;
            let mut row = vec![name.to_string()];
            row.extend(rec.iter().map(str::to_string));
            curves.write_record(&row)?;
        }
        Ok(())
    };
    for (name, _) in &runs {
        add_curve(name, &runs_dir.join(name).join("curve.csv"))?;
    }
    let curve_dir = work.join("sweep").join("curves");
    if curve_dir.is_dir() {
        for p in sorted_entries(&curve_dir)? {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            add_curve(&format!("sweep/{stem}"), &p)?;
        }
    }
    curves.flush()?;

    if !runs.is_empty() {
        println!("Training runs");
        for (name, r) in &runs {
            println!(
                "  {name}: {} after {} iterations, train {:.4}, test {:.4}",
                r.verdict, r.config.max_iterations, r.final_train_acc, r.final_test_acc
            );
        }
    }
    if !sweep_rows.is_empty() {
        let mut ranked = sweep_rows.clone();
        ranked.sort_by(|a, b| b.final_test_acc.unwrap_or(-1.0).total_cmp(&a.final_test_acc.unwrap_or(-1.0)));
        println!("Sweep, ranked by test accuracy");
        print_summary(&ranked);
    }
    if !baselines.is_empty() {
        println!("Method comparison");
        println!("  {:<8} {:>8}", "method", "accuracy");
        for b in &baselines {
            println!("  {:<8} {:>8.4}", b.method, b.accuracy);
        }
    }
    println!("curves written to {}", out.join("curves.csv").display());
    Ok(())
}
