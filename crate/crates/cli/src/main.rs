mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use base64::Engine;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tda_texture::classify::{Classifier, EvalReport, ModelJson, Side, SvmParams};
use tda_texture::image_io::{crop, encode_png, load_image};
use tda_texture::interpret::{extreme_examples, virtual_landscape, VirtualPointJson};
use tda_texture::persistence::barcode;
use tda_texture::pipeline::{ingest, split, EmbeddedAnnotation, IngestReport, PipelineConfig, Provenance, RecordIssue};
use tda_texture::synthetic;

use svg::{ScatterPoint, Svg};

/// Topological texture classification of grayscale images.
#[derive(Parser)]
#[command(name = "tda-texture", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Superlevel barcode of one image.
    Persistence {
        image: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Embed every annotation of a manifest into the cache.
    Embed {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fit PCA and a linear SVM for one class pair and score the test split.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        pair: PairArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Score a trained pair model on its test split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        pair: PairArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Virtual and most extreme landscapes of a trained pair.
    Interpret {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        pair: PairArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write a synthetic sugar-like / flowers-like dataset with a manifest.
    Synth {
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 128)]
        size: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// JSON Lines annotation manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ingestion.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct PairArg {
    /// Class pair `A:B`; A is the positive side.
    #[arg(long, value_parser = parse_pair)]
    pair: (String, String),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG figures.
    #[arg(long)]
    plot: bool,
    /// Omit generation timestamps from figures.
    #[arg(long)]
    reproducible: bool,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() && a != b => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected two distinct classes as A:B, got {s:?}")),
    }
}

/// Failure the user can fix by changing the invocation.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<tda_texture::Error>() {
            use tda_texture::Error as E;
            return match e {
                E::Io { .. } | E::Config(_) | E::Json(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !last.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        last = text;
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Persistence { image, out } => cmd_persistence(&image, &out),
        Command::Embed { data, out } => cmd_embed(&data, &out),
        Command::Train { data, pair, out } => cmd_train(&data, &pair.pair, &out),
        Command::Evaluate { data, pair, out } => cmd_evaluate(&data, &pair.pair, &out),
        Command::Interpret { data, pair, out } => cmd_interpret(&data, &pair.pair, &out),
        Command::Synth {
            per_class,
            size,
            seed,
            out,
        } => {
            let manifest = synthetic::write_dataset(&out, per_class, size, seed)?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
    }
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn stamp(out: &OutputArgs) -> Option<String> {
    if out.reproducible {
        return None;
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Some(format!("at unix time {secs}"))
}

fn write_svg(out: &OutputArgs, name: &str, figure: &Svg) -> Result<()> {
    write_file(&out.out.join(name), figure.finish(stamp(out).as_deref()))
}

fn cmd_persistence(image: &Path, out: &OutputArgs) -> Result<()> {
    let img = load_image(image)?;
    let bc = barcode(&img);
    create_out(&out.out)?;
    let stem = image
        .file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    write_json(&out.out.join(format!("{stem}.barcode.json")), &bc)?;
    if out.plot {
        write_svg(out, &format!("{stem}.barcode.svg"), &svg::barcode_svg(&bc, &format!("barcode of {stem}")))?;
        write_svg(out, &format!("{stem}.diagram.svg"), &svg::diagram_svg(&bc, &format!("diagram of {stem}")))?;
    }
    let h0 = bc.bars_in_dim(0).count();
    let h1 = bc.bars_in_dim(1).count();
    println!("{}: {h0} H0 bars, {h1} H1 bars", image.display());
    Ok(())
}

/// Config from `--config` (or defaults) with `--seed` applied. A relative
/// cache directory is taken relative to the config file; without one the
/// cache lives under the output directory.
fn load_config(data: &DataArgs, out: &OutputArgs) -> Result<PipelineConfig> {
    let mut cfg = match &data.config {
        Some(p) => PipelineConfig::from_json_file(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = data.seed {
        cfg.seed = s;
    }
    cfg.cache_dir = Some(match (&cfg.cache_dir, &data.config) {
        (Some(dir), Some(cfg_path)) if dir.is_relative() => {
            cfg_path.parent().map_or_else(|| dir.clone(), |p| p.join(dir))
        }
        (Some(dir), _) => dir.clone(),
        (None, _) => out.out.join("cache"),
    });
    Ok(cfg)
}

fn load_data(data: &DataArgs, out: &OutputArgs) -> Result<(PipelineConfig, IngestReport)> {
    let cfg = load_config(data, out)?;
    if !data.manifest.is_file() {
        return Err(anyhow!(UsageError(format!(
            "manifest {} not found",
            data.manifest.display()
        ))));
    }
    let report = ingest(&data.manifest, &cfg, data.jobs)?;
    Ok((cfg, report))
}

#[derive(Serialize)]
struct EmbedSummary<'a> {
    processed: usize,
    skipped: &'a [RecordIssue],
    failed: &'a [RecordIssue],
    cache_hits: usize,
    persistence_computations: usize,
    labels: BTreeMap<&'a str, usize>,
}

fn cmd_embed(data: &DataArgs, out: &OutputArgs) -> Result<()> {
    create_out(&out.out)?;
    let (_, report) = load_data(data, out)?;
    let mut labels = BTreeMap::new();
    for a in &report.annotations {
        *labels.entry(a.label.as_str()).or_insert(0) += 1;
    }
    for issue in report.skipped.iter().chain(&report.failed) {
        eprintln!("line {}: {}", issue.line, issue.message);
    }
    println!(
        "annotations processed: {}, skipped: {}, failed: {}",
        report.annotations.len(),
        report.skipped.len(),
        report.failed.len()
    );
    println!("cache hits: {}", report.cache_hits);
    println!("persistence computations: {}", report.persistence_computations);
    write_json(
        &out.out.join("embed_report.json"),
        &EmbedSummary {
            processed: report.annotations.len(),
            skipped: &report.skipped,
            failed: &report.failed,
            cache_hits: report.cache_hits,
            persistence_computations: report.persistence_computations,
            labels,
        },
    )
}

fn pair_tag(pair: &(String, String)) -> String {
    format!("{}_{}", pair.0, pair.1)
}

fn require_classes(report: &IngestReport, pair: &(String, String)) -> Result<()> {
    for class in [&pair.0, &pair.1] {
        if !report.annotations.iter().any(|a| &a.label == class) {
            bail!(tda_texture::Error::InsufficientClass {
                class: class.clone(),
                needed: 1,
                available: 0,
            });
        }
    }
    Ok(())
}

fn annotation_id(a: &EmbeddedAnnotation) -> String {
    format!("{}:{}", a.provenance.image_id, a.line)
}

#[derive(Serialize)]
struct Summary<'a> {
    pair: [&'a str; 2],
    accuracy: f64,
    accuracy_text: String,
    per_class: &'a BTreeMap<String, tda_texture::classify::ClassCount>,
    train: usize,
    test: usize,
    explained_variance_ratio: Vec<f64>,
    #[serde(rename = "C")]
    c: f64,
    seed: u64,
}

/// Accuracy as a percentage with two decimals, like `89.25%`.
fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn write_evaluation(
    out: &OutputArgs,
    pair: &(String, String),
    cfg: &PipelineConfig,
    model: &Classifier<f64>,
    train: &[&EmbeddedAnnotation],
    test: &[&EmbeddedAnnotation],
) -> Result<EvalReport> {
    let tag = pair_tag(pair);
    let emb: Vec<&[f64]> = test.iter().map(|a| a.embedding.values.as_slice()).collect();
    let labels: Vec<&str> = test.iter().map(|a| a.label.as_str()).collect();
    let report = model.evaluate(&emb, &labels)?;

    let mut csv = String::from("id,label,predicted,signed_distance\n");
    for (a, p) in test.iter().zip(&report.predictions) {
        let _ = writeln!(csv, "{},{},{},{}", csv_field(&annotation_id(a)), p.label, p.predicted, p.signed_distance);
    }
    write_file(&out.out.join(format!("report_{tag}.csv")), csv)?;
    write_json(
        &out.out.join(format!("summary_{tag}.json")),
        &Summary {
            pair: [&pair.0, &pair.1],
            accuracy: report.accuracy,
            accuracy_text: percent(report.accuracy),
            per_class: &report.per_class,
            train: train.len(),
            test: test.len(),
            explained_variance_ratio: model.pca.explained_variance_ratio.clone(),
            c: model.svm.c,
            seed: cfg.seed,
        },
    )?;

    if out.plot {
        let points: Vec<ScatterPoint> = test
            .iter()
            .zip(&emb)
            .map(|(a, e)| {
                let p = model.reduce(e).expect("dimension checked by evaluate");
                ScatterPoint {
                    label: &a.label,
                    p: [p[0], p[1], p[2]],
                }
            })
            .collect();
        let w = [model.svm.w[0], model.svm.w[1], model.svm.w[2]];
        for (i, az) in [30.0, 120.0, 210.0].into_iter().enumerate() {
            let title = format!("{} vs {} test points, {}", pair.0, pair.1, percent(report.accuracy));
            let fig = svg::scatter_svg(&points, w, model.svm.b, az, 20.0, &title);
            write_svg(out, &format!("scatter_{tag}_view{}.svg", i + 1), &fig)?;
        }
    }
    println!("{} vs {}: test data performance {}", pair.0, pair.1, percent(report.accuracy));
    for (class, c) in &report.per_class {
        println!("  {class}: {}/{}", c.correct, c.total);
    }
    Ok(report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_train(data: &DataArgs, pair: &(String, String), out: &OutputArgs) -> Result<()> {
    create_out(&out.out)?;
    let (cfg, report) = load_data(data, out)?;
    require_classes(&report, pair)?;
    let s = split(&report.annotations, &[&pair.0, &pair.1], &cfg.split_spec())?;
    let params = SvmParams {
        c: cfg.c,
        ..SvmParams::default()
    };
    let model = Classifier::fit(&s.train_embeddings(), &s.train_labels(), (&pair.0, &pair.1), &params)?;
    write_json(&out.out.join(format!("model_{}.json", pair_tag(pair))), &model.to_json())?;
    let evr: f64 = model.pca.explained_variance_ratio.iter().sum();
    println!("PCA: top-3 explained variance {evr:.4}");
    write_evaluation(out, pair, &cfg, &model, &s.train, &s.test)?;
    Ok(())
}

fn load_model(out: &OutputArgs, pair: &(String, String)) -> Result<Classifier<f64>> {
    let path = out.out.join(format!("model_{}.json", pair_tag(pair)));
    let text = std::fs::read_to_string(&path).map_err(|_| {
        anyhow!(UsageError(format!(
            "no trained model at {}; run `tda-texture train --pair {}:{}` first",
            path.display(),
            pair.0,
            pair.1
        )))
    })?;
    let json: ModelJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let model = Classifier::from_json(&json)?;
    if model.svm.class_pos != pair.0 || model.svm.class_neg != pair.1 {
        bail!(UsageError(format!(
            "{} was trained for {}:{}",
            path.display(),
            model.svm.class_pos,
            model.svm.class_neg
        )));
    }
    Ok(model)
}

fn cmd_evaluate(data: &DataArgs, pair: &(String, String), out: &OutputArgs) -> Result<()> {
    let model = load_model(out, pair)?;
    let (cfg, report) = load_data(data, out)?;
    require_classes(&report, pair)?;
    let s = split(&report.annotations, &[&pair.0, &pair.1], &cfg.split_spec())?;
    write_evaluation(out, pair, &cfg, &model, &s.train, &s.test)?;
    Ok(())
}

#[derive(Serialize)]
struct ExtremeJson<'a> {
    class: &'a str,
    label: &'a str,
    line: usize,
    signed_distance: f64,
    provenance: &'a Provenance,
}

#[derive(Serialize)]
struct InterpretJson<'a> {
    pair: [&'a str; 2],
    /// Annotations that define the centroid and extent.
    data: &'a str,
    annotations: usize,
    virtual_points: Vec<VirtualPointJson>,
    side_check: Vec<(String, bool)>,
    extremes: Vec<ExtremeJson<'a>>,
    panels: Vec<String>,
}

fn cmd_interpret(data: &DataArgs, pair: &(String, String), out: &OutputArgs) -> Result<()> {
    const DATA: &str = "train+test";
    let model = load_model(out, pair)?;
    let (cfg, report) = load_data(data, out)?;
    require_classes(&report, pair)?;
    let members: Vec<&EmbeddedAnnotation> = report
        .annotations
        .iter()
        .filter(|a| a.label == pair.0 || a.label == pair.1)
        .collect();
    let emb: Vec<&[f64]> = members.iter().map(|a| a.embedding.values.as_slice()).collect();
    let lcfg = cfg.landscape();
    let extremes = extreme_examples(&model.pca, &model.svm, &emb)?;

    let mut virtual_points = Vec::new();
    let mut side_check = Vec::new();
    let mut extreme_json = Vec::new();
    let mut panels = Vec::new();
    for side in [Side::Positive, Side::Negative] {
        let class = model.svm.class_of(side).to_string();
        let v = virtual_landscape(&model.pca, &model.svm, &emb, side, &lcfg)?;
        let projected = model.svm.decision(&model.pca.project(&v.point.vector)?);
        let ok = Side::of(projected) == side;
        if !ok {
            bail!(tda_texture::Error::WrongSide {
                class,
                decision: projected,
            });
        }
        side_check.push((class.clone(), ok));
        virtual_points.push(v.to_json(DATA));

        let (idx, dist) = extremes.get(side);
        let ex = members[idx];
        extreme_json.push(ExtremeJson {
            class: model.svm.class_of(side),
            label: &ex.label,
            line: ex.line,
            signed_distance: dist,
            provenance: &ex.provenance,
        });

        // panel 1: the annotation with its subsample windows
        let image_path = data
            .manifest
            .parent()
            .unwrap_or(Path::new(""))
            .join(&ex.provenance.image_id);
        let img = load_image(&image_path)?;
        let region = crop(&img, ex.provenance.bbox)?;
        let png = base64::engine::general_purpose::STANDARD.encode(encode_png(&region)?);
        let squares: Vec<(u32, u32, u32)> = ex
            .provenance
            .corners
            .iter()
            .map(|&(x, y)| (x - ex.provenance.bbox.x0, y - ex.provenance.bbox.y0, cfg.patch_size))
            .collect();
        let names = [
            format!("{class}_extreme_image.svg"),
            format!("{class}_extreme_landscape.svg"),
            format!("{class}_virtual_landscape.svg"),
        ];
        write_svg(
            out,
            &names[0],
            &svg::image_svg(&png, region.width(), region.height(), &squares, &format!("most extreme {class} example")),
        )?;
        write_svg(
            out,
            &names[1],
            &svg::landscape_svg(&ex.embedding.curves(), &format!("landscape of the {class} example")),
        )?;
        write_svg(out, &names[2], &svg::landscape_svg(&v.curves, &format!("virtual {class} landscape")))?;
        panels.extend(names);
        println!(
            "{class}: virtual point at offset {:.3} (reduced-space distance {:.3}), extreme example line {} at distance {:.3}",
            v.point.offset,
            projected / model.svm.norm_w(),
            ex.line,
            dist
        );
    }
    write_json(
        &out.out.join(format!("interpret_{}.json", pair_tag(pair))),
        &InterpretJson {
            pair: [&pair.0, &pair.1],
            data: DATA,
            annotations: members.len(),
            virtual_points,
            side_check,
            extremes: extreme_json,
            panels,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("sugar:flowers").unwrap(), ("sugar".into(), "flowers".into()));
        assert!(parse_pair("sugar").is_err());
        assert!(parse_pair("a:a").is_err());
        assert!(parse_pair(":b").is_err());
    }

    #[test]
    fn percent_format() {
        assert_eq!(percent(0.8925), "89.25%");
        assert_eq!(percent(1.0), "100.00%");
        assert_eq!(percent(0.57), "57.00%");
    }

    #[test]
    fn exit_codes() {
        let io = anyhow::Error::from(std::io::Error::other("x"));
        assert_eq!(exit_code(&io), 2);
        let domain = anyhow::Error::from(tda_texture::Error::ZeroNormal);
        assert_eq!(exit_code(&domain.context("while training")), 1);
        assert_eq!(exit_code(&anyhow!(UsageError("u".into()))), 2);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a.pgm:3"), "a.pgm:3");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
