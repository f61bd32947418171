//! `shapeloss` command-line tool: descriptors, reconstructions, synthetic
//! data, training, evaluation and loss comparisons.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or invalid configuration,
//! 3 domain error (for example an object too small to describe).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use rayon::prelude::*;

use shapeloss::data::{sample_name, Dataset, DatasetSpec, GenParams, Partition, SplitCounts};
use shapeloss::fourier;
use shapeloss::io;
use shapeloss::metrics::{MeanStd, MetricSummary};
use shapeloss::trainer::{self, Evaluation, LossKind, RunLog, TrainConfig};
use shapeloss::ShapeError;

#[derive(Parser, Debug)]
#[command(
    name = "shapeloss",
    version,
    about = "Shape-aware segmentation loss toolkit"
)]
#[command(args_override_self = true)]
struct Cli {
    /// Plain-text `key = value` file; its entries override command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print harmonic amplitudes Z_1..Z_N of the largest object in a mask.
    Describe {
        mask: PathBuf,
        #[arg(long, default_value_t = 8)]
        order: usize,
        /// Descriptor CSV output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write filled reconstructions of the largest object for several orders.
    Reconstruct {
        mask: PathBuf,
        #[arg(long, action = ArgAction::Set, value_delimiter = ',', num_args = 1.., required = true)]
        orders: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset directory.
    Generate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration; writes model.bin, runlog.jsonl and metrics.csv.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model or a directory of predicted masks.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(
            long,
            conflicts_with = "pred_dir",
            required_unless_present = "pred_dir"
        )]
        model: Option<PathBuf>,
        /// Directory holding `<id>_pred.pbm` (or `.pgm`) files.
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Per-image metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every loss kind for every seed; writes summary.csv and runs.csv.
    Compare {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "cross-entropy,fourier-adaptive,fourier-fixed")]
        losses: Vec<String>,
        #[arg(long, action = ArgAction::Set, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Sweep the number of harmonics (ω defaults to 3, 1, 1, ...).
        #[arg(long, action = ArgAction::Set, value_delimiter = ',', conflicts_with = "omega_inits")]
        orders: Vec<usize>,
        /// Sweep initial ω vectors, e.g. `--omega-inits 3:1,1:1`.
        #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
        omega_inits: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Dataset directory written by `generate`; without it the dataset is
    /// generated in memory from the flags below.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    data_seed: u64,
    #[arg(long, default_value_t = 200)]
    train_count: usize,
    #[arg(long, default_value_t = 50)]
    val_count: usize,
    #[arg(long, default_value_t = 100)]
    test_count: usize,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 96)]
    height: usize,
    #[arg(long, default_value_t = 0.05)]
    contrast: f64,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 3)]
    harmonics: u32,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long, default_value = "fourier-adaptive")]
    loss: String,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Comma-separated initial ω; defaults to 3, 1, 1, ...
    #[arg(long, action = ArgAction::Set, value_delimiter = ',')]
    omega_init: Vec<f64>,
    #[arg(long, default_value_t = 5e-2)]
    param_lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    omega_lr: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 60)]
    max_epochs: usize,
    /// Epochs without improvement before stopping, or `none`.
    #[arg(long, default_value = "10")]
    patience: String,
    #[arg(long, default_value_t = 5)]
    warmup_epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "largest")]
    match_mode: String,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

/// A failed command with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ShapeError> for Failure {
    fn from(e: ShapeError) -> Self {
        let code = match e {
            ShapeError::InvalidOrder { .. } => 1,
            _ if !e.is_domain() => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        ShapeError::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn with_path<T>(path: &Path, r: shapeloss::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

/// Parses `key = value` lines; `#` starts a comment.
fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", no + 1))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(format!("line {}: invalid key `{}`", no + 1, key));
        }
        if key == "config" {
            return Err(format!("line {}: `config` cannot be nested", no + 1));
        }
        out.push((key, value.to_string()));
    }
    Ok(out)
}

fn parse_cli(args: Vec<OsString>) -> Result<Cli, Failure> {
    let cli = Cli::try_parse_from(&args).map_err(|e| {
        let code = if e.use_stderr() { 1 } else { 0 };
        let _ = e.print();
        Failure {
            code,
            message: String::new(),
        }
    })?;
    let Some(path) = cli.config.clone() else {
        return Ok(cli);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let entries = parse_config_file(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut extended = args;
    for (k, v) in entries {
        extended.push(format!("--{k}").into());
        extended.push(v.into());
    }
    Cli::try_parse_from(&extended).map_err(|e| {
        let detail = e.to_string();
        let first = detail
            .lines()
            .next()
            .unwrap_or("")
            .trim_start_matches("error: ")
            .to_string();
        Failure::config(format!("{}: invalid config: {first}", path.display()))
    })
}

fn main() -> ExitCode {
    let result = parse_cli(std::env::args_os().collect()).and_then(|cli| run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Describe { mask, order, out } => cmd_describe(&mask, order, out.as_deref()),
        Command::Reconstruct { mask, orders, out } => cmd_reconstruct(&mask, &orders, &out),
        Command::Generate { data, out } => cmd_generate(&data, &out),
        Command::Train { data, train, out } => cmd_train(&data, &train, &out),
        Command::Eval {
            data,
            model,
            pred_dir,
            split,
            out,
        } => cmd_eval(
            &data,
            model.as_deref(),
            pred_dir.as_deref(),
            &split,
            out.as_deref(),
        ),
        Command::Compare {
            data,
            train,
            losses,
            seeds,
            orders,
            omega_inits,
            out,
        } => cmd_compare(&data, &train, &losses, &seeds, &orders, &omega_inits, &out),
    }
}

fn cmd_describe(path: &Path, order: usize, out: Option<&Path>) -> CmdResult {
    if order == 0 {
        return Err(Failure::usage("--order must be at least 1"));
    }
    let mask = with_path(path, io::read_mask(path))?;
    let shape = with_path(path, fourier::describe_largest(&mask, order))?;
    let d = &shape.descriptors;
    println!("a0 = {}", d.a0);
    println!("L = {}", d.total_length);
    for (n, z) in d.amplitudes.iter().enumerate() {
        println!("Z_{} = {}", n + 1, z);
    }
    if let Some(out) = out {
        fs::write(out, d.to_csv())?;
    }
    Ok(())
}

fn cmd_reconstruct(path: &Path, orders: &[usize], out: &Path) -> CmdResult {
    if orders.is_empty() {
        return Err(Failure::usage("--orders needs at least one order"));
    }
    if orders.contains(&0) {
        return Err(Failure::usage("orders must be at least 1"));
    }
    let mask = with_path(path, io::read_mask(path))?;
    let max = *orders.iter().max().expect("non-empty");
    let shape = with_path(path, fourier::describe_largest(&mask, max))?;
    fs::create_dir_all(out)?;
    for &n in orders {
        let rec = fourier::reconstruct_mask(&shape, n, mask.width(), mask.height());
        let file = out.join(format!("reconstruction_order_{n}.pbm"));
        io::write_pbm(&file, &rec)?;
        println!(
            "order {n}: iou {:.6} -> {}",
            mask.iou(&rec)?,
            file.display()
        );
    }
    Ok(())
}

fn dataset_spec(a: &DataArgs) -> DatasetSpec {
    DatasetSpec {
        seed: a.data_seed,
        counts: SplitCounts {
            train: a.train_count,
            val: a.val_count,
            test: a.test_count,
        },
        params: GenParams {
            width: a.width,
            height: a.height,
            contrast: a.contrast,
            noise_sigma: a.noise,
            harmonics: a.harmonics,
        },
    }
}

fn load_dataset(a: &DataArgs) -> Result<Dataset, Failure> {
    match &a.data {
        Some(dir) => with_path(dir, Dataset::load(dir)),
        None => Dataset::generate(dataset_spec(a)).map_err(|e| Failure::config(e.to_string())),
    }
}

fn cmd_generate(a: &DataArgs, out: &Path) -> CmdResult {
    let ds = Dataset::generate(dataset_spec(a)).map_err(|e| Failure::config(e.to_string()))?;
    ds.save(out)?;
    println!("wrote {} samples to {}", ds.samples.len(), out.display());
    Ok(())
}

fn default_omegas(order: usize) -> Vec<f64> {
    (0..order).map(|n| if n == 0 { 3.0 } else { 1.0 }).collect()
}

fn train_config(t: &TrainArgs) -> Result<TrainConfig, Failure> {
    let bad = |e: ShapeError| Failure::config(e.to_string());
    let patience = match t.patience.as_str() {
        "none" => None,
        p => Some(p.parse::<usize>().map_err(|_| {
            Failure::config(format!("patience must be a count or `none`, got `{p}`"))
        })?),
    };
    let omega_init = if t.omega_init.is_empty() {
        default_omegas(t.order)
    } else {
        t.omega_init.clone()
    };
    let cfg = TrainConfig {
        loss_kind: t.loss.parse().map_err(bad)?,
        order: t.order,
        omega_init,
        param_lr: t.param_lr,
        omega_lr: t.omega_lr,
        batch_size: t.batch_size,
        max_epochs: t.max_epochs,
        patience,
        warmup_epochs: t.warmup_epochs,
        seed: t.seed,
        match_mode: t.match_mode.parse().map_err(bad)?,
        alpha: t.alpha,
        lambda: t.lambda,
    };
    cfg.validate().map_err(bad)?;
    Ok(cfg)
}

fn summary_line(s: &MetricSummary) -> String {
    let hd = if s.hausdorff.count > 0 {
        format!("{:.3}", s.hausdorff.mean)
    } else {
        "NA".into()
    };
    format!(
        "precision {:.4} recall {:.4} fscore {:.4} iou {:.4} hausdorff {hd} (undefined for {})",
        s.precision.mean, s.recall.mean, s.fscore.mean, s.iou.mean, s.hausdorff_missing
    )
}

fn cmd_train(d: &DataArgs, t: &TrainArgs, out: &Path) -> CmdResult {
    let cfg = train_config(t)?;
    let ds = load_dataset(d)?;
    let (net, log) = trainer::train(&cfg, &ds)?;
    fs::create_dir_all(out)?;
    trainer::save_model(out.join("model.bin"), &net, &cfg)?;
    fs::write(out.join("runlog.jsonl"), log.to_jsonl())?;
    let ev = trainer::evaluate(&net, &ds, Partition::Test)?;
    fs::write(out.join("metrics.csv"), ev.to_csv())?;
    println!(
        "{}: stopped at epoch {} ({:?}); test {}",
        cfg.loss_kind,
        log.stop_epoch,
        log.stop_reason,
        summary_line(&ev.summary)
    );
    Ok(())
}

fn read_prediction(dir: &Path, name: &str) -> Result<shapeloss::BinaryMask, Failure> {
    for ext in ["pbm", "pgm"] {
        let p = dir.join(format!("{name}_pred.{ext}"));
        if p.exists() {
            return with_path(&p, io::read_mask(&p));
        }
    }
    Err(Failure::config(format!(
        "{}: no prediction file {name}_pred.pbm or {name}_pred.pgm",
        dir.display()
    )))
}

fn cmd_eval(
    d: &DataArgs,
    model: Option<&Path>,
    pred_dir: Option<&Path>,
    split: &str,
    out: Option<&Path>,
) -> CmdResult {
    let part: Partition = split
        .parse()
        .map_err(|e: ShapeError| Failure::usage(e.to_string()))?;
    let ds = load_dataset(d)?;
    let ev: Evaluation = match (model, pred_dir) {
        (Some(m), _) => {
            let (net, _) = with_path(m, trainer::load_model(m))?;
            trainer::evaluate(&net, &ds, part)?
        }
        (None, Some(dir)) => {
            let mut triples = Vec::new();
            for &id in ds.ids(part) {
                let name = sample_name(id);
                let pred = read_prediction(dir, &name)?;
                triples.push((name, ds.samples[id].mask.clone(), pred));
            }
            trainer::evaluate_predictions(&triples)?
        }
        (None, None) => return Err(Failure::usage("either --model or --pred-dir is required")),
    };
    if let Some(out) = out {
        fs::write(out, ev.to_csv())?;
    }
    println!("{} images: {}", ev.rows.len(), summary_line(&ev.summary));
    Ok(())
}

struct Variant {
    label: String,
    order: usize,
    omegas: Vec<f64>,
}

fn parse_omega_vector(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(':')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("invalid ω vector `{s}`")))
        })
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(":")
}

struct RunRow {
    loss: LossKind,
    variant: usize,
    seed: u64,
    log: RunLog,
    summary: MetricSummary,
}

fn pct(m: &MeanStd) -> String {
    format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.std)
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    d: &DataArgs,
    t: &TrainArgs,
    losses: &[String],
    seeds: &[u64],
    orders: &[usize],
    omega_inits: &[String],
    out: &Path,
) -> CmdResult {
    let base = train_config(t)?;
    let kinds = losses
        .iter()
        .map(|l| {
            l.parse::<LossKind>()
                .map_err(|e| Failure::config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if kinds.is_empty() || seeds.is_empty() {
        return Err(Failure::config(
            "compare needs at least one loss and one seed",
        ));
    }
    let variants: Vec<Variant> = if !omega_inits.is_empty() {
        omega_inits
            .iter()
            .map(|s| {
                let w = parse_omega_vector(s)?;
                Ok(Variant {
                    label: format!("omega={}", fmt_list(&w)),
                    order: w.len(),
                    omegas: w,
                })
            })
            .collect::<Result<_, Failure>>()?
    } else if !orders.is_empty() {
        orders
            .iter()
            .map(|&n| Variant {
                label: format!("N={n}"),
                order: n,
                omegas: default_omegas(n),
            })
            .collect()
    } else {
        vec![Variant {
            label: String::new(),
            order: base.order,
            omegas: base.omega_init.clone(),
        }]
    };
    let mut cells = Vec::new();
    for (vi, v) in variants.iter().enumerate() {
        for &loss in &kinds {
            for &seed in seeds {
                let cfg = TrainConfig {
                    loss_kind: loss,
                    order: v.order,
                    omega_init: v.omegas.clone(),
                    seed,
                    ..base.clone()
                };
                cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
                cells.push((vi, cfg));
            }
        }
    }
    let ds = load_dataset(d)?;
    let rows = cells
        .par_iter()
        .map(|(vi, cfg)| -> Result<RunRow, Failure> {
            let (net, log) = trainer::train(cfg, &ds)?;
            let ev = trainer::evaluate(&net, &ds, Partition::Test)?;
            Ok(RunRow {
                loss: cfg.loss_kind,
                variant: *vi,
                seed: cfg.seed,
                log,
                summary: ev.summary,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let logs = out.join("logs");
    fs::create_dir_all(&logs)?;
    let label = |r: &RunRow| {
        let v = &variants[r.variant].label;
        if v.is_empty() {
            r.loss.to_string()
        } else {
            format!("{} {v}", r.loss)
        }
    };
    let mut runs = String::from(
        "loss,variant,seed,stop_epoch,stop_reason,precision,recall,fscore,iou,hausdorff,hausdorff_missing,final_omega\n",
    );
    for r in &rows {
        let file = format!(
            "{}_seed{}.jsonl",
            label(r).replace([' ', '=', ':'], "_"),
            r.seed
        );
        fs::write(logs.join(file), r.log.to_jsonl())?;
        let s = &r.summary;
        let _ = writeln!(
            runs,
            "{},{},{},{},{:?},{},{},{},{},{},{},{}",
            r.loss,
            variants[r.variant].label,
            r.seed,
            r.log.stop_epoch,
            r.log.stop_reason,
            s.precision.mean,
            s.recall.mean,
            s.fscore.mean,
            s.iou.mean,
            if s.hausdorff.count > 0 {
                s.hausdorff.mean.to_string()
            } else {
                "NA".into()
            },
            s.hausdorff_missing,
            fmt_list(&r.log.final_record().omegas)
        );
    }
    fs::write(out.join("runs.csv"), runs)?;

    // One row per (loss, variant): mean ± std over seeds of the per-run test means.
    let mut groups: BTreeMap<(usize, usize), Vec<&RunRow>> = BTreeMap::new();
    for r in &rows {
        let ki = kinds.iter().position(|k| *k == r.loss).expect("known kind");
        groups.entry((r.variant, ki)).or_default().push(r);
    }
    let mut summary = String::from("loss,precision,recall,fscore,iou,hausdorff\n");
    for group in groups.values() {
        let stat = |f: fn(&MetricSummary) -> f64| {
            MeanStd::of(&group.iter().map(|r| f(&r.summary)).collect::<Vec<_>>())
        };
        let hd: Vec<f64> = group
            .iter()
            .filter(|r| r.summary.hausdorff.count > 0)
            .map(|r| r.summary.hausdorff.mean)
            .collect();
        let hd_cell = if hd.is_empty() {
            "NA".to_string()
        } else {
            let m = MeanStd::of(&hd);
            format!("{:.2} ± {:.2}", m.mean, m.std)
        };
        let line = format!(
            "{},{},{},{},{},{}",
            label(group[0]),
            pct(&stat(|s| s.precision.mean)),
            pct(&stat(|s| s.recall.mean)),
            pct(&stat(|s| s.fscore.mean)),
            pct(&stat(|s| s.iou.mean)),
            hd_cell
        );
        println!("{}", line.replace(',', "  "));
        summary.push_str(&line);
        summary.push('\n');
    }
    fs::write(out.join("summary.csv"), summary)?;
    println!("{} runs; tables in {}", rows.len(), out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use shapeloss::loss::MatchMode;

    #[test]
    fn config_file_parsing() {
        let text = "# comment\nseed = 4\n\nmax_epochs = 2 # trailing\n";
        assert_eq!(
            parse_config_file(text).unwrap(),
            vec![
                ("seed".to_string(), "4".to_string()),
                ("max-epochs".to_string(), "2".to_string())
            ]
        );
        assert!(parse_config_file("seed 4").is_err());
        assert!(parse_config_file("config = other.cfg").is_err());
        assert!(parse_config_file("bad key = 1").is_err());
    }

    #[test]
    fn default_omega_pattern() {
        assert_eq!(default_omegas(1), vec![3.0]);
        assert_eq!(default_omegas(4), vec![3.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn match_mode_flag_parses() {
        assert_eq!(
            "iou-threshold".parse::<MatchMode>().unwrap(),
            MatchMode::IouThreshold
        );
    }
}
