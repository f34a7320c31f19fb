//! One function per subcommand. Reports go to files; `score` prints to stdout.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ntk_lab::bench::{annotate_metrics, build_oracle_benchmark, read_benchmark, write_benchmark, BenchPlan};
use ntk_lab::data::{make_dataset, Dataset};
use ntk_lab::eval::{Evaluator, SeedPlan};
use ntk_lab::linalg::DenseMatrix;
use ntk_lab::metrics::{evaluate, parse_metric_list, MetricId};
use ntk_lab::net::{GradientSet, Mode};
use ntk_lab::ntk::{compute_ntk, kernel_correlation, relative_kernel_difference, KernelMatrix};
use ntk_lab::rank::{decile_analysis, decile_csv, rank_correlation_report, report_csv, CachedSource};
use ntk_lab::rng::derive_seed;
use ntk_lab::search::{run_search, LgaScorer, SearchConfig, SearchResult};
use ntk_lab::space::CellEncoding;
use ntk_lab::train::evaluate_accuracy;
use ntk_lab::{Error, Result};

use crate::config::RunConfig;

/// Stream of the run seed reserved for decile resampling.
const DECILE_STREAM: u64 = 4;

fn evaluator(cfg: &RunConfig) -> Result<Evaluator> {
    let study = cfg.study()?;
    match &cfg.data {
        Some(path) => Evaluator::with_dataset(study, Dataset::read(path)?),
        None => Evaluator::new(study),
    }
}

fn parse_list<T>(s: &str, what: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(f).collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty {what} list")));
    }
    Ok(items)
}

fn parse_epochs(s: &str) -> Result<Vec<usize>> {
    parse_list(s, "epoch", |p| p.parse().map_err(|_| Error::Config(format!("invalid epoch '{p}'"))))
}

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    parse_list(s, "mode", str::parse)
}

fn parse_arch(s: &str, ev: &Evaluator) -> Result<CellEncoding> {
    CellEncoding::parse(s, ev.space()).map_err(|e| match e {
        Error::Contract(msg) => Error::Config(format!("--arch: {msg}")),
        other => other,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn report(cfg: &RunConfig, command: &str, context: &str, body: &str) -> String {
    let mut out = cfg.provenance(command);
    writeln!(out, "# context = \"{context}\"").expect("write to string");
    out.push_str(body);
    out
}

pub fn oracle(cfg: &RunConfig, bench: Option<&Path>, snapshots: &str, metrics: &str, modes: &str) -> Result<()> {
    let ev = evaluator(cfg)?;
    let plan = BenchPlan {
        snapshot_epochs: parse_epochs(snapshots)?.into_iter().collect(),
        metrics: parse_metric_list(metrics)?,
        modes: parse_modes(modes)?,
    };
    let path = cfg.output(bench, "bench.jsonl");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let summary = build_oracle_benchmark(&ev, &plan, &path, cfg.jobs)?;
    eprintln!(
        "{}: {} existing, {} trained (context {})",
        path.display(),
        summary.existing,
        summary.trained,
        ev.context()
    );
    Ok(())
}

pub fn score(cfg: &RunConfig, arch: &str, metric: &str, t: usize) -> Result<()> {
    let ev = evaluator(cfg)?;
    let enc = parse_arch(arch, &ev)?;
    let metric: MetricId = metric.parse()?;
    let mode = cfg.mode()?;
    let h = ev.train_arch(&enc, Some(t), &[t].into_iter().collect())?;
    let v = evaluate(metric, &ev.kernel(&h.snapshots[&t], mode)?, ev.probe().labels())?;
    println!("arch,metric,t,mode,value,degenerate");
    println!("{enc},{metric},{t},{mode},{},{}", v.value, v.degenerate);
    Ok(())
}

fn load_records(
    cfg: &RunConfig,
    ev: &Evaluator,
    bench: &Path,
    plan: &BenchPlan,
    recompute: bool,
) -> Result<Vec<ntk_lab::bench::BenchmarkRecord>> {
    let mut records = read_benchmark(bench)?;
    if records.is_empty() {
        return Err(Error::Config(format!("{} holds no records", bench.display())));
    }
    if recompute {
        let added = annotate_metrics(ev, &mut records, plan, cfg.jobs)?;
        if added > 0 {
            write_benchmark(bench, &records)?;
            eprintln!("cached {added} new metric values in {}", bench.display());
        }
    }
    Ok(records)
}

pub fn rankcorr(
    cfg: &RunConfig,
    bench: &Path,
    metrics: &str,
    t: &str,
    modes: Option<&str>,
    recompute: bool,
    out: Option<&Path>,
) -> Result<()> {
    let ev = evaluator(cfg)?;
    let metrics = parse_metric_list(metrics)?;
    let epochs = parse_epochs(t)?;
    let modes = match modes {
        Some(m) => parse_modes(m)?,
        None => vec![cfg.mode()?],
    };
    let plan = BenchPlan { snapshot_epochs: epochs.iter().copied().collect(), metrics: metrics.clone(), modes: modes.clone() };
    let records = load_records(cfg, &ev, bench, &plan, recompute)?;
    let source = CachedSource { context: ev.context().to_string() };
    let rows = rank_correlation_report(&records, &source, &metrics, &epochs, &modes)?;
    write_file(&cfg.output(out, "rankcorr.csv"), &report(cfg, "rankcorr", ev.context(), &report_csv(&rows)))
}

#[allow(clippy::too_many_arguments)]
pub fn decile(
    cfg: &RunConfig,
    bench: &Path,
    metric: &str,
    t: usize,
    seeds: usize,
    per_decile: usize,
    recompute: bool,
    out: Option<&Path>,
) -> Result<()> {
    let ev = evaluator(cfg)?;
    let metric: MetricId = metric.parse()?;
    let mode = cfg.mode()?;
    let plan = BenchPlan { snapshot_epochs: [t].into_iter().collect(), metrics: vec![metric], modes: vec![mode] };
    let records = load_records(cfg, &ev, bench, &plan, recompute)?;
    let source = CachedSource { context: ev.context().to_string() };
    let base = derive_seed(cfg.seed, DECILE_STREAM);
    let r = decile_analysis(&records, &source, metric, t, mode, seeds, per_decile, base)?;
    write_file(&cfg.output(out, "decile.csv"), &report(cfg, "decile", ev.context(), &decile_csv(&r)))
}

fn or_na(v: Result<f64>) -> Result<String> {
    match v {
        Ok(x) => Ok(format!("{x:.6}")),
        Err(Error::DegenerateVariance(_) | Error::DegenerateKernel(_)) => Ok("NA".into()),
        Err(e) => Err(e),
    }
}

pub fn ntk_evolution(cfg: &RunConfig, arch: &str, epochs: Option<usize>, out: Option<&Path>) -> Result<()> {
    if cfg.probe_size == 0 {
        return Err(Error::Config("probe size must be at least 1".into()));
    }
    // A single-sample probe reuses the first sample of a two-sample probe.
    let single = cfg.probe_size == 1;
    let ev = if single { evaluator(&RunConfig { probe_size: 2, ..cfg.clone() })? } else { evaluator(cfg)? };
    let enc = parse_arch(arch, &ev)?;
    let mode = cfg.mode()?;
    let epochs = epochs.unwrap_or(cfg.epochs);
    let snaps: BTreeSet<usize> = (0..=epochs).collect();
    let h = ev.train_arch(&enc, Some(epochs), &snaps)?;
    let kernel = |e: usize| -> Result<KernelMatrix> {
        let net = &h.snapshots[&e];
        if single {
            let g = net.per_sample_gradient(&ev.probe().samples()[0], mode)?;
            let p = g.len();
            Ok(KernelMatrix::from_gradients(&GradientSet::from_matrix(DenseMatrix::new(1, p, g)?)))
        } else {
            compute_ntk(net, ev.probe(), mode)
        }
    };
    let theta0 = kernel(0)?;
    let mut body = String::from("epoch,kernel_correlation,relative_kernel_difference,test_accuracy\n");
    for e in 0..=epochs {
        let theta = kernel(e)?;
        let acc = evaluate_accuracy(&h.snapshots[&e], &ev.dataset().test)?;
        let corr = if single { "NA".to_string() } else { or_na(kernel_correlation(&theta0, &theta))? };
        let diff = or_na(relative_kernel_difference(&theta0, &theta))?;
        writeln!(body, "{e},{corr},{diff},{acc:.6}").expect("write to string");
    }
    let label = format!("ntk-evolution --arch {enc}");
    write_file(&cfg.output(out, "evolution.csv"), &report(cfg, &label, ev.context(), &body))
}

fn search_json(cfg: &RunConfig, command: &str, ev: &Evaluator, result: &SearchResult) -> Result<String> {
    let parsed: serde_json::Value = serde_json::from_str(&result.to_json()).expect("search result is valid JSON");
    let doc = serde_json::json!({
        "command": command,
        "config": cfg.recorded(),
        "context": ev.context(),
        "result": parsed,
    });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Contract(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn search(cfg: &RunConfig, command: &str, sc: SearchConfig, t: usize, default_out: &str, out: Option<&Path>) -> Result<()> {
    let ev = evaluator(cfg)?;
    let scorer = LgaScorer { evaluator: &ev, t, mode: cfg.mode()? };
    let result = run_search(&SearchConfig { seed: ev.seeds().search(), ..sc }, ev.space(), &scorer)?;
    eprintln!("best {} with LGA {:.6} after {} evaluations", result.best_arch, result.best_score, result.evaluations);
    if result.all_degenerate {
        eprintln!("warning: every candidate produced a degenerate kernel");
    }
    write_file(&cfg.output(out, default_out), &search_json(cfg, command, &ev, &result)?)
}

pub fn randsearch(cfg: &RunConfig, n: usize, t: usize, without_replacement: bool, out: Option<&Path>) -> Result<()> {
    let sc = SearchConfig { without_replacement, ..SearchConfig::random(n, t, 0) };
    search(cfg, "randsearch", sc, t, "randsearch.json", out)
}

pub fn evolve(cfg: &RunConfig, n: usize, budget: usize, t: usize, out: Option<&Path>) -> Result<()> {
    search(cfg, "evolve", SearchConfig::evolution(n, budget, t, 0), t, "evolve.json", out)
}

pub fn gen_data(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let ds = make_dataset(cfg.classes, cfg.input_dim, cfg.per_class, cfg.spread, SeedPlan::new(cfg.seed).data())
        .map_err(|e| Error::Config(e.to_string()))?;
    let path = cfg.output(out, "data.txt");
    write_file(&path, &ds.to_text())
}
