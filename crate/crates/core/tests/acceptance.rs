//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a non-zero status if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ntk_lab::bench::{build_oracle_benchmark, read_benchmark, BenchPlan, BenchmarkRecord};
use ntk_lab::eval::{DataConfig, Evaluator, StudyConfig};
use ntk_lab::init::InitScheme;
use ntk_lab::linalg::{frobenius_norm, jacobi_eigen, pearson_correlation, JACOBI_DEFAULT_TOL};
use ntk_lab::metrics::{f_norm_metric, label_matrix, lga_metric, ncn_metric, MetricId};
use ntk_lab::net::{LayerSpec, Mode, NetworkBuilder};
use ntk_lab::ntk::{compute_ntk, kernel_correlation, relative_kernel_difference, KernelMatrix, ProbeBatch};
use ntk_lab::rank::{kendall_tau, rank_correlation_report, CachedSource, MetricReport};
use ntk_lab::rng::Rng;
use ntk_lab::search::{random_search, regularized_evolution, Score, Scorer, SearchConfig, TableScorer};
use ntk_lab::space::{instantiate, sample_random, CellEncoding, Op, SpaceConfig};
use ntk_lab::train::TrainConfig;

use common::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn toy_study(seed: u64, scheme: InitScheme) -> StudyConfig {
    StudyConfig {
        space: SpaceConfig::with_shape(3, 3),
        data: DataConfig { per_class: 60, spread: 0.3 },
        train: TrainConfig { epochs: 30, ..TrainConfig::default() },
        scheme,
        probe_size: 32,
        seed,
    }
}

const DATASET_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Toy {
    evaluator: Evaluator,
    records: Vec<BenchmarkRecord>,
}

fn build_toy(seed: u64, scheme: InitScheme, jobs: usize, dir: &std::path::Path) -> Result<(Toy, Vec<u8>), String> {
    let ev = Evaluator::new(toy_study(seed, scheme)).map_err(|e| e.to_string())?;
    let path = dir.join(format!("bench-{seed}-{}-{jobs}.jsonl", scheme.tag()));
    let _ = std::fs::remove_file(&path);
    build_oracle_benchmark(&ev, &BenchPlan::default(), &path, jobs).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    let records = read_benchmark(&path).map_err(|e| e.to_string())?;
    Ok((Toy { evaluator: ev, records }, bytes))
}

fn report(toy: &Toy, metrics: &[MetricId], epochs: &[usize], modes: &[Mode]) -> Result<Vec<MetricReport>, String> {
    let src = CachedSource { context: toy.evaluator.context().to_string() };
    rank_correlation_report(&toy.records, &src, metrics, epochs, modes).map_err(|e| e.to_string())
}

fn c1_gradient_oracle() -> Outcome {
    let space = SpaceConfig::with_shape(3, 5);
    let mut rng = Rng::new(101);
    let mut worst: f64 = 0.0;
    let mut coords = 0usize;
    for _ in 0..100 {
        let enc = sample_random(&space, &mut rng);
        let net = instantiate(&enc, &space, InitScheme::Kaiming, &mut rng).map_err(|e| e.to_string())?;
        let x = unit_vector(space.input_dim, &mut rng);
        let g = net.per_sample_gradient(&x, Mode::Eval).map_err(|e| e.to_string())?;
        let fd = fd_readout_gradient(&net, &x, Mode::Eval, 1e-5);
        coords += g.iter().filter(|v| v.abs() > 1e-8).count();
        worst = worst.max(max_relative_error(&g, &fd, 1e-8));
    }
    check(worst <= 1e-5, format!("max relative error {worst:.3e} over {coords} coordinates (tol 1e-5)"))
}

fn c2_ntk_oracle() -> Outcome {
    let space = SpaceConfig::with_shape(3, 5);
    let mut rng = Rng::new(202);
    let (mut worst_rel, mut worst_asym, mut worst_psd): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for _ in 0..20 {
        let enc = sample_random(&space, &mut rng);
        let net = instantiate(&enc, &space, InitScheme::Kaiming, &mut rng).map_err(|e| e.to_string())?;
        let xs: Vec<Vec<f64>> = (0..6).map(|_| unit_vector(space.input_dim, &mut rng)).collect();
        let probe = ProbeBatch::new(xs.clone(), vec![0, 1, 2, 0, 1, 2]).map_err(|e| e.to_string())?;
        let theta = compute_ntk(&net, &probe, Mode::Eval).map_err(|e| e.to_string())?;
        let jac: Vec<Vec<f64>> = xs.iter().map(|x| fd_readout_gradient(&net, x, Mode::Eval, 1e-5)).collect();
        let oracle = gram(&jac);
        for i in 0..6 {
            for j in 0..6 {
                let (a, b) = (theta.get(i, j), oracle[i][j]);
                if a.abs() > 1e-8 {
                    worst_rel = worst_rel.max((a - b).abs() / a.abs());
                }
            }
        }
        worst_asym = worst_asym.max(theta.matrix().max_asymmetry());
        let norm = frobenius_norm(theta.matrix());
        if norm > 0.0 {
            let lmin = jacobi_eigen(theta.matrix(), JACOBI_DEFAULT_TOL).map_err(|e| e.to_string())?.min();
            worst_psd = worst_psd.min(lmin / norm);
        }
    }
    check(
        worst_rel <= 1e-4 && worst_asym <= 1e-10 && worst_psd >= -1e-8,
        format!("entrywise rel err {worst_rel:.3e} (tol 1e-4), asymmetry {worst_asym:.1e}, min λ/‖Θ‖ {worst_psd:.3e}"),
    )
}

fn c3_linear_kernel() -> Outcome {
    let mut rng = Rng::new(303);
    let d = 5;
    let mut b = NetworkBuilder::new(d);
    b.add_node(1, vec![(0, vec![LayerSpec::Linear { outputs: 1, bias: false }])]).map_err(|e| e.to_string())?;
    let net = b.build(InitScheme::Kaiming, &mut rng).map_err(|e| e.to_string())?;
    let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let probe = ProbeBatch::new(xs.clone(), vec![0, 1, 0, 1, 0, 1, 0]).map_err(|e| e.to_string())?;
    let theta = compute_ntk(&net, &probe, Mode::Eval).map_err(|e| e.to_string())?;
    let xxt = gram(&xs);
    let worst = (0..7).flat_map(|i| (0..7).map(move |j| (i, j))).map(|(i, j)| (theta.get(i, j) - xxt[i][j]).abs()).fold(0.0, f64::max);
    check(worst <= 1e-10, format!("max |Θ - XXᵀ| = {worst:.2e} (tol 1e-10)"))
}

fn c4_eigensolver() -> Outcome {
    let mut rng = Rng::new(404);
    let (mut worst_res, mut worst_orth, mut worst_char): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut threes = 0;
    for k in 0..200 {
        let n = 1 + k % 32;
        let a = if k % 2 == 0 { random_symmetric(n, &mut rng) } else { random_psd(n, &mut rng) };
        let e = jacobi_eigen(&a, JACOBI_DEFAULT_TOL).map_err(|e| e.to_string())?;
        let scale = frobenius_norm(&a).max(1.0);
        worst_res = worst_res.max(eigen_residuals(&a, &e).into_iter().fold(0.0, f64::max) / scale);
        worst_orth = worst_orth.max(orthonormality_error(&e));
        if !e.eigenvalues.windows(2).all(|w| w[0] <= w[1]) {
            return Err(format!("eigenvalues not ascending for n={n}"));
        }
        if n == 3 {
            threes += 1;
            let roots = eigen3_bisection(&a);
            for (x, y) in e.eigenvalues.iter().zip(roots) {
                worst_char = worst_char.max((x - y).abs());
            }
        }
    }
    check(
        worst_res <= 1e-8 && worst_orth <= 1e-8 && worst_char <= 1e-8,
        format!(
            "residual/max(1,‖A‖) {worst_res:.2e}, orthonormality {worst_orth:.2e}, 3x3 char-poly gap {worst_char:.2e} over {threes} instances (tol 1e-8)"
        ),
    )
}

fn c5_metric_identities() -> Outcome {
    let mut rng = Rng::new(505);
    let labels = [0, 0, 1, 1, 2, 2, 0, 1];
    let (mut fnorm, mut lga_p, mut lga_s, mut ncn_s): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..50 {
        let m = random_psd(8, &mut rng);
        let theta = KernelMatrix::new(m.clone()).map_err(|e| e.to_string())?;
        let e = jacobi_eigen(&m, JACOBI_DEFAULT_TOL).map_err(|e| e.to_string())?;
        let spectral = e.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
        let f = f_norm_metric(&theta).value;
        fnorm = fnorm.max((f - spectral).abs() / spectral);
        let l = lga_metric(&theta, &labels).map_err(|e| e.to_string())?.value;
        let lm = label_matrix(&labels).map_err(|e| e.to_string())?;
        lga_p = lga_p.max((l - pearson_correlation(&m, lm.matrix()).map_err(|e| e.to_string())?).abs());
        let n = ncn_metric(&theta).map_err(|e| e.to_string())?.value;
        for c in [1e-3, 1.0, 1e3] {
            let scaled = theta.scaled(c);
            lga_s = lga_s.max((lga_metric(&scaled, &labels).map_err(|e| e.to_string())?.value - l).abs());
            let ns = ncn_metric(&scaled).map_err(|e| e.to_string())?.value;
            ncn_s = ncn_s.max((ns - n).abs() / n.abs());
        }
    }
    check(
        fnorm <= 1e-9 && lga_p <= 1e-12 && lga_s <= 1e-12 && ncn_s <= 1e-10,
        format!("fnorm vs √Σλ² {fnorm:.1e}, lga vs pearson {lga_p:.1e}, lga scale {lga_s:.1e}, ncn scale {ncn_s:.1e} (relative)"),
    )
}

fn c6_kendall() -> Outcome {
    let mut rng = Rng::new(606);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let n = 2 + rng.index(60);
        let ties = k % 2 == 1;
        let draw = |rng: &mut Rng| if ties { rng.index(5) as f64 } else { rng.normal() };
        let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let ys: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        match kendall_tau(&xs, &ys) {
            Ok(t) => worst = worst.max((t - tau_pairs(&xs, &ys)).abs()),
            Err(ntk_lab::Error::TiedRanks) => {}
            Err(e) => return Err(e.to_string()),
        }
    }
    let seq: Vec<f64> = (1..=40).map(f64::from).collect();
    let rev: Vec<f64> = seq.iter().rev().copied().collect();
    let id = kendall_tau(&seq, &seq).map_err(|e| e.to_string())?;
    let anti = kendall_tau(&seq, &rev).map_err(|e| e.to_string())?;
    check(worst <= 1e-12 && id == 1.0 && anti == -1.0, format!("max gap to pair counting {worst:.1e}; identity {id}, reversed {anti}"))
}

fn c7_determinism(dir: &std::path::Path) -> Result<(String, Toy), String> {
    let start = Instant::now();
    let (toy, first) = build_toy(DATASET_SEEDS[0], InitScheme::Kaiming, 1, dir)?;
    let single = start.elapsed();
    let (_, second) = build_toy(DATASET_SEEDS[0], InitScheme::Kaiming, 0, dir)?;
    let detail = format!(
        "{} records, {} bytes, single-core build {:.1}s; second build (parallel) identical: {}",
        toy.records.len(),
        first.len(),
        single.as_secs_f64(),
        first == second
    );
    if first == second && toy.records.len() == 27 && single < Duration::from_secs(600) {
        Ok((detail, toy))
    } else {
        Err(detail)
    }
}

fn best_tau(rows: &[MetricReport]) -> f64 {
    rows.iter().filter_map(|r| r.tau).fold(f64::NEG_INFINITY, f64::max)
}

/// Every metric in the default (eval) normalization mode. The line also
/// reports the stricter variant where each baseline takes its better mode.
fn c8_lga_beats_baselines(first: &Toy, dir: &std::path::Path) -> Outcome {
    let baselines = [MetricId::FNorm, MetricId::Mean, MetricId::Ncn];
    let (mut wins, mut strict_wins) = (0, 0);
    let mut parts = Vec::new();
    for (k, &seed) in DATASET_SEEDS.iter().enumerate() {
        let built;
        let toy = if k == 0 {
            first
        } else {
            built = build_toy(seed, InitScheme::Kaiming, 0, dir)?.0;
            &built
        };
        let lga = report(toy, &[MetricId::Lga], &[3], &[Mode::Eval])?[0].tau;
        let base = best_tau(&report(toy, &baselines, &[0], &[Mode::Eval])?);
        let strict = best_tau(&report(toy, &baselines, &[0], &[Mode::Train, Mode::Eval])?);
        wins += lga.is_some_and(|l| l >= base) as usize;
        strict_wins += lga.is_some_and(|l| l >= strict) as usize;
        parts.push(format!("s{seed}: lga3={} base0={base:.4}", ntk_lab::rank::fmt_tau(lga)));
    }
    check(
        wins >= 4,
        format!("{wins}/5 seeds (need 4): {}; baselines at best mode: {strict_wins}/5", parts.join("; ")),
    )
}

fn mean_lga(toy: &Toy, idx: &[usize], t: usize) -> Result<f64, String> {
    let ctx = toy.evaluator.context();
    let vals: Vec<f64> = idx
        .iter()
        .map(|&i| toy.records[i].cached(MetricId::Lga, t, Mode::Eval, ctx).map(|v| v.value).ok_or("missing lga"))
        .collect::<Result<_, _>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

fn c9_lga_dynamics(toy: &Toy) -> Outcome {
    let order = ntk_lab::rank::accuracy_order(&toy.records).map_err(|e| e.to_string())?;
    let (top, bottom) = (&order[..5], &order[order.len() - 5..]);
    let (t0, t5) = (mean_lga(toy, top, 0)?, mean_lga(toy, top, 5)?);
    let (b0, b5) = (mean_lga(toy, bottom, 0)?, mean_lga(toy, bottom, 5)?);
    check(
        t5 > t0 && (b5 - b0).abs() < 0.05,
        format!("top-5 mean LGA {t0:.4} -> {t5:.4}; bottom-5 {b0:.4} -> {b5:.4} (|Δ| < 0.05)"),
    )
}

fn c10_kernel_evolution() -> Outcome {
    let cfg = StudyConfig {
        space: SpaceConfig::default(),
        data: DataConfig { per_class: 60, spread: 0.3 },
        train: TrainConfig { epochs: 5, ..TrainConfig::default() },
        seed: 10,
        ..StudyConfig::default()
    };
    let ev = Evaluator::new(cfg).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(1010);
    let mut picked = Vec::new();
    while picked.len() < 5 {
        let enc = sample_random(ev.space(), &mut rng);
        if trainable(&enc, ev.space()) {
            picked.push(enc);
        }
    }
    let snaps: BTreeSet<usize> = [0, 5].into_iter().collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for enc in &picked {
        let h = ev.train_arch(enc, None, &snaps).map_err(|e| e.to_string())?;
        let k0 = ev.kernel(&h.snapshots[&0], Mode::Eval).map_err(|e| e.to_string())?;
        let k5 = ev.kernel(&h.snapshots[&5], Mode::Eval).map_err(|e| e.to_string())?;
        let corr = kernel_correlation(&k0, &k5).map_err(|e| e.to_string())?;
        let diff = relative_kernel_difference(&k0, &k5).map_err(|e| e.to_string())?;
        ok &= corr <= 0.999 && diff >= 0.01;
        parts.push(format!("{enc}: corr {corr:.4} diff {diff:.4}"));
    }
    check(ok, parts.join("; "))
}

/// Some input-to-output path carries a trainable op and no zero op.
fn trainable(enc: &CellEncoding, space: &SpaceConfig) -> bool {
    let edges = space.edges();
    let ops: Vec<Op> = enc.ops().collect();
    // reach[j] = (reachable from input without zero ops, via a trainable op)
    let mut reach = vec![(false, false); space.nodes];
    reach[0] = (true, false);
    for j in 1..space.nodes {
        for ((from, to), op) in edges.iter().zip(&ops) {
            if *to == j && reach[*from].0 && *op != Op::Zero {
                reach[j].0 = true;
                reach[j].1 |= reach[*from].1 || op.is_trainable();
            }
        }
    }
    reach[space.nodes - 1] == (true, true)
}

fn c11_search(toy: &Toy) -> Outcome {
    let space = *toy.evaluator.space();
    let scorer = TableScorer::accuracy(&toy.records).map_err(|e| e.to_string())?;
    let best = toy.records.iter().map(|r| r.final_test_acc).fold(f64::MIN, f64::max);
    let mut exhaustive_ok = true;
    for seed in 0..10 {
        let cfg = SearchConfig { without_replacement: true, ..SearchConfig::random(27, 0, seed) };
        exhaustive_ok &= random_search(&cfg, &space, &scorer).map_err(|e| e.to_string())?.best_score == best;
    }
    let mut found = 0;
    for seed in 0..20 {
        let r = regularized_evolution(&SearchConfig::evolution(5, 40, 0, 1000 + seed), &space, &scorer)
            .map_err(|e| e.to_string())?;
        found += (r.best_score == best) as usize;
    }
    check(
        exhaustive_ok && found >= 18,
        format!("exhaustive random search optimal in all 10 seeds: {exhaustive_ok}; evolution hit the global best in {found}/20 (need 18)"),
    )
}

struct Hashed;

impl Scorer for Hashed {
    fn score(&self, enc: &CellEncoding) -> ntk_lab::Result<Score> {
        let h = enc.codes().iter().fold(17u64, |a, &c| ntk_lab::rng::mix64(a ^ c as u64));
        Ok(Score { value: (h >> 11) as f64, degenerate: false, epochs: 3 })
    }
}

fn c12_evolution_mechanics() -> Outcome {
    let space = SpaceConfig::default();
    let (n, steps) = (10, 200);
    let r = regularized_evolution(&SearchConfig::evolution(n, n + steps, 3, 12), &space, &Hashed).map_err(|e| e.to_string())?;
    let mut ok = r.pool_trace.len() == steps && r.evaluations <= r.budget && r.evaluations == n + steps;
    let mut pool: std::collections::VecDeque<usize> = (0..n).collect();
    for ev in &r.pool_trace {
        let oldest = pool.pop_front().expect("pool");
        pool.push_back(ev.step);
        ok &= ev.evicted == oldest && ev.pool.len() == n && ev.pool == pool.iter().copied().collect::<Vec<_>>();
    }
    ok &= r.log.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far);
    check(ok, format!("{} steps, pool size {n} throughout, {}/{} evaluations, FIFO evictions verified", r.pool_trace.len(), r.evaluations, r.budget))
}

fn c13_init_sensitivity(dir: &std::path::Path) -> Outcome {
    let metrics = MetricId::ALL;
    let epochs = [0, 1, 3, 5, 10];
    let modes = [Mode::Train, Mode::Eval];
    let mut reports = Vec::new();
    for scheme in [InitScheme::Xavier, InitScheme::Kaiming, InitScheme::gaussian()] {
        let (toy, _) = build_toy(DATASET_SEEDS[0], scheme, 0, dir)?;
        let rows = report(&toy, &metrics, &epochs, &modes)?;
        reports.push((scheme, ntk_lab::rank::report_csv(&rows), rows));
    }
    let distinct = reports[0].1 != reports[1].1 && reports[1].1 != reports[2].1 && reports[0].1 != reports[2].1;
    let summary: Vec<String> = reports
        .iter()
        .map(|(s, _, rows)| {
            let f0 = rows.iter().find(|r| r.metric == MetricId::FNorm && r.epoch == 0 && r.mode == Mode::Eval).and_then(|r| r.tau);
            format!("{} fnorm0={}", s.tag(), ntk_lab::rank::fmt_tau(f0))
        })
        .collect();
    check(distinct && reports.iter().all(|r| r.2.len() == 40), format!("3 schemes x 40 rows, pairwise distinct: {distinct}; {}", summary.join(", ")))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut emit = |id: usize, name: &str, started: Instant, outcome: &Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS [{id:>2}] {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL [{id:>2}] {name} ({secs:.1}s): {d}");
            }
        }
    };

    let t = Instant::now();
    emit(1, "per-sample gradients vs central differences", t, &c1_gradient_oracle());
    let t = Instant::now();
    emit(2, "kernel vs finite-difference Jacobian", t, &c2_ntk_oracle());
    let t = Instant::now();
    emit(3, "linear model kernel equals input Gram matrix", t, &c3_linear_kernel());
    let t = Instant::now();
    emit(4, "Jacobi eigensolver residuals and char-poly roots", t, &c4_eigensolver());
    let t = Instant::now();
    emit(5, "metric identities", t, &c5_metric_identities());
    let t = Instant::now();
    emit(6, "Kendall tau-b vs pair counting", t, &c6_kendall());

    let t = Instant::now();
    let toy = match c7_determinism(dir.path()) {
        Ok((d, toy)) => {
            emit(7, "oracle benchmark byte-identical rebuild", t, &Ok(d));
            Some(toy)
        }
        Err(d) => {
            emit(7, "oracle benchmark byte-identical rebuild", t, &Err(d));
            None
        }
    };
    let missing = || Err("benchmark from criterion 7 unavailable".to_string());
    let t = Instant::now();
    emit(8, "LGA at t=3 vs best baseline at t=0", t, &toy.as_ref().map_or_else(missing, |b| c8_lga_beats_baselines(b, dir.path())));
    let t = Instant::now();
    emit(9, "LGA rises for top architectures, flat for bottom", t, &toy.as_ref().map_or_else(missing, c9_lga_dynamics));
    let t = Instant::now();
    emit(10, "kernel correlation falls and difference grows", t, &c10_kernel_evolution());
    let t = Instant::now();
    emit(11, "search finds the global best under an accuracy oracle", t, &toy.as_ref().map_or_else(missing, c11_search));
    let t = Instant::now();
    emit(12, "evolution pool mechanics over 200 steps", t, &c12_evolution_mechanics());
    let t = Instant::now();
    emit(13, "rank correlation under three init schemes", t, &c13_init_sensitivity(dir.path()));

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 13 criteria passed");
}
