//! Acceptance suite: runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use auditbench::detect::{zscore_fit, zscore_score, AeModel, AeParams, DetectorKind, Input};
use auditbench::encode::{gel_fit, gel_transform, ColumnOrigin, EmbeddingTable, EncoderConfig, Encoding, FittedEncoder};
use auditbench::eval::{auc, split, threshold_at, weighted_f1, ConfusionCounts, SplitSpec, SplitStrategy};
use auditbench::pipeline::{PipelineConfig, Workspace};
use auditbench::table::LabeledTable;
use auditbench::vcgen::{
    column_kinds, generate_dataset, synthesize_base, AnomalyConfig, ComplexityTable, Dataset, IssueCatalog, SynthSpec,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dataset(rows: usize, seed: u64) -> Dataset {
    let base = synthesize_base(&SynthSpec { n_rows: rows, seed, ..SynthSpec::default() }).unwrap();
    let cfg = AnomalyConfig { seed, ..AnomalyConfig::default() };
    generate_dataset(base, &IssueCatalog::default(), &ComplexityTable::default(), &cfg, false).unwrap()
}

fn population_stats(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn generator_fidelity() -> Outcome {
    let start = Instant::now();
    let ds = dataset(10_000, 42);
    let elapsed = start.elapsed().as_secs_f64();
    let n = ds.records.len();
    let catalog = IssueCatalog::default();
    // clean values recomputed from the catalog and the formulas
    let mut clean_hours = Vec::with_capacity(n);
    let mut clean_cost = Vec::with_capacity(n);
    for r in &ds.records {
        let h = catalog.base_hours(&r.issue, r.issue_id).unwrap() * r.repair_complexity as f64;
        clean_hours.push(h);
        clean_cost.push(h * 20.0 + catalog.cost_ratio(&r.issue, r.issue_id).unwrap() * r.base.price);
    }
    let (cm, cs) = population_stats(&clean_cost);
    let (hm, hs) = population_stats(&clean_hours);
    let cost_rows: Vec<usize> = (0..n).filter(|&i| ds.records[i].flags.cost).collect();
    let hours_rows: Vec<usize> = (0..n).filter(|&i| ds.records[i].flags.hours).collect();
    ensure(cost_rows.len() == n / 10, format!("{} cost-perturbed rows, expected {}", cost_rows.len(), n / 10))?;
    ensure(hours_rows.len() == n / 20, format!("{} hours-perturbed rows, expected {}", hours_rows.len(), n / 20))?;
    let tol = 1e-9;
    for &i in &cost_rows {
        let z = (ds.records[i].repair_cost - cm) / cs;
        ensure((3.0 - tol..=6.0 + tol).contains(&z), format!("row {i}: cost z-score {z}"))?;
    }
    for &i in &hours_rows {
        let z = (ds.records[i].repair_hours - hm) / hs;
        ensure((3.0 - tol..=4.0 + tol).contains(&z), format!("row {i}: hours z-score {z}"))?;
    }
    for (i, r) in ds.records.iter().enumerate() {
        if !r.flags.cost {
            ensure((r.repair_cost - clean_cost[i]).abs() < 1e-9, format!("row {i}: unperturbed cost changed"))?;
        }
    }
    let anomalies = ds.records.iter().filter(|r| r.label == 1).count();
    let ratio = anomalies as f64 / n as f64;
    ensure((ratio - 0.21).abs() <= 0.01, format!("anomaly ratio {ratio:.4}"))?;
    ensure(elapsed < 5.0, format!("runtime {elapsed:.2}s"))?;
    Ok(format!(
        "{} cost / {} hours perturbed of {n}, ratio {ratio:.4}, {elapsed:.2}s",
        cost_rows.len(),
        hours_rows.len()
    ))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_auditbench");
    let mut detail = Vec::new();
    for rows in [1_000usize, 100_000] {
        let mut hashes = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let status = Command::new(bin)
                .args(["generate", "--seed", "42", "--rows", &rows.to_string(), "--out"])
                .arg(dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).to_string())?;
            let bytes = std::fs::read(dir.path().join("dataset.csv")).map_err(|e| e.to_string())?;
            hashes.push(hex::encode(Sha256::digest(&bytes)));
        }
        ensure(hashes[0] == hashes[1], format!("{rows} rows: {} != {}", hashes[0], hashes[1]))?;
        detail.push(format!("{rows} rows sha256 {}", &hashes[0][..12]));
    }
    Ok(detail.join(", "))
}

/// `S = Qᵀ Q W` built densely from its definition.
fn dense_s(w: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = w.shape();
    let mut r = DMatrix::zeros(n, 2);
    for i in 0..n {
        let p = w.row(i).sum() / m as f64;
        r[(i, 0)] = 1.0 - p;
        r[(i, 1)] = p;
    }
    let mut f = DMatrix::zeros(m, 2);
    for j in 0..m {
        let p = w.column(j).sum() / n as f64;
        f[(j, 0)] = 1.0 - p;
        f[(j, 1)] = p;
    }
    let q = &f * r.transpose();
    q.transpose() * q * w
}

fn gel_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut max_err, mut max_orth, mut compared, mut null_checked) = (0.0f64, 0.0f64, 0usize, 0usize);
    for case in 0..100 {
        let n = rng.random_range(2..=50);
        let m = rng.random_range(2..=20);
        let density = rng.random_range(0.1..0.9);
        let mut w = Array2::from_shape_simple_fn((n, m), || f64::from(u8::from(rng.random_bool(density))));
        w[[0, 0]] = 1.0;
        let model = gel_fit(w.view(), m).map_err(|e| format!("case {case}: {e}"))?;
        let vk = &model.vk;
        let wd = DMatrix::from_fn(n, m, |i, j| w[[i, j]]);
        let s = dense_s(&wd);
        let svd = s.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        let mut sv: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
        sv.sort_by(|a, b| b.0.total_cmp(&a.0));
        let smax = sv[0].0.max(f64::MIN_POSITIVE);
        let gram = vk.t().dot(vk);
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                max_orth = max_orth.max((gram[[i, j]] - target).abs());
            }
        }
        for c in 0..m {
            let sigma = sv.get(c).map_or(0.0, |s| s.0);
            let v = vk.column(c);
            if sigma > 1e-10 * smax {
                let below = sv.get(c + 1).map_or(0.0, |s| s.0);
                let above = if c == 0 { f64::INFINITY } else { sv[c - 1].0 };
                if (sigma - below).min(above - sigma) < 1e-6 * smax {
                    continue;
                }
                let o = v_t.row(sv[c].1);
                let plus = (0..m).map(|j| (v[j] - o[j]).abs()).fold(0.0, f64::max);
                let minus = (0..m).map(|j| (v[j] + o[j]).abs()).fold(0.0, f64::max);
                max_err = max_err.max(plus.min(minus));
                compared += 1;
            } else {
                // null direction: any orthonormal completion is valid
                let vd = nalgebra::DVector::from_iterator(m, v.iter().copied());
                let resid = (&s * vd).amax();
                ensure(resid <= 1e-8 * smax.max(1.0), format!("case {case}: null column {c} residual {resid}"))?;
                null_checked += 1;
            }
        }
    }
    ensure(max_err < 1e-8, format!("max abs error vs dense SVD {max_err:e}"))?;
    ensure(max_orth < 1e-10, format!("orthonormality error {max_orth:e}"))?;
    let eye = ndarray::array![[1.0, 0.0], [0.0, 1.0]];
    let model = gel_fit(eye.view(), 1).map_err(|e| e.to_string())?;
    let emb = gel_transform(eye.view(), &model).map_err(|e| e.to_string())?;
    let hand = 1.0 / 2f64.sqrt();
    for v in emb.iter() {
        ensure((v - hand).abs() < 1e-6, format!("identity case gives {v}, expected 0.7071"))?;
    }
    Ok(format!(
        "max err {max_err:.1e} over {compared} columns, {null_checked} null columns checked, orthonormality {max_orth:.1e}, identity -> {:.4}",
        emb[[0, 0]]
    ))
}

fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let (mut p, mut q) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            p += 1.0;
            for (j, &lj) in labels.iter().enumerate() {
                if lj == 0 {
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        } else {
            q += 1.0;
        }
    }
    wins / (p * q)
}

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_diff = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(2..=60);
        let distinct = if case % 2 == 0 { 4 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..distinct) as f64 / 7.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        labels[0] = 1;
        labels[1] = 0;
        let got = auc(&scores, &labels).map_err(|e| e.to_string())?;
        max_diff = max_diff.max((got - pairwise_auc(&scores, &labels)).abs());
    }
    ensure(max_diff < 1e-12, format!("AUC differs from pairwise oracle by {max_diff:e}"))?;

    let c = ConfusionCounts::from_predictions(&[1, 0, 0, 0], &[true, false, false, true]).map_err(|e| e.to_string())?;
    let f1 = weighted_f1(&c);
    ensure((f1 - 0.7667).abs() < 1e-4, format!("weighted F1 {f1}"))?;

    let mut patterns: Vec<Vec<f64>> = Vec::new();
    for n in 1..=120usize {
        patterns.push(vec![1.0; n]);
        patterns.push((0..n).map(|i| (i % 2) as f64).collect());
        patterns.push((0..n).map(|i| (i / 3) as f64).collect());
        patterns.push((0..n).map(|i| ((n - i) / 5) as f64).collect());
        patterns.push((0..n).map(|_| rng.random_range(0..3) as f64).collect());
    }
    let mut checked = 0;
    for scores in &patterns {
        let n = scores.len();
        for pct in 1..100usize {
            let tau = pct as f64 / 100.0;
            let expected = (pct * n).div_ceil(100);
            let t = threshold_at(scores, tau).map_err(|e| e.to_string())?;
            let flagged: Vec<usize> = (0..n).filter(|&i| t.flagged[i]).collect();
            ensure(flagged.len() == expected, format!("n={n} tau={tau}: flagged {} expected {expected}", flagged.len()))?;
            for i in 0..n {
                for j in 0..n {
                    if t.flagged[i] && !t.flagged[j] {
                        let ok = scores[i] > scores[j] || (scores[i] == scores[j] && i < j);
                        ensure(ok, format!("n={n} tau={tau}: row {i} flagged over {j}"))?;
                    }
                }
            }
            checked += 1;
        }
    }
    Ok(format!("AUC max diff {max_diff:.1e} on 1000 vectors, weighted F1 {f1:.4}, {checked} threshold cases exact"))
}

fn ae_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let tables = vec![Array2::zeros((5, 2)), Array2::zeros((4, 3))];
    let emb = EmbeddingTable { columns: vec!["a".into(), "b".into()], dims: vec![2, 3], tables };
    let rows = 6;
    let indices = Array2::from_shape_fn((rows, 2), |(i, j)| (i * (j + 2)) % (4 + 1 - j));
    let numeric = Array2::from_shape_fn((rows, 2), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin());
    let input = Input::Embedded { indices: indices.view(), numeric: numeric.view() };
    let params = AeParams { hidden: vec![4, 3], ..AeParams::default() };
    let mut model = AeModel::init(emb.width() + 2, &params, Some(emb), 2).map_err(|e| e.to_string())?;
    let batch: Vec<usize> = (0..rows).collect();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    for point in 0..20 {
        let p: Vec<f64> = (0..model.flat_params().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        model.set_flat_params(&p).map_err(|e| e.to_string())?;
        let (_, g) = model.loss_and_gradients(&input, &batch).map_err(|e| e.to_string())?;
        let analytic = model.flat_gradients(&g);
        let mut fd = vec![0.0; p.len()];
        for i in 0..p.len() {
            let mut q = p.clone();
            q[i] = p[i] + eps;
            model.set_flat_params(&q).unwrap();
            let up = model.loss_and_gradients(&input, &batch).unwrap().0;
            q[i] = p[i] - eps;
            model.set_flat_params(&q).unwrap();
            let down = model.loss_and_gradients(&input, &batch).unwrap().0;
            fd[i] = (up - down) / (2.0 * eps);
        }
        model.set_flat_params(&p).unwrap();
        let diff = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
        let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|f| f * f).sum::<f64>().sqrt());
        let rel = diff / norm.max(f64::MIN_POSITIVE);
        ensure(rel < 1e-4, format!("point {point}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    let n_emb: usize = model.embedding.as_ref().unwrap().tables.iter().map(|t| t.len()).sum();
    Ok(format!("worst relative error {worst:.1e} over 20 points, {} parameters incl. {n_emb} embedding weights", model.flat_params().len()))
}

fn informativeness() -> Outcome {
    let ds = dataset(10_000, 42);
    let cost = Array2::from_shape_fn((ds.records.len(), 1), |(i, _)| ds.records[i].repair_cost);
    let labels: Vec<u8> = ds.records.iter().map(|r| u8::from(r.flags.numeric())).collect();
    let model = zscore_fit(cost.view(), 0).map_err(|e| e.to_string())?;
    let scores = zscore_score(&model, cost.view()).map_err(|e| e.to_string())?;
    let a = auc(scores.values(), &labels).map_err(|e| e.to_string())?;
    ensure(a > 0.95, format!("z-score AUC {a:.4}"))?;
    Ok(format!("z-score on repair_cost AUC {a:.4}"))
}

fn small_workspace(rows: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.dataset.rows = rows;
    cfg.encodings = Encoding::ALL.to_vec();
    cfg.detectors = DetectorKind::ALL.to_vec();
    cfg
}

fn detector_sanity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ws = Workspace::new(small_workspace(10_000), dir.path()).map_err(|e| e.to_string())?;
    ws.generate().map_err(|e| e.to_string())?;
    ws.split().map_err(|e| e.to_string())?;
    let mut aucs = Vec::new();
    for (enc, det) in [(Encoding::OneHot, DetectorKind::Som), (Encoding::Label, DetectorKind::IForest)] {
        ws.encode(enc).map_err(|e| e.to_string())?;
        let r = ws.run_cell(enc, det).map_err(|e| e.to_string())?;
        ensure(r.auc > 0.55, format!("{enc}-{det} AUC {:.4}", r.auc))?;
        aucs.push(format!("{enc}-{det} {:.4}", r.auc));
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ws = Workspace::new(small_workspace(1_000), dir.path()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let results = ws.run(1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(results.len() == 20, format!("{} smoke cells completed", results.len()))?;
    for (r, _) in &results {
        ensure(r.auc.is_finite() && r.sweep.len() == 26, format!("{}-{} incomplete report", r.encoding, r.detector))?;
    }
    ensure(elapsed < 60.0, format!("smoke matrix took {elapsed:.1}s"))?;
    Ok(format!("{}, 20 smoke cells in {elapsed:.1}s single-threaded", aucs.join(", ")))
}

fn dimensionality() -> Outcome {
    let ds = dataset(10_000, 42);
    let data = LabeledTable::from_table(ds.to_table(), "label").map_err(|e| e.to_string())?;
    let kinds = column_kinds();
    let cfg = EncoderConfig::default();
    let onehot = FittedEncoder::fit(Encoding::OneHot, &data.table, &kinds, &cfg).map_err(|e| e.to_string())?;
    let cards: Vec<usize> = onehot.schema.categorical().map(|c| c.cardinality()).collect();
    let total: usize = cards.iter().sum();
    ensure(total >= 1000, format!("total categorical cardinality {total} < 1000"))?;
    let count = |enc: &FittedEncoder, origin: ColumnOrigin| -> Result<usize, String> {
        let m = enc.transform(&data.table).map_err(|e| e.to_string())?;
        let m = enc.expand_embeddings(&m).map_err(|e| e.to_string())?;
        Ok(m.provenance.iter().filter(|p| p.origin == origin).count())
    };
    let w_onehot = count(&onehot, ColumnOrigin::OneHot)?;
    let gel = FittedEncoder::fit(Encoding::Gel, &data.table, &kinds, &cfg).map_err(|e| e.to_string())?;
    let w_gel = count(&gel, ColumnOrigin::Gel)?;
    let emb = FittedEncoder::fit(Encoding::Embedding, &data.table, &kinds, &cfg).map_err(|e| e.to_string())?;
    let w_emb = count(&emb, ColumnOrigin::Embedding)?;
    let expected_emb: usize = cards.iter().map(|&n| ((n + 1) / 2).clamp(1, 50)).sum();
    ensure(w_onehot == total, format!("one-hot width {w_onehot} != cardinality {total}"))?;
    ensure(w_gel == cards.len(), format!("GEL width {w_gel} != {} attributes", cards.len()))?;
    ensure(w_emb == expected_emb, format!("embedding width {w_emb} != {expected_emb}"))?;
    Ok(format!("cardinality {total}: one-hot {w_onehot}, GEL {w_gel}, embedding {w_emb}"))
}

fn split_contracts() -> Outcome {
    let ds = dataset(1_000, 5);
    let labels: Vec<u8> = ds.records.iter().map(|r| r.label).collect();
    let anomalies = labels.iter().filter(|&&l| l == 1).count();
    let normals = labels.len() - anomalies;
    for seed in 0..100u64 {
        let s = split(&labels, &SplitSpec { strategy: SplitStrategy::Stratified7030, seed }).map_err(|e| e.to_string())?;
        let ta = s.train.iter().filter(|&&i| labels[i] == 1).count() as f64;
        let tn = s.train.len() as f64 - ta;
        ensure((ta - 0.7 * anomalies as f64).abs() <= 1.0, format!("seed {seed}: {ta} train anomalies"))?;
        ensure((tn - 0.7 * normals as f64).abs() <= 1.0, format!("seed {seed}: {tn} train normals"))?;
        let r = split(&labels, &SplitSpec { strategy: SplitStrategy::Recycling, seed }).map_err(|e| e.to_string())?;
        let ra = r.test.iter().filter(|&&i| labels[i] == 1).count();
        ensure(ra == anomalies, format!("seed {seed}: recycling test holds {ra} of {anomalies} anomalies"))?;
        let d = split(&labels, &SplitSpec { strategy: SplitStrategy::Discarding, seed }).map_err(|e| e.to_string())?;
        let da = d.train.iter().filter(|&&i| labels[i] == 1).count();
        ensure(da == 0, format!("seed {seed}: discarding train holds {da} anomalies"))?;
    }
    Ok(format!("100 seeds, {anomalies} anomalies / {normals} normals"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("generator fidelity", generator_fidelity),
        ("determinism", determinism),
        ("GEL correctness", gel_correctness),
        ("metric correctness", metric_correctness),
        ("autoencoder gradients", ae_gradients),
        ("informativeness", informativeness),
        ("detector sanity", detector_sanity),
        ("dimensionality", dimensionality),
        ("split contracts", split_contracts),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
