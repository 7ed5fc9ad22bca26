//! retrieve / experiment: one-step retrieval diagnostics, the inverse-
//! temperature sweep, an energy trace along a retrieval trajectory, the
//! S₅ word-problem harness, and a generator/oracle cross-check.

use std::fs;
use std::path::Path;

use hopcirc_core::cot::{random_params, run_word_problem, Answer, CotDesc};
use hopcirc_core::fp::{FpFlags, FpNum, Precision};
use hopcirc_core::hopfield;
use hopcirc_core::linalg::FpMatrix;
use hopcirc_core::problems::{self, Payload, Perm5, Tree};
use hopcirc_core::rng::SplitMix64;
use serde_json::json;

use crate::reports;
use crate::AppError;

// ---------------------------------------------------------------------
// Retrieval trials
// ---------------------------------------------------------------------

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_f64(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d)
            .map(|_| rng.next_range(-10_000, 10_000) as f64 / 10_000.0)
            .collect();
        let n = norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Random orthonormal pattern set via Gram–Schmidt, resampling any draw
/// that lands too close to the span of the earlier ones.
fn orthonormal_patterns(rng: &mut SplitMix64, d: usize, m: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < m {
        let mut v = unit_f64(rng, d);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (x, c) in v.iter_mut().zip(b) {
                *x -= dot * c;
            }
        }
        let n = norm(&v);
        if n > 1e-3 {
            basis.push(v.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// d×m matrix whose columns are the patterns.
fn pattern_matrix(pats: &[Vec<f64>], p: Precision, flags: &mut FpFlags) -> FpMatrix {
    let d = pats[0].len();
    let mut m = FpMatrix::zero(d, pats.len(), p);
    for (j, pat) in pats.iter().enumerate() {
        for (i, &x) in pat.iter().enumerate() {
            m.set(i, j, FpNum::from_f64(x, p, flags));
        }
    }
    m
}

fn column(v: &[f64], p: Precision, flags: &mut FpFlags) -> FpMatrix {
    let mut m = FpMatrix::zero(v.len(), 1, p);
    for (i, &x) in v.iter().enumerate() {
        m.set(i, 0, FpNum::from_f64(x, p, flags));
    }
    m
}

struct Trial {
    start: f64,
    end: f64,
    hit: bool,
}

/// One retrieval trial: orthonormal patterns, a noisy copy of one of
/// them, a single update, and the distance back to the clean pattern.
fn retrieval_trial(
    rng: &mut SplitMix64,
    d: usize,
    m: usize,
    beta: &FpNum,
    p: Precision,
    noise: f64,
) -> Result<Trial, AppError> {
    let pats = orthonormal_patterns(rng, d, m);
    let k = rng.next_below(m as u64) as usize;
    let dir = unit_f64(rng, d);
    let scale = noise * (0.3 + 0.7 * (rng.next_range(0, 1000) as f64 / 1000.0));
    let q: Vec<f64> = pats[k].iter().zip(&dir).map(|(a, u)| a + scale * u).collect();
    let mut flags = FpFlags::default();
    let xi = pattern_matrix(&pats, p, &mut flags);
    let x = column(&q, p, &mut flags);
    let out = hopfield::retrieval_step(&xi, &x, beta, &mut flags)
        .map_err(|e| AppError::failure(format!("retrieval step failed: {e}")))?;
    let end = (0..d)
        .map(|i| (out.get(i, 0).to_f64() - pats[k][i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(Trial { start: scale, end, hit: end <= 1e-2 })
}

fn check_retrieval_shape(dim: usize, patterns: usize, beta: i64) -> Result<(), AppError> {
    if dim == 0 || patterns == 0 {
        return Err(AppError::usage("need at least one dimension and one pattern"));
    }
    if patterns > dim {
        return Err(AppError::usage(format!(
            "cannot orthonormalize {patterns} patterns in dimension {dim}"
        )));
    }
    if beta < 1 {
        return Err(AppError::usage("beta must be a positive integer"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn retrieve(
    dim: usize,
    patterns: usize,
    beta: i64,
    p: Precision,
    trials: usize,
    noise: f64,
    seed: u64,
    csv: Option<&Path>,
) -> Result<(), AppError> {
    check_retrieval_shape(dim, patterns, beta)?;
    let mut flags = FpFlags::default();
    let beta_fp = FpNum::from_int(beta, p, &mut flags);
    let mut rng = SplitMix64::new(seed);
    let mut rows = String::from("trial,start_distance,end_distance,hit\n");
    let mut hits = 0;
    for t in 0..trials {
        let r = retrieval_trial(&mut rng, dim, patterns, &beta_fp, p, noise)?;
        hits += r.hit as usize;
        rows.push_str(&format!("{t},{:.6},{:.6e},{}\n", r.start, r.end, r.hit as u8));
    }
    if let Some(path) = csv {
        fs::write(path, rows)?;
        println!("csv -> {}", path.display());
    }
    println!(
        "retrieved {hits}/{trials} within 1e-2 (d={dim}, M={patterns}, beta={beta}, p={p}, noise<={noise})"
    );
    Ok(())
}

// ---------------------------------------------------------------------
// Named experiments
// ---------------------------------------------------------------------

pub fn run(
    name: &str,
    seed: u64,
    trials: Option<usize>,
    size: usize,
    params: Option<&Path>,
    out_dir: &Path,
) -> Result<(), AppError> {
    fs::create_dir_all(out_dir)?;
    match name {
        "retrieval_sweep" => retrieval_sweep(seed, trials.unwrap_or(100), out_dir),
        "energy_trace" => energy_trace(seed, trials.unwrap_or(12), out_dir),
        "s5_harness" => s5_harness(seed, trials.unwrap_or(50), size, params, out_dir),
        "oracle_crosscheck" => oracle_crosscheck(seed, trials.unwrap_or(200), out_dir),
        other => Err(AppError::usage(format!(
            "unknown experiment {other:?} (expected retrieval_sweep, energy_trace, s5_harness, or oracle_crosscheck)"
        ))),
    }
}

/// Retrieval quality across inverse temperatures: the same trial batch at
/// β ∈ {1, 8, 32}, p = 24. Low β blurs the patterns together; the CSV is
/// the data product and nothing here asserts a hit rate.
fn retrieval_sweep(seed: u64, trials: usize, out_dir: &Path) -> Result<(), AppError> {
    const D: usize = 8;
    const M: usize = 4;
    const P: Precision = 24;
    const NOISE: f64 = 0.099;
    let mut flags = FpFlags::default();
    let mut rows = String::from("beta,trial,distance,hit\n");
    let mut per_beta = Vec::new();
    for beta in [1i64, 8, 32] {
        let beta_fp = FpNum::from_int(beta, P, &mut flags);
        let mut rng = SplitMix64::new(seed.wrapping_add(beta as u64));
        let mut hits = 0;
        let mut total = 0.0;
        for t in 0..trials {
            let r = retrieval_trial(&mut rng, D, M, &beta_fp, P, NOISE)?;
            hits += r.hit as usize;
            total += r.end;
            rows.push_str(&format!("{beta},{t},{:.6e},{}\n", r.end, r.hit as u8));
        }
        println!(
            "beta={beta}: {hits}/{trials} within 1e-2, mean distance {:.3e}",
            total / trials as f64
        );
        per_beta.push(json!({
            "beta": beta,
            "hits": hits,
            "trials": trials,
            "mean_distance": total / trials as f64,
        }));
    }
    let csv_path = out_dir.join("retrieval_sweep.csv");
    fs::write(&csv_path, rows)?;
    let config = json!({
        "experiment": "retrieval_sweep",
        "seed": seed,
        "trials": trials,
        "dim": D,
        "patterns": M,
        "p": P,
        "noise": NOISE,
        "hit_threshold": 1e-2,
    });
    let body = json!({ "per_beta": per_beta, "csv": csv_path.display().to_string() });
    let json_path = out_dir.join("retrieval_sweep.json");
    reports::write_json(&json_path, &reports::wrap(config, body))?;
    println!("csv  -> {}", csv_path.display());
    println!("json -> {}", json_path.display());
    Ok(())
}

/// Energy along one retrieval trajectory. The monotone column records
/// whether each step kept the energy from rising; it is reported, not
/// asserted.
fn energy_trace(seed: u64, steps: usize, out_dir: &Path) -> Result<(), AppError> {
    const D: usize = 8;
    const M: usize = 4;
    const P: Precision = 24;
    let mut flags = FpFlags::default();
    let beta = FpNum::from_int(8, P, &mut flags);
    let mut rng = SplitMix64::new(seed);
    let pats = orthonormal_patterns(&mut rng, D, M);
    let dir = unit_f64(&mut rng, D);
    let q: Vec<f64> = pats[0].iter().zip(&dir).map(|(a, u)| a + 0.25 * u).collect();
    let xi = pattern_matrix(&pats, P, &mut flags);
    let mut x = column(&q, P, &mut flags);

    let energy_of = |x: &FpMatrix, flags: &mut FpFlags| -> Result<f64, AppError> {
        hopfield::energy(&xi, x, &beta, flags)
            .map(|e| e.to_f64())
            .map_err(|e| AppError::failure(format!("energy evaluation failed: {e}")))
    };
    let mut rows = String::from("step,energy,monotone\n");
    let mut prev = energy_of(&x, &mut flags)?;
    rows.push_str(&format!("0,{prev:.9},1\n"));
    let mut monotone_all = true;
    for t in 1..=steps {
        x = hopfield::retrieval_step(&xi, &x, &beta, &mut flags)
            .map_err(|e| AppError::failure(format!("retrieval step failed: {e}")))?;
        let e = energy_of(&x, &mut flags)?;
        let monotone = e <= prev;
        monotone_all &= monotone;
        rows.push_str(&format!("{t},{e:.9},{}\n", monotone as u8));
        prev = e;
    }
    let csv_path = out_dir.join("energy_trace.csv");
    fs::write(&csv_path, rows)?;
    let config = json!({
        "experiment": "energy_trace",
        "seed": seed,
        "steps": steps,
        "dim": D,
        "patterns": M,
        "p": P,
        "beta": 8,
    });
    let body = json!({ "monotone_all": monotone_all, "csv": csv_path.display().to_string() });
    let json_path = out_dir.join("energy_trace.json");
    reports::write_json(&json_path, &reports::wrap(config, body))?;
    println!("monotone along the whole trajectory: {monotone_all}");
    println!("csv  -> {}", csv_path.display());
    println!("json -> {}", json_path.display());
    Ok(())
}

/// Feed S₅ word instances through a decoder model and score the yes/no
/// answers. With no `--params` the model is seeded random, so accuracy
/// near one half is the expected reading, not a defect.
fn s5_harness(
    seed: u64,
    trials: usize,
    size: usize,
    params: Option<&Path>,
    out_dir: &Path,
) -> Result<(), AppError> {
    const COT_STEPS: usize = 4;
    let model = match params {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| AppError::usage(format!("cannot read {}: {e}", path.display())))?;
            let desc = CotDesc::from_json(&text)
                .map_err(|e| AppError::usage(format!("bad parameters {}: {e}", path.display())))?;
            desc.to_params()
                .map_err(|e| AppError::usage(format!("bad parameters {}: {e}", path.display())))?
        }
        None => {
            let mut vocab: Vec<String> = Perm5::all().iter().map(Perm5::token).collect();
            vocab.push("yes".into());
            vocab.push("no".into());
            // Word tokens plus generated tokens must stay under n_max.
            random_params(vocab, 4, size + COT_STEPS + 2, 2, 10, seed)
        }
    };
    let mut rows = String::from("trial,label,answer,correct\n");
    let mut correct = 0;
    let mut flags = FpFlags::default();
    for i in 0..trials {
        let inst = problems::gen_s5_word(size, i % 2 == 0, seed + 1000 + i as u64)
            .map_err(|e| AppError::usage(format!("cannot generate instance {i}: {e}")))?;
        let outcome = run_word_problem(&inst, &model, COT_STEPS, &mut flags).map_err(|e| {
            AppError::failure(format!("word-problem run failed on instance {i}: {e}"))
        })?;
        let ok = match outcome.answer {
            Answer::Yes => inst.label,
            Answer::No => !inst.label,
            _ => false,
        };
        correct += ok as usize;
        rows.push_str(&format!(
            "{i},{},{},{}\n",
            if inst.label { "yes" } else { "no" },
            outcome.answer.as_str(),
            ok as u8
        ));
    }
    let csv_path = out_dir.join("s5_harness.csv");
    fs::write(&csv_path, rows)?;
    let config = json!({
        "experiment": "s5_harness",
        "seed": seed,
        "trials": trials,
        "word_length": size,
        "cot_steps": COT_STEPS,
        "params": params.map(|p| p.display().to_string()),
    });
    let body = json!({
        "correct": correct,
        "trials": trials,
        "accuracy": correct as f64 / trials as f64,
    });
    let json_path = out_dir.join("s5_harness.json");
    reports::write_json(&json_path, &reports::wrap(config, body))?;
    println!("accuracy {correct}/{trials} (informational)");
    println!("csv  -> {}", csv_path.display());
    println!("json -> {}", json_path.display());
    Ok(())
}

// ---------------------------------------------------------------------
// Generator/oracle cross-check
// ---------------------------------------------------------------------
// Deliberately re-derives every label with code that shares nothing with
// the generators: BFS for connectivity, sorted-signature recursion for
// tree isomorphism, pointwise composition for S₅ words.

fn bfs_reaches(edges: &[(u32, u32)], from: u32, to: u32) -> bool {
    use std::collections::{HashMap, HashSet, VecDeque};
    let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            return true;
        }
        for &w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}

fn ahu_signature(t: &Tree, v: usize) -> String {
    let mut kids: Vec<String> = t.children[v].iter().map(|&c| ahu_signature(t, c)).collect();
    kids.sort();
    format!("{}[{}]", t.colors[v], kids.join(""))
}

fn word_is_identity(word: &[Perm5]) -> bool {
    let mut v = [1u8, 2, 3, 4, 5];
    for p in word {
        for x in v.iter_mut() {
            *x = p.0[*x as usize - 1];
        }
    }
    v == [1, 2, 3, 4, 5]
}

fn oracle_crosscheck(seed: u64, trials: usize, out_dir: &Path) -> Result<(), AppError> {
    let mut mismatches: Vec<String> = Vec::new();
    let mut check = |family: &str, i: usize, label: bool, independent: bool| {
        if label != independent {
            mismatches.push(format!("{family} instance {i}: label {label}, recomputed {independent}"));
        }
    };
    for i in 0..trials {
        let gen_err =
            |e| AppError::failure(format!("generator failed during the cross-check: {e}"));

        let inst = problems::gen_connectivity(3 + (i % 30), seed + i as u64).map_err(gen_err)?;
        let Payload::Connectivity { ref edges, query } = inst.payload else {
            unreachable!()
        };
        check("connectivity", i, inst.label, bfs_reaches(edges, query.0, query.1));

        let inst = problems::gen_tree_pair(3 + (i % 8), i % 2 == 0, i % 4 == 1, seed + i as u64)
            .map_err(gen_err)?;
        let Payload::TreeIso { ref left, ref right } = inst.payload else {
            unreachable!()
        };
        check(
            "tree_iso",
            i,
            inst.label,
            ahu_signature(left, left.root) == ahu_signature(right, right.root),
        );

        let inst = problems::gen_s5_word(1 + (i % 25), i % 2 == 0, seed + i as u64).map_err(gen_err)?;
        let Payload::S5Word { ref word } = inst.payload else {
            unreachable!()
        };
        check("s5_word", i, inst.label, word_is_identity(word));
    }
    let verdict = if mismatches.is_empty() { "PASS" } else { "FAIL" };
    let config = json!({ "experiment": "oracle_crosscheck", "seed": seed, "trials": trials });
    let body = json!({
        "verdict": verdict,
        "instances_per_family": trials,
        "mismatches": mismatches,
    });
    let json_path = out_dir.join("oracle_crosscheck.json");
    reports::write_json(&json_path, &reports::wrap(config, body))?;
    println!(
        "oracle crosscheck: {trials} instances per family, {} mismatch(es): {verdict}",
        mismatches.len()
    );
    println!("json -> {}", json_path.display());
    if !mismatches.is_empty() {
        return Err(AppError::failure(format!(
            "{} label(s) disagree with the independent oracles",
            mismatches.len()
        )));
    }
    Ok(())
}
