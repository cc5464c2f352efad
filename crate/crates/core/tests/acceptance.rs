// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance suite. Criteria run one after another so their
//! wall-clock limits are measured without contention; each prints a single
//! PASS/FAIL line and the test fails if any criterion does.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use deobtime::attack::{sat_attack, AttackConfig, AttackStatus, LabelKind};
use deobtime::cnf::{tseitin, CnfFormula, Lit, Var};
use deobtime::experiments::{evaluate, generate_dataset, spearman, synthetic_samples, GenConfig};
use deobtime::icnet::{loss_and_grads, train, Aggregation, GraphInput, LossScale, Model, ModelConfig, OutputHead, Sample};
use deobtime::netlist::GateType;
use deobtime::numerics::Matrix;
use deobtime::obfuscate::{random_obfuscate, ObfuscationKind};
use deobtime::satsolve::{solve, SolverConfig};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: f64) -> Result<f64, String> {
    let t = start.elapsed().as_secs_f64();
    check(t < limit, || format!("took {t:.2}s, limit {limit}s"))?;
    Ok(t)
}

// ---------------------------------------------------------------- 1

fn nand(a: bool, b: bool) -> bool {
    !(a && b)
}

fn c17_parse_and_simulate() -> Outcome {
    let start = Instant::now();
    let c = common::c17();
    let nands = c.gates().iter().filter(|g| g.kind == GateType::Nand).count();
    check(
        c.primary_inputs().len() == 5 && c.primary_outputs().len() == 2 && nands == 6,
        || format!("{} PIs, {} POs, {nands} NANDs", c.primary_inputs().len(), c.primary_outputs().len()),
    )?;
    for x in common::vectors(5) {
        let (n1, n2, n3, n6, n7) = (x[0], x[1], x[2], x[3], x[4]);
        let n11 = nand(n3, n6);
        let n16 = nand(n2, n11);
        let expect = vec![nand(nand(n1, n3), n16), nand(n16, nand(n11, n7))];
        let got = c.simulate(&x, &[]).map_err(|e| e.to_string())?;
        check(got == expect, || format!("vector {x:?}: {got:?} vs {expect:?}"))?;
    }
    let t = within(start, 1.0)?;
    Ok(format!("5 PIs, 2 POs, 6 NANDs, 32/32 vectors, {t:.3}s"))
}

// ---------------------------------------------------------------- 2

/// Projection of the satisfying set onto `nets`: net assignments are
/// enumerated and each is extended by brute force over the auxiliaries.
fn projected_models(f: &CnfFormula, nets: &[Var]) -> BTreeSet<Vec<bool>> {
    let n = f.num_vars() as usize;
    let net_slots: Vec<usize> = nets.iter().map(|v| v.slot()).collect();
    let is_net: Vec<bool> = (0..n).map(|s| net_slots.contains(&s)).collect();
    let aux: Vec<usize> = (0..n).filter(|&s| !is_net[s]).collect();
    let net_only: Vec<&Vec<Lit>> = f
        .clauses()
        .iter()
        .filter(|c| c.iter().all(|l| is_net[l.var().slot()]))
        .collect();
    let mut out = BTreeSet::new();
    let mut model = vec![false; n];
    let uniq: Vec<usize> = {
        let mut u = net_slots.clone();
        u.sort_unstable();
        u.dedup();
        u
    };
    for m in 0..1u64 << uniq.len() {
        for (i, &s) in uniq.iter().enumerate() {
            model[s] = m >> i & 1 == 1;
        }
        if !net_only.iter().all(|c| c.iter().any(|l| l.eval(&model))) {
            continue;
        }
        let extends = (0..1u64 << aux.len()).any(|a| {
            for (i, &s) in aux.iter().enumerate() {
                model[s] = a >> i & 1 == 1;
            }
            f.evaluate(&model)
        });
        if extends {
            out.insert(net_slots.iter().map(|&s| model[s]).collect());
        }
    }
    out
}

fn tseitin_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut done = 0;
    let mut skipped = 0;
    while done < 200 {
        let c = common::random_circuit(&mut rng, 12);
        let (f, vars) = tseitin(&c).map_err(|e| e.to_string())?;
        if f.num_vars() as usize - c.len() > 10 {
            skipped += 1;
            continue;
        }
        let mut graph = BTreeSet::new();
        for x in common::vectors(c.primary_inputs().len()) {
            for k in common::vectors(c.key_len()) {
                graph.insert(c.evaluate(&x, &k).map_err(|e| e.to_string())?);
            }
        }
        check(projected_models(&f, &vars.nets) == graph, || format!("circuit #{done} differs"))?;
        done += 1;
    }
    let t = within(start, 30.0)?;
    Ok(format!("200/200 circuits ({skipped} with >10 auxiliaries redrawn), {t:.2}s"))
}

// ---------------------------------------------------------------- 3

fn enumerate_sat(f: &CnfFormula) -> bool {
    let n = f.num_vars() as usize;
    let mut model = vec![false; n];
    (0..1u64 << n).any(|m| {
        for (i, v) in model.iter_mut().enumerate() {
            *v = m >> i & 1 == 1;
        }
        f.evaluate(&model)
    })
}

fn random_3sat(rng: &mut impl Rng) -> CnfFormula {
    let n = rng.random_range(3..=8u32);
    let m = (n as f64 * rng.random_range(3.0..5.0)).round() as usize;
    let mut f = CnfFormula::with_vars(n);
    let vars: Vec<i32> = (1..=n as i32).collect();
    for _ in 0..m {
        let clause: Vec<Lit> = vars
            .choose_multiple(rng, 3)
            .map(|&v| Lit::from_dimacs(if rng.random_bool(0.5) { v } else { -v }))
            .collect();
        f.add_clause(clause).unwrap();
    }
    f
}

fn structured(rng: &mut impl Rng) -> CnfFormula {
    loop {
        let c = common::random_circuit(rng, 12);
        let (mut f, vars) = tseitin(&c).unwrap();
        if f.num_vars() > 20 {
            continue;
        }
        for &o in &vars.outputs {
            f.unit(o.lit(rng.random_bool(0.5)));
        }
        for &i in c.primary_inputs() {
            if rng.random_bool(0.3) {
                f.unit(vars.nets[i].lit(rng.random_bool(0.5)));
            }
        }
        return f;
    }
}

fn solver_vs_enumeration() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut formulas: Vec<CnfFormula> = (0..500).map(|_| random_3sat(&mut rng)).collect();
    formulas.extend((0..100).map(|_| structured(&mut rng)));
    let mut unsat = [0; 2];
    for (i, f) in formulas.iter().enumerate() {
        let r = solve(f, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let truth = enumerate_sat(f);
        check(r.is_sat() == truth, || format!("formula #{i}: solver {} enumeration {truth}", r.is_sat()))?;
        if let Some(m) = r.model() {
            check(f.evaluate(m), || format!("formula #{i}: model violates a clause"))?;
        }
        unsat[(i >= 500) as usize] += !truth as usize;
    }
    let t = within(start, 60.0)?;
    Ok(format!(
        "600/600 statuses agree (UNSAT: {} random, {} structured), {t:.2}s",
        unsat[0], unsat[1]
    ))
}

// ---------------------------------------------------------------- 4

fn attack_correctness() -> Outcome {
    let start = Instant::now();
    let cases = [
        (common::c17(), ObfuscationKind::XorKeygate),
        (common::c17(), ObfuscationKind::LutReplace { arity: 2 }),
        (common::mul5(), ObfuscationKind::XorKeygate),
        (common::mul5(), ObfuscationKind::LutReplace { arity: 2 }),
    ];
    let mut solved = 0;
    let mut max_iter = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for i in 0..100u64 {
        let (base, kind) = &cases[i as usize % 4];
        let n = 1 + (i as usize / 4) % 3;
        let inst = random_obfuscate(base.clone(), n, *kind, i).map_err(|e| e.to_string())?;
        let r = sat_attack(&inst, &AttackConfig::default()).map_err(|e| e.to_string())?;
        let bound = 1usize << base.primary_inputs().len();
        check(r.iterations <= bound, || format!("instance {i}: {} iterations > {bound}", r.iterations))?;
        max_iter = max_iter.max(r.iterations);
        if r.status == AttackStatus::Solved {
            solved += 1;
            check(common::equivalent(base, &inst.obfuscated, &r.recovered_key, &mut rng), || {
                format!("instance {i}: recovered key is not equivalent")
            })?;
        }
    }
    let t = within(start, 300.0)?;
    Ok(format!("{solved}/100 solved, all verified exhaustively, max {max_iter} iterations, {t:.2}s"))
}

// ---------------------------------------------------------------- 5, 6

fn random_graph(rng: &mut impl Rng, n: usize) -> (Matrix, Matrix) {
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(0.4) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    let mut x = Matrix::zeros(n, 11);
    for i in 0..n {
        x[(i, 0)] = rng.random_bool(0.5) as u8 as f64;
        x[(i, rng.random_range(1..11))] = 1.0;
    }
    (a, x)
}

fn sample(a: Matrix, x: Matrix, target: f64) -> Sample {
    Sample {
        id: 0,
        input: GraphInput::new(Arc::new(a), x).unwrap(),
        target,
        censored: false,
    }
}

const AGGS: [Aggregation; 3] = [Aggregation::Attention, Aggregation::Sum, Aggregation::Mean];

fn gradient_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for feat in AGGS {
        for gate in AGGS {
            for (head, scale) in [
                (OutputHead::Exp, LossScale::Log),
                (OutputHead::Exp, LossScale::Raw),
                (OutputHead::Linear, LossScale::Raw),
            ] {
                let (a, x) = random_graph(&mut rng, 6);
                let s = sample(a, x, rng.random_range(-0.5..0.5));
                let mut model = Model::new(ModelConfig {
                    feat_agg: feat,
                    gate_agg: gate,
                    output_head: head,
                    loss_scale: scale,
                    hidden_dims: vec![8, 5],
                    seed: rng.random(),
                    ..ModelConfig::default()
                })
                .unwrap();
                for (_, p) in model.params.iter_mut() {
                    p.as_mut_slice().iter_mut().for_each(|v| *v *= 0.5);
                }
                let grads = loss_and_grads(&model, &[&s]).map_err(|e| e.to_string())?.grads;
                for (name, g) in grads.iter() {
                    for (k, &ga) in g.as_slice().iter().enumerate() {
                        let loss = |d: f64| {
                            let mut m = model.clone();
                            m.params.get_mut(name).unwrap().as_mut_slice()[k] += d;
                            loss_and_grads(&m, &[&s]).unwrap().mse
                        };
                        let fd = (loss(h) - loss(-h)) / (2.0 * h);
                        let scale = ga.abs().max(fd.abs());
                        let err = if scale > 1e-7 { (ga - fd).abs() / scale } else { 0.0 };
                        worst = worst.max(err);
                        checked += 1;
                        check(err < 1e-4 && (scale > 1e-7 || (ga - fd).abs() < 1e-9), || {
                            format!("{feat:?}/{gate:?}/{head:?} {name}[{k}]: analytic {ga} fd {fd}")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} partials over 27 configurations, worst relative error {worst:.2e}"))
}

fn architectural_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_perm = 0.0f64;
    for case in 0..300 {
        let n = rng.random_range(1..16);
        let (a, x) = random_graph(&mut rng, n);
        let cfg = ModelConfig {
            feat_agg: AGGS[case % 3],
            gate_agg: AGGS[case / 3 % 3],
            seed: rng.random(),
            ..ModelConfig::default()
        };
        let model = Model::new(cfg).unwrap();
        let input = GraphInput::new(Arc::new(a.clone()), x.clone()).unwrap();
        let p = model.forward(&input).map_err(|e| e.to_string())?;

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut pa = Matrix::zeros(n, n);
        let mut px = Matrix::zeros(n, 11);
        for i in 0..n {
            for j in 0..n {
                pa[(i, j)] = a[(perm[i], perm[j])];
            }
            px.row_mut(i).copy_from_slice(x.row(perm[i]));
        }
        let q = model.forward(&GraphInput::new(Arc::new(pa), px).unwrap()).unwrap();
        let dev = (p.y_hat - q.y_hat).abs() / p.y_hat.abs().max(1.0);
        worst_perm = worst_perm.max(dev);
        check(dev <= 1e-10, || format!("case {case}: permutation moved the prediction by {dev:e}"))?;

        for w in [&p.a_feat, &p.a_gate] {
            let sum: f64 = w.iter().sum();
            check(w.iter().all(|&v| (0.0..=1.0).contains(&v)) && (sum - 1.0).abs() < 1e-12, || {
                format!("case {case}: attention off the simplex")
            })?;
        }
        check(p.y_hat > 0.0, || format!("case {case}: non-positive exp-head output"))?;

        let mut zero = model.clone();
        zero.config.feat_agg = Aggregation::Attention;
        zero.config.gate_agg = Aggregation::Attention;
        zero.params.get_mut("theta_feat").unwrap().as_mut_slice().fill(0.0);
        zero.params.get_mut("theta_gate").unwrap().as_mut_slice().fill(0.0);
        let mut mean = zero.clone();
        mean.config.feat_agg = Aggregation::Mean;
        mean.config.gate_agg = Aggregation::Mean;
        let (za, zm) = (zero.forward(&input).unwrap().z, mean.forward(&input).unwrap().z);
        check((za - zm).abs() <= 1e-12 * zm.abs().max(1.0), || {
            format!("case {case}: zero-logit attention {za} vs mean {zm}")
        })?;
    }
    let t = within(start, 10.0)?;
    Ok(format!("300 cases, worst permutation deviation {worst_perm:.1e}, {t:.2}s"))
}

// ---------------------------------------------------------------- 7

fn synthetic_learning() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig::default();
    let samples = synthetic_samples(common::mul5(), 300, ObfuscationKind::XorKeygate, (1, 40), 0.05, 0.01, 7, &cfg)
        .map_err(|e| e.to_string())?;
    let out = train(&samples, &cfg).map_err(|e| e.to_string())?;
    let test: Vec<&Sample> = out.test_idx.iter().map(|&i| &samples[i]).collect();
    let report = evaluate(&out.model, &test, LabelKind::Log1pSeconds).map_err(|e| e.to_string())?;
    let train_mean = out.train_idx.iter().map(|&i| samples[i].target).sum::<f64>() / out.train_idx.len() as f64;
    let baseline = test.iter().map(|s| (s.target - train_mean).powi(2)).sum::<f64>() / test.len() as f64;
    let ratio = baseline / report.mse_log;
    let t = start.elapsed().as_secs_f64();
    let detail = format!(
        "test mse {:.5}, mean predictor {baseline:.4} ({ratio:.0}x), {} epochs, {t:.1}s",
        report.mse_log,
        out.log.len()
    );
    check(report.mse_log < 0.01 && ratio >= 10.0 && t < 120.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 8

fn c17_ordering() -> Outcome {
    let cfg = GenConfig {
        bench_file: "c17.bench".into(),
        location_range: (1, 3),
        count: 200,
        kind: ObfuscationKind::XorKeygate,
        seed: 11,
        attack: AttackConfig::default(),
    };
    let (ds, _) = generate_dataset(common::c17(), &cfg).map_err(|e| e.to_string())?;
    let mask: Vec<f64> = ds.records.iter().map(|r| r.n_locations as f64).collect();
    let label: Vec<f64> = ds.records.iter().map(|r| r.labels.conflicts as f64).collect();
    let rho = spearman(&mask, &label).map_err(|e| e.to_string())?;
    check(rho > 0.3, || format!("spearman(mask, conflicts) = {rho:.3}"))?;

    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..3 {
        let icnet = ModelConfig {
            seed,
            max_epochs: 300,
            ..ModelConfig::default()
        };
        let gcn = ModelConfig {
            seed,
            max_epochs: 300,
            ..ModelConfig::gcn_mean_baseline()
        };
        let mut mse = Vec::new();
        for cfg in [&icnet, &gcn] {
            let samples = ds.samples(cfg, LabelKind::Conflicts).map_err(|e| e.to_string())?;
            let out = train(&samples, cfg).map_err(|e| e.to_string())?;
            let test: Vec<&Sample> = out.test_idx.iter().map(|&i| &samples[i]).collect();
            mse.push(evaluate(&out.model, &test, LabelKind::Conflicts).map_err(|e| e.to_string())?.mse_log);
        }
        wins += (mse[0] <= mse[1]) as usize;
        pairs.push(format!("{:.4}/{:.4}", mse[0], mse[1]));
    }
    let detail = format!("spearman {rho:.3}; icnet/gcn-mean test mse {}; {wins}/3 seeds", pairs.join(", "));
    check(wins >= 2, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 9

fn inference_speed() -> Outcome {
    let cfg = GenConfig {
        bench_file: "mul5.bench".into(),
        location_range: (20, 40),
        count: 8,
        kind: ObfuscationKind::XorKeygate,
        seed: 5,
        attack: AttackConfig {
            timeout_seconds: Some(60.0),
            ..AttackConfig::default()
        },
    };
    let (ds, _) = generate_dataset(common::mul5(), &cfg).map_err(|e| e.to_string())?;
    let model_cfg = ModelConfig {
        max_epochs: 20,
        include_censored: true,
        ..ModelConfig::default()
    };
    let samples = ds.samples(&model_cfg, LabelKind::Log1pSeconds).map_err(|e| e.to_string())?;
    let model = train(&samples, &model_cfg).map_err(|e| e.to_string())?.model;
    let largest = ds
        .records
        .iter()
        .max_by_key(|r| (r.instance.mask.len(), r.id))
        .expect("non-empty dataset");
    let inst = ds.instance(largest).map_err(|e| e.to_string())?;
    let (_, infer) = model.predict(&inst).map_err(|e| e.to_string())?;
    let attack = largest.labels.wall_seconds;
    let pct = 100.0 * infer / attack;
    let detail = format!(
        "instance {} ({} nodes): inference {:.3} ms, attack {:.3} s, {pct:.4}%",
        largest.id,
        inst.obfuscated.len(),
        infer * 1e3,
        attack
    );
    check(pct < 1.0, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- 10

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_deobtime"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&status.stderr))
    })
}

fn without_wall_seconds(text: &str) -> String {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("wall_seconds");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    text.lines()
        .map(|l| match serde_json::from_str::<serde_json::Value>(l) {
            Ok(mut v) => {
                strip(&mut v);
                v.to_string()
            }
            Err(_) => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn without_wall_seconds_column(text: &str) -> String {
    let mut lines = text.lines();
    let mut header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let Some(col) = header.iter().position(|&h| h == "wall_seconds") else {
        return text.to_string();
    };
    header.remove(col);
    std::iter::once(header.join(","))
        .chain(lines.map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        }))
        .collect::<Vec<_>>()
        .join("\n")
}

fn snapshot(root: &Path) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let text = std::fs::read_to_string(&p).unwrap();
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                let body = match p.extension().and_then(|x| x.to_str()) {
                    Some("json") if rel.starts_with("data") => without_wall_seconds(&text.replace('\n', " ")),
                    Some("jsonl") => without_wall_seconds(&text),
                    Some("csv") => without_wall_seconds_column(&text),
                    _ => text,
                };
                files.push((rel, body));
            }
        }
    }
    files.sort();
    files
}

fn pipeline_determinism() -> Outcome {
    let bench = concat!(env!("CARGO_MANIFEST_DIR"), "/data/c17.bench");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (data, model) = (dir.path().join("data"), dir.path().join("model"));
        let ckpt = model.join("model.ckpt");
        let (data_s, ckpt_s) = (data.to_str().unwrap(), ckpt.to_str().unwrap());
        run_cli(
            &["gen-data", "--bench", bench, "--locations", "1:3", "--count", "60", "--seed", "7"],
            &data,
        )?;
        run_cli(
            &["train", "--data", data_s, "--agg", "attention", "--graph", "adjacency", "--label", "conflicts", "--epochs", "60", "--seed", "3"],
            &model,
        )?;
        run_cli(&["eval", "--model", ckpt_s, "--data", data_s, "--label", "conflicts"], &model)?;
        runs.push(snapshot(dir.path()));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    check(runs[0] == runs[1], || {
        let diff: Vec<&str> = runs[0]
            .iter()
            .zip(&runs[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        format!("differing files: {diff:?}")
    })?;
    for f in ["model/model.ckpt", "model/metrics.json", "model/metrics.csv", "data/manifest.json"] {
        check(names.contains(&f), || format!("{f} missing"))?;
    }
    Ok(format!("{} files identical across two runs", names.len()))
}

/// Bypasses libtest output capture so the summary shows in plain `cargo test`.
fn report(line: std::fmt::Arguments) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("c17 parse and simulation", c17_parse_and_simulate),
        ("Tseitin soundness", tseitin_soundness),
        ("solver vs enumeration", solver_vs_enumeration),
        ("attack correctness", attack_correctness),
        ("gradient fidelity", gradient_fidelity),
        ("architectural invariants", architectural_invariants),
        ("synthetic learning", synthetic_learning),
        ("c17 ordering checks", c17_ordering),
        ("inference speed", inference_speed),
        ("pipeline determinism", pipeline_determinism),
    ];
    // ACCEPTANCE_ONLY=3,7 restricts the run to the listed criteria
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => report(format_args!("criterion {:>2} PASS  {name}: {detail}", i + 1)),
            Err(why) => {
                report(format_args!("criterion {:>2} FAIL  {name}: {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
