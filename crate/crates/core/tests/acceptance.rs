//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p floral --test acceptance -- --nocapture --test-threads=1`;
//! the advection reproduction is ignored by default (`-- --ignored` runs it).

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;

use common::*;
use floral::flow::{integrate_batch, FlowMode, FnField, OdeOptions};
use floral::grid::{resample, Axis, AxisKind, Domain, GridFunction};
use floral::io::preset;
use floral::neural::{gradient_check, ops, spectral_conv, spectral_weight_modes, FilmFnoConfig, ModelSpec, Tensor, Var, VectorFieldModel};
use floral::pde::{darcy_domain, darcy_energy, darcy_source, generate_dataset, solve_darcy, ProblemConfig, ProblemKind, Sample};
use floral::rng::rng_from;
use floral::train::{compute_metrics, evaluate, train, EvalReport, Predictor, SampleOptions, TrainConfig};
use floral::Result;

fn verdict(n: usize, pass: bool, detail: &str) {
    println!("{} criterion {n}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------- criterion 1

fn random_var(shape: Vec<usize>, rng: &mut impl Rng) -> Var {
    let n: usize = shape.iter().product();
    Var::parameter(Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
}

/// Checks `picks` random entries of `params` against finite differences of
/// `sum(out * probe)` and returns the worst relative error.
fn check_layer(params: Vec<Var>, picks: usize, seed: u64, layer: impl Fn(&[Var]) -> Result<Var>) -> (usize, f64) {
    let mut rng = rng_from(seed);
    let probe = {
        let out = layer(&params).unwrap();
        Var::constant(Tensor::new(out.shape().to_vec(), (0..out.value().numel()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
    };
    let sizes: Vec<usize> = params.iter().map(|p| p.value().numel()).collect();
    let total: usize = sizes.iter().sum();
    let chosen: Vec<(usize, usize)> = (0..picks)
        .map(|_| {
            let mut j = rng.gen_range(0..total);
            let mut k = 0;
            while j >= sizes[k] {
                j -= sizes[k];
                k += 1;
            }
            (k, j)
        })
        .collect();
    let mut state = params;
    let loss = |s: &Vec<Var>| -> Result<Var> { Ok(ops::sum(&ops::mul(&layer(s)?, &probe)?)) };
    let r = gradient_check(&mut state, |s| s.as_mut_slice(), loss, &chosen, 1e-5).unwrap();
    (r.checked, r.max_relative_error)
}

fn perturbed_model(spec: ModelSpec, seed: u64) -> VectorFieldModel {
    let mut model = VectorFieldModel::new(spec, &mut rng_from(seed)).unwrap();
    let mut rng = rng_from(seed + 1);
    for p in model.parameters_mut() {
        for v in p.value_mut().unwrap().data.iter_mut() {
            *v += 0.1 * rng.gen_range(-1.0..1.0);
        }
    }
    model
}

fn check_model(axis_kinds: Vec<AxisKind>, modes: Vec<usize>, shape: Vec<usize>, seed: u64) -> (usize, f64) {
    let spec = ModelSpec {
        config: FilmFnoConfig {
            n_layers: 2,
            hidden_channels: 4,
            modes_per_axis: modes,
            lifting_ratio: 2,
            projection_ratio: 2,
            conditioner_width: 6,
            conditioner_depth: 2,
        },
        w_channels: 1,
        a_channels: 1,
        axis_kinds,
    };
    let mut model = perturbed_model(spec, seed);
    let s: usize = shape.iter().product();
    let w = Tensor::new(vec![2, 1, s], (0..2 * s).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
    let a = Tensor::new(vec![2, 1, s], (0..2 * s).map(|i| 1.0 + 0.5 * (i as f64 * 0.11).cos()).collect()).unwrap();
    let target = Tensor::new(vec![2, 1, s], (0..2 * s).map(|i| (i as f64 * 0.23).cos()).collect()).unwrap();
    let mut rng = rng_from(seed + 2);
    let sizes: Vec<usize> = model.parameters().iter().map(|p| p.value().numel()).collect();
    // every parameter tensor once, then random entries up to 40
    let mut picks: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(k, &n)| (k, rng.gen_range(0..n))).collect();
    while picks.len() < 40 {
        let k = rng.gen_range(0..sizes.len());
        picks.push((k, rng.gen_range(0..sizes[k])));
    }
    let loss = |m: &VectorFieldModel| {
        let out = m.forward(&[0.3, 0.8], &w, &a, &shape)?;
        ops::weighted_mean_square_error(&out, &target, &[1.18, 2.28])
    };
    let r = gradient_check(&mut model, |m| m.parameters_mut(), loss, &picks, 1e-5).unwrap();
    (r.checked, r.max_relative_error)
}

#[test]
fn criterion_01_gradient_correctness() {
    let t = Instant::now();
    let mut rng = rng_from(1);
    let mut results: Vec<(&str, (usize, f64))> = Vec::new();
    let x = |rng: &mut _| random_var(vec![2, 3, 8], rng);
    results.push((
        "linear",
        check_layer(vec![x(&mut rng), random_var(vec![4, 3], &mut rng), random_var(vec![4], &mut rng)], 24, 2, |p| {
            ops::linear(&p[0], &p[1], Some(&p[2]))
        }),
    ));
    results.push(("silu", check_layer(vec![x(&mut rng)], 24, 3, |p| Ok(ops::silu(&p[0])))));
    results.push((
        "film",
        check_layer(vec![x(&mut rng), random_var(vec![2, 3, 1], &mut rng), random_var(vec![2, 3, 1], &mut rng)], 24, 4, |p| {
            ops::film(&p[0], &p[1], &p[2])
        }),
    ));
    results.push(("mean_points", check_layer(vec![x(&mut rng)], 24, 5, |p| ops::mean_points(&p[0]))));
    results.push((
        "concat_slice",
        check_layer(vec![x(&mut rng), random_var(vec![2, 2, 8], &mut rng)], 24, 6, |p| {
            ops::slice_channels(&ops::concat_channels(&[&p[0], &p[1]])?, 1, 3)
        }),
    ));
    let (m1, m2) = (vec![3usize], vec![2usize, 3]);
    let s1 = spectral_weight_modes(&m1);
    results.push((
        "spectral_1d",
        check_layer(
            vec![random_var(vec![2, 2, 8], &mut rng), random_var(vec![s1, 2, 3], &mut rng), random_var(vec![s1, 2, 3], &mut rng)],
            24,
            7,
            |p| spectral_conv(&p[0], &p[1], &p[2], &[8], &[3]),
        ),
    ));
    let s2 = spectral_weight_modes(&m2);
    results.push((
        "spectral_2d",
        check_layer(
            vec![random_var(vec![2, 2, 30], &mut rng), random_var(vec![s2, 2, 2], &mut rng), random_var(vec![s2, 2, 2], &mut rng)],
            24,
            8,
            |p| spectral_conv(&p[0], &p[1], &p[2], &[6, 5], &[2, 3]),
        ),
    ));
    results.push(("film_fno_1d", check_model(vec![AxisKind::Periodic], m1, vec![8], 11)));
    results.push(("film_fno_2d", check_model(vec![AxisKind::CellCentered; 2], m2, vec![6, 5], 12)));
    let secs = t.elapsed().as_secs_f64();
    let worst = results.iter().map(|(_, (_, e))| *e).fold(0.0, f64::max);
    let enough = results.iter().all(|(_, (n, _))| *n >= 20);
    let detail = results.iter().map(|(name, (n, e))| format!("{name} {n}@{e:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(1, enough && worst <= 1e-5 && secs < 60.0, &format!("max rel err {worst:.2e} <= 1e-5 in {secs:.1}s [{detail}]"));
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_02_cfm_fm_gradient_equivalence() {
    let t = Instant::now();
    let toy = GaussianToy::new([1.0, -0.5], 0.7, 0.1, 24);
    let theta = [0.3, -0.2, 0.1, 0.5, 0.2, -0.1, -0.4, 0.3, 0.2, -0.6, 0.05, 0.1];
    let c = compare_gradients(&toy, &theta, 1_000_000, 2024, None);
    let secs = t.elapsed().as_secs_f64();
    let z = c.max_z();
    verdict(
        2,
        z <= 3.0 && secs < 300.0,
        &format!(
            "max |grad CFM - grad FM| = {z:.2} MC standard errors over 12 parameters at 1e6 samples in {secs:.1}s (e.g. dJ/db0 {:.5} vs {:.5})",
            c.cfm[4], c.fm[4]
        ),
    );
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_03_marginal_field_continuity() {
    let toy = TwoAtomToy::new([(-1.5, 0.4), (2.0, 0.6)], 0.3);
    let field = |t: f64, w: f64| toy.marginal_field(t, w);
    let res: Vec<f64> = [0.04, 0.02, 0.01, 0.005].iter().map(|&h| toy.continuity_residual(h, &field)).collect();
    let orders = observed_orders(&res);
    let pass = orders.iter().all(|&p| p >= 1.8);
    verdict(3, pass, &format!("continuity residuals {res:?}, observed orders {orders:.2?} >= 1.8"));
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_04_solver_verification() {
    let t = Instant::now();
    let adv = observed_orders(&advection_errors());
    let bur = observed_orders(&burgers_errors());
    let d = darcy_domain();
    let n = 64;
    let k = GridFunction::from_fn(d.clone(), vec![n, n], |x| (1.5 * (2.0 * PI * x[0]).sin() * (3.0 * PI * x[1]).cos()).exp()).unwrap();
    let f = darcy_source(50.0, 0.125, &d, &[n, n]).unwrap();
    let s = solve_darcy(&k, &f).unwrap();
    let mean = s.pressure.values.iter().sum::<f64>() / (n * n) as f64;
    let (lhs, rhs) = darcy_energy(&k, &f, &s.pressure).unwrap();
    let energy = (lhs - rhs).abs() / rhs.abs();
    let secs = t.elapsed().as_secs_f64();
    let pass = adv.iter().all(|p| (0.7..=1.3).contains(p))
        && bur.iter().all(|p| (1.6..=2.4).contains(p))
        && s.relative_residual <= 1e-8
        && mean.abs() <= 1e-10
        && energy <= 1e-6
        && secs < 120.0;
    verdict(
        4,
        pass,
        &format!(
            "advection orders {adv:.2?}, Burgers orders {bur:.2?}, Darcy residual {:.1e} mean {mean:.1e} energy {energy:.1e}, {secs:.1}s",
            s.relative_residual
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_05_resolution_invariance() {
    let line = Domain::new(vec![Axis::periodic(0.0, 1.0)]).unwrap();
    let fw = |x: &[f64]| 0.5 * (2.0 * PI * x[0]).sin() + 0.2 * (6.0 * PI * x[0]).cos();
    let fa = |x: &[f64]| 1.0 + 0.3 * (4.0 * PI * x[0]).cos();
    let field = |n: usize, f: &dyn Fn(&[f64]) -> f64| GridFunction::from_fn(line.clone(), vec![n], f).unwrap();
    let rms_diff = |fine: &GridFunction, coarse: &GridFunction| {
        let down = resample(fine, &coarse.shape).unwrap();
        (down.values.iter().zip(&coarse.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / coarse.len() as f64).sqrt()
    };
    let spec = ModelSpec {
        config: FilmFnoConfig { modes_per_axis: vec![16], ..FilmFnoConfig::default() },
        w_channels: 1,
        a_channels: 1,
        axis_kinds: vec![AxisKind::Periodic],
    };
    let model = perturbed_model(spec, 5);
    let run = |n: usize| model.evaluate(0.4, &field(n, &fw), &field(n, &fa)).unwrap();
    let model_rms = rms_diff(&run(128), &run(64));

    let mut rng = rng_from(6);
    let slots = spectral_weight_modes(&[16]);
    let wr = random_var(vec![slots, 1, 1], &mut rng);
    let wi = random_var(vec![slots, 1, 1], &mut rng);
    let conv = |n: usize| {
        let x = Var::constant(Tensor::new(vec![1, 1, n], field(n, &fw).values).unwrap());
        let y = spectral_conv(&x, &wr, &wi, &[n], &[16]).unwrap();
        GridFunction::new(line.clone(), vec![n], 1, y.data().to_vec()).unwrap()
    };
    let conv_rms = rms_diff(&conv(128), &conv(64));
    verdict(
        5,
        model_rms <= 1e-5 && conv_rms <= 1e-8,
        &format!("FiLMFNO 64 vs 128 RMS {model_rms:.2e} <= 1e-5, spectral_conv {conv_rms:.2e} <= 1e-8"),
    );
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_06_ode_integrator() {
    let opts = OdeOptions::default();
    let decay = FnField(|_t: &[f64], w: &Tensor, _a: &Tensor| Ok(Tensor { shape: w.shape.clone(), data: w.data.iter().map(|v| -v).collect() }));
    let one = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
    let (y, _) = integrate_batch(&decay, &one, &one, &[2], &opts).unwrap();
    let exp_err = (y.data[0] - (-1.0f64).exp()).abs();
    let c = [0.25, -1.5, 3.0];
    let constant = FnField(move |_t: &[f64], w: &Tensor, _a: &Tensor| {
        Ok(Tensor { shape: w.shape.clone(), data: (0..w.data.len()).map(|i| c[i % 3]).collect() })
    });
    let w0 = Tensor::new(vec![1, 1, 3], vec![0.1, 0.2, -0.3]).unwrap();
    let (z, _) = integrate_batch(&constant, &w0, &w0, &[3], &opts).unwrap();
    let const_err = (0..3).map(|i| (z.data[i] - (w0.data[i] + c[i])).abs()).fold(0.0, f64::max);
    verdict(
        6,
        exp_err <= 1e-6 && const_err <= 1e-12,
        &format!("exp decay error {exp_err:.2e} <= 1e-6, constant field error {const_err:.1e} at atol = rtol = 1e-5"),
    );
}

// ---------------------------------------------------------------- criteria 7, 8

/// Width used for the Benchmark 1 reproductions on a desk CPU; all other
/// settings follow the preset.
const DESK_WIDTH: usize = 16;

fn desk(preset_name: &str, mode: FlowMode) -> TrainConfig {
    let mut cfg = preset(preset_name).unwrap().train;
    cfg.mode = mode;
    cfg.validation_size = 0;
    cfg.architecture.hidden_channels = DESK_WIDTH;
    cfg.architecture.conditioner_width = DESK_WIDTH;
    cfg
}

fn benchmark1(resolution: usize, count: usize, seed: u64) -> Vec<Sample> {
    let cfg = ProblemConfig { resolution: vec![resolution], lf_resolution: vec![resolution], ..ProblemConfig::defaults(ProblemKind::Benchmark1) };
    generate_dataset(&cfg, count, seed).unwrap().samples
}

/// The reproductions share one core; running them one at a time keeps each
/// within its own time budget.
static HEAVY: Mutex<()> = Mutex::new(());

fn train_and_eval(train_set: &[Sample], test_set: &[Sample], cfg: &TrainConfig, ensembles: usize) -> EvalReport {
    let out = train(train_set, cfg).unwrap();
    let pred = Predictor::from_checkpoint(out.last).unwrap();
    let pairs: Vec<(usize, &Sample)> = test_set.iter().enumerate().collect();
    evaluate(&pred, &pairs, &SampleOptions { ensembles, seed: 77, ..SampleOptions::default() }).unwrap()
}

#[test]
fn criterion_07_benchmark1_reproduction() {
    let _heavy = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let train_set = benchmark1(128, 10, 0);
    let test_set = benchmark1(128, 200, 1);
    let flora = train_and_eval(&train_set, &test_set, &desk("benchmark1_n10", FlowMode::Flora), 50);
    let floral = train_and_eval(&train_set, &test_set, &desk("benchmark1_n10", FlowMode::Floral), 50);
    let secs = t.elapsed().as_secs_f64();
    let ratio = floral.mean_predictive_std / flora.mean_predictive_std;
    verdict(
        7,
        floral.mean_l2_error <= flora.mean_l2_error && ratio <= 0.7 && secs < 1800.0,
        &format!(
            "mean L2 FLORAL {:.3e} <= FLORA {:.3e}; std ratio {ratio:.3} <= 0.7 (FLORAL {:.3e}, FLORA {:.3e}); 200 inputs x 50 members, width {DESK_WIDTH}, {:.0}s",
            floral.mean_l2_error, flora.mean_l2_error, floral.mean_predictive_std, flora.mean_predictive_std, secs
        ),
    );
}

#[test]
fn criterion_08_super_resolution() {
    let _heavy = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let train_set = benchmark1(8, 10, 0);
    let test_set = benchmark1(128, 200, 1);
    let flora = train_and_eval(&train_set, &test_set, &desk("benchmark1_res8", FlowMode::Flora), 50);
    let floral = train_and_eval(&train_set, &test_set, &desk("benchmark1_res8", FlowMode::Floral), 50);
    let ratio = floral.mean_l2_error / flora.mean_l2_error;
    verdict(
        8,
        ratio <= 0.3,
        &format!(
            "train 8 -> eval 128: mean L2 FLORAL {:.3e} / FLORA {:.3e} = {ratio:.3} <= 0.3; 200 inputs x 50 members, width {DESK_WIDTH}, {:.0}s",
            floral.mean_l2_error,
            flora.mean_l2_error,
            t.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
#[ignore = "slow suite: about two hours on one core"]
fn criterion_09_advection_ordering() {
    let _heavy = HEAVY.lock().unwrap_or_else(|e| e.into_inner());
    let t = Instant::now();
    let mut problem = ProblemConfig::defaults(ProblemKind::Advection);
    problem.resolution = vec![32, 32];
    problem.lf_resolution = vec![32, 32];
    let train_set = generate_dataset(&problem, 500, 0).unwrap().samples;
    let test_set = generate_dataset(&problem, 200, 1).unwrap().samples;
    let cfg = |mode| {
        let mut c = desk("advection_n500", mode);
        c.epochs = 200;
        c.modes_per_axis = vec![16, 16];
        c
    };
    let flora = train_and_eval(&train_set, &test_set, &cfg(FlowMode::Flora), 50);
    let floral = train_and_eval(&train_set, &test_set, &cfg(FlowMode::Floral), 50);
    let pass = floral.rmse < flora.rmse && floral.nrmse < flora.nrmse && floral.crmse < flora.crmse;
    verdict(
        9,
        pass && t.elapsed().as_secs_f64() < 4.0 * 3600.0,
        &format!(
            "FLORAL vs FLORA: RMSE {:.3e} < {:.3e}, NRMSE {:.3e} < {:.3e}, CRMSE {:.3e} < {:.3e}; 32x32 grid, 200 epochs, width {DESK_WIDTH}, {:.0}s",
            floral.rmse,
            flora.rmse,
            floral.nrmse,
            flora.nrmse,
            floral.crmse,
            flora.crmse,
            t.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 10

#[test]
fn criterion_10_metric_examples() {
    let line = Domain::new(vec![Axis::nodal(0.0, 1.0)]).unwrap();
    let f = |v: Vec<f64>| GridFunction::new(line.clone(), vec![v.len()], 1, v).unwrap();
    let two = compute_metrics(&[vec![f(vec![1.0; 4])], vec![f(vec![-1.0; 4])]], &[f(vec![0.0; 4]), f(vec![0.0; 4])]).unwrap();
    let t = f(vec![1.0, -2.0, 0.5]);
    let zero = compute_metrics(&[vec![t.clone(), t.clone()]], std::slice::from_ref(&t)).unwrap();
    let exact = two.rmse == 1.0
        && two.crmse == 1.0
        && [zero.rmse, zero.nrmse, zero.crmse, zero.mean_l2_error, zero.mean_predictive_std] == [0.0; 5];
    let mut rng = rng_from(10);
    let mut violations = 0;
    for _ in 0..100 {
        let (samples, members, points) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(2..20));
        let mut draw = |n: usize| f((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect());
        let truths: Vec<GridFunction> = (0..samples).map(|_| draw(points)).collect();
        let ens: Vec<Vec<GridFunction>> = (0..samples).map(|_| (0..members).map(|_| draw(points)).collect()).collect();
        let r = compute_metrics(&ens, &truths).unwrap();
        if r.crmse > r.rmse {
            violations += 1;
        }
    }
    verdict(10, exact && violations == 0, &format!("hand examples exact: {exact}; CRMSE > RMSE in {violations}/100 random datasets"));
}

// ---------------------------------------------------------------- criterion 11

fn floral(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_floral")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir).into_iter().map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap())).collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn criterion_11_cli_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("run.json");
    std::fs::write(
        &cfg,
        r#"{"preset": "benchmark1_res16", "train": {"epochs": 3, "validation_size": 2, "train_size": 4,
            "architecture": {"n_layers": 1, "hidden_channels": 4, "conditioner_width": 4, "conditioner_depth": 1}}}"#,
    )
    .unwrap();
    let p = |name: &str| root.join(name).display().to_string();
    let (cfg, data, test, ck, samples, ev) = (p("run.json"), p("data"), p("test"), p("ckpt"), p("samples"), p("eval"));
    let commands: Vec<Vec<String>> = vec![
        vec!["gen-data", "--problem", "benchmark1", "--config", &cfg, "--out", &data, "--count", "6", "--seed", "3"],
        vec!["gen-data", "--problem", "benchmark1", "--out", &test, "--count", "3", "--seed", "4"],
        vec!["train", "--data", &data, "--mode", "floral", "--config", &cfg, "--out", &ck, "--seed", "5"],
        vec!["sample", "--ckpt", &format!("{ck}/final.json"), "--data", &test, "--indices", "0,2", "--ensembles", "3", "--resolution", "32", "--seed", "6", "--out", &samples],
        vec!["eval", "--ckpt", &format!("{ck}/best.json"), "--data", &test, "--ensembles", "3", "--seed", "7", "--out", &ev],
    ]
    .into_iter()
    .map(|c| c.into_iter().map(String::from).collect())
    .collect();
    let run_all = || {
        for c in &commands {
            floral(&c.iter().map(String::as_str).collect::<Vec<_>>());
        }
        snapshot(root)
    };
    let first = run_all();
    let second = run_all();
    let differing: Vec<&String> = first.iter().zip(&second).filter(|(a, b)| a != b).map(|(a, _)| &a.0).collect();
    verdict(
        11,
        first.len() == second.len() && differing.is_empty() && first.len() >= 15,
        &format!("{} output files of gen-data/train/sample/eval byte-identical on rerun; differing: {differing:?}", first.len()),
    );
}
