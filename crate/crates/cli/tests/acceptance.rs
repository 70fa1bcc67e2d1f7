//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use neurodyn_core::arm::{generate_reaches, ArmParams, ReachScript, ELBOW_EXTENSOR, ELBOW_FLEXOR};
use neurodyn_core::edm::{cross_predict, delay_embed, param_search, simplex_forecast, EmbeddingConfig, Split};
use neurodyn_core::emg::{extract_envelopes, EnvelopeConfig};
use neurodyn_core::filter::{design_butterworth, FilterKind};
use neurodyn_core::pca::project_top3;
use neurodyn_core::reward::{aggregate_sweep, high_freq_power, joint_reward, total_reward, RewardWeights};
use neurodyn_core::stats::spearman_rho;
use neurodyn_core::trial_data::{load_trialset, save_trialset};
use neurodyn_core::{ChannelSpec, CsvFormat, TrialSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn single(series: Vec<f64>) -> TrialSet {
    TrialSet::from_series(vec![ChannelSpec::other("x")], 1.0, &[vec![series]]).unwrap()
}

fn self_rho(x: &[f64], tp: usize, theiler: usize) -> f64 {
    let mut cfg = EmbeddingConfig::univariate("x", "x", 2, -1, tp);
    cfg.theiler = theiler;
    let lib = delay_embed(&single(x.to_vec()), &cfg).unwrap();
    simplex_forecast(&lib, &lib).unwrap().rho
}

fn logistic_decay() -> Outcome {
    let mut x = vec![0.4];
    while x.len() < 500 {
        let v = x[x.len() - 1];
        x.push(3.9 * v * (1.0 - v));
    }
    let rhos: Vec<f64> = [1, 2, 5, 10].iter().map(|&tp| self_rho(&x, tp, 0)).collect();
    let decreasing = rhos.windows(2).all(|w| w[0] > w[1]);
    check(
        rhos[0] > 0.9 && decreasing,
        format!("rho at Tp 1,2,5,10 = {:.3?}", rhos),
    )
}

fn sine_control() -> Outcome {
    let x: Vec<f64> = (0..500).map(|i| (2.0 * PI * i as f64 / 25.0).sin()).collect();
    let rhos: Vec<f64> = (1..=10).map(|tp| self_rho(&x, tp, 10)).collect();
    let min = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
    check(min > 0.99, format!("min rho over Tp 1..10 = {min:.4}"))
}

fn pipeline_oracle() -> Outcome {
    let ds = generate_reaches(&ReachScript::default(), &ArmParams::default()).map_err(|e| e.to_string())?;
    let set = ds.combined();
    let base = EmbeddingConfig::univariate("q_elbow", "a_biceps", 1, -1, 1);
    let table = param_search(&set, &base, &[1, 2, 3, 4, 5], &[-1, -2, -3], &[1, 2, 3, 4, 5], Split::LeaveOneTrialOut)
        .map_err(|e| e.to_string())?;
    let best = *table.best_row();

    // shuffle the target in time within each trial
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let target = set.channel_index("a_biceps").unwrap();
    let shuffled = set
        .map_series(|_, c, mut v| {
            if c == target {
                v.shuffle(&mut rng);
            }
            v
        })
        .unwrap();
    let cfg = EmbeddingConfig { e: best.e, tau: best.tau, tp: best.tp, ..base };
    let surrogate = cross_predict(&shuffled, &cfg, Split::LeaveOneTrialOut).map_err(|e| e.to_string())?;
    check(
        best.rho >= 0.6 && surrogate.rho.abs() < 0.2,
        format!(
            "best rho {:.3} at E={} tau={} Tp={}; shuffled-target rho {:.3}",
            best.rho, best.e, best.tau, best.tp, surrogate.rho
        ),
    )
}

fn emg_fidelity() -> Outcome {
    let ds = generate_reaches(&ReachScript::default(), &ArmParams::default()).map_err(|e| e.to_string())?;
    let out = extract_envelopes(&ds.raw_emg, &EnvelopeConfig::default()).map_err(|e| e.to_string())?;
    let env = &out.envelopes;
    let in_range = env.data().iter().all(|v| (0.0..=1.0).contains(v));
    let rhos: Vec<f64> = [ELBOW_FLEXOR, ELBOW_EXTENSOR]
        .iter()
        .enumerate()
        .map(|(c, &m)| spearman_rho(&env.channel_values(c), &ds.activations.channel_values(m)).unwrap())
        .collect();
    check(
        rhos.iter().all(|&r| r > 0.9) && in_range && env.n_steps() == 60,
        format!("spearman per channel {rhos:.3?}, {} samples, in [0,1]: {in_range}", env.n_steps()),
    )
}

/// Bilinear-mapped Butterworth magnitude, evaluated independently of the cascade.
fn analytic(kind: FilterKind, cutoffs: &[f64], f: f64, fs: f64) -> f64 {
    let w = |hz: f64| (PI * hz / fs).tan();
    let lp = |fc: f64| 1.0 / (1.0 + (w(f) / w(fc)).powi(8)).sqrt();
    let hp = |fc: f64| 1.0 / (1.0 + (w(fc) / w(f)).powi(8)).sqrt();
    match kind {
        FilterKind::Lowpass => lp(cutoffs[0]),
        FilterKind::Highpass => hp(cutoffs[0]),
        FilterKind::Bandpass => hp(cutoffs[0]) * lp(cutoffs[1]),
    }
}

fn filter_correctness() -> Outcome {
    let fs = 30_000.0;
    let lp = design_butterworth(4, FilterKind::Lowpass, &[50.0], fs).unwrap();
    let bp = design_butterworth(4, FilterKind::Bandpass, &[20.0, 1000.0], fs).unwrap();
    let db = |g: f64| 20.0 * g.log10();
    let lp_cut = lp.magnitude_db(50.0, fs);
    let bp_cuts = [bp.magnitude_db(20.0, fs), bp.magnitude_db(1000.0, fs)];
    let lp_dc = lp.magnitude(0.0, fs);
    let bp_dc = db(bp.magnitude(0.0, fs).max(1e-300));
    let mut worst = 0.0f64;
    for i in 1..2000 {
        let f = i as f64 * 7.5;
        worst = worst.max((lp.magnitude(f, fs) - analytic(FilterKind::Lowpass, &[50.0], f, fs)).abs());
        worst = worst.max((bp.magnitude(f, fs) - analytic(FilterKind::Bandpass, &[20.0, 1000.0], f, fs)).abs());
    }
    let within = |x: f64| (x + 3.0).abs() <= 0.5;
    check(
        within(lp_cut) && bp_cuts.iter().all(|&x| within(x)) && (lp_dc - 1.0).abs() <= 1e-3 && bp_dc < -60.0 && worst < 1e-6,
        format!(
            "cutoffs {lp_cut:.3} / {:.3}, {:.3} dB; DC {lp_dc:.6} / {bp_dc:.1} dB; max |H - analytic| {worst:.1e}",
            bp_cuts[0], bp_cuts[1]
        ),
    )
}

fn reward_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (jo, pa) = (RewardWeights::joint_only(), RewardWeights::physics_aware());
    let mut failures = 0usize;
    let mut equal_cases = 0usize;
    for i in 0..100_000 {
        let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let q_ref = if i % 10 == 0 {
            equal_cases += 1;
            q.clone()
        } else {
            (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()
        };
        let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..2).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let f: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r = joint_reward(&q, &q_ref, jo.alpha_joint).unwrap();
        let ok_range = r > 0.0 && r <= 1.0 && ((r == 1.0) == (q == q_ref));
        let e1 = total_reward(&q, &q_ref, &a, &v, &f, &jo).unwrap();
        let e2 = total_reward(&q, &q_ref, &a, &v, &f, &pa).unwrap();
        let ok_joint = e1.r_total == 5.0 * e1.r_joint;
        let ok_phys = e2.r_total == 5.0 * e2.r_joint - 0.15 * e2.c_ctrl - 0.01 * e2.c_energy;
        if !(ok_range && ok_joint && ok_phys) {
            failures += 1;
        }
    }
    check(failures == 0, format!("100000 vectors ({equal_cases} exact matches), {failures} violations"))
}

fn spectral_metric() -> Outcome {
    let sine = |f: f64| -> Vec<f64> { (0..400).map(|i| (2.0 * PI * f * i as f64 / 400.0).sin()).collect() };
    let hi = high_freq_power(&sine(50.0), 400.0, (10.0, 1000.0)).unwrap();
    let lo = high_freq_power(&sine(2.0), 400.0, (10.0, 1000.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(8..400);
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut edges = vec![0.0, 200.0];
        for _ in 0..rng.gen_range(0..6) {
            edges.push(rng.gen_range(0.5..199.5));
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let total: f64 = edges.windows(2).map(|w| high_freq_power(&x, 400.0, (w[0], w[1])).unwrap()).sum();
        worst = worst.max((total - 1.0).abs());
    }
    check(
        (hi - 1.0).abs() <= 1e-6 && lo <= 1e-3 && worst <= 1e-9,
        format!("50 Hz {hi:.9}, 2 Hz {lo:.2e}, partition error {worst:.1e}"),
    )
}

fn sweep_statistics() -> Outcome {
    let pts = aggregate_sweep(&[(0.0, vec![3.0; 5]), (1.0, vec![0.0, 0.0, 0.0, 0.0, 10.0])]).unwrap();
    let flat = pts[0].ci95_hi - pts[0].ci95_lo;
    let half = pts[1].half_width();
    check(
        flat == 0.0 && (half - 5.552).abs() <= 0.01,
        format!("equal seeds width {flat}, (0,0,0,0,10) half-width {half:.4}"),
    )
}

fn pca_rank3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mixing: Vec<[f64; 3]> = (0..512).map(|_| [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]).collect();
    let mut data = Vec::with_capacity(46 * 60 * 512);
    for _ in 0..46 * 60 {
        let z = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        data.extend(mixing.iter().map(|m| m[0] * z[0] + m[1] * z[1] + m[2] * z[2]));
    }
    let channels = (0..512).map(|i| ChannelSpec::other(format!("u{i}"))).collect();
    let set = TrialSet::new(channels, 200.0, 46, 60, data).unwrap();
    let emb = project_top3(&set, None).map_err(|e| e.to_string())?;
    let total = emb.report().total;
    check(
        (total - 1.0).abs() <= 1e-9 && emb.data.shape() == (46, 60, 3),
        format!("sum of top-3 ratios {total:.12}, shape {:?}", emb.data.shape()),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_neurodyn"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn all_commands(dir: &Path) -> Result<(), String> {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    run_cli(&["synth-generate", "--trials", "6", "--seed", "3", "--out", &p("s")])?;
    run_cli(&["emg-process", "--input", &p("s_emg_raw.csv"), "--out", &p("e")])?;
    let (kin, act) = (p("s_kinematics.csv"), p("s_activations.csv"));
    run_cli(&["edm", "--input", &kin, &act, "--source", "q_elbow", "--target", "a_biceps", "--out", &p("f")])?;
    run_cli(&[
        "edm", "--input", &kin, &act, "--source", "q_elbow", "--target", "a_biceps", "--sweep", "--E-range", "1..3",
        "--tau-range", "-1..-2", "--Tp-range", "1..2", "--out", &p("g"),
    ])?;
    run_cli(&["reward-eval", "--rollout", &act, "--joints", "a_biceps", "--emg", &p("e_envelopes.csv"), "--out", &p("r")])?;
    std::fs::write(dir.join("seeds.csv"), "param,seed,value\n0,0,1\n0,1,2\n0.1,0,3\n0.1,1,5\n").unwrap();
    run_cli(&["reward-eval", "--seeds", &p("seeds.csv"), "--out", &p("w")])?;
    run_cli(&["pca", "--input", &kin, "--behavior", "q_elbow", "--out", &p("p")])?;
    Ok(())
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    all_commands(a.path())?;
    all_commands(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    // summaries echo input paths, which differ between the two directories
    let strip = |bytes: &[u8], dir: &Path| String::from_utf8_lossy(bytes).replace(&*dir.to_string_lossy(), "<dir>");
    let differing: Vec<&String> = sa
        .iter()
        .filter(|(name, bytes)| sb.get(*name).map(|o| strip(bytes, a.path()) != strip(o, b.path())).unwrap_or(true))
        .map(|(n, _)| n)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let set = TrialSet::new(
        vec![ChannelSpec::other("biceps"), ChannelSpec::other("triceps")],
        200.0,
        46,
        60,
        (0..46 * 60 * 2).map(|_| rng.gen::<f64>() * 1e3 - 500.0).collect(),
    )
    .unwrap();
    let mut round_trip = true;
    for fmt in [CsvFormat::CsvWide, CsvFormat::CsvLong] {
        let path = a.path().join("rt.csv");
        save_trialset(&set, &path, fmt).unwrap();
        round_trip &= load_trialset(&path, fmt, None).unwrap() == set;
    }
    check(
        differing.is_empty() && sa.len() == sb.len() && round_trip,
        format!("{} output files compared, differing {differing:?}; round trip {round_trip}", sa.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("simplex chaos signature", logistic_decay, Duration::from_secs(5)),
        ("simplex periodic control", sine_control, Duration::from_secs(5)),
        ("end-to-end pipeline oracle", pipeline_oracle, Duration::from_secs(60)),
        ("EMG chain fidelity", emg_fidelity, Duration::from_secs(30)),
        ("filter correctness", filter_correctness, Duration::from_secs(1)),
        ("reward algebra", reward_algebra, Duration::from_secs(1)),
        ("spectral metric", spectral_metric, Duration::from_secs(1)),
        ("sweep statistics", sweep_statistics, Duration::from_secs(1)),
        ("PCA rank-3 reshape", pca_rank3, Duration::from_secs(5)),
        ("determinism and round trips", determinism, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let in_time = took <= *limit;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name} ({detail}; {:.2}s of {}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
