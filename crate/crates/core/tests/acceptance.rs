//! Exit criteria. Run with `--nocapture` to see one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::fs;
use std::time::{Duration, Instant};

use fsemotion::dataset::{generate_dataset, DatasetManifest, PipelineChoice, SimConfig};
use fsemotion::io::{export_image, load_image, MagnitudeImage};
use fsemotion::mdme::{protocol_dictionary, PROTOCOL_TD_MS, PROTOCOL_TE_MS};
use fsemotion::motion::MotionTrajectory;
use fsemotion::phantom::{generate_phantom, phantom_from_mdme, synthesize_mdme};
use fsemotion::{
    build_schedule, echo_stack, nrmse, sample_trajectory, simulate_fse_agnostic, simulate_fse_aware, simulate_gt, ssim,
    ComplexImage, Ordering, ParameterMaps, RealImage,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn report(id: &str, pass: bool, detail: String) {
    println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

fn complex_rel(a: &ComplexImage, b: &ComplexImage) -> f64 {
    let num: f64 = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).norm_sqr()).sum();
    (num / b.energy()).sqrt()
}

#[test]
fn ac1_zero_motion_reduces_to_ground_truth() {
    const TOL: f64 = 1e-9;
    const BUDGET: Duration = Duration::from_secs(10);
    let start = Instant::now();
    let s = build_schedule(128, 16, 12.0, Ordering::CenterOut).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let maps = generate_phantom(128, 128, 1000 + seed).unwrap();
        let traj = MotionTrajectory::still(s.n_tr(), 4).unwrap();
        let out = simulate_fse_aware(&maps, &s, &traj, 0.0, seed).unwrap();
        let gt = simulate_gt(&maps, &s).unwrap();
        worst = worst.max(complex_rel(&out.corrupt, &gt));
    }
    let elapsed = start.elapsed();
    report(
        "AC1 zero-motion reduction",
        worst <= TOL && elapsed < BUDGET,
        format!("max relative NRMSE {worst:.3e} (<= {TOL:e}), {elapsed:.2?} (< {BUDGET:?})"),
    );
}

#[test]
fn ac2_schedule_partition_and_center_out() {
    const BUDGET: Duration = Duration::from_secs(1);
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for n_pe in (32..=288).step_by(32) {
        for etl in [1usize, 2, 4, 8, 16] {
            let s = build_schedule(n_pe, etl, 12.0, Ordering::CenterOut).unwrap();
            let mut hit = vec![0u32; n_pe];
            for t in 0..s.n_tr() {
                for e in 0..etl {
                    hit[s.line_of(t, e)] += 1;
                }
            }
            if hit.iter().any(|&h| h != 1) {
                failures.push(format!("bijection ({n_pe},{etl})"));
            }
            let c = s.center_line();
            let dist = |band: Vec<usize>| band.into_iter().map(|k| k.abs_diff(c)).collect::<Vec<_>>();
            for e in 0..etl.saturating_sub(1) {
                let max_e = *dist(s.band(e)).iter().max().unwrap();
                let min_next = *dist(s.band(e + 1)).iter().min().unwrap();
                if max_e > min_next {
                    failures.push(format!("dominance ({n_pe},{etl}) echo {e}"));
                }
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        "AC2 schedule partition",
        failures.is_empty() && elapsed < BUDGET,
        format!("{checked} schedules, failures {failures:?}, {elapsed:.2?} (< {BUDGET:?})"),
    );
}

#[test]
fn ac3_pipelines_diverge() {
    const MIN_GAP: f64 = 0.01;
    const N: usize = 50;
    let s = build_schedule(288, 16, 12.0, Ordering::CenterOut).unwrap();
    let mut gaps = Vec::with_capacity(N);
    let mut aware_err = Vec::with_capacity(N);
    let mut agn_err = Vec::with_capacity(N);
    for seed in 0..N as u64 {
        let maps = generate_phantom(288, 320, 3000 + seed).unwrap();
        let traj = sample_trajectory(s.n_tr(), 9, 2.0, 5000 + seed).unwrap();
        let aware = simulate_fse_aware(&maps, &s, &traj, 0.0, seed).unwrap();
        let agn = simulate_fse_agnostic(&aware.clean, &traj, 9, 0.0, seed).unwrap();
        let (gt, a, g) = (aware.clean.magnitude(), aware.corrupt.magnitude(), agn.corrupt.magnitude());
        gaps.push(nrmse(&a, &g).unwrap());
        aware_err.push(nrmse(&gt, &a).unwrap());
        agn_err.push(nrmse(&gt, &g).unwrap());
    }
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);

    // paired two-sided t-test at 95%
    let d: Vec<f64> = aware_err.iter().zip(&agn_err).map(|(a, b)| a - b).collect();
    let n = N as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let crit = StudentsT::new(0.0, 1.0, n - 1.0).unwrap().inverse_cdf(0.975);
    let mean_aware = aware_err.iter().sum::<f64>() / n;
    let mean_agn = agn_err.iter().sum::<f64>() / n;
    report(
        "AC3 pipeline divergence",
        min_gap > MIN_GAP && t.abs() > crit,
        format!(
            "min NRMSE(aware, agnostic) {min_gap:.4} (> {MIN_GAP}); mean NRMSE vs GT aware {mean_aware:.4} / agnostic {mean_agn:.4}, paired t {t:.2} (|t| > {crit:.3})"
        ),
    );
}

#[test]
fn ac4_longer_echo_train_lowers_input_ssim() {
    const N: u64 = 100;
    const BUDGET: Duration = Duration::from_secs(300);
    let start = Instant::now();
    let s16 = build_schedule(288, 16, 12.0, Ordering::CenterOut).unwrap();
    let s8 = build_schedule(288, 8, 20.0, Ordering::CenterOut).unwrap();
    let (mut ssim16, mut ssim8, mut nrmse16, mut nrmse8) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..N {
        let maps = generate_phantom(288, 320, 7000 + seed).unwrap();
        for (s, acc_s, acc_n) in [(&s16, &mut ssim16, &mut nrmse16), (&s8, &mut ssim8, &mut nrmse8)] {
            let traj = sample_trajectory(s.n_tr(), 9, 2.0, 9000 + seed).unwrap();
            let out = simulate_fse_aware(&maps, s, &traj, 0.0, seed).unwrap();
            let (gt, c) = (out.clean.magnitude(), out.corrupt.magnitude());
            *acc_s += ssim(&gt, &c, None).unwrap() / N as f64;
            *acc_n += nrmse(&gt, &c).unwrap() / N as f64;
        }
    }
    let elapsed = start.elapsed();
    report(
        "AC4 ETL direction",
        ssim16 < ssim8 && elapsed < BUDGET,
        format!(
            "mean input SSIM ETL16 {ssim16:.4} < ETL8 {ssim8:.4} (NRMSE {nrmse16:.4} / {nrmse8:.4}), {elapsed:.1?} (< {BUDGET:?})"
        ),
    );
}

#[test]
fn ac5_default_dataset_is_valid() {
    const MIN_PAIRS: usize = 819;
    const TOL: f64 = 1e-12;
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig::default();
    let m = generate_dataset(&cfg, dir.path()).unwrap();
    let reloaded = DatasetManifest::load(dir.path()).unwrap();
    let verified = reloaded.verify(dir.path(), TOL);
    let aware_pairs = m.records.iter().filter(|r| r.pipeline == fsemotion::Pipeline::FseAware).count();
    report(
        "AC5 default dataset",
        m.complete && aware_pairs >= MIN_PAIRS && reloaded == m && verified.is_ok(),
        format!(
            "{} records ({aware_pairs} aware pairs, >= {MIN_PAIRS}), manifest recompute within {TOL:e}: {verified:?}",
            m.records.len()
        ),
    );
}

/// Reference dictionary, built independently of the library: unit-normalized
/// model signals for every (t1, t2) on the 20 / 2 ms grid.
struct OracleDictionary {
    t1: Vec<f64>,
    t2: Vec<f64>,
    atoms: Vec<[f64; 8]>,
}

impl OracleDictionary {
    fn new() -> Self {
        let t1: Vec<f64> = (0..296).map(|i| 100.0 + 20.0 * i as f64).collect();
        let t2: Vec<f64> = (0..496).map(|i| 10.0 + 2.0 * i as f64).collect();
        let mut atoms = Vec::with_capacity(t1.len() * t2.len());
        for &a in &t1 {
            for &b in &t2 {
                let mut s = [0.0; 8];
                for (i, td) in [7562.0f64, 3504.0, 1041.0, 171.0].iter().enumerate() {
                    for (j, te) in [27.0f64, 90.0].iter().enumerate() {
                        s[i * 2 + j] = (1.0 - (-td / a).exp()) * (-te / b).exp();
                    }
                }
                let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                atoms.push(s.map(|v| v / n));
            }
        }
        Self { t1, t2, atoms }
    }

    fn argmax(&self, signal: &[f64]) -> (f64, f64) {
        let n = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, a) in self.atoms.iter().enumerate() {
            let score: f64 = a.iter().zip(signal).map(|(x, y)| x * y / n).sum();
            if score > best.0 {
                best = (score, k);
            }
        }
        (self.t1[best.1 / self.t2.len()], self.t2[best.1 % self.t2.len()])
    }
}

#[test]
fn ac6_dictionary_matching_oracle() {
    const BUDGET: Duration = Duration::from_secs(60);
    let start = Instant::now();
    let dict = protocol_dictionary();
    let oracle = OracleDictionary::new();

    let on_grid = generate_phantom(64, 64, 6).unwrap();
    let shift = |img: &RealImage, pd: &RealImage, by: f64| {
        RealImage::from_fn(64, 64, |y, x| if pd.get(y, x) > 0.0 { img.get(y, x) + by } else { 0.0 })
    };
    let off_grid = ParameterMaps::new(
        on_grid.pd().clone(),
        shift(on_grid.t2(), on_grid.pd(), 1.0),
        Some(shift(on_grid.t1().unwrap(), on_grid.pd(), 7.0)),
    )
    .unwrap();

    let mut exact_mismatch = 0;
    let mut oracle_mismatch = 0;
    let mut worst_step: (f64, f64) = (0.0, 0.0);
    for (maps, exact) in [(&on_grid, true), (&off_grid, false)] {
        let vol = synthesize_mdme(maps, &PROTOCOL_TD_MS, &PROTOCOL_TE_MS, 0.0, 0).unwrap();
        let fit = phantom_from_mdme(&vol, &dict).unwrap();
        let mut cache: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
        for y in 0..64 {
            for x in 0..64 {
                if maps.pd().get(y, x) == 0.0 {
                    continue;
                }
                let got = (fit.t1().unwrap().get(y, x), fit.t2().get(y, x));
                let sig = vol.signal(y, x);
                let key = sig.iter().map(|v| v.to_bits()).collect();
                let want = *cache.entry(key).or_insert_with(|| oracle.argmax(sig));
                if got != want {
                    oracle_mismatch += 1;
                }
                let truth = (maps.t1().unwrap().get(y, x), maps.t2().get(y, x));
                if exact && got != truth {
                    exact_mismatch += 1;
                }
                worst_step.0 = worst_step.0.max((got.0 - truth.0).abs());
                worst_step.1 = worst_step.1.max((got.1 - truth.1).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "AC6 dictionary matching",
        exact_mismatch == 0 && oracle_mismatch == 0 && worst_step.0 <= 20.0 && worst_step.1 <= 2.0 && elapsed < BUDGET,
        format!(
            "on-grid mismatches {exact_mismatch}, oracle disagreements {oracle_mismatch}, worst |dT1| {} ms (<= 20), |dT2| {} ms (<= 2), {elapsed:.1?} (< {BUDGET:?})",
            worst_step.0, worst_step.1
        ),
    );
}

#[test]
fn ac7_echo_magnitudes_strictly_decrease() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut violations = 0usize;
    for seed in 0..100 {
        let etl = rng.random_range(2..=32);
        let esp = rng.random_range(2.0..25.0);
        let maps = generate_phantom(64, 64, seed).unwrap();
        let stack = echo_stack(&maps, etl, esp).unwrap();
        for i in 0..64 * 64 {
            if maps.pd().data()[i] == 0.0 {
                continue;
            }
            for w in stack.echoes().windows(2) {
                if !(w[1].data()[i].norm() < w[0].data()[i].norm()) {
                    violations += 1;
                }
            }
        }
    }
    report("AC7 decay monotonicity", violations == 0, format!("{violations} violations over 100 phantoms"));
}

/// Sliding-window SSIM evaluated directly from its definition.
fn ssim_oracle(a: &RealImage, b: &RealImage) -> f64 {
    let (ny, nx) = a.shape();
    let (lo, hi) = a.data().iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let l = hi - lo;
    let (c1, c2) = ((0.01 * l).powi(2), (0.03 * l).powi(2));
    let w = 7;
    let mut sum = 0.0;
    let mut count = 0;
    for y0 in 0..=ny - w {
        for x0 in 0..=nx - w {
            let px: Vec<(f64, f64)> = (y0..y0 + w)
                .flat_map(|y| (x0..x0 + w).map(move |x| (y, x)))
                .map(|(y, x)| (a.get(y, x), b.get(y, x)))
                .collect();
            let n = px.len() as f64;
            let ma = px.iter().map(|p| p.0).sum::<f64>() / n;
            let mb = px.iter().map(|p| p.1).sum::<f64>() / n;
            let va = px.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / (n - 1.0);
            let vb = px.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / (n - 1.0);
            let cov = px.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / (n - 1.0);
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn ac8_metric_sanity() {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut identity_ok = true;
    for _ in 0..20 {
        let a = RealImage::from_fn(16, 16, |_, _| rng.random_range(0.0..1.0));
        let b = RealImage::from_fn(16, 16, |y, x| 0.7 * a.get(y, x) + rng.random_range(0.0..0.5));
        identity_ok &= ssim(&a, &a, None).unwrap() == 1.0 && nrmse(&a, &a).unwrap() == 0.0;
        worst = worst.max((ssim(&a, &b, None).unwrap() - ssim_oracle(&a, &b)).abs());
    }
    report(
        "AC8 metric sanity",
        identity_ok && worst <= TOL,
        format!("identity exact: {identity_ok}, max |ssim - oracle| {worst:.2e} (<= {TOL:e})"),
    );
}

#[test]
fn ac9_bit_exact_io() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for i in 0..1000 {
        let (ny, nx) = (rng.random_range(1..40), rng.random_range(1..40));
        let data: Vec<f32> = (0..ny * nx).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        let img = MagnitudeImage::new(ny, nx, data).unwrap();
        let p = dir.path().join(format!("{i}.fseimg"));
        export_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        if back.to_bytes() != img.to_bytes() || fs::read(&p).unwrap() != back.to_bytes() {
            mismatches += 1;
        }
    }

    let cfg = SimConfig {
        ny: 96,
        nx: 80,
        etl: 8,
        n_events: 4,
        n_samples: 4,
        base_seed: 123,
        pipeline: PipelineChoice::Both,
        ..SimConfig::default()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate_dataset(&cfg, &a).unwrap();
    generate_dataset(&cfg, &b).unwrap();
    let snapshot = |d: &std::path::Path| {
        let mut v: Vec<_> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let identical = snapshot(&a) == snapshot(&b);
    report(
        "AC9 bit-exact IO",
        mismatches == 0 && identical,
        format!("{mismatches}/1000 roundtrip mismatches, regenerated dataset identical: {identical}"),
    );
}
