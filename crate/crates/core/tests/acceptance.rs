//! Acceptance suite: one line per criterion, nonzero exit status on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use multiport::bounds::divisibility_witness_for;
use multiport::interferometer::ComplexMatrix;
use multiport::optimizer::{objective_gradient, MinimizeOptions};
use multiport::sources::Realization;
use multiport::{
    check_trace_inequalities, classical_min, direct_sum, divisibility_threshold,
    fock_oracle_pair_correlator, ftm, gbar_objective, mc_estimate_gbar, minimize,
    random_unitary, ClassicalSetup, ClassicalSource, Complex64, OverlapMatrix, PhotonStatistics,
    PsiConfiguration, QuantumSetup, WitnessRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, runtime limit and check of one criterion.
type Criterion = (&'static str, Option<Duration>, fn(Instant) -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        // NaN compares false and therefore fails
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian(r: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller keeps the suite free of extra distribution crates
    let u: f64 = 1.0 - r.random::<f64>();
    let v: f64 = r.random::<f64>();
    Complex64::from_polar((-u.ln()).sqrt(), std::f64::consts::TAU * v)
}

fn random_config(r: &mut ChaCha8Rng, n: usize, m: usize) -> PsiConfiguration {
    let vectors = (0..m).map(|_| (0..n).map(|_| complex_gaussian(r)).collect()).collect();
    PsiConfiguration::normalized(vectors).expect("nonzero gaussian vectors")
}

/// `rows × cols` block of a random unitary.
fn random_transfer(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let size = rows.max(cols);
    let u = random_unitary(size, r.random()).unwrap();
    let entries: Vec<Complex64> = (0..rows).flat_map(|i| (0..cols).map(move |a| (i, a))).map(|(i, a)| u.get(i, a)).collect();
    ComplexMatrix::from_row_major(rows, cols, &entries).unwrap()
}

fn random_classical_source(r: &mut ChaCha8Rng) -> ClassicalSource {
    match r.random_range(0..3) {
        0 => ClassicalSource::fixed(r.random_range(0.1..2.0)).unwrap(),
        1 => ClassicalSource::pseudo_thermal(r.random_range(0.1..3.0), 12).unwrap(),
        _ => {
            let p = r.random_range(0.1..0.9);
            ClassicalSource::new(vec![
                Realization { probability: p, amplitude: r.random_range(0.0..1.0) },
                Realization { probability: 1.0 - p, amplitude: r.random_range(0.5..2.5) },
            ])
            .unwrap()
        }
    }
}

fn random_overlap(r: &mut ChaCha8Rng, n: usize) -> OverlapMatrix {
    let dim = n + 1;
    let vectors: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            let v: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(r)).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect();
    let gram: Vec<Complex64> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| if a == b { Complex64::new(1.0, 0.0) } else { vectors[a].iter().zip(&vectors[b]).map(|(x, y)| x.conj() * y).sum() })
        .collect();
    OverlapMatrix::from_matrix(&ComplexMatrix::from_row_major(n, n, &gram).unwrap()).unwrap()
}

fn hom_classical() -> ClassicalSetup {
    let sources = vec![ClassicalSource::fixed(1.0).unwrap(), ClassicalSource::fixed(1.0).unwrap()];
    ClassicalSetup::new(ftm(2).unwrap().into_complex(), sources).unwrap()
}

fn ac1() -> Outcome {
    let q = QuantumSetup::new(ftm(2).map_err(err)?, vec![PhotonStatistics::fock(1); 2]).map_err(err)?;
    let gq = q.gbar().map_err(err)?.gbar;
    ensure!(gq.abs() <= 1e-12, "quantum Ḡ = {gq:e}");
    let gc = hom_classical().gbar().map_err(err)?.gbar;
    ensure!(gc == 0.5, "classical Ḡ = {gc:.17}");
    Ok(format!("quantum {gq:.1e}, classical {gc}"))
}

fn ac2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_saturating: f64 = 0.0;
    for n in 1..=6 {
        for m in 2..=6 {
            let bound = classical_min(n, m).map_err(err)?;
            let best = minimize(n, m, &MinimizeOptions::new(20, 1000 + (10 * n + m) as u64)).map_err(err)?;
            let gap = (best.value - bound).abs();
            ensure!(gap <= 1e-6, "(N={n}, M={m}): minimum {} vs bound {bound}", best.value);
            let sat = gbar_objective(&PsiConfiguration::saturating(n, m).map_err(err)?);
            let sat_gap = (sat - bound).abs();
            ensure!(sat_gap <= 1e-12, "(N={n}, M={m}): saturating vectors give {sat} vs {bound}");
            worst = worst.max(gap);
            worst_saturating = worst_saturating.max(sat_gap);
        }
    }
    Ok(format!("36 cases, max gap {worst:.1e}, saturating max gap {worst_saturating:.1e}"))
}

fn ac3() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for instance in 0..100 {
        let m = r.random_range(2..=3);
        let u = random_unitary(m, 500 + instance).map_err(err)?;
        // at least two photons so the correlator is not identically zero
        let occupation = loop {
            let occ: Vec<usize> = (0..m).map(|_| r.random_range(0..=2)).collect();
            if occ.iter().sum::<usize>() >= 2 {
                break occ;
            }
        };
        let stats = occupation.iter().map(|&n| PhotonStatistics::fock(n)).collect();
        let setup = QuantumSetup::new(u.clone(), stats).map_err(err)?;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let formula = setup.pair_correlator(i, j).map_err(err)?;
                let oracle = fock_oracle_pair_correlator(&u, &occupation, i, j).map_err(err)?;
                let rel = if oracle.abs() < 1e-300 { formula.abs() } else { ((formula - oracle) / oracle).abs() };
                ensure!(rel <= 1e-10, "instance {instance} {occupation:?} ({i},{j}): {formula} vs {oracle}");
                worst = worst.max(rel);
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} correlators, max relative error {worst:.1e}"))
}

fn ac4() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let m = r.random_range(2..=4);
        let u = random_unitary(m, 900 + k).map_err(err)?;
        let means: Vec<f64> = (0..m).map(|_| r.random_range(0.2..2.0)).collect();
        let stats = means.iter().map(|&mu| PhotonStatistics::coherent(mu, 40)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let gq = QuantumSetup::new(u.clone(), stats).map_err(err)?.gbar().map_err(err)?.gbar;
        let sources = means.iter().map(|mu| ClassicalSource::fixed(mu.sqrt())).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let gc = ClassicalSetup::new(u.into_complex(), sources).map_err(err)?.gbar().map_err(err)?.gbar;
        ensure!((gq - gc).abs() <= 1e-12, "unitary {k}: quantum {gq} vs classical {gc}");
        worst = worst.max((gq - gc).abs());
    }
    Ok(format!("20 unitaries, max difference {worst:.1e}"))
}

fn ac5() -> Outcome {
    let kinds: [(&str, PhotonStatistics); 3] = [
        ("fock(1)", PhotonStatistics::fock(1)),
        ("coherent(1)", PhotonStatistics::coherent(1.0, 30).map_err(err)?),
        ("thermal(1)", PhotonStatistics::thermal(1.0, 60).map_err(err)?),
    ];
    let mut worst: f64 = 0.0;
    for (name, q) in &kinds {
        let eta = q.eta().map_err(err)?;
        for m in 2..=8 {
            let g = QuantumSetup::new(ftm(m).map_err(err)?, vec![q.clone(); m]).map_err(err)?.gbar().map_err(err)?.gbar;
            let expected = 1.0 - (1.0 + eta) / m as f64;
            ensure!((g - expected).abs() <= 1e-6, "{name}, M={m}: {g} vs {expected}");
            worst = worst.max((g - expected).abs());
        }
    }
    Ok(format!("21 cases, max deviation {worst:.1e}"))
}

fn ac6() -> Outcome {
    let rule = WitnessRule::default();
    let mut lines = Vec::new();
    for k in [2, 3, 4] {
        let m = 2 * k;
        let threshold = divisibility_threshold(m, 1.0).map_err(err)?;
        let block = direct_sum(&ftm(k).map_err(err)?, &ftm(k).map_err(err)?);
        let split = QuantumSetup::new(block, vec![PhotonStatistics::fock(1); m]).map_err(err)?;
        let g_split = split.gbar().map_err(err)?.gbar;
        ensure!((g_split - threshold).abs() <= 1e-12, "m={m}: block matrix gives {g_split} vs threshold {threshold}");
        let full = QuantumSetup::new(ftm(m).map_err(err)?, vec![PhotonStatistics::fock(1); m]).map_err(err)?;
        let g_full = full.gbar().map_err(err)?.gbar;
        let expected = 1.0 - 2.0 / m as f64;
        ensure!((g_full - expected).abs() <= 1e-12, "m={m}: full FTM gives {g_full} vs {expected}");
        ensure!(g_full < threshold, "m={m}: full FTM {g_full} not below {threshold}");
        let v_full = divisibility_witness_for(&full, &rule).map_err(err)?;
        let v_split = divisibility_witness_for(&split, &rule).map_err(err)?;
        ensure!(v_full.certified(), "m={m}: full FTM not certified: {}", v_full.summary());
        ensure!(!v_split.certified(), "m={m}: block matrix certified: {}", v_split.summary());
        lines.push(format!("m={m} threshold {threshold:.6}"));
    }
    Ok(lines.join(", "))
}

fn ac7(start: Instant) -> Outcome {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let m = r.random_range(2..=4);
        let n = r.random_range(1..=4);
        let transfer = random_transfer(&mut r, m, n);
        let sources = (0..n).map(|_| random_classical_source(&mut r)).collect();
        let mut setup = ClassicalSetup::new(transfer, sources).map_err(err)?;
        if k % 2 == 1 {
            setup = setup.with_overlap(random_overlap(&mut r, n)).map_err(err)?;
        }
        let exact = setup.gbar().map_err(err)?.gbar;
        let est = mc_estimate_gbar(&setup, 100_000, 77 + k).map_err(err)?;
        let se = est.stderr.ok_or("missing stderr")?;
        // a fluctuation-free setup has stderr at round-off level; 1e-12 is the summation floor
        let diff = (est.gbar - exact).abs();
        ensure!(diff <= 3.0 * se + 1e-12, "setup {k}: MC {} ± {se} vs exact {exact}", est.gbar);
        let z = if se > 1e-12 { diff / se } else { 0.0 };
        worst = worst.max(z);
    }
    let hom = mc_estimate_gbar(&hom_classical(), 1_000_000, 2024).map_err(err)?;
    let se = hom.stderr.ok_or("missing stderr")?;
    ensure!(se <= 0.005, "HOM stderr {se}");
    ensure!((hom.gbar - 0.5).abs() <= 3.0 * se, "HOM MC {} ± {se}", hom.gbar);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("max |z| {worst:.2} over 20 setups, HOM {:.4} ± {se:.1e}", hom.gbar))
}

fn ac8() -> Outcome {
    let mut r = rng(8);
    let mut closest = f64::INFINITY;
    for k in 0..500 {
        let m = r.random_range(2..=6);
        let n = r.random_range(1..=6);
        let transfer = random_transfer(&mut r, m, n);
        let sources = (0..n).map(|_| random_classical_source(&mut r)).collect();
        let mut setup = ClassicalSetup::new(transfer, sources).map_err(err)?;
        if k % 3 == 0 {
            setup = setup.with_overlap(random_overlap(&mut r, n)).map_err(err)?;
        }
        let report = setup.gbar().map_err(err)?;
        let bound = classical_min(n, report.active_detectors.len()).map_err(err)?;
        ensure!(report.gbar >= bound - 1e-9, "classical setup {k}: {} below {bound}", report.gbar);
        closest = closest.min(report.gbar - bound);
    }
    for k in 0..500 {
        let m = r.random_range(2..=6);
        let u = random_unitary(m, 7000 + k).map_err(err)?;
        let stats = (0..m)
            .map(|_| {
                let mean = r.random_range(0.05..2.0);
                if r.random_bool(0.5) { PhotonStatistics::coherent(mean, 40) } else { PhotonStatistics::thermal(mean, 90) }
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        for q in &stats {
            ensure!(q.eta().map_err(err)? <= 1e-12, "generated eta > 0");
        }
        let setup = QuantumSetup::new(u, stats).map_err(err)?;
        let report = setup.gbar().map_err(err)?;
        let bound = classical_min(setup.active_sources(), report.active_detectors.len()).map_err(err)?;
        ensure!(report.gbar >= bound - 1e-9, "quantum setup {k}: {} below {bound}", report.gbar);
        closest = closest.min(report.gbar - bound);
    }
    Ok(format!("1000 setups, smallest margin above bound {closest:.2e}"))
}

fn ac9() -> Outcome {
    let mut r = rng(9);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        // with N = 1 the objective is constant and the gradient vanishes identically
        let n = r.random_range(2..=6);
        let m = r.random_range(2..=6);
        let c = random_config(&mut r, n, m);
        let g = objective_gradient(c.vectors());
        let mut err2 = 0.0;
        let mut norm2 = 0.0;
        for i in 0..m {
            for a in 0..n {
                for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                    let shifted = |s: f64| {
                        let mut v = c.vectors().to_vec();
                        v[i][a] += dir * s;
                        // evaluated off the sphere, as the gradient is unconstrained
                        raw_objective(&v)
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    let an = if dir.re == 1.0 { g[i][a].re } else { g[i][a].im };
                    err2 += (fd - an).powi(2);
                    norm2 += an * an;
                }
            }
        }
        let rel = (err2 / norm2).sqrt();
        ensure!(rel <= 1e-6, "configuration {k} (N={n}, M={m}): relative error {rel:e}");
        worst = worst.max(rel);
    }
    Ok(format!("100 configurations, max relative error {worst:.1e}"))
}

/// The objective formula on arbitrary (not necessarily unit) vectors.
fn raw_objective(v: &[Vec<Complex64>]) -> f64 {
    let m = v.len();
    let mut s = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let ov: Complex64 = v[i].iter().zip(&v[j]).map(|(a, b)| a.conj() * b).sum();
            let local: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a.norm_sqr() * b.norm_sqr()).sum();
            s += ov.norm_sqr() - local;
        }
    }
    1.0 + s / (m * (m - 1) / 2) as f64
}

fn ac10() -> Outcome {
    let mut r = rng(10);
    let mut lowest = f64::INFINITY;
    for k in 0..1000 {
        let n = r.random_range(1..=8);
        let m = r.random_range(1..=8);
        let c = random_config(&mut r, n, m);
        let rep = check_trace_inequalities(&c);
        ensure!(rep.first_slack >= -1e-10 && rep.second_slack >= -1e-10, "configuration {k}: {rep:?}");
        lowest = lowest.min(rep.first_slack.min(rep.second_slack));
    }
    Ok(format!("1000 configurations, lowest slack {lowest:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1  Hong-Ou-Mandel reproduction", Some(Duration::from_secs(1)), |_| ac1()),
        ("AC2  classical bound tightness", Some(Duration::from_secs(60)), |_| ac2()),
        ("AC3  Fock oracle equivalence", Some(Duration::from_secs(30)), |_| ac3()),
        ("AC4  coherent-state reduction", None, |_| ac4()),
        ("AC5  symmetric quantum minimum", None, |_| ac5()),
        ("AC6  divisibility witness", None, |_| ac6()),
        ("AC7  Monte Carlo consistency", Some(Duration::from_secs(120)), ac7),
        ("AC8  no false positives", None, |_| ac8()),
        ("AC9  gradient check", None, |_| ac9()),
        ("AC10 trace inequalities", None, |_| ac10()),
    ];
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(start)))
            .unwrap_or_else(|_| Err("panicked".to_string()))
            .and_then(|detail| match limit {
                Some(l) if start.elapsed() > l => Err(format!("{detail}; exceeded {l:?}")),
                _ => Ok(detail),
            });
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({elapsed:.2} s): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {name} ({elapsed:.2} s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
