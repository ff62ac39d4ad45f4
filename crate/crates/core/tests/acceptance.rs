//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! optional dataset checks read these variables when set:
//!
//! * `RIESZLAB_FIT_S1_CSV`: `N,E` lowest energies on the sphere for s = 1,
//! * `RIESZLAB_FIT_S0_CSV`: `N,E` lowest energies on the sphere for s = 0,
//! * `RIESZLAB_XYZ_4352`: coordinates of the lowest known 4352-point state.

use std::f64::consts::PI;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use rieszlab::analysis::{self, gap_series, Library, Normalizer};
use rieszlab::constants::{self, expansion_catalog, Basis};
use rieszlab::energy::{self, RieszParam};
use rieszlab::manifold::{canonical_align, random_config};
use rieszlab::optimizer::{generate_candidate, run_trials, OptimizerSettings, TrialResult};
use rieszlab::stability::{certify, CertifyMode};
use rieszlab::summation::binned_sum;
use rieszlab::torus_measure::{landkof_energy, solve_equilibrium};
use rieszlab::voronoi::{defect_summary, spherical_voronoi};
use rieszlab::{Configuration, Manifold};

const CS1: f64 = -1.106102;

struct Gate {
    failed: Vec<u32>,
}

impl Gate {
    fn report(&mut self, k: u32, pass: bool, detail: String) {
        println!("criterion {k:>2} {}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(k);
        }
    }
}

fn rp(s: f64) -> RieszParam {
    RieszParam::new(s).unwrap()
}

fn icosahedron_energy() -> f64 {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pts = Vec::new();
    for a in [-1.0, 1.0] {
        for b in [-g, g] {
            pts.push([0.0, a, b]);
            pts.push([a, b, 0.0]);
            pts.push([b, 0.0, a]);
        }
    }
    let norm = (1.0 + g * g).sqrt();
    let mut e = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for (j, q) in pts.iter().enumerate() {
            if i != j {
                let d: f64 = (0..3).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt() / norm;
                e += 1.0 / d;
            }
        }
    }
    e
}

struct Campaign {
    n: usize,
    trials: Vec<TrialResult>,
    library: Library,
    failures: usize,
}

fn campaign(n: usize, s: f64, seeds: std::ops::Range<u64>) -> Campaign {
    let settings = OptimizerSettings::default();
    let seeds: Vec<u64> = seeds.collect();
    let mut trials = Vec::new();
    let mut failures = 0;
    for r in run_trials(Manifold::Sphere, n, rp(s), &seeds, &settings) {
        match r {
            Ok(t) if t.converged => trials.push(t),
            _ => failures += 1,
        }
    }
    let mut library = Library::new();
    for t in &trials {
        let cert = certify(&t.config, rp(s), CertifyMode::Auto).unwrap();
        library.merge_record(t, &cert, rp(s)).unwrap();
    }
    library.prune_superseded();
    Campaign { n, trials, library, failures }
}

fn best(c: &Campaign) -> f64 {
    c.trials.iter().map(|t| t.energy).fold(f64::INFINITY, f64::min)
}

fn read_csv(path: &str) -> Vec<(usize, f64)> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {path}: {e}"));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut f = l.split(',');
            let n: usize = f.next().unwrap().trim().parse().unwrap();
            let e: f64 = f.next().unwrap().trim().parse().unwrap();
            (n, e)
        })
        .collect()
}

fn within_two_figures(x: f64, want: f64) -> bool {
    (x - want).abs() <= 0.05 * want.abs()
}

fn random_rotation(rng: &mut StdRng) -> [[f64; 3]; 3] {
    // Normalized random quaternion.
    let mut q = [0.0f64; 4];
    loop {
        for v in q.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let n2: f64 = q.iter().map(|v| v * v).sum();
        if n2 > 1e-3 && n2 < 1.0 {
            let n = n2.sqrt();
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn random_aligned(manifold: Manifold, n: usize, seed: u64) -> Configuration {
    let c = random_config(manifold, n, seed, 0.5).unwrap();
    if manifold.is_sphere() {
        canonical_align(&c).unwrap()
    } else {
        c
    }
}

fn perturbed(c: &Configuration, k: usize, h: f64) -> Configuration {
    let mut p = c.params().to_vec();
    p[k] += h;
    Configuration::new(c.manifold(), p).unwrap()
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };
    let start = Instant::now();

    // 1. Lattice constant.
    let t = Instant::now();
    let c = constants::ewald_c();
    let elapsed = t.elapsed().as_secs_f64();
    gate.report(
        1,
        (c - -2.10671).abs() <= 5e-5 && elapsed < 1.0,
        format!("ewald_C = {c:.12} (target -2.10671 +/- 5e-5), {elapsed:.3} s (limit 1 s)"),
    );

    // 2. Two routes to the same constant.
    let lattice = 6.0 * constants::riemann_zeta(0.5).unwrap() * constants::dirichlet_l3(0.5).unwrap();
    let diff = (2.0 * c - lattice).abs();
    gate.report(2, diff < 1e-3, format!("|2 ewald_C - 6 zeta(1/2) L(1/2)| = {diff:.3e} (limit 1e-3)"));

    // 3. Second-order and s = 3 leading constants.
    let cs = constants::cs_coefficient(1.0).unwrap();
    let lead3 = (3f64.sqrt() / (8.0 * PI)).powf(1.5) * constants::hex_zeta(3.0).unwrap();
    gate.report(
        3,
        (cs - CS1).abs() <= 1e-4 && (lead3 - 0.1996278).abs() <= 1e-5,
        format!("C_1 = {cs:.9} (target {CS1} +/- 1e-4), s=3 leading = {lead3:.9} (target 0.1996278 +/- 1e-5)"),
    );

    // 4. Exact torus energies.
    let table = [(1.5, 0.47825526366953, 0.4782545), (2.0, 0.41123994225477, 0.411239), (3.0, 0.323438867490233, 0.3234383)];
    let errs: Vec<f64> = table.iter().map(|&(l, want, _)| ((landkof_energy(l, 1.0).unwrap() - want) / want).abs()).collect();
    gate.report(
        4,
        errs.iter().all(|&e| e <= 1e-9),
        format!("relative errors {:.2e} {:.2e} {:.2e} (limit 1e-9)", errs[0], errs[1], errs[2]),
    );

    // 5. Discretized equilibrium measures.
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for &(l, _, paper) in &table {
        let exact = landkof_energy(l, 1.0).unwrap();
        let p = solve_equilibrium(l, 1.0, 1000).unwrap();
        let rel = (p.energy - exact) / exact;
        ok &= (0.0..=3e-6).contains(&rel) && ((p.energy - paper) / paper).abs() < 3e-6;
        parts.push(format!("l={l}: {:.10} rel {rel:.2e}", p.energy));
    }
    gate.report(5, ok, format!("{} (limit 3e-6), {:.1} s", parts.join(", "), t.elapsed().as_secs_f64()));

    // 6. Small-N minima.
    let settings = OptimizerSettings::default();
    let e2 = generate_candidate(Manifold::Sphere, 2, rp(1.0), 1, &settings).unwrap().energy;
    let tetra = 12.0 / (8.0f64 / 3.0).sqrt();
    let e4 = generate_candidate(Manifold::Sphere, 4, rp(1.0), 1, &settings).unwrap().energy;
    let ico = icosahedron_energy();
    let sweep: Vec<f64> = (0..20)
        .map(|seed| generate_candidate(Manifold::Sphere, 12, rp(1.0), seed, &settings).unwrap().energy)
        .collect();
    let hits = sweep.iter().filter(|&&e| ((e - ico) / ico).abs() <= 1e-9).count();
    let e12 = sweep.iter().copied().fold(f64::INFINITY, f64::min);
    gate.report(
        6,
        (e2 - 1.0).abs() <= 1e-10 && ((e4 - tetra) / tetra).abs() <= 1e-9 && ((e12 - ico) / ico).abs() <= 1e-9,
        format!(
            "N=2 {e2:.12}, N=4 rel {:.1e}, N=12 best rel {:.1e} ({hits}/20 seeds within 1e-9)",
            ((e4 - tetra) / tetra).abs(),
            ((e12 - ico) / ico).abs()
        ),
    );

    // 7. Second-order term at desk scale.
    let t = Instant::now();
    let c100 = campaign(100, 1.0, 0..200);
    let c200 = campaign(200, 1.0, 0..100);
    let ratios: Vec<f64> =
        [&c100, &c200].iter().map(|c| (best(c) - (c.n * c.n) as f64) / (c.n as f64).powf(1.5)).collect();
    gate.report(
        7,
        ratios.iter().all(|r| ((r - CS1) / CS1).abs() <= 0.05),
        format!(
            "(E - N^2)/N^1.5 = {:.5} (N=100, {} trials), {:.5} (N=200, {} trials); target {CS1} +/- 5%; {:.0} s",
            ratios[0],
            c100.trials.len(),
            ratios[1],
            c200.trials.len(),
            t.elapsed().as_secs_f64()
        ),
    );

    // 8. Voronoi defect invariants.
    let mut euler_ok = true;
    let mut diagrams = 0;
    for c in [&c100, &c200] {
        for r in c.library.records() {
            let d = spherical_voronoi(&r.configuration().unwrap()).unwrap();
            euler_ok &= d.side_counts.iter().map(|&v| 6 - v as i64).sum::<i64>() == 12;
            diagrams += 1;
        }
    }
    for seed in 0..20 {
        let d = spherical_voronoi(&random_config(Manifold::Sphere, 50 + 10 * seed as usize, seed, 0.5).unwrap()).unwrap();
        euler_ok &= d.side_counts.iter().map(|&v| 6 - v as i64).sum::<i64>() == 12;
        diagrams += 1;
    }
    let (mut w, mut h, mut stable_trials) = (0.0, 0.0, 0u64);
    for r in c200.library.records().iter().filter(|r| r.stable) {
        let d = spherical_voronoi(&r.configuration().unwrap()).unwrap();
        w += r.occurrences as f64;
        h += r.occurrences as f64 * defect_summary(&d).hex_fraction;
        stable_trials += r.occurrences;
    }
    let hex = h / w;
    let mut detail = format!(
        "Euler sum 12 on {diagrams} diagrams: {euler_ok}; N=200 weighted hexagonal fraction {hex:.4} over {stable_trials} stable trials (limit > 0.91)"
    );
    let mut ok = euler_ok && hex > 0.91 && stable_trials >= 50;
    if let Ok(path) = std::env::var("RIESZLAB_XYZ_4352") {
        let cfg = analysis::ingest_xyz(&path).unwrap();
        let s = defect_summary(&spherical_voronoi(&cfg).unwrap());
        let only_567 = s.counts.keys().all(|k| (5..=7).contains(k));
        ok &= only_567 && s.defect_count % 2 == 0;
        detail += &format!("; ingested N={} has {} defects, sides {:?}", cfg.n(), s.defect_count, s.counts.keys().collect::<Vec<_>>());
    } else {
        detail += "; ingested N=4352 check skipped (RIESZLAB_XYZ_4352 unset)";
    }
    gate.report(8, ok, detail);

    // 9. Expansion fits.
    let mut rng = StdRng::seed_from_u64(9);
    let cat1 = expansion_catalog(1).unwrap();
    let basis = [Basis::N2, Basis::N3_2, Basis::N, Basis::N1_2];
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let coef: Vec<f64> = basis.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        let data: Vec<(usize, f64)> = (2..=200)
            .step_by(2)
            .map(|n| (n, basis.iter().zip(&coef).map(|(b, c)| c * b.eval(n as f64)).sum()))
            .collect();
        let fit = analysis::fit_expansion(&data, &cat1, 0, &basis, (1, usize::MAX)).unwrap();
        for (b, c) in basis.iter().zip(&coef) {
            worst = worst.max((fit.coefficient(*b).unwrap() - c).abs());
        }
    }
    let mut ok = worst <= 1e-10;
    let mut detail = format!("synthetic recovery over 100 instances, worst error {worst:.2e} (limit 1e-10)");
    if let Ok(path) = std::env::var("RIESZLAB_FIT_S1_CSV") {
        let fit = analysis::fit_expansion(&read_csv(&path), &cat1, 2, &[Basis::N, Basis::N1_2], (1, usize::MAX)).unwrap();
        let (a, b) = (fit.coefficient(Basis::N).unwrap(), fit.coefficient(Basis::N1_2).unwrap());
        ok &= within_two_figures(a, 0.05123) && within_two_figures(b, -0.3207);
        detail += &format!("; s=1 data alpha {a:.5} beta {b:.4}");
    } else {
        detail += "; s=1 dataset check skipped (RIESZLAB_FIT_S1_CSV unset)";
    }
    if let Ok(path) = std::env::var("RIESZLAB_FIT_S0_CSV") {
        let cat0 = expansion_catalog(0).unwrap();
        let fit =
            analysis::fit_expansion(&read_csv(&path), &cat0, 2, &[Basis::N, Basis::LogN, Basis::One], (501, 4352)).unwrap();
        let a = fit.coefficient(Basis::N).unwrap();
        ok &= within_two_figures(a, -0.0547);
        detail += &format!("; s=0 data alpha {a:.5}");
    } else {
        detail += "; s=0 dataset check skipped (RIESZLAB_FIT_S0_CSV unset)";
    }
    gate.report(9, ok, detail);

    // 10. Average-minus-lowest gaps.
    let norm1 = Normalizer { basis: Basis::N3_2, scale: CS1 };
    let g100 = gap_series(&c100.library, Manifold::Sphere, 1.0, &norm1);
    let runs = c100.trials.len() + c100.failures;
    let mut ok = g100.rows.len() == 1 && runs >= 200;
    let ratio = g100.rows.first().map_or(f64::NAN, |r| r.ratio);
    ok &= (0.0..=5e-4).contains(&ratio);
    let mut all = g100.rows.clone();
    all.extend(gap_series(&c200.library, Manifold::Sphere, 1.0, &norm1).rows);
    for s in [0.0, 2.0, 3.0] {
        let c = campaign(40, s, 0..30);
        let norm = Normalizer { basis: Basis::One, scale: 1.0 };
        all.extend(gap_series(&c.library, Manifold::Sphere, s, &norm).rows);
    }
    let nonneg = all.iter().all(|r| r.gap >= 0.0 && r.sem >= 0.0);
    ok &= nonneg;
    gate.report(
        10,
        ok,
        format!(
            "N=100 s=1 gap ratio {ratio:.3e} from {runs} trials, {} certified stable (limit [0, 5e-4]); gap >= 0 on all {} series rows: {nonneg}",
            g100.rows.first().map_or(0, |r| r.trials),
            all.len()
        ),
    );

    // 11. Kernel property suites.
    let mut rng = StdRng::seed_from_u64(11);
    let mut grad_worst = 0.0f64;
    let mut sym = true;
    let mut perm = true;
    let mut rot_worst = 0.0f64;
    let mut instances = 0;
    for s in [0.0, 1.0, 2.0, 3.0] {
        for k in 0..15u64 {
            instances += 1;
            let manifold = if k % 3 == 2 { Manifold::torus(2.0, 0.7).unwrap() } else { Manifold::Sphere };
            let n = rng.random_range(3..14);
            let cfg = random_aligned(manifold, n, rng.random());
            let g = energy::gradient(&cfg, rp(s)).unwrap();
            let h = 1e-4;
            let fd: Vec<f64> = (0..g.len())
                .map(|i| {
                    let e = |d: f64| energy::total_energy(&perturbed(&cfg, i, d), rp(s)).unwrap().total;
                    (-e(2.0 * h) + 8.0 * e(h) - 8.0 * e(-h) + e(-2.0 * h)) / (12.0 * h)
                })
                .collect();
            let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            grad_worst = grad_worst.max(num / den);

            let hess = energy::hessian(&cfg, rp(s)).unwrap();
            sym &= hess == hess.transpose();

            let pe = energy::total_energy(&cfg, rp(s)).unwrap().point_energies;
            let mut shuffled = pe.clone();
            shuffled.shuffle(&mut rng);
            perm &= binned_sum(pe.iter().copied()).unwrap().to_bits() == binned_sum(shuffled).unwrap().to_bits();

            let e0 = energy::total_energy(&cfg, rp(s)).unwrap().total;
            let moved = if manifold.is_sphere() {
                let r = random_rotation(&mut rng);
                let pts: Vec<[f64; 3]> = cfg
                    .points()
                    .iter()
                    .map(|p| [0, 1, 2].map(|i| (0..3).map(|j| r[i][j] * p[j]).sum::<f64>()))
                    .collect();
                Configuration::from_sphere_points(&pts).unwrap()
            } else {
                let shift = rng.random_range(0.0..2.0 * PI);
                let p: Vec<f64> = cfg.params().iter().enumerate().map(|(i, &x)| if i % 2 == 0 { x + shift } else { x }).collect();
                Configuration::new(manifold, p).unwrap()
            };
            let e1 = energy::total_energy(&moved, rp(s)).unwrap().total;
            rot_worst = rot_worst.max(((e1 - e0) / e0).abs());
        }
    }
    gate.report(
        11,
        grad_worst <= 1e-6 && sym && perm && rot_worst <= 1e-12,
        format!(
            "{instances} instances, s in {{0,1,2,3}}: gradient vs FD {grad_worst:.2e} (limit 1e-6), Hessian symmetric {sym}, binned permutation bit-identical {perm}, rotation {rot_worst:.2e} (limit 1e-12)"
        ),
    );

    println!("acceptance finished in {:.0} s", start.elapsed().as_secs_f64());
    if !gate.failed.is_empty() {
        println!("failed criteria: {:?}", gate.failed);
        std::process::exit(1);
    }
}
