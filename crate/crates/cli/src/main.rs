use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rieszlab::analysis::{self, Library, MergeOutcome, Normalizer};
use rieszlab::constants::{self, Basis};
use rieszlab::energy::{self, RieszParam};
use rieszlab::manifold::canonical_align;
use rieszlab::optimizer::{run_trials, OptimizerSettings};
use rieszlab::stability::{certify, CertifyMode};
use rieszlab::torus_measure;
use rieszlab::voronoi;
use rieszlab::Manifold;

#[derive(Parser)]
#[command(name = "rieszlab", version, about = "Riesz s-energy configurations on the sphere and tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sphere,
    Torus,
}

#[derive(Args, Clone, Copy)]
struct Surface {
    #[arg(long, value_enum, default_value = "sphere")]
    manifold: Kind,
    /// Major radius of the torus.
    #[arg(long)]
    l: Option<f64>,
    /// Minor radius of the torus.
    #[arg(long)]
    a: Option<f64>,
}

impl Surface {
    fn manifold(self) -> Result<Manifold> {
        Ok(match self.manifold {
            Kind::Sphere => Manifold::Sphere,
            Kind::Torus => {
                let (Some(l), Some(a)) = (self.l, self.a) else { bail!("a torus needs --l and --a") };
                Manifold::torus(l, a)?
            }
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and merge the results into a library.
    Generate {
        #[command(flatten)]
        surface: Surface,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// First seed; trials use consecutive seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        relaxed: bool,
    },
    /// Recompute the stability certificate of every record.
    Certify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        relaxed: bool,
    },
    /// Voronoi cells of the lowest-energy sphere record with N points.
    Voronoi {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print lattice constants and the expansion catalogs.
    Constants {
        #[arg(long)]
        s: Option<u32>,
    },
    /// Exact and discretized torus equilibrium measures.
    TorusMeasure {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 1000)]
        m: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Add an x y z coordinate file to a library.
    Ingest {
        #[arg(long)]
        xyz: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares fit of expansion coefficients to (N, E) data.
    Fit {
        /// CSV with columns N and E.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        s: u32,
        /// Number of leading catalog terms held fixed.
        #[arg(long, default_value_t = 0)]
        fix: usize,
        /// Comma-separated free terms, e.g. `N,N^1/2`.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
        /// Inclusive N range `LO:HI`; either side may be empty.
        #[arg(long)]
        range: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Average-minus-lowest energy per N, normalized by a catalog term.
    Gap {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        surface: Surface,
        #[arg(long)]
        s: f64,
        /// Catalog term used as the normalizer, e.g. `N^3/2`.
        #[arg(long)]
        normalizer: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("RIESZLAB_THREADS") {
        let threads: usize = v.parse().with_context(|| format!("RIESZLAB_THREADS must be a count, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { surface, n, s, trials, seed, out, relaxed } => {
            generate(surface.manifold()?, n, s, trials, seed, &out, relaxed)
        }
        Command::Certify { input, relaxed } => recertify(&input, relaxed),
        Command::Voronoi { input, n, s, csv } => voronoi_cmd(&input, n, s, csv.as_deref()),
        Command::Constants { s } => constants_cmd(s),
        Command::TorusMeasure { l, a, m, csv } => torus_cmd(l, a, m, csv.as_deref()),
        Command::Ingest { xyz, s, out } => ingest(&xyz, s, &out),
        Command::Fit { input, s, fix, free, range, csv } => fit(&input, s, fix, &free, range.as_deref(), csv.as_deref()),
        Command::Gap { input, surface, s, normalizer, csv } => gap(&input, surface.manifold()?, s, &normalizer, csv.as_deref()),
    }
}

fn mode(relaxed: bool) -> CertifyMode {
    if relaxed {
        CertifyMode::Relaxed
    } else {
        CertifyMode::Auto
    }
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn generate(manifold: Manifold, n: usize, s: f64, trials: u64, seed: u64, out: &Path, relaxed: bool) -> Result<()> {
    let s = RieszParam::new(s)?;
    let settings = OptimizerSettings::default();
    let seeds: Vec<u64> = (seed..seed + trials).collect();
    let results = run_trials(manifold, n, s, &seeds, &settings);
    let certified: Vec<_> = results
        .into_par_iter()
        .zip(seeds.par_iter())
        .map(|(r, &sd)| {
            let trial = r.map_err(|e| (sd, e))?;
            let cert = certify(&trial.config, s, mode(relaxed)).map_err(|e| (sd, e))?;
            Ok((trial, cert))
        })
        .collect();
    let mut lib = Library::load_or_default(out)?;
    let (mut new, mut dup, mut failed) = (0, 0, 0);
    for item in certified {
        match item {
            Ok((trial, cert)) => match lib.merge_record(&trial, &cert, s)? {
                MergeOutcome::New(_) => new += 1,
                MergeOutcome::Duplicate(_) => dup += 1,
                MergeOutcome::Discarded => {}
            },
            Err((sd, e)) => {
                log::warn!("seed {sd}: {e}");
                failed += 1;
            }
        }
    }
    lib.prune_superseded();
    lib.sort();
    lib.save(out)?;
    println!("trials {trials}  new {new}  duplicates {dup}  failed {failed}  discarded {}", lib.discarded());
    if let Some(low) = lib.lowest(manifold, s.s(), n) {
        println!("lowest energy {}", sci(low));
    }
    Ok(())
}

fn recertify(input: &Path, relaxed: bool) -> Result<()> {
    let mut lib = Library::load(input)?;
    let mut records = lib.records().to_vec();
    let certs: Vec<_> = records
        .par_iter()
        .map(|r| -> Result<_> {
            let s = RieszParam::new(r.s)?;
            let config = canonical_align(&r.configuration()?)?;
            Ok(certify(&config, s, mode(relaxed))?)
        })
        .collect::<Result<_>>()?;
    println!("n,s,energy,grad_norm,lambda_star,lhs,rhs,stable");
    for (r, c) in records.iter_mut().zip(&certs) {
        r.grad_norm = c.grad_norm;
        r.lambda_star = c.lambda_star;
        r.stable = c.stable;
        r.mode = if c.relaxed { CertifyMode::Relaxed } else { CertifyMode::Strict };
        println!(
            "{},{},{},{:.3e},{:.3e},{:.3e},{:.3e},{}",
            r.n,
            r.s,
            sci(r.energy),
            c.grad_norm,
            c.lambda_star,
            c.criterion_lhs,
            c.criterion_rhs,
            c.stable
        );
    }
    lib = Library::new();
    for r in records {
        lib.insert(r);
    }
    lib.sort();
    lib.save(input)?;
    Ok(())
}

fn voronoi_cmd(input: &Path, n: usize, s: Option<f64>, csv: Option<&Path>) -> Result<()> {
    let lib = Library::load(input)?;
    let matching: Vec<_> = lib
        .records()
        .iter()
        .filter(|r| r.manifold == Manifold::Sphere && r.n == n && s.is_none_or(|s| r.s == s))
        .collect();
    let Some(best) = matching.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) else {
        bail!("no sphere record with n = {n}");
    };
    let config = best.configuration()?;
    let diagram = voronoi::spherical_voronoi(&config)?;
    let summary = voronoi::defect_summary(&diagram);
    println!("energy {}  s {}", sci(best.energy), best.s);
    println!("hexagonal fraction {:.6}  non-hexagonal cells {}", summary.hex_fraction, summary.defect_count);
    for (sides, count) in &summary.counts {
        println!("{sides}-sided {count}");
    }
    let bounds = voronoi::bound_curves(n);
    println!("upper bound {:.3}  scar line {:.3}", bounds.upper_bound, bounds.scar_line);
    let (weight, hex): (f64, f64) = matching
        .iter()
        .filter(|r| r.stable && r.s == best.s)
        .filter_map(|r| {
            let d = voronoi::spherical_voronoi(&r.configuration().ok()?).ok()?;
            Some((r.occurrences as f64, r.occurrences as f64 * voronoi::defect_summary(&d).hex_fraction))
        })
        .fold((0.0, 0.0), |(w, h), (a, b)| (w + a, h + b));
    if weight > 0.0 {
        println!("occurrence-weighted hexagonal fraction over stable records {:.6}", hex / weight);
    }
    if let Some(path) = csv {
        let s = RieszParam::new(best.s)?;
        let energies = energy::total_energy(&config, s)?.point_energies;
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        voronoi::write_cells_csv(&diagram, Some(&energies), BufWriter::new(f))?;
    }
    Ok(())
}

fn constants_cmd(s: Option<u32>) -> Result<()> {
    let c = constants::ewald_c();
    println!("ewald_C {}", sci(c));
    println!("C_1 {}", sci(constants::cs_coefficient(1.0)?));
    println!("zeta_hex(3) {}", sci(constants::hex_zeta(3.0)?));
    println!("s3_leading {}", sci((3f64.sqrt() / (8.0 * std::f64::consts::PI)).powf(1.5) * constants::hex_zeta(3.0)?));
    println!("sphere_second_term {}", sci(torus_measure::second_term_coefficient(&Manifold::Sphere, None)?));
    let which: Vec<u32> = s.map(|s| vec![s]).unwrap_or_else(|| vec![0, 1, 2, 3]);
    for s in which {
        let cat = constants::expansion_catalog(s)?;
        println!("s = {s}");
        for t in &cat.terms {
            let show = |v: Option<f64>| v.map(sci).unwrap_or_else(|| "-".into());
            println!(
                "  {:<8} value {:<24} {:<12} conjectured {:<24} fitted {}",
                t.basis.label(),
                show(t.coefficient),
                format!("{:?}", t.provenance).to_lowercase(),
                show(t.conjectured),
                show(t.fitted)
            );
        }
    }
    Ok(())
}

fn torus_cmd(l: f64, a: f64, m: usize, csv: Option<&Path>) -> Result<()> {
    let exact = torus_measure::landkof_energy(l, a)?;
    let profile = torus_measure::solve_equilibrium(l, a, m)?;
    let manifold = Manifold::torus(l, a)?;
    let coeff = torus_measure::second_term_coefficient(&manifold, Some(&profile))?;
    println!("landkof {}", sci(exact));
    println!("discretized {}  M {m}", sci(profile.energy));
    println!("relative error {:.3e}", (profile.energy - exact) / exact);
    println!("second term coefficient {}", sci(coeff));
    if profile.constrained {
        println!("warning: negative weights were clipped");
    }
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        w.write_record(["v", "weight", "density"])?;
        for j in 0..profile.m() {
            w.write_record([sci(profile.v[j]), sci(profile.weights[j]), sci(profile.density[j])])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn ingest(xyz: &Path, s: f64, out: &Path) -> Result<()> {
    let s = RieszParam::new(s)?;
    let config = canonical_align(&analysis::ingest_xyz(xyz)?)?;
    let cert = certify(&config, s, CertifyMode::Auto)?;
    let mut record = analysis::ConfigRecord::from_certificate(&config, s, &cert)?;
    record.occurrences = 1;
    let energy = record.energy;
    let mut lib = Library::load_or_default(out)?;
    let outcome = lib.insert(record);
    lib.sort();
    lib.save(out)?;
    println!("n {}  energy {}  stable {}  {:?}", config.n(), sci(energy), cert.stable, outcome);
    Ok(())
}

fn parse_range(range: Option<&str>) -> Result<(usize, usize)> {
    let Some(r) = range else { return Ok((0, usize::MAX)) };
    let Some((lo, hi)) = r.split_once(':') else { bail!("range must look like LO:HI, got `{r}`") };
    let lo = if lo.is_empty() { 0 } else { lo.parse()? };
    let hi = if hi.is_empty() { usize::MAX } else { hi.parse()? };
    Ok((lo, hi))
}

fn read_points(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut data = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |k: usize| row.get(k).with_context(|| format!("row {} has too few columns", i + 2));
        let n: f64 = field(0)?.trim().parse()?;
        let e: f64 = field(1)?.trim().parse()?;
        if n < 1.0 || n.fract() != 0.0 {
            bail!("row {}: N must be a positive integer", i + 2);
        }
        data.push((n as usize, e));
    }
    data.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(data)
}

fn fit(input: &Path, s: u32, fix: usize, free: &[String], range: Option<&str>, csv: Option<&Path>) -> Result<()> {
    let data = read_points(input)?;
    let catalog = constants::expansion_catalog(s)?;
    let free: Vec<Basis> = free.iter().map(|f| f.parse()).collect::<rieszlab::Result<_>>()?;
    let range = parse_range(range)?;
    let fit = analysis::fit_expansion(&data, &catalog, fix, &free, range)?;
    for (b, c) in &fit.fixed {
        println!("fixed {:<8} {}", b.label(), sci(*c));
    }
    for (b, c) in &fit.free {
        println!("free  {:<8} {}", b.label(), sci(*c));
    }
    println!("points {}  max |residual| {:.3e}  condition {:.3e}", fit.residuals.len(), fit.max_abs_residual, fit.condition);
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        w.write_record(["N", "residual"])?;
        for (n, r) in &fit.residuals {
            w.write_record([n.to_string(), sci(*r)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn gap(input: &Path, manifold: Manifold, s: f64, normalizer: &str, csv: Option<&Path>) -> Result<()> {
    let lib = Library::load(input)?;
    let basis: Basis = normalizer.parse()?;
    let norm = if s.fract() == 0.0 && (0.0..=3.0).contains(&s) {
        Normalizer::from_catalog(&constants::expansion_catalog(s as u32)?, basis)?
    } else {
        Normalizer { basis, scale: 1.0 }
    };
    let series = analysis::gap_series(&lib, manifold, s, &norm);
    for n in &series.excluded {
        eprintln!("N = {n} excluded: fewer than two records");
    }
    let header = ["N", "records", "trials", "mean", "sem", "lowest", "gap", "norm", "ratio"];
    let rows: Vec<[String; 9]> = series
        .rows
        .iter()
        .map(|r| {
            [
                r.n.to_string(),
                r.records.to_string(),
                r.trials.to_string(),
                sci(r.mean),
                sci(r.sem),
                sci(r.lowest),
                sci(r.gap),
                sci(r.norm),
                sci(r.ratio),
            ]
        })
        .collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", header.join(","))?;
    for r in &rows {
        writeln!(out, "{}", r.join(","))?;
    }
    if let Some(path) = csv {
        let mut w = csv_writer(path)?;
        w.write_record(header)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(())
}
