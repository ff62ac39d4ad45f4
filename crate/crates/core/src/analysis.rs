//! Configuration library, coordinate ingestion, occurrence-weighted gap
//! statistics, expansion residuals and least-squares expansion fits.
//!
//! The library is a JSON-lines file with one [`ConfigRecord`] per line.
//! Energies are written twice: as a 17-significant-digit decimal for reading
//! and as a hexadecimal float, which is the value restored on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{Basis, ExpansionCatalog};
use crate::energy::{self, RieszParam};
use crate::error::{Error, Result};
use crate::manifold::{Configuration, Manifold};
use crate::optimizer::TrialResult;
use crate::stability::{CertifyMode, StabilityCertificate};

/// Relative energy tolerance of the duplicate test.
pub const DEDUP_ENERGY_TOL: f64 = 1e-9;
/// Relative componentwise tolerance on sorted point energies.
pub const DEDUP_POINT_TOL: f64 = 1e-8;
/// Accepted deviation of an ingested point's norm from one.
pub const INGEST_NORM_TOL: f64 = 1e-6;
/// Condition estimate above which a fit logs a warning.
pub const FIT_WARN_CONDITION: f64 = 1e12;

/// C99 `%a` style hexadecimal rendering, exact for every double.
pub fn format_hex_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 && mant == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    let dot = if digits.is_empty() { "" } else { "." };
    format!("{sign}0x{lead}{dot}{digits}p{e:+}")
}

/// Inverse of [`format_hex_float`].
pub fn parse_hex_float(s: &str) -> Result<f64> {
    match s.trim() {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => hexf_parse::parse_hexf64(t, false)
            .map_err(|e| Error::Parse { line: 0, message: format!("bad hexadecimal float `{t}`: {e}") }),
    }
}

/// Reads whitespace-separated `x y z` lines of points on the unit sphere. A
/// single integer on the first non-empty line is taken as a point count.
pub fn parse_xyz(text: &str) -> Result<Configuration> {
    let mut points = Vec::new();
    let mut expected = None;
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if first && fields.len() == 1 {
            first = false;
            if let Ok(count) = fields[0].parse::<usize>() {
                expected = Some(count);
                continue;
            }
        }
        first = false;
        if fields.len() != 3 {
            return Err(Error::Parse { line, message: format!("expected 3 coordinates, found {}", fields.len()) });
        }
        let mut p = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("`{f}` is not a finite number") })?;
        }
        let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if (norm - 1.0).abs() > INGEST_NORM_TOL {
            return Err(Error::Validation { line, message: format!("point has norm {norm}, not on the unit sphere") });
        }
        points.push([p[0] / norm, p[1] / norm, p[2] / norm]);
    }
    if let Some(count) = expected {
        if count != points.len() {
            return Err(Error::Validation {
                line: 1,
                message: format!("header announces {count} points, file has {}", points.len()),
            });
        }
    }
    Configuration::from_sphere_points(&points)
}

pub fn ingest_xyz(path: impl AsRef<Path>) -> Result<Configuration> {
    parse_xyz(&fs::read_to_string(path)?)
}

/// A distinct configuration together with how many trials reached it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRecord {
    pub manifold: Manifold,
    pub s: f64,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub params: Vec<f64>,
    pub energy: f64,
    /// Point energies, ascending; the rigid-motion invariant fingerprint.
    pub point_energies: Vec<f64>,
    pub grad_norm: f64,
    pub lambda_star: f64,
    pub mode: CertifyMode,
    pub stable: bool,
    pub occurrences: u64,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    manifold: Manifold,
    s: f64,
    n: usize,
    seeds: Vec<u64>,
    energy: String,
    energy_hex: String,
    grad_norm: f64,
    lambda_star: Option<f64>,
    mode: CertifyMode,
    stable: bool,
    occurrences: u64,
    point_energies: Vec<String>,
    params: Vec<f64>,
}

impl ConfigRecord {
    /// Record for a configuration and its certificate, with no trials yet.
    pub fn from_certificate(config: &Configuration, s: RieszParam, cert: &StabilityCertificate) -> Result<Self> {
        let breakdown = energy::total_energy(config, s)?;
        let mut point_energies = breakdown.point_energies;
        point_energies.sort_by(f64::total_cmp);
        Ok(ConfigRecord {
            manifold: config.manifold(),
            s: s.s(),
            n: config.n(),
            seeds: Vec::new(),
            params: config.params().to_vec(),
            energy: breakdown.total,
            point_energies,
            grad_norm: cert.grad_norm,
            lambda_star: cert.lambda_star,
            mode: if cert.relaxed { CertifyMode::Relaxed } else { CertifyMode::Strict },
            stable: cert.stable,
            occurrences: 0,
        })
    }

    pub fn configuration(&self) -> Result<Configuration> {
        Configuration::new(self.manifold, self.params.clone())
    }

    fn same_key(&self, other: &ConfigRecord) -> bool {
        self.manifold == other.manifold && self.s == other.s && self.n == other.n
    }

    /// Same key, energies within [`DEDUP_ENERGY_TOL`] and sorted point
    /// energies within [`DEDUP_POINT_TOL`].
    pub fn is_duplicate_of(&self, other: &ConfigRecord) -> bool {
        self.same_key(other)
            && rel_close(self.energy, other.energy, DEDUP_ENERGY_TOL)
            && self.point_energies.len() == other.point_energies.len()
            && self.point_energies.iter().zip(&other.point_energies).all(|(a, b)| rel_close(*a, *b, DEDUP_POINT_TOL))
    }

    fn to_line(&self) -> RecordLine {
        RecordLine {
            manifold: self.manifold,
            s: self.s,
            n: self.n,
            seeds: self.seeds.clone(),
            energy: format!("{:.16e}", self.energy),
            energy_hex: format_hex_float(self.energy),
            grad_norm: self.grad_norm,
            lambda_star: self.lambda_star.is_finite().then_some(self.lambda_star),
            mode: self.mode,
            stable: self.stable,
            occurrences: self.occurrences,
            point_energies: self.point_energies.iter().map(|&e| format_hex_float(e)).collect(),
            params: self.params.clone(),
        }
    }

    fn from_line(rec: RecordLine, line: usize) -> Result<Self> {
        let bad = |message: String| Error::Validation { line, message };
        let energy = parse_hex_float(&rec.energy_hex).map_err(|e| bad(e.to_string()))?;
        let decimal: f64 = rec.energy.parse().map_err(|_| bad(format!("bad decimal energy `{}`", rec.energy)))?;
        if !rel_close(decimal, energy, 1e-15) {
            return Err(bad(format!("decimal energy {decimal} disagrees with hexadecimal {energy}")));
        }
        if rec.occurrences == 0 {
            return Err(bad("occurrence count must be at least one".into()));
        }
        if rec.params.len() != 2 * rec.n || rec.point_energies.len() != rec.n {
            return Err(bad(format!("record for n = {} has wrong vector lengths", rec.n)));
        }
        let point_energies =
            rec.point_energies.iter().map(|p| parse_hex_float(p)).collect::<Result<Vec<_>>>().map_err(|e| bad(e.to_string()))?;
        rec.manifold.validate().map_err(|e| bad(e.to_string()))?;
        Ok(ConfigRecord {
            manifold: rec.manifold,
            s: rec.s,
            n: rec.n,
            seeds: rec.seeds,
            params: rec.params,
            energy,
            point_energies,
            grad_norm: rec.grad_norm,
            lambda_star: rec.lambda_star.unwrap_or(f64::NAN),
            mode: rec.mode,
            stable: rec.stable,
            occurrences: rec.occurrences,
        })
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    New(usize),
    Duplicate(usize),
    /// Neither certified stable nor at the lowest observed energy.
    Discarded,
}

/// In-memory set of distinct configurations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Library {
    records: Vec<ConfigRecord>,
    discarded: u64,
}

impl Library {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[ConfigRecord] {
        &self.records
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Lowest recorded energy for a (manifold, s, n) key.
    pub fn lowest(&self, manifold: Manifold, s: f64, n: usize) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.manifold == manifold && r.s == s && r.n == n)
            .map(|r| r.energy)
            .min_by(f64::total_cmp)
    }

    /// Adds `occurrences` trials of `candidate` without the acceptance test.
    pub fn insert(&mut self, mut candidate: ConfigRecord) -> MergeOutcome {
        candidate.occurrences = candidate.occurrences.max(1);
        if let Some(idx) = self.records.iter().position(|r| r.is_duplicate_of(&candidate)) {
            let rec = &mut self.records[idx];
            rec.occurrences += candidate.occurrences;
            rec.seeds.extend(candidate.seeds);
            if candidate.stable && !rec.stable {
                rec.stable = true;
                rec.grad_norm = candidate.grad_norm;
                rec.lambda_star = candidate.lambda_star;
                rec.mode = candidate.mode;
            }
            return MergeOutcome::Duplicate(idx);
        }
        self.records.push(candidate);
        MergeOutcome::New(self.records.len() - 1)
    }

    /// Merges one trial. Certified trials are always kept; uncertified ones
    /// only when no recorded state of the same key lies strictly below them.
    pub fn merge_record(
        &mut self,
        trial: &TrialResult,
        cert: &StabilityCertificate,
        s: RieszParam,
    ) -> Result<MergeOutcome> {
        let mut candidate = ConfigRecord::from_certificate(&trial.config, s, cert)?;
        candidate.seeds = trial.seed.into_iter().collect();
        candidate.occurrences = 1;
        if !candidate.stable {
            if let Some(low) = self.lowest(candidate.manifold, candidate.s, candidate.n) {
                if candidate.energy > low && !rel_close(candidate.energy, low, DEDUP_ENERGY_TOL) {
                    self.discarded += 1;
                    return Ok(MergeOutcome::Discarded);
                }
            }
        }
        Ok(self.insert(candidate))
    }

    /// Drops uncertified records that are no longer the lowest of their key,
    /// so the final record set does not depend on merge order.
    pub fn prune_superseded(&mut self) -> usize {
        let lows: Vec<f64> = self.records.iter().map(|r| self.lowest(r.manifold, r.s, r.n).unwrap_or(r.energy)).collect();
        let before = self.records.len();
        let mut dropped = 0;
        let keep: Vec<bool> = lows
            .iter()
            .zip(&self.records)
            .map(|(&low, r)| r.stable || r.energy <= low || rel_close(r.energy, low, DEDUP_ENERGY_TOL))
            .collect();
        let mut keep = keep.into_iter();
        self.records.retain(|r| {
            let k = keep.next().unwrap_or(true);
            if !k {
                dropped += r.occurrences;
            }
            k
        });
        self.discarded += dropped;
        before - self.records.len()
    }

    /// Records sorted by key and then energy, the order used on disk.
    pub fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            a.n.cmp(&b.n).then(a.s.total_cmp(&b.s)).then(a.energy.total_cmp(&b.energy))
        });
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            let line = serde_json::to_string(&r.to_line()).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut lib = Library::new();
        for (idx, line) in BufReader::new(r).lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            lib.records.push(ConfigRecord::from_line(rec, line_no)?);
        }
        Ok(lib)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(fs::File::open(path)?)
    }

    /// Loads `path`, or an empty library when it does not exist.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self> {
        match fs::File::open(path) {
            Ok(f) => Self::read_jsonl(f),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Library::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes through a sibling temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        {
            let f = fs::File::create(&tmp)?;
            self.write_jsonl(std::io::BufWriter::new(f))?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Scale for gap ratios: `|scale| · basis(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub basis: Basis,
    pub scale: f64,
}

impl Normalizer {
    pub fn eval(&self, n: f64) -> f64 {
        self.scale.abs() * self.basis.eval(n)
    }

    /// Uses the catalog coefficient of `basis`, falling back to its
    /// conjectured and then its fitted value.
    pub fn from_catalog(catalog: &ExpansionCatalog, basis: Basis) -> Result<Self> {
        let term = catalog
            .terms
            .iter()
            .find(|t| t.basis == basis)
            .ok_or_else(|| Error::Precondition(format!("catalog for s = {} has no {} term", catalog.s, basis.label())))?;
        let scale = term.coefficient.or(term.conjectured).or(term.fitted).ok_or_else(|| {
            Error::Precondition(format!("term {} has no value to normalize by", basis.label()))
        })?;
        Ok(Normalizer { basis, scale })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub n: usize,
    /// Distinct records at this N.
    pub records: usize,
    /// Trials behind the average.
    pub trials: u64,
    pub mean: f64,
    pub sem: f64,
    pub lowest: f64,
    pub gap: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSeries {
    pub s: f64,
    pub rows: Vec<GapRow>,
    /// N values dropped for having a single record.
    pub excluded: Vec<usize>,
}

/// Occurrence-weighted mean energy of stable records, its standard error,
/// and the gap to the lowest observed energy, per N.
pub fn gap_series(library: &Library, manifold: Manifold, s: f64, normalizer: &Normalizer) -> GapSeries {
    let mut by_n: BTreeMap<usize, Vec<&ConfigRecord>> = BTreeMap::new();
    for r in library.records.iter().filter(|r| r.manifold == manifold && r.s == s) {
        by_n.entry(r.n).or_default().push(r);
    }
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (n, recs) in by_n {
        let stable: Vec<&&ConfigRecord> = recs.iter().filter(|r| r.stable).collect();
        let trials: u64 = stable.iter().map(|r| r.occurrences).sum();
        if recs.len() < 2 || trials < 2 {
            log::warn!("N = {n}: {} record(s), {trials} stable trial(s); excluded from the gap series", recs.len());
            excluded.push(n);
            continue;
        }
        let lowest = recs.iter().map(|r| r.energy).fold(f64::INFINITY, f64::min);
        let t = trials as f64;
        // Offsets from the minimum are non-negative, so the gap is too.
        let gap = stable.iter().map(|r| r.occurrences as f64 * (r.energy - lowest)).sum::<f64>() / t;
        let var = stable.iter().map(|r| r.occurrences as f64 * (r.energy - lowest - gap).powi(2)).sum::<f64>() / (t - 1.0);
        let norm = normalizer.eval(n as f64);
        rows.push(GapRow {
            n,
            records: recs.len(),
            trials,
            mean: lowest + gap,
            sem: var.sqrt() / t.sqrt(),
            lowest,
            gap,
            norm,
            ratio: gap / norm,
        });
    }
    GapSeries { s, rows, excluded }
}

/// Lowest recorded energy per N for one manifold and s, ascending in N.
pub fn lowest_energies(library: &Library, manifold: Manifold, s: f64) -> Vec<(usize, f64)> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for r in library.records.iter().filter(|r| r.manifold == manifold && r.s == s) {
        let e = best.entry(r.n).or_insert(f64::INFINITY);
        *e = e.min(r.energy);
    }
    best.into_iter().collect()
}

/// `E(N)` minus the first `k` catalog terms, for each data point.
pub fn residual(data: &[(usize, f64)], catalog: &ExpansionCatalog, k: usize) -> Result<Vec<(usize, f64)>> {
    data.iter().map(|&(n, e)| Ok((n, e - catalog.partial_sum(k, n as f64)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub labels: Vec<String>,
    /// Held terms with their catalog values.
    pub fixed: Vec<(Basis, f64)>,
    /// Solved terms.
    pub free: Vec<(Basis, f64)>,
    pub range: (usize, usize),
    /// `(N, data − model)` over the fitted range.
    pub residuals: Vec<(usize, f64)>,
    pub max_abs_residual: f64,
    /// Ratio of extreme singular values of the column-scaled design matrix.
    pub condition: f64,
}

impl FitResult {
    pub fn coefficient(&self, basis: Basis) -> Option<f64> {
        self.fixed.iter().chain(&self.free).find(|(b, _)| *b == basis).map(|&(_, c)| c)
    }
}

/// Least squares for the `free` coefficients after subtracting the first
/// `fixed` catalog terms, over data with `N ∈ [range.0, range.1]`. Solved by
/// SVD of the column-scaled design matrix with residual refinement.
pub fn fit_expansion(
    data: &[(usize, f64)],
    catalog: &ExpansionCatalog,
    fixed: usize,
    free: &[Basis],
    range: (usize, usize),
) -> Result<FitResult> {
    let fit_err = |message: String, condition: f64| Error::Fit { message, condition };
    if free.is_empty() {
        return Err(fit_err("no free terms".into(), f64::NAN));
    }
    if fixed > catalog.terms.len() {
        return Err(Error::Precondition(format!("catalog has only {} terms", catalog.terms.len())));
    }
    let held: Vec<(Basis, f64)> = catalog.terms[..fixed]
        .iter()
        .map(|t| {
            t.coefficient
                .map(|c| (t.basis, c))
                .ok_or_else(|| Error::Precondition(format!("term {} has no known coefficient", t.basis.label())))
        })
        .collect::<Result<_>>()?;
    if let Some(dup) = free.iter().find(|b| held.iter().any(|(h, _)| h == *b)) {
        return Err(Error::Precondition(format!("term {} is both held and free", dup.label())));
    }
    let pts: Vec<(usize, f64)> = data.iter().copied().filter(|&(n, _)| n >= range.0 && n <= range.1).collect();
    if pts.len() < free.len() {
        return Err(fit_err(format!("{} data points for {} free terms", pts.len(), free.len()), f64::NAN));
    }
    let rows = pts.len();
    let cols = free.len();
    let mut a = DMatrix::from_fn(rows, cols, |i, j| free[j].eval(pts[i].0 as f64));
    let b = DVector::from_fn(rows, |i, _| {
        let n = pts[i].0 as f64;
        pts[i].1 - held.iter().map(|(basis, c)| c * basis.eval(n)).sum::<f64>()
    });
    let scales: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    for (j, &sc) in scales.iter().enumerate() {
        if !(sc > 0.0) || !sc.is_finite() {
            return Err(fit_err(format!("column {} vanishes on the data", free[j].label()), f64::INFINITY));
        }
        a.column_mut(j).scale_mut(1.0 / sc);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(smin > f64::EPSILON * smax * rows.max(cols) as f64) {
        return Err(fit_err("design matrix is rank deficient".into(), condition));
    }
    if condition > FIT_WARN_CONDITION {
        log::warn!("fit is ill-conditioned (condition estimate {condition:.3e})");
    }
    let mut y = svd.solve(&b, 0.0).map_err(|e| fit_err(e.to_string(), condition))?;
    for _ in 0..3 {
        let r = &b - &a * &y;
        y += svd.solve(&r, 0.0).map_err(|e| fit_err(e.to_string(), condition))?;
    }
    let coeffs: Vec<(Basis, f64)> = free.iter().enumerate().map(|(j, &basis)| (basis, y[j] / scales[j])).collect();
    let residuals: Vec<(usize, f64)> = pts
        .iter()
        .map(|&(n, e)| {
            let x = n as f64;
            let model: f64 = held.iter().chain(&coeffs).map(|(basis, c)| c * basis.eval(x)).sum();
            (n, e - model)
        })
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.1.abs()));
    Ok(FitResult {
        labels: held.iter().chain(&coeffs).map(|(b, _)| b.label().to_string()).collect(),
        fixed: held,
        free: coeffs,
        range,
        residuals,
        max_abs_residual,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::expansion_catalog;

    #[test]
    fn hex_float_round_trip() {
        for x in [0.0, -0.0, 1.0, -2.5, 0.1, 98.330506115258, f64::MIN_POSITIVE, 5e-324, f64::MAX, 3.0e-310] {
            let s = format_hex_float(x);
            let y = parse_hex_float(&s).unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{x} -> {s}");
        }
        assert_eq!(format_hex_float(1.0), "0x1p+0");
        assert_eq!(format_hex_float(-2.5), "-0x1.4p+1");
        assert!(parse_hex_float("0xzz").is_err());
    }

    #[test]
    fn xyz_errors_carry_line_numbers() {
        assert!(matches!(parse_xyz("1 0 0\n1 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_xyz("0 0 1\n0.9 0 0\n"), Err(Error::Validation { line: 2, .. })));
        let c = parse_xyz("2\n0 0 1\n\n0 0 -1.0000001\n").unwrap();
        assert_eq!(c.n(), 2);
        assert!(matches!(parse_xyz("3\n0 0 1\n0 0 -1\n"), Err(Error::Validation { .. })));
    }

    fn record(energy: f64, occurrences: u64, stable: bool) -> ConfigRecord {
        ConfigRecord {
            manifold: Manifold::Sphere,
            s: 1.0,
            n: 2,
            seeds: vec![],
            params: vec![0.5, 0.0, 2.0, 1.0],
            energy,
            point_energies: vec![energy / 2.0; 2],
            grad_norm: 0.0,
            lambda_star: 1.0,
            mode: CertifyMode::Strict,
            stable,
            occurrences,
        }
    }

    #[test]
    fn weighted_mean_and_sem() {
        let mut lib = Library::new();
        lib.insert(record(1.0, 3, true));
        lib.insert(record(2.0, 1, true));
        let norm = Normalizer { basis: Basis::One, scale: 1.0 };
        let g = gap_series(&lib, Manifold::Sphere, 1.0, &norm);
        let row = &g.rows[0];
        assert_eq!(row.mean, 1.25);
        assert_eq!(row.gap, 0.25);
        assert_eq!(row.trials, 4);
        // Weighted sample variance 0.75/3 over four trials.
        assert!((row.sem - (0.25f64).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn equal_records_have_zero_gap() {
        let mut lib = Library::new();
        let mut a = record(3.0, 2, true);
        a.point_energies = vec![1.0, 2.0];
        lib.insert(a);
        lib.insert(record(3.0, 5, true));
        assert_eq!(lib.len(), 2);
        let g = gap_series(&lib, Manifold::Sphere, 1.0, &Normalizer { basis: Basis::N, scale: -2.0 });
        assert_eq!(g.rows[0].gap, 0.0);
        assert_eq!(g.rows[0].sem, 0.0);
        assert_eq!(g.rows[0].norm, 4.0);
    }

    #[test]
    fn single_record_is_excluded() {
        let mut lib = Library::new();
        lib.insert(record(3.0, 7, true));
        let g = gap_series(&lib, Manifold::Sphere, 1.0, &Normalizer { basis: Basis::One, scale: 1.0 });
        assert!(g.rows.is_empty());
        assert_eq!(g.excluded, vec![2]);
    }

    #[test]
    fn insert_deduplicates() {
        let mut lib = Library::new();
        assert_eq!(lib.insert(record(1.0, 1, true)), MergeOutcome::New(0));
        assert_eq!(lib.insert(record(1.0 + 1e-12, 1, true)), MergeOutcome::Duplicate(0));
        assert_eq!(lib.insert(record(1.0 + 1e-6, 1, true)), MergeOutcome::New(1));
        assert_eq!(lib.records()[0].occurrences, 2);
    }

    #[test]
    fn superseded_candidates_are_pruned() {
        let mut lib = Library::new();
        lib.insert(record(2.0, 1, false));
        lib.insert(record(1.0, 1, true));
        lib.insert(record(1.5, 1, true));
        assert_eq!(lib.prune_superseded(), 1);
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.discarded(), 1);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut lib = Library::new();
        let mut r = record(0.1 + 0.2, 3, true);
        r.seeds = vec![4, 9, 11];
        r.point_energies = vec![0.1, 1.0 / 3.0];
        r.lambda_star = f64::NAN;
        lib.insert(r);
        lib.insert(record(std::f64::consts::PI, 1, false));
        let mut buf = Vec::new();
        lib.write_jsonl(&mut buf).unwrap();
        let back = Library::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in lib.records().iter().zip(back.records()) {
            assert_eq!(a.energy.to_bits(), b.energy.to_bits());
            assert_eq!(a.params, b.params);
            assert_eq!(a.point_energies, b.point_energies);
            assert_eq!(a.seeds, b.seeds);
            assert_eq!(a.occurrences, b.occurrences);
        }
        assert!(back.records()[0].lambda_star.is_nan());
    }

    #[test]
    fn corrupt_lines_are_reported() {
        assert!(matches!(Library::read_jsonl("{\"manifold\":".as_bytes()), Err(Error::Parse { line: 1, .. })));
        let mut buf = Vec::new();
        let mut lib = Library::new();
        lib.insert(record(1.0, 1, true));
        lib.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("1.0000000000000000e0", "1.5");
        assert!(matches!(Library::read_jsonl(text.as_bytes()), Err(Error::Validation { line: 1, .. })));
    }

    #[test]
    fn residual_examples() {
        let cat = expansion_catalog(1).unwrap();
        let r = residual(&[(12, 98.330506)], &cat, 1).unwrap();
        assert!((r[0].1 - -45.669494).abs() < 1e-9);
        assert_eq!(residual(&[(12, 98.330506)], &cat, 0).unwrap()[0].1, 98.330506);
        assert!(matches!(residual(&[(12, 1.0)], &cat, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn exact_recovery() {
        let cat = expansion_catalog(1).unwrap();
        let data: Vec<(usize, f64)> =
            (10..60).map(|n| (n, 2.0 * (n * n) as f64 - 3.0 * (n as f64).powf(1.5) + 0.5 * n as f64)).collect();
        let fit = fit_expansion(&data, &cat, 0, &[Basis::N2, Basis::N3_2, Basis::N], (1, 1000)).unwrap();
        assert!((fit.coefficient(Basis::N2).unwrap() - 2.0).abs() < 1e-10);
        assert!((fit.coefficient(Basis::N3_2).unwrap() + 3.0).abs() < 1e-10);
        assert!((fit.coefficient(Basis::N).unwrap() - 0.5).abs() < 1e-10);
        assert!(fit.max_abs_residual < 1e-9);
        assert_eq!(fit.labels, vec!["N^2", "N^3/2", "N"]);
    }

    #[test]
    fn fit_failures() {
        let cat = expansion_catalog(1).unwrap();
        let data = vec![(10, 1.0), (20, 2.0)];
        assert!(matches!(fit_expansion(&data, &cat, 0, &[Basis::N, Basis::N, Basis::One], (1, 100)), Err(Error::Fit { .. })));
        assert!(matches!(fit_expansion(&data, &cat, 0, &[Basis::N, Basis::N], (1, 100)), Err(Error::Fit { .. })));
        assert!(matches!(fit_expansion(&data, &cat, 3, &[Basis::One], (1, 100)), Err(Error::Precondition(_))));
        assert!(matches!(fit_expansion(&data, &cat, 1, &[Basis::N2], (1, 100)), Err(Error::Precondition(_))));
    }
}
