//! LD score regression at desk scale: heritability from `χ² = z²` and genetic
//! covariance from `z₁z₂`, with block jackknife standard errors.
//!
//! SNPs enter the regressions in LD-score file order, which is taken to be
//! genomic order; jackknife blocks are contiguous ranges of that order, so
//! the row order of a summary-statistics file never matters.

use std::collections::{HashMap, HashSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jackknife::{contiguous_blocks, BlockedStats};

/// Default number of jackknife blocks.
pub const DEFAULT_BLOCKS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumStatsRecord {
    pub snp: String,
    /// Effect allele.
    pub a1: String,
    pub a2: String,
    pub n: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumStats {
    pub trait_name: String,
    pub records: Vec<SumStatsRecord>,
}

impl SumStats {
    pub fn new(trait_name: impl Into<String>, records: Vec<SumStatsRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !r.z.is_finite() {
                return Err(Error::invalid("Z", format!("non-finite z-score for {}", r.snp)));
            }
            if !(r.n >= 2.0) {
                return Err(Error::invalid("N", format!("N = {} for {} (need >= 2)", r.n, r.snp)));
            }
            if !seen.insert(r.snp.as_str()) {
                return Err(Error::invalid("SNP", format!("duplicate identifier {}", r.snp)));
            }
        }
        Ok(Self { trait_name: trait_name.into(), records })
    }

    /// Same statistics with effect/other alleles swapped and z negated.
    pub fn flipped(&self) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| SumStatsRecord {
                snp: r.snp.clone(),
                a1: r.a2.clone(),
                a2: r.a1.clone(),
                n: r.n,
                z: -r.z,
            })
            .collect();
        Self { trait_name: self.trait_name.clone(), records }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdScores {
    pub snps: Vec<String>,
    pub l2: Vec<f64>,
}

impl LdScores {
    pub fn new(snps: Vec<String>, l2: Vec<f64>) -> Result<Self> {
        if snps.len() != l2.len() {
            return Err(Error::invalid("L2", "SNP and score columns differ in length"));
        }
        let mut seen = HashSet::with_capacity(snps.len());
        for (s, &l) in snps.iter().zip(&l2) {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::invalid("L2", format!("invalid LD score {l} for {s}")));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::invalid("SNP", format!("duplicate identifier {s}")));
            }
        }
        Ok(Self { snps, l2 })
    }

    /// Independent SNPs: every score is 1.
    pub fn identity(snps: Vec<String>) -> Self {
        let l2 = vec![1.0; snps.len()];
        Self { snps, l2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Intercept {
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdscOptions {
    /// Number of SNPs the heritability is spread over; defaults to the number
    /// of regression SNPs.
    pub m: Option<f64>,
    pub blocks: usize,
    /// Intercept of the heritability regressions.
    pub h2_intercept: Intercept,
    /// Intercept of the cross-trait regressions.
    pub gcov_intercept: Intercept,
}

impl Default for LdscOptions {
    fn default() -> Self {
        Self { m: None, blocks: DEFAULT_BLOCKS, h2_intercept: Intercept::Free, gcov_intercept: Intercept::Free }
    }
}

/// Per-SNP columns of one trait after alignment to a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitColumn {
    pub n: Vec<f64>,
    pub z: Vec<f64>,
}

/// SNPs shared by the LD scores and every trait, in LD-file order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub snps: Vec<String>,
    pub l2: Vec<f64>,
    /// One column per input trait; z-scores harmonized to the first trait's
    /// alleles.
    pub traits: Vec<TraitColumn>,
}

fn allele_key(a: &str) -> String {
    a.to_ascii_uppercase()
}

/// Intersects the traits with the LD panel and harmonizes alleles against
/// the first trait. SNPs whose alleles match neither directly nor swapped
/// are reported together.
pub fn align(ld: &LdScores, traits: &[&SumStats]) -> Result<AlignedPanel> {
    if traits.is_empty() {
        return Err(Error::MissingInput("no summary statistics to align".into()));
    }
    let maps: Vec<HashMap<&str, &SumStatsRecord>> = traits
        .iter()
        .map(|t| t.records.iter().map(|r| (r.snp.as_str(), r)).collect())
        .collect();
    let mut snps = Vec::new();
    let mut l2 = Vec::new();
    let mut cols: Vec<TraitColumn> =
        traits.iter().map(|_| TraitColumn { n: Vec::new(), z: Vec::new() }).collect();
    let mut bad = Vec::new();
    'snp: for (snp, &score) in ld.snps.iter().zip(&ld.l2) {
        let mut recs = Vec::with_capacity(maps.len());
        for m in &maps {
            match m.get(snp.as_str()) {
                Some(r) => recs.push(*r),
                None => continue 'snp,
            }
        }
        let (ra1, ra2) = (allele_key(&recs[0].a1), allele_key(&recs[0].a2));
        let mut signs = Vec::with_capacity(recs.len());
        for r in &recs {
            let (a1, a2) = (allele_key(&r.a1), allele_key(&r.a2));
            if a1 == ra1 && a2 == ra2 {
                signs.push(1.0);
            } else if a1 == ra2 && a2 == ra1 {
                signs.push(-1.0);
            } else {
                bad.push(snp.clone());
                continue 'snp;
            }
        }
        snps.push(snp.clone());
        l2.push(score);
        for ((col, r), s) in cols.iter_mut().zip(&recs).zip(signs) {
            col.n.push(r.n);
            col.z.push(s * r.z);
        }
    }
    if !bad.is_empty() {
        return Err(Error::AlleleMismatch(bad));
    }
    Ok(AlignedPanel { snps, l2, traits: cols })
}

/// Number of additive statistics one regression contributes per block.
pub const REGRESSION_STATS: usize = 5;

/// A weighted simple regression `y = intercept + slope·x` prepared for block
/// jackknife evaluation.
#[derive(Debug, Clone)]
pub struct Regression {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub intercept: Intercept,
}

impl Regression {
    /// `[Σw, Σwx, Σwx², Σwy, Σwxy]` per block.
    pub fn block_sums(&self, blocks: &[Range<usize>]) -> Vec<Vec<f64>> {
        blocks.iter().map(|r| self.sums(r.clone())).collect()
    }

    fn sums(&self, r: Range<usize>) -> Vec<f64> {
        let mut s = vec![0.0; REGRESSION_STATS];
        for i in r {
            let (x, y, w) = (self.x[i], self.y[i], self.w[i]);
            s[0] += w;
            s[1] += w * x;
            s[2] += w * x * x;
            s[3] += w * y;
            s[4] += w * x * y;
        }
        s
    }

    /// `(slope, intercept)` from pooled sums.
    pub fn solve(sums: &[f64], intercept: Intercept) -> Result<(f64, f64)> {
        let (sw, sx, sxx, sy, sxy) = (sums[0], sums[1], sums[2], sums[3], sums[4]);
        match intercept {
            Intercept::Fixed(c) => {
                if !(sxx > 0.0) {
                    return Err(Error::Numeric("regressor has no weight".into()));
                }
                Ok(((sxy - c * sx) / sxx, c))
            }
            Intercept::Free => {
                let det = sw * sxx - sx * sx;
                if !(det > 1e-12 * sw * sxx) {
                    return Err(Error::Numeric(
                        "LD score regressor is constant; the intercept is not identifiable \
                         (fix the intercept instead)"
                            .into(),
                    ));
                }
                let slope = (sw * sxy - sx * sy) / det;
                Ok((slope, (sy - slope * sx) / sw))
            }
        }
    }

    pub fn fit(&self) -> Result<(f64, f64)> {
        Self::solve(&self.sums(0..self.x.len()), self.intercept)
    }
}

fn resolve_m(opts: &LdscOptions, panel: &AlignedPanel) -> Result<f64> {
    let m = opts.m.unwrap_or(panel.snps.len() as f64);
    if !(m > 0.0) {
        return Err(Error::invalid("m", format!("must be positive, got {m}")));
    }
    Ok(m)
}

/// Heritability regression of `z²` on `N·ℓ/m` with two-step
/// heteroskedasticity weights `1/(c + N·ℓ·h²/m)²`.
pub fn h2_regression(
    panel: &AlignedPanel,
    col: &TraitColumn,
    m: f64,
    intercept: Intercept,
) -> Result<Regression> {
    let x: Vec<f64> = col.n.iter().zip(&panel.l2).map(|(n, l)| n * l / m).collect();
    let y: Vec<f64> = col.z.iter().map(|z| z * z).collect();
    let c0 = match intercept {
        Intercept::Fixed(c) => c,
        Intercept::Free => 1.0,
    };
    let mean_x = x.iter().sum::<f64>() / x.len().max(1) as f64;
    let mean_y = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let mut h_guess = ((mean_y - c0) / mean_x).clamp(0.0, 1.0);
    let mut reg = Regression { x, y, w: Vec::new(), intercept };
    for step in 0..2 {
        let c = match intercept {
            Intercept::Fixed(c) => c,
            Intercept::Free => 1.0,
        };
        reg.w = reg.x.iter().map(|&x| 1.0 / (c.max(1e-3) + x * h_guess).powi(2)).collect();
        if step == 0 {
            h_guess = reg.fit()?.0.clamp(0.0, 1.0);
        }
    }
    Ok(reg)
}

/// Cross-trait regression of `z₁z₂` on `√(N₁N₂)·ℓ/m`, weighted with the
/// usual product-of-variances form using per-trait heritability guesses.
pub fn gcov_regression(
    panel: &AlignedPanel,
    c1: &TraitColumn,
    c2: &TraitColumn,
    h2_guess: (f64, f64),
    m: f64,
    intercept: Intercept,
) -> Result<Regression> {
    let h1 = h2_guess.0.clamp(0.0, 1.0);
    let h2 = h2_guess.1.clamp(0.0, 1.0);
    let n = panel.l2.len();
    let x: Vec<f64> = (0..n).map(|i| (c1.n[i] * c2.n[i]).sqrt() * panel.l2[i] / m).collect();
    let y: Vec<f64> = (0..n).map(|i| c1.z[i] * c2.z[i]).collect();
    let mut reg = Regression { x, y, w: vec![1.0; n], intercept };
    let mut g_guess = 0.0;
    for step in 0..2 {
        let c = match intercept {
            Intercept::Fixed(c) => c,
            Intercept::Free => 0.0,
        };
        reg.w = (0..n)
            .map(|i| {
                let l = panel.l2[i] / m;
                let v1 = 1.0 + c1.n[i] * l * h1;
                let v2 = 1.0 + c2.n[i] * l * h2;
                let cross = c + reg.x[i] * g_guess;
                1.0 / (v1 * v2 + cross * cross)
            })
            .collect();
        if step == 0 {
            let bound = (h1 * h2).sqrt();
            g_guess = reg.fit()?.0.clamp(-bound, bound);
        }
    }
    Ok(reg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct H2Fit {
    pub h2: f64,
    pub intercept: f64,
    pub h2_se: f64,
    pub intercept_se: f64,
    pub n_snps: usize,
    /// Leave-one-block-out heritability estimates.
    pub leave_one_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcovFit {
    pub gcov: f64,
    pub gcov_se: f64,
    pub gcor: f64,
    pub gcor_se: f64,
    pub intercept: f64,
    pub h2: (f64, f64),
    pub n_snps: usize,
    pub leave_one_out: Vec<f64>,
}

fn check_blocks(panel: &AlignedPanel, blocks: usize) -> Result<Vec<Range<usize>>> {
    if panel.snps.len() < blocks {
        return Err(Error::invalid(
            "blocks",
            format!("{} regression SNPs is fewer than {blocks} blocks", panel.snps.len()),
        ));
    }
    contiguous_blocks(panel.snps.len(), blocks)
}

pub fn ldsc_h2(stats: &SumStats, ld: &LdScores, opts: &LdscOptions) -> Result<H2Fit> {
    let panel = align(ld, &[stats])?;
    let blocks = check_blocks(&panel, opts.blocks)?;
    let m = resolve_m(opts, &panel)?;
    let reg = h2_regression(&panel, &panel.traits[0], m, opts.h2_intercept)?;
    let stats = BlockedStats::new(reg.block_sums(&blocks))?;
    let mode = opts.h2_intercept;
    let jk = stats.jackknife(|s| {
        let (h, c) = Regression::solve(s, mode)?;
        Ok(vec![h, c])
    })?;
    Ok(H2Fit {
        h2: jk.estimate[0],
        intercept: jk.estimate[1],
        h2_se: jk.se[0],
        intercept_se: jk.se[1],
        n_snps: panel.snps.len(),
        leave_one_out: jk.leave_one_out.iter().map(|r| r[0]).collect(),
    })
}

pub fn ldsc_gcov(s1: &SumStats, s2: &SumStats, ld: &LdScores, opts: &LdscOptions) -> Result<GcovFit> {
    let panel = align(ld, &[s1, s2])?;
    let blocks = check_blocks(&panel, opts.blocks)?;
    let m = resolve_m(opts, &panel)?;
    let r1 = h2_regression(&panel, &panel.traits[0], m, opts.h2_intercept)?;
    let r2 = h2_regression(&panel, &panel.traits[1], m, opts.h2_intercept)?;
    let guess = (r1.fit()?.0, r2.fit()?.0);
    let r12 = gcov_regression(&panel, &panel.traits[0], &panel.traits[1], guess, m, opts.gcov_intercept)?;
    let per_block: Vec<Vec<f64>> = r1
        .block_sums(&blocks)
        .into_iter()
        .zip(r2.block_sums(&blocks))
        .zip(r12.block_sums(&blocks))
        .map(|((a, b), c)| a.into_iter().chain(b).chain(c).collect())
        .collect();
    let stats = BlockedStats::new(per_block)?;
    let (hm, gm) = (opts.h2_intercept, opts.gcov_intercept);
    let k = REGRESSION_STATS;
    let jk = stats.jackknife(|s| {
        let (h1, _) = Regression::solve(&s[..k], hm)?;
        let (h2, _) = Regression::solve(&s[k..2 * k], hm)?;
        let (g, c) = Regression::solve(&s[2 * k..], gm)?;
        let prod = h1 * h2;
        let gcor = if prod > 0.0 { g / prod.sqrt() } else { f64::NAN };
        Ok(vec![g, gcor, c, h1, h2])
    })?;
    Ok(GcovFit {
        gcov: jk.estimate[0],
        gcov_se: jk.se[0],
        gcor: jk.estimate[1],
        gcor_se: jk.se[1],
        intercept: jk.estimate[2],
        h2: (jk.estimate[3], jk.estimate[4]),
        n_snps: panel.snps.len(),
        leave_one_out: jk.leave_one_out.iter().map(|r| r[0]).collect(),
    })
}
