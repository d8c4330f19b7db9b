//! End-to-end adjustment from summary statistics.
//!
//! For each phenotype the LD score regressions give the unadjusted `ĥ²_y`
//! and the genetic covariance with participation `ρ̂_G`; the adjustment
//! chain then runs on every leave-one-block-out pool, so jackknife SEs cover
//! the LDSC noise of all regressions involved. `ĥ²_x` and `δ̂` stay fixed
//! across pools; an external SE for `ĥ²_x` can be folded in by the delta
//! method.

use serde::{Deserialize, Serialize};

use crate::adjust::{adjust_pair, adjust_phenotype, participation_gcor_from_gcov, PhenotypeEstimates};
use crate::error::{Error, Result};
use crate::jackknife::{contiguous_blocks, BlockedStats};
use crate::ldsc::{
    align, gcov_regression, h2_regression, Intercept, LdScores, LdscOptions, Regression, SumStats, REGRESSION_STATS,
};
use crate::truncnorm::SelectionContext;

const K: usize = REGRESSION_STATS;
const DELTA_METHOD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub ldsc: LdscOptions,
    /// Participation heritability from an external participation GWAS.
    pub h2_x: f64,
    pub h2_x_se: Option<f64>,
    /// Fixed cross-trait intercepts for named phenotype pairs, e.g. the
    /// phenotypic correlation among participants when both GWAS share the
    /// same individuals. Other pairs use `ldsc.gcov_intercept`.
    pub pair_intercepts: Vec<(String, String, f64)>,
}

impl AnalysisOptions {
    pub fn new(ldsc: LdscOptions, h2_x: f64) -> Self {
        Self { ldsc, h2_x, h2_x_se: None, pair_intercepts: Vec::new() }
    }

    fn pair_intercept(&self, a: &str, b: &str) -> Intercept {
        self.pair_intercepts
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .map(|&(_, _, c)| Intercept::Fixed(c))
            .unwrap_or(self.ldsc.gcov_intercept)
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeResult {
    pub name: String,
    pub delta: Option<f64>,
    pub rho_hat: Option<f64>,
    pub h2_original: Estimate,
    pub h2_adjusted: Estimate,
    pub rho_g_original: Estimate,
    pub rho_g_adjusted: Estimate,
    /// Not identifiable without selection.
    pub rho_e_adjusted: Option<Estimate>,
    pub h2_intercept: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub first: usize,
    pub second: usize,
    pub varphi_g_original: Estimate,
    pub varphi_g_adjusted: Estimate,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub h2_x: f64,
    pub n_snps: usize,
    pub blocks: usize,
    pub phenotypes: Vec<PhenotypeResult>,
    pub pairs: Vec<PairResult>,
}

impl AnalysisReport {
    /// Phenotypes whose genetic correlation with participation changes sign
    /// after adjustment although the unadjusted value exceeds its SE.
    pub fn sign_flips(&self) -> Vec<&str> {
        self.phenotypes
            .iter()
            .filter(|p| {
                let (o, a) = (p.rho_g_original, p.rho_g_adjusted);
                o.value.abs() > o.se && o.value.signum() != a.value.signum()
            })
            .map(|p| p.name.as_str())
            .collect()
    }
}

fn with_context(name: &str, e: Error) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{name}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("{name}: {m}")),
        Error::Jackknife { block, source } => {
            Error::Jackknife { block, source: Box::new(with_context(name, *source)) }
        }
        other => other,
    }
}

struct Prepared {
    h2: Regression,
    gcov: Regression,
}

fn phenotype_chain(
    s: &[f64],
    opts: &LdscOptions,
    delta: Option<f64>,
    h2_x: f64,
    sel: &SelectionContext,
) -> Result<(PhenotypeEstimates, crate::adjust::AdjustedPhenotype, f64)> {
    let (h2_y, c) = Regression::solve(&s[..K], opts.h2_intercept)?;
    let (gcov, _) = Regression::solve(&s[K..2 * K], opts.gcov_intercept)?;
    let rho_g = participation_gcor_from_gcov(gcov, h2_x, h2_y, sel)?;
    let est = PhenotypeEstimates { h2_y, rho_g, delta };
    let adj = adjust_phenotype(&est, h2_x, sel)?;
    Ok((est, adj, c))
}

fn phenotype_outputs(
    s: &[f64],
    opts: &LdscOptions,
    delta: Option<f64>,
    h2_x: f64,
    sel: &SelectionContext,
) -> Result<Vec<f64>> {
    let (est, adj, c) = phenotype_chain(s, opts, delta, h2_x, sel)?;
    Ok(vec![est.h2_y, adj.h2_y.value, est.rho_g, adj.rho_g.value, adj.rho_e.unwrap_or(f64::NAN), c])
}

fn pair_outputs(
    s: &[f64],
    opts: &LdscOptions,
    pair_intercept: Intercept,
    deltas: (Option<f64>, Option<f64>),
    h2_x: f64,
    sel: &SelectionContext,
) -> Result<Vec<f64>> {
    let (e1, a1, _) = phenotype_chain(&s[..2 * K], opts, deltas.0, h2_x, sel)?;
    let (e2, a2, _) = phenotype_chain(&s[2 * K..4 * K], opts, deltas.1, h2_x, sel)?;
    let (g, _) = Regression::solve(&s[4 * K..], pair_intercept)?;
    let prod = e1.h2_y * e2.h2_y;
    if !(prod > 0.0) {
        return Err(Error::Degenerate(format!("unadjusted heritability product {prod} is not positive")));
    }
    let varphi_hat = g / prod.sqrt();
    let adj = adjust_pair(varphi_hat, (&e1, &a1), (&e2, &a2), h2_x, sel)?;
    Ok(vec![varphi_hat, adj.varphi_g.value])
}

/// Jackknife of `f` at `h2_x`, with an optional delta-method term for the SE
/// of `h2_x`.
fn jackknife_with_h2x<F>(stats: &BlockedStats, h2_x: f64, h2_x_se: Option<f64>, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let jk = stats.jackknife(|s| f(s, h2_x))?;
    let mut se = jk.se;
    if let Some(sx) = h2_x_se.filter(|s| *s > 0.0) {
        let h = DELTA_METHOD_STEP * h2_x.max(1e-3);
        let up = f(stats.pooled(), h2_x + h)?;
        let down = f(stats.pooled(), h2_x - h)?;
        for (j, v) in se.iter_mut().enumerate() {
            let d = (up[j] - down[j]) / (2.0 * h);
            if d.is_finite() {
                *v = (*v * *v + (d * sx).powi(2)).sqrt();
            }
        }
    }
    Ok((jk.estimate, se))
}

/// Runs LDSC and the adjustment chain for every phenotype and every pair.
///
/// `deltas[i]` is the observed mean shift of `phenotypes[i]`; it is required
/// whenever `α < 1`.
pub fn run_analysis(
    participation: &SumStats,
    phenotypes: &[SumStats],
    deltas: &[Option<f64>],
    ld: &LdScores,
    sel: &SelectionContext,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    if phenotypes.is_empty() {
        return Err(Error::MissingInput("no phenotype summary statistics".into()));
    }
    if deltas.len() != phenotypes.len() {
        return Err(Error::invalid("deltas", "one mean shift per phenotype is required"));
    }
    if !(opts.h2_x > 0.0 && opts.h2_x < 1.0) {
        return Err(Error::invalid("h2x", format!("must lie in (0, 1), got {}", opts.h2_x)));
    }
    if !sel.is_unselected() {
        let missing: Vec<&str> = phenotypes
            .iter()
            .zip(deltas)
            .filter(|(_, d)| d.is_none())
            .map(|(p, _)| p.trait_name.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingInput(format!("mean shift for {}", missing.join(", "))));
        }
    }
    let mut all: Vec<&SumStats> = vec![participation];
    all.extend(phenotypes.iter());
    let panel = align(ld, &all)?;
    let lo = &opts.ldsc;
    if panel.snps.len() < lo.blocks {
        return Err(Error::invalid(
            "blocks",
            format!("{} regression SNPs is fewer than {} blocks", panel.snps.len(), lo.blocks),
        ));
    }
    let blocks = contiguous_blocks(panel.snps.len(), lo.blocks)?;
    let m = lo.m.unwrap_or(panel.snps.len() as f64);
    if !(m > 0.0) {
        return Err(Error::invalid("m", format!("must be positive, got {m}")));
    }
    let px = &panel.traits[0];

    let mut prepared = Vec::with_capacity(phenotypes.len());
    for (i, p) in phenotypes.iter().enumerate() {
        let col = &panel.traits[i + 1];
        let ctx = |e| with_context(&p.trait_name, e);
        let h2 = h2_regression(&panel, col, m, lo.h2_intercept).map_err(ctx)?;
        let guess = h2.fit().map_err(ctx)?.0;
        let gcov = gcov_regression(&panel, px, col, (opts.h2_x, guess), m, lo.gcov_intercept).map_err(ctx)?;
        prepared.push(Prepared { h2, gcov });
    }
    #[allow(clippy::type_complexity)]
    let sums: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> =
        prepared.iter().map(|p| (p.h2.block_sums(&blocks), p.gcov.block_sums(&blocks))).collect();
    let own_stats = |i: usize| -> Vec<Vec<f64>> {
        sums[i].0.iter().zip(&sums[i].1).map(|(a, b)| a.iter().chain(b).copied().collect()).collect()
    };

    let mut results = Vec::with_capacity(phenotypes.len());
    for (i, p) in phenotypes.iter().enumerate() {
        let ctx = |e| with_context(&p.trait_name, e);
        let stats = BlockedStats::new(own_stats(i))?;
        let (est, se) = jackknife_with_h2x(&stats, opts.h2_x, opts.h2_x_se, |s, hx| {
            phenotype_outputs(s, lo, deltas[i], hx, sel)
        })
        .map_err(ctx)?;
        let (_, full, _) = phenotype_chain(stats.pooled(), lo, deltas[i], opts.h2_x, sel).map_err(ctx)?;
        let at = |j: usize| Estimate { value: est[j], se: se[j] };
        results.push(PhenotypeResult {
            name: p.trait_name.clone(),
            delta: deltas[i],
            rho_hat: full.rho_hat,
            h2_original: at(0),
            h2_adjusted: at(1),
            rho_g_original: at(2),
            rho_g_adjusted: at(3),
            rho_e_adjusted: full.rho_e.map(|_| at(4)),
            h2_intercept: est[5],
            warnings: full.warnings(),
        });
    }

    let mut pairs = Vec::new();
    for i in 0..phenotypes.len() {
        for j in i + 1..phenotypes.len() {
            let label = format!("{}|{}", phenotypes[i].trait_name, phenotypes[j].trait_name);
            let ctx = |e| with_context(&label, e);
            let (ci, cj) = (&panel.traits[i + 1], &panel.traits[j + 1]);
            let guess = (results[i].h2_original.value, results[j].h2_original.value);
            let pi = opts.pair_intercept(&phenotypes[i].trait_name, &phenotypes[j].trait_name);
            let reg = gcov_regression(&panel, ci, cj, guess, m, pi).map_err(ctx)?;
            let stats: Vec<Vec<f64>> = own_stats(i)
                .into_iter()
                .zip(own_stats(j))
                .zip(reg.block_sums(&blocks))
                .map(|((a, b), c)| a.into_iter().chain(b).chain(c).collect())
                .collect();
            let stats = BlockedStats::new(stats)?;
            let d = (deltas[i], deltas[j]);
            let (est, se) =
                jackknife_with_h2x(&stats, opts.h2_x, opts.h2_x_se, |s, hx| pair_outputs(s, lo, pi, d, hx, sel))
                    .map_err(ctx)?;
            let mut warnings = Vec::new();
            if est[1].abs() > 1.0 {
                warnings.push(format!("adjusted varphi_g {:.6} outside [-1, 1]", est[1]));
            }
            pairs.push(PairResult {
                first: i,
                second: j,
                varphi_g_original: Estimate { value: est[0], se: se[0] },
                varphi_g_adjusted: Estimate { value: est[1], se: se[1] },
                warnings,
            });
        }
    }

    Ok(AnalysisReport {
        alpha: sel.alpha(),
        h2_x: opts.h2_x,
        n_snps: panel.snps.len(),
        blocks: blocks.len(),
        phenotypes: results,
        pairs,
    })
}
