use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{psd_sqrt, TraitModel};
use crate::error::{Error, Result};
use crate::jackknife::{contiguous_blocks, BlockedStats};
use crate::model::reparam;
use crate::truncnorm::SelectionContext;

const CHUNK_ROWS: usize = 1 << 16;

/// Component-level draws for a population of `n` individuals.
#[derive(Debug, Clone)]
pub struct MvnCohort {
    pub n: usize,
    pub g_x: Vec<f64>,
    pub e_x: Vec<f64>,
    /// `G_y` per phenotype.
    pub g_y: Vec<Vec<f64>>,
    /// `ε_y` per phenotype.
    pub e_y: Vec<Vec<f64>>,
    /// Reparameterization coefficients `(a, b)` per phenotype.
    pub coeffs: Vec<(f64, f64)>,
    pub selected: Vec<bool>,
}

impl MvnCohort {
    pub fn phenotype_count(&self) -> usize {
        self.g_y.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.g_x[i] + self.e_x[i]
    }

    pub fn y(&self, k: usize, i: usize) -> f64 {
        self.g_y[k][i] + self.e_y[k][i]
    }

    /// `G_w = G_y − a·G_x`.
    pub fn g_w(&self, k: usize, i: usize) -> f64 {
        self.g_y[k][i] - self.coeffs[k].0 * self.g_x[i]
    }

    /// `ε_w = ε_y − b·ε_x`.
    pub fn e_w(&self, k: usize, i: usize) -> f64 {
        self.e_y[k][i] - self.coeffs[k].1 * self.e_x[i]
    }

    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }
}

/// Draws `(G_x, G_y…)` and `(ε_x, ε_y…)` from independent multivariate
/// normals and selects `X > t_α`. Rows are generated in fixed-size chunks,
/// each from its own stream of the seeded generator.
pub fn simulate_mvn(model: &TraitModel, sel: &SelectionContext, n: usize, seed: u64) -> Result<MvnCohort> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let k = model.phenotypes().len();
    let sg = psd_sqrt(model.genetic_covariance());
    let se = psd_sqrt(model.non_genetic_covariance());
    let mut g = vec![Vec::with_capacity(n); k + 1];
    let mut e = vec![Vec::with_capacity(n); k + 1];
    let mut zg = DVector::<f64>::zeros(k + 1);
    let mut ze = DVector::<f64>::zeros(k + 1);
    for (chunk, start) in (0..n).step_by(CHUNK_ROWS).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk as u64);
        for _ in start..(start + CHUNK_ROWS).min(n) {
            for v in zg.iter_mut().chain(ze.iter_mut()) {
                *v = StandardNormal.sample(&mut rng);
            }
            let dg = &sg * &zg;
            let de = &se * &ze;
            for t in 0..=k {
                g[t].push(dg[t]);
                e[t].push(de[t]);
            }
        }
    }
    let t = sel.t_alpha();
    let selected = (0..n).map(|i| g[0][i] + e[0][i] > t).collect();
    let part = model.participation();
    let coeffs = model
        .phenotypes()
        .iter()
        .map(|p| reparam(part, p, sel).map(|r| (r.a, r.b)))
        .collect::<Result<Vec<_>>>()?;
    let g_x = g.remove(0);
    let e_x = e.remove(0);
    Ok(MvnCohort { n, g_x, e_x, g_y: g, e_y: e, coeffs, selected })
}

/// Per-phenotype quantities computed among selected rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhenotypeSample {
    /// Variance of `Y` among participants (population units).
    pub var_y: f64,
    /// Coefficient of `G_x` when regressing `Y` on `(G_x, G_w)`.
    pub a_prime: f64,
    /// Share of participant variance explained by the fitted genetic
    /// predictor.
    pub h2: f64,
    /// Correlation of `G_x` with the fitted genetic predictor.
    pub rho_g: f64,
    /// Participant mean minus population mean, in participant SD units.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEstimates {
    pub n_selected: usize,
    pub selected_fraction: f64,
    pub var_x: f64,
    pub cov_gx_ex: f64,
    pub phenotypes: Vec<PhenotypeSample>,
    /// `(i, j, correlation of fitted genetic predictors)` for `i < j`.
    pub pair_gcor: Vec<(usize, usize, f64)>,
}

impl SampleEstimates {
    fn from_flat(n_selected: usize, k: usize, v: &[f64]) -> Self {
        let phenotypes = (0..k)
            .map(|t| {
                let b = 3 + 5 * t;
                PhenotypeSample { var_y: v[b], a_prime: v[b + 1], h2: v[b + 2], rho_g: v[b + 3], delta: v[b + 4] }
            })
            .collect();
        let mut pair_gcor = Vec::new();
        let mut idx = 3 + 5 * k;
        for i in 0..k {
            for j in i + 1..k {
                pair_gcor.push((i, j, v[idx]));
                idx += 1;
            }
        }
        Self { n_selected, selected_fraction: v[0], var_x: v[1], cov_gx_ex: v[2], phenotypes, pair_gcor }
    }
}

/// Columns per row: `G_x, ε_x`, then `G_y, ε_y` per phenotype.
fn row(c: &MvnCohort, i: usize, out: &mut [f64]) {
    out[0] = c.g_x[i];
    out[1] = c.e_x[i];
    for k in 0..c.phenotype_count() {
        out[2 + 2 * k] = c.g_y[k][i];
        out[3 + 2 * k] = c.e_y[k][i];
    }
}

/// Additive statistics of rows `r`: selected count, selected first and
/// second moments, total count and total phenotype sums.
fn group_sums(c: &MvnCohort, r: std::ops::Range<usize>) -> Vec<f64> {
    let k = c.phenotype_count();
    let d = 2 + 2 * k;
    let tri = d * (d + 1) / 2;
    let mut s = vec![0.0; 1 + d + tri + 1 + k];
    let mut v = vec![0.0; d];
    for i in r {
        row(c, i, &mut v);
        if c.selected[i] {
            s[0] += 1.0;
            let mut idx = 1 + d;
            for a in 0..d {
                s[1 + a] += v[a];
                for b in a..d {
                    s[idx] += v[a] * v[b];
                    idx += 1;
                }
            }
        }
        s[1 + d + tri] += 1.0;
        for t in 0..k {
            s[2 + d + tri + t] += v[2 + 2 * t] + v[3 + 2 * t];
        }
    }
    s
}

fn estimates_from_sums(s: &[f64], k: usize, coeffs: &[(f64, f64)]) -> Result<Vec<f64>> {
    let d = 2 + 2 * k;
    let tri = d * (d + 1) / 2;
    let n = s[0];
    if n < 2.0 {
        return Err(Error::Degenerate("fewer than 2 selected rows".into()));
    }
    let mean = DVector::from_fn(d, |a, _| s[1 + a] / n);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut idx = 1 + d;
    for a in 0..d {
        for b in a..d {
            let v = (s[idx] - n * mean[a] * mean[b]) / (n - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
            idx += 1;
        }
    }
    let quad = |x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * &cov * y)[(0, 0)];
    let unit = |a: usize| DVector::from_fn(d, |i, _| if i == a { 1.0 } else { 0.0 });
    let n_all = s[1 + d + tri];
    let gx = unit(0);
    let x = &gx + unit(1);
    let mut out = vec![n / n_all, quad(&x, &x), quad(&gx, &unit(1))];
    let mut fitted = Vec::with_capacity(k);
    for t in 0..k {
        let y = unit(2 + 2 * t) + unit(3 + 2 * t);
        let gw = unit(2 + 2 * t) - &gx * coeffs[t].0;
        let var_y = quad(&y, &y);
        let (vgx, vgw, cgg) = (quad(&gx, &gx), quad(&gw, &gw), quad(&gx, &gw));
        let (cyx, cyw) = (quad(&y, &gx), quad(&y, &gw));
        let (b1, b2) = if vgw <= 1e-12 * var_y {
            (cyx / vgx, 0.0)
        } else {
            let det = vgx * vgw - cgg * cgg;
            if det <= 0.0 {
                return Err(Error::Numeric("collinear genetic components".into()));
            }
            ((cyx * vgw - cyw * cgg) / det, (cyw * vgx - cyx * cgg) / det)
        };
        let g_fit = &gx * b1 + &gw * b2;
        let var_fit = quad(&g_fit, &g_fit);
        let mean_all = s[2 + d + tri + t] / n_all;
        let mean_sel = mean[2 + 2 * t] + mean[3 + 2 * t];
        out.extend([
            var_y,
            b1,
            var_fit / var_y,
            quad(&gx, &g_fit) / (vgx * var_fit).sqrt(),
            (mean_sel - mean_all) / var_y.sqrt(),
        ]);
        fitted.push((g_fit, var_fit));
    }
    for i in 0..k {
        for j in i + 1..k {
            let (gi, vi) = &fitted[i];
            let (gj, vj) = &fitted[j];
            out.push(quad(gi, gj) / (vi * vj).sqrt());
        }
    }
    Ok(out)
}

/// Participant-sample moments and regressions, i.e. what an analysis that
/// ignores participation bias would estimate with unlimited data.
pub fn empirical_sample_quantities(cohort: &MvnCohort) -> Result<SampleEstimates> {
    let n_sel = cohort.selected_count();
    if n_sel < 2 {
        return Err(Error::Degenerate(format!("{n_sel} selected rows; need at least 2")));
    }
    let k = cohort.phenotype_count();
    let v = estimates_from_sums(&group_sums(cohort, 0..cohort.n), k, &cohort.coeffs)?;
    Ok(SampleEstimates::from_flat(n_sel, k, &v))
}

/// As [`empirical_sample_quantities`], plus Monte Carlo standard errors from
/// a delete-one-group jackknife over `groups` contiguous row groups.
pub fn empirical_sample_quantities_with_se(
    cohort: &MvnCohort,
    groups: usize,
) -> Result<(SampleEstimates, SampleEstimates)> {
    let n_sel = cohort.selected_count();
    if n_sel < 2 {
        return Err(Error::Degenerate(format!("{n_sel} selected rows; need at least 2")));
    }
    let k = cohort.phenotype_count();
    let blocks = contiguous_blocks(cohort.n, groups)?;
    let sums = blocks.into_iter().map(|r| group_sums(cohort, r)).collect();
    let coeffs = cohort.coeffs.clone();
    let jk = BlockedStats::new(sums)?.jackknife(|s| estimates_from_sums(s, k, &coeffs))?;
    Ok((
        SampleEstimates::from_flat(n_sel, k, &jk.estimate),
        SampleEstimates::from_flat(n_sel, k, &jk.se),
    ))
}
