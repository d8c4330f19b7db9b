//! Phenotype preprocessing ahead of mean-shift computation, in fixed order:
//! rank-based inverse normal transform within strata, covariate
//! residualization, then standardization against the participant sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truncnorm::std_normal_quantile;

/// Blom offset used by the rank-based inverse normal transform.
pub const BLOM_OFFSET: f64 = 3.0 / 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftRecord {
    pub phenotype: String,
    /// Participant mean minus reference mean, in participant SD units.
    pub delta: f64,
    pub alpha: f64,
    pub n_sample: usize,
    pub n_reference: usize,
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        i = j;
    }
    ranks
}

fn int_group(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid("values", format!("stratum has {n} value(s); need at least 2")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values", "non-finite value in stratum"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Err(Error::invalid("values", "all values in stratum are equal"));
    }
    let nf = n as f64;
    average_ranks(values)
        .into_iter()
        .map(|r| std_normal_quantile((r - BLOM_OFFSET) / (nf + 1.0 - 2.0 * BLOM_OFFSET)))
        .collect()
}

/// Maps values to `Φ⁻¹((r − 3/8)/(n + 1/4))` of their within-stratum rank.
pub fn rank_inverse_normal<S: Ord + Clone>(values: &[f64], strata: Option<&[S]>) -> Result<Vec<f64>> {
    let Some(strata) = strata else {
        return int_group(values);
    };
    if strata.len() != values.len() {
        return Err(Error::invalid("strata", "length differs from values"));
    }
    let mut groups: BTreeMap<&S, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut out = vec![0.0; values.len()];
    for idx in groups.values() {
        let sub: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        for (&i, v) in idx.iter().zip(int_group(&sub)?) {
            out[i] = v;
        }
    }
    Ok(out)
}

/// Least-squares residuals of `values` on an intercept plus `covariates`
/// (`(name, column)` pairs), via modified Gram-Schmidt with one
/// re-orthogonalization pass. A covariate that is (numerically) a linear
/// combination of the intercept and earlier covariates is reported by name.
pub fn residualize(values: &[f64], covariates: &[(String, Vec<f64>)]) -> Result<Vec<f64>> {
    let n = values.len();
    if covariates.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::invalid("covariates", "column length differs from values"));
    }
    if n <= covariates.len() + 1 {
        return Err(Error::invalid("covariates", "not enough rows for the covariate design"));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(covariates.len() + 1);
    let mut collinear = Vec::new();
    let columns = std::iter::once(("(intercept)".to_string(), vec![1.0; n]))
        .chain(covariates.iter().cloned());
    for (name, col) in columns {
        let norm0 = dot(&col, &col).sqrt();
        let mut v = col;
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(norm > 1e-9 * norm0.max(f64::MIN_POSITIVE)) {
            collinear.push(name);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let mut r = values.to_vec();
    for _ in 0..2 {
        for q in &basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    Ok(r)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `δ̂ = (mean_sample − mean_reference) / sd_sample`.
pub fn compute_mean_shift(
    phenotype: &str,
    sample: &[f64],
    reference: &[f64],
    alpha: f64,
) -> Result<MeanShiftRecord> {
    if sample.len() < 2 || reference.len() < 2 {
        return Err(Error::invalid("cohorts", "need at least 2 values per cohort"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    let (ms, sds) = mean_sd(sample);
    let (mr, _) = mean_sd(reference);
    if !(sds > 0.0) {
        return Err(Error::Numeric(format!("{phenotype}: sample standard deviation is zero")));
    }
    let delta = (ms - mr) / sds;
    if !delta.is_finite() {
        return Err(Error::Numeric(format!("{phenotype}: mean shift is not finite")));
    }
    Ok(MeanShiftRecord {
        phenotype: phenotype.to_string(),
        delta,
        alpha,
        n_sample: sample.len(),
        n_reference: reference.len(),
    })
}

/// One covariate term: a product of powers of named columns, e.g. `sex*age^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovariateTerm {
    pub label: String,
    pub factors: Vec<(String, u32)>,
}

impl CovariateTerm {
    pub fn parse(s: &str) -> Result<Self> {
        let label = s.trim().to_string();
        let mut factors = Vec::new();
        for f in label.split('*') {
            let f = f.trim();
            let (name, pow) = match f.split_once('^') {
                Some((n, p)) => {
                    let p: u32 = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::invalid("covariates", format!("bad power in `{f}`")))?;
                    (n.trim(), p)
                }
                None => (f, 1),
            };
            if name.is_empty() || pow == 0 {
                return Err(Error::invalid("covariates", format!("bad term `{label}`")));
            }
            factors.push((name.to_string(), pow));
        }
        Ok(Self { label, factors })
    }

    pub fn evaluate(&self, get: impl Fn(&str) -> Option<f64>) -> Option<f64> {
        let mut v = 1.0;
        for (name, p) in &self.factors {
            v *= get(name)?.powi(*p as i32);
        }
        Some(v)
    }
}

/// How one phenotype is turned into a mean shift.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftSpec {
    pub phenotype: String,
    pub covariates: Vec<CovariateTerm>,
    /// Column whose values define INT strata.
    pub strata: Option<String>,
    /// Binary traits skip INT and residualization; δ̂ is then the
    /// standardized prevalence difference.
    pub binary: bool,
    /// Inclusive `(column, lo, hi)` row filters.
    pub filters: Vec<(String, f64, f64)>,
}

/// Rows of a cohort table with named numeric columns; `None` is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl PhenotypeTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn require(&self, name: &str, which: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::MissingColumn { path: which.to_string(), column: name.to_string() })
    }
}

/// Pools both cohorts, applies the preprocessing in fixed order on the
/// pooled values, and standardizes the difference by the participant SD.
/// Pooling keeps the between-cohort difference; transforming each cohort
/// separately would centre both at zero.
pub fn mean_shift_from_tables(
    spec: &MeanShiftSpec,
    sample: &PhenotypeTable,
    reference: &PhenotypeTable,
    alpha: f64,
) -> Result<MeanShiftRecord> {
    let mut needed: Vec<&str> = vec![spec.phenotype.as_str()];
    for t in &spec.covariates {
        needed.extend(t.factors.iter().map(|(n, _)| n.as_str()));
    }
    if let Some(s) = &spec.strata {
        needed.push(s);
    }
    needed.extend(spec.filters.iter().map(|f| f.0.as_str()));
    for (table, which) in [(sample, "sample"), (reference, "reference")] {
        for c in &needed {
            table.require(c, which)?;
        }
    }

    let mut pooled = Vec::new();
    let mut strata = Vec::new();
    let mut covs: Vec<Vec<f64>> = vec![Vec::new(); spec.covariates.len()];
    let mut n_sample = 0;
    let mut n_reference = 0;
    for (table, is_sample) in [(sample, true), (reference, false)] {
        let get = |row: &[Option<f64>], name: &str| table.column(name).and_then(|i| row[i]);
        'row: for row in &table.rows {
            for (col, lo, hi) in &spec.filters {
                match get(row, col) {
                    Some(v) if v >= *lo && v <= *hi => {}
                    _ => continue 'row,
                }
            }
            let Some(y) = get(row, &spec.phenotype) else { continue };
            let mut cv = Vec::with_capacity(spec.covariates.len());
            for t in &spec.covariates {
                match t.evaluate(|n| get(row, n)) {
                    Some(v) => cv.push(v),
                    None => continue 'row,
                }
            }
            let stratum = match &spec.strata {
                Some(s) => match get(row, s) {
                    Some(v) => Some(v.to_bits()),
                    None => continue 'row,
                },
                None => None,
            };
            pooled.push(y);
            strata.push(stratum);
            for (c, v) in covs.iter_mut().zip(cv) {
                c.push(v);
            }
            if is_sample {
                n_sample += 1;
            } else {
                n_reference += 1;
            }
        }
    }
    if n_sample < 2 || n_reference < 2 {
        return Err(Error::invalid(
            &spec.phenotype,
            format!("{n_sample} sample and {n_reference} reference rows after filtering"),
        ));
    }
    let processed = if spec.binary {
        if pooled.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid(&spec.phenotype, "binary phenotype must be coded 0/1"));
        }
        pooled
    } else {
        let transformed = match &spec.strata {
            Some(_) => rank_inverse_normal(&pooled, Some(&strata))?,
            None => rank_inverse_normal::<u64>(&pooled, None)?,
        };
        if spec.covariates.is_empty() {
            transformed
        } else {
            let named: Vec<(String, Vec<f64>)> = spec
                .covariates
                .iter()
                .map(|t| t.label.clone())
                .zip(covs)
                .collect();
            residualize(&transformed, &named)?
        }
    };
    let (s, r) = processed.split_at(n_sample);
    compute_mean_shift(&spec.phenotype, s, r, alpha)
}
