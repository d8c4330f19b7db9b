use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{psd_sqrt, TraitModel};
use crate::error::{Error, Result};
use crate::ldsc::{LdScores, SumStats, SumStatsRecord};
use crate::truncnorm::SelectionContext;

/// Default cap on stored genotype cells (rows × genotype columns).
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 31;

const CHUNK_ROWS: usize = 2048;
const ALLELES: [(&str, &str); 4] = [("A", "G"), ("C", "T"), ("A", "C"), ("G", "T")];

/// Linkage structure of simulated SNPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdMode {
    /// Every SNP independent; all LD scores are 1.
    Independent,
    /// Consecutive SNPs grouped into blocks of perfect LD whose sizes cycle
    /// through `1..=max_size`; the LD score of a SNP is its block size.
    Blocks { max_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnpOptions {
    pub n: usize,
    pub m: usize,
    pub ld: LdMode,
    /// Allele frequencies are uniform on this interval.
    pub freq_range: (f64, f64),
    pub cell_budget: u64,
    /// Worker threads for row generation; output does not depend on it.
    pub threads: usize,
}

impl SnpOptions {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            ld: LdMode::Independent,
            freq_range: (0.05, 0.95),
            cell_budget: DEFAULT_CELL_BUDGET,
            threads: 1,
        }
    }
}

/// A simulated population with genotypes, the participation liability and
/// phenotypes. Genotypes are stored once per LD block ("column").
#[derive(Debug, Clone)]
pub struct SnpCohort {
    pub n: usize,
    pub m: usize,
    pub snp_ids: Vec<String>,
    /// `(effect, other)` allele per SNP; the effect allele is counted.
    pub alleles: Vec<(String, String)>,
    /// Genotype column holding each SNP.
    pub column_of: Vec<usize>,
    /// Size of each SNP's block.
    pub ld_scores: Vec<f64>,
    /// Effect-allele frequency per column.
    pub freqs: Vec<f64>,
    /// Standardized per-SNP effects, trait-major: index 0 is the liability.
    pub effects: Vec<Vec<f64>>,
    pub n_columns: usize,
    /// Row-major `n × n_columns` dosages.
    pub genotypes: Vec<u8>,
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub selected: Vec<bool>,
}

impl SnpCohort {
    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn ld(&self) -> LdScores {
        LdScores { snps: self.snp_ids.clone(), l2: self.ld_scores.clone() }
    }

    /// Combined effect of each column (sum over its block) for `trait_idx`.
    pub fn column_effects(&self, trait_idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_columns];
        for (j, &c) in self.column_of.iter().enumerate() {
            out[c] += self.effects[trait_idx][j];
        }
        out
    }
}

fn block_layout(m: usize, ld: LdMode) -> Result<(Vec<usize>, Vec<f64>, usize)> {
    match ld {
        LdMode::Independent => Ok(((0..m).collect(), vec![1.0; m], m)),
        LdMode::Blocks { max_size } => {
            if max_size == 0 {
                return Err(Error::invalid("ld_block_max", "must be at least 1"));
            }
            let mut column_of = Vec::with_capacity(m);
            let mut scores = Vec::with_capacity(m);
            let mut col = 0;
            while column_of.len() < m {
                let size = (col % max_size + 1).min(m - column_of.len());
                for _ in 0..size {
                    column_of.push(col);
                    scores.push(size as f64);
                }
                col += 1;
            }
            Ok((column_of, scores, col))
        }
    }
}

/// Per-SNP effects with exactly the requested second moments:
/// `Σ_j β_j β_jᵀ` equals the genetic covariance of `(X, Y…)`.
fn exact_effects(cov: &DMatrix<f64>, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let p = cov.nrows();
    if m < p {
        return Err(Error::invalid("m", format!("need at least {p} SNPs")));
    }
    let z = DMatrix::<f64>::from_fn(m, p, |_, _| StandardNormal.sample(rng));
    let q = z.qr().q();
    let beta: DMatrix<f64> = q * psd_sqrt(cov);
    Ok((0..p).map(|t| beta.column(t).iter().copied().collect()).collect())
}

struct RowJob<'a> {
    chunk: usize,
    genotypes: &'a mut [u8],
    values: &'a mut [f64],
}

/// Simulates an `n × m` cohort. SNP effects are Gaussian with
/// exact realized variances; the environment is multivariate normal; rows are
/// generated in chunks with one random stream each.
pub fn simulate_snp_cohort(
    model: &TraitModel,
    sel: &SelectionContext,
    opts: &SnpOptions,
    seed: u64,
) -> Result<SnpCohort> {
    let SnpOptions { n, m, ld, freq_range: (flo, fhi), cell_budget, threads } = *opts;
    if n < 2 || m == 0 {
        return Err(Error::invalid("n, m", "need n >= 2 and m >= 1"));
    }
    if !(0.0 < flo && flo <= fhi && fhi < 1.0) {
        return Err(Error::invalid("freq_range", format!("({flo}, {fhi}) is not inside (0, 1)")));
    }
    let (column_of, ld_scores, n_columns) = block_layout(m, ld)?;
    let cells = n as u64 * n_columns as u64;
    if cells > cell_budget {
        return Err(Error::Budget { requested: cells, budget: cell_budget });
    }
    let k = model.phenotypes().len();
    let p = k + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs: Vec<f64> = (0..n_columns).map(|_| rng.random_range(flo..=fhi)).collect();
    let effects = exact_effects(model.genetic_covariance(), m, &mut rng)?;
    let se = psd_sqrt(model.non_genetic_covariance());

    // table[(c·3 + g)·p + t]: contribution of dosage g at column c to trait t.
    let mut table = vec![0.0; n_columns * 3 * p];
    let mut thresholds = vec![0u64; n_columns];
    for (j, &c) in column_of.iter().enumerate() {
        let f = freqs[c];
        let sd = (2.0 * f * (1.0 - f)).sqrt();
        for g in 0..3 {
            let z = (g as f64 - 2.0 * f) / sd;
            for t in 0..p {
                table[(c * 3 + g) * p + t] += effects[t][j] * z;
            }
        }
    }
    for (c, &f) in freqs.iter().enumerate() {
        thresholds[c] = (f * 4_294_967_296.0) as u64;
    }

    let mut genotypes = vec![0u8; n * n_columns];
    let mut values = vec![0.0; n * p];
    let mut jobs: Vec<RowJob> = genotypes
        .chunks_mut(CHUNK_ROWS * n_columns)
        .zip(values.chunks_mut(CHUNK_ROWS * p))
        .enumerate()
        .map(|(chunk, (genotypes, values))| RowJob { chunk, genotypes, values })
        .collect();
    let run = |jobs: &mut [RowJob]| {
        let mut g_acc = vec![0.0; p];
        let mut z = vec![0.0; p];
        for job in jobs.iter_mut() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(job.chunk as u64 + 1);
            let rows = job.values.len() / p;
            for r in 0..rows {
                let geno = &mut job.genotypes[r * n_columns..(r + 1) * n_columns];
                g_acc.iter_mut().for_each(|v| *v = 0.0);
                for (c, slot) in geno.iter_mut().enumerate() {
                    let bits = rng.next_u64();
                    let thr = thresholds[c];
                    let d = ((bits & 0xffff_ffff) < thr) as usize + ((bits >> 32) < thr) as usize;
                    *slot = d as u8;
                    let base = (c * 3 + d) * p;
                    for t in 0..p {
                        g_acc[t] += table[base + t];
                    }
                }
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                for t in 0..p {
                    let e: f64 = (0..p).map(|s| se[(t, s)] * z[s]).sum();
                    job.values[r * p + t] = g_acc[t] + e;
                }
            }
        }
    };
    let threads = threads.max(1).min(jobs.len());
    if threads <= 1 {
        run(&mut jobs);
    } else {
        let per = jobs.len().div_ceil(threads);
        std::thread::scope(|s| {
            for part in jobs.chunks_mut(per) {
                s.spawn(|| run(part));
            }
        });
    }
    drop(jobs);

    let x: Vec<f64> = (0..n).map(|i| values[i * p]).collect();
    let y: Vec<Vec<f64>> = (1..p).map(|t| (0..n).map(|i| values[i * p + t]).collect()).collect();
    let t = sel.t_alpha();
    let selected = x.iter().map(|&v| v > t).collect();
    let snp_ids = (0..m).map(|j| format!("rs{}", j + 1)).collect();
    let alleles = (0..m)
        .map(|j| {
            let (a, b) = ALLELES[column_of[j] % ALLELES.len()];
            (a.to_string(), b.to_string())
        })
        .collect();
    Ok(SnpCohort {
        n,
        m,
        snp_ids,
        alleles,
        column_of,
        ld_scores,
        freqs,
        effects,
        n_columns,
        genotypes,
        x,
        y,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwasOutput {
    pub stats: SumStats,
    /// SNPs monomorphic among the analysed rows; their z is 0.
    pub monomorphic: Vec<String>,
}

/// Per-SNP simple regression of each phenotype on dosage among selected
/// rows, reported as `z = r·√((N − 2)/(1 − r²))`.
pub fn gwas_on_selected(cohort: &SnpCohort, names: &[String]) -> Result<Vec<GwasOutput>> {
    let k = cohort.y.len();
    if names.len() != k {
        return Err(Error::invalid("names", format!("{} names for {k} phenotypes", names.len())));
    }
    let rows: Vec<usize> = (0..cohort.n).filter(|&i| cohort.selected[i]).collect();
    let nsel = rows.len();
    if nsel < 3 {
        return Err(Error::Degenerate(format!("{nsel} selected rows; need at least 3")));
    }
    let nc = cohort.n_columns;
    let means: Vec<f64> = (0..k).map(|t| rows.iter().map(|&i| cohort.y[t][i]).sum::<f64>() / nsel as f64).collect();
    let ss: Vec<f64> = (0..k)
        .map(|t| rows.iter().map(|&i| (cohort.y[t][i] - means[t]).powi(2)).sum())
        .collect();
    let mut counts = vec![0u32; nc * 3];
    let mut sums = vec![0.0; nc * 3 * k];
    let mut yc = vec![0.0; k];
    for &i in &rows {
        for t in 0..k {
            yc[t] = cohort.y[t][i] - means[t];
        }
        let geno = &cohort.genotypes[i * nc..(i + 1) * nc];
        for (c, &g) in geno.iter().enumerate() {
            let cell = c * 3 + g as usize;
            counts[cell] += 1;
            for t in 0..k {
                sums[cell * k + t] += yc[t];
            }
        }
    }
    let nf = nsel as f64;
    let mut col_z = vec![vec![0.0; nc]; k];
    let mut mono = vec![false; nc];
    for c in 0..nc {
        let n1 = counts[c * 3 + 1] as f64;
        let n2 = counts[c * 3 + 2] as f64;
        let sg = n1 + 2.0 * n2;
        let sxx = n1 + 4.0 * n2 - sg * sg / nf;
        if sxx <= 0.0 {
            mono[c] = true;
            continue;
        }
        for t in 0..k {
            let sxy = sums[(c * 3 + 1) * k + t] + 2.0 * sums[(c * 3 + 2) * k + t];
            let r = (sxy / (sxx * ss[t]).sqrt()).clamp(-1.0, 1.0);
            col_z[t][c] = if r.abs() >= 1.0 {
                r.signum() * f64::MAX.sqrt()
            } else {
                r * ((nf - 2.0) / (1.0 - r * r)).sqrt()
            };
        }
    }
    let monomorphic: Vec<String> = (0..cohort.m)
        .filter(|&j| mono[cohort.column_of[j]])
        .map(|j| cohort.snp_ids[j].clone())
        .collect();
    (0..k)
        .map(|t| {
            let records = (0..cohort.m)
                .map(|j| SumStatsRecord {
                    snp: cohort.snp_ids[j].clone(),
                    a1: cohort.alleles[j].0.clone(),
                    a2: cohort.alleles[j].1.clone(),
                    n: nf,
                    z: col_z[t][cohort.column_of[j]],
                })
                .collect();
            Ok(GwasOutput { stats: SumStats::new(names[t].clone(), records)?, monomorphic: monomorphic.clone() })
        })
        .collect()
}

/// Participation summary statistics from an independent population-scale
/// study of `n_x` individuals, drawn from their large-sample distribution
/// `z_j = √n_x·b_j + e_j` with `b_j` the marginal liability effect.
pub fn participation_sumstats(cohort: &SnpCohort, n_x: f64, name: &str, seed: u64) -> Result<SumStats> {
    if !(n_x >= 2.0) {
        return Err(Error::invalid("n_x", format!("must be at least 2, got {n_x}")));
    }
    let col = cohort.column_effects(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let records = (0..cohort.m)
        .map(|j| {
            let e: f64 = StandardNormal.sample(&mut rng);
            SumStatsRecord {
                snp: cohort.snp_ids[j].clone(),
                a1: cohort.alleles[j].0.clone(),
                a2: cohort.alleles[j].1.clone(),
                n: n_x,
                z: n_x.sqrt() * col[cohort.column_of[j]] + e,
            }
        })
        .collect();
    SumStats::new(name, records)
}
