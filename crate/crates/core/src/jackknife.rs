//! Delete-one-block jackknife over additive per-block sufficient statistics.
//!
//! Estimators are written as functions of pooled statistics, so a whole
//! analysis chain (regression slopes, then the adjustment formulas) can be
//! wrapped in one closure and every output gets a standard error.

use std::ops::Range;

use crate::error::{Error, Result};

/// Splits `n_items` into `n_blocks` contiguous ranges of `n_items / n_blocks`
/// items; the remainder goes to the final block.
pub fn contiguous_blocks(n_items: usize, n_blocks: usize) -> Result<Vec<Range<usize>>> {
    if n_blocks < 2 {
        return Err(Error::invalid("blocks", format!("need at least 2 blocks, got {n_blocks}")));
    }
    if n_items < n_blocks {
        return Err(Error::invalid(
            "blocks",
            format!("{n_items} items cannot fill {n_blocks} blocks"),
        ));
    }
    let size = n_items / n_blocks;
    Ok((0..n_blocks)
        .map(|b| {
            let start = b * size;
            let end = if b + 1 == n_blocks { n_items } else { start + size };
            start..end
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeResult {
    /// Estimator applied to the full pooled statistics.
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    /// Leave-one-block-out estimates, one row per block.
    pub leave_one_out: Vec<Vec<f64>>,
}

/// Per-block sufficient statistics together with the full-data pool.
#[derive(Debug, Clone)]
pub struct BlockedStats {
    blocks: Vec<Vec<f64>>,
    pooled: Vec<f64>,
}

impl BlockedStats {
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::invalid("blocks", "the jackknife needs at least 2 blocks"));
        }
        let width = blocks[0].len();
        if blocks.iter().any(|b| b.len() != width) {
            return Err(Error::invalid("blocks", "blocks carry different numbers of statistics"));
        }
        let mut pooled = vec![0.0; width];
        for b in &blocks {
            for (p, v) in pooled.iter_mut().zip(b) {
                *p += v;
            }
        }
        Ok(Self { blocks, pooled })
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    /// Pooled statistics with block `i` removed.
    pub fn leave_out(&self, i: usize) -> Vec<f64> {
        self.pooled.iter().zip(&self.blocks[i]).map(|(p, b)| p - b).collect()
    }

    pub fn jackknife<F>(&self, estimator: F) -> Result<JackknifeResult>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let estimate = estimator(&self.pooled)?;
        let k = estimate.len();
        let b = self.blocks.len();
        let mut leave_one_out = Vec::with_capacity(b);
        for i in 0..b {
            let est = estimator(&self.leave_out(i))
                .map_err(|e| Error::Jackknife { block: i, source: Box::new(e) })?;
            if est.len() != k {
                return Err(Error::Numeric("estimator output width changed between pools".into()));
            }
            leave_one_out.push(est);
        }
        let bf = b as f64;
        let se = (0..k)
            .map(|j| {
                let mean = leave_one_out.iter().map(|r| r[j]).sum::<f64>() / bf;
                let ss: f64 = leave_one_out.iter().map(|r| (r[j] - mean).powi(2)).sum();
                ((bf - 1.0) / bf * ss).sqrt()
            })
            .collect();
        Ok(JackknifeResult { estimate, se, leave_one_out })
    }
}

/// Scalar convenience wrapper: `(estimate, se)`.
pub fn jackknife_se<F>(blocks: Vec<Vec<f64>>, estimator: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let stats = BlockedStats::new(blocks)?;
    let r = stats.jackknife(|s| estimator(s).map(|v| vec![v]))?;
    Ok((r.estimate[0], r.se[0]))
}
