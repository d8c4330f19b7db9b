//! Forward simulation: a component-level multivariate normal oracle for the
//! closed forms, and a SNP-level cohort generator for end-to-end runs.
//!
//! Both engines share [`TraitModel`], which holds the participation liability
//! and any number of phenotypes together with their pairwise genetic and
//! non-genetic correlations.

mod mvn;
mod snp;
mod study;

pub use mvn::{
    empirical_sample_quantities, empirical_sample_quantities_with_se, simulate_mvn, MvnCohort,
    PhenotypeSample, SampleEstimates,
};
pub use snp::{
    gwas_on_selected, participation_sumstats, simulate_snp_cohort, GwasOutput, LdMode,
    SnpCohort, SnpOptions, DEFAULT_CELL_BUDGET,
};
pub use study::{simulate_study, study_truth, PairTruth, PhenotypeTruth, Study, StudyOptions, StudyTruth};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{check_psd, PairParams, ParticipationParams, PhenotypeParams};

/// Participation liability plus phenotypes. Pairs without an explicit
/// correlation are conditionally independent given the liability, i.e. their
/// correlation is the product of their correlations with it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitModel {
    participation: ParticipationParams,
    phenotypes: Vec<PhenotypeParams>,
    genetic: DMatrix<f64>,
    non_genetic: DMatrix<f64>,
}

impl TraitModel {
    pub fn new(participation: ParticipationParams, phenotypes: Vec<PhenotypeParams>) -> Result<Self> {
        Self::with_pairs(participation, phenotypes, &[])
    }

    /// `pairs` lists `(i, j, varphi_g, varphi_e)` over phenotype indices.
    pub fn with_pairs(
        participation: ParticipationParams,
        phenotypes: Vec<PhenotypeParams>,
        pairs: &[(usize, usize, f64, f64)],
    ) -> Result<Self> {
        let k = phenotypes.len();
        let mut gp = Vec::new();
        let mut ep = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                let explicit = pairs.iter().find(|p| (p.0, p.1) == (i, j) || (p.0, p.1) == (j, i));
                let (vg, ve) = match explicit {
                    Some(&(_, _, vg, ve)) => (vg, ve),
                    None => (
                        phenotypes[i].rho_g() * phenotypes[j].rho_g(),
                        phenotypes[i].rho_e() * phenotypes[j].rho_e(),
                    ),
                };
                gp.push((i, j, vg));
                ep.push((i, j, ve));
            }
        }
        for &(i, j, ..) in pairs {
            if i >= k || j >= k || i == j {
                return Err(Error::invalid("pairs", format!("bad phenotype pair ({i}, {j})")));
            }
        }
        let rg: Vec<f64> = phenotypes.iter().map(|p| p.rho_g()).collect();
        let re: Vec<f64> = phenotypes.iter().map(|p| p.rho_e()).collect();
        check_psd("genetic", &rg, &gp)?;
        check_psd("non-genetic", &re, &ep)?;

        // Covariances: scale correlations by component standard deviations.
        let h2x = participation.h2_x();
        let mut gsd = vec![h2x.sqrt()];
        let mut esd = vec![(1.0 - h2x).sqrt()];
        for p in &phenotypes {
            gsd.push(p.h2_y().sqrt());
            esd.push((1.0 - p.h2_y()).sqrt());
        }
        let gc = crate::model::correlation_matrix(&rg, &gp);
        let ec = crate::model::correlation_matrix(&re, &ep);
        let genetic = DMatrix::from_fn(k + 1, k + 1, |a, b| gc[(a, b)] * gsd[a] * gsd[b]);
        let non_genetic = DMatrix::from_fn(k + 1, k + 1, |a, b| ec[(a, b)] * esd[a] * esd[b]);
        Ok(Self { participation, phenotypes, genetic, non_genetic })
    }

    pub fn from_pair(participation: ParticipationParams, pair: &PairParams) -> Result<Self> {
        Self::with_pairs(
            participation,
            vec![*pair.y1(), *pair.y2()],
            &[(0, 1, pair.varphi_g(), pair.varphi_e())],
        )
    }

    pub fn participation(&self) -> &ParticipationParams {
        &self.participation
    }

    pub fn phenotypes(&self) -> &[PhenotypeParams] {
        &self.phenotypes
    }

    /// Parameters of phenotypes `i` and `j` as a pair.
    pub fn pair(&self, i: usize, j: usize) -> Result<PairParams> {
        let k = self.phenotypes.len();
        if i >= k || j >= k || i == j {
            return Err(Error::invalid("pair", format!("bad phenotype pair ({i}, {j})")));
        }
        let corr = |m: &DMatrix<f64>| {
            let d = (m[(i + 1, i + 1)] * m[(j + 1, j + 1)]).sqrt();
            if d > 0.0 {
                m[(i + 1, j + 1)] / d
            } else {
                0.0
            }
        };
        PairParams::new(
            self.phenotypes[i],
            self.phenotypes[j],
            corr(&self.genetic).clamp(-1.0, 1.0),
            corr(&self.non_genetic).clamp(-1.0, 1.0),
        )
    }

    /// Covariance of `(G_x, G_y1, …)`.
    pub fn genetic_covariance(&self) -> &DMatrix<f64> {
        &self.genetic
    }

    /// Covariance of `(ε_x, ε_y1, …)`.
    pub fn non_genetic_covariance(&self) -> &DMatrix<f64> {
        &self.non_genetic
    }
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues are
/// clipped to zero.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}
