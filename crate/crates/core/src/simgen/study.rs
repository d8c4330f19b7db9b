//! A complete simulated study: participant GWAS, participation summary
//! statistics, LD scores and observed mean shifts, plus the population and
//! apparent values they should reproduce.

use serde::{Deserialize, Serialize};

use super::snp::{gwas_on_selected, participation_sumstats, simulate_snp_cohort, SnpOptions};
use super::TraitModel;
use crate::error::{Error, Result};
use crate::io::preprocess::{compute_mean_shift, MeanShiftRecord, PhenotypeTable};
use crate::ldsc::{LdScores, SumStats};
use crate::model::{apparent_h2, apparent_pair_gcor, apparent_participation_gcor, mean_shift};
use crate::truncnorm::SelectionContext;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub snp: SnpOptions,
    /// Sample size of the external participation GWAS.
    pub n_participation: f64,
    pub participation_name: String,
    pub phenotype_names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub participation: SumStats,
    pub phenotypes: Vec<SumStats>,
    pub ld: LdScores,
    /// Participants against the whole simulated population.
    pub mean_shifts: Vec<MeanShiftRecord>,
    /// Phenotypic correlation of each phenotype pair among participants, the
    /// cross-trait LDSC intercept when both GWAS use the same individuals.
    pub phenotypic_correlations: Vec<(usize, usize, f64)>,
    /// Phenotype values of participants, one column per phenotype.
    pub sample_table: PhenotypeTable,
    /// Phenotype values of the whole population.
    pub population_table: PhenotypeTable,
    pub n_population: usize,
    pub n_selected: usize,
    pub monomorphic: Vec<String>,
}

/// Simulates a cohort, runs the participant GWAS and derives everything the
/// adjustment needs.
pub fn simulate_study(model: &TraitModel, sel: &SelectionContext, opts: &StudyOptions, seed: u64) -> Result<Study> {
    let k = model.phenotypes().len();
    if opts.phenotype_names.len() != k {
        return Err(Error::invalid(
            "phenotype_names",
            format!("{} names for {k} phenotypes", opts.phenotype_names.len()),
        ));
    }
    let cohort = simulate_snp_cohort(model, sel, &opts.snp, seed)?;
    let gwas = gwas_on_selected(&cohort, &opts.phenotype_names)?;
    let participation = participation_sumstats(&cohort, opts.n_participation, &opts.participation_name, seed)?;
    let mut mean_shifts = Vec::with_capacity(k);
    for (t, name) in opts.phenotype_names.iter().enumerate() {
        let y = &cohort.y[t];
        let sample: Vec<f64> = (0..cohort.n).filter(|&i| cohort.selected[i]).map(|i| y[i]).collect();
        mean_shifts.push(compute_mean_shift(name, &sample, y, sel.alpha())?);
    }
    let rows: Vec<usize> = (0..cohort.n).filter(|&i| cohort.selected[i]).collect();
    let mut phenotypic_correlations = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let a: Vec<f64> = rows.iter().map(|&r| cohort.y[i][r]).collect();
            let b: Vec<f64> = rows.iter().map(|&r| cohort.y[j][r]).collect();
            phenotypic_correlations.push((i, j, correlation(&a, &b)));
        }
    }
    let table = |rows: &mut dyn Iterator<Item = usize>| PhenotypeTable {
        columns: opts.phenotype_names.clone(),
        rows: rows.map(|r| cohort.y.iter().map(|y| Some(y[r])).collect()).collect(),
    };
    let sample_table = table(&mut rows.iter().copied());
    let population_table = table(&mut (0..cohort.n));
    let monomorphic = gwas.first().map(|g| g.monomorphic.clone()).unwrap_or_default();
    Ok(Study {
        participation,
        phenotypes: gwas.into_iter().map(|g| g.stats).collect(),
        ld: cohort.ld(),
        mean_shifts,
        phenotypic_correlations,
        sample_table,
        population_table,
        n_population: cohort.n,
        n_selected: cohort.selected_count(),
        monomorphic,
    })
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeTruth {
    pub name: String,
    pub h2: f64,
    pub rho_g: f64,
    pub rho_e: f64,
    pub h2_apparent: f64,
    pub rho_g_apparent: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTruth {
    pub first: usize,
    pub second: usize,
    pub varphi_g: f64,
    pub varphi_e: f64,
    pub varphi_g_apparent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTruth {
    pub alpha: f64,
    pub h2_x: f64,
    pub phenotypes: Vec<PhenotypeTruth>,
    pub pairs: Vec<PairTruth>,
}

/// Population parameters of `model` and the values an unadjusted analysis of
/// participants targets.
pub fn study_truth(model: &TraitModel, sel: &SelectionContext, names: &[String]) -> Result<StudyTruth> {
    let part = model.participation();
    let k = model.phenotypes().len();
    if names.len() != k {
        return Err(Error::invalid("names", format!("{} names for {k} phenotypes", names.len())));
    }
    let phenotypes = model
        .phenotypes()
        .iter()
        .zip(names)
        .map(|(y, name)| {
            Ok(PhenotypeTruth {
                name: name.clone(),
                h2: y.h2_y(),
                rho_g: y.rho_g(),
                rho_e: y.rho_e(),
                h2_apparent: apparent_h2(part, y, sel)?,
                rho_g_apparent: apparent_participation_gcor(part, y, sel)?,
                delta: mean_shift(y, part, sel)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let p = model.pair(i, j)?;
            pairs.push(PairTruth {
                first: i,
                second: j,
                varphi_g: p.varphi_g(),
                varphi_e: p.varphi_e(),
                varphi_g_apparent: apparent_pair_gcor(part, &p, sel)?,
            });
        }
    }
    Ok(StudyTruth { alpha: sel.alpha(), h2_x: part.h2_x(), phenotypes, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParticipationParams, PhenotypeParams};

    #[test]
    fn study_is_deterministic_and_consistent() {
        let model = TraitModel::new(
            ParticipationParams::new(0.2).unwrap(),
            vec![PhenotypeParams::new(0.4, 0.3, 0.3).unwrap(), PhenotypeParams::new(0.3, 0.0, 0.0).unwrap()],
        )
        .unwrap();
        let sel = SelectionContext::new(0.3).unwrap();
        let opts = StudyOptions {
            snp: SnpOptions::new(2000, 300),
            n_participation: 1e4,
            participation_name: "participation".into(),
            phenotype_names: vec!["A".into(), "B".into()],
        };
        let a = simulate_study(&model, &sel, &opts, 5).unwrap();
        let b = simulate_study(&model, &sel, &opts, 5).unwrap();
        assert_eq!(a.phenotypes, b.phenotypes);
        assert_eq!(a.participation, b.participation);
        assert_eq!(a.mean_shifts, b.mean_shifts);
        assert_eq!(a.n_population, 2000);
        assert!(a.mean_shifts[0].delta > 0.1);
        assert_eq!(a.phenotypes[0].records.len(), 300);
        assert_eq!(a.sample_table.rows.len(), a.n_selected);
        assert_eq!(a.population_table.rows.len(), 2000);
        assert_eq!(a.population_table.columns, vec!["A", "B"]);
        let t = study_truth(&model, &sel, &opts.phenotype_names).unwrap();
        assert_eq!(t.pairs.len(), 1);
        assert!((t.pairs[0].varphi_g).abs() < 1e-12);
        assert!(t.phenotypes[0].delta > 0.0 && t.phenotypes[1].delta == 0.0);
        let bad = StudyOptions { phenotype_names: vec!["A".into()], ..opts };
        assert!(simulate_study(&model, &sel, &bad, 5).is_err());
    }
}
