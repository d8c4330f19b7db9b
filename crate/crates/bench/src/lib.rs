//! Benchmark fixtures shared by the criterion targets.

use partbias_core::ldsc::{Intercept, LdscOptions};
use partbias_core::simgen::{simulate_study, SnpOptions, Study, StudyOptions, TraitModel};
use partbias_core::{ParticipationParams, PhenotypeParams, SelectionContext};

pub const ALPHA: f64 = 0.1;
pub const H2_X: f64 = 0.125;

pub fn model() -> TraitModel {
    TraitModel::with_pairs(
        ParticipationParams::new(H2_X).unwrap(),
        vec![PhenotypeParams::new(0.5, 0.0, 0.8).unwrap(), PhenotypeParams::new(0.5, 0.2, 0.8).unwrap()],
        &[(0, 1, 0.4, 0.64)],
    )
    .unwrap()
}

pub fn selection() -> SelectionContext {
    SelectionContext::new(ALPHA).unwrap()
}

pub fn study_options(n: usize, m: usize) -> StudyOptions {
    StudyOptions {
        snp: SnpOptions::new(n, m),
        n_participation: n as f64,
        participation_name: "participation".into(),
        phenotype_names: vec!["Y0".into(), "Y1".into()],
    }
}

pub fn study(n: usize, m: usize) -> Study {
    simulate_study(&model(), &selection(), &study_options(n, m), 1).unwrap()
}

pub fn ldsc_options() -> LdscOptions {
    LdscOptions { m: None, blocks: 200, h2_intercept: Intercept::Fixed(1.0), gcov_intercept: Intercept::Fixed(0.0) }
}
