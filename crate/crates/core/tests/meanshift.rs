//! Observed mean shifts from simulated participant and reference cohorts.

mod common;

use partbias_core::io::{compute_mean_shift, mean_shift_from_tables, CovariateTerm, MeanShiftSpec, PhenotypeTable};
use partbias_core::model::{mean_shift, ParticipationParams, PhenotypeParams};
use partbias_core::simgen::{simulate_mvn, MvnCohort, TraitModel};
use partbias_core::SelectionContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_POP: usize = 1_000_000;
const N_REF: usize = 200_000;

fn bmi_like() -> (ParticipationParams, PhenotypeParams, SelectionContext) {
    (
        ParticipationParams::new(0.1).unwrap(),
        PhenotypeParams::new(0.25, -0.25, -0.03).unwrap(),
        SelectionContext::new(0.055).unwrap(),
    )
}

fn cohorts() -> (MvnCohort, MvnCohort, f64) {
    let (part, y, sel) = bmi_like();
    let model = TraitModel::new(part, vec![y]).unwrap();
    let pop = simulate_mvn(&model, &sel, N_POP, 31).unwrap();
    let reference = simulate_mvn(&model, &sel, N_REF, 32).unwrap();
    (pop, reference, mean_shift(&y, &part, &sel).unwrap())
}

/// Standard error of `(mean_s − mean_r)/sd_s` for independent cohorts.
fn delta_se(sample: &[f64], reference: &[f64], delta: f64) -> f64 {
    let (_, se_s) = common::mean_se(sample);
    let (_, se_r) = common::mean_se(reference);
    let ns = sample.len() as f64;
    let sd_s = se_s * ns.sqrt();
    ((se_s * se_s + se_r * se_r) / (sd_s * sd_s) + delta * delta / (2.0 * ns)).sqrt()
}

#[test]
fn raw_mean_shift_matches_closed_form() {
    let (pop, reference, want) = cohorts();
    let sample: Vec<f64> = (0..pop.n).filter(|&i| pop.selected[i]).map(|i| pop.y(0, i)).collect();
    let refv: Vec<f64> = (0..reference.n).map(|i| reference.y(0, i)).collect();
    let rec = compute_mean_shift("BMI", &sample, &refv, 0.055).unwrap();
    let se = delta_se(&sample, &refv, rec.delta);
    assert!(want < 0.0);
    assert!((rec.delta - want).abs() <= 3.0 * se, "delta {} (se {se}) vs {want}", rec.delta);
    assert_eq!(rec.n_reference, N_REF);
}

fn table(values: &[f64], rng: &mut ChaCha8Rng) -> PhenotypeTable {
    let rows = values
        .iter()
        .map(|&y| {
            let age: f64 = rng.random_range(40.0..70.0);
            let sex = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            // Planted covariate effects on the recorded phenotype.
            let recorded = y + 0.03 * (age - 55.0) + 0.4 * sex;
            vec![Some(recorded), Some(age), Some(sex)]
        })
        .collect();
    PhenotypeTable { columns: vec!["bmi".into(), "age".into(), "sex".into()], rows }
}

#[test]
fn table_pipeline_matches_closed_form() {
    let (pop, reference, want) = cohorts();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sample: Vec<f64> = (0..pop.n).filter(|&i| pop.selected[i]).map(|i| pop.y(0, i)).collect();
    let refv: Vec<f64> = (0..reference.n).map(|i| reference.y(0, i)).collect();
    let spec = MeanShiftSpec {
        phenotype: "bmi".into(),
        covariates: ["age", "sex", "sex*age"].iter().map(|c| CovariateTerm::parse(c).unwrap()).collect(),
        strata: Some("sex".into()),
        binary: false,
        filters: vec![("age".into(), 40.0, 70.0)],
    };
    let rec = mean_shift_from_tables(&spec, &table(&sample, &mut rng), &table(&refv, &mut rng), 0.055).unwrap();
    let se = delta_se(&sample, &refv, want);
    assert!((rec.delta - want).abs() <= 3.0 * se, "delta {} (se {se}) vs {want}", rec.delta);
}

#[test]
fn identical_tables_give_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let t = table(&values, &mut rng);
    let spec = MeanShiftSpec {
        phenotype: "bmi".into(),
        covariates: vec![CovariateTerm::parse("age").unwrap()],
        strata: None,
        binary: false,
        filters: Vec::new(),
    };
    let rec = mean_shift_from_tables(&spec, &t, &t, 0.3).unwrap();
    assert!(rec.delta.abs() < 1e-12, "{}", rec.delta);
}

#[test]
fn binary_shift_is_standardized_prevalence_difference() {
    let col = |v: &[f64]| PhenotypeTable {
        columns: vec!["smoker".into()],
        rows: v.iter().map(|&x| vec![Some(x)]).collect(),
    };
    let sample: Vec<f64> = (0..100).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
    let reference: Vec<f64> = (0..100).map(|i| if i < 30 { 1.0 } else { 0.0 }).collect();
    let spec = MeanShiftSpec {
        phenotype: "smoker".into(),
        covariates: Vec::new(),
        strata: None,
        binary: true,
        filters: Vec::new(),
    };
    let rec = mean_shift_from_tables(&spec, &col(&sample), &col(&reference), 0.5).unwrap();
    let sd = (0.2f64 * 0.8 * 100.0 / 99.0).sqrt();
    assert!((rec.delta - (-0.1 / sd)).abs() < 1e-12);
}
