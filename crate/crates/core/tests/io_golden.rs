//! Serialized outputs of a small seeded study, compared byte for byte with
//! frozen files. Set `PARTBIAS_BLESS=1` to rewrite them.

use std::path::PathBuf;

use partbias_core::io::formats::{ldscores_to_string, meanshift_to_string, sumstats_to_string};
use partbias_core::io::{read_ldscores, read_meanshift, read_sumstats, write_string};
use partbias_core::model::{ParticipationParams, PhenotypeParams};
use partbias_core::simgen::{simulate_study, SnpOptions, Study, StudyOptions, TraitModel};
use partbias_core::SelectionContext;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn study() -> Study {
    let model = TraitModel::new(
        ParticipationParams::new(0.2).unwrap(),
        vec![PhenotypeParams::new(0.4, 0.3, 0.2).unwrap()],
    )
    .unwrap();
    let sel = SelectionContext::new(0.4).unwrap();
    let opts = StudyOptions {
        snp: SnpOptions::new(400, 25),
        n_participation: 5000.0,
        participation_name: "participation".into(),
        phenotype_names: vec!["Y".into()],
    };
    simulate_study(&model, &sel, &opts, 2024).unwrap()
}

fn check(name: &str, actual: &str) {
    let path = data(name);
    if std::env::var_os("PARTBIAS_BLESS").is_some() {
        write_string(&path, actual).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, want, "{name} differs from the frozen file");
}

#[test]
fn sumstats_match_frozen_files_and_round_trip() {
    let s = study();
    check("golden_y.sumstats", &sumstats_to_string(&s.phenotypes[0]));
    check("golden_participation.sumstats", &sumstats_to_string(&s.participation));
    let back = read_sumstats(&data("golden_y.sumstats"), "Y").unwrap();
    assert_eq!(back, s.phenotypes[0]);
    let back = read_sumstats(&data("golden_participation.sumstats"), "participation").unwrap();
    assert_eq!(back, s.participation);
}

#[test]
fn ldscores_and_meanshift_match_frozen_files() {
    let s = study();
    check("golden.l2", &ldscores_to_string(&s.ld));
    check("golden_meanshift.csv", &meanshift_to_string(&s.mean_shifts).unwrap());
    assert_eq!(read_ldscores(&data("golden.l2")).unwrap(), s.ld);
    assert_eq!(read_meanshift(&data("golden_meanshift.csv")).unwrap(), s.mean_shifts);
}
