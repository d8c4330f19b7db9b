//! `meanshift`: observed mean shifts between a participant cohort table and
//! a reference cohort table.
//!
//! ```text
//! [participation]
//! alpha = 0.055
//! [meanshift]
//! sample = ukbb.csv
//! reference = hse.csv
//! covariates = sex, age, age^2, sex*age, sex*age^2
//! strata = sex
//! filters = age:40:65
//! [phenotype.BMI]
//! column = bmi                # defaults to the section name
//! binary = no
//! covariates = sex, age       # overrides [meanshift]
//! strata = none               # overrides [meanshift]
//! ```

use anyhow::Result;
use partbias_core::io::formats::meanshift_to_string;
use partbias_core::io::{mean_shift_from_tables, read_phenotype_table, CovariateTerm, MeanShiftSpec, Section};

use crate::manifest::Run;
use crate::settings;
use crate::Cli;

pub const MEAN_SHIFT_FILE: &str = "meanshift.csv";

fn covariates(sec: &Section) -> Result<Vec<CovariateTerm>> {
    Ok(sec.list("covariates").iter().map(|c| CovariateTerm::parse(c)).collect::<Result<Vec<_>, _>>()?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = settings::require(cli)?;
    let mut run = Run::start(&cli.out_dir, cli.command.name(), cli.config.as_deref())?;
    let sel = settings::selection(&cfg)?;
    let ms = settings::section(&cfg, "meanshift")?;
    let sample_path = settings::require_path(&cfg, ms, "sample")?;
    let reference_path = settings::require_path(&cfg, ms, "reference")?;
    run.input(&sample_path)?;
    run.input(&reference_path)?;
    let sample = read_phenotype_table(&sample_path)?;
    let reference = read_phenotype_table(&reference_path)?;
    let shared_covariates = covariates(ms)?;
    let shared_strata = ms.str("strata").map(String::from);
    let filters = settings::filters(&cfg, ms, "filters")?;

    let mut records = Vec::new();
    for (name, sec) in settings::phenotypes(&cfg)? {
        let binary = sec.bool(&cfg, "binary")?.unwrap_or(false);
        let strata = match sec.str("strata") {
            Some(s) if s.eq_ignore_ascii_case("none") => None,
            Some(s) => Some(s.to_string()),
            None => shared_strata.clone(),
        };
        let spec = MeanShiftSpec {
            phenotype: sec.str("column").unwrap_or(&name).to_string(),
            covariates: if sec.get("covariates").is_some() { covariates(sec)? } else { shared_covariates.clone() },
            strata,
            binary,
            filters: filters.clone(),
        };
        let mut rec = mean_shift_from_tables(&spec, &sample, &reference, sel.alpha())
            .map_err(|e| anyhow::Error::new(e).context(format!("mean shift for {name}")))?;
        rec.phenotype = name.clone();
        if binary {
            run.warn(format!("{name}: binary trait, delta is a standardized prevalence difference"));
        }
        records.push(rec);
    }
    run.write(MEAN_SHIFT_FILE, &meanshift_to_string(&records)?)?;
    run.finish()?;
    Ok(())
}
