//! `simulate`: a seeded cohort under a trait model, with participant GWAS,
//! participation summary statistics, LD scores, observed mean shifts, cohort
//! tables, the population truth and a ready-to-run `adjust.cfg`.
//!
//! ```text
//! seed = 7
//! [participation]
//! alpha = 0.1
//! h2x = 0.125
//! [simulation]
//! n = 50000
//! m = 5000
//! n_participation = 50000
//! ld = independent          # or blocks:4
//! freq_min = 0.05
//! freq_max = 0.95
//! write_cohort = yes
//! [phenotype.Y0]
//! h2 = 0.5
//! rho_g = 0
//! rho_e = 0.8
//! [pair.Y0:Y1]
//! varphi_g = 0.4
//! varphi_e = 0.64
//! ```

use std::fmt::Write as _;

use anyhow::Result;
use partbias_core::io::formats::{ldscores_to_string, meanshift_to_string, phenotype_table_to_string, sumstats_to_string};
use partbias_core::io::Config;
use partbias_core::ldsc::DEFAULT_BLOCKS;
use partbias_core::simgen::{simulate_study, study_truth, LdMode, SnpOptions, StudyOptions, TraitModel};
use partbias_core::{ParticipationParams, PhenotypeParams, SelectionContext};

use crate::manifest::Run;
use crate::settings::{self, invalid, num};
use crate::Cli;

pub const PARTICIPATION_FILE: &str = "participation.sumstats";
pub const LD_FILE: &str = "ldscores.l2";
pub const MEAN_SHIFT_FILE: &str = "meanshift.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const ADJUST_CONFIG: &str = "adjust.cfg";
pub const SAMPLE_TABLE: &str = "cohort_sample.csv";
pub const POPULATION_TABLE: &str = "cohort_population.csv";
pub const PARTICIPATION_NAME: &str = "participation";

/// Everything `simulate` reads from the configuration.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub model: TraitModel,
    pub sel: SelectionContext,
    pub opts: StudyOptions,
    pub write_cohort: bool,
}

fn ld_mode(cfg: &Config, value: Option<&str>, line: usize) -> Result<LdMode> {
    match value.map(str::trim) {
        None | Some("independent") => Ok(LdMode::Independent),
        Some(v) => {
            let size = v
                .strip_prefix("blocks:")
                .and_then(|s| s.trim().parse::<usize>().ok())
                .filter(|&s| s >= 1)
                .ok_or_else(|| cfg.parse_err(line, format!("ld: expected `independent` or `blocks:K`, got `{v}`")))?;
            Ok(LdMode::Blocks { max_size: size })
        }
    }
}

pub fn plan(cli: &Cli, cfg: &Config) -> Result<SimulationPlan> {
    let sel = settings::selection(cfg)?;
    let part = ParticipationParams::new(settings::h2x(cfg)?)?;
    let sim = settings::section(cfg, "simulation")?;
    let n = sim
        .usize(cfg, "n")?
        .ok_or_else(|| partbias_core::Error::MissingInput("`n` in [simulation]".into()))?;
    let m = sim
        .usize(cfg, "m")?
        .ok_or_else(|| partbias_core::Error::MissingInput("`m` in [simulation]".into()))?;
    let mut snp = SnpOptions::new(n, m);
    snp.ld = ld_mode(cfg, sim.str("ld"), sim.get("ld").map(|e| e.line).unwrap_or(sim.line))?;
    let lo = sim.f64(cfg, "freq_min")?.unwrap_or(snp.freq_range.0);
    let hi = sim.f64(cfg, "freq_max")?.unwrap_or(snp.freq_range.1);
    snp.freq_range = (lo, hi);
    snp.threads = settings::threads(cli);
    if let Some(b) = settings::cell_budget()? {
        snp.cell_budget = b;
    }
    let n_participation = sim.f64(cfg, "n_participation")?.unwrap_or(n as f64);

    let mut names = Vec::new();
    let mut phenotypes = Vec::new();
    for (name, sec) in settings::phenotypes(cfg)? {
        let h2 = sec.require_f64(cfg, "h2")?;
        let rg = sec.f64(cfg, "rho_g")?.unwrap_or(0.0);
        let re = sec.f64(cfg, "rho_e")?.unwrap_or(0.0);
        phenotypes.push(PhenotypeParams::new(h2, rg, re)?);
        names.push(name);
    }
    let mut pairs = Vec::new();
    for (a, b, sec) in settings::pairs(cfg)? {
        let idx = |n: &str| {
            names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| invalid("pair", format!("[pair.{a}:{b}] names unknown phenotype `{n}`")))
        };
        let (i, j) = (idx(&a)?, idx(&b)?);
        let vg = sec.require_f64(cfg, "varphi_g")?;
        let ve = sec.require_f64(cfg, "varphi_e")?;
        pairs.push((i, j, vg, ve));
    }
    let model = TraitModel::with_pairs(part, phenotypes, &pairs)?;
    let write_cohort = sim.bool(cfg, "write_cohort")?.unwrap_or(true);
    let opts = StudyOptions {
        snp,
        n_participation,
        participation_name: PARTICIPATION_NAME.into(),
        phenotype_names: names,
    };
    Ok(SimulationPlan { model, sel, opts, write_cohort })
}

fn sumstats_file(name: &str) -> String {
    format!("{name}.sumstats")
}

/// Configuration for `adjust` over the simulated files. Under identity LD the
/// intercepts are fixed: 1 for heritability, 0 against the participation
/// GWAS and the participant phenotypic correlation within a pair.
fn adjust_config(plan: &SimulationPlan, pair_r: &[(usize, usize, f64)], blocks: usize) -> String {
    let names = &plan.opts.phenotype_names;
    let identity = plan.opts.snp.ld == LdMode::Independent;
    let mut s = String::new();
    let _ = writeln!(s, "# Written by `partbias simulate`.");
    let _ = writeln!(s, "[participation]");
    let _ = writeln!(s, "alpha = {}", num(plan.sel.alpha()));
    let _ = writeln!(s, "h2x = {}", num(plan.model.participation().h2_x()));
    let _ = writeln!(s, "sumstats = {PARTICIPATION_FILE}");
    let _ = writeln!(s, "\n[ldsc]");
    let _ = writeln!(s, "ld = {LD_FILE}");
    let _ = writeln!(s, "blocks = {blocks}");
    let (hi, gi) = if identity { ("1", "0") } else { ("free", "free") };
    let _ = writeln!(s, "h2_intercept = {hi}");
    let _ = writeln!(s, "gcov_intercept = {gi}");
    let _ = writeln!(s, "\n[meanshift]");
    let _ = writeln!(s, "table = {MEAN_SHIFT_FILE}");
    for n in names {
        let _ = writeln!(s, "\n[phenotype.{n}]");
        let _ = writeln!(s, "sumstats = {}", sumstats_file(n));
    }
    if identity {
        for &(i, j, r) in pair_r {
            let _ = writeln!(s, "\n[pair.{}:{}]", names[i], names[j]);
            let _ = writeln!(s, "intercept = {}", num(r));
        }
    }
    s
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = settings::require(cli)?;
    let plan = plan(cli, &cfg)?;
    let seed = settings::seed(cli, &cfg)?;
    let mut run = Run::start(&cli.out_dir, cli.command.name(), cli.config.as_deref())?;
    run.set_seed(seed);
    log::info!(
        "simulating n = {}, m = {}, {} phenotypes, seed {seed}",
        plan.opts.snp.n,
        plan.opts.snp.m,
        plan.opts.phenotype_names.len()
    );
    let study = simulate_study(&plan.model, &plan.sel, &plan.opts, seed)?;
    let truth = study_truth(&plan.model, &plan.sel, &plan.opts.phenotype_names)?;
    if !study.monomorphic.is_empty() {
        run.warn(format!(
            "{} SNPs are monomorphic among participants and were dropped from the participant GWAS",
            study.monomorphic.len()
        ));
    }
    run.write(PARTICIPATION_FILE, &sumstats_to_string(&study.participation))?;
    for (name, s) in plan.opts.phenotype_names.iter().zip(&study.phenotypes) {
        run.write(&sumstats_file(name), &sumstats_to_string(s))?;
    }
    run.write(LD_FILE, &ldscores_to_string(&study.ld))?;
    run.write(MEAN_SHIFT_FILE, &meanshift_to_string(&study.mean_shifts)?)?;
    let truth_json = serde_json::json!({
        "seed": seed,
        "n_population": study.n_population,
        "n_selected": study.n_selected,
        "truth": truth,
    });
    run.write(TRUTH_FILE, &(serde_json::to_string_pretty(&truth_json)? + "\n"))?;
    if plan.write_cohort {
        run.write(SAMPLE_TABLE, &phenotype_table_to_string(&study.sample_table)?)?;
        run.write(POPULATION_TABLE, &phenotype_table_to_string(&study.population_table)?)?;
    }
    let blocks = cli.blocks.unwrap_or(DEFAULT_BLOCKS);
    run.write(ADJUST_CONFIG, &adjust_config(&plan, &study.phenotypic_correlations, blocks))?;
    run.finish()?;
    Ok(())
}
