use bregman_dre::verify::{covered_generators, run_identity_suite, IdentityCheck, SuiteConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{prepare_dir, write_json};

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub n_pairs: usize,
    pub n_random: usize,
    pub mutate_gamma_prime: bool,
    pub generators: Vec<String>,
    pub passed: bool,
    pub groups: Vec<IdentityCheck>,
}

pub fn report(cfg: &RunConfig) -> CheckReport {
    let defaults = SuiteConfig::default();
    let suite = SuiteConfig {
        seed: cfg.seed(),
        n_pairs: cfg.n_pairs.unwrap_or(defaults.n_pairs),
        n_random: cfg.n_random.unwrap_or(defaults.n_random),
        mutate_gamma_prime: cfg.mutate_gamma_prime.unwrap_or(false),
    };
    let groups = run_identity_suite(&suite);
    CheckReport {
        seed: suite.seed,
        n_pairs: suite.n_pairs,
        n_random: suite.n_random,
        mutate_gamma_prime: suite.mutate_gamma_prime,
        generators: covered_generators(),
        passed: groups.iter().all(|g| g.passed),
        groups,
    }
}

/// Writes `check_report.json`; a failing group turns into exit code 3 after the report is on disk.
pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let rep = report(cfg);
    let dir = cfg.out_dir();
    prepare_dir(&dir)?;
    write_json(&dir, "check_report.json", &rep)?;
    for g in &rep.groups {
        let mark = if g.passed { "ok  " } else { "FAIL" };
        println!("{mark} {:<28} max residual {:.3e} (tol {:.0e}, {} evals)", g.name, g.max_residual, g.tolerance, g.evaluations);
    }
    if rep.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = rep.groups.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}
