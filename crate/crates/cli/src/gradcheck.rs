use clap::{Args, ValueEnum};

use physid::trainer::check::{
    check_full_chain, check_loss, check_ltc, check_primitives, check_rollouts, CheckResult,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    Primitive,
    Ltc,
    Rollout,
    Loss,
    /// Network through rollout and loss on a pendulum window.
    Full,
    All,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = Scope::All)]
    pub scope: Scope,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Random points per primitive.
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
}

pub fn collect(a: &GradcheckArgs) -> Result<Vec<CheckResult>> {
    let want = |s: Scope| a.scope == s || a.scope == Scope::All;
    let mut rows = Vec::new();
    if want(Scope::Primitive) {
        rows.extend(check_primitives(a.points, a.seed));
    }
    if want(Scope::Rollout) {
        rows.extend(check_rollouts()?);
    }
    if want(Scope::Loss) {
        rows.extend(check_loss(a.seed)?);
    }
    if want(Scope::Ltc) {
        rows.extend(check_ltc(a.seed)?);
    }
    if want(Scope::Full) {
        rows.extend(check_full_chain(a.seed)?);
    }
    Ok(rows)
}

pub fn table(rows: &[CheckResult]) -> String {
    let mut s = format!(
        "{:<10} {:<28} {:>8} {:>12} {:>10}  status\n",
        "scope", "name", "coords", "max_rel_err", "tolerance"
    );
    for r in rows {
        let status = if r.passed() { "ok" } else { "FAIL" };
        let note = if r.excluded { " (kink)" } else { "" };
        s.push_str(&format!(
            "{:<10} {:<28} {:>8} {:>12.3e} {:>10.0e}  {status}{note}\n",
            r.scope, r.name, r.coords, r.max_rel_error, r.tolerance
        ));
    }
    s
}

pub fn run(a: &GradcheckArgs) -> Result<()> {
    let rows = collect(a)?;
    print!("{}", table(&rows));
    let failed = rows.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
