//! The table-producing commands.

use twotime_core::chain::{classical_db_check, classical_mgf, extract_chain, Ctmc};
use twotime_core::detailed_balance::check_db;
use twotime_core::entropy::{ep_component, ep_total, von_neumann_entropy};
use twotime_core::lindblad::{is_relaxing, steady_states, Propagator, Reservoir};
use twotime_core::operator::DensityMatrix;
use twotime_core::two_time::{entropy_observable, joint_law_with, mgf, MgfMethod};
use twotime_core::Error;

use crate::output::{num, opt, Table};
use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Validation(String),
    Hypothesis(String),
    Numeric(String),
}

/// Exit code of a `verify` run with at least one failing check.
pub const EXIT_CHECK_FAILED: u8 = 5;
pub const EXIT_HYPOTHESIS: u8 = 4;

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Hypothesis(_) => EXIT_HYPOTHESIS,
            Failure::Numeric(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Hypothesis(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Hypothesis(_) => Failure::Hypothesis(e.to_string()),
            Error::Numeric(_) => Failure::Numeric(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(_) | ScenarioError::Parse(_) => Failure::Usage(e.to_string()),
            ScenarioError::Validation { .. } => Failure::Validation(e.to_string()),
        }
    }
}

/// A finished command: its table and the exit code to report.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub code: u8,
}

impl Report {
    pub fn ok(table: Table) -> Self {
        Report { table, code: 0 }
    }

    fn flagged(table: Table, hypothesis: bool) -> Self {
        Report {
            table,
            code: if hypothesis { EXIT_HYPOTHESIS } else { 0 },
        }
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub db_tol: f64,
    pub seed: u64,
}

/// Hypothesis failures become table notes; anything else aborts.
pub fn soft<T>(r: twotime_core::Result<T>) -> Result<Result<T, String>, Failure> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::Hypothesis(_) | Error::NotFaithful { .. })) => Ok(Err(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

pub fn steady(sc: &Scenario) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let l = decomp.total();
    let found = steady_states(l, sc.tolerances.kernel);
    let relaxing = is_relaxing(l, sc.tolerances.kernel);
    let mut table = Table::new(["state", "kernel_dimension", "relaxing", "row", "col", "re", "im"]);
    for (k, state) in found.states.iter().enumerate() {
        let m = state.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                table.push(vec![
                    k.to_string(),
                    found.kernel_dimension.to_string(),
                    relaxing.to_string(),
                    i.to_string(),
                    j.to_string(),
                    num(m[(i, j)].re),
                    num(m[(i, j)].im),
                ]);
            }
        }
    }
    if found.unrepresented > 0 {
        log::warn!(
            "{} kernel direction(s) without a state representative",
            found.unrepresented
        );
    }
    Ok(Report::ok(table))
}

pub fn evolve(sc: &Scenario) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let prop = Propagator::new(decomp.total());
    let d = sc.dimension;
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    header.push("entropy".into());
    header.push("ep".into());
    for part in decomp.parts() {
        header.push(format!("ep_{}", part.label));
    }
    let mut table = Table::new(header);
    for &t in &sc.times {
        let state = prop.state(&sc.initial_state, t)?;
        let m = state.matrix();
        let mut row = vec![num(t)];
        for i in 0..d {
            for j in 0..d {
                row.push(num(m[(i, j)].re));
                row.push(num(m[(i, j)].im));
            }
        }
        row.push(num(von_neumann_entropy(&state)));
        row.push(num(ep_total(&decomp, &state)?.to_f64()));
        for part in decomp.parts() {
            row.push(num(ep_component(&state, &part.generator, &part.steady)?.to_f64()));
        }
        table.push(row);
    }
    Ok(Report::ok(table))
}

pub const DB_EXPONENTS: [f64; 3] = [0.0, 0.5, 1.0];

pub fn db_check(sc: &Scenario, settings: &Settings) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let mut table = Table::new([
        "reservoir",
        "variant",
        "s",
        "holds",
        "residual",
        "tolerance",
        "stationarity_residual",
    ]);
    for part in decomp.parts() {
        for s in DB_EXPONENTS {
            let r = check_db(&part.steady, &part.generator, s, settings.db_tol)?;
            table.push(vec![
                part.label.clone(),
                r.variant.to_string(),
                num(s),
                r.holds.to_string(),
                num(r.residual),
                num(r.tolerance),
                num(r.stationarity_residual),
            ]);
        }
    }
    Ok(Report::ok(table))
}

pub fn ttm(sc: &Scenario) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let mut table = Table::new(["reservoir", "t", "quantity", "sigma", "value"]);
    for part in decomp.parts() {
        let s = entropy_observable(&part.steady)?;
        let prop = Propagator::new(&part.generator);
        for &t in &sc.times {
            let law = joint_law_with(&prop, &sc.initial_state, &s, t)?.delta();
            for (sigma, p) in law.support.iter().zip(&law.probabilities) {
                table.push(vec![
                    part.label.clone(),
                    num(t),
                    "probability".into(),
                    num(*sigma),
                    num(*p),
                ]);
            }
            table.push(vec![
                part.label.clone(),
                num(t),
                "expected".into(),
                String::new(),
                num(law.expectation()),
            ]);
        }
    }
    Ok(Report::ok(table))
}

/// Chain of a reservoir; the initial law comes from `ρ₀` when it is faithful,
/// from the reservoir state otherwise.
pub fn reservoir_chain(part: &Reservoir, rho0: &DensityMatrix) -> twotime_core::Result<Ctmc> {
    let start = if rho0.is_faithful() { rho0 } else { &part.steady };
    extract_chain(&part.generator, &part.steady, start)
}

pub fn mgf_grid(sc: &Scenario) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let mut table = Table::new(["reservoir", "t", "alpha", "direct", "deformed", "classical", "note"]);
    let mut hypothesis = false;
    for part in decomp.parts() {
        let s = entropy_observable(&part.steady)?;
        let chain = if sc.initial_state.is_faithful() {
            soft(extract_chain(&part.generator, &part.steady, &sc.initial_state))?
        } else {
            Err("initial state is not faithful".to_string())
        };
        if let Err(reason) = &chain {
            log::warn!("reservoir {}: no classical chain ({reason})", part.label);
            hypothesis = true;
        }
        for &t in &sc.times {
            for &alpha in &sc.alphas {
                let direct = mgf(&part.generator, &sc.initial_state, &s, t, alpha, MgfMethod::Direct)?;
                let deformed = mgf(&part.generator, &sc.initial_state, &s, t, alpha, MgfMethod::Deformed)?;
                let classical = match &chain {
                    Ok(c) => Some(classical_mgf(c, t, alpha)?),
                    Err(_) => None,
                };
                table.push(vec![
                    part.label.clone(),
                    num(t),
                    num(alpha),
                    num(direct),
                    num(deformed),
                    opt(classical),
                    chain.as_ref().err().cloned().unwrap_or_default(),
                ]);
            }
        }
    }
    Ok(Report::flagged(table, hypothesis))
}

/// Picks a reservoir by label or index; the first one by default.
fn select<'a>(parts: &'a [Reservoir], which: Option<&str>) -> Result<&'a Reservoir, Failure> {
    match which {
        None => Ok(&parts[0]),
        Some(key) => parts
            .iter()
            .find(|p| p.label == key)
            .or_else(|| key.parse::<usize>().ok().and_then(|k| parts.get(k)))
            .ok_or_else(|| Failure::Usage(format!("no reservoir named {key}"))),
    }
}

/// Header of state labels `s`, then the rows of `Q`.
pub fn chain(sc: &Scenario, which: Option<&str>) -> Result<Report, Failure> {
    let decomp = sc.decomposition()?;
    let part = select(decomp.parts(), which)?;
    let chain = reservoir_chain(part, &sc.initial_state)?;
    let mut table = Table::new(chain.states().iter().map(|&s| num(s)));
    let q = chain.rates();
    for i in 0..chain.len() {
        table.push((0..chain.len()).map(|k| num(q[(i, k)])).collect());
    }
    let db = classical_db_check(&chain);
    eprintln!(
        "reservoir {}: classical detailed balance residual {} (rates {}, transitions {})",
        part.label,
        num(db.max()),
        num(db.rates_residual),
        num(db.transition_residual)
    );
    Ok(Report::ok(table))
}

/// Writes a single-row table describing a hypothesis failure.
pub fn hypothesis_table(message: &str) -> Table {
    let mut table = Table::new(["status", "detail"]);
    table.push(vec!["hypothesis".into(), message.to_string()]);
    table
}
