//! Scenario files: JSON documents describing a model, an initial state and
//! the time and `α` grids to evaluate.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use twotime_core::lindblad::{unique_steady_state, Lindbladian, Reservoir, ReservoirDecomposition};
use twotime_core::operator::{c64, hermiticity_defect, max_abs, DensityMatrix, Operator, Tolerances};
use twotime_core::qrm::{build_qrm, qrm_steady_state, QrmSpec};

/// A matrix entry: a bare real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

type RawMatrix = Vec<Vec<Entry>>;

/// Used when a scenario omits `times`.
pub const DEFAULT_TIMES: [f64; 4] = [0.0, 0.1, 1.0, 10.0];
/// Used when a scenario omits `alphas`.
pub const DEFAULT_ALPHAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQrm {
    #[serde(rename = "T")]
    target: RawMatrix,
    gamma: f64,
    lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReservoir {
    label: Option<String>,
    lambda: Option<f64>,
    beta: Option<f64>,
    steady_state: Option<RawMatrix>,
    kraus: Option<Vec<RawMatrix>>,
    qrm: Option<RawQrm>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    db: Option<f64>,
    kernel: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    dimension: usize,
    hamiltonian: RawMatrix,
    reservoirs: Vec<RawReservoir>,
    initial_state: RawMatrix,
    #[serde(default)]
    times: Vec<f64>,
    #[serde(default)]
    alphas: Vec<f64>,
    #[serde(default)]
    tolerances: RawTolerances,
}

#[derive(Debug)]
pub enum ScenarioError {
    Io(String),
    Parse(String),
    Validation { field: String, message: String },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io(m) => write!(f, "cannot read scenario: {m}"),
            ScenarioError::Parse(m) => write!(f, "cannot parse scenario: {m}"),
            ScenarioError::Validation { field, message } => write!(f, "invalid {field}: {message}"),
        }
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone)]
pub enum Dissipator {
    Kraus(Vec<Operator>),
    Qrm(QrmSpec),
}

#[derive(Debug, Clone)]
pub struct ReservoirSpec {
    pub label: String,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub dissipator: Dissipator,
    pub steady_state: Option<DensityMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioTolerances {
    pub db: f64,
    pub kernel: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dimension: usize,
    pub hamiltonian: Operator,
    pub reservoirs: Vec<ReservoirSpec>,
    pub initial_state: DensityMatrix,
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub tolerances: ScenarioTolerances,
}

fn matrix(raw: &RawMatrix, dim: usize, field: &str) -> Result<Operator, ScenarioError> {
    if raw.len() != dim || raw.iter().any(|r| r.len() != dim) {
        return Err(invalid(field, format!("expected a {dim}x{dim} matrix")));
    }
    Ok(Operator::from_fn(dim, dim, |i, k| match raw[i][k] {
        Entry::Real(x) => c64(x, 0.0),
        Entry::Complex([re, im]) => c64(re, im),
    }))
}

fn state(raw: &RawMatrix, dim: usize, field: &str) -> Result<DensityMatrix, ScenarioError> {
    let m = matrix(raw, dim, field)?;
    DensityMatrix::new(m, &Tolerances::default()).map_err(|e| invalid(field, e.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let dim = raw.dimension;
    if dim == 0 {
        return Err(invalid("dimension", "must be positive"));
    }
    let hamiltonian = matrix(&raw.hamiltonian, dim, "hamiltonian")?;
    let defect = hermiticity_defect(&hamiltonian);
    if defect > Tolerances::default().hermiticity * max_abs(&hamiltonian).max(1.0) {
        return Err(invalid("hamiltonian", format!("not Hermitian (defect {defect:.3e})")));
    }
    if raw.reservoirs.is_empty() {
        return Err(invalid("reservoirs", "at least one reservoir is required"));
    }
    let initial_state = state(&raw.initial_state, dim, "initial_state")?;
    if raw.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(invalid("times", "times must be nonnegative"));
    }
    if raw.times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "times must be ascending"));
    }
    if raw.alphas.iter().any(|a| !a.is_finite()) {
        return Err(invalid("alphas", "alphas must be finite"));
    }
    let n = raw.reservoirs.len();
    let mut reservoirs = Vec::with_capacity(n);
    for (j, r) in raw.reservoirs.iter().enumerate() {
        let field = |name: &str| format!("reservoirs[{j}].{name}");
        let label = r.label.clone().unwrap_or_else(|| format!("reservoir{j}"));
        let lambda = match (r.lambda, r.qrm.as_ref().and_then(|q| q.lambda)) {
            (Some(_), Some(_)) => return Err(invalid(field("lambda"), "given both on the reservoir and in qrm")),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => 1.0 / n as f64,
        };
        if !lambda.is_finite() {
            return Err(invalid(field("lambda"), "must be finite"));
        }
        if let Some(beta) = r.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(invalid(field("beta"), "must be positive"));
            }
        }
        let dissipator = match (&r.kraus, &r.qrm) {
            (Some(ks), None) => {
                let ops = ks
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix(m, dim, &field(&format!("kraus[{k}]"))))
                    .collect::<Result<Vec<_>, _>>()?;
                Dissipator::Kraus(ops)
            }
            (None, Some(q)) => {
                let target = state(&q.target, dim, &field("qrm.T"))?;
                let spec = QrmSpec::new(hamiltonian.clone(), target, q.gamma)
                    .map_err(|e| invalid(field("qrm.gamma"), e.to_string()))?
                    .with_lambda(lambda);
                Dissipator::Qrm(spec)
            }
            _ => return Err(invalid(field("kraus"), "exactly one of kraus or qrm is required")),
        };
        let steady_state = r
            .steady_state
            .as_ref()
            .map(|m| state(m, dim, &field("steady_state")))
            .transpose()?;
        reservoirs.push(ReservoirSpec {
            label,
            lambda,
            beta: r.beta,
            dissipator,
            steady_state,
        });
    }
    let lambda_sum: f64 = reservoirs.iter().map(|r| r.lambda).sum();
    if (lambda_sum - 1.0).abs() > 1e-12 {
        return Err(invalid(
            "reservoirs.lambda",
            format!("weights must sum to 1, got {lambda_sum}"),
        ));
    }
    let tol = |v: Option<f64>, default: f64, name: &str| match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(_) => Err(invalid(format!("tolerances.{name}"), "must be positive")),
        None => Ok(default),
    };
    let tolerances = ScenarioTolerances {
        db: tol(raw.tolerances.db, twotime_core::detailed_balance::DEFAULT_DB_TOL, "db")?,
        kernel: tol(
            raw.tolerances.kernel,
            twotime_core::lindblad::DEFAULT_KERNEL_TOL,
            "kernel",
        )?,
    };
    let times = if raw.times.is_empty() {
        DEFAULT_TIMES.to_vec()
    } else {
        raw.times
    };
    let alphas = if raw.alphas.is_empty() {
        DEFAULT_ALPHAS.to_vec()
    } else {
        raw.alphas
    };
    Ok(Scenario {
        dimension: dim,
        hamiltonian,
        reservoirs,
        initial_state,
        times,
        alphas,
        tolerances,
    })
}

impl ReservoirSpec {
    pub fn generator(&self, hamiltonian: &Operator) -> twotime_core::Result<Lindbladian> {
        match &self.dissipator {
            Dissipator::Kraus(ops) => {
                Ok(Lindbladian::new(hamiltonian * c64(self.lambda, 0.0), ops.clone())?.with_label(self.label.clone()))
            }
            Dissipator::Qrm(spec) => Ok(build_qrm(spec)?.with_label(self.label.clone())),
        }
    }

    pub fn qrm(&self) -> Option<&QrmSpec> {
        match &self.dissipator {
            Dissipator::Qrm(spec) => Some(spec),
            Dissipator::Kraus(_) => None,
        }
    }
}

impl Scenario {
    /// Builds every reservoir with its stationary state: the declared one,
    /// the closed-form one for reset parts, or the unique kernel state.
    pub fn decomposition(&self) -> twotime_core::Result<ReservoirDecomposition> {
        let mut parts = Vec::with_capacity(self.reservoirs.len());
        for r in &self.reservoirs {
            let generator = r.generator(&self.hamiltonian)?;
            let steady = match (&r.steady_state, r.qrm()) {
                (Some(s), _) => s.clone(),
                (None, Some(spec)) => qrm_steady_state(spec)?,
                (None, None) => unique_steady_state(&generator)?,
            };
            let mut part = Reservoir::new(r.label.clone(), generator, steady)?;
            if let Some(beta) = r.beta {
                part = part.with_beta(beta);
            }
            parts.push(part);
        }
        ReservoirDecomposition::from_parts(parts)
    }

    /// Reset specs when every reservoir is a reset model.
    pub fn qrm_parts(&self) -> Option<Vec<QrmSpec>> {
        self.reservoirs.iter().map(|r| r.qrm().cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUBIT: &str = r#"{
        "dimension": 2,
        "hamiltonian": [[0, 0], [0, 1]],
        "reservoirs": [{"qrm": {"T": [[0.75, 0], [0, 0.25]], "gamma": 1}}],
        "initial_state": [[0.5, [0.1, 0.2]], [[0.1, -0.2], 0.5]],
        "times": [0, 1],
        "alphas": [0]
    }"#;

    #[test]
    fn minimal_qubit_file() {
        let s = parse_scenario(QUBIT).unwrap();
        assert_eq!(s.reservoirs.len(), 1);
        assert_eq!(s.reservoirs[0].lambda, 1.0);
        assert!(s.decomposition().is_ok());
    }

    #[test]
    fn validation_names_the_field() {
        let bad_h = QUBIT.replace("[[0, 0], [0, 1]]", "[[0, 1], [0, 1]]");
        match parse_scenario(&bad_h) {
            Err(ScenarioError::Validation { field, .. }) => assert_eq!(field, "hamiltonian"),
            other => panic!("unexpected {other:?}"),
        }
        let bad_t = QUBIT.replace("\"times\": [0, 1]", "\"times\": [1, 0.5]");
        match parse_scenario(&bad_t) {
            Err(ScenarioError::Validation { message, .. }) => assert_eq!(message, "times must be ascending"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_scenario("{"), Err(ScenarioError::Parse(_))));
    }
}
