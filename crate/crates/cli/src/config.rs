//! Experiment configuration documents and their validation.
//!
//! A config is a single JSON object. Unknown keys are rejected at parse time;
//! everything else is checked by [`validate`], which reports every offending
//! field at once.

use serde::{Deserialize, Serialize};
use tangent_core::degree_mc::{TestFunction, DEFAULT_QUADRATURE_NODES, MIN_QUADRATURE_NODES};
use tangent_core::gauss_space::{BasisKind, BasisSpec};
use tangent_core::jump_process::{JumpEvent, JumpPath, SizeDistribution};

use crate::error::CliError;

pub const DEFAULT_SIGMAS: f64 = 3.0;
pub const DEFAULT_PICARD_TOL: f64 = 1e-12;
pub const DEFAULT_PICARD_MAX_ITER: usize = 10_000;
pub const DEFAULT_PREIMAGE_TOL: f64 = 1e-3;
pub const DEFAULT_TRUNCATION_LEVELS: u32 = 12;
pub const DEFAULT_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// The config document as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Defaults to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_eval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub dimension: usize,
    #[serde(default = "default_kind")]
    pub kind: BasisKind,
}

fn default_kind() -> BasisKind {
    BasisKind::Abstract
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<JumpEvent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_dist: Option<SizeDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jumps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function_g: Option<TestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(vec![format!("parse: {e}")]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Fixed(JumpPath),
    CompoundPoisson { rate: f64, sizes: SizeDistribution, max_jumps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Degree { samples: usize, sigmas: f64 },
    AbsJacobian { samples: usize, sigmas: f64 },
    ChangeOfVariables { samples: usize, sigmas: f64, f: TestFunction, nodes: usize },
    PreimageSum { samples: usize, sigmas: f64, f: TestFunction, g: TestFunction, nodes: usize, tol: f64 },
    Invert { tol: f64, max_iter: usize },
    Evolve { scales: Vec<f64> },
    TruncationStudy { levels: u32 },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Degree { .. } => "degree",
            Self::AbsJacobian { .. } => "abs_jacobian",
            Self::ChangeOfVariables { .. } => "change_of_variables",
            Self::PreimageSum { .. } => "preimage_sum",
            Self::Invert { .. } => "invert",
            Self::Evolve { .. } => "evolve",
            Self::TruncationStudy { .. } => "truncation_study",
        }
    }
}

/// A config that passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub seed: u64,
    pub horizon: f64,
    pub basis: BasisSpec,
    pub process: Process,
    pub eps: f64,
    pub t_eval: f64,
    pub experiment: Experiment,
}

const KINDS: [&str; 7] =
    ["degree", "abs_jacobian", "change_of_variables", "preimage_sum", "invert", "evolve", "truncation_study"];

/// Which optional experiment fields each kind reads.
fn fields_for(kind: &str) -> &'static [&'static str] {
    match kind {
        "degree" | "abs_jacobian" => &["samples", "sigmas"],
        "change_of_variables" => &["samples", "sigmas", "test_function", "quadrature_nodes"],
        "preimage_sum" => &["samples", "sigmas", "test_function", "test_function_g", "quadrature_nodes", "tol"],
        "invert" => &["tol", "max_iter"],
        "evolve" => &["scales"],
        "truncation_study" => &["levels"],
        _ => &[],
    }
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    fn required<'a, T>(&mut self, field: &str, v: &'a Option<T>) -> Option<&'a T> {
        if v.is_none() {
            self.push(field, "required");
        }
        v.as_ref()
    }
}

/// Checks every field and builds the run plan, or lists every problem found.
pub fn validate(config: &ExperimentConfig) -> Result<Plan, CliError> {
    let mut errs = Errors(Vec::new());

    let seed = errs.required("seed", &config.seed).copied();

    let horizon = errs.required("horizon", &config.horizon).copied().filter(|&h| {
        let ok = positive_finite(h);
        if !ok {
            errs.push("horizon", format!("must be finite and > 0, got {h}"));
        }
        ok
    });

    let basis = errs.required("basis", &config.basis).and_then(|b| match BasisSpec::new(b.dimension, b.kind) {
        Ok(spec) => Some(spec),
        Err(e) => {
            errs.push("basis.dimension", e);
            None
        }
    });

    let eps = config.eps.unwrap_or(0.0);
    if !(eps.is_finite() && eps >= 0.0) {
        errs.push("eps", format!("must be finite and >= 0, got {eps}"));
    }

    let t_eval = config.t_eval.or(horizon);
    if let (Some(t), Some(h)) = (config.t_eval, horizon) {
        if !(t.is_finite() && (0.0..=h).contains(&t)) {
            errs.push("t_eval", format!("must lie in [0, horizon = {h}], got {t}"));
        }
    }

    let process = errs.required("process", &config.process).and_then(|p| validate_process(p, horizon, basis.as_ref(), &mut errs));

    let experiment = errs
        .required("experiment", &config.experiment)
        .and_then(|e| validate_experiment(e, basis.as_ref(), &mut errs));

    if !errs.0.is_empty() {
        return Err(CliError::Config(errs.0));
    }
    match (seed, horizon, basis, process, t_eval, experiment) {
        (Some(seed), Some(horizon), Some(basis), Some(process), Some(t_eval), Some(experiment)) => {
            Ok(Plan { seed, horizon, basis, process, eps, t_eval, experiment })
        }
        _ => unreachable!("every missing piece records an error"),
    }
}

fn validate_process(p: &ProcessConfig, horizon: Option<f64>, basis: Option<&BasisSpec>, errs: &mut Errors) -> Option<Process> {
    match p.kind.as_str() {
        "fixed_jumps" => {
            for (name, present) in [("rate", p.rate.is_some()), ("size_dist", p.size_dist.is_some()), ("max_jumps", p.max_jumps.is_some())] {
                if present {
                    errs.push(&format!("process.{name}"), "not used by fixed_jumps");
                }
            }
            let events = errs.required("process.events", &p.events)?;
            let path = match JumpPath::new(events.clone(), horizon?) {
                Ok(path) => path,
                Err(e) => {
                    errs.push("process.events", e);
                    return None;
                }
            };
            if let Some(b) = basis {
                if path.len() > b.dimension() {
                    errs.push(
                        "basis.dimension",
                        format!("{} is below the {} scheduled jumps", b.dimension(), path.len()),
                    );
                }
            }
            Some(Process::Fixed(path))
        }
        "compound_poisson" => {
            if p.events.is_some() {
                errs.push("process.events", "not used by compound_poisson");
            }
            let rate = errs.required("process.rate", &p.rate).copied().filter(|&r| {
                let ok = positive_finite(r);
                if !ok {
                    errs.push("process.rate", format!("must be finite and > 0, got {r}"));
                }
                ok
            });
            let sizes = errs.required("process.size_dist", &p.size_dist).filter(|d| match d.validate() {
                Ok(()) => true,
                Err(e) => {
                    errs.push("process.size_dist", e);
                    false
                }
            });
            let max_jumps = errs.required("process.max_jumps", &p.max_jumps).copied();
            if let (Some(cap), Some(b)) = (max_jumps, basis) {
                if cap > b.dimension() {
                    errs.push("process.max_jumps", format!("{cap} exceeds basis.dimension = {}", b.dimension()));
                }
            }
            Some(Process::CompoundPoisson { rate: rate?, sizes: sizes?.clone(), max_jumps: max_jumps? })
        }
        other => {
            errs.push("process.type", format!("unknown process type '{other}' (expected fixed_jumps or compound_poisson)"));
            None
        }
    }
}

fn validate_experiment(e: &ExperimentSection, basis: Option<&BasisSpec>, errs: &mut Errors) -> Option<Experiment> {
    let kind = e.kind.as_str();
    if !KINDS.contains(&kind) {
        errs.push("experiment.kind", format!("unknown experiment kind '{kind}' (expected one of {})", KINDS.join(", ")));
        return None;
    }
    let used = fields_for(kind);
    let present = [
        ("samples", e.samples.is_some()),
        ("sigmas", e.sigmas.is_some()),
        ("test_function", e.test_function.is_some()),
        ("test_function_g", e.test_function_g.is_some()),
        ("quadrature_nodes", e.quadrature_nodes.is_some()),
        ("tol", e.tol.is_some()),
        ("max_iter", e.max_iter.is_some()),
        ("scales", e.scales.is_some()),
        ("levels", e.levels.is_some()),
    ];
    for (name, is_set) in present {
        if is_set && !used.contains(&name) {
            errs.push(&format!("experiment.{name}"), format!("not used by {kind}"));
        }
    }

    let samples = if used.contains(&"samples") {
        errs.required("experiment.samples", &e.samples).copied().filter(|&n| {
            if n < 2 {
                errs.push("experiment.samples", format!("must be >= 2, got {n}"));
            }
            n >= 2
        })
    } else {
        None
    };

    let sigmas = e.sigmas.unwrap_or(DEFAULT_SIGMAS);
    if !positive_finite(sigmas) {
        errs.push("experiment.sigmas", format!("must be finite and > 0, got {sigmas}"));
    }
    let nodes = e.quadrature_nodes.unwrap_or(DEFAULT_QUADRATURE_NODES);
    if nodes < MIN_QUADRATURE_NODES {
        errs.push("experiment.quadrature_nodes", format!("must be >= {MIN_QUADRATURE_NODES}, got {nodes}"));
    }
    let experiment = match kind {
        "degree" => Experiment::Degree { samples: samples?, sigmas },
        "abs_jacobian" => Experiment::AbsJacobian { samples: samples?, sigmas },
        "change_of_variables" => {
            let f = match &e.test_function {
                Some(f) => checked_function("experiment.test_function", f, basis, errs),
                None => {
                    errs.push("experiment.test_function", "required for change_of_variables");
                    None
                }
            };
            Experiment::ChangeOfVariables { samples: samples?, sigmas, f: f?, nodes }
        }
        "preimage_sum" => {
            let f = match &e.test_function {
                Some(f) => checked_function("experiment.test_function", f, basis, errs),
                None => {
                    errs.push("experiment.test_function", "required for preimage_sum");
                    None
                }
            };
            let g = match &e.test_function_g {
                Some(g) => checked_function("experiment.test_function_g", g, basis, errs),
                None => Some(TestFunction::constant(1.0)),
            };
            for (field, func) in [("experiment.test_function", &f), ("experiment.test_function_g", &g)] {
                if let Some(func) = func {
                    if !func.is_bounded_nonnegative() {
                        errs.push(field, "preimage_sum needs a bounded nonnegative function (indicator_box or nonnegative constant)");
                    }
                }
            }
            let tol = e.tol.unwrap_or(DEFAULT_PREIMAGE_TOL);
            if !positive_finite(tol) {
                errs.push("experiment.tol", format!("must be finite and > 0, got {tol}"));
            }
            Experiment::PreimageSum { samples: samples?, sigmas, f: f?, g: g?, nodes, tol }
        }
        "invert" => {
            let tol = e.tol.unwrap_or(DEFAULT_PICARD_TOL);
            if !positive_finite(tol) {
                errs.push("experiment.tol", format!("must be finite and > 0, got {tol}"));
            }
            let max_iter = e.max_iter.unwrap_or(DEFAULT_PICARD_MAX_ITER);
            if max_iter == 0 {
                errs.push("experiment.max_iter", "must be >= 1");
            }
            Experiment::Invert { tol, max_iter }
        }
        "evolve" => {
            let scales = e.scales.clone().unwrap_or_else(|| DEFAULT_SCALES.to_vec());
            if scales.is_empty() || scales.iter().any(|&c| !positive_finite(c)) || scales.windows(2).any(|w| w[1] >= w[0]) {
                errs.push("experiment.scales", "must be a non-empty, strictly decreasing list of positive numbers");
            }
            Experiment::Evolve { scales }
        }
        "truncation_study" => {
            let levels = e.levels.unwrap_or(DEFAULT_TRUNCATION_LEVELS);
            if !(1..=60).contains(&levels) {
                errs.push("experiment.levels", format!("must be between 1 and 60, got {levels}"));
            }
            Experiment::TruncationStudy { levels }
        }
        _ => unreachable!(),
    };
    Some(experiment)
}

fn checked_function(field: &str, f: &TestFunction, basis: Option<&BasisSpec>, errs: &mut Errors) -> Option<TestFunction> {
    if let Err(err) = f.validate() {
        errs.push(field, err);
        return None;
    }
    if let Some(b) = basis {
        if f.max_coordinate() > b.dimension() {
            errs.push(field, format!("reads coordinate {} beyond basis.dimension = {}", f.max_coordinate(), b.dimension()));
            return None;
        }
    }
    Some(f.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "seed": 1,
            "horizon": 1.0,
            "basis": {"dimension": 4},
            "process": {"type": "fixed_jumps", "events": [{"time": 0.2, "size": 0.5}]},
            "eps": 0.0,
            "t_eval": 1.0,
            "experiment": {"kind": "degree", "samples": 100}
        })
    }

    fn errors(v: serde_json::Value) -> Vec<String> {
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        match validate(&cfg) {
            Err(CliError::Config(list)) => list,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn base_config_validates() {
        let cfg: ExperimentConfig = serde_json::from_value(base()).unwrap();
        let plan = validate(&cfg).unwrap();
        assert_eq!(plan.experiment, Experiment::Degree { samples: 100, sigmas: 3.0 });
        assert_eq!(plan.t_eval, 1.0);
    }

    #[test]
    fn t_eval_defaults_to_horizon() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("t_eval");
        v["horizon"] = 2.0.into();
        let plan = validate(&serde_json::from_value(v).unwrap()).unwrap();
        assert_eq!(plan.t_eval, 2.0);
    }

    #[test]
    fn unknown_keys_rejected_at_parse() {
        let mut v = base();
        v["sed"] = 3.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
        let mut v = base();
        v["experiment"]["sample"] = 3.into();
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn every_error_is_listed() {
        let mut v = base();
        v["eps"] = (-0.1).into();
        v["t_eval"] = 2.0.into();
        v["experiment"]["kind"] = "degre".into();
        let list = errors(v);
        assert_eq!(list.len(), 3, "{list:?}");
        assert!(list[0].starts_with("eps:"));
        assert!(list[1].starts_with("t_eval:"));
        assert!(list[2].starts_with("experiment.kind:"));
    }

    #[test]
    fn negative_rate_names_field() {
        let mut v = base();
        v["process"] = serde_json::json!({
            "type": "compound_poisson", "rate": -1.0,
            "size_dist": {"kind": "uniform", "a": 0.0, "b": 1.0}, "max_jumps": 4
        });
        let list = errors(v);
        assert_eq!(list.len(), 1);
        assert!(list[0].starts_with("process.rate:"), "{list:?}");
    }

    #[test]
    fn missing_test_function_names_field() {
        let mut v = base();
        v["experiment"] = serde_json::json!({"kind": "change_of_variables", "samples": 10});
        let list = errors(v);
        assert_eq!(list, vec!["experiment.test_function: required for change_of_variables".to_string()]);
    }

    #[test]
    fn fields_foreign_to_the_kind_are_errors() {
        let mut v = base();
        v["experiment"]["scales"] = serde_json::json!([1.0, 0.5]);
        let list = errors(v);
        assert_eq!(list, vec!["experiment.scales: not used by degree".to_string()]);
    }

    #[test]
    fn too_many_fixed_jumps_for_basis() {
        let mut v = base();
        v["basis"]["dimension"] = 1.into();
        v["process"]["events"] = serde_json::json!([{"time": 0.2, "size": 0.5}, {"time": 0.4, "size": 0.1}]);
        let list = errors(v);
        assert!(list[0].starts_with("basis.dimension:"), "{list:?}");
    }

    #[test]
    fn empty_document_lists_required_fields() {
        let list = errors(serde_json::json!({}));
        for field in ["seed", "horizon", "basis", "process", "experiment"] {
            assert!(list.contains(&format!("{field}: required")), "{field} missing from {list:?}");
        }
    }

    #[test]
    fn config_round_trips() {
        let cfg: ExperimentConfig = serde_json::from_value(base()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
