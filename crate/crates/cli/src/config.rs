//! Experiment configuration: a JSON file whose fields override the preset of
//! the chosen benchmark and scale.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use opinf_core::fom::{Burgers, ChafeeInfante, ReactionDiffusion2d, TOY_STATE_DIM, TOY_STEPS};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Toy,
    Burgers,
    Chafee,
    Reaction2d,
    Custom,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Toy => "toy",
            Benchmark::Burgers => "burgers",
            Benchmark::Chafee => "chafee",
            Benchmark::Reaction2d => "reaction2d",
            Benchmark::Custom => "custom",
        }
    }

    /// Closed parameter interval, if the benchmark is parametric.
    pub fn parameter_domain(self) -> Option<(f64, f64)> {
        match self {
            Benchmark::Burgers => Some(Burgers::PARAM_RANGE),
            Benchmark::Reaction2d => Some(ReactionDiffusion2d::PARAM_RANGE),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

/// Parameter values: `m` equidistant points over the benchmark domain
/// (endpoints included) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterGrid {
    None,
    Equidistant(usize),
    Values(Vec<f64>),
}

impl ParameterGrid {
    pub fn resolve(&self, domain: Option<(f64, f64)>) -> Vec<f64> {
        match (self, domain) {
            (ParameterGrid::None, _) | (_, None) => Vec::new(),
            (ParameterGrid::Values(v), _) => v.clone(),
            (ParameterGrid::Equidistant(m), Some((low, high))) => match m {
                0 => Vec::new(),
                1 => vec![low],
                _ => (0..*m)
                    .map(|i| {
                        let t = i as f64 / (*m - 1) as f64;
                        (1.0 - t) * low + t * high
                    })
                    .collect(),
            },
        }
    }
}

/// Input used for the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestInput {
    Constant(f64),
    /// Uniform random in `input_range`, one trajectory per test parameter.
    Random,
    /// `25 (sin(pi t) + 1)` with `t = k dt`.
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyOptions {
    /// Seed of the random system matrix.
    pub system_seed: u64,
    /// Reduced dimension used for the per-step closure error and norms.
    pub reference_dim: usize,
    /// Reduced dimensions for the difference and conditioning sweeps.
    pub dims: Vec<usize>,
    /// Trajectory lengths for the conditioning sweep.
    pub condition_steps: Vec<usize>,
}

impl Default for ToyOptions {
    fn default() -> Self {
        Self {
            system_seed: 0,
            reference_dim: 2,
            dims: vec![2, 4, 6],
            condition_steps: vec![10, 25, 50, 100, 250, 500, 1000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomOptions {
    pub input_dim: usize,
    pub degree: usize,
    pub linear_norm: f64,
    pub nonlinear_norm: f64,
    pub density: f64,
    pub system_seed: u64,
}

impl Default for CustomOptions {
    fn default() -> Self {
        Self {
            input_dim: 1,
            degree: 2,
            linear_norm: 0.9,
            nonlinear_norm: 0.3,
            density: 1.0,
            system_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub benchmark: Benchmark,
    pub scale: Scale,
    /// Full-order dimension `N` (a perfect square for `reaction2d`).
    pub state_dim: usize,
    /// Time steps `K` of every training trajectory.
    pub steps: usize,
    pub dt: f64,
    pub parameters: ParameterGrid,
    pub test_parameters: ParameterGrid,
    /// Input trajectories per parameter used for learning (`m'`).
    pub inputs_per_parameter: usize,
    /// Separate full-length input trajectories per parameter for the POD
    /// basis; `None` reuses the learning inputs.
    pub basis_inputs_per_parameter: Option<usize>,
    pub input_range: [f64; 2],
    pub test_input: TestInput,
    /// Re-projection dimensions `nbar`.
    pub nbar: Vec<usize>,
    /// Reduced dimensions to evaluate; `None` means `1..=nbar`.
    pub dims: Option<Vec<usize>>,
    /// Re-projection steps per learning trajectory; `None` means `steps`.
    pub horizon: Option<usize>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Fail with exit code 3 if any recovery certificate is not satisfied.
    pub require_exact_recovery: bool,
    /// Write learned model bundles next to the CSV files.
    pub write_models: bool,
    pub reaction_degree: usize,
    pub diffusivity: f64,
    pub toy: ToyOptions,
    pub custom: CustomOptions,
}

impl ExperimentConfig {
    pub fn preset(benchmark: Benchmark, scale: Scale) -> Self {
        let mut c = Self {
            schema_version: SCHEMA_VERSION,
            benchmark,
            scale,
            state_dim: TOY_STATE_DIM,
            steps: TOY_STEPS,
            dt: 1.0,
            parameters: ParameterGrid::None,
            test_parameters: ParameterGrid::None,
            inputs_per_parameter: 1,
            basis_inputs_per_parameter: None,
            input_range: [0.0, 1.0],
            test_input: TestInput::Random,
            nbar: vec![2],
            dims: None,
            horizon: None,
            seed: 0,
            output_dir: None,
            require_exact_recovery: false,
            write_models: false,
            reaction_degree: 3,
            diffusivity: ReactionDiffusion2d::DIFFUSIVITY,
            toy: ToyOptions::default(),
            custom: CustomOptions::default(),
        };
        match benchmark {
            Benchmark::Toy => {
                c.inputs_per_parameter = 0;
            }
            Benchmark::Burgers => {
                c.state_dim = Burgers::STATE_DIM;
                c.steps = Burgers::STEPS;
                c.dt = Burgers::DT;
                c.parameters = ParameterGrid::Equidistant(10);
                c.test_parameters = ParameterGrid::Equidistant(7);
                c.inputs_per_parameter = 5;
                c.input_range = [Burgers::INPUT_RANGE.0, Burgers::INPUT_RANGE.1];
                c.test_input = TestInput::Constant(1.0);
                c.nbar = match scale {
                    Scale::Desk => vec![10],
                    Scale::Paper => vec![10, 15],
                };
            }
            Benchmark::Chafee => {
                c.state_dim = ChafeeInfante::STATE_DIM;
                c.steps = match scale {
                    Scale::Desk => 40_000,
                    Scale::Paper => ChafeeInfante::STEPS,
                };
                c.dt = ChafeeInfante::DT;
                c.inputs_per_parameter = 25;
                c.input_range = [ChafeeInfante::INPUT_RANGE.0, ChafeeInfante::INPUT_RANGE.1];
                c.test_input = TestInput::Sine;
                c.nbar = match scale {
                    Scale::Desk => vec![6],
                    Scale::Paper => vec![6, 12],
                };
            }
            Benchmark::Reaction2d => {
                let g = match scale {
                    Scale::Desk => 32,
                    Scale::Paper => ReactionDiffusion2d::POINTS_PER_DIM,
                };
                c.state_dim = g * g;
                c.steps = ReactionDiffusion2d::STEPS;
                c.dt = ReactionDiffusion2d::DT;
                c.parameters = ParameterGrid::Equidistant(10);
                c.test_parameters = ParameterGrid::Equidistant(7);
                c.inputs_per_parameter = 10;
                c.basis_inputs_per_parameter = Some(1);
                c.input_range = [
                    ReactionDiffusion2d::INPUT_RANGE.0,
                    ReactionDiffusion2d::INPUT_RANGE.1,
                ];
                c.test_input = TestInput::Random;
                c.nbar = vec![10];
                // t = 5
                c.horizon = Some(500);
            }
            Benchmark::Custom => {
                c.state_dim = 12;
                c.steps = 200;
                c.inputs_per_parameter = 3;
                c.nbar = vec![3];
                c.write_models = true;
            }
        }
        c
    }

    /// Preset for `benchmark` and `scale`, overridden by the fields of `file`.
    pub fn from_json(
        file: Option<&Value>,
        benchmark: Option<Benchmark>,
        scale: Option<Scale>,
    ) -> CliResult<Self> {
        let file_benchmark = match file.and_then(|v| v.get("benchmark")) {
            Some(v) => Some(
                serde_json::from_value::<Benchmark>(v.clone())
                    .map_err(|e| CliError::Config(format!("benchmark: {e}")))?,
            ),
            None => None,
        };
        let benchmark = match (benchmark, file_benchmark) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!(
                    "command is for {} but the config file is for {}",
                    a.as_str(),
                    b.as_str()
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(CliError::Config(
                    "the config file must name a benchmark".into(),
                ))
            }
        };
        let file_scale = match file.and_then(|v| v.get("scale")) {
            Some(v) => Some(
                serde_json::from_value::<Scale>(v.clone())
                    .map_err(|e| CliError::Config(format!("scale: {e}")))?,
            ),
            None => None,
        };
        let scale = scale.or(file_scale).unwrap_or(Scale::Desk);
        let mut merged = serde_json::to_value(Self::preset(benchmark, scale))
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(file) = file {
            if !file.is_object() {
                return Err(CliError::Config("config must be a JSON object".into()));
            }
            merge(&mut merged, file);
        }
        merged["benchmark"] = serde_json::to_value(benchmark).expect("enum serializes");
        merged["scale"] = serde_json::to_value(scale).expect("enum serializes");
        let config: Self =
            serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(
        path: Option<&Path>,
        benchmark: Option<Benchmark>,
        scale: Option<Scale>,
    ) -> CliResult<Self> {
        let value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Some(
                    serde_json::from_str::<Value>(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                )
            }
            None => None,
        };
        Self::from_json(value.as_ref(), benchmark, scale)
    }

    pub fn validate(&self) -> CliResult<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.state_dim == 0 || self.steps == 0 {
            return fail("state_dim and steps must be positive".into());
        }
        if !(self.dt > 0.0) {
            return fail("dt must be positive".into());
        }
        if self.benchmark == Benchmark::Reaction2d {
            let g = (self.state_dim as f64).sqrt().round() as usize;
            if g * g != self.state_dim || g < 2 {
                return fail("reaction2d state_dim must be a square of at least 4".into());
            }
        }
        if self.nbar.is_empty() || self.nbar.contains(&0) {
            return fail("nbar must list positive dimensions".into());
        }
        if self.nbar.iter().any(|&n| n > self.state_dim) {
            return fail("nbar cannot exceed state_dim".into());
        }
        if let Some(dims) = &self.dims {
            let max = *self.nbar.iter().max().expect("nonempty");
            if dims.is_empty() || dims.iter().any(|&n| n == 0 || n > max) {
                return fail("dims must be positive and at most the largest nbar".into());
            }
        }
        if self.horizon == Some(0) {
            return fail("horizon must be positive".into());
        }
        let [low, high] = self.input_range;
        if !(low < high) {
            return fail("input_range must satisfy low < high".into());
        }
        if let Some(domain) = self.benchmark.parameter_domain() {
            for (name, grid) in [
                ("parameters", &self.parameters),
                ("test_parameters", &self.test_parameters),
            ] {
                let values = grid.resolve(Some(domain));
                if values.iter().any(|v| !(domain.0..=domain.1).contains(v)) {
                    return fail(format!("{name} must lie in [{}, {}]", domain.0, domain.1));
                }
            }
            let train = self.parameters.resolve(Some(domain));
            if train.is_empty() {
                return fail("parametric benchmarks need training parameters".into());
            }
            if train.windows(2).any(|w| !(w[0] < w[1])) {
                return fail("parameters must be strictly increasing".into());
            }
            if train.len() < 2 && !self.test_parameters.resolve(Some(domain)).is_empty() {
                return fail("interpolating test models needs at least 2 parameters".into());
            }
        }
        if self.benchmark != Benchmark::Toy && self.inputs_per_parameter == 0 {
            return fail("inputs_per_parameter must be positive".into());
        }
        if self.basis_inputs_per_parameter == Some(0) {
            return fail("basis_inputs_per_parameter must be positive".into());
        }
        if self.benchmark == Benchmark::Toy {
            let t = &self.toy;
            if t.reference_dim == 0 || t.reference_dim > self.state_dim {
                return fail("toy.reference_dim must be in 1..=state_dim".into());
            }
            if t.dims.iter().any(|&n| n == 0 || n > self.state_dim) {
                return fail("toy.dims must be in 1..=state_dim".into());
            }
            if t.condition_steps.contains(&0) {
                return fail("toy.condition_steps must be positive".into());
            }
        }
        if !(2..=3).contains(&self.reaction_degree) {
            return fail("reaction_degree must be 2 or 3".into());
        }
        if self.custom.degree == 0 {
            return fail("custom.degree must be positive".into());
        }
        Ok(())
    }

    /// Dimensions evaluated for re-projection dimension `nbar`.
    pub fn dims_for(&self, nbar: usize) -> Vec<usize> {
        match &self.dims {
            Some(d) => d.iter().copied().filter(|&n| n <= nbar).collect(),
            None => (1..=nbar).collect(),
        }
    }

    pub fn training_parameters(&self) -> Vec<f64> {
        self.parameters.resolve(self.benchmark.parameter_domain())
    }

    pub fn test_parameter_values(&self) -> Vec<f64> {
        self.test_parameters
            .resolve(self.benchmark.parameter_domain())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(self.benchmark.as_str()))
    }
}

/// Top-level fields replace the preset; the nested option structs are merged
/// field by field.
fn merge(base: &mut Value, overlay: &Value) {
    let (Value::Object(b), Value::Object(o)) = (base, overlay) else {
        return;
    };
    for (key, value) in o {
        match b.get_mut(key) {
            Some(Value::Object(slot)) if NESTED.contains(&key.as_str()) && value.is_object() => {
                for (k, v) in value.as_object().expect("checked") {
                    slot.insert(k.clone(), v.clone());
                }
            }
            _ => {
                b.insert(key.clone(), value.clone());
            }
        }
    }
}

const NESTED: [&str; 2] = ["toy", "custom"];

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn toy_preset_matches_reference_setup() {
        let c = ExperimentConfig::preset(Benchmark::Toy, Scale::Desk);
        assert_eq!((c.state_dim, c.steps, c.toy.reference_dim), (10, 100, 2));
        c.validate().unwrap();
    }

    #[test]
    fn benchmark_presets_validate() {
        for b in [
            Benchmark::Burgers,
            Benchmark::Chafee,
            Benchmark::Reaction2d,
            Benchmark::Custom,
        ] {
            for s in [Scale::Desk, Scale::Paper] {
                ExperimentConfig::preset(b, s).validate().unwrap();
            }
        }
        let b = ExperimentConfig::preset(Benchmark::Burgers, Scale::Paper);
        assert_eq!((b.steps, b.inputs_per_parameter), (10_000, 5));
        assert_eq!(b.nbar, vec![10, 15]);
        assert_eq!(b.training_parameters().len(), 10);
        let c = ExperimentConfig::preset(Benchmark::Chafee, Scale::Desk);
        assert_eq!((c.steps, c.inputs_per_parameter), (40_000, 25));
        let r = ExperimentConfig::preset(Benchmark::Reaction2d, Scale::Desk);
        assert_eq!(r.state_dim, 1024);
        assert_eq!(r.input_range, [1.0, 1000.0]);
    }

    #[test]
    fn equidistant_grid_includes_endpoints() {
        let v = ParameterGrid::Equidistant(10).resolve(Some((0.1, 1.0)));
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[9], 1.0);
    }

    #[test]
    fn file_overrides_preset() {
        let file = json!({"benchmark": "burgers", "steps": 500, "nbar": [4], "seed": 9});
        let c = ExperimentConfig::from_json(Some(&file), None, None).unwrap();
        assert_eq!((c.steps, c.seed, c.nbar.clone()), (500, 9, vec![4]));
        assert_eq!(c.inputs_per_parameter, 5);
        let toy = json!({"toy": {"dims": [2, 3]}});
        let c = ExperimentConfig::from_json(Some(&toy), Some(Benchmark::Toy), None).unwrap();
        assert_eq!(c.toy.dims, vec![2, 3]);
        assert_eq!(c.toy.reference_dim, 2);
        let grid = json!({"benchmark": "burgers", "parameters": {"values": [0.1, 0.5]}});
        let c = ExperimentConfig::from_json(Some(&grid), None, None).unwrap();
        assert_eq!(c.training_parameters(), vec![0.1, 0.5]);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            json!({"benchmark": "burgers", "unknown": 1}),
            json!({"benchmark": "burgers", "parameters": {"values": [5.0]}}),
            json!({"benchmark": "burgers", "dims": [11]}),
            json!({"benchmark": "burgers", "schema_version": 7}),
            json!({"benchmark": "reaction2d", "state_dim": 1000}),
            json!({"benchmark": "nope"}),
            json!({"steps": 3}),
        ];
        for case in cases {
            let err = ExperimentConfig::from_json(Some(&case), None, None).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{case}");
        }
        let mismatch = json!({"benchmark": "chafee"});
        assert!(
            ExperimentConfig::from_json(Some(&mismatch), Some(Benchmark::Burgers), None).is_err()
        );
    }
}
