//! Benchmark runs: dataset source, algorithm choice, initial point and CSV output.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::baselines::{acr_run, agd_run, cr_run, lbfgs_run, sgd_run, FirstOrderConfig};
use crate::data::{parse_libsvm, synth_logistic, LibsvmOptions, SynthSpec};
use crate::error::{Error, Result};
use crate::problem::{Dataset, LossFamily, LossModel, RidgeForm};
use crate::saarc::{saarc_run, sacr_run};
use crate::sarc::{sarc_run, RunResult, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sarc,
    Saarc,
    Sacr,
    Cr,
    Acr,
    Agd,
    Sgd,
    Lbfgs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Self::Sarc,
        Self::Saarc,
        Self::Sacr,
        Self::Cr,
        Self::Acr,
        Self::Agd,
        Self::Sgd,
        Self::Lbfgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sarc => "sarc",
            Self::Saarc => "saarc",
            Self::Sacr => "sacr",
            Self::Cr => "cr",
            Self::Acr => "acr",
            Self::Agd => "agd",
            Self::Sgd => "sgd",
            Self::Lbfgs => "lbfgs",
        }
    }

    pub fn is_first_order(self) -> bool {
        matches!(self, Self::Agd | Self::Sgd | Self::Lbfgs)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm { path: PathBuf, options: LibsvmOptions },
    Synthetic(SynthSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            Self::Libsvm { path, options } => parse_libsvm(path, options),
            Self::Synthetic(spec) => synth_logistic(spec),
        }
    }
}

/// Parses `n,d,seed,skew` (skew optional, default 1).
pub fn parse_synth_spec(text: &str) -> Result<SynthSpec> {
    let bad = || Error::InvalidConfig(format!("expected n,d,seed[,skew], got `{text}`"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(bad());
    }
    let n = parts[0].parse().map_err(|_| bad())?;
    let d = parts[1].parse().map_err(|_| bad())?;
    let seed = parts[2].parse().map_err(|_| bad())?;
    let skew = match parts.get(3) {
        Some(s) => s.parse().map_err(|_| bad())?,
        None => 1.0,
    };
    Ok(SynthSpec::new(n, d, seed, skew))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub data: DataSource,
    pub loss: LossFamily,
    pub lambda: f64,
    pub ridge: RidgeForm,
    pub solver: SolverConfig,
    pub first_order: FirstOrderConfig,
    /// Standard deviation of the zero-mean Gaussian initial point.
    pub x0_std: f64,
    /// Seeds the initial point and every sampler in the run.
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm, data: DataSource) -> Self {
        Self {
            algorithm,
            data,
            loss: LossFamily::RegLogistic,
            lambda: 1e-5,
            ridge: RidgeForm::Half,
            solver: SolverConfig::default(),
            first_order: FirstOrderConfig::default(),
            x0_std: 5000.0,
            seed: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.x0_std >= 0.0 && self.x0_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("x0 std must be >= 0, got {}", self.x0_std)));
        }
        self.solver.validate()
    }

    pub fn build_model(&self) -> Result<LossModel> {
        let data = Arc::new(self.data.load()?);
        Ok(LossModel::new(self.loss, data, self.lambda)?.with_ridge_form(self.ridge))
    }
}

/// Zero-mean Gaussian point with the given standard deviation.
pub fn initial_point(d: usize, std: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..d).map(|_| normal.sample(&mut rng)).collect())
}

/// Runs one algorithm on an already built model.
pub fn run_algorithm(spec: &RunSpec, model: &LossModel, x0: &[f64]) -> Result<RunResult> {
    run_configured(spec.algorithm, &spec.solver, &spec.first_order, spec.seed, model, x0)
}

/// Runs `algorithm` with both configurations reseeded by `seed`.
pub fn run_configured(
    algorithm: Algorithm,
    solver: &SolverConfig,
    first_order: &FirstOrderConfig,
    seed: u64,
    model: &LossModel,
    x0: &[f64],
) -> Result<RunResult> {
    let solver = SolverConfig {
        seed,
        ..solver.clone()
    };
    let first_order = FirstOrderConfig {
        seed,
        ..first_order.clone()
    };
    match algorithm {
        Algorithm::Sarc => sarc_run(model, &solver, x0),
        Algorithm::Saarc => saarc_run(model, &solver, x0),
        Algorithm::Sacr => sacr_run(model, &solver, x0),
        Algorithm::Cr => cr_run(model, &solver, x0),
        Algorithm::Acr => acr_run(model, &solver, x0),
        Algorithm::Agd => agd_run(model, &first_order, x0),
        Algorithm::Sgd => sgd_run(model, &first_order, x0),
        Algorithm::Lbfgs => lbfgs_run(model, &first_order, x0),
    }
}

/// Loads data, draws `x₀`, runs, and writes the trace when an output path is set.
pub fn run_benchmark(spec: &RunSpec) -> Result<RunResult> {
    spec.validate()?;
    let model = spec.build_model()?;
    let x0 = initial_point(model.d(), spec.x0_std, spec.seed)?;
    let result = run_algorithm(spec, &model, &x0)?;
    if let Some(path) = &spec.output {
        write_trace(&result, path)?;
    }
    Ok(result)
}

pub fn write_trace(result: &RunResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let out = BufWriter::new(File::create(path)?);
    result.trace.write_csv(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("newton".parse::<Algorithm>(), Err(Error::UnknownAlgorithm(_))));
    }

    #[test]
    fn synth_spec_parsing() {
        let s = parse_synth_spec("1000, 20,7,100").unwrap();
        assert_eq!((s.n, s.d, s.seed, s.skew), (1000, 20, 7, 100.0));
        assert_eq!(parse_synth_spec("5,2,1").unwrap().skew, 1.0);
        assert!(parse_synth_spec("5,2").is_err());
        assert!(parse_synth_spec("5,x,1").is_err());
    }

    #[test]
    fn initial_point_is_seeded() {
        let a = initial_point(5, 3.0, 9).unwrap();
        assert_eq!(a, initial_point(5, 3.0, 9).unwrap());
        assert_ne!(a, initial_point(5, 3.0, 10).unwrap());
        assert_eq!(initial_point(3, 0.0, 1).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn negative_lambda_rejected() {
        let mut spec = RunSpec::new(Algorithm::Cr, DataSource::Synthetic(SynthSpec::new(10, 2, 0, 1.0)));
        spec.lambda = -1.0;
        assert!(run_benchmark(&spec).is_err());
    }
}
