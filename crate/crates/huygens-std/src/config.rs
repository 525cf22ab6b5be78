//! Run configuration: a TOML file layered under command-line flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use huygens_core::dynamics::{ModelKind, ModelParams};
use huygens_core::params::{
    to_dimensionless, to_poincare, to_two_mass_poincare, DimensionlessParams, PhysicalParams, PoincareParams,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::figures::FigureId;

/// Output directory used when neither a flag, the config file nor
/// `HUYGENS_OUT` names one.
pub const DEFAULT_OUTPUT_DIR: &str = "huygens-out";
pub const OUTPUT_ENV: &str = "HUYGENS_OUT";

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 2.0 * PI / 200.0;

/// SI description where the escapement may be given either as `e` (N m s)
/// or directly as the dimensionless `epsilon = e / (m g l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalInput {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub l: f64,
    pub g: f64,
    pub c: f64,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub gamma: f64,
    #[serde(default = "two")]
    pub n: usize,
}

fn two() -> usize {
    2
}

impl PhysicalInput {
    pub fn physical(&self) -> CliResult<PhysicalParams> {
        let e = match (self.e, self.epsilon) {
            (Some(e), None) => e,
            (None, Some(eps)) => eps * self.m * self.g * self.l,
            (Some(_), Some(_)) => {
                return Err(CliError::config("give either e or epsilon in the physical layer, not both"))
            }
            (None, None) => return Err(CliError::config("physical layer needs e or epsilon")),
        };
        Ok(PhysicalParams {
            m: self.m,
            big_m: self.big_m,
            l: self.l,
            g: self.g,
            c: self.c,
            k: self.k,
            e,
            gamma: self.gamma,
            n: self.n,
        })
    }
}

/// Parameters in any of the three layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "kebab-case")]
pub enum ParamSet {
    Physical(PhysicalInput),
    Dimensionless(DimensionlessParams),
    Poincare(PoincareParams),
}

impl ParamSet {
    pub fn layer(&self) -> &'static str {
        match self {
            ParamSet::Physical(_) => "physical",
            ParamSet::Dimensionless(_) => "dimensionless",
            ParamSet::Poincare(_) => "poincare",
        }
    }

    /// Pendulum count implied by the layer, if it carries one.
    pub fn pendulums(&self) -> Option<usize> {
        match self {
            ParamSet::Physical(p) => Some(p.n),
            ParamSet::Dimensionless(d) => Some(d.n),
            ParamSet::Poincare(_) => None,
        }
    }

    /// Converts to the layer `model` consumes.
    pub fn resolve(&self, model: ModelKind, n: usize) -> CliResult<ModelParams> {
        if model.is_mu_form() {
            let p = match self {
                ParamSet::Poincare(p) => *p,
                ParamSet::Dimensionless(d) => to_poincare(d)?,
                ParamSet::Physical(p) if model == ModelKind::TwoMass => to_two_mass_poincare(&p.physical()?)?,
                ParamSet::Physical(p) => to_poincare(&to_dimensionless(&p.physical()?)?)?,
            };
            Ok(ModelParams::Poincare(p))
        } else {
            let d = match self {
                ParamSet::Dimensionless(d) => *d,
                ParamSet::Physical(p) => to_dimensionless(&p.physical()?)?,
                ParamSet::Poincare(p) => p.to_dimensionless(n),
            };
            Ok(ModelParams::Dimensionless(d))
        }
    }

    /// Small-parameter form, for prediction and sweeps.
    pub fn poincare(&self, model: ModelKind) -> CliResult<PoincareParams> {
        match self.resolve(model, 2)? {
            ModelParams::Poincare(p) => Ok(p),
            ModelParams::Dimensionless(d) => Ok(to_poincare(&d)?),
        }
    }
}

/// Parameter values given as individual flags.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub mu: Option<f64>,
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub omega2: Option<f64>,
    pub epsilon: Option<f64>,
}

impl ParamOverrides {
    fn is_empty(&self) -> bool {
        *self == ParamOverrides::default()
    }

    fn named(&self) -> [(&'static str, Option<f64>); 9] {
        [
            ("mu", self.mu),
            ("a", self.a),
            ("sigma", self.sigma),
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("omega2", self.omega2),
            ("epsilon", self.epsilon),
        ]
    }

    fn reject(&self, layer: &str, allowed: &[&str]) -> CliResult<()> {
        for (name, v) in self.named() {
            if v.is_some() && !allowed.contains(&name) {
                return Err(CliError::config(format!("--{name} does not apply to the {layer} parameter layer")));
            }
        }
        Ok(())
    }

    /// Applies the flags on top of `base`, or builds a parameter set from
    /// the flags alone when there is no base.
    pub fn apply(&self, base: Option<ParamSet>, model: ModelKind, n: usize) -> CliResult<Option<ParamSet>> {
        let need =
            |name: &str, v: Option<f64>| v.ok_or_else(|| CliError::config(format!("missing parameter --{name}")));
        match base {
            None if self.is_empty() => Ok(None),
            None if model.is_mu_form() => {
                self.reject("poincare", &["mu", "a", "sigma", "omega", "gamma", "kappa"])?;
                Ok(Some(ParamSet::Poincare(PoincareParams {
                    mu: need("mu", self.mu)?,
                    a: need("a", self.a)?,
                    sigma: need("sigma", self.sigma)?,
                    omega: self.omega.unwrap_or(0.0),
                    gamma: need("gamma", self.gamma)?,
                    kappa: self.kappa,
                })))
            }
            None => {
                self.reject("dimensionless", &["sigma", "omega2", "beta", "gamma", "epsilon"])?;
                Ok(Some(ParamSet::Dimensionless(DimensionlessParams {
                    sigma: need("sigma", self.sigma)?,
                    omega2: self.omega2.unwrap_or(0.0),
                    beta: need("beta", self.beta)?,
                    gamma: need("gamma", self.gamma)?,
                    epsilon: need("epsilon", self.epsilon)?,
                    n,
                })))
            }
            Some(ParamSet::Poincare(mut p)) => {
                self.reject("poincare", &["mu", "a", "sigma", "omega", "gamma", "kappa"])?;
                p.mu = self.mu.unwrap_or(p.mu);
                p.a = self.a.unwrap_or(p.a);
                p.sigma = self.sigma.unwrap_or(p.sigma);
                p.omega = self.omega.unwrap_or(p.omega);
                p.gamma = self.gamma.unwrap_or(p.gamma);
                p.kappa = self.kappa.or(p.kappa);
                Ok(Some(ParamSet::Poincare(p)))
            }
            Some(ParamSet::Dimensionless(mut d)) => {
                self.reject("dimensionless", &["sigma", "omega2", "beta", "gamma", "epsilon"])?;
                d.sigma = self.sigma.unwrap_or(d.sigma);
                d.omega2 = self.omega2.unwrap_or(d.omega2);
                d.beta = self.beta.unwrap_or(d.beta);
                d.gamma = self.gamma.unwrap_or(d.gamma);
                d.epsilon = self.epsilon.unwrap_or(d.epsilon);
                Ok(Some(ParamSet::Dimensionless(d)))
            }
            Some(ParamSet::Physical(mut p)) => {
                self.reject("physical", &["gamma", "epsilon"])?;
                p.gamma = self.gamma.unwrap_or(p.gamma);
                if let Some(eps) = self.epsilon {
                    p.epsilon = Some(eps);
                    p.e = None;
                }
                Ok(Some(ParamSet::Physical(p)))
            }
        }
    }
}

/// Contents of a `--config` file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub n: Option<usize>,
    pub params: Option<ParamSet>,
    /// Full initial state; overrides `theta1_0`/`theta2_0`.
    pub initial_conditions: Option<Vec<f64>>,
    pub theta1_0: Option<f64>,
    pub theta2_0: Option<f64>,
    /// Dimensionless end time.
    pub t_end: Option<f64>,
    /// End time in nominal cycles, `t_end = 2π cycles`.
    pub cycles: Option<f64>,
    pub tol: Option<f64>,
    pub sample_interval: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub grid: Option<String>,
    pub simulate: Option<bool>,
    pub workers: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    Predict,
    Analyze,
    Sweep,
    Reproduce,
}

/// Sweep axis and evenly spaced values `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axis: GridAxis,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridAxis {
    Sigma,
    A,
    Gamma,
    Omega,
    Mu,
    Kappa,
}

impl GridAxis {
    pub fn name(self) -> &'static str {
        match self {
            GridAxis::Sigma => "sigma",
            GridAxis::A => "a",
            GridAxis::Gamma => "gamma",
            GridAxis::Omega => "omega",
            GridAxis::Mu => "mu",
            GridAxis::Kappa => "kappa",
        }
    }

    pub fn set(self, p: &mut PoincareParams, v: f64) {
        match self {
            GridAxis::Sigma => p.sigma = v,
            GridAxis::A => p.a = v,
            GridAxis::Gamma => p.gamma = v,
            GridAxis::Omega => p.omega = v,
            GridAxis::Mu => p.mu = v,
            GridAxis::Kappa => p.kappa = Some(v),
        }
    }
}

impl Grid {
    /// Parses `axis:lo:hi:n`.
    pub fn parse(s: &str) -> CliResult<Grid> {
        let parts: Vec<&str> = s.split(':').collect();
        let [axis, lo, hi, count] = parts.as_slice() else {
            return Err(CliError::config(format!("grid must look like axis:lo:hi:n, got {s:?}")));
        };
        let axis = match *axis {
            "sigma" => GridAxis::Sigma,
            "a" => GridAxis::A,
            "gamma" => GridAxis::Gamma,
            "omega" => GridAxis::Omega,
            "mu" => GridAxis::Mu,
            "kappa" => GridAxis::Kappa,
            other => return Err(CliError::config(format!("unknown grid axis {other:?}"))),
        };
        let num = |t: &str| -> CliResult<f64> {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::config(format!("grid bound {t:?} is not a finite number")))
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(CliError::config("grid lower bound exceeds upper bound"));
        }
        let count =
            count.parse::<usize>().map_err(|_| CliError::config(format!("grid size {count:?} is not a count")))?;
        Ok(Grid { axis, lo, hi, count })
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Fully resolved, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelKind,
    /// As given, before conversion to the model's layer.
    pub param_set: Option<ParamSet>,
    /// Converted for `model`; absent for commands that need none.
    pub params: Option<ModelParams>,
    pub n: usize,
    pub initial_conditions: Vec<f64>,
    pub t_end: Option<f64>,
    pub tol: f64,
    pub sample_interval: f64,
    pub output_dir: PathBuf,
    pub figure_id: Option<FigureId>,
    pub grid: Option<Grid>,
    pub simulate: bool,
    pub workers: Option<usize>,
}

/// Values taken from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagValues {
    pub model: Option<ModelKind>,
    pub overrides: ParamOverrides,
    pub theta1_0: Option<f64>,
    pub theta2_0: Option<f64>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub figure: Option<FigureId>,
    pub grid: Option<String>,
    pub simulate: bool,
    pub workers: Option<usize>,
}

/// Output directory: flag, then config file, then `HUYGENS_OUT`, then the default.
pub fn output_dir(flag: Option<&Path>, file: Option<&Path>) -> PathBuf {
    flag.or(file)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

impl RunConfig {
    /// Merges `file` and `flags` and checks everything `command` needs.
    pub fn build(command: CommandKind, file: FileConfig, flags: FlagValues) -> CliResult<RunConfig> {
        if flags.figure.is_some() && command != CommandKind::Reproduce {
            return Err(CliError::config("--figure is only valid with reproduce"));
        }
        let model = match flags.model.or(file.model) {
            Some(m) => m,
            None if matches!(command, CommandKind::Predict | CommandKind::Sweep) => ModelKind::ThreeDof,
            None if matches!(command, CommandKind::Analyze | CommandKind::Reproduce) => ModelKind::Dimensionless,
            None => return Err(CliError::config("--model is required")),
        };
        let n = file.n.or(file.params.and_then(|p| p.pendulums())).unwrap_or(2);
        if n == 0 {
            return Err(CliError::config("pendulum count must be at least 1"));
        }
        let grid = match flags.grid.as_deref().or(file.grid.as_deref()) {
            Some(g) => Some(Grid::parse(g)?),
            None if command == CommandKind::Sweep => return Err(CliError::config("sweep needs --grid axis:lo:hi:n")),
            None => None,
        };
        if grid.is_some() && command != CommandKind::Sweep {
            return Err(CliError::config("--grid is only valid with sweep"));
        }
        let mut overrides = flags.overrides;
        if let (Some(g), None) = (&grid, &file.params) {
            let slot = match g.axis {
                GridAxis::Sigma => &mut overrides.sigma,
                GridAxis::A => &mut overrides.a,
                GridAxis::Gamma => &mut overrides.gamma,
                GridAxis::Omega => &mut overrides.omega,
                GridAxis::Mu => &mut overrides.mu,
                GridAxis::Kappa => &mut overrides.kappa,
            };
            slot.get_or_insert(g.lo);
        }
        let param_set = overrides.apply(file.params, model, n)?;
        if let Some(ps) = &param_set {
            if let Some(pn) = ps.pendulums() {
                if pn != n {
                    return Err(CliError::config(format!("n = {n} disagrees with the parameter layer (n = {pn})")));
                }
            }
        }
        let needs_params = matches!(command, CommandKind::Simulate | CommandKind::Predict | CommandKind::Sweep);
        if needs_params && param_set.is_none() {
            return Err(CliError::config("no parameters given (use --config or parameter flags)"));
        }
        let params = match (&param_set, needs_params) {
            (Some(ps), true) => Some(ps.resolve(model, n)?),
            _ => None,
        };
        if command == CommandKind::Predict && !model.is_mu_form() {
            return Err(CliError::config("predict needs a small-parameter model (small-sigma, three-dof or two-mass)"));
        }

        let dim = model.state_len(n);
        let initial_conditions = match &file.initial_conditions {
            Some(x) if flags.theta1_0.is_none() && flags.theta2_0.is_none() => {
                if x.len() != dim {
                    return Err(CliError::config(format!(
                        "initial_conditions has {} entries, model {} with n = {n} needs {dim}",
                        x.len(),
                        model.name()
                    )));
                }
                x.clone()
            }
            _ => {
                let mut x = vec![0.0; dim];
                x[0] = flags.theta1_0.or(file.theta1_0).unwrap_or(0.0);
                let t2 = flags.theta2_0.or(file.theta2_0).unwrap_or(0.0);
                if n >= 2 {
                    x[2] = t2;
                } else if t2 != 0.0 {
                    return Err(CliError::config("--theta2-0 needs at least two pendulums"));
                }
                x
            }
        };
        if initial_conditions.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("initial conditions must be finite"));
        }

        let t_end = match (flags.t_end, file.t_end, file.cycles) {
            (Some(t), _, _) | (None, Some(t), _) => Some(t),
            (None, None, Some(c)) => Some(2.0 * PI * c),
            _ => None,
        };
        if let Some(t) = t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config("t_end must be positive and finite"));
            }
        } else if command == CommandKind::Simulate {
            return Err(CliError::config("simulate needs --t-end (or t_end / cycles in the config file)"));
        }
        let tol = flags.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::config("tol must lie in (0, 1)"));
        }
        let sample_interval = file.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL);
        if !(sample_interval > 0.0 && sample_interval.is_finite()) {
            return Err(CliError::config("sample_interval must be positive"));
        }

        let workers = flags.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::config("--workers must be at least 1"));
        }
        if command == CommandKind::Reproduce && flags.figure.is_none() {
            return Err(CliError::config("reproduce needs --figure"));
        }

        Ok(RunConfig {
            command,
            model,
            param_set,
            params,
            n,
            initial_conditions,
            t_end,
            tol,
            sample_interval,
            output_dir: output_dir(flags.out.as_deref(), file.output_dir.as_deref()),
            figure_id: flags.figure,
            grid,
            simulate: flags.simulate || file.simulate.unwrap_or(false),
            workers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = Grid::parse("sigma:0:1:5").unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(Grid::parse("sigma:0:1:0").unwrap().values().is_empty());
        assert!(Grid::parse("zeta:0:1:3").is_err());
        assert!(Grid::parse("sigma:1:0:3").is_err());
        assert!(Grid::parse("sigma:0:1").is_err());
    }

    proptest::proptest! {
        #[test]
        fn grid_values_span_the_interval(lo in -5.0..5.0f64, width in 0.0..10.0f64, n in 2usize..200) {
            let hi = lo + width;
            let g = Grid::parse(&format!("a:{lo}:{hi}:{n}")).unwrap();
            let v = g.values();
            proptest::prop_assert_eq!(v.len(), n);
            proptest::prop_assert_eq!(v[0], lo);
            proptest::prop_assert!((v[n - 1] - hi).abs() <= 1e-12 * (1.0 + hi.abs()));
            proptest::prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn flags_build_a_layer() {
        let flags = FlagValues {
            model: Some(ModelKind::ThreeDof),
            overrides: ParamOverrides {
                mu: Some(0.01),
                a: Some(5.0),
                sigma: Some(0.1),
                gamma: Some(0.5),
                ..Default::default()
            },
            t_end: Some(10.0),
            ..Default::default()
        };
        let cfg = RunConfig::build(CommandKind::Simulate, FileConfig::default(), flags).unwrap();
        assert_eq!(cfg.initial_conditions, vec![0.0; 6]);
        match cfg.params {
            Some(ModelParams::Poincare(p)) => assert_eq!((p.mu, p.omega), (0.01, 0.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_axis_supplies_its_own_base_value() {
        let flags = FlagValues {
            overrides: ParamOverrides { mu: Some(0.01), a: Some(2.0), gamma: Some(0.5), ..Default::default() },
            grid: Some("sigma:0.05:0.4:8".into()),
            ..Default::default()
        };
        let cfg = RunConfig::build(CommandKind::Sweep, FileConfig::default(), flags).unwrap();
        match cfg.params {
            Some(ModelParams::Poincare(p)) => assert_eq!(p.sigma, 0.05),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misplaced_flags_are_config_errors() {
        let flags = FlagValues {
            model: Some(ModelKind::ThreeDof),
            overrides: ParamOverrides { beta: Some(0.01), ..Default::default() },
            t_end: Some(10.0),
            ..Default::default()
        };
        let err = RunConfig::build(CommandKind::Simulate, FileConfig::default(), flags).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let flags = FlagValues { figure: Some(FigureId::Fig3), ..Default::default() };
        assert!(RunConfig::build(CommandKind::Predict, FileConfig::default(), flags).is_err());
    }

    #[test]
    fn physical_layer_converts_per_model() {
        let file: FileConfig = toml::from_str(
            r#"
            model = "dimensionless"
            cycles = 10
            [params]
            layer = "physical"
            m = 0.158
            M = 11.856
            l = 0.269
            g = 9.81
            c = 11.856
            k = 1.186
            epsilon = 5.047
            gamma = 0.122
            "#,
        )
        .unwrap();
        let cfg = RunConfig::build(CommandKind::Simulate, file, FlagValues::default()).unwrap();
        match cfg.params {
            Some(ModelParams::Dimensionless(d)) => {
                assert!((d.beta - 0.012980).abs() < 1e-6);
                assert!((d.epsilon - 5.047).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!((cfg.t_end.unwrap() - 20.0 * PI).abs() < 1e-12);
    }
}
