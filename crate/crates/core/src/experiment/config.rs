use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::LadderConfig;
use crate::apg::ApgConfig;
use crate::data::Family;
use crate::error::{Error, Result};

/// Names accepted by [`preset`].
pub const PRESETS: &[&str] = &["lrp-desk", "lsrp-desk", "lrp-full", "lsrp-full"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    PbApg,
    ApbApg,
    PbApgSc,
    ApbApgSc,
    Subgrad,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::PbApg,
        SolverKind::ApbApg,
        SolverKind::PbApgSc,
        SolverKind::ApbApgSc,
        SolverKind::Subgrad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::PbApg => "pb_apg",
            SolverKind::ApbApg => "apb_apg",
            SolverKind::PbApgSc => "pb_apg_sc",
            SolverKind::ApbApgSc => "apb_apg_sc",
            SolverKind::Subgrad => "subgrad",
        }
    }

    pub fn is_ladder(self) -> bool {
        matches!(self, SolverKind::ApbApg | SolverKind::ApbApgSc)
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("solvers", format!("unknown solver `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Synthetic {
        family: Family,
        rows: usize,
        cols: usize,
        seed: u64,
    },
    /// A local LIBSVM file. Labels are coerced to ±1 for `lrp`.
    Libsvm {
        family: Family,
        path: PathBuf,
        #[serde(default)]
        n_features: Option<usize>,
        /// Keep only the first rows of the file.
        #[serde(default)]
        max_rows: Option<usize>,
        #[serde(default)]
        minmax: bool,
        #[serde(default)]
        collinear_copies: usize,
        #[serde(default)]
        intercept: bool,
    },
}

impl ProblemConfig {
    pub fn family(&self) -> Family {
        match self {
            ProblemConfig::Synthetic { family, .. } | ProblemConfig::Libsvm { family, .. } => *family,
        }
    }
}

/// Penalty source: an explicit `gamma`, or the planned value from
/// `(epsilon, beta)` and the instance's error-bound constants. The plan is
/// always built since certificates need its targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(default)]
    pub gamma: Option<f64>,
    pub epsilon: f64,
    pub beta: f64,
    /// Overrides of the instance's `α`, `ρ` and `l_F`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub lf: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgradScheduleKind {
    #[default]
    Diminishing,
    StronglyConvex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgradSettings {
    pub schedule: SubgradScheduleKind,
    pub max_iters: usize,
    /// Wall-clock cap in seconds.
    pub time_limit: Option<f64>,
    /// Cap the run at the slowest primary solver's wall time. Ignored when
    /// timing is off so that outputs stay deterministic.
    pub match_time: bool,
    /// `R` of the diminishing schedule; defaults to the distance from the
    /// start to the reference point.
    pub radius: Option<f64>,
    /// Lipschitz constant of `Φ_γ`; defaults to a subgradient bound over
    /// the ball of radius `R` around the reference point.
    pub l_gamma: Option<f64>,
    pub record_every: usize,
}

impl Default for SubgradSettings {
    fn default() -> Self {
        SubgradSettings {
            schedule: SubgradScheduleKind::Diminishing,
            max_iters: 1_000_000,
            time_limit: None,
            match_time: true,
            radius: None,
            l_gamma: None,
            record_every: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperReference {
    /// Affine dual when the instance supports it, escalation otherwise.
    #[default]
    Auto,
    Escalation,
    Dual,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSettings {
    pub lower_tolerance: f64,
    pub upper: UpperReference,
    /// `δ` of the escalation reference.
    pub relaxation: f64,
    /// Relative residual of the dual reference.
    pub dual_tolerance: f64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings {
            lower_tolerance: crate::reference::LOWER_TOLERANCE,
            upper: UpperReference::Auto,
            relaxation: 1e-10,
            dual_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record wall-clock times. When off every time column is zero and
    /// repeated runs produce byte-identical files.
    pub timing: bool,
    /// Emit two-column `.dat` series for plotting.
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            timing: true,
            plots: true,
        }
    }
}

/// Experiment description, read from TOML. See the README for the schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub penalty: PenaltyConfig,
    /// Runs whose certificates decide the exit code.
    #[serde(default)]
    pub solvers: Vec<SolverKind>,
    /// Comparison runs, reported but not gating.
    #[serde(default)]
    pub baselines: Vec<SolverKind>,
    #[serde(default)]
    pub apg: ApgConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default)]
    pub subgrad: SubgradSettings,
    #[serde(default)]
    pub reference: ReferenceSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line style overrides applied on top of a config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// `lrp`, `lsrp`, or a path to a LIBSVM file.
    pub problem: Option<String>,
    pub solvers: Vec<SolverKind>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub lf: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub max_iters: Option<usize>,
    pub step_tol: Option<f64>,
}

fn family_from_name(name: &str) -> Option<Family> {
    match name {
        "lrp" => Some(Family::Lrp),
        "lsrp" => Some(Family::Lsrp),
        _ => None,
    }
}

fn positive(path: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {value}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let deserializer = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let config: ExperimentConfig = serde_path_to_error::deserialize(deserializer).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().message().trim().to_string())
        })?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config types serialize to TOML")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(problem) = &o.problem {
            match (family_from_name(problem), &mut self.problem) {
                (Some(f), ProblemConfig::Synthetic { family, .. } | ProblemConfig::Libsvm { family, .. }) => *family = f,
                (None, current) => {
                    *current = ProblemConfig::Libsvm {
                        family: current.family(),
                        path: PathBuf::from(problem),
                        n_features: None,
                        max_rows: None,
                        minmax: false,
                        collinear_copies: 0,
                        intercept: false,
                    }
                }
            }
        }
        if let Some(seed) = o.seed {
            match &mut self.problem {
                ProblemConfig::Synthetic { seed: s, .. } => *s = seed,
                ProblemConfig::Libsvm { .. } => {
                    return Err(Error::config("problem.seed", "a seed applies only to synthetic problems"))
                }
            }
        }
        if !o.solvers.is_empty() {
            self.solvers = o.solvers.clone();
        }
        if let Some(gamma) = o.gamma {
            self.penalty.gamma = Some(gamma);
            // a ladder that was capped at the run's penalty follows it
            if self.ladder.final_gamma.is_some() {
                self.ladder.final_gamma = Some(gamma);
            }
        }
        let p = &mut self.penalty;
        p.epsilon = o.epsilon.unwrap_or(p.epsilon);
        p.beta = o.beta.unwrap_or(p.beta);
        p.alpha = o.alpha.or(p.alpha);
        p.rho = o.rho.or(p.rho);
        p.lf = o.lf.or(p.lf);
        if let Some(dir) = &o.out_dir {
            self.output.dir = dir.clone();
        }
        if let Some(n) = o.max_iters {
            self.apg.max_iters = Some(n);
            self.subgrad.max_iters = n;
        }
        if let Some(t) = o.step_tol {
            self.apg.step_tolerance = t;
        }
        Ok(())
    }

    /// Semantic checks; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        match &self.problem {
            ProblemConfig::Synthetic { rows, cols, family, .. } => {
                if *rows == 0 {
                    return Err(Error::config("problem.rows", "must be at least 1"));
                }
                if *cols == 0 || (*family == Family::Lsrp && *cols < 2) {
                    return Err(Error::config("problem.cols", "too few columns for this family"));
                }
            }
            ProblemConfig::Libsvm { path, max_rows, .. } => {
                if !path.is_file() {
                    return Err(Error::config("problem.path", format!("{} is not a readable file", path.display())));
                }
                if *max_rows == Some(0) {
                    return Err(Error::config("problem.max_rows", "must be at least 1"));
                }
            }
        }
        if self.solvers.is_empty() {
            return Err(Error::config("solvers", "at least one solver is required"));
        }
        for (path, list) in [("solvers", &self.solvers), ("baselines", &self.baselines)] {
            if let Some((i, s)) = list.iter().enumerate().find(|(i, s)| list[..*i].contains(s)) {
                return Err(Error::config(format!("{path}[{i}]"), format!("`{}` is listed twice", s.name())));
            }
        }
        let p = &self.penalty;
        positive("penalty.epsilon", p.epsilon)?;
        positive("penalty.beta", p.beta)?;
        if let Some(g) = p.gamma {
            positive("penalty.gamma", g)?;
        }
        if let Some(a) = p.alpha {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(Error::config("penalty.alpha", format!("must be at least 1, got {a}")));
            }
        }
        if let Some(r) = p.rho {
            positive("penalty.rho", r)?;
        }
        if let Some(l) = p.lf {
            positive("penalty.lf", l)?;
        }
        self.apg.validate().map_err(|e| Error::config("apg", e.to_string()))?;
        if self.solvers.iter().chain(&self.baselines).any(|s| s.is_ladder()) {
            self.ladder.validate().map_err(|e| Error::config("ladder", e.to_string()))?;
        }
        let s = &self.subgrad;
        if s.max_iters == 0 {
            return Err(Error::config("subgrad.max_iters", "must be at least 1"));
        }
        if s.record_every == 0 {
            return Err(Error::config("subgrad.record_every", "must be at least 1"));
        }
        for (path, v) in [
            ("subgrad.time_limit", s.time_limit),
            ("subgrad.radius", s.radius),
            ("subgrad.l_gamma", s.l_gamma),
        ] {
            if let Some(v) = v {
                positive(path, v)?;
            }
        }
        let r = &self.reference;
        positive("reference.lower_tolerance", r.lower_tolerance)?;
        positive("reference.relaxation", r.relaxation)?;
        positive("reference.dual_tolerance", r.dual_tolerance)?;
        Ok(())
    }
}

fn full_settings(config: &mut ExperimentConfig, gamma: f64) {
    config.penalty.gamma = Some(gamma);
    config.apg = ApgConfig {
        max_iters: Some(2_000_000),
        epsilon: 1e-12,
        radius_bound: None,
        step_tolerance: 1e-10,
        restart: true,
        record_every: 10,
    };
    config.ladder = LadderConfig {
        final_gamma: Some(gamma),
        ..LadderConfig::default()
    };
}

/// Built-in configurations on seeded synthetic data.
///
/// The `*-full` presets run every solver at `γ = 1e5` with step tolerance
/// `1e-10` and the ladder `γ₀ = 1/32, ν = 20, η = 10, ε₀ = 1e-6`, with the
/// projected subgradient method as baseline. The `*-desk` presets run one
/// solver at a smaller scale of effort.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (family, rows, cols) = match name {
        "lrp-desk" | "lrp-full" => (Family::Lrp, 200, 50),
        "lsrp-desk" | "lsrp-full" => (Family::Lsrp, 100, 190),
        _ => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{name}`; expected one of {}", PRESETS.join(", ")),
            ))
        }
    };
    let beta = match family {
        Family::Lrp => 2.0,
        Family::Lsrp => 1.0,
    };
    let mut config = ExperimentConfig {
        problem: ProblemConfig::Synthetic { family, rows, cols, seed: 42 },
        penalty: PenaltyConfig {
            gamma: None,
            epsilon: 1e-3,
            beta,
            alpha: None,
            rho: None,
            lf: None,
        },
        solvers: Vec::new(),
        baselines: vec![SolverKind::Subgrad],
        apg: ApgConfig::default(),
        ladder: LadderConfig::default(),
        subgrad: SubgradSettings::default(),
        reference: ReferenceSettings::default(),
        output: OutputConfig {
            dir: PathBuf::from(format!("out/{name}")),
            ..OutputConfig::default()
        },
    };
    match name {
        "lrp-desk" => {
            full_settings(&mut config, 1e4);
            config.penalty.beta = 1.0;
            config.solvers = vec![SolverKind::PbApg];
        }
        "lsrp-desk" => {
            full_settings(&mut config, 1e5);
            config.solvers = vec![SolverKind::PbApgSc];
        }
        _ => {
            full_settings(&mut config, 1e5);
            config.solvers = vec![SolverKind::PbApg, SolverKind::ApbApg, SolverKind::PbApgSc, SolverKind::ApbApgSc];
        }
    }
    Ok(config)
}
