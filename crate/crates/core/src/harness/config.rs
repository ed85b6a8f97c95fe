use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BodySpec;
use crate::measures::Coefficient;
use crate::transport2d::Axis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Exp1d,
    Doubling,
    Flat2d,
    Curved2d,
    Grushin,
    Liouville,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Exp1d => "exp1d",
            ExperimentKind::Doubling => "doubling",
            ExperimentKind::Flat2d => "flat2d",
            ExperimentKind::Curved2d => "curved2d",
            ExperimentKind::Grushin => "grushin",
            ExperimentKind::Liouville => "liouville",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lp,
    Entropic,
}

/// Geometric ε schedule for the entropic solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonConfig {
    pub start: f64,
    pub end: f64,
    pub stages: usize,
}

/// Discretization and sampling sizes. Each experiment uses a subset; the
/// others must stay unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// exp1d: uniform nodes of the map grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_nodes: Option<usize>,
    /// exp1d: fit window `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// doubling: random ellipsoids; liouville: samples per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// doubling: random polygons for the chain inequality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygons: Option<usize>,
    /// grushin: grid sizes, each twice the previous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    /// curved2d: approximate atom count of the coarse level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    /// curved2d: boundary samples for obliqueness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_samples: Option<usize>,
    /// flat2d/curved2d: transport solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverKind>,
    /// flat2d: largest section height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    /// flat2d: dyadic section heights below `h_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// liouville: amplitude of the uniform noise added to the samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_x: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_y: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_x: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_y: Option<Axis>,
}

/// One experiment. [`parse_config`] fills every default the experiment
/// uses, so [`emit_config`] writes a complete canonical file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<BodySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BodySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_coefficient: Option<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_coefficient: Option<Coefficient>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<EpsilonConfig>,
}

impl ExperimentConfig {
    pub fn output_dir(&self) -> &str {
        self.output.as_deref().unwrap_or(self.experiment.name())
    }

    pub fn params(&self) -> String {
        format!("alpha={};beta={};seed={}", self.alpha, self.beta, self.seed)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg.split('`').nth(1).unwrap_or("<document>").to_string();
        Error::config(key, msg)
    })?;
    fill_defaults(&mut cfg)?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Canonical TOML for a parsed config; `parse_config(emit_config(c)) == c`.
pub fn emit_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config("<document>", e.to_string()))
}

fn unit_disk() -> BodySpec {
    BodySpec::Ellipse { center: [0.0, 0.0], shape: [[1.0, 0.0], [0.0, 1.0]], resolution: 256 }
}

fn rotated_ellipse() -> BodySpec {
    let (s, c) = 0.5f64.sin_cos();
    let (a, b) = (1.5, 0.6);
    // R·diag(a, b)·Rᵀ
    let m00 = a * c * c + b * s * s;
    let m01 = (a - b) * s * c;
    let m11 = a * s * s + b * c * c;
    BodySpec::Ellipse { center: [0.3, -0.2], shape: [[m00, m01], [m01, m11]], resolution: 256 }
}

/// First target cell under the normal map `t ↦ t^γ` of the strip instance,
/// capped so the graded axis stays valid.
fn flat_target_first(first: f64, gamma: f64, cells: usize) -> f64 {
    first.powf(gamma).clamp(1e-12, 0.5 / cells as f64)
}

fn fill_defaults(cfg: &mut ExperimentConfig) -> Result<()> {
    let g = &mut cfg.grid;
    let allowed: &[&str] = match cfg.experiment {
        ExperimentKind::Exp1d => {
            g.map_nodes.get_or_insert(64);
            g.window.get_or_insert([1e-4, 1e-1]);
            &["map_nodes", "window"]
        }
        ExperimentKind::Doubling => {
            g.samples.get_or_insert(400);
            g.polygons.get_or_insert(200);
            cfg.source.get_or_insert_with(unit_disk);
            cfg.source_coefficient.get_or_insert_with(Coefficient::one);
            &["samples", "polygons"]
        }
        ExperimentKind::Flat2d => {
            let gamma = crate::flatmodel::gamma(cfg.alpha, cfg.beta);
            g.solver.get_or_insert(SolverKind::Lp);
            g.h_max.get_or_insert(0.125);
            g.levels.get_or_insert(9);
            g.source_x.get_or_insert(Axis::Symmetric { center: 0.0, half_width: 1.2, cells: 20, first: 0.005 });
            g.source_y.get_or_insert(Axis::Graded { lo: 0.0, hi: 1.0, cells: 50, first: 0.005 });
            g.target_x.get_or_insert(Axis::Symmetric { center: 0.0, half_width: 1.2, cells: 21, first: 0.0047 });
            g.target_y.get_or_insert(Axis::Graded {
                lo: 0.0,
                hi: 1.0,
                cells: 47,
                first: flat_target_first(0.005, gamma, 47),
            });
            &["solver", "h_max", "levels", "source_x", "source_y", "target_x", "target_y"]
        }
        ExperimentKind::Curved2d => {
            g.solver.get_or_insert(SolverKind::Lp);
            g.atoms.get_or_insert(900);
            g.boundary_samples.get_or_insert(64);
            cfg.source.get_or_insert_with(unit_disk);
            cfg.target.get_or_insert_with(rotated_ellipse);
            cfg.source_coefficient.get_or_insert_with(Coefficient::one);
            cfg.target_coefficient.get_or_insert_with(Coefficient::one);
            &["solver", "atoms", "boundary_samples"]
        }
        ExperimentKind::Grushin => {
            g.sizes.get_or_insert_with(|| vec![64, 128, 256]);
            &["sizes"]
        }
        ExperimentKind::Liouville => {
            g.samples.get_or_insert(24);
            g.noise.get_or_insert(1e-3);
            &["samples", "noise"]
        }
    };
    let set: [(&str, bool); 15] = [
        ("map_nodes", g.map_nodes.is_some()),
        ("window", g.window.is_some()),
        ("samples", g.samples.is_some()),
        ("polygons", g.polygons.is_some()),
        ("sizes", g.sizes.is_some()),
        ("atoms", g.atoms.is_some()),
        ("boundary_samples", g.boundary_samples.is_some()),
        ("solver", g.solver.is_some()),
        ("h_max", g.h_max.is_some()),
        ("levels", g.levels.is_some()),
        ("noise", g.noise.is_some()),
        ("source_x", g.source_x.is_some()),
        ("source_y", g.source_y.is_some()),
        ("target_x", g.target_x.is_some()),
        ("target_y", g.target_y.is_some()),
    ];
    let name = cfg.experiment.name();
    if let Some((key, _)) = set.iter().find(|(k, on)| *on && !allowed.contains(k)) {
        return Err(Error::config(format!("grid.{key}"), format!("not used by the {name} experiment")));
    }
    let uses_bodies = matches!(cfg.experiment, ExperimentKind::Doubling | ExperimentKind::Curved2d);
    for (key, on) in [
        ("source", cfg.source.is_some()),
        ("source_coefficient", cfg.source_coefficient.is_some()),
    ] {
        if on && !uses_bodies {
            return Err(Error::config(key, format!("not used by the {name} experiment")));
        }
    }
    let uses_target = cfg.experiment == ExperimentKind::Curved2d;
    for (key, on) in [("target", cfg.target.is_some()), ("target_coefficient", cfg.target_coefficient.is_some())] {
        if on && !uses_target {
            return Err(Error::config(key, format!("not used by the {name} experiment")));
        }
    }
    let entropic = cfg.grid.solver == Some(SolverKind::Entropic);
    if entropic {
        cfg.epsilon.get_or_insert(EpsilonConfig { start: 0.1, end: 1e-3, stages: 12 });
    } else if cfg.epsilon.is_some() {
        return Err(Error::config("epsilon", "only used with solver = \"entropic\""));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be at least {min}, got {v}")))
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    for (key, v) in [("alpha", cfg.alpha), ("beta", cfg.beta)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(key, format!("exponent must be finite and ≥ 0, got {v}")));
        }
    }
    let g = &cfg.grid;
    if let Some(n) = g.map_nodes {
        at_least("grid.map_nodes", n, 2)?;
    }
    if let Some([lo, hi]) = g.window {
        if !(lo > 0.0 && lo < hi && hi <= 0.5) {
            return Err(Error::config("grid.window", format!("need 0 < lo < hi ≤ 1/2, got [{lo}, {hi}]")));
        }
    }
    if let Some(n) = g.samples {
        at_least("grid.samples", n, if cfg.experiment == ExperimentKind::Liouville { 2 } else { 1 })?;
    }
    if let Some(n) = g.polygons {
        at_least("grid.polygons", n, 1)?;
    }
    if let Some(s) = &g.sizes {
        at_least("grid.sizes", s.len(), 3)?;
        if s[0] < 4 || s.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::config("grid.sizes", "sizes must start at 4 or more and double each step"));
        }
    }
    if let Some(n) = g.atoms {
        at_least("grid.atoms", n, 16)?;
    }
    if let Some(n) = g.boundary_samples {
        at_least("grid.boundary_samples", n, 1)?;
    }
    if let Some(h) = g.h_max {
        positive("grid.h_max", h)?;
    }
    if let Some(n) = g.levels {
        at_least("grid.levels", n, 6)?;
    }
    if let Some(v) = g.noise {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config("grid.noise", format!("must be finite and ≥ 0, got {v}")));
        }
    }
    for (key, axis) in [
        ("grid.source_x", &g.source_x),
        ("grid.source_y", &g.source_y),
        ("grid.target_x", &g.target_x),
        ("grid.target_y", &g.target_y),
    ] {
        if let Some(a) = axis {
            a.edges().map_err(|e| Error::config(key, e.to_string()))?;
        }
    }
    if let Some(e) = &cfg.epsilon {
        positive("epsilon.start", e.start)?;
        positive("epsilon.end", e.end)?;
        if e.end >= e.start {
            return Err(Error::config("epsilon.end", "must be below epsilon.start"));
        }
        at_least("epsilon.stages", e.stages, 2)?;
    }
    if cfg.experiment == ExperimentKind::Curved2d {
        for (key, spec) in [("source", &cfg.source), ("target", &cfg.target)] {
            if let Some(BodySpec::Polygon { .. }) = spec {
                return Err(Error::config(key, "curved2d needs a uniformly convex body (ellipse or superellipse)"));
            }
        }
    }
    for (key, spec) in [("source", &cfg.source), ("target", &cfg.target)] {
        if let Some(s) = spec {
            crate::geometry::ConvexBody::from_spec(s.clone()).map_err(|e| Error::config(key, e.to_string()))?;
        }
    }
    Ok(())
}
