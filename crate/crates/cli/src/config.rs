//! Run configuration: a single TOML file fully determines a run. Unknown keys
//! are rejected so stale configs fail loudly instead of silently drifting.

use serde::Deserialize;

use biharm::discretize::{Grid, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Classify,
    SolveResonance,
    VerifyExpansions,
    VerifyOscint,
    FreePropagator,
    Evolve,
    HighEnergy,
    Report,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub family: String,
    pub amplitude: Option<f64>,
    pub width: Option<f64>,
    pub radius: Option<f64>,
    pub offset: Option<f64>,
    pub tilt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub box_half_width: f64,
    pub cells_per_side: i64,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub chain_tol: Option<f64>,
    pub support_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub time_points: Option<Vec<f64>>,
    pub lambda_points: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    /// Low-pass threshold; omit for the adaptive time-dependent cutoff.
    pub cutoff_lambda0: Option<f64>,
    pub sigma_weight_exponent: Option<f64>,
    pub derivative_orders: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Accepted for forward compatibility; every current command is
    /// deterministic (fixed quadratures, fixed power-iteration start vectors).
    #[allow(dead_code)]
    pub seed: Option<u64>,
    pub potential: Option<PotentialConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Sweep,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if let Some(g) = &self.grid {
            if g.cells_per_side < 2 {
                anyhow::bail!("grid.cells_per_side must be ≥ 2, got {}", g.cells_per_side);
            }
            if !(g.box_half_width > 0.0) {
                anyhow::bail!("grid.box_half_width must be positive");
            }
        }
        if let Some(p) = &self.potential {
            self.potential_spec()?;
            let _ = p;
        }
        let needs_potential = matches!(
            self.command,
            Command::Classify | Command::SolveResonance | Command::Evolve | Command::HighEnergy
        );
        if needs_potential && self.potential.is_none() {
            anyhow::bail!("command requires a [potential] table");
        }
        let needs_grid = matches!(
            self.command,
            Command::Classify
                | Command::SolveResonance
                | Command::Evolve
                | Command::HighEnergy
                | Command::FreePropagator
        );
        if needs_grid && self.grid.is_none() {
            anyhow::bail!("command requires a [grid] table");
        }
        Ok(())
    }

    pub fn potential_spec(&self) -> anyhow::Result<PotentialSpec> {
        let p = self
            .potential
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("missing [potential] table"))?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| anyhow::anyhow!("potential.{name} required for family {}", p.family))
        };
        match p.family.as_str() {
            "gaussian-well" => Ok(PotentialSpec::gaussian_well(
                need(p.amplitude, "amplitude")?,
                need(p.width, "width")?,
            )),
            "bump-compact" => Ok(PotentialSpec::bump_compact(
                need(p.amplitude, "amplitude")?,
                need(p.radius, "radius")?,
            )),
            "log-resonant" => Ok(PotentialSpec::log_resonant(
                need(p.offset, "offset")?,
                p.tilt.unwrap_or(0.0),
            )),
            other => anyhow::bail!("unknown potential family {other:?}"),
        }
    }

    pub fn make_grid(&self) -> anyhow::Result<Grid> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("missing [grid] table"))?;
        Ok(Grid::new(g.box_half_width, g.cells_per_side as usize)
            .map_err(|e| anyhow::anyhow!("{e}"))?)
    }
}
