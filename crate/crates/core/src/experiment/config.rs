use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::CirParams;
use crate::market::MarketParams;
use crate::strategy::StrategyParams;
use crate::volatility::{PhiFunction, VolatilityModelSpec};

/// Largest finest level accepted for a uniform-grid fBm modulator.
pub const MAX_FBM_LEVEL: u32 = 20;
/// Largest finest level for time-changed modulators, whose covariance is
/// factorized densely (`2^13 + 1` points is about 270 MB packed).
pub const MAX_TIME_CHANGED_LEVEL: u32 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeChangeSpec {
    Identity,
    Power { p: f64 },
    IntegratedCir(CirParams),
}

/// Modulator choice. Horizon, step count and seeds are supplied by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulatorConfig {
    Fbm {
        hurst: f64,
    },
    TimeChanged {
        hurst: f64,
        time_change: TimeChangeSpec,
    },
}

impl ModulatorConfig {
    pub fn hurst(&self) -> f64 {
        match *self {
            ModulatorConfig::Fbm { hurst } | ModulatorConfig::TimeChanged { hurst, .. } => hurst,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModulatorConfig::Fbm { .. } => "fbm",
            ModulatorConfig::TimeChanged { .. } => "time_changed",
        }
    }
}

/// Pass/fail thresholds for the statistical verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Refinement steps allowed to not decrease in a convergence table.
    pub max_non_monotone_steps: usize,
    /// Finest-over-coarsest ceiling for the quadratic variation of `int sigma dZ`.
    pub qv_ratio_max: f64,
    /// Allowed distance of the QV slope from `1 - 2H`.
    pub qv_slope_tolerance: f64,
    /// Ceiling on the log-log slope of mean max-abs self-financing residuals.
    pub sf_slope_max: f64,
    /// Required fraction of seeds with strictly positive terminal value.
    pub min_terminal_positive_rate: f64,
    /// Residuals at or below this are treated as exact zeros.
    pub exact_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_non_monotone_steps: 1,
            qv_ratio_max: 0.25,
            qv_slope_tolerance: 0.1,
            sf_slope_max: -0.1,
            min_terminal_positive_rate: 1.0,
            exact_tolerance: 1e-12,
        }
    }
}

fn default_output_dir() -> String {
    "fracarb-out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub market: MarketParams,
    #[serde(default)]
    pub strategy: StrategyParams,
    pub modulator: ModulatorConfig,
    pub volatility: VolatilityModelSpec,
    /// Dyadic exponents `k`, each giving a grid of `2^k` steps.
    pub grid_levels: Vec<u32>,
    pub num_seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Every violated constraint, not only the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (field, msg) in self.market.violations() {
            out.push(format!("market.{field}: {msg}"));
        }
        if let Err(e) = self.strategy.validate() {
            out.push(format!("strategy.c: {e}"));
        }
        let h = self.modulator.hurst();
        if !(h > 0.0 && h < 1.0) {
            out.push(format!("modulator.hurst: {h} must lie in (0, 1)"));
        }
        if let ModulatorConfig::TimeChanged { time_change, .. } = self.modulator {
            match time_change {
                TimeChangeSpec::Power { p } if !(p > 0.0 && p.is_finite()) => out.push(format!(
                    "modulator.time_change.power.p: {p} must lie in (0, inf)"
                )),
                TimeChangeSpec::IntegratedCir(c) => {
                    if let Err(e) = c.validate() {
                        out.push(format!("modulator.time_change.integrated_cir: {e}"));
                    }
                }
                _ => {}
            }
        }
        if let Err(e) = self.volatility.validate() {
            out.push(format!("volatility.{}: {e}", self.volatility.name()));
        }
        if self.grid_levels.is_empty() {
            out.push("grid_levels: must be nonempty".into());
        }
        if self.grid_levels.windows(2).any(|w| w[1] <= w[0]) {
            out.push(format!(
                "grid_levels: {:?} must be strictly increasing",
                self.grid_levels
            ));
        }
        if self.grid_levels.first() == Some(&0) {
            out.push("grid_levels: exponents must be at least 1".into());
        }
        let cap = match self.modulator {
            ModulatorConfig::Fbm { .. } => MAX_FBM_LEVEL,
            ModulatorConfig::TimeChanged { .. } => MAX_TIME_CHANGED_LEVEL,
        };
        if let Some(&top) = self.grid_levels.iter().max() {
            if top > cap {
                out.push(format!(
                    "grid_levels: finest level {top} exceeds {cap} for a {} modulator",
                    self.modulator.kind()
                ));
            }
        }
        if self.num_seeds == 0 {
            out.push("num_seeds: must be at least 1".into());
        }
        let t = &self.thresholds;
        if !(t.qv_ratio_max > 0.0) {
            out.push(format!(
                "thresholds.qv_ratio_max: {} must be positive",
                t.qv_ratio_max
            ));
        }
        if !(t.qv_slope_tolerance >= 0.0) {
            out.push(format!(
                "thresholds.qv_slope_tolerance: {} must be nonnegative",
                t.qv_slope_tolerance
            ));
        }
        if !t.sf_slope_max.is_finite() {
            out.push("thresholds.sf_slope_max: must be finite".into());
        }
        if !(0.0..=1.0).contains(&t.min_terminal_positive_rate) {
            out.push(format!(
                "thresholds.min_terminal_positive_rate: {} must lie in [0, 1]",
                t.min_terminal_positive_rate
            ));
        }
        if !(t.exact_tolerance >= 0.0) {
            out.push(format!(
                "thresholds.exact_tolerance: {} must be nonnegative",
                t.exact_tolerance
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Configuration(v.join("; ")))
        }
    }

    pub fn finest_level(&self) -> u32 {
        *self.grid_levels.iter().max().expect("validated nonempty")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Configuration(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

/// Volatility families shipped as presets.
pub fn preset_volatilities() -> Vec<VolatilityModelSpec> {
    vec![
        VolatilityModelSpec::Constant { level: 0.2 },
        VolatilityModelSpec::Heston {
            v0: 0.04,
            kappa: 1.5,
            theta: 0.04,
            xi: 0.3,
        },
        VolatilityModelSpec::HullWhite {
            sigma0: 0.2,
            mu: 0.05,
            nu_vol: 0.3,
        },
        VolatilityModelSpec::SteinStein {
            sigma0: 0.2,
            kappa: 2.0,
            theta: 0.2,
            beta: 0.1,
        },
        VolatilityModelSpec::FunctionOfModulator {
            phi: PhiFunction::Affine { a: 0.2, b: 0.1 },
        },
    ]
}

/// Modulator kinds shipped as presets.
pub fn preset_modulators() -> Vec<ModulatorConfig> {
    vec![
        ModulatorConfig::Fbm { hurst: 0.7 },
        ModulatorConfig::TimeChanged {
            hurst: 0.7,
            time_change: TimeChangeSpec::Power { p: 2.0 },
        },
    ]
}

/// Every volatility family under every modulator kind, keyed
/// `"<modulator>_<volatility>"`.
pub fn presets() -> Vec<(String, ExperimentConfig)> {
    let mut out = Vec::new();
    for m in preset_modulators() {
        for v in preset_volatilities() {
            let name = format!("{}_{}", m.kind(), v.name());
            out.push((
                name.clone(),
                ExperimentConfig {
                    market: MarketParams::default(),
                    strategy: StrategyParams::default(),
                    modulator: m,
                    volatility: v,
                    grid_levels: (6..=12).collect(),
                    num_seeds: 1000,
                    master_seed: 20_240_611,
                    output_dir: format!("out/{name}"),
                    thresholds: Thresholds::default(),
                },
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "modulator": {"fbm": {"hurst": 0.7}},
        "volatility": {"heston": {"v0": 0.04, "kappa": 1.5, "theta": 0.04, "xi": 0.3}},
        "grid_levels": [8, 9, 10],
        "num_seeds": 10
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.market, MarketParams::default());
        assert_eq!(c.market.nu, 0.1);
        assert_eq!(c.market.r, 0.05);
        assert_eq!(c.market.y0, 100.0);
        assert_eq!(c.strategy.c, 1.0);
        assert_eq!(c.master_seed, 0);
        assert_eq!(c.thresholds, Thresholds::default());
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn hurst_out_of_range_names_the_field() {
        let text = MINIMAL.replace("0.7", "1.3");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("modulator.hurst"), "{err}");
        assert!(err.contains("(0, 1)"), "{err}");
    }

    #[test]
    fn unordered_levels_are_rejected() {
        let text = MINIMAL.replace("[8, 9, 10]", "[10, 8]");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("strictly increasing"), "{err}");
    }

    #[test]
    fn violations_are_aggregated() {
        let text = MINIMAL
            .replace("0.7", "1.3")
            .replace("[8, 9, 10]", "[10, 8]")
            .replace(
                "\"num_seeds\": 10",
                "\"num_seeds\": 0, \"strategy\": {\"c\": -1}",
            );
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        for needle in ["modulator.hurst", "grid_levels", "num_seeds", "strategy.c"] {
            assert!(err.contains(needle), "{needle} missing from {err}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ExperimentConfig::from_json("{\n  \"modulator\": 3\n}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        let unknown = MINIMAL.replace("\"num_seeds\"", "\"num_seedz\"");
        let err = ExperimentConfig::from_json(&unknown)
            .unwrap_err()
            .to_string();
        assert!(err.contains("num_seedz"), "{err}");
    }

    #[test]
    fn time_changed_level_cap() {
        let text = MINIMAL
            .replace(
                "{\"fbm\": {\"hurst\": 0.7}}",
                "{\"time_changed\": {\"hurst\": 0.7, \"time_change\": {\"power\": {\"p\": 2}}}}",
            )
            .replace("[8, 9, 10]", "[8, 14]");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("exceeds 13"), "{err}");
    }

    #[test]
    fn presets_cover_every_family_and_modulator() {
        let p = presets();
        assert_eq!(p.len(), 10);
        for (_, c) in &p {
            c.validate().unwrap();
        }
        let identity = r#"{"time_changed": {"hurst": 0.6, "time_change": "identity"}}"#;
        let m: ModulatorConfig = serde_json::from_str(identity).unwrap();
        assert_eq!(
            m,
            ModulatorConfig::TimeChanged {
                hurst: 0.6,
                time_change: TimeChangeSpec::Identity
            }
        );
    }
}
