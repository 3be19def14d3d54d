//! Experiment configuration: one self-describing TOML document, strictly
//! parsed (unknown keys are errors), resolved to explicit values before
//! anything runs. The resolved form is what the run manifest records, so a
//! manifest is always enough to reproduce a run.

use serde::{Deserialize, Serialize};

use slowmix::estimators::WitnessSet;
use slowmix::kernels::KernelSpec;
use slowmix::targets::Target;

/// Raw file schema. Every field is optional; defaults are filled during
/// resolution and recorded explicitly in the manifest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub master_seed: Option<u64>,
    pub trials: Option<u64>,
    pub steps: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<String>,
    pub target: Option<TargetConfig>,
    pub kernel: Option<KernelConfig>,
    pub start: Option<StartConfig>,
    pub grid: Option<GridConfig>,
    pub resonance: Option<ResonanceSection>,
    pub mixing: Option<MixingSection>,
    pub measure: Option<MeasureSection>,
    pub gap: Option<GapSection>,
    pub identities: Option<IdentitiesSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// One of `hq`, `hqc`, `resonant`, `cosine`, `gaussian_iso`.
    pub kind: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Cosine targets: period parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Resonant targets: leapfrog step size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Resonant targets: leapfrog step count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Isotropic Gaussians: the eigenvalue (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `mala` or `hmc`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartConfig {
    /// One of `full`, `gaussian_bad`, `omega_hard`, `small_ball`,
    /// `omega_large`, `hmc_bad`, `slab`.
    pub set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab_coord: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slab_half_width: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// MALA step sizes to scan.
    #[serde(default)]
    pub mala_h: Vec<f64>,
    /// HMC step sizes; crossed with `hmc_k`.
    #[serde(default)]
    pub hmc_eta: Vec<f64>,
    #[serde(default)]
    pub hmc_k: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceSection {
    #[serde(default)]
    pub start_magnitude: Option<f64>,
    #[serde(default)]
    pub slab_half_width: Option<f64>,
    #[serde(default)]
    pub lambda_perturb: Option<f64>,
    #[serde(default)]
    pub stationary_samples: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    #[serde(default)]
    pub stationary_samples: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    #[serde(default)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    #[serde(default)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesSection {
    #[serde(default)]
    pub k_max: Option<usize>,
}

/// Fully resolved configuration: every default explicit, in the same shape
/// as the file schema. This is what the manifest records; serializing it
/// back to TOML yields a valid config that reproduces the run bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub master_seed: u64,
    pub trials: u64,
    pub steps: u64,
    pub threads: usize,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<StartConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub resonance: ResonanceResolved,
    pub mixing: MixingResolved,
    pub measure: MeasureResolved,
    pub gap: GapResolved,
    pub identities: IdentitiesResolved,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceResolved {
    pub start_magnitude: f64,
    pub slab_half_width: f64,
    pub lambda_perturb: f64,
    pub stationary_samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingResolved {
    pub stationary_samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureResolved {
    pub samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapResolved {
    pub samples: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentitiesResolved {
    pub k_max: usize,
}

/// Overrides from global command-line flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<&'a str>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn resolve(&self, default_output: &str, overrides: Overrides) -> ResolvedConfig {
        let res = self.resonance.as_ref();
        ResolvedConfig {
            master_seed: overrides.seed.or(self.master_seed).unwrap_or(0),
            trials: self.trials.unwrap_or(100),
            steps: self.steps.unwrap_or(1000),
            threads: overrides.threads.or(self.threads).unwrap_or(0),
            output: overrides
                .out
                .map(str::to_owned)
                .or_else(|| self.output.clone())
                .unwrap_or_else(|| default_output.to_owned()),
            target: self.target.clone(),
            kernel: self.kernel.clone(),
            start: self.start.clone(),
            grid: self.grid.clone(),
            resonance: ResonanceResolved {
                start_magnitude: res.and_then(|r| r.start_magnitude).unwrap_or(2.0),
                slab_half_width: res.and_then(|r| r.slab_half_width).unwrap_or(1.0),
                lambda_perturb: res.and_then(|r| r.lambda_perturb).unwrap_or(1.0),
                stationary_samples: res.and_then(|r| r.stationary_samples).unwrap_or(100_000),
            },
            mixing: MixingResolved {
                stationary_samples: self
                    .mixing
                    .as_ref()
                    .and_then(|m| m.stationary_samples)
                    .unwrap_or(20_000),
            },
            measure: MeasureResolved {
                samples: self.measure.as_ref().and_then(|m| m.samples).unwrap_or(100_000),
            },
            gap: GapResolved {
                samples: self.gap.as_ref().and_then(|g| g.samples).unwrap_or(100_000),
            },
            identities: IdentitiesResolved {
                k_max: self.identities.as_ref().and_then(|i| i.k_max).unwrap_or(64),
            },
        }
    }
}

impl ResolvedConfig {
    pub fn build_kernel(&self) -> Result<KernelSpec, String> {
        let cfg = self
            .kernel
            .as_ref()
            .ok_or("config needs a [kernel] section")?;
        let kernel = match cfg.kind.as_str() {
            "mala" => KernelSpec::Mala {
                h: cfg.h.ok_or("mala kernel needs h")?,
            },
            "hmc" => KernelSpec::Hmc {
                eta: cfg.eta.ok_or("hmc kernel needs eta")?,
                k: cfg.k.ok_or("hmc kernel needs k")?,
            },
            other => return Err(format!("unknown kernel kind {other:?}")),
        };
        kernel.validate().map_err(|e| e.to_string())?;
        Ok(kernel)
    }
}

pub fn build_target_from(cfg: &TargetConfig) -> Result<(Target, Option<usize>), String> {
    let kappa = || cfg.kappa.ok_or(format!("target kind {:?} needs kappa", cfg.kind));
    let result = match cfg.kind.as_str() {
        "hq" => Target::hard_quadratic(cfg.d, kappa()?).map(|t| (t, None)),
        "hqc" => Target::hqc(cfg.d, kappa()?).map(|t| (t, None)),
        "resonant" => {
            let eta = cfg.eta.ok_or("resonant target needs eta")?;
            let k = cfg.k.ok_or("resonant target needs k")?;
            Target::resonant_gaussian(cfg.d, kappa()?, eta, k).map(|(t, j)| (t, Some(j)))
        }
        "cosine" => {
            let h = cfg.h.ok_or("cosine target needs h")?;
            Target::cosine_hard(cfg.d, kappa()?, h).map(|t| (t, None))
        }
        "gaussian_iso" => {
            Target::isotropic_gaussian(cfg.d, cfg.lambda_scale.unwrap_or(1.0)).map(|t| (t, None))
        }
        other => return Err(format!("unknown target kind {other:?}")),
    };
    result.map_err(|e| e.to_string())
}

pub fn build_start_from(
    cfg: &StartConfig,
    target: &Target,
    target_cfg: &TargetConfig,
) -> Result<WitnessSet, String> {
    let d = target.dim();
    let kappa = target_cfg.kappa.unwrap_or(1.0);
    let set = match cfg.set.as_str() {
        "full" => WitnessSet::Full { d },
        "gaussian_bad" => WitnessSet::GaussianBad { d, kappa },
        "omega_hard" => {
            let h = target_cfg
                .h
                .ok_or("omega_hard start needs a cosine target with h")?;
            WitnessSet::OmegaHard { d, kappa, h }
        }
        "small_ball" => WitnessSet::SmallBall { d },
        "omega_large" => WitnessSet::OmegaLarge { d },
        "hmc_bad" => WitnessSet::HmcBad { d, kappa },
        "slab" => WitnessSet::Slab {
            d,
            coord: cfg.slab_coord.unwrap_or(Target::RESONANT_COORD),
            half_width: cfg.slab_half_width.unwrap_or(1.0),
        },
        other => return Err(format!("unknown start set {other:?}")),
    };
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = FileConfig::parse("master_seed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.contains("bogus"), "{err}");
        let err = FileConfig::parse("[target]\nkind = \"hq\"\nd = 4\noopsie = 1\n").unwrap_err();
        assert!(err.contains("oopsie"), "{err}");
    }

    #[test]
    fn defaults_are_explicit_after_resolution() {
        let cfg = FileConfig::parse("").unwrap();
        let resolved = cfg.resolve("default.csv", Overrides::default());
        assert_eq!(resolved.master_seed, 0);
        assert_eq!(resolved.trials, 100);
        assert_eq!(resolved.identities.k_max, 64);
        assert_eq!(resolved.output, "default.csv");
    }

    #[test]
    fn overrides_win() {
        let cfg = FileConfig::parse("master_seed = 5\noutput = \"a.csv\"\n").unwrap();
        let resolved = cfg.resolve(
            "default.csv",
            Overrides {
                seed: Some(9),
                threads: Some(2),
                out: Some("b.csv"),
            },
        );
        assert_eq!(resolved.master_seed, 9);
        assert_eq!(resolved.threads, 2);
        assert_eq!(resolved.output, "b.csv");
    }

    #[test]
    fn target_and_start_build() {
        let cfg = FileConfig::parse(
            "[target]\nkind = \"resonant\"\nd = 3\nkappa = 100.0\neta = 1.0\nk = 2\n\n[start]\nset = \"slab\"\n",
        )
        .unwrap();
        let resolved = cfg.resolve("x.csv", Overrides::default());
        let target_cfg = resolved.target.as_ref().unwrap();
        let (target, j) = build_target_from(target_cfg).unwrap();
        assert_eq!(j, Some(1));
        let set =
            build_start_from(resolved.start.as_ref().unwrap(), &target, target_cfg).unwrap();
        assert!(matches!(set, WitnessSet::Slab { coord: 1, .. }));
    }
}
