//! Configuration document (JSON) mirroring the pipeline and matcher configs.
//! Every field is optional with the library defaults; unknown keys are
//! rejected with an error naming the key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, FileError};
use crate::correspondence::{MatcherConfig, MatcherVariant};
use crate::pipeline::{DensityPolicy, IcpConfig, PipelineConfig, RansacConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherSection {
    pub variant: MatcherVariant,
    pub oracle_outlier_fraction: f64,
    pub oracle_noise_sigma: f64,
    pub feature_radius_multiplier: f64,
    pub rng_seed: u64,
}

impl Default for MatcherSection {
    fn default() -> Self {
        let m = MatcherConfig::default();
        Self {
            variant: m.variant,
            oracle_outlier_fraction: m.oracle_outlier_fraction,
            oracle_noise_sigma: m.oracle_noise_sigma,
            feature_radius_multiplier: m.feature_radius_multiplier,
            rng_seed: m.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacSection {
    pub max_iterations: usize,
    /// `null` derives 2 × adjacency delta at run time.
    pub inlier_threshold: Option<f64>,
    pub min_inlier_count: usize,
    pub rng_seed: u64,
    pub anchor_weight: f64,
}

impl Default for RansacSection {
    fn default() -> Self {
        let r = RansacConfig::default();
        Self {
            max_iterations: r.max_iterations,
            inlier_threshold: r.inlier_threshold,
            min_inlier_count: r.min_inlier_count,
            rng_seed: r.rng_seed,
            anchor_weight: r.anchor_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpSection {
    pub max_iterations: usize,
    pub convergence_eps: f64,
    /// `null` derives 3 × the RANSAC inlier threshold at run time.
    pub max_pair_distance: Option<f64>,
}

impl Default for IcpSection {
    fn default() -> Self {
        let i = IcpConfig::default();
        Self {
            max_iterations: i.max_iterations,
            convergence_eps: i.convergence_eps,
            max_pair_distance: i.max_pair_distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub min_corr_per_part: usize,
    pub min_points_per_part: usize,
    /// `null` derives 3 × adjacency delta at run time.
    pub tau_joint: Option<f64>,
    /// `null` derives the adjacency delta at run time.
    pub roi_margin: Option<f64>,
    pub icp_only_min_coverage: f64,
    pub ransac: RansacSection,
    pub icp: IcpSection,
    pub density_violation_policy: DensityPolicy,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            min_corr_per_part: p.min_corr_per_part,
            min_points_per_part: p.min_points_per_part,
            tau_joint: p.tau_joint,
            roi_margin: p.roi_margin,
            icp_only_min_coverage: p.icp_only_min_coverage,
            ransac: RansacSection::default(),
            icp: IcpSection::default(),
            density_violation_policy: p.density_violation_policy,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub matcher: MatcherSection,
    pub pipeline: PipelineSection,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, FileError> {
        read_json(path)
    }

    pub fn matcher_config(&self) -> MatcherConfig {
        MatcherConfig {
            variant: self.matcher.variant,
            oracle_outlier_fraction: self.matcher.oracle_outlier_fraction,
            oracle_noise_sigma: self.matcher.oracle_noise_sigma,
            feature_radius_multiplier: self.matcher.feature_radius_multiplier,
            rng_seed: self.matcher.rng_seed,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            min_corr_per_part: self.pipeline.min_corr_per_part,
            min_points_per_part: self.pipeline.min_points_per_part,
            tau_joint: self.pipeline.tau_joint,
            roi_margin: self.pipeline.roi_margin,
            icp_only_min_coverage: self.pipeline.icp_only_min_coverage,
            ransac: RansacConfig {
                max_iterations: self.pipeline.ransac.max_iterations,
                inlier_threshold: self.pipeline.ransac.inlier_threshold,
                min_inlier_count: self.pipeline.ransac.min_inlier_count,
                rng_seed: self.pipeline.ransac.rng_seed,
                anchor_weight: self.pipeline.ransac.anchor_weight,
            },
            icp: IcpConfig {
                max_iterations: self.pipeline.icp.max_iterations,
                convergence_eps: self.pipeline.icp.convergence_eps,
                max_pair_distance: self.pipeline.icp.max_pair_distance,
            },
            density_violation_policy: self.pipeline.density_violation_policy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pwr_align_config_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn empty_document_yields_defaults() {
        let path = tmp("empty.json");
        std::fs::write(&path, "{}\n").unwrap();
        let cfg = ConfigFile::read(&path).unwrap();
        assert_eq!(cfg, ConfigFile::default());
        assert_eq!(cfg.pipeline_config(), PipelineConfig::default());
        assert_eq!(cfg.matcher_config(), MatcherConfig::default());
    }

    #[test]
    fn partial_overrides_keep_other_defaults() {
        let path = tmp("partial.json");
        std::fs::write(
            &path,
            r#"{"pipeline": {"min_corr_per_part": 9, "ransac": {"rng_seed": 7}}}"#,
        )
        .unwrap();
        let cfg = ConfigFile::read(&path).unwrap();
        assert_eq!(cfg.pipeline.min_corr_per_part, 9);
        assert_eq!(cfg.pipeline.ransac.rng_seed, 7);
        assert_eq!(cfg.pipeline.ransac.max_iterations, 2000);
        assert_eq!(cfg.pipeline.min_points_per_part, 50);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let path = tmp("unknown.json");
        std::fs::write(&path, r#"{"pipeline": {"mon_corr_per_part": 9}}"#).unwrap();
        let err = ConfigFile::read(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mon_corr_per_part"), "{msg}");
    }
}
