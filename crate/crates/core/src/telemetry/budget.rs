//! Downlink volume bookkeeping.
//!
//! Volumes are decimal megabytes (1 MB = 10⁶ bytes). Arithmetic is generic over
//! [`Exact`] so the published totals can be reproduced in rational arithmetic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::frame::encoded_len;
use crate::scalar::Exact;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Liquid-suite volume taken as the published per-experiment figure.
    #[default]
    AsPublished,
    /// Liquid-suite volume computed from frame size, frame rate and duration.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig<T> {
    pub timestamp_bits: u32,
    pub mss_rate_hz: u32,
    pub mss_channels: u32,
    pub bits_per_sample: u32,
    pub frame_rate_hz: u32,
    pub n_strips: usize,
    pub pads_per_strip: usize,
    pub experiment_duration_s: u32,
    pub vss_mb: T,
    pub soh_mb: T,
    pub lss_mb_published: T,
    pub mode: BudgetMode,
}

impl<T: Exact> Default for BudgetConfig<T> {
    fn default() -> Self {
        Self {
            timestamp_bits: 80,
            mss_rate_hz: 100,
            mss_channels: 6,
            bits_per_sample: 64,
            frame_rate_hz: 10,
            n_strips: 8,
            pads_per_strip: 16,
            experiment_duration_s: 500,
            vss_mb: T::from_int(104),
            soh_mb: T::from_int(7),
            lss_mb_published: T::ratio(1285, 100),
            mode: BudgetMode::AsPublished,
        }
    }
}

impl<T: Exact> BudgetConfig<T> {
    pub fn derived() -> Self {
        Self {
            mode: BudgetMode::Derived,
            ..Self::default()
        }
    }

    pub fn frame_bytes(&self) -> usize {
        encoded_len(self.n_strips, self.pads_per_strip)
    }

    /// Liquid-suite bytes per second.
    pub fn lss_bytes_per_s(&self) -> u64 {
        self.frame_bytes() as u64 * u64::from(self.frame_rate_hz)
    }

    /// Liquid-suite volume from frame arithmetic, MB.
    pub fn lss_mb_derived(&self) -> T {
        T::ratio(
            (self.lss_bytes_per_s() * u64::from(self.experiment_duration_s)) as i64,
            1_000_000,
        )
    }

    pub fn convert<U: Exact>(&self, f: impl Fn(&T) -> U) -> BudgetConfig<U> {
        BudgetConfig {
            timestamp_bits: self.timestamp_bits,
            mss_rate_hz: self.mss_rate_hz,
            mss_channels: self.mss_channels,
            bits_per_sample: self.bits_per_sample,
            frame_rate_hz: self.frame_rate_hz,
            n_strips: self.n_strips,
            pads_per_strip: self.pads_per_strip,
            experiment_duration_s: self.experiment_duration_s,
            vss_mb: f(&self.vss_mb),
            soh_mb: f(&self.soh_mb),
            lss_mb_published: f(&self.lss_mb_published),
            mode: self.mode,
        }
    }
}

/// Motion-suite bit rates, bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MssRate {
    pub timestamp_bps: u64,
    pub data_bps: u64,
    pub total_bps: u64,
}

pub fn mss_rate<T: Exact>(config: &BudgetConfig<T>) -> MssRate {
    let rate = u64::from(config.mss_rate_hz);
    let timestamp_bps = u64::from(config.timestamp_bits) * rate;
    let data_bps = rate * u64::from(config.mss_channels) * u64::from(config.bits_per_sample);
    MssRate {
        timestamp_bps,
        data_bps,
        total_bps: timestamp_bps + data_bps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentVolume<T> {
    pub vss: T,
    pub lss: T,
    pub mss: T,
    pub soh: T,
    pub total: T,
    /// The published and derived liquid-suite figures disagree.
    pub lss_discrepancy: bool,
}

/// Per-experiment downlink volume, MB.
pub fn experiment_volume<T: Exact>(config: &BudgetConfig<T>, camera: bool) -> ExperimentVolume<T> {
    let bits = mss_rate(config).total_bps * u64::from(config.experiment_duration_s);
    let mss = T::ratio(bits as i64, 8 * 1_000_000);
    let derived = config.lss_mb_derived();
    let lss = match config.mode {
        BudgetMode::AsPublished => config.lss_mb_published.clone(),
        BudgetMode::Derived => derived.clone(),
    };
    let vss = if camera {
        config.vss_mb.clone()
    } else {
        T::zero()
    };
    let soh = config.soh_mb.clone();
    let total = vss.clone() + lss.clone() + mss.clone() + soh.clone();
    ExperimentVolume {
        vss,
        lss,
        mss,
        soh,
        total,
        lss_discrepancy: derived != config.lss_mb_published,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignVolume<T> {
    pub camera_mb: T,
    pub no_camera_mb: T,
    pub total_mb: T,
}

impl<T: Exact> CampaignVolume<T> {
    /// Totals rounded to whole MB for display.
    pub fn rounded(&self) -> [i64; 3] {
        [&self.camera_mb, &self.no_camera_mb, &self.total_mb].map(|v| v.to_f64_lossy().round() as i64)
    }
}

pub fn campaign_volume<T: Exact>(
    n_camera: u64,
    n_no_camera: u64,
    config: &BudgetConfig<T>,
) -> CampaignVolume<T> {
    let cam = experiment_volume(config, true).total;
    let nocam = experiment_volume(config, false).total;
    let camera_mb = T::from_int(n_camera as i64) * cam;
    let no_camera_mb = T::from_int(n_no_camera as i64) * nocam;
    CampaignVolume {
        total_mb: camera_mb.clone() + no_camera_mb.clone(),
        camera_mb,
        no_camera_mb,
    }
}

/// Everything the `budget` command prints, in plain numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub mode: BudgetMode,
    pub mss: MssRate,
    pub frame_bytes: usize,
    pub lss_bytes_per_s: u64,
    pub lss_mb_derived: f64,
    pub lss_mb_published: f64,
    pub lss_discrepancy: bool,
    pub with_camera: ExperimentVolume<f64>,
    pub without_camera: ExperimentVolume<f64>,
    pub n_camera: u64,
    pub n_no_camera: u64,
    pub campaign: CampaignVolume<f64>,
    pub campaign_rounded_mb: [i64; 3],
}

fn lossy<T: Exact>(v: &ExperimentVolume<T>) -> ExperimentVolume<f64> {
    ExperimentVolume {
        vss: v.vss.to_f64_lossy(),
        lss: v.lss.to_f64_lossy(),
        mss: v.mss.to_f64_lossy(),
        soh: v.soh.to_f64_lossy(),
        total: v.total.to_f64_lossy(),
        lss_discrepancy: v.lss_discrepancy,
    }
}

impl BudgetReport {
    pub fn build<T: Exact>(config: &BudgetConfig<T>, n_camera: u64, n_no_camera: u64) -> Self {
        let campaign = campaign_volume(n_camera, n_no_camera, config);
        let with_camera = experiment_volume(config, true);
        Self {
            mode: config.mode,
            mss: mss_rate(config),
            frame_bytes: config.frame_bytes(),
            lss_bytes_per_s: config.lss_bytes_per_s(),
            lss_mb_derived: config.lss_mb_derived().to_f64_lossy(),
            lss_mb_published: config.lss_mb_published.to_f64_lossy(),
            lss_discrepancy: with_camera.lss_discrepancy,
            with_camera: lossy(&with_camera),
            without_camera: lossy(&experiment_volume(config, false)),
            n_camera,
            n_no_camera,
            campaign_rounded_mb: campaign.rounded(),
            campaign: CampaignVolume {
                camera_mb: campaign.camera_mb.to_f64_lossy(),
                no_camera_mb: campaign.no_camera_mb.to_f64_lossy(),
                total_mb: campaign.total_mb.to_f64_lossy(),
            },
        }
    }

    /// Aligned-column text report.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "MSS timestamp     {:>8} bits/s", self.mss.timestamp_bps);
        let _ = writeln!(s, "MSS measurements  {:>8} bits/s", self.mss.data_bps);
        let _ = writeln!(s, "MSS total         {:>8} bits/s", self.mss.total_bps);
        let _ = writeln!(s, "Pressure frame    {:>8} B/frame", self.frame_bytes);
        let _ = writeln!(s, "Pressure stream   {:>8} B/s", self.lss_bytes_per_s);
        let _ = writeln!(
            s,
            "LSS per experiment: published {} MB, derived {} MB{}",
            self.lss_mb_published,
            self.lss_mb_derived,
            if self.lss_discrepancy { "  [MISMATCH]" } else { "" }
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "Data per experiment (MB), mode {:?}", self.mode);
        let _ = writeln!(
            s,
            "{:<16}{:>8}{:>8}{:>8}{:>8}{:>10}",
            "", "VSS", "LSS", "MSS", "SoH", "Total"
        );
        for (label, row, camera) in [
            ("With Camera", &self.with_camera, true),
            ("Without Camera", &self.without_camera, false),
        ] {
            let vss = if camera {
                row.vss.to_string()
            } else {
                "N/A".to_string()
            };
            let _ = writeln!(
                s,
                "{:<16}{:>8}{:>8}{:>8}{:>8}{:>10}",
                label, vss, row.lss, row.mss, row.soh, row.total
            );
        }
        let _ = writeln!(s);
        let [cam, nocam, total] = self.campaign_rounded_mb;
        let _ = writeln!(
            s,
            "{:>4} Experiments @ {:>7} MB = {:>7} MB",
            self.n_camera, self.with_camera.total, group(cam)
        );
        let _ = writeln!(
            s,
            "{:>4} Experiments @ {:>7} MB = {:>7} MB",
            self.n_no_camera, self.without_camera.total, group(nocam)
        );
        let _ = writeln!(
            s,
            "{:>4} Experiments total          = {:>7} MB",
            self.n_camera + self.n_no_camera,
            group(total)
        );
        s
    }
}

/// Thousands separator for display.
fn group(v: i64) -> String {
    let digits = v.unsigned_abs().to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    if v < 0 {
        format!("-{out}")
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    type Q = Rational64;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn mss_rates() {
        let r = mss_rate(&BudgetConfig::<Q>::default());
        assert_eq!((r.timestamp_bps, r.data_bps, r.total_bps), (8_000, 38_400, 46_400));
        let zero = BudgetConfig::<Q> { mss_rate_hz: 0, ..Default::default() };
        assert_eq!(mss_rate(&zero).total_bps, 0);
        let three = BudgetConfig::<Q> { mss_channels: 3, ..Default::default() };
        assert_eq!(mss_rate(&three).data_bps, 19_200);
    }

    #[test]
    fn published_table_rows_are_exact() {
        let cfg = BudgetConfig::<Q>::default();
        let cam = experiment_volume(&cfg, true);
        assert_eq!(cam.vss, q(104, 1));
        assert_eq!(cam.lss, q(1285, 100));
        assert_eq!(cam.mss, q(29, 10));
        assert_eq!(cam.soh, q(7, 1));
        assert_eq!(cam.total, q(12675, 100));
        assert_eq!(experiment_volume(&cfg, false).total, q(2275, 100));
        assert!(cam.lss_discrepancy);
    }

    #[test]
    fn derived_lss_is_a_tenth_of_published() {
        let cfg = BudgetConfig::<Q>::derived();
        assert_eq!(cfg.frame_bytes(), 257);
        assert_eq!(cfg.lss_bytes_per_s(), 2570);
        assert_eq!(experiment_volume(&cfg, false).lss, q(1285, 1000));
    }

    #[test]
    fn campaign_totals() {
        let cfg = BudgetConfig::<Q>::default();
        let c = campaign_volume(76, 153, &cfg);
        assert_eq!(c.camera_mb, q(9633, 1));
        assert_eq!(c.no_camera_mb, q(348075, 100));
        assert_eq!(c.rounded(), [9633, 3481, 13114]);
        let one = campaign_volume(1, 1, &cfg);
        assert_eq!(one.total_mb, q(1495, 10));
        assert_eq!(campaign_volume(0, 0, &cfg).total_mb, q(0, 1));
    }

    #[test]
    fn volumes_scale_with_duration() {
        let base = BudgetConfig::<Q>::derived();
        let double = BudgetConfig::<Q> { experiment_duration_s: 1000, ..base.clone() };
        let (a, b) = (experiment_volume(&base, false), experiment_volume(&double, false));
        assert_eq!(b.mss, a.mss * 2);
        assert_eq!(b.lss, a.lss * 2);
    }

    #[test]
    fn float_report_renders_the_table() {
        let text = BudgetReport::build(&BudgetConfig::<f64>::default(), 76, 153).render_text();
        assert!(text.contains("46400"));
        assert!(text.contains("126.75"));
        assert!(text.contains("22.75"));
        assert!(text.contains("13,114"));
        assert_eq!(group(9633), "9,633");
        assert_eq!(group(3481), "3,481");
    }
}
