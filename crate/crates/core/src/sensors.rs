//! Gyro and accelerometer noise models, the pressure-pad proxy array, and
//! detectability of slosh disturbances against gyro noise.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::TankGeometry;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::telemetry::PressureFrame;

pub const PA_PER_PSI: f64 = 6_894.757_293_168;

/// Gyro noise: angular random walk σv (deg/√s) and bias instability σu (deg/s^{3/2}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyroSpec<T> {
    pub sigma_v: T,
    pub sigma_u: T,
    /// Sampling interval, s.
    pub dt: T,
}

impl<T: Real> GyroSpec<T> {
    /// Epson M-G364PDCA class MEMS gyro at 100 Hz.
    pub fn mems_100hz() -> Self {
        Self {
            sigma_v: T::lit(0.0015),
            sigma_u: T::lit(2.7e-5),
            dt: T::lit(0.01),
        }
    }

    pub fn noiseless(dt: T) -> Self {
        Self {
            sigma_v: T::zero(),
            sigma_u: T::zero(),
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v >= T::zero() && self.sigma_u >= T::zero()) {
            return Err(Error::config("gyro noise densities must be non-negative"));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::config("gyro sampling interval must be positive"));
        }
        Ok(())
    }
}

/// Rate noise standard deviation `√(σv²/Δt + σu²·Δt/3)`, deg/s.
pub fn gyro_noise_sigma<T: Real>(spec: &GyroSpec<T>) -> Result<T> {
    spec.validate()?;
    let var = spec.sigma_v * spec.sigma_v / spec.dt
        + spec.sigma_u * spec.sigma_u * spec.dt / T::lit(3.0);
    Ok(var.sqrt())
}

/// Stateful gyro: white rate noise plus a random-walk bias.
#[derive(Debug, Clone)]
pub struct Gyro {
    white: f64,
    walk: f64,
    bias: f64,
    rng: ChaCha8Rng,
}

impl Gyro {
    pub fn new(spec: &GyroSpec<f64>, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            white: spec.sigma_v / spec.dt.sqrt(),
            walk: spec.sigma_u * spec.dt.sqrt(),
            bias: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn is_noiseless(&self) -> bool {
        self.white == 0.0 && self.walk == 0.0
    }

    /// One measurement in the units of `truth` (deg/s for the stated densities).
    pub fn measure(&mut self, truth: f64) -> f64 {
        if self.is_noiseless() {
            return truth;
        }
        let n: f64 = self.rng.sample(StandardNormal);
        let w: f64 = self.rng.sample(StandardNormal);
        let out = truth + self.white * n + self.bias;
        self.bias += self.walk * w;
        out
    }
}

/// Noisy gyro series for a uniformly sampled truth, deg/s.
pub fn simulate_gyro(true_rates: &[f64], spec: &GyroSpec<f64>, seed: u64) -> Result<Vec<f64>> {
    let mut gyro = Gyro::new(spec, seed)?;
    Ok(true_rates.iter().map(|&r| gyro.measure(r)).collect())
}

/// Accelerometer at lever arm `arm` from the rotation axis; tangential component only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelSpec {
    /// m
    pub arm: f64,
    /// White noise std, m/s².
    pub noise_std: f64,
}

impl Default for AccelSpec {
    fn default() -> Self {
        Self {
            arm: 0.1,
            noise_std: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Accelerometer {
    spec: AccelSpec,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl Accelerometer {
    pub fn new(spec: AccelSpec, seed: u64) -> Result<Self> {
        if !(spec.noise_std >= 0.0 && spec.arm.is_finite()) {
            return Err(Error::config("accelerometer noise must be non-negative"));
        }
        let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("valid std"));
        Ok(Self {
            spec,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Tangential acceleration `Ω̇·r` plus noise, m/s².
    pub fn measure(&mut self, omega_dot: f64) -> f64 {
        let a = omega_dot * self.spec.arm;
        match &self.noise {
            Some(n) => a + n.sample(&mut self.rng),
            None => a,
        }
    }
}

/// Slosh-induced rate disturbance against gyro noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityReport<T> {
    /// deg/s²
    pub omega_dot_s: T,
    /// Rate change accumulated over the window, deg/s.
    pub omega_s: T,
    /// deg/s
    pub sigma_omega: T,
    /// `omega_s / sigma_omega`; above 1 means the disturbance stands out of the noise.
    pub margin: T,
}

/// Default accumulation window, s. Matches Ω̇s → Ωs in the detection-threshold table.
pub const DETECTION_WINDOW: f64 = 0.05;

pub fn detectability<T: Real>(
    gamma_s_max: T,
    i_sat: T,
    window: T,
    spec: &GyroSpec<T>,
) -> Result<DetectabilityReport<T>> {
    if !(gamma_s_max > T::zero() && i_sat > T::zero() && window > T::zero()) {
        return Err(Error::config("torque, inertia and window must be positive"));
    }
    let omega_dot_s = (gamma_s_max / i_sat).to_degrees();
    let omega_s = omega_dot_s * window;
    let sigma_omega = gyro_noise_sigma(spec)?;
    Ok(DetectabilityReport {
        omega_dot_s,
        omega_s,
        sigma_omega,
        margin: omega_s / sigma_omega,
    })
}

/// Peak slosh forces and torques per excitation axis from CFD: (label, N, N·m).
pub const CFD_PEAK_DISTURBANCES: [(&str, f64, f64); 4] = [
    ("X", 4.75e-2, 5.77e-3),
    ("Y", 9.35e-3, 1.44e-3),
    ("Z", 1.48e-2, 4.17e-3),
    ("XYZ", 5.99e-2, 7.56e-3),
];

/// Pad-array geometry and conversion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureArraySpec {
    pub n_strips: usize,
    pub pads_per_strip: usize,
    /// Pad edge length, m.
    pub pad_size: f64,
    pub resolution_bits: u32,
    /// Range the per-pad activation threshold is drawn from, psi.
    pub activation_threshold: (f64, f64),
    /// Hz
    pub frame_rate: f64,
    /// Pressure mapped to the top code, psi.
    pub full_scale: f64,
    /// Lever arm from torque to wall force, m. `None` uses the tank radius.
    pub moment_arm: Option<f64>,
}

impl Default for PressureArraySpec {
    fn default() -> Self {
        Self {
            n_strips: 8,
            pads_per_strip: 16,
            pad_size: 0.005,
            resolution_bits: 12,
            activation_threshold: (0.01, 0.02),
            frame_rate: 10.0,
            full_scale: 0.5,
            moment_arm: None,
        }
    }
}

impl PressureArraySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_strips == 0 || self.pads_per_strip == 0 {
            return Err(Error::config("pad array needs at least one strip and pad"));
        }
        if !(1..=16).contains(&self.resolution_bits) {
            return Err(Error::config("resolution must be 1..=16 bits"));
        }
        let (lo, hi) = self.activation_threshold;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::config("activation threshold interval invalid"));
        }
        if self.full_scale <= hi {
            return Err(Error::config(format!(
                "full scale {} psi must exceed the activation threshold {hi} psi",
                self.full_scale
            )));
        }
        if !(self.frame_rate > 0.0 && self.pad_size > 0.0) {
            return Err(Error::config("frame rate and pad size must be positive"));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.resolution_bits) - 1) as u16
    }

    pub fn total_pad_area(&self) -> f64 {
        (self.n_strips * self.pads_per_strip) as f64 * self.pad_size * self.pad_size
    }

    fn arm(&self, geometry: &TankGeometry<f64>) -> f64 {
        self.moment_arm.unwrap_or_else(|| geometry.radius())
    }
}

/// Wall pressure magnitude implied by a slosh torque, psi.
pub fn wall_pressure_psi(gamma_s: f64, spec: &PressureArraySpec, geometry: &TankGeometry<f64>) -> f64 {
    gamma_s.abs() / (spec.arm(geometry) * spec.total_pad_area()) / PA_PER_PSI
}

/// Share of the wall pressure seen by strip `i` for a torque of sign `sign`.
fn strip_weight(i: usize, n: usize, sign: f64) -> f64 {
    let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
    0.5 * (1.0 + sign * phi.cos())
}

/// Proxy pad readings for a slosh-torque series sampled at `sample_rate` Hz.
///
/// Each pad gets its own activation threshold drawn once from the configured
/// interval; readings below it are reported as zero.
pub fn simulate_pressure(
    gamma_s: &[f64],
    sample_rate: f64,
    spec: &PressureArraySpec,
    geometry: &TankGeometry<f64>,
    seed: u64,
) -> Result<Vec<PressureFrame>> {
    spec.validate()?;
    let ratio = sample_rate / spec.frame_rate;
    let stride = ratio.round();
    if !(stride >= 1.0 && (ratio - stride).abs() < 1e-9) {
        return Err(Error::config(format!(
            "frame rate {} Hz does not divide sample rate {sample_rate} Hz",
            spec.frame_rate
        )));
    }
    let stride = stride as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.activation_threshold;
    let pads = spec.n_strips * spec.pads_per_strip;
    let thresholds: Vec<f64> = (0..pads)
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    let max_code = spec.max_code();
    let frames = gamma_s
        .iter()
        .step_by(stride)
        .enumerate()
        .map(|(seq, &g)| {
            let p = wall_pressure_psi(g, spec, geometry);
            let mut frame = PressureFrame::zeroed(spec.n_strips, spec.pads_per_strip);
            frame.sequence = seq as u64;
            if p > 0.0 {
                let sign = g.signum();
                for strip in 0..spec.n_strips {
                    let pad_p = p * strip_weight(strip, spec.n_strips, sign);
                    for pad in 0..spec.pads_per_strip {
                        if pad_p < thresholds[strip * spec.pads_per_strip + pad] {
                            continue;
                        }
                        let code = (pad_p / spec.full_scale * f64::from(max_code)).round();
                        frame.set(strip, pad, code.clamp(0.0, f64::from(max_code)) as u16);
                    }
                }
            }
            frame
        })
        .collect();
    Ok(frames)
}

/// Motion-suite measurements for up to three axes at a common rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MssSeries {
    pub t: Vec<f64>,
    /// Measured rates, deg/s, per axis x, y, z.
    pub omega: [Vec<f64>; 3],
    /// Tangential accelerations, m/s², per axis.
    pub accel: [Vec<f64>; 3],
}

impl MssSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,omega_meas_x,omega_meas_y,omega_meas_z,accel_x,accel_y,accel_z")?;
        let cell = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
        for (k, t) in self.t.iter().enumerate() {
            writeln!(
                w,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                t,
                cell(&self.omega[0], k),
                cell(&self.omega[1], k),
                cell(&self.omega[2], k),
                cell(&self.accel[0], k),
                cell(&self.accel[1], k),
                cell(&self.accel[2], k),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_for_mems_gyro() {
        let s = gyro_noise_sigma(&GyroSpec::<f64>::mems_100hz()).unwrap();
        assert!((s - 0.015).abs() < 1e-6, "{s}");
    }

    #[test]
    fn sigma_hand_values() {
        assert_eq!(gyro_noise_sigma(&GyroSpec::<f64>::noiseless(0.01)).unwrap(), 0.0);
        let s = gyro_noise_sigma(&GyroSpec { sigma_v: 0.0, sigma_u: 3.0, dt: 1.0 }).unwrap();
        assert!((s - 3f64.sqrt()).abs() < 1e-12);
        assert!(gyro_noise_sigma(&GyroSpec { sigma_v: 1.0, sigma_u: 0.0, dt: 0.0 }).is_err());
    }

    #[test]
    fn sigma_is_monotone_and_white_dominated() {
        let base = GyroSpec { sigma_v: 0.002f64, sigma_u: 1e-4, dt: 0.01 };
        let s0 = gyro_noise_sigma(&base).unwrap();
        assert!(gyro_noise_sigma(&GyroSpec { sigma_v: 0.003, ..base }).unwrap() > s0);
        assert!(gyro_noise_sigma(&GyroSpec { sigma_u: 2e-4, ..base }).unwrap() > s0);
        let white_only = base.sigma_v / base.dt.sqrt();
        assert!((s0 / white_only - 1.0).abs() < 0.01);
    }

    #[test]
    fn noiseless_gyro_is_transparent() {
        let truth: Vec<f64> = (0..100).map(|k| (k as f64 * 0.1).sin() - 0.0).collect();
        let mut with_neg_zero = truth.clone();
        with_neg_zero[0] = -0.0;
        let out = simulate_gyro(&with_neg_zero, &GyroSpec::noiseless(0.01), 3).unwrap();
        assert_eq!(
            out.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            with_neg_zero.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn gyro_is_seeded() {
        let truth = vec![0.0; 1000];
        let spec = GyroSpec::mems_100hz();
        assert_eq!(
            simulate_gyro(&truth, &spec, 9).unwrap(),
            simulate_gyro(&truth, &spec, 9).unwrap()
        );
        assert_ne!(
            simulate_gyro(&truth, &spec, 9).unwrap(),
            simulate_gyro(&truth, &spec, 10).unwrap()
        );
    }

    #[test]
    fn detectability_rows() {
        let spec = GyroSpec::mems_100hz();
        let r = detectability(7.56e-3, 0.0556, DETECTION_WINDOW, &spec).unwrap();
        assert!((r.omega_dot_s / 7.77 - 1.0).abs() < 0.10);
        assert!((r.omega_s / 0.388 - 1.0).abs() < 0.10);
        assert_eq!(r.omega_s, r.omega_dot_s * DETECTION_WINDOW);
        let doubled = detectability(2.0 * 7.56e-3, 0.0556, DETECTION_WINDOW, &spec).unwrap();
        assert_eq!(doubled.omega_dot_s, 2.0 * r.omega_dot_s);
        assert_eq!(doubled.omega_s, 2.0 * r.omega_s);
    }

    #[test]
    fn margin_is_rate_over_sigma() {
        let spec = GyroSpec::mems_100hz();
        let r = detectability(1.44e-3, 0.0556, DETECTION_WINDOW, &spec).unwrap();
        assert!((r.margin - r.omega_s / r.sigma_omega).abs() < 1e-12);
        let hand = 0.073f64 / 0.015;
        assert!((hand - 4.87).abs() < 0.01);
        assert!(r.margin > 1.0);
    }

    fn torque_for_psi(psi: f64, spec: &PressureArraySpec, geom: &TankGeometry<f64>) -> f64 {
        psi * PA_PER_PSI * geom.radius() * spec.total_pad_area()
    }

    #[test]
    fn quiet_fluid_reads_zero() {
        let spec = PressureArraySpec::default();
        let geom = TankGeometry::flight();
        let frames = simulate_pressure(&[0.0; 100], 100.0, &spec, &geom, 1).unwrap();
        assert_eq!(frames.len(), 10);
        assert!(frames.iter().all(|f| f.samples.iter().all(|&s| s == 0)));
        let g = torque_for_psi(0.005, &spec, &geom);
        assert!((wall_pressure_psi(g, &spec, &geom) - 0.005).abs() < 1e-12);
        let frames = simulate_pressure(&[g; 100], 100.0, &spec, &geom, 1).unwrap();
        assert!(frames.iter().all(|f| f.samples.iter().all(|&s| s == 0)));
    }

    #[test]
    fn full_scale_hits_top_code() {
        let spec = PressureArraySpec::default();
        let geom = TankGeometry::flight();
        let g = torque_for_psi(spec.full_scale, &spec, &geom);
        let frames = simulate_pressure(&[g; 10], 100.0, &spec, &geom, 1).unwrap();
        assert_eq!(frames[0].get(0, 0), 4095);
        assert!(frames[0].samples.iter().all(|&s| s <= 4095));
        let frames = simulate_pressure(&[10.0 * g; 10], 100.0, &spec, &geom, 1).unwrap();
        assert!(frames[0].samples.iter().all(|&s| s <= 4095));
    }

    #[test]
    fn pressure_config_errors() {
        let geom = TankGeometry::flight();
        let bad = PressureArraySpec { full_scale: 0.015, ..Default::default() };
        assert!(simulate_pressure(&[0.0], 100.0, &bad, &geom, 1).is_err());
        let spec = PressureArraySpec { frame_rate: 30.0, ..Default::default() };
        assert!(simulate_pressure(&[0.0], 100.0, &spec, &geom, 1).is_err());
    }

    #[test]
    fn mss_csv_header() {
        let s = MssSeries {
            t: vec![0.0],
            omega: [vec![1.0], vec![], vec![]],
            accel: [vec![0.5], vec![], vec![]],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,omega_meas_x,omega_meas_y,omega_meas_z,accel_x,accel_y,accel_z\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
