use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Horizontal cylinder closed by two ASME flanged-and-dished (torispherical) heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankGeometry<T> {
    /// Inner diameter, m.
    pub diameter: T,
    /// Cylindrical section length, m.
    pub straight_length: T,
    /// Depth of each head, m. Zero means flat ends.
    pub head_depth: T,
    /// Crown radius as a multiple of the diameter.
    pub dish_radius_param: T,
    /// Knuckle radius as a multiple of the diameter.
    pub knuckle_radius_param: T,
    pub fill_ratio: T,
    /// kg/m³
    pub fluid_density: T,
}

const HEAD_SLICES: usize = 1000;

impl<T: Real> TankGeometry<T> {
    /// The flight tank: 90 mm bore, 129.5 mm straight section, 15.24 mm heads, 70 % water.
    pub fn flight() -> Self {
        Self {
            diameter: T::lit(0.090),
            straight_length: T::lit(0.1295),
            head_depth: T::lit(0.01524),
            dish_radius_param: T::one(),
            knuckle_radius_param: T::lit(0.06),
            fill_ratio: T::lit(0.70),
            fluid_density: T::lit(998.0),
        }
    }

    pub fn total_length(&self) -> T {
        self.straight_length + T::lit(2.0) * self.head_depth
    }

    pub fn radius(&self) -> T {
        self.diameter / T::lit(2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.diameter, self.straight_length, self.head_depth, self.fluid_density];
        if dims.iter().any(|v| !v.is_finite() || *v < T::zero()) || self.diameter == T::zero() {
            return Err(Error::config("tank dimensions must be finite, non-negative, with positive diameter"));
        }
        if !(self.fill_ratio >= T::zero() && self.fill_ratio <= T::one()) {
            return Err(Error::config("fill ratio must lie in [0, 1]"));
        }
        if self.head_depth > T::zero() {
            let r = self.knuckle_radius_param;
            if !(r > T::zero() && r < T::lit(0.5) && self.dish_radius_param > r) {
                return Err(Error::config("head radius parameters do not describe a dished head"));
            }
        }
        Ok(())
    }

    /// Radius of the dished profile at axial distance `z` from the tangent line,
    /// together with the natural head depth, both for the unscaled F&D shape.
    fn head_profile(&self) -> (impl Fn(T) -> T, T) {
        let d = self.diameter;
        let crown = self.dish_radius_param * d;
        let knuckle = self.knuckle_radius_param * d;
        let k_off = d / T::lit(2.0) - knuckle;
        // Crown centre sits on the axis, behind the tangent line.
        let z_c = -((crown - knuckle).powi(2) - k_off * k_off).sqrt();
        let depth = crown + z_c;
        let z_t = z_c - z_c * crown / (crown - knuckle);
        let profile = move |z: T| {
            if z <= z_t {
                k_off + (knuckle * knuckle - z * z).max(T::zero()).sqrt()
            } else {
                (crown * crown - (z - z_c).powi(2)).max(T::zero()).sqrt()
            }
        };
        (profile, depth)
    }

    /// Volume of one head by slice integration of the dished profile.
    pub fn head_volume(&self) -> T {
        if self.head_depth == T::zero() {
            return T::zero();
        }
        let (profile, natural) = self.head_profile();
        let n = T::from_usize_lossy(HEAD_SLICES);
        let dz = natural / n;
        let mut area_sum = T::zero();
        for i in 0..HEAD_SLICES {
            let z = (T::from_usize_lossy(i) + T::lit(0.5)) * dz;
            let r = profile(z);
            area_sum = area_sum + r * r;
        }
        // Stretch the natural shape axially to the stated depth.
        T::PI() * area_sum * dz * (self.head_depth / natural)
    }

    pub fn natural_head_depth(&self) -> T {
        self.head_profile().1
    }

    pub fn fluid_volume(&self) -> T {
        self.fill_ratio * tank_volume(self)
    }

    pub fn fluid_mass(&self) -> T {
        self.fluid_volume() * self.fluid_density
    }

    pub fn report(&self, satellite_mass: T) -> TankReport {
        let v = tank_volume(self).to_f64_lossy();
        let fluid = self.fluid_volume().to_f64_lossy();
        let rho = self.fluid_density.to_f64_lossy();
        let m = satellite_mass.to_f64_lossy();
        TankReport {
            total_volume_m3: v,
            total_length_m: self.total_length().to_f64_lossy(),
            fluid_volume_m3: fluid,
            fluid_mass_kg: fluid * rho,
            mass_fraction: fluid * rho / m,
            quoted_fluid_volume_m3: QUOTED_FLUID_VOLUME,
            quoted_mass_fraction: QUOTED_FLUID_VOLUME * rho / m,
        }
    }
}

/// Fluid volume quoted alongside the 70 % fill, m³. Not equal to 0.7 × tank volume.
pub const QUOTED_FLUID_VOLUME: f64 = 0.000709;

/// Derived tank quantities next to the quoted fluid load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TankReport {
    pub total_volume_m3: f64,
    pub total_length_m: f64,
    pub fluid_volume_m3: f64,
    pub fluid_mass_kg: f64,
    pub mass_fraction: f64,
    pub quoted_fluid_volume_m3: f64,
    pub quoted_mass_fraction: f64,
}

/// Internal volume: cylinder plus two torispherical heads.
pub fn tank_volume<T: Real>(geom: &TankGeometry<T>) -> T {
    let r = geom.radius();
    T::PI() * r * r * geom.straight_length + T::lit(2.0) * geom.head_volume()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flight_tank_volume() {
        let g = TankGeometry::<f64>::flight();
        g.validate().unwrap();
        let v = tank_volume(&g);
        assert!((v / 0.000942 - 1.0).abs() < 0.03, "{v}");
        // 0.169·D is the textbook F&D depth for these radius parameters.
        assert!((g.natural_head_depth() - 0.01524).abs() < 5e-5);
    }

    #[test]
    fn flat_ends_are_a_cylinder() {
        let g = TankGeometry {
            head_depth: 0.0,
            ..TankGeometry::<f64>::flight()
        };
        let expected = std::f64::consts::PI * 0.045f64.powi(2) * 0.1295;
        assert!((tank_volume(&g) - expected).abs() < 1e-7);
        assert!((expected - 8.238e-4).abs() < 1e-7);
    }

    #[test]
    fn empty_tank_holds_no_fluid() {
        let g = TankGeometry {
            fill_ratio: 0.0,
            ..TankGeometry::<f64>::flight()
        };
        assert_eq!(g.fluid_volume(), 0.0);
        assert!(TankGeometry { fill_ratio: 1.2, ..g }.validate().is_err());
    }

    #[test]
    fn total_length_is_consistent() {
        let g = TankGeometry::<f64>::flight();
        assert!((g.total_length() - (g.straight_length + 2.0 * g.head_depth)).abs() < 1e-12);
        assert!((g.total_length() - 0.160).abs() < 1e-4);
    }

    #[test]
    fn report_shows_both_fluid_loads() {
        let r = TankGeometry::<f64>::flight().report(7.0);
        assert!((r.fluid_volume_m3 - 0.70 * r.total_volume_m3).abs() < 1e-15);
        assert!(r.fluid_volume_m3 < r.quoted_fluid_volume_m3);
        assert!(r.mass_fraction < 0.13 && r.quoted_mass_fraction < 0.13);
    }
}
