//! System parameters for the two-tier uplink model.
//!
//! One macrocell base sits at the origin of a square coverage region of side
//! `region_side_m`; one microcell base sits at `(x0_m, 0)` surrounded by a
//! square hotspot of side `hotspot_side_m`. All defaults reproduce the
//! standard operating point used throughout the crate (processing gain 128,
//! 7 dB SINR target, 100 m breakpoints, 10:1 macro/micro power ratio).

use thiserror::Error;

/// Validation failure for a [`SystemParams`] field, named after the field.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParamError {
    #[error("processing_gain must be positive, got {0}")]
    ProcessingGain(f64),
    #[error("b_macro_m must be positive, got {0}")]
    BreakpointMacro(f64),
    #[error("b_micro_m must be positive, got {0}")]
    BreakpointMicro(f64),
    #[error("h_ratio must be positive, got {0}")]
    HRatio(f64),
    #[error("sigma_macro_db must be nonnegative, got {0}")]
    SigmaMacro(f64),
    #[error("sigma_micro_db must be nonnegative, got {0}")]
    SigmaMicro(f64),
    #[error("region_side_m must be positive, got {0}")]
    RegionSide(f64),
    #[error("hotspot_side_m must be positive and smaller than region_side_m, got {0}")]
    HotspotSide(f64),
    #[error("hotspot square (x0_m {x0}, side {side}) extends outside the coverage region")]
    HotspotOutsideRegion { x0: f64, side: f64 },
    #[error("hotspot_density must lie in [0, 1], got {0}")]
    HotspotDensity(f64),
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    Confidence(f64),
    #[error("trials must be at least 1")]
    Trials,
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

/// Full parameter set for one simulation point.
///
/// Path gains are kept in relative units: the microcell proportionality
/// constant is normalized to 1 and only the macro/micro ratio `h_ratio`
/// enters the model. Thermal noise is likewise fixed at 1 internal unit.
/// Every feasibility verdict is invariant under common rescaling of all
/// gains, so neither normalization affects any capacity result; they only
/// set the scale of reported transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Spreading factor W/R (bandwidth over user rate).
    pub processing_gain: f64,
    /// Required post-combining SINR in dB (single target for both tiers).
    pub gamma_db: f64,
    /// Macrocell breakpoint distance in meters (path-loss slope change).
    pub b_macro_m: f64,
    /// Microcell breakpoint distance in meters.
    pub b_micro_m: f64,
    /// Macro-to-micro proportionality ratio H_M / H_mu.
    pub h_ratio: f64,
    /// Microcell base offset along the x axis, meters.
    pub x0_m: f64,
    /// Macrocell shadowing standard deviation, dB.
    pub sigma_macro_db: f64,
    /// Microcell shadowing standard deviation, dB.
    pub sigma_micro_db: f64,
    /// Side of the square coverage region, meters (macro base at center).
    pub region_side_m: f64,
    /// Side of the square hotspot, meters (micro base at center).
    pub hotspot_side_m: f64,
    /// Probability that a random user belongs to the hotspot population.
    pub hotspot_density: f64,
    /// Required feasibility probability for the capacity search.
    pub confidence: f64,
    /// Monte Carlo trials per tested user count.
    pub trials: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            processing_gain: 128.0,
            gamma_db: 7.0,
            b_macro_m: 100.0,
            b_micro_m: 100.0,
            h_ratio: 10.0,
            x0_m: 300.0,
            sigma_macro_db: 8.0,
            sigma_micro_db: 4.0,
            region_side_m: 1000.0,
            hotspot_side_m: 200.0,
            hotspot_density: 0.5,
            confidence: 0.95,
            trials: 10_000,
        }
    }
}

impl SystemParams {
    /// Required SINR as a linear ratio.
    pub fn gamma_linear(&self) -> f64 {
        10f64.powf(self.gamma_db / 10.0)
    }

    /// Interference headroom K' = (W/R) / Gamma.
    ///
    /// K' + 1 is the pole capacity of an isolated single cell: the user
    /// count at which required transmit powers diverge.
    pub fn k_prime(&self) -> f64 {
        self.processing_gain / self.gamma_linear()
    }

    /// Same parameter point with a different hotspot density.
    pub fn with_hotspot_density(&self, p_h: f64) -> Self {
        Self {
            hotspot_density: p_h,
            ..self.clone()
        }
    }

    /// Checks every field against its admissible range.
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, v) in [
            ("processing_gain", self.processing_gain),
            ("gamma_db", self.gamma_db),
            ("b_macro_m", self.b_macro_m),
            ("b_micro_m", self.b_micro_m),
            ("h_ratio", self.h_ratio),
            ("x0_m", self.x0_m),
            ("sigma_macro_db", self.sigma_macro_db),
            ("sigma_micro_db", self.sigma_micro_db),
            ("region_side_m", self.region_side_m),
            ("hotspot_side_m", self.hotspot_side_m),
            ("hotspot_density", self.hotspot_density),
            ("confidence", self.confidence),
        ] {
            if !v.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        if self.processing_gain <= 0.0 {
            return Err(ParamError::ProcessingGain(self.processing_gain));
        }
        if self.b_macro_m <= 0.0 {
            return Err(ParamError::BreakpointMacro(self.b_macro_m));
        }
        if self.b_micro_m <= 0.0 {
            return Err(ParamError::BreakpointMicro(self.b_micro_m));
        }
        if self.h_ratio <= 0.0 {
            return Err(ParamError::HRatio(self.h_ratio));
        }
        if self.sigma_macro_db < 0.0 {
            return Err(ParamError::SigmaMacro(self.sigma_macro_db));
        }
        if self.sigma_micro_db < 0.0 {
            return Err(ParamError::SigmaMicro(self.sigma_micro_db));
        }
        if self.region_side_m <= 0.0 {
            return Err(ParamError::RegionSide(self.region_side_m));
        }
        if self.hotspot_side_m <= 0.0 || self.hotspot_side_m >= self.region_side_m {
            return Err(ParamError::HotspotSide(self.hotspot_side_m));
        }
        let half_region = self.region_side_m / 2.0;
        let half_spot = self.hotspot_side_m / 2.0;
        if self.x0_m.abs() + half_spot > half_region {
            return Err(ParamError::HotspotOutsideRegion {
                x0: self.x0_m,
                side: self.hotspot_side_m,
            });
        }
        if !(0.0..=1.0).contains(&self.hotspot_density) {
            return Err(ParamError::HotspotDensity(self.hotspot_density));
        }
        if self.confidence <= 0.0 || self.confidence >= 1.0 {
            return Err(ParamError::Confidence(self.confidence));
        }
        if self.trials == 0 {
            return Err(ParamError::Trials);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_validate() {
        SystemParams::default().validate().unwrap();
    }

    #[test]
    fn k_prime_recomputes_from_gain_and_target() {
        let p = SystemParams::default();
        // 128 / 10^0.7
        assert_relative_eq!(p.k_prime(), 128.0 / 10f64.powf(0.7), epsilon = 1e-12);
        assert_relative_eq!(p.k_prime(), 25.5393, epsilon = 1e-4);

        let p3 = SystemParams {
            gamma_db: 3.0,
            ..SystemParams::default()
        };
        assert_relative_eq!(
            p3.k_prime(),
            p3.processing_gain / 10f64.powf(0.3),
            epsilon = 1e-12
        );
    }

    #[test]
    fn default_hotspot_fits_in_region() {
        // x0 = 300 m with a 200 m hotspot inside a 1 km square.
        let p = SystemParams::default();
        assert!(p.x0_m + p.hotspot_side_m / 2.0 <= p.region_side_m / 2.0);
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let base = SystemParams::default();

        let bad = SystemParams {
            hotspot_density: 1.5,
            ..base.clone()
        };
        assert_eq!(bad.validate(), Err(ParamError::HotspotDensity(1.5)));

        let bad = SystemParams {
            confidence: 1.0,
            ..base.clone()
        };
        assert_eq!(bad.validate(), Err(ParamError::Confidence(1.0)));

        let bad = SystemParams {
            hotspot_side_m: 1000.0,
            ..base.clone()
        };
        assert!(matches!(bad.validate(), Err(ParamError::HotspotSide(_))));

        let bad = SystemParams {
            x0_m: 450.0,
            ..base.clone()
        };
        assert!(matches!(
            bad.validate(),
            Err(ParamError::HotspotOutsideRegion { .. })
        ));

        let bad = SystemParams {
            trials: 0,
            ..base.clone()
        };
        assert_eq!(bad.validate(), Err(ParamError::Trials));

        let bad = SystemParams {
            h_ratio: f64::NAN,
            ..base
        };
        assert_eq!(bad.validate(), Err(ParamError::NonFinite("h_ratio")));
    }
}
