//! Physical-layer model of the UAV-to-user downlink.
//!
//! Large-scale attenuation follows a distance power law referenced to 1 m,
//! small-scale fading is Rician with a unit second moment, and the per-RB
//! throughput uses the finite-blocklength normal approximation
//!
//! ```text
//! r = a * [ w * log2(1 + snr) - sqrt(V / n) * Qinv(Theta) ],   V = 1 - 1 / (1 + snr)
//! ```
//!
//! with the dispersion penalty kept outside the bandwidth factor. Rates are
//! clamped below at zero. All quantities are linear; dB conversions happen
//! at configuration load.

use std::f64::consts::{LN_2, SQRT_2};

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio constants shared by every link in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Linear power gain at the reference distance.
    pub gamma0: f64,
    /// Path-loss exponent.
    pub pathloss_exp: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_density: f64,
    /// Bandwidth of one resource block in Hz.
    pub rb_bandwidth: f64,
    /// Rician factor (linear). `f64::INFINITY` gives a pure LoS channel.
    pub rician_k: f64,
    /// Channel uses per slot.
    pub blocklength: u32,
    /// Target decoding error probability.
    pub decode_err: f64,
    /// Reference distance in meters.
    pub ref_distance: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            gamma0: db_to_linear(-30.0),
            pathloss_exp: 2.0,
            noise_density: dbm_to_watts(-174.0),
            rb_bandwidth: 180e3,
            rician_k: 10.0,
            blocklength: 168,
            decode_err: 1e-5,
            ref_distance: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma0", self.gamma0),
            ("pathloss_exp", self.pathloss_exp),
            ("noise_density", self.noise_density),
            ("rb_bandwidth", self.rb_bandwidth),
            ("ref_distance", self.ref_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.rician_k >= 0.0) {
            return Err(Error::invalid(format!("rician_k must be >= 0, got {}", self.rician_k)));
        }
        if self.blocklength == 0 {
            return Err(Error::invalid("blocklength must be at least 1"));
        }
        if !(self.decode_err > 0.0 && self.decode_err <= 0.5) {
            return Err(Error::invalid(format!("decode_err must lie in (0, 0.5], got {}", self.decode_err)));
        }
        Ok(())
    }

    /// Noise power over one RB, `n0 * w`, in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.rb_bandwidth
    }

    /// Precomputes the constants of the rate expression.
    pub fn rate_model(&self) -> Result<RateModel> {
        self.validate()?;
        let qinv = q_inv(self.decode_err)?;
        Ok(RateModel {
            bandwidth: self.rb_bandwidth,
            noise_power: self.noise_power(),
            penalty_scale: qinv / f64::from(self.blocklength).sqrt(),
        })
    }
}

/// Horizontal position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn at_altitude(self, altitude: f64) -> Position3D {
        Position3D { x: self.x, y: self.y, altitude }
    }
}

/// UAV position; the altitude is fixed per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, altitude: f64) -> Self {
        Self { x, y, altitude }
    }

    pub fn horizontal(&self) -> Position2D {
        Position2D::new(self.x, self.y)
    }

    /// Squared 3-D distance to a ground user.
    pub fn distance_sq(&self, user: Position2D) -> f64 {
        let dx = self.x - user.x;
        let dy = self.y - user.y;
        self.altitude * self.altitude + dx * dx + dy * dy
    }
}

/// Complex small-scale coefficient of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSample {
    pub rho: Complex<f64>,
}

impl FadingSample {
    /// `|rho|^2`, the factor applied to the average channel power.
    pub fn power(&self) -> f64 {
        self.rho.norm_sqr()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Average channel power `gamma0 * (d / d0)^-theta` between the UAV and a user.
pub fn path_gain(params: &ChannelParams, uav: Position3D, user: Position2D) -> f64 {
    let d_sq = uav.distance_sq(user) / (params.ref_distance * params.ref_distance);
    params.gamma0 * d_sq.powf(-0.5 * params.pathloss_exp)
}

/// Draws a Rician coefficient with zero-phase LoS component and unit second moment.
pub fn sample_fading<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> FadingSample {
    let k = params.rician_k;
    if k.is_infinite() {
        return FadingSample { rho: Complex::new(1.0, 0.0) };
    }
    let los = (k / (k + 1.0)).sqrt();
    let scatter = (1.0 / (k + 1.0)).sqrt();
    // CSCG with unit variance: each quadrature carries half the power.
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let tilde = Complex::new(re, im) / SQRT_2;
    FadingSample { rho: Complex::new(los, 0.0) + tilde * scatter }
}

/// Gaussian tail probability `Q(x) = P[Z > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Inverse of the Gaussian tail probability.
pub fn q_inv(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("q_inv needs theta in (0, 1), got {theta}")));
    }
    if theta > 0.5 {
        return q_inv(1.0 - theta).map(|x| -x);
    }
    if theta == 0.5 {
        return Ok(0.0);
    }
    // Tail-form starting point, then Halley on log Q which stays well scaled
    // far into the tail.
    let t = (-2.0 * theta.ln()).sqrt();
    let mut x = t
        - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    for _ in 0..50 {
        let q = q_function(x);
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // f(x) = Q(x) - theta, f' = -pdf, f'' = x * pdf
        let f = q - theta;
        let step = f / -pdf;
        let halley = step / (1.0 - 0.5 * step * x);
        x -= halley;
        if halley.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Channel dispersion `1 - 1 / (1 + snr)`.
pub fn dispersion(snr: f64) -> f64 {
    snr / (1.0 + snr)
}

/// Finite-blocklength rate of one (user, RB) pair in bit/s.
pub fn achievable_rate(params: &ChannelParams, assigned: f64, power: f64, gain: f64) -> Result<f64> {
    Ok(params.rate_model()?.rate(assigned, power, gain))
}

/// Rate expression with the constants of a [`ChannelParams`] folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub bandwidth: f64,
    pub noise_power: f64,
    /// `Qinv(Theta) / sqrt(n)`; zero turns the expression into plain Shannon.
    pub penalty_scale: f64,
}

impl RateModel {
    /// Same model with the dispersion penalty removed.
    pub fn shannon_only(self) -> Self {
        Self { penalty_scale: 0.0, ..self }
    }

    pub fn snr(&self, power: f64, gain: f64) -> f64 {
        power * gain / self.noise_power
    }

    /// Unclamped rate at a given SNR.
    pub fn raw_rate_at_snr(&self, snr: f64) -> f64 {
        self.bandwidth * snr.ln_1p() / LN_2 - self.penalty_scale * dispersion(snr).sqrt()
    }

    pub fn rate_at_snr(&self, snr: f64) -> f64 {
        if snr <= 0.0 {
            return 0.0;
        }
        self.raw_rate_at_snr(snr).max(0.0)
    }

    pub fn rate(&self, assigned: f64, power: f64, gain: f64) -> f64 {
        if assigned <= 0.0 || power <= 0.0 {
            return 0.0;
        }
        assigned * self.rate_at_snr(self.snr(power, gain))
    }

    /// Derivative of the clamped rate with respect to the SNR.
    pub fn rate_slope_at_snr(&self, snr: f64) -> f64 {
        if snr <= 0.0 || self.raw_rate_at_snr(snr) <= 0.0 {
            return 0.0;
        }
        let shannon = self.bandwidth / (LN_2 * (1.0 + snr));
        let v = dispersion(snr);
        let penalty = self.penalty_scale * 0.5 / (v.sqrt() * (1.0 + snr) * (1.0 + snr));
        shannon - penalty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn reference_distance_gives_gamma0() {
        let mut p = params();
        p.gamma0 = 0.37;
        // UAV 1 m above the user.
        let g = path_gain(&p, Position3D::new(5.0, 5.0, 1.0), Position2D::new(5.0, 5.0));
        assert_relative_eq!(g, 0.37, max_relative = 1e-15);
    }

    #[test]
    fn gain_directly_below_at_100m() {
        let p = params();
        let g = path_gain(&p, Position3D::new(0.0, 0.0, 100.0), Position2D::new(0.0, 0.0));
        assert_relative_eq!(g, 1e-7, max_relative = 1e-12);
    }

    #[test]
    fn default_constants_are_linear() {
        let p = params();
        assert_relative_eq!(p.gamma0, 1e-3, max_relative = 1e-12);
        assert_relative_eq!(p.noise_density, 10f64.powf(-20.4), max_relative = 1e-12);
    }

    #[test]
    fn gain_decreases_with_horizontal_offset() {
        let p = params();
        let user = Position2D::new(0.0, 0.0);
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let g = path_gain(&p, Position3D::new(i as f64 * 3.0, 0.0, 120.0), user);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn pure_los_has_unit_modulus() {
        let mut p = params();
        p.rician_k = f64::INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_fading(&p, &mut rng).power(), 1.0);
        }
        p.rician_k = 1e12;
        let s = sample_fading(&p, &mut rng);
        assert!((s.rho.norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn fading_second_moment_is_one() {
        for k in [0.0, 1.0, 10.0] {
            let mut p = params();
            p.rician_k = k;
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let n = 100_000;
            let mean: f64 = (0..n).map(|_| sample_fading(&p, &mut rng).power()).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 0.02, "K={k}: mean {mean}");
        }
    }

    #[test]
    fn rayleigh_power_variance_is_one() {
        // |rho|^2 is Exp(1) when K = 0.
        let mut p = params();
        p.rician_k = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_fading(&p, &mut rng).power()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn q_inv_values() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
        let a = q_inv(0.1).unwrap();
        let b = q_inv(0.9).unwrap();
        assert_relative_eq!(a, -b, max_relative = 1e-14);
        assert_relative_eq!(q_inv(1e-5).unwrap(), 4.264890793922825, max_relative = 1e-12);
        assert!(q_inv(0.0).is_err());
        assert!(q_inv(1.0).is_err());
        assert!(q_inv(f64::NAN).is_err());
    }

    #[test]
    fn q_inv_round_trip() {
        for e in 1..=300 {
            let theta = 10f64.powf(-(e as f64) / 20.0);
            if theta >= 0.5 {
                continue;
            }
            let x = q_inv(theta).unwrap();
            assert!(x > 0.0);
            assert!(((q_function(x) - theta) / theta).abs() <= 1e-12, "theta {theta}");
        }
    }

    #[test]
    fn dispersion_limits() {
        assert_eq!(dispersion(0.0), 0.0);
        assert_eq!(dispersion(1.0), 0.5);
        assert!(dispersion(1e300) <= 1.0);
        assert!(dispersion(1e12) > 0.999_999);
    }

    #[test]
    fn rate_zero_cases() {
        let p = params();
        assert_eq!(achievable_rate(&p, 0.0, 5.0, 1e-7).unwrap(), 0.0);
        assert_eq!(achievable_rate(&p, 1.0, 0.0, 1e-7).unwrap(), 0.0);
    }

    #[test]
    fn rate_hand_evaluated() {
        let p = params();
        let model = p.rate_model().unwrap();
        // Pick power so the SNR is exactly 10.
        let gain = 1e-7;
        let power = 10.0 * p.noise_power() / gain;
        let expected = 180e3 * 11f64.log2() - ((1.0f64 - 1.0 / 11.0) / 168.0).sqrt() * 4.264890793922825;
        assert_relative_eq!(model.rate(1.0, power, gain), expected, max_relative = 1e-12);
        assert_relative_eq!(model.rate(0.25, power, gain), 0.25 * expected, max_relative = 1e-12);
    }

    #[test]
    fn rate_clamped_at_low_snr() {
        let model = params().rate_model().unwrap();
        assert!(model.raw_rate_at_snr(1e-14) < 0.0);
        assert_eq!(model.rate_at_snr(1e-14), 0.0);
        assert_eq!(model.rate_slope_at_snr(1e-14), 0.0);
    }

    #[test]
    fn shannon_switch_removes_penalty() {
        let model = params().rate_model().unwrap().shannon_only();
        for snr in [0.5, 3.0, 1e4] {
            assert_eq!(model.rate_at_snr(snr), 180e3 * (1.0 + snr).log2());
        }
    }

    #[test]
    fn rate_slope_matches_finite_difference() {
        let model = params().rate_model().unwrap();
        for snr in [1.0, 7.5, 1e3, 1e7] {
            let h = snr * 1e-6;
            let fd = (model.rate_at_snr(snr + h) - model.rate_at_snr(snr - h)) / (2.0 * h);
            assert_relative_eq!(model.rate_slope_at_snr(snr), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn rate_monotone_in_power_above_unit_snr() {
        let p = params();
        let model = p.rate_model().unwrap();
        let gain = 1e-8;
        let base = p.noise_power() / gain;
        let mut last = 0.0;
        for i in 1..200 {
            let r = model.rate(1.0, base * i as f64 * 0.5 + base, gain);
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = params();
        p.decode_err = 0.6;
        assert!(p.validate().is_err());
        let mut p = params();
        p.blocklength = 0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.gamma0 = -1.0;
        assert!(p.rate_model().is_err());
    }
}
