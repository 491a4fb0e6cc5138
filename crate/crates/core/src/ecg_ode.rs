//! Dynamical ECG model: a point circling the unit limit cycle in the (x, y)
//! plane drives z through five Gaussian bumps, one per characteristic wave.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{interp_circular, min_max_normalize, resample_periodic, EcgTrace, Wave};

/// Number of scaling values driving one piece: amplitudes, widths, angles.
pub const N_SCALES: usize = 15;
/// Largest additive angle nudge, reached at `p = ±1`.
pub const ANGLE_NUDGE: f64 = 10.0 * PI / 180.0;
pub const MIN_WIDTH: f64 = 0.01;
pub const MIN_STEPS: usize = 500;
pub const DEFAULT_STEPS: usize = 2000;
pub const PIECE_LEN: usize = 200;
const DIVERGENCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub amplitude: f64,
    /// Gaussian width, radians.
    pub width: f64,
    /// Position on the cycle, radians.
    pub angle: f64,
}

/// Default wave shapes of a normal beat.
pub struct OdeDefaults;

impl OdeDefaults {
    pub const AMPLITUDES: [f64; 5] = [5.0, -100.0, 480.0, -120.0, 8.0];
    pub const WIDTHS: [f64; 5] = [0.25, 0.1, 0.1, 0.1, 0.4];
    pub const ANGLES_DEG: [f64; 5] = [-15.0, 25.0, 40.0, 60.0, 135.0];

    pub fn peaks() -> [PeakParams; 5] {
        std::array::from_fn(|i| PeakParams {
            amplitude: Self::AMPLITUDES[i],
            width: Self::WIDTHS[i],
            angle: Self::ANGLES_DEG[i].to_radians(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    /// P, Q, R, S, T in that order.
    pub peaks: [PeakParams; 5],
    /// Angular velocity, rad/s.
    pub omega: f64,
    /// Left shift of the generated cycle, seconds.
    pub tau: f64,
}

impl OdeParams {
    pub fn new(peaks: [PeakParams; 5], omega: f64, tau: f64) -> Result<Self> {
        let p = OdeParams { peaks, omega, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn defaults(omega: f64) -> Result<Self> {
        Self::new(OdeDefaults::peaks(), omega, 0.0)
    }

    pub fn peak(&self, wave: Wave) -> &PeakParams {
        &self.peaks[wave.index()]
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid(format!("angular velocity must be positive, got {}", self.omega)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("lag must be non-negative, got {}", self.tau)));
        }
        for (w, pk) in Wave::ALL.iter().zip(&self.peaks) {
            if !pk.amplitude.is_finite() {
                return Err(Error::invalid(format!("{w} amplitude is not finite")));
            }
            if !(pk.width > 0.0 && pk.width.is_finite()) {
                return Err(Error::invalid(format!("{w} width must be positive, got {}", pk.width)));
            }
            if !(-PI..=PI).contains(&pk.angle) {
                return Err(Error::invalid(format!("{w} angle {} outside [-pi, pi]", pk.angle)));
            }
        }
        if !self.peaks.windows(2).all(|w| w[0].angle < w[1].angle) {
            return Err(Error::invalid("peak angles must increase from P to T"));
        }
        Ok(())
    }
}

/// Maps 15 values in `[-1, 1]` (five amplitudes, five widths, five angles,
/// each ordered P to T) onto wave parameters around the defaults.
pub fn scale_defaults(p: &[f64]) -> Result<[PeakParams; 5]> {
    if p.len() != N_SCALES {
        return Err(Error::invalid(format!("expected {N_SCALES} scaling values, got {}", p.len())));
    }
    if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("scaling value {i} = {v} outside [-1, 1]")));
    }
    let d = OdeDefaults::peaks();
    Ok(std::array::from_fn(|i| PeakParams {
        amplitude: d[i].amplitude * (1.0 + p[i]),
        width: (d[i].width * (1.0 + p[5 + i])).max(MIN_WIDTH),
        angle: d[i].angle + p[10 + i] * ANGLE_NUDGE,
    }))
}

/// How the angular distance to a wave centre is reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleWrap {
    /// Into `(-pi, pi]`: symmetric bumps.
    #[default]
    Symmetric,
    /// Into `[0, 2pi)`: one-sided bumps.
    Literal,
}

impl AngleWrap {
    pub fn apply(self, d: f64) -> f64 {
        let tau = 2.0 * PI;
        match self {
            AngleWrap::Literal => d.rem_euclid(tau),
            AngleWrap::Symmetric => {
                let r = d % tau;
                if r > PI {
                    r - tau
                } else if r <= -PI {
                    r + tau
                } else {
                    r
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
}

impl OdeState {
    /// Starting point at angle -pi, away from every default wave.
    pub const START: OdeState = OdeState {
        x: -1.0,
        y: 0.0,
        z: 0.0,
        t: 0.0,
    };

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

pub fn rhs(s: &OdeState, eta: &OdeParams) -> (f64, f64, f64) {
    rhs_with(s, eta, AngleWrap::Symmetric)
}

pub fn rhs_with(s: &OdeState, eta: &OdeParams, wrap: AngleWrap) -> (f64, f64, f64) {
    let alpha = 1.0 - s.x.hypot(s.y);
    let theta = s.y.atan2(s.x);
    let w = eta.omega;
    let drive: f64 = eta
        .peaks
        .iter()
        .map(|pk| {
            let d = wrap.apply(theta - pk.angle);
            pk.amplitude * d * (-d * d / (2.0 * pk.width * pk.width)).exp()
        })
        .sum();
    (alpha * s.x - w * s.y, alpha * s.y + w * s.x, -drive - s.z)
}

/// Forward-Euler trajectory over `cycles` periods; entry `i` is the state
/// before step `i`.
pub fn integrate(eta: &OdeParams, steps_per_cycle: usize, cycles: usize, wrap: AngleWrap) -> Result<Vec<OdeState>> {
    if steps_per_cycle < MIN_STEPS {
        return Err(Error::invalid(format!(
            "need at least {MIN_STEPS} steps per cycle, got {steps_per_cycle}"
        )));
    }
    eta.validate()?;
    let dt = eta.period() / steps_per_cycle as f64;
    let total = steps_per_cycle * cycles;
    let mut out = Vec::with_capacity(total);
    let mut s = OdeState::START;
    for step in 0..total {
        out.push(s);
        let (dx, dy, dz) = rhs_with(&s, eta, wrap);
        s = OdeState {
            x: s.x + dt * dx,
            y: s.y + dt * dy,
            z: s.z + dt * dz,
            t: (step + 1) as f64 * dt,
        };
        let big = s.x.abs().max(s.y.abs()).max(s.z.abs());
        if !(big <= DIVERGENCE) {
            return Err(Error::Diverged { step: step + 1 });
        }
    }
    Ok(out)
}

/// z over one period on a uniform grid of `steps_per_cycle` samples.
pub fn solve_single_cycle(eta: &OdeParams, steps_per_cycle: usize) -> Result<EcgTrace> {
    solve_single_cycle_with(eta, steps_per_cycle, AngleWrap::Symmetric)
}

pub fn solve_single_cycle_with(eta: &OdeParams, steps_per_cycle: usize, wrap: AngleWrap) -> Result<EcgTrace> {
    let traj = integrate(eta, steps_per_cycle, 1, wrap)?;
    let rate = steps_per_cycle as f64 / eta.period();
    EcgTrace::new(traj.iter().map(|s| s.z).collect(), rate)
}

/// Circular left shift by `tau` seconds followed by resampling of the period
/// to `target_len` points.
pub fn shift_and_resample(trace: &EcgTrace, tau: f64, target_len: usize) -> Result<EcgTrace> {
    if target_len < 2 {
        return Err(Error::invalid(format!("target length must be at least 2, got {target_len}")));
    }
    if trace.is_empty() {
        return Err(Error::invalid("cannot resample an empty trace"));
    }
    let period = trace.duration();
    if !(0.0..period).contains(&tau) {
        return Err(Error::invalid(format!("lag {tau} outside [0, {period})")));
    }
    let offset = tau * trace.sample_rate;
    let shifted: Vec<f64> = if offset == 0.0 {
        trace.samples.clone()
    } else {
        (0..trace.len())
            .map(|i| interp_circular(&trace.samples, i as f64 + offset))
            .collect()
    };
    let samples = if target_len == shifted.len() {
        shifted
    } else {
        resample_periodic(&shifted, target_len)
    };
    EcgTrace::new(samples, target_len as f64 / period)
}

/// Knobs of the piece generator beyond the physiological parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PieceOptions {
    pub steps_per_cycle: usize,
    pub length: usize,
    pub wrap: AngleWrap,
}

impl Default for PieceOptions {
    fn default() -> Self {
        PieceOptions {
            steps_per_cycle: DEFAULT_STEPS,
            length: PIECE_LEN,
            wrap: AngleWrap::Symmetric,
        }
    }
}

/// One normalized ECG cycle in `[0, 1]` of length 200.
pub fn generate_piece(p: &[f64], omega: f64, tau: f64) -> Result<Vec<f64>> {
    generate_piece_with(p, omega, tau, &PieceOptions::default())
}

pub fn generate_piece_with(p: &[f64], omega: f64, tau: f64, opts: &PieceOptions) -> Result<Vec<f64>> {
    let eta = OdeParams::new(scale_defaults(p)?, omega, tau)?;
    let trace = solve_single_cycle_with(&eta, opts.steps_per_cycle, opts.wrap)?;
    let piece = shift_and_resample(&trace, tau, opts.length)?;
    Ok(min_max_normalize(&piece.samples))
}
