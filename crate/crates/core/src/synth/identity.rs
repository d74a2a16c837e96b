use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Body proportions and gait dynamics of one synthetic walker, in canvas
/// pixels at camera scale 1.
///
/// Proportions are drawn from narrow ranges and arm swing from wide ones,
/// so most of what separates two identities is how their arms move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub head_radius: f64,
    pub torso_half_width: f64,
    pub torso_height: f64,
    pub upper_arm: f64,
    pub lower_arm: f64,
    pub arm_radius: f64,
    pub upper_leg: f64,
    pub lower_leg: f64,
    pub leg_radius: f64,
    /// Peak upper-arm swing angle from vertical.
    pub arm_amplitude: f64,
    /// Constant forward bend of the forearm relative to the upper arm.
    pub elbow_bend: f64,
    pub leg_amplitude: f64,
    /// Arm phase relative to the opposite leg.
    pub arm_phase: f64,
    /// Radians of gait phase advanced per frame.
    pub cadence: f64,
}

pub const HEAD_RADIUS: (f64, f64) = (5.5, 6.5);
pub const TORSO_HALF_WIDTH: (f64, f64) = (9.0, 10.5);
pub const TORSO_HEIGHT: (f64, f64) = (32.0, 36.0);
pub const UPPER_ARM: (f64, f64) = (15.0, 17.0);
pub const LOWER_ARM: (f64, f64) = (13.0, 15.0);
pub const UPPER_LEG: (f64, f64) = (23.0, 25.0);
pub const LOWER_LEG: (f64, f64) = (22.0, 24.0);
pub const ARM_AMPLITUDE: (f64, f64) = (0.05, 1.3);
pub const ELBOW_BEND: (f64, f64) = (0.0, 1.1);
pub const LEG_AMPLITUDE: (f64, f64) = (0.38, 0.46);
pub const ARM_PHASE: (f64, f64) = (-0.8, 0.8);
/// Gait period in whole frames, so sequences repeat exactly.
pub const PERIOD_FRAMES: (usize, usize) = (16, 24);

impl IdentityParams {
    /// Frames per gait cycle.
    pub fn period(&self) -> f64 {
        TAU / self.cadence
    }

    pub fn is_valid(&self) -> bool {
        let lengths = [
            self.head_radius,
            self.torso_half_width,
            self.torso_height,
            self.upper_arm,
            self.lower_arm,
            self.arm_radius,
            self.upper_leg,
            self.lower_leg,
            self.leg_radius,
            self.cadence,
        ];
        let amps = [self.arm_amplitude, self.leg_amplitude];
        lengths.iter().all(|&l| l > 0.0 && l.is_finite()) && amps.iter().all(|a| (0.0..=FRAC_PI_2).contains(a))
    }

    /// Same walker with all swing removed.
    pub fn frozen(mut self) -> Self {
        self.arm_amplitude = 0.0;
        self.leg_amplitude = 0.0;
        self
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

pub fn gen_identity(seed: u64) -> IdentityParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = rng.random_range(PERIOD_FRAMES.0..=PERIOD_FRAMES.1);
    IdentityParams {
        head_radius: draw(&mut rng, HEAD_RADIUS),
        torso_half_width: draw(&mut rng, TORSO_HALF_WIDTH),
        torso_height: draw(&mut rng, TORSO_HEIGHT),
        upper_arm: draw(&mut rng, UPPER_ARM),
        lower_arm: draw(&mut rng, LOWER_ARM),
        arm_radius: 2.6,
        upper_leg: draw(&mut rng, UPPER_LEG),
        lower_leg: draw(&mut rng, LOWER_LEG),
        leg_radius: 3.4,
        arm_amplitude: draw(&mut rng, ARM_AMPLITUDE),
        elbow_bend: draw(&mut rng, ELBOW_BEND),
        leg_amplitude: draw(&mut rng, LEG_AMPLITUDE),
        arm_phase: draw(&mut rng, ARM_PHASE),
        cadence: TAU / period as f64,
    }
}
