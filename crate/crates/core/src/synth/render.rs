use std::f64::consts::{FRAC_PI_4, FRAC_PI_2, PI, TAU};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IdentityParams, SynthError};
use crate::mask::{BodyPart, LabelMap};

pub const CANVAS_WIDTH: usize = 96;
pub const CANVAS_HEIGHT: usize = 128;
const GROUND_ROW: f64 = 122.0;
const TORSO_DEPTH_RATIO: f64 = 0.55;
/// Peak knee flexion, reached mid-swing.
const KNEE_FLEX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Walking towards the camera.
    Frontal,
    Oblique,
    /// Walking across the image, left to right.
    Lateral,
}

impl View {
    pub fn azimuth(self) -> f64 {
        match self {
            View::Frontal => 0.0,
            View::Oblique => FRAC_PI_4,
            View::Lateral => FRAC_PI_2,
        }
    }

    /// Nominal CASIA-style view angle in degrees.
    pub fn degrees(self) -> u32 {
        match self {
            View::Frontal => 0,
            View::Oblique => 45,
            View::Lateral => 90,
        }
    }
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frontal" => Ok(View::Frontal),
            "oblique" => Ok(View::Oblique),
            "lateral" => Ok(View::Lateral),
            _ => Err(format!("unknown view {s:?}, expected frontal|oblique|lateral")),
        }
    }
}

/// How one sequence is captured. The seed drives the starting gait phase,
/// the per-sequence appearance jitter and pixel dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub view: View,
    pub scale: f64,
    pub mirror: bool,
    /// Probability of dropping each figure pixel, at most 0.2.
    pub dropout: f64,
    /// Relative spread applied to torso width and head radius per sequence,
    /// standing in for clothing and hair.
    pub appearance_jitter: f64,
    pub seed: u64,
}

impl CameraSpec {
    pub fn new(view: View) -> Self {
        Self {
            view,
            scale: 1.0,
            mirror: false,
            dropout: 0.0,
            appearance_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SynthError::InvalidCamera(format!("scale {} must be positive", self.scale)));
        }
        if !(0.0..=0.2).contains(&self.dropout) {
            return Err(SynthError::InvalidCamera(format!("dropout {} outside [0, 0.2]", self.dropout)));
        }
        if !(0.0..0.5).contains(&self.appearance_jitter) {
            return Err(SynthError::InvalidCamera(format!(
                "appearance_jitter {} outside [0, 0.5)",
                self.appearance_jitter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct P3 {
    x: f64,
    y: f64,
    z: f64,
}

impl P3 {
    fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Point reached by walking `len` along a sagittal direction that is
    /// `angle` radians forward of straight down.
    fn limb(self, len: f64, angle: f64) -> Self {
        P3::new(self.x, self.y - len * angle.cos(), self.z + len * angle.sin())
    }
}

enum Shape {
    Capsule { a: (f64, f64), b: (f64, f64), r: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Shape {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Capsule { a, b, r } => (a.0.min(b.0) - r, a.0.max(b.0) + r, a.1.min(b.1) - r, a.1.max(b.1) + r),
            Shape::Rect { x0, x1, y0, y1 } => (x0, x1, y0, y1),
        }
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Shape::Capsule { a, b, r } => {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                };
                let (cx, cy) = (a.0 + t * dx - px, a.1 + t * dy - py);
                cx * cx + cy * cy <= r * r
            }
            Shape::Rect { x0, x1, y0, y1 } => px >= x0 && px <= x1 && py >= y0 && py <= y1,
        }
    }
}

struct Projector {
    cos: f64,
    sin: f64,
    scale: f64,
    mirror: bool,
}

impl Projector {
    fn screen(&self, p: P3) -> (f64, f64) {
        let sx = self.scale * (p.x * self.cos + p.z * self.sin);
        let sx = if self.mirror { -sx } else { sx };
        (CANVAS_WIDTH as f64 / 2.0 + sx, GROUND_ROW - self.scale * p.y)
    }

    fn depth(&self, p: P3) -> f64 {
        p.z * self.cos - p.x * self.sin
    }
}

struct Sequence {
    body: IdentityParams,
    period: usize,
    offset: usize,
    rng: ChaCha8Rng,
}

impl Sequence {
    fn new(params: &IdentityParams, camera: &CameraSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(camera.seed);
        let period = params.period().round().max(1.0) as usize;
        let offset = rng.random_range(0..period);
        let mut body = *params;
        let j = camera.appearance_jitter;
        if j > 0.0 {
            body.torso_half_width *= 1.0 + rng.random_range(-j..=j);
            body.head_radius *= 1.0 + rng.random_range(-j..=j);
        }
        Self {
            body,
            period,
            offset,
            rng,
        }
    }

    /// Gait phase of frame `t`; exact multiples of the period give
    /// bit-identical angles.
    fn phase(&self, t: usize) -> f64 {
        TAU * ((t + self.offset) % self.period) as f64 / self.period as f64
    }
}

fn figure(body: &IdentityParams, phase: f64, proj: &Projector) -> Vec<(f64, BodyPart, Shape)> {
    let b = body;
    let hip_y = b.upper_leg + b.lower_leg;
    let shoulder_y = hip_y + b.torso_height;
    let shoulder_x = b.torso_half_width - 0.5 * b.arm_radius;
    let hip_x = 0.5 * b.torso_half_width;
    let s = proj.scale;
    let mut parts = Vec::with_capacity(10);

    let half_w = s * (b.torso_half_width * proj.cos.abs() + TORSO_DEPTH_RATIO * b.torso_half_width * proj.sin.abs());
    let centre = proj.screen(P3::new(0.0, 0.0, 0.0)).0;
    parts.push((
        0.0,
        BodyPart::Torso,
        Shape::Rect {
            x0: centre - half_w,
            x1: centre + half_w,
            y0: GROUND_ROW - s * shoulder_y,
            y1: GROUND_ROW - s * hip_y,
        },
    ));
    let head = proj.screen(P3::new(0.0, shoulder_y + 1.0 + b.head_radius, 0.0));
    parts.push((
        0.0,
        BodyPart::Head,
        Shape::Capsule {
            a: head,
            b: head,
            r: s * b.head_radius,
        },
    ));

    let mut segment = |p0: P3, p1: P3, r: f64, part: BodyPart| {
        let mid = P3::new((p0.x + p1.x) / 2.0, (p0.y + p1.y) / 2.0, (p0.z + p1.z) / 2.0);
        parts.push((
            proj.depth(mid),
            part,
            Shape::Capsule {
                a: proj.screen(p0),
                b: proj.screen(p1),
                r: s * r,
            },
        ));
    };

    for (side, leg_phase) in [(-1.0, phase), (1.0, phase + PI)] {
        let thigh = b.leg_amplitude * leg_phase.sin();
        let flex = KNEE_FLEX * (0.5 - 0.5 * leg_phase.cos()) * (b.leg_amplitude / 0.42);
        let hip = P3::new(side * hip_x, hip_y, 0.0);
        let knee = hip.limb(b.upper_leg, thigh);
        let ankle = knee.limb(b.lower_leg, thigh - flex);
        segment(hip, knee, b.leg_radius, BodyPart::UpperLegs);
        segment(knee, ankle, b.leg_radius * 0.85, BodyPart::LowerLegs);

        // Each arm swings against the leg on its own side.
        let swing = b.arm_amplitude * (leg_phase + PI + b.arm_phase).sin();
        let shoulder = P3::new(side * shoulder_x, shoulder_y, 0.0);
        let elbow = shoulder.limb(b.upper_arm, swing);
        let wrist = elbow.limb(b.lower_arm, swing + b.elbow_bend);
        segment(shoulder, elbow, b.arm_radius, BodyPart::UpperArms);
        segment(elbow, wrist, b.arm_radius * 0.9, BodyPart::LowerArms);
    }
    // Far to near; the stable sort keeps the torso under limbs level with it.
    parts.sort_by(|a, b| a.0.total_cmp(&b.0));
    parts
}

/// Renders `frames` label maps of `params` walking as seen by `camera`.
///
/// Parts are painted far to near, so in frontal view an arm swung behind
/// the body is covered by the torso while the forward arm is painted over
/// it. The binary union is then nearly blind to arm swing, but the label
/// map keeps the forward arm's pixels.
pub fn render_sequence(params: &IdentityParams, camera: &CameraSpec, frames: usize) -> Result<Vec<LabelMap>, SynthError> {
    if frames == 0 {
        return Err(SynthError::NoFrames);
    }
    if !params.is_valid() {
        return Err(SynthError::InvalidIdentity);
    }
    camera.validate()?;
    let az = camera.view.azimuth();
    let proj = Projector {
        cos: az.cos(),
        sin: az.sin(),
        scale: camera.scale,
        mirror: camera.mirror,
    };
    let mut seq = Sequence::new(params, camera);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let parts = figure(&seq.body, seq.phase(t), &proj);
        let mut labels = vec![0u8; CANVAS_WIDTH * CANVAS_HEIGHT];
        for (_, part, shape) in &parts {
            let (x0, x1, y0, y1) = shape.bounds();
            if x0 < 0.0 || y0 < 0.0 || x1 > CANVAS_WIDTH as f64 || y1 > CANVAS_HEIGHT as f64 {
                return Err(SynthError::InvalidCanvas { frame: t });
            }
            let (cx0, cx1) = (x0.floor() as usize, (x1.ceil() as usize).min(CANVAS_WIDTH));
            let (cy0, cy1) = (y0.floor() as usize, (y1.ceil() as usize).min(CANVAS_HEIGHT));
            for y in cy0..cy1 {
                for x in cx0..cx1 {
                    if shape.contains(x as f64 + 0.5, y as f64 + 0.5) {
                        labels[y * CANVAS_WIDTH + x] = part.id();
                    }
                }
            }
        }
        if camera.dropout > 0.0 {
            for l in labels.iter_mut().filter(|l| **l != 0) {
                if seq.rng.random::<f64>() < camera.dropout {
                    *l = 0;
                }
            }
        }
        out.push(LabelMap::new(CANVAS_WIDTH, CANVAS_HEIGHT, labels).expect("canvas labels are valid"));
    }
    Ok(out)
}
