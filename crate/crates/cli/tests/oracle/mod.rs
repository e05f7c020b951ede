//! Reference kinematics written from the closed-form arc geometry, sharing
//! no code with the library. Each function returns the configuration
//! increment over `dt` directly so that finite differences do not lose
//! digits to the magnitude of the configuration.

use std::f64::consts::PI;

pub const L0: f64 = 0.03;
pub const L: f64 = 0.04;

/// (a/l, |b|, m, reference angle) per mode, in the order I, II, III.
pub const SPIRALS: [(f64, f64, f64, f64); 3] = [
    (2.325, 0.3165, 1.5, 0.0),
    (3.3041, 0.083, 1.0, 0.0),
    (2.4471, 0.2229, 0.75, PI),
];

/// Curvature rate per unit wheel speed of spiral mode `k` (0-based).
pub fn rate(k: usize, kappa: f64) -> f64 {
    let (a, b, m, theta_ref) = SPIRALS[k];
    let theta = PI + (kappa * L).abs() / m;
    let rho = a * L * (-b * (theta - theta_ref)).exp();
    m / (L * rho)
}

/// Planar rigid transform `(angle, x, y)`.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}

impl Frame {
    pub fn compose(&self, o: &Frame) -> Frame {
        let (s, c) = self.angle.sin_cos();
        Frame {
            angle: self.angle + o.angle,
            x: self.x + c * o.x - s * o.y,
            y: self.y + s * o.x + c * o.y,
        }
    }

    pub fn inverse(&self) -> Frame {
        let (s, c) = self.angle.sin_cos();
        Frame {
            angle: -self.angle,
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
        }
    }
}

/// Middle link to segment end: `side` is -1 for segment 1, +1 for 2.
pub fn arc(kappa: f64, side: f64) -> Frame {
    let alpha = kappa * L;
    let (along, across) = if alpha.abs() < 1e-4 {
        let a2 = alpha * alpha;
        (L * (1.0 - a2 / 6.0 + a2 * a2 / 120.0), L * alpha / 2.0 * (1.0 - a2 / 12.0))
    } else {
        (alpha.sin() / kappa, 2.0 * (alpha / 2.0).sin().powi(2) / kappa)
    };
    Frame {
        angle: side * alpha,
        x: side * (L0 / 2.0 + along),
        y: across,
    }
}

/// Configuration `(x, y, phi, kappa1, kappa2)`.
pub type Q = [f64; 5];

fn side(seg: usize) -> f64 {
    if seg == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Exact motion under a constant body-frame twist `(u, v, r)`.
pub fn rigid_increment(q: &Q, twist: [f64; 3], dt: f64) -> Q {
    let [u, v, r] = twist;
    let th = r * dt;
    let (sn, vers) = if th.abs() < 1e-8 {
        (dt * (1.0 - th * th / 6.0), dt * th / 2.0)
    } else {
        ((th).sin() / r, 2.0 * (th / 2.0).sin().powi(2) / r)
    };
    let bx = sn * u - vers * v;
    let by = vers * u + sn * v;
    let (s, c) = q[2].sin_cos();
    [c * bx - s * by, s * bx + c * by, th, 0.0, 0.0]
}

/// Curvature increments of the bent segments by classic RK4, with the rate
/// evaluated at the bent curvature (mean of both for mode III).
fn bend_increment(q: &Q, mode: usize, bent: &[usize], speed: f64, dt: f64) -> f64 {
    let at = |d: f64| {
        let k = bent.iter().map(|&j| q[3 + j] + d).sum::<f64>() / bent.len() as f64;
        rate(mode, k) * speed
    };
    let k1 = at(0.0);
    let k2 = at(0.5 * dt * k1);
    let k3 = at(0.5 * dt * k2);
    let k4 = at(dt * k3);
    dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
}

/// One soft input: spiral `mode` bends `bent` at `speed` while the end frame
/// of `anchor` stays fixed in the world (`None`: the body stays fixed).
pub fn soft_increment(q: &Q, mode: usize, bent: &[usize], anchor: Option<usize>, speed: f64, dt: f64) -> Q {
    let dk = bend_increment(q, mode, bent, speed, dt);
    let mut out = [0.0; 5];
    for &j in bent {
        out[3 + j] = dk;
    }
    if let Some(j) = anchor {
        // body' = body * T_j(k) * T_j(k')^-1; the translation change is the
        // body rotation applied to the change of T_j^-1 seen from T_j(k).
        let before = arc(q[3 + j], side(j));
        let after = arc(q[3 + j] + dk, side(j));
        let rel = before.compose(&after.inverse());
        let (s, c) = q[2].sin_cos();
        out[0] = c * rel.x - s * rel.y;
        out[1] = s * rel.x + c * rel.y;
        out[2] = -side(j) * L * dk;
    }
    out
}

/// Increment over `dt` for stiffness `(s1, s2)` and input
/// `(v1, v2, u0, v0, r0)`, the soft columns superposed.
pub fn increment(q: &Q, s: (bool, bool), v: &[f64; 5], dt: f64) -> Q {
    let add = |a: Q, b: Q| std::array::from_fn(|i| a[i] + b[i]);
    match s {
        (false, false) => rigid_increment(q, [v[2], v[3], v[4]], dt),
        (false, true) => add(
            soft_increment(q, 1, &[1], Some(1), v[0], dt),
            soft_increment(q, 0, &[1], None, v[1], dt),
        ),
        (true, false) => add(
            soft_increment(q, 0, &[0], None, v[0], dt),
            soft_increment(q, 1, &[0], Some(0), v[1], dt),
        ),
        (true, true) => add(
            soft_increment(q, 2, &[0, 1], Some(1), v[0], dt),
            soft_increment(q, 2, &[0, 1], Some(0), v[1], dt),
        ),
    }
}
