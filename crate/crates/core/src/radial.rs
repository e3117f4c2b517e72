//! Radial shooting for the symmetric planar vortex.
//!
//! When all `l` components carry `N` vortices at the origin, `u_j = u` for
//! every `j` and the system collapses to the scalar ODE
//!
//! ```text
//! u'' + u'/r = (l+1)(e^u − 1),   u ~ 2N ln r + c at 0,   u → 0 at ∞.
//! ```
//!
//! Writing `u = 2N ln r + c + φ` gives a regular problem for `φ`; the
//! constant `c` is found by bisection between overshooting (`u > 0`) and
//! undershooting (`u' < 0`) trajectories.

use crate::error::{Result, VortexError};

const R0: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub l: usize,
    pub n: usize,
    /// Shooting constant `c` in `u ~ 2N ln r + c`.
    pub c: f64,
    pub dr: f64,
    /// Sample radii, starting at the small seed radius.
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// Largest radius up to which the bracketing shots agree.
    pub r_valid: f64,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Fate {
    Overshoot,
    Undershoot,
    /// Still monotone and negative at `r_max`.
    Undecided,
}

struct Shot {
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    fate: Fate,
}

/// RHS of the regular system in `(φ, φ')`.
fn rhs(lp1: f64, n: f64, c: f64, r: f64, y: [f64; 2]) -> [f64; 2] {
    let u = 2.0 * n * r.ln() + c + y[0];
    [y[1], lp1 * (u.exp() - 1.0) - y[1] / r]
}

fn shoot(lp1: f64, n: usize, c: f64, dr: f64, r_max: f64) -> Shot {
    let nf = n as f64;
    // Frobenius seed: φ = −(l+1)r²/4 + (l+1)e^c r^{2N+2}/(2N+2)²
    let k = (2 * n + 2) as f64;
    let mut y = [
        -lp1 * R0 * R0 / 4.0 + lp1 * c.exp() * R0.powf(k) / (k * k),
        -lp1 * R0 / 2.0 + lp1 * c.exp() * R0.powf(k - 1.0) / k,
    ];
    let mut r = R0;
    let mut shot = Shot {
        r: vec![],
        u: vec![],
        du: vec![],
        fate: Fate::Undecided,
    };
    loop {
        let u = 2.0 * nf * r.ln() + c + y[0];
        let du = 2.0 * nf / r + y[1];
        shot.r.push(r);
        shot.u.push(u);
        shot.du.push(du);
        if u > 0.0 {
            shot.fate = Fate::Overshoot;
            return shot;
        }
        if du < 0.0 {
            shot.fate = Fate::Undershoot;
            return shot;
        }
        if r >= r_max {
            return shot;
        }
        let f = |r: f64, y: [f64; 2]| rhs(lp1, nf, c, r, y);
        let k1 = f(r, y);
        let k2 = f(r + dr / 2.0, [y[0] + dr / 2.0 * k1[0], y[1] + dr / 2.0 * k1[1]]);
        let k3 = f(r + dr / 2.0, [y[0] + dr / 2.0 * k2[0], y[1] + dr / 2.0 * k2[1]]);
        let k4 = f(r + dr, [y[0] + dr * k3[0], y[1] + dr * k3[1]]);
        for i in 0..2 {
            y[i] += dr / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r = R0 + dr * shot.r.len() as f64;
    }
}

/// Solves the symmetric `N`-vortex profile for `l` components on `(0, r_max]`.
pub fn radial_profile(l: usize, n: usize, r_max: f64) -> Result<RadialProfile> {
    if l < 2 {
        return Err(VortexError::Domain(format!("need l >= 2, got {l}")));
    }
    if n == 0 {
        return Err(VortexError::Domain("the vacuum has no radial profile".into()));
    }
    let lp1 = (l + 1) as f64;
    let dr = 1e-3;
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    let fate = |c: f64| shoot(lp1, n, c, dr, r_max).fate;
    while fate(lo) == Fate::Overshoot {
        lo -= 10.0;
    }
    while fate(hi) != Fate::Overshoot {
        hi += 10.0;
        if hi > 200.0 {
            return Err(VortexError::NotConverged);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if fate(mid) == Fate::Overshoot {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let below = shoot(lp1, n, lo, dr, r_max);
    let above = shoot(lp1, n, hi, dr, r_max);
    let len = below.u.len().min(above.u.len());
    // the final sample of each shot is the one that decided its fate
    let split = (0..len - 1)
        .find(|&i| (below.u[i] - above.u[i]).abs() > 1e-8)
        .unwrap_or(len - 1);
    let r_valid = below.r[split.saturating_sub(1)];
    Ok(RadialProfile {
        l,
        n,
        c: 0.5 * (lo + hi),
        dr,
        r: below.r[..split].to_vec(),
        u: below.u[..split].to_vec(),
        du: below.du[..split].to_vec(),
        r_valid,
    })
}

impl RadialProfile {
    /// `u(r)` by cubic Hermite interpolation; `None` outside the trusted range.
    pub fn eval(&self, r: f64) -> Option<f64> {
        if !(r > 0.0) || r > self.r_valid {
            return None;
        }
        if r < self.r[0] {
            return Some(2.0 * self.n as f64 * r.ln() + self.c);
        }
        let i = (((r - self.r[0]) / self.dr) as usize).min(self.r.len() - 2);
        let h = self.r[i + 1] - self.r[i];
        let t = (r - self.r[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.u[i]
                + (t3 - 2.0 * t2 + t) * h * self.du[i]
                + (-2.0 * t3 + 3.0 * t2) * self.u[i + 1]
                + (t3 - t2) * h * self.du[i + 1],
        )
    }
}
