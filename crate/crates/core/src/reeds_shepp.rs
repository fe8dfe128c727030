//! Reeds-Shepp shortest paths.
//!
//! Candidate words are generated in the unit-radius frame of the start pose
//! from the five base families (CSC, CCC, CCCC, CCSC, CCSCC). Each base
//! formula is combined with the time-flip, reflection and backward
//! symmetries, which together cover the classic 48-word table.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::vehicle::CarState;

const ZERO: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Turn {
    L,
    S,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gear {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsPrimitive {
    pub turn: Turn,
    pub gear: Gear,
    /// Length in units of the turning radius, nonnegative.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsPath {
    pub primitives: Vec<RsPrimitive>,
    /// Sum of primitive lengths, in units of the turning radius.
    pub total_length: f64,
    pub radius: f64,
}

impl RsPath {
    pub fn word(&self) -> String {
        self.to_string()
    }

    pub fn length_meters(&self) -> f64 {
        self.total_length * self.radius
    }

    pub fn cusps(&self) -> usize {
        self.primitives.windows(2).filter(|w| w[0].gear != w[1].gear).count()
    }
}

impl fmt::Display for RsPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.primitives {
            let t = match p.turn {
                Turn::L => 'L',
                Turn::S => 'S',
                Turn::R => 'R',
            };
            let g = match p.gear {
                Gear::Forward => '+',
                Gear::Backward => '-',
            };
            write!(f, "{t}{g}")?;
        }
        Ok(())
    }
}

fn mod2pi(x: f64) -> f64 {
    let v = x.rem_euclid(2.0 * PI);
    if v > PI {
        v - 2.0 * PI
    } else {
        v
    }
}

fn polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), y.atan2(x))
}

fn tau_omega(u: f64, v: f64, xi: f64, eta: f64, phi: f64) -> (f64, f64) {
    let delta = mod2pi(u - v);
    let a = u.sin() - delta.sin();
    let b = u.cos() - delta.cos() - 1.0;
    let t1 = (eta * a - xi * b).atan2(xi * a + eta * b);
    let t2 = 2.0 * (delta.cos() - v.cos() - u.cos()) + 3.0;
    let tau = if t2 < 0.0 { mod2pi(t1 + PI) } else { mod2pi(t1) };
    let omega = mod2pi(tau - u + v - phi);
    (tau, omega)
}

fn lp_sp_lp(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let (u, t) = polar(x - phi.sin(), y - 1.0 + phi.cos());
    if t >= -ZERO {
        let v = mod2pi(phi - t);
        if v >= -ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_sp_rp(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let (u1, t1) = polar(x + phi.sin(), y - 1.0 - phi.cos());
    let u1 = u1 * u1;
    if u1 >= 4.0 {
        let u = (u1 - 4.0).sqrt();
        let theta = 2.0_f64.atan2(u);
        let t = mod2pi(t1 + theta);
        let v = mod2pi(t - phi);
        if t >= -ZERO && v >= -ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_rm_l(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (u1, theta) = polar(xi, eta);
    if u1 <= 4.0 {
        let u = -2.0 * (0.25 * u1).asin();
        let t = mod2pi(theta + 0.5 * u + PI);
        let v = mod2pi(phi - t + u);
        if t >= -ZERO && u <= ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_rup_lum_rm(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = 0.25 * (2.0 + xi.hypot(eta));
    if rho <= 1.0 {
        let u = rho.acos();
        let (t, v) = tau_omega(u, -u, xi, eta, phi);
        if t >= -ZERO && v <= ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_rum_lum_rp(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let rho = (20.0 - xi * xi - eta * eta) / 16.0;
    if (0.0..=1.0).contains(&rho) {
        let u = -rho.acos();
        if u >= -FRAC_PI_2 {
            let (t, v) = tau_omega(u, u, xi, eta, phi);
            if t >= -ZERO && v >= -ZERO {
                return Some([t, u, v]);
            }
        }
    }
    None
}

fn lp_rm_sm_lm(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x - phi.sin();
    let eta = y - 1.0 + phi.cos();
    let (rho, theta) = polar(xi, eta);
    if rho >= 2.0 {
        let r = (rho * rho - 4.0).sqrt();
        let u = 2.0 - r;
        let t = mod2pi(theta + r.atan2(-2.0));
        let v = mod2pi(phi - FRAC_PI_2 - t);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_rm_sm_rm(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, theta) = polar(-eta, xi);
    if rho >= 2.0 {
        let t = theta;
        let u = 2.0 - rho;
        let v = mod2pi(t + FRAC_PI_2 - phi);
        if t >= -ZERO && u <= ZERO && v <= ZERO {
            return Some([t, u, v]);
        }
    }
    None
}

fn lp_rm_s_lm_rp(x: f64, y: f64, phi: f64) -> Option<[f64; 3]> {
    let xi = x + phi.sin();
    let eta = y - 1.0 - phi.cos();
    let (rho, _) = polar(xi, eta);
    if rho >= 2.0 {
        let u = 4.0 - (rho * rho - 4.0).sqrt();
        if u <= ZERO {
            let t = mod2pi(((4.0 - u) * xi - 2.0 * eta).atan2(-2.0 * xi + (u - 4.0) * eta));
            let v = mod2pi(t - phi);
            if t >= -ZERO && v >= -ZERO {
                return Some([t, u, v]);
            }
        }
    }
    None
}

use Turn::{L, R, S};

/// Raw candidate: turn pattern with signed lengths.
struct Candidate {
    turns: &'static [Turn],
    lengths: Vec<f64>,
}

fn push(out: &mut Vec<Candidate>, turns: &'static [Turn], lengths: Vec<f64>) {
    out.push(Candidate { turns, lengths });
}

fn csc(x: f64, y: f64, phi: f64, out: &mut Vec<Candidate>) {
    const LSL: &[Turn] = &[L, S, L];
    const RSR: &[Turn] = &[R, S, R];
    const LSR: &[Turn] = &[L, S, R];
    const RSL: &[Turn] = &[R, S, L];
    if let Some([t, u, v]) = lp_sp_lp(x, y, phi) {
        push(out, LSL, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_sp_lp(-x, y, -phi) {
        push(out, LSL, vec![-t, -u, -v]);
    }
    if let Some([t, u, v]) = lp_sp_lp(x, -y, -phi) {
        push(out, RSR, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_sp_lp(-x, -y, phi) {
        push(out, RSR, vec![-t, -u, -v]);
    }
    if let Some([t, u, v]) = lp_sp_rp(x, y, phi) {
        push(out, LSR, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_sp_rp(-x, y, -phi) {
        push(out, LSR, vec![-t, -u, -v]);
    }
    if let Some([t, u, v]) = lp_sp_rp(x, -y, -phi) {
        push(out, RSL, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_sp_rp(-x, -y, phi) {
        push(out, RSL, vec![-t, -u, -v]);
    }
}

fn ccc(x: f64, y: f64, phi: f64, out: &mut Vec<Candidate>) {
    const LRL: &[Turn] = &[L, R, L];
    const RLR: &[Turn] = &[R, L, R];
    if let Some([t, u, v]) = lp_rm_l(x, y, phi) {
        push(out, LRL, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_l(-x, y, -phi) {
        push(out, LRL, vec![-t, -u, -v]);
    }
    if let Some([t, u, v]) = lp_rm_l(x, -y, -phi) {
        push(out, RLR, vec![t, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_l(-x, -y, phi) {
        push(out, RLR, vec![-t, -u, -v]);
    }
    let xb = x * phi.cos() + y * phi.sin();
    let yb = x * phi.sin() - y * phi.cos();
    if let Some([t, u, v]) = lp_rm_l(xb, yb, phi) {
        push(out, LRL, vec![v, u, t]);
    }
    if let Some([t, u, v]) = lp_rm_l(-xb, yb, -phi) {
        push(out, LRL, vec![-v, -u, -t]);
    }
    if let Some([t, u, v]) = lp_rm_l(xb, -yb, -phi) {
        push(out, RLR, vec![v, u, t]);
    }
    if let Some([t, u, v]) = lp_rm_l(-xb, -yb, phi) {
        push(out, RLR, vec![-v, -u, -t]);
    }
}

fn cccc(x: f64, y: f64, phi: f64, out: &mut Vec<Candidate>) {
    const LRLR: &[Turn] = &[L, R, L, R];
    const RLRL: &[Turn] = &[R, L, R, L];
    if let Some([t, u, v]) = lp_rup_lum_rm(x, y, phi) {
        push(out, LRLR, vec![t, u, -u, v]);
    }
    if let Some([t, u, v]) = lp_rup_lum_rm(-x, y, -phi) {
        push(out, LRLR, vec![-t, -u, u, -v]);
    }
    if let Some([t, u, v]) = lp_rup_lum_rm(x, -y, -phi) {
        push(out, RLRL, vec![t, u, -u, v]);
    }
    if let Some([t, u, v]) = lp_rup_lum_rm(-x, -y, phi) {
        push(out, RLRL, vec![-t, -u, u, -v]);
    }
    if let Some([t, u, v]) = lp_rum_lum_rp(x, y, phi) {
        push(out, LRLR, vec![t, u, u, v]);
    }
    if let Some([t, u, v]) = lp_rum_lum_rp(-x, y, -phi) {
        push(out, LRLR, vec![-t, -u, -u, -v]);
    }
    if let Some([t, u, v]) = lp_rum_lum_rp(x, -y, -phi) {
        push(out, RLRL, vec![t, u, u, v]);
    }
    if let Some([t, u, v]) = lp_rum_lum_rp(-x, -y, phi) {
        push(out, RLRL, vec![-t, -u, -u, -v]);
    }
}

fn ccsc(x: f64, y: f64, phi: f64, out: &mut Vec<Candidate>) {
    const LRSL: &[Turn] = &[L, R, S, L];
    const RLSR: &[Turn] = &[R, L, S, R];
    const LRSR: &[Turn] = &[L, R, S, R];
    const RLSL: &[Turn] = &[R, L, S, L];
    const LSRL: &[Turn] = &[L, S, R, L];
    const RSLR: &[Turn] = &[R, S, L, R];
    const RSRL: &[Turn] = &[R, S, R, L];
    const LSLR: &[Turn] = &[L, S, L, R];
    let h = FRAC_PI_2;
    if let Some([t, u, v]) = lp_rm_sm_lm(x, y, phi) {
        push(out, LRSL, vec![t, -h, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(-x, y, -phi) {
        push(out, LRSL, vec![-t, h, -u, -v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(x, -y, -phi) {
        push(out, RLSR, vec![t, -h, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(-x, -y, phi) {
        push(out, RLSR, vec![-t, h, -u, -v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(x, y, phi) {
        push(out, LRSR, vec![t, -h, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(-x, y, -phi) {
        push(out, LRSR, vec![-t, h, -u, -v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(x, -y, -phi) {
        push(out, RLSL, vec![t, -h, u, v]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(-x, -y, phi) {
        push(out, RLSL, vec![-t, h, -u, -v]);
    }

    let xb = x * phi.cos() + y * phi.sin();
    let yb = x * phi.sin() - y * phi.cos();
    if let Some([t, u, v]) = lp_rm_sm_lm(xb, yb, phi) {
        push(out, LSRL, vec![v, u, -h, t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(-xb, yb, -phi) {
        push(out, LSRL, vec![-v, -u, h, -t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(xb, -yb, -phi) {
        push(out, RSLR, vec![v, u, -h, t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_lm(-xb, -yb, phi) {
        push(out, RSLR, vec![-v, -u, h, -t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(xb, yb, phi) {
        push(out, RSRL, vec![v, u, -h, t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(-xb, yb, -phi) {
        push(out, RSRL, vec![-v, -u, h, -t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(xb, -yb, -phi) {
        push(out, LSLR, vec![v, u, -h, t]);
    }
    if let Some([t, u, v]) = lp_rm_sm_rm(-xb, -yb, phi) {
        push(out, LSLR, vec![-v, -u, h, -t]);
    }
}

fn ccscc(x: f64, y: f64, phi: f64, out: &mut Vec<Candidate>) {
    const LRSLR: &[Turn] = &[L, R, S, L, R];
    const RLSRL: &[Turn] = &[R, L, S, R, L];
    let h = FRAC_PI_2;
    if let Some([t, u, v]) = lp_rm_s_lm_rp(x, y, phi) {
        push(out, LRSLR, vec![t, -h, u, -h, v]);
    }
    if let Some([t, u, v]) = lp_rm_s_lm_rp(-x, y, -phi) {
        push(out, LRSLR, vec![-t, h, -u, h, -v]);
    }
    if let Some([t, u, v]) = lp_rm_s_lm_rp(x, -y, -phi) {
        push(out, RLSRL, vec![t, -h, u, -h, v]);
    }
    if let Some([t, u, v]) = lp_rm_s_lm_rp(-x, -y, phi) {
        push(out, RLSRL, vec![-t, h, -u, h, -v]);
    }
}

fn build(c: &Candidate, radius: f64) -> RsPath {
    let primitives: Vec<RsPrimitive> = c
        .turns
        .iter()
        .zip(&c.lengths)
        .filter(|(_, l)| l.abs() > ZERO)
        .map(|(&turn, &l)| RsPrimitive {
            turn,
            gear: if l >= 0.0 { Gear::Forward } else { Gear::Backward },
            length: l.abs(),
        })
        .collect();
    let total_length = primitives.iter().map(|p| p.length).sum();
    RsPath { primitives, total_length, radius }
}

/// Goal expressed in the start frame, normalized to unit radius.
fn relative_goal(q0: &CarState, q1: &CarState, radius: f64) -> (f64, f64, f64) {
    let dx = q1.x_w - q0.x_w;
    let dy = q1.y_w - q0.y_w;
    let (s, c) = q0.theta.sin_cos();
    let x = (c * dx + s * dy) / radius;
    let y = (-s * dx + c * dy) / radius;
    (x, y, q1.theta - q0.theta)
}

/// Every word of the family that connects `q0` to `q1`.
pub fn candidate_paths(q0: &CarState, q1: &CarState, radius: f64) -> Vec<RsPath> {
    assert!(radius > 0.0, "turning radius must be positive");
    let (x, y, phi) = relative_goal(q0, q1, radius);
    let mut raw = Vec::with_capacity(48);
    csc(x, y, phi, &mut raw);
    ccc(x, y, phi, &mut raw);
    cccc(x, y, phi, &mut raw);
    ccsc(x, y, phi, &mut raw);
    ccscc(x, y, phi, &mut raw);
    raw.iter().map(|c| build(c, radius)).collect()
}

/// Minimal-length word; equal lengths are broken by the word string.
pub fn shortest_path(q0: &CarState, q1: &CarState, radius: f64) -> RsPath {
    candidate_paths(q0, q1, radius)
        .into_iter()
        .min_by(|a, b| a.total_length.total_cmp(&b.total_length).then_with(|| a.word().cmp(&b.word())))
        .expect("Reeds-Shepp paths always exist")
}

fn advance(q: &CarState, p: &RsPrimitive, distance: f64, radius: f64) -> CarState {
    let s = match p.gear {
        Gear::Forward => distance,
        Gear::Backward => -distance,
    };
    let (x, y, th) = (q.x_w, q.y_w, q.theta);
    match p.turn {
        Turn::S => CarState::new(x + s * th.cos(), y + s * th.sin(), th),
        Turn::L => {
            let a = s / radius;
            CarState::new(
                x + radius * ((th + a).sin() - th.sin()),
                y + radius * (th.cos() - (th + a).cos()),
                th + a,
            )
        }
        Turn::R => {
            let a = s / radius;
            CarState::new(
                x + radius * (th.sin() - (th - a).sin()),
                y + radius * ((th - a).cos() - th.cos()),
                th - a,
            )
        }
    }
}

/// Final pose reached by following `path` from `q0`.
pub fn endpoint(path: &RsPath, q0: &CarState) -> CarState {
    path.primitives
        .iter()
        .fold(*q0, |q, p| advance(&q, p, p.length * path.radius, path.radius))
}

/// Pose reached after travelling `distance` meters along the path.
pub fn pose_at(path: &RsPath, q0: &CarState, distance: f64) -> CarState {
    let mut q = *q0;
    let mut remaining = distance.max(0.0);
    for p in &path.primitives {
        let len = p.length * path.radius;
        if remaining <= len {
            return advance(&q, p, remaining, path.radius);
        }
        q = advance(&q, p, len, path.radius);
        remaining -= len;
    }
    q
}

/// Poses every `ds` meters along the path, ending exactly at the endpoint.
pub fn sample(path: &RsPath, q0: &CarState, ds: f64) -> Vec<CarState> {
    assert!(ds > 0.0, "arc step must be positive");
    let total = path.length_meters();
    let steps = (total / ds + 1e-9).floor() as usize;
    let mut out: Vec<CarState> = (0..=steps).map(|i| pose_at(path, q0, i as f64 * ds)).collect();
    let end = endpoint(path, q0);
    if total - steps as f64 * ds > 1e-9 {
        out.push(end);
    } else {
        *out.last_mut().expect("at least the start pose") = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(a: f64) -> f64 {
        mod2pi(a)
    }

    #[test]
    fn straight_ahead_is_single_straight() {
        let p = shortest_path(&CarState::new(0.0, 0.0, 0.0), &CarState::new(5.0, 0.0, 0.0), 1.0);
        assert_eq!(p.word(), "S+");
        assert!((p.total_length - 5.0).abs() < 1e-12);
    }

    #[test]
    fn straight_behind_is_reverse() {
        let p = shortest_path(&CarState::new(0.0, 0.0, 0.0), &CarState::new(-2.0, 0.0, 0.0), 1.0);
        assert_eq!(p.word(), "S-");
        assert_eq!(p.cusps(), 0);
    }

    #[test]
    fn quarter_circle_endpoint() {
        let path = RsPath {
            primitives: vec![RsPrimitive { turn: Turn::L, gear: Gear::Forward, length: FRAC_PI_2 }],
            total_length: FRAC_PI_2,
            radius: 1.0,
        };
        let end = endpoint(&path, &CarState::new(0.0, 0.0, 0.0));
        assert!((end.x_w - 1.0).abs() < 1e-12 && (end.y_w - 1.0).abs() < 1e-12);
        assert!((end.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn straight_samples() {
        let q0 = CarState::new(0.0, 0.0, 0.0);
        let p = shortest_path(&q0, &CarState::new(5.0, 0.0, 0.0), 1.0);
        let pts = sample(&p, &q0, 1.0);
        assert_eq!(pts.len(), 6);
        for (i, q) in pts.iter().enumerate() {
            assert!((q.x_w - i as f64).abs() < 1e-12 && q.y_w.abs() < 1e-12);
        }
    }

    #[test]
    fn samples_end_at_goal() {
        let q0 = CarState::new(1.0, -2.0, 0.3);
        let q1 = CarState::new(-1.5, 0.7, 2.9);
        let p = shortest_path(&q0, &q1, 1.7);
        let pts = sample(&p, &q0, 0.13);
        let end = pts.last().unwrap();
        assert!((end.x_w - q1.x_w).abs() < 1e-9 && (end.y_w - q1.y_w).abs() < 1e-9);
        assert!(wrap(end.theta - q1.theta).abs() < 1e-9);
    }

    #[test]
    fn radius_scales_lengths() {
        let q0 = CarState::new(0.0, 0.0, 0.0);
        let p1 = shortest_path(&q0, &CarState::new(2.0, 1.0, 1.0), 1.0);
        let p2 = shortest_path(&q0, &CarState::new(4.0, 2.0, 1.0), 2.0);
        assert!((p1.total_length - p2.total_length).abs() < 1e-9);
        assert!((2.0 * p1.length_meters() - p2.length_meters()).abs() < 1e-9);
    }
}
