//! State-triggered constraints.
//!
//! The implication `g(z) < 0 => c(z) <= 0` is encoded by the residual
//! `h(z) = -min(g(z), 0) * c(z) <= 0`. An OR of several triggers uses the
//! smallest trigger value, since `min_i g_i < 0` exactly when some `g_i < 0`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vehicle::CarState;

#[derive(Debug, Error, PartialEq)]
pub enum StcError {
    #[error("a state-triggered constraint needs at least one trigger")]
    NoTriggers,
    #[error("an OR combinator needs at least two triggers, got {0}")]
    OrNeedsTwo(usize),
    #[error("gap half-width must be positive, got {0}")]
    NonPositiveHalfWidth(f64),
}

/// `gradient . (x_w, y_w, theta) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFn {
    pub gradient: [f64; 3],
    pub offset: f64,
}

impl AffineFn {
    pub const fn new(gradient: [f64; 3], offset: f64) -> Self {
        Self { gradient, offset }
    }

    pub fn eval(&self, z: &CarState) -> f64 {
        self.gradient[0] * z.x_w + self.gradient[1] * z.y_w + self.gradient[2] * z.theta + self.offset
    }

    pub fn grad(&self) -> Vector3<f64> {
        Vector3::from(self.gradient)
    }

    /// Shift the zero level set by `margin` along the gradient's position
    /// part, so the region `f < 0` grows by that distance.
    fn expanded(&self, margin: f64) -> Self {
        let norm = self.gradient[0].hypot(self.gradient[1]);
        Self { gradient: self.gradient, offset: self.offset - margin * norm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combinator {
    Single,
    Or,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StcRepr", into = "StcRepr")]
pub struct Stc {
    triggers: Vec<AffineFn>,
    combinator: Combinator,
    constraint: AffineFn,
}

#[derive(Serialize, Deserialize)]
struct StcRepr {
    triggers: Vec<AffineFn>,
    combinator: Combinator,
    constraint: AffineFn,
}

impl TryFrom<StcRepr> for Stc {
    type Error = StcError;

    fn try_from(s: StcRepr) -> Result<Self, Self::Error> {
        Stc::new(s.triggers, s.combinator, s.constraint)
    }
}

impl From<Stc> for StcRepr {
    fn from(s: Stc) -> Self {
        StcRepr { triggers: s.triggers, combinator: s.combinator, constraint: s.constraint }
    }
}

/// Affine model `h(z_bar) + grad . (z - z_bar)` of a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedStc {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub at: Vector3<f64>,
}

impl LinearizedStc {
    pub fn eval(&self, z: &CarState) -> f64 {
        self.value + self.gradient.dot(&(z.to_vector() - self.at))
    }

    pub fn is_dormant(&self) -> bool {
        self.value == 0.0 && self.gradient == Vector3::zeros()
    }
}

/// Optimal slack of the complementarity pair `0 <= eta _|_ g + eta >= 0`.
pub fn eta_star(g: f64) -> f64 {
    -g.min(0.0)
}

impl Stc {
    pub fn new(triggers: Vec<AffineFn>, combinator: Combinator, constraint: AffineFn) -> Result<Self, StcError> {
        match (combinator, triggers.len()) {
            (_, 0) => return Err(StcError::NoTriggers),
            (Combinator::Or, n) if n < 2 => return Err(StcError::OrNeedsTwo(n)),
            _ => {}
        }
        Ok(Self { triggers, combinator, constraint })
    }

    pub fn single(trigger: AffineFn, constraint: AffineFn) -> Self {
        Self { triggers: vec![trigger], combinator: Combinator::Single, constraint }
    }

    pub fn triggers(&self) -> &[AffineFn] {
        &self.triggers
    }

    pub fn combinator(&self) -> Combinator {
        self.combinator
    }

    pub fn constraint(&self) -> &AffineFn {
        &self.constraint
    }

    /// Index and value of the governing trigger; ties go to the first one.
    fn active_trigger(&self, z: &CarState) -> (usize, f64) {
        let mut best = (0, self.triggers[0].eval(z));
        for (i, g) in self.triggers.iter().enumerate().skip(1) {
            let v = g.eval(z);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn trigger_value(&self, z: &CarState) -> f64 {
        self.active_trigger(z).1
    }

    pub fn is_triggered(&self, z: &CarState) -> bool {
        self.trigger_value(z) < 0.0
    }

    pub fn residual(&self, z: &CarState) -> f64 {
        // Written as a product so a dormant constraint is exactly zero.
        let eta = eta_star(self.trigger_value(z));
        if eta == 0.0 {
            0.0
        } else {
            eta * self.constraint.eval(z)
        }
    }

    /// Product-rule linearization with the subgradient of `min(g, 0)` taken
    /// as zero at `g = 0`.
    pub fn linearize(&self, z_bar: &CarState) -> LinearizedStc {
        let at = z_bar.to_vector();
        let (i, g) = self.active_trigger(z_bar);
        if g >= 0.0 {
            return LinearizedStc { value: 0.0, gradient: Vector3::zeros(), at };
        }
        let c = self.constraint.eval(z_bar);
        // h = -g c  =>  grad h = -c grad g - g grad c
        let gradient = self.triggers[i].grad() * (-c) - self.constraint.grad() * g;
        LinearizedStc { value: -g * c, gradient, at }
    }

    /// Linearization for a step that moves each coordinate by at most
    /// `reach[j]`.
    ///
    /// A knot that is dormant at `z_bar` but could fire a trigger within
    /// that reach, while its constraint is violated, is linearized on the
    /// firing branch instead: the plain model would see a zero gradient and
    /// step straight into the keep-out region.
    pub fn linearize_within(&self, z_bar: &CarState, reach: &Vector3<f64>) -> LinearizedStc {
        let (i, g) = self.active_trigger(z_bar);
        let c = self.constraint.eval(z_bar);
        let g_reach = self.triggers[i].grad().abs().dot(reach);
        if g < 0.0 || !(g < g_reach && c > 0.0) {
            return self.linearize(z_bar);
        }
        let gradient = self.triggers[i].grad() * (-c) - self.constraint.grad() * g;
        LinearizedStc { value: -g * c, gradient, at: z_bar.to_vector() }
    }

    /// Same logic with the keep-out region grown by `margin` meters.
    pub fn inflated(&self, margin: f64) -> Stc {
        if margin == 0.0 {
            return self.clone();
        }
        Stc {
            triggers: self.triggers.iter().map(|g| g.expanded(margin)).collect(),
            combinator: self.combinator,
            constraint: self.constraint.expanded(-margin),
        }
    }
}

/// Keep-out blocks on both sides of a gap of half-width `b` centered on
/// `x_w = 0`: leaving the gap sideways (`x_w < -b` or `x_w > b`) requires
/// `y_w >= y_top`.
pub fn parking_gap_stc(b: f64, y_top: f64) -> Result<Stc, StcError> {
    if !(b > 0.0) {
        return Err(StcError::NonPositiveHalfWidth(b));
    }
    Stc::new(
        vec![AffineFn::new([1.0, 0.0, 0.0], b), AffineFn::new([-1.0, 0.0, 0.0], b)],
        Combinator::Or,
        AffineFn::new([0.0, -1.0, 0.0], y_top),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(x: f64, y: f64) -> CarState {
        CarState::new(x, y, 0.0)
    }

    /// g(z) = x + g_off and c(z) = y + c_off, so values are read off directly.
    fn single(g_off: f64, c_off: f64) -> (Stc, CarState) {
        (Stc::single(AffineFn::new([1.0, 0.0, 0.0], g_off), AffineFn::new([0.0, 1.0, 0.0], c_off)), z(0.0, 0.0))
    }

    #[test]
    fn eta_star_values() {
        assert_eq!(eta_star(-0.5), 0.5);
        assert_eq!(eta_star(0.3), 0.0);
        assert_eq!(eta_star(0.0), 0.0);
    }

    #[test]
    fn single_trigger_residuals() {
        let (s, at) = single(-1.0, -2.0);
        assert_eq!(s.residual(&at), -2.0);
        let (s, at) = single(-1.0, 0.5);
        assert_eq!(s.residual(&at), 0.5);
        let (s, at) = single(2.0, 5.0);
        assert_eq!(s.residual(&at), 0.0);
    }

    #[test]
    fn or_trigger_picks_firing_branch() {
        let s = Stc::new(
            vec![AffineFn::new([0.0, 0.0, 0.0], 1.0), AffineFn::new([0.0, 0.0, 0.0], -0.5)],
            Combinator::Or,
            AffineFn::new([0.0, 0.0, 0.0], 1.0),
        )
        .unwrap();
        assert_eq!(s.residual(&z(0.0, 0.0)), 0.5);
    }

    #[test]
    fn constructor_checks_trigger_counts() {
        let f = AffineFn::new([1.0, 0.0, 0.0], 0.0);
        assert_eq!(Stc::new(vec![], Combinator::Single, f), Err(StcError::NoTriggers));
        assert_eq!(Stc::new(vec![f], Combinator::Or, f), Err(StcError::OrNeedsTwo(1)));
        assert!(parking_gap_stc(0.0, 2.0).is_err());
    }

    #[test]
    fn linearization_matches_hand_gradient() {
        // g = z1 + 1, c = z2 - 2 at (-3, 5): g = -2, c = 3, h = 6, grad = (-c, -g) = (-3, 2)
        let s = Stc::single(AffineFn::new([1.0, 0.0, 0.0], 1.0), AffineFn::new([0.0, 1.0, 0.0], -2.0));
        let lin = s.linearize(&z(-3.0, 5.0));
        assert_eq!(lin.value, 6.0);
        assert_eq!(lin.gradient, Vector3::new(-3.0, 2.0, 0.0));
    }

    #[test]
    fn dormant_linearization_is_zero() {
        let s = parking_gap_stc(1.0, 2.0).unwrap();
        let lin = s.linearize(&z(0.2, 0.5));
        assert!(lin.is_dormant());
        assert_eq!(lin.eval(&z(-4.0, -4.0)), 0.0);
    }

    #[test]
    fn ties_go_to_first_trigger() {
        let s = Stc::new(
            vec![AffineFn::new([1.0, 0.0, 0.0], -1.0), AffineFn::new([0.0, 1.0, 0.0], -1.0)],
            Combinator::Or,
            AffineFn::new([0.0, 0.0, 1.0], 1.0),
        )
        .unwrap();
        // both triggers equal -1 at the origin
        let lin = s.linearize(&z(0.0, 0.0));
        assert_eq!(lin.gradient, Vector3::new(-1.0, 0.0, 1.0));
    }

    #[test]
    fn reachable_trigger_is_linearized_on_the_firing_branch() {
        let s = parking_gap_stc(1.0, 2.0).unwrap();
        // just inside the gap, below the clearance line
        let z0 = z(0.95, 1.0);
        assert!(s.linearize(&z0).is_dormant());
        let near = s.linearize_within(&z0, &Vector3::new(0.1, 0.1, 0.1));
        assert!((near.value - (-0.05)).abs() < 1e-12);
        assert!((near.gradient - Vector3::new(1.0, 0.05, 0.0)).amax() < 1e-12);
        // the model now forbids crossing x = 1 at this height
        assert!(near.eval(&z(1.05, 1.0)) > 0.0);
        assert!(s.linearize_within(&z0, &Vector3::new(0.01, 0.01, 0.01)).is_dormant());
        // above the clearance line the constraint already holds
        assert!(s.linearize_within(&z(0.95, 2.5), &Vector3::new(1.0, 1.0, 1.0)).is_dormant());
        // active knots are unaffected
        let a = z(1.5, 2.5);
        assert_eq!(s.linearize_within(&a, &Vector3::new(1.0, 1.0, 1.0)), s.linearize(&a));
    }

    #[test]
    fn parking_gap_geometry() {
        let s = parking_gap_stc(1.0, 2.0).unwrap();
        assert!(s.residual(&z(-2.0, 3.0)) <= 0.0);
        assert_eq!(s.residual(&z(0.0, 0.5)), 0.0);
        assert!(s.residual(&z(1.5, 1.0)) > 0.0);
    }

    #[test]
    fn inflation_grows_the_keep_out_region() {
        let s = parking_gap_stc(1.0, 2.0).unwrap().inflated(0.2);
        assert!(s.residual(&z(-0.9, 2.1)) > 0.0);
        assert!(s.residual(&z(-0.7, 2.1)) == 0.0);
        assert!(s.residual(&z(-0.9, 2.3)) < 0.0);
    }

    #[test]
    fn serde_validates() {
        let s = parking_gap_stc(1.0, 2.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Stc>(&text).unwrap(), s);
        let bad = text.replace("[{\"gradient\":[1.0,0.0,0.0],\"offset\":1.0},", "[");
        assert!(serde_json::from_str::<Stc>(&bad).is_err());
    }
}
