use super::ScvxParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustDecision {
    pub accept: bool,
    pub radius: f64,
    pub ratio: f64,
}

/// Ratio test on actual versus predicted decrease of the penalized cost.
///
/// A non-positive predicted decrease means the convex model found nothing
/// to gain, so the step is rejected and the region shrunk.
pub fn trust_region_update(predicted: f64, actual: f64, radius: f64, params: &ScvxParams) -> TrustDecision {
    let t = &params.trust;
    if !(predicted > 0.0) {
        return TrustDecision { accept: false, radius: clamp(radius / t.alpha_shrink, params), ratio: f64::NAN };
    }
    let ratio = actual / predicted;
    let (accept, radius) = if ratio < t.rho0 {
        (false, radius / t.alpha_shrink)
    } else if ratio < t.rho1 {
        (true, radius / t.alpha_shrink)
    } else if ratio < t.rho2 {
        (true, radius)
    } else {
        (true, radius * t.alpha_grow)
    };
    TrustDecision { accept, radius: clamp(radius, params), ratio }
}

fn clamp(radius: f64, params: &ScvxParams) -> f64 {
    radius.clamp(params.trust.radius_min, params.trust.radius_max)
}
