mod common;

use parking_scvx::discretization::{discretize_foh, FohConfig};
use parking_scvx::scvx::{build_subproblem, initialize_segments, scvx_run, ProblemSetup, ScvxError};
use parking_scvx::validate::{validate_trajectory, DEFAULT_DENSE};
use parking_scvx::conic::{ClarabelBackend, ConicBackend, SolveStatus};
use parking_scvx::{scenarios, CarState, ModelParams, ScvxParams};

use common::{accepted_costs, trust_replay_mismatches};

fn free(p0: CarState, p1: CarState, params: ScvxParams) -> parking_scvx::Scenario {
    scenarios::free_space(p0, p1, ModelParams::default(), params)
}

#[test]
fn subproblem_variable_and_constraint_counts_at_three_knots() {
    let params = ScvxParams { knots: 3, ..Default::default() };
    let s = free(CarState::new(0.0, 0.0, 0.0), CarState::new(3.0, 1.0, 0.5), params.clone());
    let setup = ProblemSetup::new(&s, &params).unwrap();
    let scaling = setup.scaling().unwrap();
    let reference = initialize_segments(&setup.start, &setup.goal, &params);
    let ltv: Vec<_> = reference.iter().map(|r| discretize_foh(r, &setup.model, &FohConfig::default()).unwrap()).collect();
    let sub = build_subproblem(&reference, &ltv, &setup, 1.0, &scaling).unwrap();
    let p = &sub.problem;
    // Per section: x 9, u 6, sigma 1, nu 6.
    assert_eq!(sub.layout.core_vars, 3 * 22);
    // |nu| epigraphs 6 and two jerk epigraphs per section; trust region:
    // one sigma epigraph plus five per knot.
    assert_eq!(p.n_vars, 66 + 3 * 8 + 3 * 16);
    // Dynamics 18, boundary poses 6, joints 6, stops 5.
    assert_eq!(p.equalities.len(), 35);
    // |nu| 36, control box 36, y bounds 18, sigma bounds 6, trust epigraphs
    // 96, trust balls 9.
    assert_eq!(p.nonneg.len(), 201);
    assert_eq!(p.soc.len(), 6);
    assert!(sub.layout.stc_slacks.is_empty());
}

#[test]
fn vanishing_trust_region_pins_the_reference() {
    let params = ScvxParams { knots: 6, ..Default::default() };
    let s = free(CarState::new(0.0, 0.0, 0.0), CarState::new(4.0, 2.0, 1.0), params.clone());
    let setup = ProblemSetup::new(&s, &params).unwrap();
    let scaling = setup.scaling().unwrap();
    let reference = initialize_segments(&setup.start, &setup.goal, &params);
    let ltv: Vec<_> = reference.iter().map(|r| discretize_foh(r, &setup.model, &FohConfig::default()).unwrap()).collect();
    let radius = 1e-9;
    let sub = build_subproblem(&reference, &ltv, &setup, radius, &scaling).unwrap();
    let sol = ClarabelBackend::default().solve(&sub.problem).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let decoded = sub.layout.decode(&sol, &scaling);
    for (a, b) in decoded.segments.iter().zip(&reference) {
        for (x, y) in a.states.iter().zip(&b.states) {
            let d = scaling.scale_state(&x.to_vector()) - scaling.scale_state(&y.to_vector());
            assert!(d.abs().max() <= 1e-6, "{d:?}");
        }
        assert!((scaling.scale_sigma(a.sigma) - scaling.scale_sigma(b.sigma)).abs() <= 1e-6);
    }
    // The straight-line guess is infeasible, so the virtual control absorbs it.
    assert!(decoded.nu_norm > 1e-3);
}

#[test]
fn coincident_endpoints_converge_immediately() {
    let p = CarState::new(1.0, -2.0, 0.7);
    let s = free(p, p, ScvxParams::default());
    let sol = scvx_run(&s, &s.params).unwrap();
    assert!(sol.converged);
    assert!(sol.iterations <= 5, "{} iterations", sol.iterations);
    let r = validate_trajectory(&sol, &s, DEFAULT_DENSE).report;
    assert!(r.path_length <= 1e-3);
    for seg in &sol.segments {
        assert!((seg.sigma - s.params.sigma_bounds.0).abs() <= 1e-6);
    }
}

#[test]
fn accepted_costs_never_increase_and_trust_trace_replays() {
    for scenario in [scenarios::reverse_parking().with_seed(3).unwrap(), scenarios::parallel_parking().with_seed(1).unwrap()] {
        let sol = scvx_run(&scenario, &scenario.params).unwrap();
        let costs = accepted_costs(&sol.history);
        assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
        assert_eq!(trust_replay_mismatches(&sol.history, &scenario.params), 0);
        assert_eq!(sol.final_cost.total, *costs.last().unwrap());
    }
}

#[test]
fn straight_drive_is_found() {
    let s = free(CarState::new(0.0, 0.0, 0.0), CarState::new(5.0, 0.0, 0.0), ScvxParams::default());
    let sol = scvx_run(&s, &s.params).unwrap();
    assert!(sol.converged);
    let r = validate_trajectory(&sol, &s, DEFAULT_DENSE).report;
    assert!(r.is_clean(1e-3), "{:?}", r.failures(1e-3));
    assert!((r.path_length - 5.0).abs() < 0.05 * 5.0);
    assert_eq!(r.cusps, 0);
}

#[test]
fn bad_inputs_are_rejected() {
    let mut params = ScvxParams::default();
    params.knots = 1;
    let s = free(CarState::new(0.0, 0.0, 0.0), CarState::new(1.0, 0.0, 0.0), params.clone());
    assert!(matches!(scvx_run(&s, &params), Err(ScvxError::InvalidParams(_))));
    let mut s = scenarios::reverse_parking();
    s.start = CarState::new(3.0, 1.0, 0.0);
    assert!(matches!(scvx_run(&s, &s.params), Err(ScvxError::InvalidScenario(_))));
}
