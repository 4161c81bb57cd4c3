use polysep_core::dual::{Label, LabeledPoint, Sample};
use polysep_core::kernel::KernelSpec;
use polysep_core::lp::{lp_solve_discretized_points, DiscretizationConfig};
use polysep_core::planted::{plant_polyhedron, verify_planted, PlantedConfig};
use polysep_core::search::{
    improper_separate_with, level_cap, proper_separate, proper_separate_with, SearchOptions, Separation,
};
use polysep_core::{classify, lp_solve_all, margin_value, DualState, LpOutcome, Polyhedron};

fn errors(poly: &Polyhedron, points: &[LabeledPoint]) -> usize {
    points.iter().filter(|p| classify(poly, &p.encoding).unwrap() != p.label).count()
}

#[test]
fn planted_single_halfspace_is_lp_feasible() {
    let inst = plant_polyhedron(&PlantedConfig::new(1, 0.2, 50, 2, 7)).unwrap();
    let sample = inst.dataset.sample(KernelSpec::Linear).unwrap();
    let run = lp_solve_all(&sample, &DualState::empty(), 0.2).unwrap();
    let state = run.outcome.state().expect("feasible");
    assert!((0..sample.len()).all(|p| margin_value(state, &sample, p).unwrap() > 0.0));
}

#[test]
fn planted_wedge_proper_and_improper() {
    let inst = plant_polyhedron(&PlantedConfig::new(2, 0.2, 50, 2, 7)).unwrap();
    assert!(verify_planted(&inst.dataset.points, &inst.truth).holds(0.2, 0.4));
    let sample = inst.dataset.sample(KernelSpec::Linear).unwrap();

    let run = proper_separate(&sample, 2, 0.2).unwrap();
    let poly = run.polyhedron().unwrap();
    assert!(poly.halfspaces.len() <= 2);
    assert_eq!(errors(poly, &inst.dataset.points), 0);

    let run = improper_separate_with(&sample, 2, 0.2, &SearchOptions { record_nodes: true }).unwrap();
    let poly = run.polyhedron().unwrap();
    assert_eq!(errors(poly, &inst.dataset.points), 0);
    assert!(poly.halfspaces.len() <= run.telemetry.nodes.as_ref().unwrap().len());
    assert!(run.telemetry.levels <= level_cap(2, 0.2));
}

#[test]
fn node_invariants_hold_at_the_final_level() {
    let inst = plant_polyhedron(&PlantedConfig::new(3, 0.15, 80, 3, 21)).unwrap();
    let sample = inst.dataset.sample(KernelSpec::Linear).unwrap();
    let run = proper_separate_with(&sample, 3, 0.15, &SearchOptions { record_nodes: true }).unwrap();
    let tel = &run.telemetry;
    let bound = 4.0 / (0.15 * 0.15) + 1e-9;
    for node in tel.nodes.as_ref().unwrap() {
        assert!(node.potential <= bound);
        assert!(node.negatives.iter().all(|&i| sample.point(i).label == Label::Negative));
    }
    assert!(tel.max_path_progress_arcs <= (4.0f64 / (0.15 * 0.15)).ceil() as usize);
    assert!(tel.min_arc_gain >= -1e-9);
}

#[test]
fn kernelized_search_separates_a_ring() {
    // positives near the origin, negatives on a ring: no single halfspace,
    // but a few suffice, and the normalized RBF lift separates it directly
    let mut points = Vec::new();
    for k in 0..12 {
        let a = std::f64::consts::TAU * k as f64 / 12.0;
        points.push(LabeledPoint::negative(vec![0.9 * a.cos(), 0.9 * a.sin()]));
    }
    for k in 0..4 {
        let a = std::f64::consts::TAU * k as f64 / 4.0 + 0.3;
        points.push(LabeledPoint::positive(vec![0.1 * a.cos(), 0.1 * a.sin()]));
    }
    let linear = Sample::new(KernelSpec::Linear, points.clone()).unwrap();
    assert_eq!(lp_solve_all(&linear, &DualState::empty(), 0.1).unwrap().outcome, LpOutcome::NotGammaSeparable);
    let run = proper_separate(&linear, 6, 0.1).unwrap();
    assert_eq!(errors(run.polyhedron().unwrap(), &points), 0);

    let rbf = KernelSpec::normalized(KernelSpec::rbf(0.3).unwrap()).unwrap();
    let sample = Sample::new(rbf, points.clone()).unwrap();
    let run = proper_separate(&sample, 1, 0.05).unwrap();
    assert_eq!(errors(run.polyhedron().unwrap(), &points), 0);
}

#[test]
fn infeasible_instances_report_no_polyhedron() {
    let points = vec![
        LabeledPoint::positive(vec![0.3, 0.0]),
        LabeledPoint::negative(vec![0.3, 0.0]),
        LabeledPoint::positive(vec![-0.2, 0.1]),
    ];
    let sample = Sample::new(KernelSpec::Linear, points).unwrap();
    assert_eq!(proper_separate(&sample, 2, 0.2).unwrap().result, Separation::NoSeparatingPolyhedron);
}

#[test]
fn discretized_solver_matches_original_constraints() {
    for seed in 0..10 {
        let inst = plant_polyhedron(&PlantedConfig::new(1, 0.3, 60, 2, seed)).unwrap();
        let cfg = DiscretizationConfig::new(0.3, 2, 1.0).unwrap();
        let (disc, run) = lp_solve_discretized_points(inst.dataset.points.clone(), &cfg, KernelSpec::Linear).unwrap();
        let state = run.outcome.state().expect("feasible");
        assert!(state.support().iter().all(|e| e.index >= disc.len()));
        let poly = Polyhedron::from_states(disc.sample(), vec![state.clone()], 0.3, 1).unwrap();
        assert_eq!(errors(&poly, &inst.dataset.points), 0);
        assert!(run.telemetry.min_potential_gain >= 0.125 - 1e-9);
    }
}

#[test]
fn search_is_deterministic() {
    let inst = plant_polyhedron(&PlantedConfig::new(3, 0.2, 100, 2, 4)).unwrap();
    let sample = inst.dataset.sample(KernelSpec::Linear).unwrap();
    let a = proper_separate(&sample, 3, 0.2).unwrap();
    let b = proper_separate(&sample, 3, 0.2).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.telemetry, b.telemetry);
}
