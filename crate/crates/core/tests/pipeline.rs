//! Library pipeline through the public API: mesh, discretization, reference
//! run, nudged run and decay analysis.

use std::sync::Arc;

use danse_core::analysis::{estimate_lambda1, fit_decay_rate, grashof};
use danse_core::fem::DirichletBc;
use danse_core::interp::{InterpOperator, InterpVariant};
use danse_core::mesh::{generate_annulus, generate_offset_disk, MeshHierarchy};
use danse_core::solver::{
    body_force, run_dns, run_nudged, solve_stokes, Discretization, DnsSpec, Forcing, InitialCondition, NudgeSpec,
    Problem, STEP_SOLVE_TOL,
};

fn shear_problem(h: &MeshHierarchy, level: usize) -> Problem {
    let disc = Arc::new(Discretization::new(Arc::new(h.level(level).clone())).unwrap());
    Problem { disc, nu: 1.0 / 600.0, forcing: Forcing::Zero, bc: DirichletBc::outer_rotation(1.0) }
}

#[test]
fn nudged_shear_flow_approaches_the_reference() {
    let h = MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), 1).unwrap();
    let problem = shear_problem(&h, 1);
    let dns = DnsSpec {
        dt: 0.01,
        t_start: -1.0,
        t_end: 2.0,
        record_from: 0.0,
        stride: 1,
        initial: InitialCondition::Rest,
        linear_tol: STEP_SOLVE_TOL,
    };
    let mut seen = 0;
    let reference = run_dns(&problem, &dns, &mut |_| {
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 301);
    assert_eq!(reference.snapshots.len(), 201);
    assert!(reference.energy.last().unwrap().1 > 0.0);

    let vel = problem.disc.velocity_space().clone();
    for (k, variant) in [(2, InterpVariant::OnCoarse), (1, InterpVariant::LinearOnRefined)] {
        let op = InterpOperator::build(&h, vel.clone(), 0, 1, k, variant).unwrap();
        let spec = NudgeSpec {
            dt: 0.01,
            mu: 100.0,
            t_start: 0.0,
            t_end: 2.0,
            obs_stride: 1,
            sync_threshold: 1e-11,
            fingerprint: 7,
            linear_tol: STEP_SOLVE_TOL,
            resume: None,
        };
        let rec = run_nudged(&problem, &spec, &reference, Arc::new(op), &mut |_| Ok(())).unwrap();
        assert_eq!(rec.fingerprint, 7);
        let ratio = rec.final_l2().unwrap() / rec.l2_error[0];
        assert!(ratio < 0.1, "{}: error ratio {ratio}", variant.as_str());
        let fit = fit_decay_rate(&rec, (0.0, 2.0)).unwrap();
        assert!(fit.sigma > 0.0);
    }
}

#[test]
fn body_force_flow_has_finite_grashof_number() {
    let h = MeshHierarchy::new(generate_offset_disk(20, 18).unwrap(), 0).unwrap();
    let disc = Arc::new(Discretization::new(Arc::new(h.level(0).clone())).unwrap());
    let nu = 1.0 / 600.0;
    let problem = Problem { disc: disc.clone(), nu, forcing: Forcing::steady(body_force), bc: DirichletBc::no_slip() };
    let (u, _) = solve_stokes(&problem, 0.0).unwrap();
    assert!(disc.divergence_defect(u.coeffs()) < 1e-9);
    let lambda = estimate_lambda1(&disc, 500, 1e-10).unwrap();
    assert!(lambda.lambda > 0.0);
    let g = grashof(&disc, &body_force, nu, lambda.lambda).unwrap();
    assert!(g.is_finite() && g > 0.0);
}
