use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::mesh::generate_annulus;

fn hierarchy(levels: usize) -> MeshHierarchy {
    MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), levels - 1).unwrap()
}

fn fine_space(h: &MeshHierarchy, fine: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(Arc::new(h.level(fine).clone()), Degree::P2, 2).unwrap())
}

fn probe(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed ^ 0x2545_F491_4F6C_DD1D;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

const CASES: [(usize, InterpVariant); 3] =
    [(1, InterpVariant::OnCoarse), (2, InterpVariant::OnCoarse), (1, InterpVariant::LinearOnRefined)];

#[test]
fn idempotent_on_random_fields() {
    let h = hierarchy(3);
    let space = fine_space(&h, 2);
    for (coarse, fine) in [(0, 2), (1, 2)] {
        for (k, variant) in CASES {
            let op = InterpOperator::build(&h, space.clone(), coarse, fine, k, variant).unwrap();
            let u = probe(space.num_dofs(), 9);
            let once = op.apply_coeffs(&u);
            let twice = op.apply_coeffs(&once);
            assert!(max_diff(&once, &twice) <= 1e-12 * max_abs(&once), "{k} {variant:?} {coarse}->{fine}");
        }
    }
}

#[test]
fn reproduces_polynomials() {
    let h = hierarchy(3);
    let space = fine_space(&h, 2);
    let affine = FeField::interpolate_vector(space.clone(), |p| [p[0] + 2.0 * p[1], 1.0 - p[1]]);
    let square = FeField::interpolate_vector(space.clone(), |p| [p[0] * p[0], p[0] * p[1]]);
    for (k, variant) in CASES {
        let op = InterpOperator::build(&h, space.clone(), 0, 2, k, variant).unwrap();
        let out = op.apply(&affine).unwrap();
        assert!(max_diff(out.coeffs(), affine.coeffs()) < 1e-12, "{k} {variant:?}");
    }
    let quad = InterpOperator::build(&h, space.clone(), 0, 2, 2, InterpVariant::OnCoarse).unwrap();
    assert!(max_diff(quad.apply(&square).unwrap().coeffs(), square.coeffs()) < 1e-12);
    let lin = InterpOperator::build(&h, space.clone(), 0, 2, 1, InterpVariant::LinearOnRefined).unwrap();
    assert!(max_diff(lin.apply(&square).unwrap().coeffs(), square.coeffs()) > 1e-4);
}

#[test]
fn coarse_functions_pass_through() {
    // a coarse P2 function built independently by evaluating on the coarse mesh
    let h = hierarchy(2);
    let space = fine_space(&h, 1);
    let coarse_space = Arc::new(FeSpace::new(Arc::new(h.level(0).clone()), Degree::P2, 2).unwrap());
    let coarse = FeField::new(coarse_space.clone(), probe(coarse_space.num_dofs(), 4)).unwrap();
    let mut fine = FeField::zeros(space.clone());
    let n = space.num_scalar_dofs();
    for (d, &x) in space.dof_coords().iter().enumerate() {
        match h.level(0).locate(x) {
            crate::mesh::Location::Inside { triangle, barycentric } => {
                let v = coarse.eval_in(triangle, barycentric);
                fine.coeffs_mut()[d] = v[0];
                fine.coeffs_mut()[n + d] = v[1];
            }
            crate::mesh::Location::Outside => panic!("dof outside coarse mesh"),
        }
    }
    let op = InterpOperator::build(&h, space, 0, 1, 2, InterpVariant::OnCoarse).unwrap();
    let out = op.apply(&fine).unwrap();
    assert!(max_diff(out.coeffs(), fine.coeffs()) <= 1e-12 * max_abs(fine.coeffs()));
}

#[test]
fn zero_and_synchronized_difference() {
    let h = hierarchy(2);
    let space = fine_space(&h, 1);
    let op = InterpOperator::build(&h, space.clone(), 0, 1, 2, InterpVariant::OnCoarse).unwrap();
    let zero = FeField::zeros(space.clone());
    assert!(op.apply(&zero).unwrap().coeffs().iter().all(|&v| v == 0.0));
    let u = probe(space.num_dofs(), 2);
    let diff: Vec<f64> = u.iter().zip(&u).map(|(a, b)| a - b).collect();
    assert!(op.apply_coeffs(&diff).iter().all(|&v| v == 0.0));
    let other = fine_space(&h, 1);
    assert!(matches!(op.apply(&FeField::zeros(other)), Err(InterpError::SpaceMismatch)));
}

#[test]
fn equal_data_and_row_support() {
    let h = hierarchy(3);
    let space = fine_space(&h, 2);
    let quad = InterpOperator::build(&h, space.clone(), 0, 2, 2, InterpVariant::OnCoarse).unwrap();
    let lin = InterpOperator::build(&h, space.clone(), 0, 2, 1, InterpVariant::LinearOnRefined).unwrap();
    let p1 = InterpOperator::build(&h, space.clone(), 0, 2, 1, InterpVariant::OnCoarse).unwrap();
    assert_eq!(quad.sample_nodes(), lin.sample_nodes());
    let c = h.level(0);
    assert_eq!(quad.sample_nodes().len(), c.num_vertices() + c.num_edges());
    assert_eq!(p1.sample_nodes(), (0..c.num_vertices()).collect::<Vec<_>>().as_slice());
    for (i, &d) in quad.sample_nodes().iter().enumerate() {
        assert_eq!(quad.sample_coords()[i], space.dof_coords()[d]);
    }

    // each row only reads the six nodes of a coarse triangle containing its dof
    let six = |t: usize| -> Vec<usize> {
        let [a, b, cc] = c.triangles()[t];
        let e = c.triangle_edges()[t];
        let nv = c.num_vertices();
        vec![a, b, cc, nv + e[0], nv + e[1], nv + e[2]]
    };
    for op in [&quad, &lin, &p1] {
        let m = op.scalar_matrix();
        for (d, &x) in space.dof_coords().iter().enumerate() {
            let cols: Vec<usize> = m.row(d).map(|(j, _)| j).collect();
            let ok = (0..c.num_triangles()).any(|t| {
                let l = c.barycentric(t, x);
                l.iter().all(|&v| v > -1e-10) && cols.iter().all(|j| six(t).contains(j))
            });
            assert!(ok, "row {d} reads outside its coarse triangle");
        }
    }
}

#[test]
fn rejects_bad_requests() {
    let h = hierarchy(2);
    let space = fine_space(&h, 1);
    let build = |c, f, k, v| InterpOperator::build(&h, space.clone(), c, f, k, v);
    assert!(matches!(build(1, 1, 1, InterpVariant::OnCoarse), Err(InterpError::NotNested { .. })));
    assert!(matches!(build(0, 2, 1, InterpVariant::OnCoarse), Err(InterpError::NotNested { .. })));
    assert!(matches!(build(0, 1, 3, InterpVariant::OnCoarse), Err(InterpError::UnsupportedDegree(3))));
    assert!(matches!(build(0, 1, 2, InterpVariant::LinearOnRefined), Err(InterpError::VariantDegree(2))));
    let wrong = fine_space(&h, 0);
    assert!(matches!(
        InterpOperator::build(&h, wrong, 0, 1, 1, InterpVariant::OnCoarse),
        Err(InterpError::SpaceMismatch)
    ));
    assert!(matches!(
        measure_interp_rate(&h, 1, &|_| 0.0, &|_| [0.0; 2], 0),
        Err(InterpError::TooFewLevels(2))
    ));
    assert_eq!(InterpVariant::parse("linear_on_refined"), Some(InterpVariant::LinearOnRefined));
}

#[test]
fn triplet_export() {
    let h = hierarchy(2);
    let op = InterpOperator::build(&h, fine_space(&h, 1), 0, 1, 1, InterpVariant::OnCoarse).unwrap();
    let mut buf = Vec::new();
    op.write_triplets(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), op.matrix().nnz());
    let first: Vec<&str> = text.lines().next().unwrap().split(' ').collect();
    assert_eq!(first.len(), 3);
}

fn sinsin(p: Point) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

fn sinsin_grad(p: Point) -> [f64; 2] {
    [PI * (PI * p[0]).cos() * (PI * p[1]).sin(), PI * (PI * p[0]).sin() * (PI * p[1]).cos()]
}

/// Independent oracle: successive log2 error ratios under dyadic refinement.
fn dyadic_ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn convergence_rates() {
    let h = hierarchy(4);
    for (k, m, lo, hi) in [(1, 0, 1.8, 2.2), (2, 0, 2.7, 3.3), (1, 1, 0.7, 1.3), (2, 1, 1.7, 2.3)] {
        let r = measure_interp_rate(&h, k, &sinsin, &sinsin_grad, m).unwrap();
        assert!(!r.exact);
        assert!(r.rate >= lo && r.rate <= hi, "k={k} m={m}: rate {}", r.rate);
        let last = *dyadic_ratios(&r.errors).last().unwrap();
        assert!(last >= lo && last <= hi, "k={k} m={m}: dyadic ratio {last}");
        assert_eq!(r.constants.len(), 4);
        let (cmin, cmax) = r.constants.iter().fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(cmax / cmin < 2.0, "{:?}", r.constants);
    }
}

#[test]
fn affine_functions_are_exact() {
    let h = hierarchy(3);
    for k in [1, 2] {
        for m in [0, 1] {
            let r = measure_interp_rate(&h, k, &|p| 3.0 - p[0] + 0.5 * p[1], &|_| [-1.0, 0.5], m).unwrap();
            assert!(r.exact, "k={k} m={m}: {:?}", r.errors);
            assert!(r.rate.is_nan());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_and_idempotent(seed_a in any::<u64>(), seed_b in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, case in 0usize..3) {
        thread_local! {
            static SETUP: (MeshHierarchy, Arc<FeSpace>) = {
                let h = hierarchy(2);
                let s = fine_space(&h, 1);
                (h, s)
            };
        }
        SETUP.with(|(h, space)| {
            let (k, variant) = CASES[case];
            let op = InterpOperator::build(h, space.clone(), 0, 1, k, variant).unwrap();
            let (a, b) = (probe(space.num_dofs(), seed_a), probe(space.num_dofs(), seed_b));
            let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = op.apply_coeffs(&comb);
            let (ia, ib) = (op.apply_coeffs(&a), op.apply_coeffs(&b));
            let rhs: Vec<f64> = ia.iter().zip(&ib).map(|(x, y)| alpha * x + beta * y).collect();
            let scale = max_abs(&rhs).max(1.0);
            prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);
            let twice = op.apply_coeffs(&lhs);
            prop_assert!(max_diff(&twice, &lhs) <= 1e-12 * scale);
            Ok(())
        })?;
    }
}
