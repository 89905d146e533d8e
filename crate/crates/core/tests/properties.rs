use pgdlab::constraints::{project_l0, project_l1, project_lhalf, prox_half, soft_threshold};
use pgdlab::operators::{MeasurementOperator, SorsOperator, Transform};
use pgdlab::{DenseOperator, Penalty};
use proptest::prelude::*;

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..max_len)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

proptest! {
    #[test]
    fn l1_projection_is_feasible_and_idempotent(v in vec_strategy(40), r in 0.0f64..20.0) {
        let p = project_l1(&v, r);
        prop_assert!(l1(&p) <= r * (1.0 + 1e-12) + 1e-12);
        let q = project_l1(&p, r);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn l1_projection_obtuse_angle_and_pythagoras(
        v in vec_strategy(30),
        r in 0.1f64..10.0,
        z_raw in vec_strategy(30),
    ) {
        let n = v.len();
        let mut z: Vec<f64> = z_raw.iter().cycle().take(n).copied().collect();
        let zl1 = l1(&z);
        if zl1 > r {
            z.iter_mut().for_each(|x| *x *= r / zl1);
        }
        let p = project_l1(&v, r);
        let (vp, zp) = (sub(&v, &p), sub(&z, &p));
        let scale = 1.0 + dot(&v, &v) + dot(&z, &z);
        prop_assert!(dot(&vp, &zp) <= 1e-9 * scale);
        let vz = sub(&v, &z);
        prop_assert!(dot(&vp, &vp) + dot(&zp, &zp) <= dot(&vz, &vz) + 1e-9 * scale);
    }

    #[test]
    fn l1_projection_distance_shrinks_with_radius(v in vec_strategy(30), r in 0.0f64..10.0, dr in 0.0f64..5.0) {
        let d = |rad: f64| { let p = project_l1(&v, rad); dot(&sub(&v, &p), &sub(&v, &p)).sqrt() };
        prop_assert!(d(r + dr) <= d(r) + 1e-9);
    }

    #[test]
    fn l1_projection_is_positively_homogeneous(v in vec_strategy(30), r in 0.1f64..10.0, c in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let a = project_l1(&scaled, c * r);
        let b = project_l1(&v, r);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - c * y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn l0_projection_keeps_largest_entries(v in vec_strategy(30), s in 0usize..10) {
        let p = project_l0(&v, s);
        prop_assert!(p.iter().filter(|x| **x != 0.0).count() <= s);
        prop_assert_eq!(project_l0(&p, s), p.clone());
        let kept_min = p.iter().filter(|x| **x != 0.0).map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        for (a, b) in p.iter().zip(&v) {
            prop_assert!(*a == 0.0 || a == b);
            if *a == 0.0 && *b != 0.0 && p.iter().filter(|x| **x != 0.0).count() == s.min(v.len()) {
                prop_assert!(b.abs() <= kept_min);
            }
        }
    }

    #[test]
    fn lhalf_projection_is_feasible_and_idempotent(v in vec_strategy(20), r in 0.0f64..8.0) {
        let p = project_lhalf(&v, r);
        let f = Penalty::LHalf.evaluate(&p);
        prop_assert!(f <= r + 1e-9, "f = {} > {}", f, r);
        let q = project_lhalf(&p, r);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn lhalf_projection_beats_scaling(v in vec_strategy(12), r in 0.1f64..4.0) {
        // Shrinking v uniformly is feasible, so the projection is at least as close.
        let f = Penalty::LHalf.evaluate(&v);
        prop_assume!(f > r);
        let shrunk: Vec<f64> = v.iter().map(|x| x * (r / f).powi(2)).collect();
        let p = project_lhalf(&v, r);
        let dp = dot(&sub(&v, &p), &sub(&v, &p));
        let ds = dot(&sub(&v, &shrunk), &sub(&v, &shrunk));
        prop_assert!(dp <= ds + 1e-9);
    }

    #[test]
    fn soft_threshold_is_nonexpansive(a in vec_strategy(20), b_raw in vec_strategy(20), lambda in 0.0f64..5.0) {
        let b: Vec<f64> = b_raw.iter().cycle().take(a.len()).copied().collect();
        let (ta, tb) = (soft_threshold(&a, lambda), soft_threshold(&b, lambda));
        prop_assert!(dot(&sub(&ta, &tb), &sub(&ta, &tb)) <= dot(&sub(&a, &b), &sub(&a, &b)) + 1e-12);
    }

    #[test]
    fn half_threshold_never_increases_objective(v in -5.0f64..5.0, lambda in 0.01f64..2.0, z in -6.0f64..6.0) {
        let p = prox_half(&[v], lambda)[0];
        let obj = |x: f64| 0.5 * (x - v).powi(2) + lambda * x.abs().sqrt();
        prop_assert!(obj(p) <= obj(z) + 1e-9);
    }

    #[test]
    fn dense_adjoint_identity(m in 1usize..20, n in 1usize..20, seed in any::<u64>()) {
        let op = DenseOperator::<f64>::gaussian(m, n, seed).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..m).map(|i| (i as f64 * 0.91).cos()).collect();
        let lhs = dot(&op.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &op.apply_adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn sors_adjoint_identity(m in 1usize..40, log_n in 1u32..7, dct in any::<bool>(), seed in any::<u64>()) {
        let n = 1usize << log_n;
        let t = if dct { Transform::Dct } else { Transform::Hadamard };
        let op = SorsOperator::<f64>::random(t, m, n, seed).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..m).map(|i| (i as f64 * 0.91).cos()).collect();
        let lhs = dot(&op.apply(&x).unwrap(), &y);
        let rhs = dot(&x, &op.apply_adjoint(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
