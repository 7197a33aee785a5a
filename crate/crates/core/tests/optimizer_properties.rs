use heatflux_core::optimizer::{
    bfgs_inverse_update, pqn_solve, project_box, search_direction, Objective, OptimizerConfig,
};
use heatflux_core::Result;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const BOX: f64 = 2.0;

fn spd(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(dim, dim, &entries[..dim * dim]);
    &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5
}

fn state() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, DMatrix<f64>)> {
    (2usize..9).prop_flat_map(|dim| {
        (
            prop::collection::vec(
                prop_oneof![Just(0.0), Just(BOX), 0.0f64..BOX, -1.0f64..3.0],
                dim,
            ),
            prop::collection::vec(-5.0f64..5.0, dim),
            prop::collection::vec(-1.0f64..1.0, dim * dim),
        )
            .prop_map(move |(beta, grad, s)| (project_box(&beta, BOX), grad, spd(dim, &s)))
    })
}

/// Straightforward restatement of the active-set rules: bound variables the
/// step would push outward are frozen, first by the raw gradient, then by the
/// gradient scaled with the reduced matrix.
fn brute_force(beta: &[f64], grad: &[f64], s: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let dim = beta.len();
    let outward = |i: usize, v: f64| (beta[i] == 0.0 && v > 0.0) || (beta[i] == BOX && v < 0.0);
    let i1: Vec<usize> = (0..dim).filter(|&i| outward(i, grad[i])).collect();
    let reduce = |frozen: &[usize]| {
        let mut d = DMatrix::<f64>::identity(dim, dim);
        for &i in frozen {
            d[(i, i)] = 0.0;
        }
        &d * s * &d
    };
    let w = reduce(&i1) * DVector::from_column_slice(grad);
    let i2: Vec<usize> = (0..dim)
        .filter(|i| !i1.contains(i) && outward(*i, w[*i]))
        .collect();
    let frozen: Vec<usize> = i1.iter().chain(&i2).copied().collect();
    let p = -(reduce(&frozen) * DVector::from_column_slice(grad));
    (i1, i2, p.iter().copied().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn active_sets_match_brute_force((beta, grad, s) in state()) {
        let dir = search_direction(&beta, &grad, &s, BOX);
        let (i1, i2, p) = brute_force(&beta, &grad, &s);
        prop_assert_eq!(&dir.i1, &i1);
        prop_assert_eq!(&dir.i2, &i2);
        for (a, b) in dir.p.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn projection_is_idempotent_and_feasible(beta in prop::collection::vec(-10.0f64..10.0, 1..30)) {
        let once = project_box(&beta, BOX);
        prop_assert!(once.iter().all(|b| (0.0..=BOX).contains(b)));
        prop_assert_eq!(project_box(&once, BOX), once);
    }

    #[test]
    fn bfgs_update_satisfies_the_secant_equation(
        (dim, entries, sk, gk) in (2usize..10).prop_flat_map(|d| (
            Just(d),
            prop::collection::vec(-1.0f64..1.0, d * d),
            prop::collection::vec(-1.0f64..1.0, d),
            prop::collection::vec(-1.0f64..1.0, d),
        ))
    ) {
        let s = spd(dim, &entries);
        match bfgs_inverse_update(&s, &sk, &gk) {
            Some(next) => {
                let lhs = &next * DVector::from_column_slice(&gk);
                let rhs = DVector::from_column_slice(&sk);
                prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1e-300) * (1.0 + next.norm()));
                prop_assert!((&next - next.transpose()).norm() == 0.0);
            }
            None => {
                let sg: f64 = sk.iter().zip(&gk).map(|(a, b)| a * b).sum();
                let norms = DVector::from_column_slice(&sk).norm() * DVector::from_column_slice(&gk).norm();
                prop_assert!(sg <= 1e-12 * norms);
            }
        }
    }
}

/// Box-constrained Rosenbrock-like test function with its minimiser on the
/// upper bound of the first variable.
struct Tilted;

impl Objective for Tilted {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient(x)?.0)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b, c) = (x[0] - 3.0, x[1] - x[0] * x[0] / 4.0, x[2] - 0.3);
        let f = a * a + 10.0 * b * b + c * c * c * c + c * c;
        let g = vec![
            2.0 * a - 10.0 * b * x[0],
            20.0 * b,
            4.0 * c * c * c + 2.0 * c,
        ];
        Ok((f, g))
    }
}

#[test]
fn every_iterate_is_feasible_and_every_update_is_secant() {
    let mut cfg = OptimizerConfig::new(BOX, 200);
    cfg.discrepancy_threshold = None;
    let st = pqn_solve(&Tilted, &[0.5, 0.5, 0.5], &cfg).unwrap();
    assert!(st.beta.iter().all(|b| (0.0..=BOX).contains(b)));
    assert!(
        (st.beta[0] - BOX).abs() < 1e-12,
        "upper bound not reached: {:?}",
        st.beta
    );
    for w in st.history.windows(2) {
        assert!(w[1].f <= w[0].f, "objective increased at k = {}", w[1].k);
    }

    // Replay the iteration and check the secant equation at each applied update.
    let mut beta = vec![0.5, 0.5, 0.5];
    let mut s = DMatrix::<f64>::identity(3, 3);
    let (mut f, mut g) = Tilted.value_and_gradient(&beta).unwrap();
    let mut applied = 0;
    for _ in 0..60 {
        let dir = search_direction(&beta, &g, &s, BOX);
        if dir.p.iter().all(|v| *v == 0.0) {
            break;
        }
        let (step, _) =
            heatflux_core::optimizer::armijo_projected(&Tilted, &beta, f, &g, &dir.p, &cfg)
                .unwrap();
        let Some(step) = step else { break };
        let (fn_, gn) = Tilted.value_and_gradient(&step.beta).unwrap();
        assert!(step.beta.iter().all(|b| (0.0..=BOX).contains(b)));
        let sk: Vec<f64> = step.beta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if let Some(next) = bfgs_inverse_update(&s, &sk, &yk) {
            let lhs = &next * DVector::from_column_slice(&yk);
            let rhs = DVector::from_column_slice(&sk);
            assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm() * (1.0 + next.norm()));
            s = next;
            applied += 1;
        }
        beta = step.beta;
        f = fn_;
        g = gn;
    }
    assert!(applied > 5);
}
