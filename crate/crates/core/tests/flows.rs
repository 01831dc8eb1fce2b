mod common;

use std::f64::consts::{E, FRAC_PI_2, PI};

use common::{dense_sign, expm, random_matrix, random_spd, random_state, rng, sign_pair};
use flowmap::flows::{integrate_r_with, integrate_s_with, integrate_t_direct_with};
use flowmap::{
    energy, flow_eta, flow_xi, integrate_r, integrate_s, integrate_t_direct, BlockMatrix,
    ConstantCoefficients, FlowMapError, Matrix, ParameterGrid, PhaseState, RhsForm,
    SignBlockMatrix,
};

fn grid(end: f64, steps: usize) -> ParameterGrid {
    ParameterGrid::new(0.0, end, steps).unwrap()
}

fn constant(m: Matrix) -> ConstantCoefficients {
    ConstantCoefficients::new(&m).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `exp(I M t) x₀` by nalgebra.
fn linear_oracle(sign: &SignBlockMatrix, m: &Matrix, t: f64, x0: &[f64]) -> Vec<f64> {
    expm(&(&dense_sign(sign) * m).scale(t)).mul_vec(x0)
}

#[test]
fn harmonic_quarter_turn() {
    let h = constant(Matrix::identity(2));
    let i1 = SignBlockMatrix::new(1, 1.0, -1.0).unwrap();
    let x0 = PhaseState::new(vec![1.0, 0.0]).unwrap();
    let traj = flow_xi(&h, &i1, &x0, &grid(FRAC_PI_2, 1571)).unwrap();
    let end = traj.last().values();
    assert!(max_gap(end, &[0.0, -1.0]) < 1e-8, "{end:?}");
    let oracle = linear_oracle(&i1, &Matrix::identity(2), FRAC_PI_2, x0.values());
    assert!(max_gap(end, &oracle) < 1e-8);
    assert_eq!(traj.samples[0], x0);
    assert_eq!(traj.samples.len(), 1572);
}

#[test]
fn hyperbolic_growth_reaches_e() {
    let h = constant(Matrix::identity(2));
    let i1 = SignBlockMatrix::new(1, 1.0, 1.0).unwrap();
    let x0 = PhaseState::new(vec![1.0, 1.0]).unwrap();
    let traj = flow_xi(&h, &i1, &x0, &grid(1.0, 1000)).unwrap();
    assert!(max_gap(traj.last().values(), &[E, E]) < 1e-8);
    let eta = flow_eta(&h, &i1, &x0, &grid(1.0, 1000)).unwrap();
    assert_eq!(eta.samples, traj.samples);
}

#[test]
fn block_rotation_in_four_dimensions() {
    let c = constant(Matrix::identity(4));
    let i2 = SignBlockMatrix::symplectic(2);
    let e0 = PhaseState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let traj = flow_eta(&c, &i2, &e0, &grid(PI, 3142)).unwrap();
    assert!(max_gap(traj.last().values(), &[-1.0, 0.0, 0.0, 0.0]) < 1e-8);
}

#[test]
fn random_linear_flows_match_exponential() {
    let mut r = rng(21);
    for k in 0..8 {
        let n = 1 + k % 2;
        let (u, l) = sign_pair(k);
        let sign = SignBlockMatrix::new(n, u, l).unwrap();
        let m = random_spd(&mut r, 2 * n, 0.2, 1.0);
        let x0 = random_state(&mut r, n);
        let traj = flow_xi(&constant(m.clone()), &sign, &x0, &grid(2.0, 2000)).unwrap();
        let oracle = linear_oracle(&sign, &m, 2.0, x0.values());
        assert!(max_gap(traj.last().values(), &oracle) < 1e-9);
    }
}

#[test]
fn zero_fields_freeze_every_integrator() {
    let zero = constant(Matrix::zeros(2, 2));
    let sign = SignBlockMatrix::symplectic(1);
    let x0 = PhaseState::new(vec![0.3, -0.7]).unwrap();
    let g = grid(1.0, 50);
    for traj in [
        flow_xi(&zero, &sign, &x0, &g).unwrap(),
        flow_eta(&zero, &sign, &x0, &g).unwrap(),
    ] {
        assert!(traj.samples.iter().all(|s| *s == x0));
    }
    let z = |_: f64| Ok(Matrix::zeros(2, 2));
    let m0 =
        BlockMatrix::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()).unwrap();
    let s = integrate_s(&z, &sign, &m0, &g).unwrap();
    let rr = integrate_r(&z, &sign, &m0, &g).unwrap();
    let t = integrate_t_direct(&z, &z, &sign, &sign, &m0, &g).unwrap();
    for traj in [s, rr, t] {
        assert!(traj.samples.iter().all(|m| *m == m0));
    }
}

#[test]
fn s_and_r_reach_minus_identity_at_pi() {
    let id = |_: f64| Ok(Matrix::identity(2));
    let sign = SignBlockMatrix::new(1, 1.0, -1.0).unwrap();
    let g = grid(PI, 3142);
    let s = integrate_s(&id, &sign, &BlockMatrix::identity(1), &g).unwrap();
    let r = integrate_r(&id, &sign, &BlockMatrix::identity(1), &g).unwrap();
    let minus = Matrix::identity(2).scale(-1.0);
    assert!((s.last().as_matrix() - &minus).max_abs() < 1e-8);
    assert!((r.last().as_matrix() - &minus).max_abs() < 1e-8);
    assert_eq!(s.samples[0], BlockMatrix::identity(1));
}

#[test]
fn matrix_systems_match_exponentials() {
    let mut r = rng(22);
    for k in 0..8 {
        let n = 1 + k % 2;
        let (u1, l1) = sign_pair(k);
        let (u2, l2) = sign_pair(k + 1);
        let i1 = SignBlockMatrix::new(n, u1, l1).unwrap();
        let i2 = SignBlockMatrix::new(n, u2, l2).unwrap();
        let y = random_spd(&mut r, 2 * n, 0.2, 1.0);
        let z = random_spd(&mut r, 2 * n, 0.2, 1.0);
        let k0 = BlockMatrix::new(random_matrix(&mut r, 2 * n, 2 * n, 1.0)).unwrap();
        let (yf, zf) = (|_: f64| Ok(y.clone()), |_: f64| Ok(z.clone()));
        let g = grid(1.0, 1000);
        let s = integrate_s(&yf, &i2, &BlockMatrix::identity(n), &g).unwrap();
        let rr = integrate_r(&zf, &i1, &BlockMatrix::identity(n), &g).unwrap();
        let t = integrate_t_direct(&yf, &zf, &i1, &i2, &k0, &g).unwrap();
        let es = expm(&(&dense_sign(&i2) * &y));
        let er = expm(&(&dense_sign(&i1) * &z).scale(-1.0));
        assert!((s.last().as_matrix() - &es).max_abs() < 1e-10);
        assert!((rr.last().as_matrix() - &er).max_abs() < 1e-10);
        let et = &(&es * k0.as_matrix()) * &er;
        assert!((t.last().as_matrix() - &et).max_abs() < 1e-9);
    }
}

#[test]
fn identical_generators_cancel_in_t() {
    let y = |_: f64| Ok(Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap());
    let sign = SignBlockMatrix::symplectic(1);
    let t = integrate_t_direct(
        &y,
        &y,
        &sign,
        &sign,
        &BlockMatrix::identity(1),
        &grid(5.0, 5000),
    )
    .unwrap();
    let worst = t
        .samples
        .iter()
        .map(|m| (m.as_matrix() - &Matrix::identity(2)).frobenius_norm())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn rk4_endpoint_error_drops_sixteenfold() {
    let h = constant(Matrix::identity(2));
    let i1 = SignBlockMatrix::new(1, 1.0, -1.0).unwrap();
    let x0 = PhaseState::new(vec![1.0, 0.0]).unwrap();
    let end: f64 = 1.0;
    let exact = [end.cos(), -end.sin()];
    let errors: Vec<(f64, f64)> = [100, 200, 400]
        .iter()
        .map(|&steps| {
            let g = grid(end, steps);
            let traj = flow_xi(&h, &i1, &x0, &g).unwrap();
            (g.h(), max_gap(traj.last().values(), &exact))
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0].1 / w[1].1;
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    }
    let slope = flowmap::mapping::loglog_slope(&errors);
    assert!((slope - 4.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn antisymmetric_sign_conserves_energy() {
    let mut r = rng(23);
    for k in 0..6 {
        let n = 1 + k % 3;
        let (u, _) = sign_pair(k);
        let sign = SignBlockMatrix::new(n, u, -u).unwrap();
        let h = constant(random_spd(&mut r, 2 * n, 0.2, 1.5));
        let x0 = random_state(&mut r, n);
        let e0 = energy(&h, &x0).unwrap();
        let traj = flow_xi(&h, &sign, &x0, &grid(10.0, 10_000)).unwrap();
        let drift = traj
            .samples
            .iter()
            .map(|s| (energy(&h, s).unwrap() - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-8, "drift {drift}");
    }
}

#[test]
fn blockwise_and_matrix_forms_agree_bitwise() {
    let mut r = rng(24);
    for n in [1, 2] {
        for k in 0..4 {
            let (u1, l1) = sign_pair(k);
            let (u2, l2) = sign_pair(k + 2);
            let i1 = SignBlockMatrix::new(n, u1, l1).unwrap();
            let i2 = SignBlockMatrix::new(n, u2, l2).unwrap();
            let a = random_matrix(&mut r, 2 * n, 2 * n, 1.0);
            let b = random_matrix(&mut r, 2 * n, 2 * n, 1.0);
            // Time-dependent fields so that every stage sees a new generator.
            let y = |tau: f64| Ok(&a + &b.scale(tau.sin()));
            let z = |tau: f64| Ok(&b - &a.scale(0.5 * tau.cos()));
            let s0 = BlockMatrix::new(random_matrix(&mut r, 2 * n, 2 * n, 1.0)).unwrap();
            let g = grid(1.0, 200);
            let pairs = [
                (
                    integrate_s_with(RhsForm::Matrix, &y, &i2, &s0, &g).unwrap(),
                    integrate_s_with(RhsForm::Blockwise, &y, &i2, &s0, &g).unwrap(),
                ),
                (
                    integrate_r_with(RhsForm::Matrix, &z, &i1, &s0, &g).unwrap(),
                    integrate_r_with(RhsForm::Blockwise, &z, &i1, &s0, &g).unwrap(),
                ),
                (
                    integrate_t_direct_with(RhsForm::Matrix, &y, &z, &i1, &i2, &s0, &g).unwrap(),
                    integrate_t_direct_with(RhsForm::Blockwise, &y, &z, &i1, &i2, &s0, &g).unwrap(),
                ),
            ];
            for (matrix, block) in pairs {
                assert_eq!(matrix.samples, block.samples, "n={n} signs {k}");
            }
        }
    }
}

#[test]
fn divergence_reports_stage_and_index() {
    let h = constant(Matrix::identity(2).scale(10.0));
    let sign = SignBlockMatrix::new(1, 1.0, 1.0).unwrap();
    let x0 = PhaseState::new(vec![1.0, 1.0]).unwrap();
    match flow_xi(&h, &sign, &x0, &grid(5.0, 5000)) {
        Err(FlowMapError::Divergence { stage, index, .. }) => {
            assert_eq!(stage, "xi flow");
            // |ξ| = e^{10 t} crosses 1e12 near t = 2.76.
            assert!((2700..2800).contains(&index), "{index}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}
