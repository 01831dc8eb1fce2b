//! The inter-manifold map `T = S·K·R`, trajectory transport `η = Tξ`, and
//! the checks that certify both.
//!
//! With `S(τ₀) = R(τ₀) = Id`, the glue matrix `K = [[a, d], [b, c]]` is the
//! initial value of `T` and the only free data of the composed solution.

use crate::coefficients::gradient_matrix;
use crate::error::{FlowMapError, Result};
use crate::flows::{
    flow_on_points, integrate_r, integrate_s, integrate_t_direct, phase_velocity, t_equation_rhs,
    HermiteInterpolant, MatrixTrajectory, StateTrajectory,
};
use crate::geometry::CoordinateLayer;
use crate::linalg::{distance, BlockMatrix, Matrix};
use crate::phase::{GlueConstants, ParameterGrid, PhaseState, Reparameterization, SignBlockMatrix};
use crate::provider::SharedProvider;

/// Everything needed to build the map between the `ξ` system (parameter
/// `t`) and the `η` system (parameter `τ`).
#[derive(Clone)]
pub struct MappingProblem {
    pub provider_h: SharedProvider,
    pub provider_c: SharedProvider,
    pub i1: SignBlockMatrix,
    pub i2: SignBlockMatrix,
    pub reparam: Reparameterization,
    pub glue: GlueConstants,
    pub xi0: PhaseState,
    /// Initial `η`; `None` means `K·ξ₀`.
    pub eta0: Option<PhaseState>,
    pub tau_grid: ParameterGrid,
    pub coordinates: CoordinateLayer,
}

impl MappingProblem {
    /// A problem on ordinary coordinates with `η₀ = K·ξ₀`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        provider_h: SharedProvider,
        provider_c: SharedProvider,
        i1: SignBlockMatrix,
        i2: SignBlockMatrix,
        reparam: Reparameterization,
        glue: GlueConstants,
        xi0: PhaseState,
        tau_grid: ParameterGrid,
    ) -> Result<Self> {
        let problem = MappingProblem {
            provider_h,
            provider_c,
            i1,
            i2,
            reparam,
            glue,
            xi0,
            eta0: None,
            tau_grid,
            coordinates: CoordinateLayer::Ordinary,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.xi0.n()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let mut checks = vec![
            ("H provider", self.provider_h.n()),
            ("C provider", self.provider_c.n()),
            ("I1", self.i1.n()),
            ("I2", self.i2.n()),
            ("glue constants", self.glue.n()),
        ];
        if let Some(eta0) = &self.eta0 {
            checks.push(("eta0", eta0.n()));
        }
        for (context, found) in checks {
            if found != n {
                return Err(FlowMapError::Dimension {
                    context,
                    expected: n,
                    found,
                });
            }
        }
        Ok(())
    }

    /// `K·ξ₀`.
    pub fn consistent_eta0(&self) -> Result<PhaseState> {
        PhaseState::new(self.glue.k().mul_vec(self.xi0.values()))
    }

    pub fn with_grid(&self, tau_grid: ParameterGrid) -> Self {
        MappingProblem {
            tau_grid,
            ..self.clone()
        }
    }
}

impl std::fmt::Debug for MappingProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MappingProblem")
            .field("n", &self.n())
            .field("i1", &self.i1)
            .field("i2", &self.i2)
            .field("reparam", &self.reparam)
            .field("glue", &self.glue)
            .field("xi0", &self.xi0)
            .field("eta0", &self.eta0)
            .field("tau_grid", &self.tau_grid)
            .field("coordinates", &self.coordinates)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    /// `t(τ_k)` for every grid point.
    pub t: Vec<f64>,
    /// `ξ(t(τ_k))`, indexed by the τ grid.
    pub xi: StateTrajectory,
    pub s: MatrixTrajectory,
    pub r: MatrixTrajectory,
    pub t_composed: MatrixTrajectory,
    pub t_direct: MatrixTrajectory,
    pub eta_transported: StateTrajectory,
    pub eta_independent: StateTrajectory,
    /// Max over the grid of `‖Ṫ + T I₁ Z − I₂ Y T‖_F` for the composed map.
    pub residual_max: f64,
    /// Same residual for the directly integrated map.
    pub residual_direct_max: f64,
    /// Max of `‖T_composed − T_direct‖_F / (1 + ‖T_direct‖_F)`.
    pub composition_gap_max: f64,
    /// Max of `‖T ξ − η‖`.
    pub transport_error_max: f64,
    /// `‖η₀ − K ξ₀‖`; nonzero when the caller supplied an inconsistent `η₀`.
    pub eta0_mismatch: f64,
}

impl MappingResult {
    pub fn tau(&self) -> Vec<f64> {
        self.xi.grid.points()
    }
}

/// `S K R` sample by sample.
pub fn compose_t(
    s: &MatrixTrajectory,
    glue: &GlueConstants,
    r: &MatrixTrajectory,
) -> Result<MatrixTrajectory> {
    if s.grid != r.grid || s.samples.len() != r.samples.len() {
        return Err(FlowMapError::GridMismatch("compose_t"));
    }
    let samples = s
        .samples
        .iter()
        .zip(&r.samples)
        .map(|(si, ri)| compose_sample(si, glue, ri))
        .collect::<Result<_>>()?;
    Ok(MatrixTrajectory {
        grid: s.grid,
        samples,
    })
}

fn compose_sample(s: &BlockMatrix, glue: &GlueConstants, r: &BlockMatrix) -> Result<BlockMatrix> {
    if s.n() != glue.n() || r.n() != glue.n() {
        return Err(FlowMapError::Dimension {
            context: "compose_t",
            expected: glue.n(),
            found: if s.n() != glue.n() { s.n() } else { r.n() },
        });
    }
    let sk = s.as_matrix() * glue.k().as_matrix();
    BlockMatrix::new(&sk * r.as_matrix())
}

/// The four block formulas
///
/// ```text
/// T₁ = (S₁a + S₂b)R₁ + (S₁d + S₂c)R₃
/// T₂ = (S₁a + S₂b)R₂ + (S₁d + S₂c)R₄
/// T₃ = (S₃a + S₄b)R₁ + (S₃d + S₄c)R₃
/// T₄ = (S₃a + S₄b)R₂ + (S₃d + S₄c)R₄
/// ```
pub fn compose_blocks(
    s: &BlockMatrix,
    glue: &GlueConstants,
    r: &BlockMatrix,
) -> Result<BlockMatrix> {
    let (s1, s2, s3, s4) = s.split();
    let (r1, r2, r3, r4) = r.split();
    let (a, b, c, d) = (glue.a(), glue.b(), glue.c(), glue.d());
    let upper_left = &(&s1 * &a) + &(&s2 * &b);
    let upper_right = &(&s1 * &d) + &(&s2 * &c);
    let lower_left = &(&s3 * &a) + &(&s4 * &b);
    let lower_right = &(&s3 * &d) + &(&s4 * &c);
    let t1 = &(&upper_left * &r1) + &(&upper_right * &r3);
    let t2 = &(&upper_left * &r2) + &(&upper_right * &r4);
    let t3 = &(&lower_left * &r1) + &(&lower_right * &r3);
    let t4 = &(&lower_left * &r2) + &(&lower_right * &r4);
    BlockMatrix::from_blocks(&t1, &t2, &t3, &t4)
}

/// A coefficient field sampled along a trajectory, evaluable between nodes.
enum SampledField {
    Constant(Matrix),
    Interpolated {
        provider: SharedProvider,
        path: HermiteInterpolant,
        context: &'static str,
    },
}

impl SampledField {
    fn at(&self, tau: f64) -> Result<Matrix> {
        match self {
            SampledField::Constant(m) => Ok(m.clone()),
            SampledField::Interpolated {
                provider,
                path,
                context,
            } => gradient_matrix(provider.as_ref(), &path.eval(tau), context),
        }
    }
}

fn relabel(stage: &'static str) -> impl Fn(FlowMapError) -> FlowMapError {
    move |e| match e {
        FlowMapError::Divergence { index, tau, .. } => {
            FlowMapError::Divergence { stage, index, tau }
        }
        other => other,
    }
}

/// Runs the full pipeline: both flows, the S and R systems, composition,
/// direct integration of T, transport and residuals.
pub fn solve_mapping(problem: &MappingProblem) -> Result<MappingResult> {
    problem.validate()?;
    let grid = problem.tau_grid;
    let taus = grid.points();
    let rep = &problem.reparam;
    let t: Vec<f64> = taus.iter().map(|&tau| rep.t_of_tau(tau)).collect();
    if t.iter().any(|x| !x.is_finite()) {
        return Err(FlowMapError::NonFinite("t(tau)"));
    }

    // ξ evolves in t, sampled at t(τ_k).
    let xi = flow_on_points(
        problem.provider_h.as_ref(),
        &problem.i1,
        &problem.xi0,
        &t,
        "xi flow",
    )?;

    let consistent = problem.consistent_eta0()?;
    let eta0 = problem.eta0.clone().unwrap_or_else(|| consistent.clone());
    let eta0_mismatch = distance(eta0.values(), consistent.values());
    let eta = flow_on_points(
        problem.provider_c.as_ref(),
        &problem.i2,
        &eta0,
        &taus,
        "eta flow",
    )?;

    let x_field = sampled_field(
        &problem.provider_h,
        &problem.i1,
        &xi,
        &grid,
        |tau| rep.dt_dtau(tau),
        "X coefficients",
    )?;
    let y_field = sampled_field(
        &problem.provider_c,
        &problem.i2,
        &eta,
        &grid,
        |_| 1.0,
        "Y coefficients",
    )?;

    let y_at = |tau: f64| y_field.at(tau);
    let z_at = |tau: f64| -> Result<Matrix> {
        let rate = rep.dt_dtau(tau);
        if !rate.is_finite() {
            return Err(FlowMapError::NonFinite("dt/dtau"));
        }
        Ok(x_field.at(tau)?.scale(rate))
    };

    let n = problem.n();
    let s = integrate_s(&y_at, &problem.i2, &BlockMatrix::identity(n), &grid)
        .map_err(relabel("S system"))?;
    let r = integrate_r(&z_at, &problem.i1, &BlockMatrix::identity(n), &grid)
        .map_err(relabel("R system"))?;
    let t_composed = compose_t(&s, &problem.glue, &r)?;
    let t_direct = integrate_t_direct(
        &y_at,
        &z_at,
        &problem.i1,
        &problem.i2,
        problem.glue.k(),
        &grid,
    )
    .map_err(relabel("T system"))?;

    let eta_transported: Vec<PhaseState> = t_composed
        .samples
        .iter()
        .zip(&xi)
        .map(|(tk, xk)| PhaseState::new(tk.mul_vec(xk.values())))
        .collect::<Result<_>>()
        .map_err(|_| FlowMapError::NonFinite("transported eta"))?;

    let transport_error_max = eta_transported
        .iter()
        .zip(&eta)
        .map(|(a, b)| distance(a.values(), b.values()))
        .fold(0.0, f64::max);
    let composition_gap_max = t_composed
        .samples
        .iter()
        .zip(&t_direct.samples)
        .map(|(c, d)| (c.as_matrix() - d.as_matrix()).frobenius_norm() / (1.0 + d.frobenius_norm()))
        .fold(0.0, f64::max);

    let ys: Vec<Matrix> = taus.iter().map(|&tau| y_at(tau)).collect::<Result<_>>()?;
    let zs: Vec<Matrix> = taus.iter().map(|&tau| z_at(tau)).collect::<Result<_>>()?;
    let residual_max = residual(&t_composed, &problem.i1, &problem.i2, &ys, &zs);
    let residual_direct_max = residual(&t_direct, &problem.i1, &problem.i2, &ys, &zs);

    Ok(MappingResult {
        t,
        xi: StateTrajectory { grid, samples: xi },
        s,
        r,
        t_composed,
        t_direct,
        eta_transported: StateTrajectory {
            grid,
            samples: eta_transported,
        },
        eta_independent: StateTrajectory { grid, samples: eta },
        residual_max,
        residual_direct_max,
        composition_gap_max,
        transport_error_max,
        eta0_mismatch,
    })
}

/// Coefficient field along a sampled trajectory. `rate(τ)` converts the
/// trajectory's own parameter derivative into a τ-derivative.
fn sampled_field(
    provider: &SharedProvider,
    sign: &SignBlockMatrix,
    samples: &[PhaseState],
    grid: &ParameterGrid,
    rate: impl Fn(f64) -> f64,
    context: &'static str,
) -> Result<SampledField> {
    if provider.is_constant() {
        return Ok(SampledField::Constant(gradient_matrix(
            provider.as_ref(),
            samples[0].values(),
            context,
        )?));
    }
    let values: Vec<Vec<f64>> = samples.iter().map(|s| s.values().to_vec()).collect();
    let slopes = samples
        .iter()
        .zip(grid.points())
        .map(|(s, tau)| {
            let v = phase_velocity(provider.as_ref(), sign, s.values(), context)?;
            let k = rate(tau);
            Ok(v.into_iter().map(|x| k * x).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(SampledField::Interpolated {
        provider: provider.clone(),
        path: HermiteInterpolant::new(*grid, values, slopes)?,
        context,
    })
}

/// Fourth-order finite-difference derivative of sampled matrices at index
/// `k`: five-point central stencil in the interior, five-point one-sided
/// stencils at the two ends. Grids with fewer than four intervals fall back
/// to second order.
pub fn sampled_derivative(samples: &[&Matrix], h: f64, k: usize) -> Matrix {
    let last = samples.len() - 1;
    let combo = |terms: &[(usize, f64)], denom: f64| {
        let mut acc = Matrix::zeros(samples[0].rows(), samples[0].cols());
        for &(i, w) in terms {
            acc = acc.add_scaled(w, samples[i]);
        }
        acc.scale(1.0 / (denom * h))
    };
    if last == 1 {
        return combo(&[(0, -1.0), (1, 1.0)], 1.0);
    }
    if last < 4 {
        return match k {
            0 => combo(&[(0, -3.0), (1, 4.0), (2, -1.0)], 2.0),
            k if k == last => combo(&[(k, 3.0), (k - 1, -4.0), (k - 2, 1.0)], 2.0),
            k => combo(&[(k - 1, -1.0), (k + 1, 1.0)], 2.0),
        };
    }
    match k {
        0 => combo(
            &[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)],
            12.0,
        ),
        1 => combo(
            &[(0, -3.0), (1, -10.0), (2, 18.0), (3, -6.0), (4, 1.0)],
            12.0,
        ),
        k if k == last => combo(
            &[
                (k, 25.0),
                (k - 1, -48.0),
                (k - 2, 36.0),
                (k - 3, -16.0),
                (k - 4, 3.0),
            ],
            12.0,
        ),
        k if k == last - 1 => combo(
            &[
                (k + 1, 3.0),
                (k, 10.0),
                (k - 1, -18.0),
                (k - 2, 6.0),
                (k - 3, -1.0),
            ],
            12.0,
        ),
        k => combo(
            &[(k - 2, 1.0), (k - 1, -8.0), (k + 1, 8.0), (k + 2, -1.0)],
            12.0,
        ),
    }
}

/// Max over the grid of `‖Ṫ + T I₁ Z − I₂ Y T‖_F` with `Ṫ` from
/// [`sampled_derivative`].
pub fn residual(
    traj: &MatrixTrajectory,
    i1: &SignBlockMatrix,
    i2: &SignBlockMatrix,
    ys: &[Matrix],
    zs: &[Matrix],
) -> f64 {
    let mats: Vec<&Matrix> = traj.samples.iter().map(BlockMatrix::as_matrix).collect();
    let h = traj.grid.h();
    (0..mats.len())
        .map(|k| {
            let d = sampled_derivative(&mats, h, k);
            (&d - &t_equation_rhs(i1, i2, &ys[k], &zs[k], mats[k])).frobenius_norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub tolerance: f64,
    pub residual_max: f64,
    pub composition_gap_max: f64,
    pub transport_error_max: f64,
    pub residual_ok: bool,
    pub composition_ok: bool,
    pub transport_ok: bool,
    /// False when the problem's `η₀` differs from `K ξ₀`.
    pub eta0_consistent: bool,
    pub eta0_mismatch: f64,
}

/// Passes iff the residual, the composed/direct gap and the transport error
/// are all within `tol`. Never fails outright.
pub fn verify_composition(result: &MappingResult, tol: f64) -> VerificationReport {
    let residual_ok = result.residual_max <= tol;
    let composition_ok = result.composition_gap_max <= tol;
    let transport_ok = result.transport_error_max <= tol;
    VerificationReport {
        passed: residual_ok && composition_ok && transport_ok,
        tolerance: tol,
        residual_max: result.residual_max,
        composition_gap_max: result.composition_gap_max,
        transport_error_max: result.transport_error_max,
        residual_ok,
        composition_ok,
        transport_ok,
        eta0_consistent: result.eta0_mismatch == 0.0,
        eta0_mismatch: result.eta0_mismatch,
    }
}

/// The same problem read in ordinary local coordinates.
pub fn recover_second_formalism(problem: &MappingProblem) -> MappingProblem {
    MappingProblem {
        coordinates: CoordinateLayer::Ordinary,
        ..problem.clone()
    }
}

/// Residual of the composed map on each grid, paired with the grid step.
pub fn residual_convergence(
    problem: &MappingProblem,
    grids: &[ParameterGrid],
) -> Result<Vec<(f64, f64)>> {
    grids
        .iter()
        .map(|g| Ok((g.h(), solve_mapping(&problem.with_grid(*g))?.residual_max)))
        .collect()
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
