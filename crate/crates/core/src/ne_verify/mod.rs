//! Statistical checks of the α-potential inequality over unilateral deviations and of
//! the ε-Nash property of the Riccati feedback control.

mod deviations;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub use deviations::{gradient_deviations, sample_deviations, time_bump, Deviation, DeviationKind};

use crate::error::{Error, Result};
use crate::game_model::{DifferentialGame, LqGameSpec};
use crate::ode_solvers::{integrate_backward, solve_riccati, RiccatiSolution, TimeGrid};
use crate::potential_eval::{all_value_samples, potential_lq_samples, potential_sensitivity_samples, McEstimate};
use crate::scalar::{mean_and_stderr, Scalar};
use crate::sde_sim::{FeedbackLaw, NoiseBatch, StrategyProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Two-sided 3σ level split over `m` comparisons.
pub fn bonferroni_z(m: usize) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let p = 2.0 * (1.0 - std.cdf(3.0));
    std.inverse_cdf(1.0 - p / (2.0 * m.max(1) as f64))
}

/// Which representation of the potential to evaluate.
#[derive(Clone, Copy, Debug)]
pub enum PhiEstimator<'a, S: Scalar> {
    /// Lifted-state form, LQ games only.
    Lq(&'a LqGameSpec<S>),
    /// Sensitivity form, any game.
    Sensitivity,
}

impl<S: Scalar> PhiEstimator<'_, S> {
    fn samples(&self, game: &dyn DifferentialGame<S>, profile: &StrategyProfile<S>, noise: &NoiseBatch<S>) -> Result<Vec<S>> {
        match self {
            PhiEstimator::Lq(spec) => potential_lq_samples(spec, profile, noise),
            PhiEstimator::Sensitivity => potential_sensitivity_samples(game, profile, noise),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            PhiEstimator::Lq(_) => crate::potential_eval::ID_POTENTIAL_LQ,
            PhiEstimator::Sensitivity => crate::potential_eval::ID_POTENTIAL_SENSITIVITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationTrial {
    pub player: usize,
    pub kind: DeviationKind,
    pub param: f64,
    pub clipped: bool,
    /// `V_i(deviated) − V_i(base)`.
    pub d_v: McEstimate,
    /// `Φ(deviated) − Φ(base)`.
    pub d_phi: McEstimate,
    /// `|d_v − d_phi|` from paired per-path differences.
    pub gap: f64,
    pub gap_std_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCheckOptions {
    /// Reference α the gaps are compared with.
    pub alpha_reference: f64,
    /// Absolute slack for floating-point and discretization effects.
    pub abs_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaCheckReport {
    pub phi_estimator: String,
    pub trials: Vec<DeviationTrial>,
    pub max_gap: f64,
    pub max_gap_std_error: f64,
    pub max_gap_trial: usize,
    pub alpha_reference: f64,
    pub abs_tol: f64,
    pub z_bonferroni: f64,
    pub verdict: Verdict,
}

/// Measures `|ΔV_i − ΔΦ|` for each deviation on common noise: all four evaluations of a
/// trial share the batch `noise`.
pub fn check_alpha_potential<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    phi: PhiEstimator<'_, S>,
    base: &StrategyProfile<S>,
    deviations: &[Deviation<S>],
    noise: &NoiseBatch<S>,
    opts: AlphaCheckOptions,
) -> Result<AlphaCheckReport> {
    if deviations.is_empty() {
        return Err(Error::InvalidArgument("no deviations to check".into()));
    }
    for d in deviations {
        if d.profile.grid() != base.grid() || base.grid() != &noise.grid {
            return Err(Error::GridMismatch("base, deviations and noise must share one grid".into()));
        }
        if d.player >= game.n_players() {
            return Err(Error::InvalidArgument(format!("deviation player {} out of range", d.player)));
        }
    }
    let v_base = all_value_samples(game, base, noise)?;
    let phi_base = phi.samples(game, base, noise)?;
    let trials = deviations
        .par_iter()
        .map(|d| {
            let v_dev = all_value_samples(game, &d.profile, noise)?;
            let phi_dev = phi.samples(game, &d.profile, noise)?;
            let vi_dev: Vec<S> = v_dev.iter().map(|v| v[d.player]).collect();
            let vi_base: Vec<S> = v_base.iter().map(|v| v[d.player]).collect();
            let d_v = McEstimate::paired(&vi_dev, &vi_base, noise, "value_difference")?;
            let d_phi = McEstimate::paired(&phi_dev, &phi_base, noise, "potential_difference")?;
            let gap_samples: Vec<S> =
                (0..vi_dev.len()).map(|p| (vi_dev[p] - vi_base[p]) - (phi_dev[p] - phi_base[p])).collect();
            let (g, se) = mean_and_stderr(&gap_samples);
            Ok(DeviationTrial {
                player: d.player,
                kind: d.kind,
                param: d.param,
                clipped: d.clipped,
                d_v,
                d_phi,
                gap: g.as_f64().abs(),
                gap_std_error: se.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let z = bonferroni_z(trials.len());
    let (idx, worst) = trials
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.gap.total_cmp(&b.1.gap))
        .expect("non-empty");
    let limit = opts.alpha_reference + opts.abs_tol;
    let verdict = if trials.iter().any(|t| t.gap - z * t.gap_std_error > limit) {
        Verdict::Violated
    } else if trials.iter().all(|t| t.gap + z * t.gap_std_error <= limit) {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    Ok(AlphaCheckReport {
        phi_estimator: phi.id().to_string(),
        max_gap: worst.gap,
        max_gap_std_error: worst.gap_std_error,
        max_gap_trial: idx,
        trials,
        alpha_reference: opts.alpha_reference,
        abs_tol: opts.abs_tol,
        z_bonferroni: z,
        verdict,
    })
}

/// Deviation budget for [`check_epsilon_ne`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeBudget {
    /// Deviations per player, split evenly over `kinds`.
    pub per_player: usize,
    pub kinds: Vec<DeviationKind>,
    pub seed: u64,
    pub control_bound: f64,
    /// Absolute slack added to every threshold.
    pub abs_tol: f64,
}

impl Default for NeBudget {
    fn default() -> Self {
        Self { per_player: 200, kinds: DeviationKind::ALL.to_vec(), seed: 0, control_bound: 1e6, abs_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerNe {
    pub player: usize,
    pub n_deviations: usize,
    /// Largest `V_i(u*) − V_i(deviated)` observed.
    pub best_improvement: f64,
    pub std_error: f64,
    pub best_kind: DeviationKind,
    pub best_param: f64,
    /// `2|V_i^{Δt}(u*) − V_i^{Δt/2}(u*)|`, the discretization proxy.
    pub bias_estimate: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Single-player cross-check against the exact optimum of the scalar control problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinglePlayerCheck {
    pub exact_optimum: f64,
    pub value_at_control: f64,
    /// Richardson extrapolation `2V^{Δt/2} − V^{Δt}` of the value of `u*`.
    pub extrapolated_value: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeReport {
    pub control_id: String,
    pub players: Vec<PlayerNe>,
    pub alpha_reference: f64,
    /// Largest per-player bias estimate, reported as the empirical ε.
    pub epsilon_proxy: f64,
    pub z_bonferroni: f64,
    pub single_player: Option<SinglePlayerCheck>,
    pub verdict: Verdict,
}

impl NeReport {
    /// Plain-text table: player, kind, improvement, σ, verdict.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:>6}  {:<14} {:>14} {:>12} {:>12}  {}\n", "player", "kind", "improvement", "sigma", "threshold", "verdict");
        for p in &self.players {
            s += &format!(
                "{:>6}  {:<14} {:>14.6e} {:>12.3e} {:>12.3e}  {}\n",
                p.player + 1,
                p.best_kind.name(),
                p.best_improvement,
                p.std_error,
                p.threshold,
                p.verdict.name()
            );
        }
        s
    }
}

/// Deviations for every player according to `budget`.
fn budget_deviations<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    base: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    player: usize,
    budget: &NeBudget,
) -> Result<Vec<Deviation<S>>> {
    let kinds: Vec<DeviationKind> = budget
        .kinds
        .iter()
        .copied()
        .filter(|k| *k != DeviationKind::FeedbackTilt || base.feedback_law().is_some())
        .collect();
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("deviation budget lists no usable kinds".into()));
    }
    let mut out = Vec::with_capacity(budget.per_player);
    for (j, kind) in kinds.iter().enumerate() {
        let count = budget.per_player / kinds.len() + usize::from(j < budget.per_player % kinds.len());
        if count == 0 {
            continue;
        }
        let mut devs = match kind {
            DeviationKind::GradientTilt => gradient_deviations(game, base, noise, player, count, budget.control_bound)?,
            k => sample_deviations(base, player, *k, count, budget.seed, budget.control_bound)?,
        };
        out.append(&mut devs);
    }
    Ok(out)
}

/// Checks that no sampled unilateral deviation from the Riccati feedback improves any
/// player by more than `alpha_reference` plus the grid-refinement bias proxy.
pub fn check_epsilon_ne<S: Scalar>(
    spec: &LqGameSpec<S>,
    riccati: &RiccatiSolution<S>,
    budget: &NeBudget,
    noise: &NoiseBatch<S>,
    alpha_reference: f64,
) -> Result<NeReport> {
    let n = spec.n_players;
    let law = FeedbackLaw::new(spec, riccati, &noise.grid)?;
    let base = StrategyProfile::feedback(law);
    let v_base = all_value_samples(spec, &base, noise)?;

    let fine_noise = noise.refine(2)?;
    let fine_ric = solve_riccati(spec, &riccati.grid.refine(2)?)?;
    let fine_base = StrategyProfile::feedback(FeedbackLaw::new(spec, &fine_ric, &fine_noise.grid)?);
    let v_fine = all_value_samples(spec, &fine_base, &fine_noise)?;

    let all_devs = (0..n).map(|i| budget_deviations(spec, &base, noise, i, budget)).collect::<Result<Vec<_>>>()?;
    let total: usize = all_devs.iter().map(Vec::len).sum();
    let z = bonferroni_z(total);

    let mut players = Vec::with_capacity(n);
    for (i, devs) in all_devs.iter().enumerate() {
        let vi: Vec<S> = v_base.iter().map(|v| v[i]).collect();
        let vf: Vec<S> = v_fine.iter().map(|v| v[i]).collect();
        let bias = 2.0 * (mean_and_stderr(&vi).0 - mean_and_stderr(&vf).0).as_f64().abs();
        let improvements = devs
            .par_iter()
            .map(|d| {
                let vd: Vec<S> = all_value_samples(spec, &d.profile, noise)?.into_iter().map(|v| v[i]).collect();
                let diff: Vec<S> = vi.iter().zip(&vd).map(|(a, b)| *a - *b).collect();
                let (m, se) = mean_and_stderr(&diff);
                Ok((m.as_f64(), se.as_f64()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (best, (imp, se)) = improvements
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(k, v)| (k, *v))
            .expect("non-empty deviation set");
        let base_threshold = alpha_reference + bias + budget.abs_tol;
        let verdict = if improvements.iter().all(|(m, s)| *m <= base_threshold + z * s) {
            if improvements.iter().all(|(m, s)| *m + z * s <= base_threshold) || improvements.iter().all(|(_, s)| *s == 0.0) {
                Verdict::Consistent
            } else {
                Verdict::Inconclusive
            }
        } else if improvements.iter().any(|(m, s)| *m - z * s > base_threshold) {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        };
        players.push(PlayerNe {
            player: i,
            n_deviations: devs.len(),
            best_improvement: imp,
            std_error: se,
            best_kind: devs[best].kind,
            best_param: devs[best].param,
            bias_estimate: bias,
            threshold: base_threshold + z * se,
            verdict,
        });
    }

    let single_player = if n == 1 {
        let exact = single_player_optimum(spec, riccati.grid.n_steps * 8)?;
        let (vc, se_c) = mean_and_stderr(&v_base.iter().map(|v| v[0]).collect::<Vec<_>>());
        let (vf, se_f) = mean_and_stderr(&v_fine.iter().map(|v| v[0]).collect::<Vec<_>>());
        let extrapolated = 2.0 * vf.as_f64() - vc.as_f64();
        let se = (4.0 * se_f.as_f64().powi(2) + se_c.as_f64().powi(2)).sqrt();
        let tolerance = players[0].bias_estimate + budget.abs_tol + z * se;
        let verdict = if (extrapolated - exact).abs() <= tolerance { Verdict::Consistent } else { Verdict::Violated };
        Some(SinglePlayerCheck {
            exact_optimum: exact,
            value_at_control: vc.as_f64(),
            extrapolated_value: extrapolated,
            std_error: se,
            tolerance,
            verdict,
        })
    } else {
        None
    };

    let mut verdict = worst_verdict(players.iter().map(|p| p.verdict));
    if let Some(sp) = &single_player {
        verdict = worst_verdict([verdict, sp.verdict]);
    }
    Ok(NeReport {
        control_id: "riccati_feedback".into(),
        epsilon_proxy: players.iter().map(|p| p.bias_estimate).fold(0.0, f64::max),
        players,
        alpha_reference,
        z_bonferroni: z,
        single_player,
        verdict,
    })
}

fn worst_verdict(it: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Consistent;
    for v in it {
        match v {
            Verdict::Violated => return Verdict::Violated,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Consistent => {}
        }
    }
    out
}

/// Optimal cost of the one-player problem `min E[∫u² dt + γ(X_T − d)²]`,
/// `dX = (aX + u)dt + σdW`, from `V = Px² + 2sx + c` with
/// `Ṗ = P² − 2aP`, `ṡ = (P − a)s`, `ċ = s² − σ²P`.
pub fn single_player_optimum<S: Scalar>(spec: &LqGameSpec<S>, n_steps: usize) -> Result<f64> {
    if spec.n_players != 1 {
        return Err(Error::InvalidArgument(format!("single-player optimum needs N = 1, got {}", spec.n_players)));
    }
    let h = spec.horizon.as_f64();
    let grid = TimeGrid::<f64>::uniform(h, n_steps.max(2))?;
    let (gamma, d) = (spec.gamma[0].as_f64(), spec.d[0].as_f64());
    let a_fn = spec.a_fn[0].clone();
    let s_fn = spec.sigma_fn[0].clone();
    let path = integrate_backward(
        |t, y, dy| {
            let (a, s) = (a_fn.eval_f64(t), s_fn.eval_f64(t));
            dy[0] = y[0] * y[0] - 2.0 * a * y[0];
            dy[1] = (y[0] - a) * y[1];
            dy[2] = y[1] * y[1] - s * s * y[0];
        },
        &[gamma, -gamma * d, gamma * d * d],
        &grid,
    )?;
    let x = spec.x0[0].as_f64();
    let v = &path[0];
    Ok(v[0] * x * x + 2.0 * v[1] * x + v[2])
}
