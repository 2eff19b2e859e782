use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game_model::DifferentialGame;
use crate::potential_eval::value_gradient_density;
use crate::scalar::Scalar;
use crate::sde_sim::{Direction, NoiseBatch, StrategyProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// `u_i → λ u_i`, `λ ∈ [0, 2]`.
    Scaled,
    /// `u_i + c·1_{[t1, t2)}`.
    TimeBump,
    /// Perturbs player `i`'s row of the feedback gain.
    FeedbackTilt,
    /// Adds a smooth seeded random path.
    RandomPath,
    /// Steps along the negative value gradient.
    GradientTilt,
}

impl DeviationKind {
    pub const ALL: [DeviationKind; 5] = [
        DeviationKind::Scaled,
        DeviationKind::TimeBump,
        DeviationKind::FeedbackTilt,
        DeviationKind::RandomPath,
        DeviationKind::GradientTilt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DeviationKind::Scaled => "scaled",
            DeviationKind::TimeBump => "time-bump",
            DeviationKind::FeedbackTilt => "feedback-tilt",
            DeviationKind::RandomPath => "random-path",
            DeviationKind::GradientTilt => "gradient-tilt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('-', "_") == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown deviation kind `{s}`")))
    }
}

/// A unilateral deviation of `player` from a base profile.
#[derive(Clone, Debug)]
pub struct Deviation<S: Scalar> {
    pub player: usize,
    pub kind: DeviationKind,
    /// Kind-specific size: `λ` for scaled, `c` for time bumps, the step for gradient tilts,
    /// the L² norm of the added path otherwise.
    pub param: f64,
    /// The added path was shrunk to respect the control bound.
    pub clipped: bool,
    pub profile: StrategyProfile<S>,
}

fn l2_norm<S: Scalar>(path: &[S], base: &StrategyProfile<S>) -> f64 {
    let g = base.grid();
    path.iter().enumerate().map(|(k, v)| g.dt(k).as_f64() * v.as_f64().powi(2)).sum::<f64>().sqrt()
}

/// Scales `path` into the ball of radius `bound` in `L²(0,T)`.
fn clip<S: Scalar>(path: &mut [S], base: &StrategyProfile<S>, bound: f64) -> bool {
    let norm = l2_norm(path, base);
    if norm > bound {
        let s = S::of(bound / norm);
        path.iter_mut().for_each(|v| *v *= s);
        true
    } else {
        false
    }
}

/// Seeded causal deviations of one player. Every path added to the base control is
/// deterministic, so causality is inherited from the base rule.
pub fn sample_deviations<S: Scalar>(
    base: &StrategyProfile<S>,
    player: usize,
    kind: DeviationKind,
    count: usize,
    seed: u64,
    control_bound: f64,
) -> Result<Vec<Deviation<S>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("deviation count must be at least 1".into()));
    }
    if player >= base.n_players() {
        return Err(Error::InvalidArgument(format!("player {player} out of range")));
    }
    let grid = base.grid().clone();
    let steps = grid.n_steps;
    let horizon = grid.horizon().as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((player as u64) << 8) | kind as u64);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let dev = match kind {
            DeviationKind::Scaled => {
                let lambda: f64 = rng.random_range(0.0..=2.0);
                Deviation {
                    player,
                    kind,
                    param: lambda,
                    clipped: false,
                    profile: base.perturbed(player, Direction::OwnControl, S::of(lambda - 1.0))?,
                }
            }
            DeviationKind::TimeBump => {
                let c: f64 = rng.random_range(-1.0..=1.0);
                let a: f64 = rng.random_range(0.0..horizon);
                let b: f64 = rng.random_range(0.0..horizon);
                let (t1, t2) = (a.min(b), a.max(b));
                time_bump(base, player, c, t1, t2, control_bound)?
            }
            DeviationKind::RandomPath => {
                let modes: Vec<(f64, f64)> = (1..=4)
                    .map(|m| {
                        let amp: f64 = rng.sample::<f64, _>(StandardNormal) / m as f64;
                        (amp, rng.random_range(0.0..std::f64::consts::TAU))
                    })
                    .collect();
                let mut path: Vec<S> = grid.t[..steps]
                    .iter()
                    .map(|&t| {
                        let s = t.as_f64() / horizon;
                        S::of(
                            modes
                                .iter()
                                .enumerate()
                                .map(|(m, (a, ph))| a * ((m + 1) as f64 * std::f64::consts::PI * s + ph).sin())
                                .sum::<f64>(),
                        )
                    })
                    .collect();
                let clipped = clip(&mut path, base, control_bound);
                let param = l2_norm(&path, base);
                Deviation { player, kind, param, clipped, profile: base.perturbed(player, Direction::Path(path), S::one())? }
            }
            DeviationKind::FeedbackTilt => {
                let law = base
                    .feedback_law()
                    .ok_or_else(|| Error::InvalidArgument("feedback-tilt needs a feedback base profile".into()))?;
                let n = law.n;
                let scale = law.gain.iter().map(|k| k.row(player).iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()))).fold(0.0, f64::max);
                let sd = 0.2 * scale.max(1.0);
                let row: Vec<S> = (0..4 * n).map(|_| S::of(sd * rng.sample::<f64, _>(StandardNormal))).collect();
                let param = row.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
                Deviation {
                    player,
                    kind,
                    param,
                    clipped: false,
                    profile: base.perturbed(player, Direction::GainTilt(vec![row; steps]), S::one())?,
                }
            }
            DeviationKind::GradientTilt => {
                return Err(Error::InvalidArgument(
                    "gradient-tilt deviations need the game and noise; use gradient_deviations".into(),
                ))
            }
        };
        out.push(dev);
    }
    Ok(out)
}

/// Adds `c` on `[t1, t2)` to `player`'s control.
pub fn time_bump<S: Scalar>(
    base: &StrategyProfile<S>,
    player: usize,
    c: f64,
    t1: f64,
    t2: f64,
    control_bound: f64,
) -> Result<Deviation<S>> {
    let grid = base.grid();
    let mut path: Vec<S> = grid.t[..grid.n_steps]
        .iter()
        .map(|t| if (t1..t2).contains(&t.as_f64()) { S::of(c) } else { S::zero() })
        .collect();
    let clipped = clip(&mut path, base, control_bound);
    Ok(Deviation {
        player,
        kind: DeviationKind::TimeBump,
        param: c,
        clipped,
        profile: base.perturbed(player, Direction::Path(path), S::one())?,
    })
}

/// Steps of geometrically decreasing size along `−∇_{u_i} V_i`, largest of L² size
/// `min(2, L)`.
pub fn gradient_deviations<S: Scalar>(
    game: &dyn DifferentialGame<S>,
    base: &StrategyProfile<S>,
    noise: &NoiseBatch<S>,
    player: usize,
    count: usize,
    control_bound: f64,
) -> Result<Vec<Deviation<S>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("deviation count must be at least 1".into()));
    }
    let grad = value_gradient_density(game, base, noise, player)?;
    let norm = l2_norm(&grad, base);
    let descent: Vec<S> = grad.iter().map(|g| -*g).collect();
    let largest = if norm > 0.0 { 2.0f64.min(control_bound) / norm } else { 0.0 };
    (0..count)
        .map(|j| {
            let step = largest * 2f64.powf(-(j as f64) / 4.0);
            Ok(Deviation {
                player,
                kind: DeviationKind::GradientTilt,
                param: step,
                clipped: false,
                profile: base.perturbed(player, Direction::Path(descent.clone()), S::of(step))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode_solvers::TimeGrid;

    fn base() -> StrategyProfile<f64> {
        let g = TimeGrid::uniform(1.0, 20).unwrap();
        StrategyProfile::from_fn(&g, 3, |i, t| (i as f64 + 1.0) * (1.0 - t))
    }

    #[test]
    fn only_named_player_changes() {
        let b = base();
        let ref_u = b.realize(&[]).u;
        for kind in [DeviationKind::Scaled, DeviationKind::TimeBump, DeviationKind::RandomPath] {
            for d in sample_deviations(&b, 2, kind, 5, 1, 10.0).unwrap() {
                let u = d.profile.realize(&[]).u;
                for k in 0..20 {
                    for i in 0..2 {
                        assert_eq!(u[k * 3 + i].to_bits(), ref_u[k * 3 + i].to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn identity_deviations() {
        let b = base();
        let bump = time_bump(&b, 0, 0.0, 0.2, 0.6, 10.0).unwrap();
        assert_eq!(bump.profile.realize(&[]).u, b.realize(&[]).u);
        let id = b.perturbed(1, Direction::OwnControl, 0.0).unwrap();
        assert_eq!(id.realize(&[]).u, b.realize(&[]).u);
    }

    #[test]
    fn random_paths_clipped_to_bound() {
        let b = base();
        let devs = sample_deviations(&b, 0, DeviationKind::RandomPath, 20, 3, 0.05).unwrap();
        assert!(devs.iter().any(|d| d.clipped));
        assert!(devs.iter().all(|d| d.param <= 0.05 + 1e-12));
    }

    #[test]
    fn kinds_parse_and_tilt_requires_feedback() {
        assert_eq!(DeviationKind::parse("time-bump").unwrap(), DeviationKind::TimeBump);
        assert_eq!(DeviationKind::parse("random_path").unwrap(), DeviationKind::RandomPath);
        assert!(DeviationKind::parse("nope").is_err());
        assert!(sample_deviations(&base(), 0, DeviationKind::FeedbackTilt, 1, 0, 1.0).is_err());
        assert!(sample_deviations(&base(), 0, DeviationKind::Scaled, 0, 0, 1.0).is_err());
    }
}
