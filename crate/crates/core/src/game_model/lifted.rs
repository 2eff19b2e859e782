use super::coefficient::Coefficient;
use super::lq::LqGameSpec;
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Constant and time-dependent matrices of the lifted state `𝕏 = (X^{ru}, Y)`,
/// a stacked state-plus-sensitivity process of dimension `2N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedMatrices<S> {
    pub n: usize,
    /// `Q̃_ii = (1/N) Σ_{k≠i} q_ik`, `Q̃_ij = -q_ij / N`.
    pub q_tilde: Mat<S>,
    /// `[[0, Q̃ᵀ], [Q̃, 0]]`, so that `𝕩ᵀQ𝕩 = 2 yᵀQ̃x`.
    pub q: Mat<S>,
    /// `[[0, Γ], [Γ, 0]]` with `Γ = diag(γ)`.
    pub q_bar: Mat<S>,
    /// `-vcat(0_N, γ_i d_i)`.
    pub p_vec: Vec<S>,
    /// `[½I, I, ⅓I, ½I]`, N×4N.
    pub i_tilde: Mat<S>,
    a_fn: Vec<Coefficient>,
    sigma_fn: Vec<Coefficient>,
}

pub fn build_lifted_matrices<S: Scalar>(spec: &LqGameSpec<S>) -> LiftedMatrices<S> {
    let n = spec.n_players;
    let inv_n = S::one() / S::of_usize(n);
    let q_tilde = Mat::from_fn(n, n, |i, j| {
        if i == j {
            (0..n).filter(|&k| k != i).map(|k| spec.q[(i, k)]).sum::<S>() * inv_n
        } else {
            -spec.q[(i, j)] * inv_n
        }
    });
    let mut q = Mat::zeros(2 * n, 2 * n);
    q.set_block(0, n, &q_tilde.transpose());
    q.set_block(n, 0, &q_tilde);
    let gamma = Mat::diag(&spec.gamma);
    let mut q_bar = Mat::zeros(2 * n, 2 * n);
    q_bar.set_block(0, n, &gamma);
    q_bar.set_block(n, 0, &gamma);
    let mut p_vec = vec![S::zero(); 2 * n];
    for i in 0..n {
        p_vec[n + i] = -spec.gamma[i] * spec.d[i];
    }
    let eye = Mat::<S>::identity(n);
    let mut i_tilde = Mat::zeros(n, 4 * n);
    i_tilde.set_block(0, 0, &eye.scale(S::half()));
    i_tilde.set_block(0, n, &eye);
    i_tilde.set_block(0, 2 * n, &eye.scale(S::one() / S::of(3.0)));
    i_tilde.set_block(0, 3 * n, &eye.scale(S::half()));
    LiftedMatrices {
        n,
        q_tilde,
        q,
        q_bar,
        p_vec,
        i_tilde,
        a_fn: spec.a_fn.clone(),
        sigma_fn: spec.sigma_fn.clone(),
    }
}

impl<S: Scalar> LiftedMatrices<S> {
    /// `(a_1(t), …, a_N(t))`.
    pub fn a_diag(&self, t: S) -> Vec<S> {
        self.a_fn.iter().map(|c| c.eval(t)).collect()
    }

    pub fn sigma_diag(&self, t: S) -> Vec<S> {
        self.sigma_fn.iter().map(|c| c.eval(t)).collect()
    }

    /// `A(t) = diag(Ã(t), Ã(t))`, 2N×2N.
    pub fn big_a(&self, t: S) -> Mat<S> {
        let a = self.a_diag(t);
        let doubled: Vec<S> = a.iter().chain(a.iter()).copied().collect();
        Mat::diag(&doubled)
    }

    /// `Σ(t) = vcat(diag σ(t), 0)`, 2N×N.
    pub fn sigma(&self, t: S) -> Mat<S> {
        let mut s = Mat::zeros(2 * self.n, self.n);
        for (i, v) in self.sigma_diag(t).into_iter().enumerate() {
            s[(i, i)] = v;
        }
        s
    }

    /// Initial lifted state `vcat(x0, 0_N)`.
    pub fn initial_state(&self, x0: &[S]) -> Vec<S> {
        let mut v = x0.to_vec();
        v.resize(2 * self.n, S::zero());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn p_vec_single_player() {
        let spec = LqGameSpec::with_constants(1.0, Mat::zeros(1, 1), vec![1.0], vec![2.0], 0.0, 1.0, vec![0.0]).unwrap();
        assert_eq!(build_lifted_matrices(&spec).p_vec, vec![0.0, -2.0]);
    }

    #[test]
    fn q_tilde_two_players() {
        let q = Mat::from_rows(&[vec![0.0, 4.0], vec![2.0, 0.0]]).unwrap();
        let spec = LqGameSpec::with_constants(1.0, q, vec![1.0; 2], vec![0.0; 2], 0.0, 1.0, vec![0.0; 2]).unwrap();
        let l = build_lifted_matrices(&spec);
        assert_eq!(l.q_tilde.to_rows(), vec![vec![2.0, -2.0], vec![-1.0, 1.0]]);
        let x = [0.3f64, -1.2];
        let y = [2.0, 0.5];
        let xy = [x[0], x[1], y[0], y[1]];
        let lhs = l.q.quad_form(&xy, &xy);
        let rhs = 2.0 * dot(&y, &l.q_tilde.mul_vec(&x));
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn i_tilde_constants() {
        let spec = LqGameSpec::with_constants(1.0, Mat::zeros(1, 1), vec![1.0], vec![0.0], 0.0, 1.0, vec![0.0]).unwrap();
        let l = build_lifted_matrices(&spec);
        assert_eq!(l.i_tilde.as_slice(), &[0.5, 1.0, 1.0 / 3.0, 0.5]);
    }
}
