use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{hermite_mid, integrate_backward_staged, StagePoint, TimeGrid};
use crate::error::{Error, Result};
use crate::game_model::{build_lifted_matrices, LiftedMatrices, LqGameSpec};
use crate::io::{write_column_store, write_csv, ColumnStore};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Largest centered-difference residual of each equation over interior knots,
/// together with the largest solution norm for scale.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m0_scale: f64,
    pub m1_scale: f64,
    pub m2_scale: f64,
    pub m3_scale: f64,
    pub max_asymmetry: f64,
}

/// Time-gridded solution of the M0/M1/M2/M3 system with the feedback gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RiccatiSolution<S> {
    pub n_players: usize,
    pub grid: TimeGrid<S>,
    pub m0: Vec<Mat<S>>,
    pub m1: Vec<Mat<S>>,
    pub m2: Vec<Vec<S>>,
    pub m3: Vec<S>,
    pub k_gain: Vec<Mat<S>>,
    pub i_tilde: Mat<S>,
    pub residual_report: ResidualReport,
}

/// `K = [(0 I)M0 | (I 0)M0] + Ĩ M1`, N×4N.
pub fn assemble_gain<S: Scalar>(m0: &Mat<S>, m1: &Mat<S>, lifted: &LiftedMatrices<S>) -> Result<Mat<S>> {
    let n = lifted.n;
    if m0.rows() != 2 * n || m0.cols() != 2 * n || m1.rows() != 4 * n || m1.cols() != 4 * n {
        return Err(Error::Dimension(format!(
            "gain for N = {n} needs 2N×2N M0 and 4N×4N M1, got {}×{} and {}×{}",
            m0.rows(),
            m0.cols(),
            m1.rows(),
            m1.cols()
        )));
    }
    let mut k = lifted.i_tilde.matmul(m1);
    for i in 0..n {
        let row = k.row_mut(i);
        for c in 0..2 * n {
            row[c] += m0[(n + i, c)];
            row[2 * n + c] += m0[(i, c)];
        }
    }
    Ok(k)
}

fn doubled<S: Scalar>(a: &[S], times: usize) -> Vec<S> {
    (0..times).flat_map(|_| a.iter().copied()).collect()
}

fn rhs_m0<S: Scalar>(lifted: &LiftedMatrices<S>, t: S, m0: &[S], out: &mut [S]) {
    let d = doubled(&lifted.a_diag(t), 2);
    let dim = d.len();
    let q = lifted.q.as_slice();
    for r in 0..dim {
        for c in 0..dim {
            let idx = r * dim + c;
            out[idx] = -(d[r] + d[c]) * m0[idx] - q[idx];
        }
    }
}

fn rhs_m1<S: Scalar>(lifted: &LiftedMatrices<S>, t: S, m0: &Mat<S>, m1: &[S], out: &mut [S]) {
    let dim = 4 * lifted.n;
    let m1m = Mat::from_vec(dim, dim, m1.to_vec()).expect("M1 shape");
    let k = assemble_gain(m0, &m1m, lifted).expect("gain shape");
    let ktk = k.t_matmul(&k);
    let d = doubled(&lifted.a_diag(t), 4);
    for r in 0..dim {
        for c in 0..dim {
            let idx = r * dim + c;
            out[idx] = -(d[r] + d[c]) * m1[idx] + ktk[(r, c)];
        }
    }
}

fn rhs_m2<S: Scalar>(lifted: &LiftedMatrices<S>, t: S, m0: &Mat<S>, m1: &Mat<S>, m2: &[S], out: &mut [S]) {
    let k = assemble_gain(m0, m1, lifted).expect("gain shape");
    let im2 = lifted.i_tilde.mul_vec(m2);
    let kt = k.t_mul_vec(&im2);
    let d = doubled(&lifted.a_diag(t), 4);
    for r in 0..m2.len() {
        out[r] = -d[r] * m2[r] + kt[r];
    }
}

/// Integrand of the scalar equation: `tr(ΣΣᵀ(M0 + JᵀM1J)) − |ĨM2|²` with `J = [I; ½I]`.
fn m3_integrand<S: Scalar>(lifted: &LiftedMatrices<S>, t: S, m0: &Mat<S>, m1: &Mat<S>, m2: &[S]) -> S {
    let n = lifted.n;
    let two_n = 2 * n;
    let quarter = S::of(0.25);
    let mut tr = S::zero();
    for (i, s) in lifted.sigma_diag(t).into_iter().enumerate() {
        if s == S::zero() {
            continue;
        }
        let jmj = m1[(i, i)] + S::half() * (m1[(i, two_n + i)] + m1[(two_n + i, i)]) + quarter * m1[(two_n + i, two_n + i)];
        tr += s * s * (m0[(i, i)] + jmj);
    }
    let im2 = lifted.i_tilde.mul_vec(m2);
    tr - im2.iter().map(|v| *v * *v).sum::<S>()
}

fn to_mats<S: Scalar>(path: Vec<Vec<S>>, dim: usize) -> Vec<Mat<S>> {
    path.into_iter().map(|v| Mat::from_vec(dim, dim, v).expect("square path")).collect()
}

fn symmetrize_flat<S: Scalar>(v: &mut [S], dim: usize) {
    let half = S::half();
    for r in 0..dim {
        for c in (r + 1)..dim {
            let s = (v[r * dim + c] + v[c * dim + r]) * half;
            v[r * dim + c] = s;
            v[c * dim + r] = s;
        }
    }
}

fn check_path_len<S>(what: &str, len: usize, grid: &TimeGrid<S>) -> Result<()> {
    if len != grid.t.len() {
        return Err(Error::GridMismatch(format!("{what} has {len} knots, grid has {}", grid.t.len())));
    }
    Ok(())
}

/// `Ṁ0 + AᵀM0 + M0A + Q = 0`, `M0(T) = Q̄`.
pub fn solve_m0<S: Scalar>(lifted: &LiftedMatrices<S>, grid: &TimeGrid<S>) -> Result<Vec<Mat<S>>> {
    let dim = 2 * lifted.n;
    let path = integrate_backward_staged(
        |t, _, y, dy| rhs_m0(lifted, t, y, dy),
        lifted.q_bar.as_slice(),
        grid,
        |y| symmetrize_flat(y, dim),
    )?;
    Ok(to_mats(path, dim))
}

fn m0_derivs<S: Scalar>(lifted: &LiftedMatrices<S>, m0: &[Mat<S>], grid: &TimeGrid<S>) -> Vec<Mat<S>> {
    let dim = 2 * lifted.n;
    m0.iter()
        .zip(&grid.t)
        .map(|(m, &t)| {
            let mut d = Mat::zeros(dim, dim);
            rhs_m0(lifted, t, m.as_slice(), d.as_mut_slice());
            d
        })
        .collect()
}

fn mid_values<S: Scalar>(path: &[Mat<S>], deriv: &[Mat<S>], grid: &TimeGrid<S>) -> Vec<Mat<S>> {
    (0..grid.n_steps)
        .map(|k| {
            let h = grid.dt(k);
            let (a, b) = (&path[k], &path[k + 1]);
            let (da, db) = (&deriv[k], &deriv[k + 1]);
            let data = (0..a.as_slice().len())
                .map(|e| hermite_mid(a.as_slice()[e], da.as_slice()[e], b.as_slice()[e], db.as_slice()[e], h))
                .collect();
            Mat::from_vec(a.rows(), a.cols(), data).expect("same shape")
        })
        .collect()
}

fn vec_mid_values<S: Scalar>(path: &[Vec<S>], deriv: &[Vec<S>], grid: &TimeGrid<S>) -> Vec<Vec<S>> {
    (0..grid.n_steps)
        .map(|k| {
            let h = grid.dt(k);
            (0..path[k].len()).map(|e| hermite_mid(path[k][e], deriv[k][e], path[k + 1][e], deriv[k + 1][e], h)).collect()
        })
        .collect()
}

fn at_stage<'a, T>(knots: &'a [T], mids: &'a [T], p: StagePoint) -> &'a T {
    match p {
        StagePoint::Knot(k) => &knots[k],
        StagePoint::Mid(k) => &mids[k],
    }
}

/// `Ṁ1 + diag(A,A)M1 + M1diag(A,A) − KᵀK = 0`, `M1(T) = 0`. M0 at RK4 midpoints is
/// taken from its cubic Hermite interpolant.
pub fn solve_m1<S: Scalar>(lifted: &LiftedMatrices<S>, m0: &[Mat<S>], grid: &TimeGrid<S>) -> Result<Vec<Mat<S>>> {
    check_path_len("M0", m0.len(), grid)?;
    let dim = 4 * lifted.n;
    let dm0 = m0_derivs(lifted, m0, grid);
    let m0_mid = mid_values(m0, &dm0, grid);
    let path = integrate_backward_staged(
        |t, p, y, dy| rhs_m1(lifted, t, at_stage(m0, &m0_mid, p), y, dy),
        &vec![S::zero(); dim * dim],
        grid,
        |y| symmetrize_flat(y, dim),
    )?;
    Ok(to_mats(path, dim))
}

fn m1_derivs<S: Scalar>(lifted: &LiftedMatrices<S>, m0: &[Mat<S>], m1: &[Mat<S>], grid: &TimeGrid<S>) -> Vec<Mat<S>> {
    let dim = 4 * lifted.n;
    (0..m1.len())
        .map(|k| {
            let mut d = Mat::zeros(dim, dim);
            rhs_m1(lifted, grid.t[k], &m0[k], m1[k].as_slice(), d.as_mut_slice());
            d
        })
        .collect()
}

/// `Ṁ2 + diag(A,A)M2 − KᵀĨM2 = 0`, `M2(T) = vcat(𝔭, 0)`.
pub fn solve_m2<S: Scalar>(
    lifted: &LiftedMatrices<S>,
    m0: &[Mat<S>],
    m1: &[Mat<S>],
    grid: &TimeGrid<S>,
) -> Result<Vec<Vec<S>>> {
    check_path_len("M0", m0.len(), grid)?;
    check_path_len("M1", m1.len(), grid)?;
    let dm0 = m0_derivs(lifted, m0, grid);
    let m0_mid = mid_values(m0, &dm0, grid);
    let dm1 = m1_derivs(lifted, m0, m1, grid);
    let m1_mid = mid_values(m1, &dm1, grid);
    let mut terminal = lifted.p_vec.clone();
    terminal.resize(4 * lifted.n, S::zero());
    integrate_backward_staged(
        |t, p, y, dy| rhs_m2(lifted, t, at_stage(m0, &m0_mid, p), at_stage(m1, &m1_mid, p), y, dy),
        &terminal,
        grid,
        |_| {},
    )
}

/// `M3(t) = ∫_t^T [tr(ΣΣᵀ(M0 + JᵀM1J)) − |ĨM2|²] ds`, per-interval Simpson with
/// Hermite midpoints.
pub fn solve_m3<S: Scalar>(
    lifted: &LiftedMatrices<S>,
    m0: &[Mat<S>],
    m1: &[Mat<S>],
    m2: &[Vec<S>],
    grid: &TimeGrid<S>,
) -> Result<Vec<S>> {
    check_path_len("M0", m0.len(), grid)?;
    check_path_len("M1", m1.len(), grid)?;
    check_path_len("M2", m2.len(), grid)?;
    let dm0 = m0_derivs(lifted, m0, grid);
    let m0_mid = mid_values(m0, &dm0, grid);
    let dm1 = m1_derivs(lifted, m0, m1, grid);
    let m1_mid = mid_values(m1, &dm1, grid);
    let dm2: Vec<Vec<S>> = (0..m2.len())
        .map(|k| {
            let mut d = vec![S::zero(); m2[k].len()];
            rhs_m2(lifted, grid.t[k], &m0[k], &m1[k], &m2[k], &mut d);
            d
        })
        .collect();
    let m2_mid = vec_mid_values(m2, &dm2, grid);
    let n = grid.n_steps;
    let g: Vec<S> = (0..=n).map(|k| m3_integrand(lifted, grid.t[k], &m0[k], &m1[k], &m2[k])).collect();
    let mut out = vec![S::zero(); n + 1];
    let six = S::of(6.0);
    let four = S::of(4.0);
    for k in (0..n).rev() {
        let h = grid.dt(k);
        let tm = grid.t[k] + h * S::half();
        let gm = m3_integrand(lifted, tm, &m0_mid[k], &m1_mid[k], &m2_mid[k]);
        out[k] = out[k + 1] + h / six * (g[k] + four * gm + g[k + 1]);
        if !out[k].is_finite() {
            return Err(Error::BlowUp { knot: k, time: grid.t[k].as_f64() });
        }
    }
    Ok(out)
}

/// Solves the full system for `spec` on `grid`.
pub fn solve_riccati<S: Scalar>(spec: &LqGameSpec<S>, grid: &TimeGrid<S>) -> Result<RiccatiSolution<S>> {
    if (grid.horizon() - spec.horizon).abs() > S::of(1e-9) * spec.horizon {
        return Err(Error::GridMismatch(format!("grid ends at {} but T = {}", grid.horizon(), spec.horizon)));
    }
    let lifted = build_lifted_matrices(spec);
    let m0 = solve_m0(&lifted, grid)?;
    let m1 = solve_m1(&lifted, &m0, grid)?;
    let m2 = solve_m2(&lifted, &m0, &m1, grid)?;
    let m3 = solve_m3(&lifted, &m0, &m1, &m2, grid)?;
    let k_gain = m0.iter().zip(&m1).map(|(a, b)| assemble_gain(a, b, &lifted)).collect::<Result<Vec<_>>>()?;
    let residual_report = residuals(&lifted, grid, &m0, &m1, &m2, &m3);
    Ok(RiccatiSolution {
        n_players: spec.n_players,
        grid: grid.clone(),
        m0,
        m1,
        m2,
        m3,
        k_gain,
        i_tilde: lifted.i_tilde.clone(),
        residual_report,
    })
}

fn residuals<S: Scalar>(
    lifted: &LiftedMatrices<S>,
    grid: &TimeGrid<S>,
    m0: &[Mat<S>],
    m1: &[Mat<S>],
    m2: &[Vec<S>],
    m3: &[S],
) -> ResidualReport {
    let mut r = ResidualReport::default();
    let fro = |v: &[S]| v.iter().map(|x| x.as_f64().powi(2)).sum::<f64>().sqrt();
    for k in 0..grid.t.len() {
        r.m0_scale = r.m0_scale.max(m0[k].frobenius().as_f64());
        r.m1_scale = r.m1_scale.max(m1[k].frobenius().as_f64());
        r.m2_scale = r.m2_scale.max(fro(&m2[k]));
        r.m3_scale = r.m3_scale.max(m3[k].as_f64().abs());
        r.max_asymmetry = r.max_asymmetry.max(m0[k].asymmetry().as_f64()).max(m1[k].asymmetry().as_f64());
    }
    for k in 1..grid.n_steps {
        let t = grid.t[k];
        let span = grid.t[k + 1] - grid.t[k - 1];
        let centered = |a: &[S], b: &[S], d: &[S]| {
            a.iter().zip(b).zip(d).map(|((&x1, &x0), &dv)| ((x1 - x0) / span - dv).as_f64().powi(2)).sum::<f64>().sqrt()
        };
        let mut d0 = vec![S::zero(); m0[k].as_slice().len()];
        rhs_m0(lifted, t, m0[k].as_slice(), &mut d0);
        r.m0 = r.m0.max(centered(m0[k + 1].as_slice(), m0[k - 1].as_slice(), &d0));
        let mut d1 = vec![S::zero(); m1[k].as_slice().len()];
        rhs_m1(lifted, t, &m0[k], m1[k].as_slice(), &mut d1);
        r.m1 = r.m1.max(centered(m1[k + 1].as_slice(), m1[k - 1].as_slice(), &d1));
        let mut d2 = vec![S::zero(); m2[k].len()];
        rhs_m2(lifted, t, &m0[k], &m1[k], &m2[k], &mut d2);
        r.m2 = r.m2.max(centered(&m2[k + 1], &m2[k - 1], &d2));
        let d3 = -m3_integrand(lifted, t, &m0[k], &m1[k], &m2[k]);
        r.m3 = r.m3.max(centered(&[m3[k + 1]], &[m3[k - 1]], &[d3]));
    }
    r
}

impl<S: Scalar> RiccatiSolution<S> {
    /// `Ĩ M2(t_k)`, the affine part of the feedback control.
    pub fn offset(&self, k: usize) -> Vec<S> {
        self.i_tilde.mul_vec(&self.m2[k])
    }

    /// `u* = −K(t_k) F − Ĩ M2(t_k)`.
    pub fn control(&self, k: usize, f: &[S]) -> Vec<S> {
        let kf = self.k_gain[k].mul_vec(f);
        kf.iter().zip(self.offset(k)).map(|(&a, b)| -a - b).collect()
    }

    /// Minimum of the LQ potential: `V̂(0)` at `μ̄ = 𝕩0`, `μ̄_1 = ½𝕩0`, `μ̄_2 = 𝕩0𝕩0ᵀ`.
    pub fn potential_minimum(&self, x0: &[S]) -> S {
        let n = self.n_players;
        let mut xx = x0.to_vec();
        xx.resize(2 * n, S::zero());
        let mut m = xx.clone();
        m.extend(xx.iter().map(|v| *v * S::half()));
        self.m0[0].quad_form(&xx, &xx) + self.m1[0].quad_form(&m, &m) + S::two() * crate::linalg::dot(&self.m2[0], &m) + self.m3[0]
    }

    /// Knot stride mapping `coarse` onto this solution's grid.
    pub fn stride_for(&self, coarse: &TimeGrid<S>) -> Result<usize> {
        self.grid.refinement_factor(coarse).ok_or_else(|| {
            Error::GridMismatch(format!(
                "Riccati grid with {} steps is not a refinement of the {}-step simulation grid",
                self.grid.n_steps, coarse.n_steps
            ))
        })
    }

    pub fn to_column_store(&self, header: serde_json::Value) -> ColumnStore {
        let mut cols = vec![("t".to_string(), self.grid.to_f64())];
        let flat = |mats: &[Mat<S>]| mats.iter().flat_map(|m| m.as_slice().iter().map(|v| v.as_f64())).collect::<Vec<_>>();
        cols.push(("m0".into(), flat(&self.m0)));
        cols.push(("m1".into(), flat(&self.m1)));
        cols.push(("m2".into(), self.m2.iter().flatten().map(|v| v.as_f64()).collect()));
        cols.push(("m3".into(), self.m3.iter().map(|v| v.as_f64()).collect()));
        cols.push(("k_gain".into(), flat(&self.k_gain)));
        let mut header = header;
        if let Some(obj) = header.as_object_mut() {
            obj.insert("n_players".into(), self.n_players.into());
            obj.insert("n_steps".into(), self.grid.n_steps.into());
            obj.insert("layout".into(), "row-major per knot; m0 2N×2N, m1 4N×4N, m2 4N, k_gain N×4N".into());
        }
        ColumnStore { header, columns: cols }
    }

    pub fn write_store(&self, path: &Path, header: serde_json::Value) -> Result<()> {
        write_column_store(path, &self.to_column_store(header))
    }

    /// One row per knot: `t, m3, tr M0, tr M1, |M2|`, then `K[i][i]` and `K[i][N+i]` per player.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.n_players;
        let mut headers = vec!["t".to_string(), "m3".into(), "m0_trace".into(), "m1_trace".into(), "m2_norm".into()];
        for i in 1..=n {
            headers.push(format!("k_{i}_x"));
            headers.push(format!("k_{i}_y"));
        }
        let rows = (0..self.grid.t.len()).map(|k| {
            let mut row = vec![
                self.grid.t[k].as_f64(),
                self.m3[k].as_f64(),
                self.m0[k].trace().as_f64(),
                self.m1[k].trace().as_f64(),
                self.m2[k].iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt(),
            ];
            for i in 0..n {
                row.push(self.k_gain[k][(i, i)].as_f64());
                row.push(self.k_gain[k][(i, n + i)].as_f64());
            }
            row
        });
        write_csv(path, &headers, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: f64, gamma: f64, d: f64, t: f64) -> LqGameSpec<f64> {
        LqGameSpec::with_constants(t, Mat::zeros(1, 1), vec![gamma], vec![d], a, 1.0, vec![0.0]).unwrap()
    }

    #[test]
    fn gain_examples() {
        let spec = single(0.0, 2.0, 0.0, 1.0);
        let l = build_lifted_matrices(&spec);
        let k = assemble_gain(&l.q_bar, &Mat::zeros(4, 4), &l).unwrap();
        assert_eq!(k.as_slice(), &[2.0, 0.0, 0.0, 2.0]);
        let k = assemble_gain(&Mat::zeros(2, 2), &Mat::identity(4), &l).unwrap();
        assert_eq!(k.as_slice(), &[0.5, 1.0, 1.0 / 3.0, 0.5]);
        assert!(assemble_gain(&Mat::zeros(3, 3), &Mat::identity(4), &l).is_err());
    }

    #[test]
    fn m0_constant_without_drift() {
        let spec = single(0.0, 1.0, 0.0, 1.0);
        let l = build_lifted_matrices(&spec);
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let m0 = solve_m0(&l, &grid).unwrap();
        assert!(m0.iter().all(|m| m == &l.q_bar));
    }

    #[test]
    fn m0_exponential_growth() {
        let (a, t) = (0.7, 1.0);
        let spec = single(a, 1.0, 0.0, t);
        let l = build_lifted_matrices(&spec);
        let grid = TimeGrid::uniform(t, 200).unwrap();
        let m0 = solve_m0(&l, &grid).unwrap();
        for k in [0, 77, 150] {
            let exact = (2.0 * a * (t - grid.t[k])).exp();
            assert!((m0[k][(0, 1)] - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_cost_game_has_zero_solution() {
        let spec = LqGameSpec::with_constants(1.0, Mat::zeros(2, 2), vec![0.0; 2], vec![0.0; 2], 0.3, 1.0, vec![1.0; 2]).unwrap();
        let sol = solve_riccati(&spec, &TimeGrid::uniform(1.0, 50).unwrap()).unwrap();
        for k in 0..=50 {
            assert_eq!(sol.m1[k].max_abs(), 0.0);
            assert_eq!(sol.k_gain[k].max_abs(), 0.0);
            assert!(sol.m2[k].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn terminal_conditions_exact() {
        let q = Mat::from_rows(&[vec![0.0, 2.0], vec![0.5, 0.0]]).unwrap();
        let spec = LqGameSpec::with_constants(0.5, q, vec![1.0, 2.0], vec![1.0, -1.0], 0.2, 0.5, vec![0.0; 2]).unwrap();
        let l = build_lifted_matrices(&spec);
        let sol = solve_riccati(&spec, &TimeGrid::uniform(0.5, 100).unwrap()).unwrap();
        let last = 100;
        assert_eq!(sol.m0[last], l.q_bar);
        assert_eq!(sol.m1[last].max_abs(), 0.0);
        assert_eq!(&sol.m2[last][..4], &l.p_vec[..]);
        assert!(sol.m2[last][4..].iter().all(|v| *v == 0.0));
        assert_eq!(sol.m3[last], 0.0);
        assert_eq!(sol.residual_report.max_asymmetry, 0.0);
    }

    #[test]
    fn d_zero_gives_zero_m2_and_linearity() {
        let mk = |d: f64| LqGameSpec::with_constants(0.4, Mat::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap(), vec![1.0, 0.5], vec![d, 0.5 * d], 0.1, 1.0, vec![0.0; 2]).unwrap();
        let grid = TimeGrid::uniform(0.4, 80).unwrap();
        let z = solve_riccati(&mk(0.0), &grid).unwrap();
        assert!(z.m2.iter().flatten().all(|v| *v == 0.0));
        let one = solve_riccati(&mk(1.0), &grid).unwrap();
        let two = solve_riccati(&mk(2.0), &grid).unwrap();
        for k in 0..=80 {
            for e in 0..8 {
                assert!((two.m2[k][e] - 2.0 * one.m2[k][e]).abs() <= 1e-12 * (1.0 + one.m2[k][e].abs()));
            }
        }
    }

    #[test]
    fn f32_solution_tracks_f64() {
        let spec = single(0.3, 1.0, 1.0, 0.5);
        let s64 = solve_riccati(&spec, &TimeGrid::uniform(0.5, 100).unwrap()).unwrap();
        let spec32: LqGameSpec<f32> = spec.cast();
        let s32 = solve_riccati(&spec32, &TimeGrid::uniform(0.5f32, 100).unwrap()).unwrap();
        assert!((s64.m3[0] - s32.m3[0] as f64).abs() < 1e-4);
        assert!((s64.m1[0].max_abs() - s32.m1[0].max_abs() as f64).abs() < 1e-4);
    }
}
