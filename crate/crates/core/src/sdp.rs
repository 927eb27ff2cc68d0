//! Small conic solver for complex semidefinite programs.
//!
//! Problems are posed in primal standard form
//!
//! ```text
//! minimize   ⟨C, X⟩
//! subject to ⟨A_i, X⟩ = b_i,   X ∈ K
//! ```
//!
//! where `K` is a product of Hermitian PSD blocks, nonnegative scalars and free
//! scalars, and `⟨A, X⟩ = Re Tr(Aᴴ X)` on blocks. The solver runs an
//! alternating direction method on the dual with row equilibration, an
//! adaptive penalty, and a cached factorization of `𝒜𝒜*`.

use std::fmt::Write as _;

use nalgebra::{DVector, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

use crate::channels::complex_normal;
use crate::linalg::{herm_eig, CMat, CVec, RMat, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("constraint {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("problem has no variables")]
    Empty,
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// A linear functional on the cone product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    /// Block index and its Hermitian coefficient.
    pub blocks: Vec<(usize, CMat)>,
    pub nonneg: Vec<(usize, f64)>,
    pub free: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn block(mut self, index: usize, coeff: CMat) -> Self {
        self.blocks.push((index, coeff));
        self
    }

    pub fn nonneg(mut self, index: usize, coeff: f64) -> Self {
        self.nonneg.push((index, coeff));
        self
    }

    pub fn free(mut self, index: usize, coeff: f64) -> Self {
        self.free.push((index, coeff));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

/// Cone layout and data of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub nonneg_count: usize,
    pub free_count: usize,
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// The equality system has no solution at all.
    Infeasible,
    /// Tolerance not reached within the iteration budget.
    MaxIterations,
}

impl SdpStatus {
    pub fn tag(self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_penalty: f64,
    /// Stop as soon as primal and dual objectives agree in sign with a gap
    /// well below their size. Enough for feasibility questions that only
    /// need the sign of the optimum.
    pub sign_stop: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50_000, initial_penalty: 1.0, sign_stop: false }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<CMat>,
    pub nonneg: Vec<f64>,
    pub free: Vec<f64>,
    /// Equality multipliers in the original scaling.
    pub dual: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    warm: Option<WarmState>,
}

#[derive(Debug, Clone)]
struct WarmState {
    x: DVector<f64>,
    s: DVector<f64>,
    penalty: f64,
}

// ---- real vectorization ----------------------------------------------------

/// Offsets of each cone component in the packed real vector.
#[derive(Debug, Clone)]
struct Layout {
    block_sizes: Vec<usize>,
    block_offsets: Vec<usize>,
    nonneg_offset: usize,
    free_offset: usize,
    dim: usize,
}

impl Layout {
    fn new(p: &SdpProblem) -> Self {
        let mut off = 0;
        let mut block_offsets = Vec::new();
        for &n in &p.block_sizes {
            block_offsets.push(off);
            off += n * n;
        }
        let nonneg_offset = off;
        let free_offset = off + p.nonneg_count;
        Self {
            block_sizes: p.block_sizes.clone(),
            block_offsets,
            nonneg_offset,
            free_offset,
            dim: free_offset + p.free_count,
        }
    }
}

/// Isometric packing: diagonal, then `√2 Re` and `√2 Im` of the strict upper
/// triangle. Inner products of packed vectors equal `Re Tr(Aᴴ X)`.
fn pack_block(m: &CMat, out: &mut [f64]) {
    let n = m.nrows();
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        out[i] = m[(i, i)].re;
    }
    let mut k = n;
    for j in 0..n {
        for i in 0..j {
            // Average both triangles so slightly non-Hermitian input packs
            // its Hermitian part.
            let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            out[k] = r2 * v.re;
            out[k + 1] = r2 * v.im;
            k += 2;
        }
    }
}

fn unpack_block(v: &[f64], n: usize) -> CMat {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(v[i], 0.0);
    }
    let mut k = n;
    for j in 0..n {
        for i in 0..j {
            let z = C64::new(v[k] * r2, v[k + 1] * r2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

fn pack_form(form: &LinearForm, lay: &Layout, index: usize) -> Result<DVector<f64>, SdpError> {
    let mut v: DVector<f64> = DVector::zeros(lay.dim);
    let bad = |reason: String| SdpError::Malformed { index, reason };
    for (b, c) in &form.blocks {
        let n = *lay.block_sizes.get(*b).ok_or_else(|| bad(format!("block {b} does not exist")))?;
        if c.nrows() != n || c.ncols() != n {
            return Err(bad(format!("block {b} coefficient is {}x{}, expected {n}x{n}", c.nrows(), c.ncols())));
        }
        let mut tmp = vec![0.0; n * n];
        pack_block(c, &mut tmp);
        let off = lay.block_offsets[*b];
        for (k, t) in tmp.into_iter().enumerate() {
            v[off + k] += t;
        }
    }
    let nn = lay.free_offset - lay.nonneg_offset;
    for &(i, c) in &form.nonneg {
        if i >= nn {
            return Err(bad(format!("nonnegative index {i} out of range")));
        }
        v[lay.nonneg_offset + i] += c;
    }
    let nf = lay.dim - lay.free_offset;
    for &(i, c) in &form.free {
        if i >= nf {
            return Err(bad(format!("free index {i} out of range")));
        }
        v[lay.free_offset + i] += c;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad("non-finite coefficient".into()));
    }
    Ok(v)
}

/// Projects a packed vector onto the cone (`dual = false`) or its dual.
fn project(v: &DVector<f64>, lay: &Layout, dual: bool) -> DVector<f64> {
    let mut out = v.clone();
    for (b, &n) in lay.block_sizes.iter().enumerate() {
        let off = lay.block_offsets[b];
        let m = unpack_block(&v.as_slice()[off..off + n * n], n);
        let (vals, vecs) = herm_eig(&m);
        let mut p = CMat::zeros(n, n);
        for (k, &lam) in vals.iter().enumerate() {
            if lam > 0.0 {
                let u = vecs.column(k);
                p += (u * u.adjoint()).scale(lam);
            }
        }
        pack_block(&p, &mut out.as_mut_slice()[off..off + n * n]);
    }
    for k in lay.nonneg_offset..lay.free_offset {
        out[k] = out[k].max(0.0);
    }
    for k in lay.free_offset..lay.dim {
        // Free cone: itself; its dual is the origin.
        if dual {
            out[k] = 0.0;
        }
    }
    out
}

/// Pseudo-inverse of a symmetric positive semidefinite Gram matrix.
struct GramSolver {
    vecs: RMat,
    inv_vals: DVector<f64>,
}

impl GramSolver {
    fn new(gram: RMat) -> Self {
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cut = top * 1e-12 * eig.eigenvalues.len() as f64;
        let inv_vals = eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 });
        Self { vecs: eig.eigenvectors, inv_vals }
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let t = self.vecs.tr_mul(r).component_mul(&self.inv_vals);
        &self.vecs * t
    }
}

/// Solves `problem`, optionally warm-started from an earlier solution of a
/// problem with the same layout.
pub fn solve(problem: &SdpProblem, opts: &SdpOptions, warm: Option<&SdpSolution>) -> Result<SdpSolution, SdpError> {
    let lay = Layout::new(problem);
    if lay.dim == 0 {
        return Err(SdpError::Empty);
    }
    let m = problem.constraints.len();
    let mut a = RMat::zeros(m, lay.dim);
    let mut b = DVector::zeros(m);
    let mut row_scale = DVector::zeros(m);
    for (i, con) in problem.constraints.iter().enumerate() {
        let row = pack_form(&con.form, &lay, i)?;
        let norm = row.norm();
        if norm == 0.0 {
            if con.rhs != 0.0 {
                return Ok(infeasible(problem));
            }
            row_scale[i] = 0.0;
            continue;
        }
        if !con.rhs.is_finite() {
            return Err(SdpError::Malformed { index: i, reason: "non-finite right-hand side".into() });
        }
        a.set_row(i, &(row / norm).transpose());
        b[i] = con.rhs / norm;
        row_scale[i] = 1.0 / norm;
    }
    let c_raw = pack_form(&problem.objective, &lay, usize::MAX)?;
    let c_scale = c_raw.norm().max(1.0);
    let c = &c_raw / c_scale;

    let gram = &a * a.transpose();
    let gs = GramSolver::new(gram);
    // Consistency of the affine system.
    let x_ls = a.tr_mul(&gs.solve(&b));
    let aff_res = (&a * &x_ls - &b).norm();
    if aff_res > 1e-8 * (1.0 + b.norm()) {
        return Ok(infeasible(problem));
    }

    let (mut x, mut s, mut mu) = match warm.and_then(|w| w.warm.as_ref()) {
        Some(w) if w.x.len() == lay.dim => (w.x.clone(), w.s.clone(), w.penalty),
        _ => (DVector::zeros(lay.dim), DVector::zeros(lay.dim), opts.initial_penalty),
    };
    let bnorm = 1.0 + b.norm();
    let cnorm = 1.0 + c.norm();
    let mut y = DVector::zeros(m);
    let mut status = SdpStatus::MaxIterations;
    let (mut pinf, mut dinf) = (f64::INFINITY, f64::INFINITY);
    let mut iters = 0;
    let mut ratio_acc = 0.0;
    let mut ratio_n = 0;
    for it in 1..=opts.max_iter {
        iters = it;
        let ax = &a * &x;
        let rhs = (&b - &ax) * mu + &a * (&c - &s);
        y = gs.solve(&rhs);
        let aty = a.tr_mul(&y);
        let v = &c - &aty - &x * mu;
        s = project(&v, &lay, true);
        x = (&s - &v) / mu;

        let ax = &a * &x;
        pinf = (&ax - &b).norm() / bnorm;
        dinf = (&aty + &s - &c).norm() / cnorm;
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pinf.max(dinf).max(gap) < opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if opts.sign_stop
            && it % 10 == 0
            && pinf.max(dinf) < 1e-3
            && pobj * dobj > 0.0
            && pobj.abs().min(dobj.abs()) > 4.0 * (pobj - dobj).abs()
        {
            status = SdpStatus::Optimal;
            break;
        }
        // Penalty balancing: a large μ favours primal feasibility.
        ratio_acc += (pinf.max(1e-300) / dinf.max(1e-300)).ln();
        ratio_n += 1;
        if ratio_n == 20 {
            let avg = ratio_acc / ratio_n as f64;
            if avg > 1.0 {
                mu = (mu * 1.6).min(1e6);
            } else if avg < -1.0 {
                mu = (mu / 1.6).max(1e-6);
            }
            ratio_acc = 0.0;
            ratio_n = 0;
        }
    }

    let mut blocks = Vec::new();
    for (k, &n) in lay.block_sizes.iter().enumerate() {
        let off = lay.block_offsets[k];
        blocks.push(unpack_block(&x.as_slice()[off..off + n * n], n));
    }
    let nonneg = x.as_slice()[lay.nonneg_offset..lay.free_offset].to_vec();
    let free = x.as_slice()[lay.free_offset..].to_vec();
    let dual: Vec<f64> = (0..m).map(|i| y[i] * row_scale[i] * c_scale).collect();
    let primal_objective = c_raw.dot(&x);
    let dual_objective: f64 = problem.constraints.iter().zip(&dual).map(|(k, yi)| k.rhs * yi).sum();
    Ok(SdpSolution {
        status,
        blocks,
        nonneg,
        free,
        dual,
        primal_objective,
        dual_objective,
        primal_residual: pinf,
        dual_residual: dinf,
        iterations: iters,
        warm: Some(WarmState { x, s, penalty: mu }),
    })
}

fn infeasible(p: &SdpProblem) -> SdpSolution {
    SdpSolution {
        status: SdpStatus::Infeasible,
        blocks: p.block_sizes.iter().map(|&n| CMat::zeros(n, n)).collect(),
        nonneg: vec![0.0; p.nonneg_count],
        free: vec![0.0; p.free_count],
        dual: vec![0.0; p.constraints.len()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        iterations: 0,
        warm: None,
    }
}

/// Value of a linear form at a point.
pub fn evaluate_form(form: &LinearForm, blocks: &[CMat], nonneg: &[f64], free: &[f64]) -> f64 {
    let mut v = 0.0;
    for (b, c) in &form.blocks {
        v += crate::linalg::re_trace_prod(&c.adjoint(), &blocks[*b]);
    }
    for &(i, c) in &form.nonneg {
        v += c * nonneg[i];
    }
    for &(i, c) in &form.free {
        v += c * free[i];
    }
    v
}

/// `[[Re H, −Im H], [Im H, Re H]]`, a real symmetric matrix whose spectrum is
/// that of `H` with every eigenvalue doubled.
pub fn hermitian_to_real_embedding(h: &CMat) -> RMat {
    let n = h.nrows();
    let mut r = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    r
}

/// Leading-eigenvector recovery `z = √λ₁ u₁`, phase-normalized so that the
/// largest-modulus entry is real and positive. Returns `z` and the rank
/// defect `1 − λ₁ / Tr(Z)`.
pub fn rank_one(z: &CMat) -> (CVec, f64) {
    let (vals, vecs) = herm_eig(z);
    let n = vals.len();
    if n == 0 {
        return (CVec::zeros(0), 0.0);
    }
    let lam = vals[n - 1].max(0.0);
    let mut u: CVec = vecs.column(n - 1).into_owned();
    let (imax, _) = u.iter().enumerate().fold((0, -1.0), |acc, (i, c)| if c.norm() > acc.1 { (i, c.norm()) } else { acc });
    let ph = u[imax];
    if ph.norm() > 0.0 {
        u *= ph.conj() / ph.norm();
    }
    let tr = z.trace().re;
    let defect = if tr > 0.0 { (1.0 - lam / tr).max(0.0) } else { 0.0 };
    (u.scale(lam.sqrt()), defect)
}

/// Draws `samples` vectors from `CN(0, Z)` and returns the best under `score`
/// (higher is better), or `None` when `samples == 0`.
pub fn gaussian_randomization<R, F>(z: &CMat, samples: usize, rng: &mut R, mut score: F) -> Option<(CVec, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(&CVec) -> f64,
{
    let (vals, vecs) = herm_eig(z);
    let root = CMat::from_fn(z.nrows(), z.ncols(), |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
    let mut best: Option<(CVec, f64)> = None;
    for _ in 0..samples {
        let w = CVec::from_fn(z.nrows(), |_, _| complex_normal(rng));
        let cand = &root * w;
        let sc = score(&cand);
        if best.as_ref().is_none_or(|(_, b)| sc > *b) {
            best = Some((cand, sc));
        }
    }
    best
}

// ---- text dump -------------------------------------------------------------

fn write_form(out: &mut String, f: &LinearForm) {
    for (b, c) in &f.blocks {
        let _ = writeln!(out, "block {b} {}", c.nrows());
        for i in 0..c.nrows() {
            let row: Vec<String> = (0..c.ncols()).map(|j| format!("{:e} {:e}", c[(i, j)].re, c[(i, j)].im)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    for (i, c) in &f.nonneg {
        let _ = writeln!(out, "nonneg {i} {c:e}");
    }
    for (i, c) in &f.free {
        let _ = writeln!(out, "free {i} {c:e}");
    }
    out.push_str("end\n");
}

/// Plain-text form of a problem. Matrices are written row-major as
/// `re im` pairs.
pub fn dump(p: &SdpProblem) -> String {
    let mut out = String::from("sdp v1\n");
    let sizes: Vec<String> = p.block_sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "blocks {} {}", p.block_sizes.len(), sizes.join(" "));
    let _ = writeln!(out, "nonneg {}", p.nonneg_count);
    let _ = writeln!(out, "free {}", p.free_count);
    out.push_str("objective\n");
    write_form(&mut out, &p.objective);
    let _ = writeln!(out, "constraints {}", p.constraints.len());
    for c in &p.constraints {
        let _ = writeln!(out, "constraint {:e}", c.rhs);
        write_form(&mut out, &c.form);
    }
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>, SdpError> {
        for (i, l) in self.it.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t.split_whitespace().collect());
            }
        }
        Err(SdpError::Parse { line: self.line + 1, reason: "unexpected end of input".into() })
    }

    fn err(&self, reason: impl Into<String>) -> SdpError {
        SdpError::Parse { line: self.line, reason: reason.into() }
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T, SdpError> {
        s.parse().map_err(|_| self.err(format!("bad number {s:?}")))
    }

    fn expect(&mut self, head: &str, count: usize) -> Result<Vec<&'a str>, SdpError> {
        let t = self.next()?;
        if t.first() != Some(&head) || t.len() != count + 1 {
            return Err(self.err(format!("expected {head:?} with {count} field(s)")));
        }
        Ok(t[1..].to_vec())
    }
}

fn read_form(ls: &mut Lines) -> Result<LinearForm, SdpError> {
    let mut f = LinearForm::default();
    loop {
        let t = ls.next()?;
        match t.as_slice() {
            ["end"] => return Ok(f),
            ["block", b, n] => {
                let b: usize = ls.num(b)?;
                let n: usize = ls.num(n)?;
                let mut m = CMat::zeros(n, n);
                for i in 0..n {
                    let row = ls.next()?;
                    if row.len() != 2 * n {
                        return Err(ls.err(format!("expected {} numbers", 2 * n)));
                    }
                    for j in 0..n {
                        m[(i, j)] = C64::new(ls.num(row[2 * j])?, ls.num(row[2 * j + 1])?);
                    }
                }
                f.blocks.push((b, m));
            }
            ["nonneg", i, c] => f.nonneg.push((ls.num(i)?, ls.num(c)?)),
            ["free", i, c] => f.free.push((ls.num(i)?, ls.num(c)?)),
            _ => return Err(ls.err("unrecognized form entry")),
        }
    }
}

/// Inverse of [`dump`].
pub fn load(text: &str) -> Result<SdpProblem, SdpError> {
    let mut ls = Lines { it: text.lines().enumerate(), line: 0 };
    if ls.next()? != ["sdp", "v1"] {
        return Err(ls.err("missing \"sdp v1\" header"));
    }
    let t = ls.next()?;
    if t.len() < 2 || t[0] != "blocks" {
        return Err(ls.err("expected blocks line"));
    }
    let nb: usize = ls.num(t[1])?;
    if t.len() != nb + 2 {
        return Err(ls.err("block count does not match sizes"));
    }
    let block_sizes = t[2..].iter().map(|s| ls.num(s)).collect::<Result<Vec<usize>, _>>()?;
    let f = ls.expect("nonneg", 1)?;
    let nonneg_count = ls.num(f[0])?;
    let f = ls.expect("free", 1)?;
    let free_count = ls.num(f[0])?;
    ls.expect("objective", 0)?;
    let objective = read_form(&mut ls)?;
    let f = ls.expect("constraints", 1)?;
    let nc: usize = ls.num(f[0])?;
    let mut constraints = Vec::with_capacity(nc);
    for _ in 0..nc {
        let f = ls.expect("constraint", 1)?;
        let rhs = ls.num(f[0])?;
        constraints.push(Constraint { form: read_form(&mut ls)?, rhs });
    }
    Ok(SdpProblem { block_sizes, nonneg_count, free_count, objective, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::trial_rng;
    use crate::linalg::{lambda_max, outer};

    fn e(n: usize, i: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        m[(i, i)] = C64::new(1.0, 0.0);
        m
    }

    /// `min Tr(C X)` with `Tr X = 1`, `X ⪰ 0` has value `λ_min(C)`.
    #[test]
    fn minimum_eigenvalue_program() {
        let c = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new([2.0, 1.0, 3.0][i], 0.0)
            } else if i < j {
                C64::new(0.3, 0.2 * (i + j) as f64)
            } else {
                C64::new(0.3, -0.2 * (i + j) as f64)
            }
        });
        let p = SdpProblem {
            block_sizes: vec![3],
            nonneg_count: 0,
            free_count: 0,
            objective: LinearForm::default().block(0, c.clone()),
            constraints: vec![Constraint { form: LinearForm::default().block(0, CMat::identity(3, 3)), rhs: 1.0 }],
        };
        let sol = solve(&p, &SdpOptions::default(), None).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let (vals, _) = herm_eig(&c);
        assert!((sol.primal_objective - vals[0]).abs() < 1e-5, "{} vs {}", sol.primal_objective, vals[0]);
        assert!((sol.dual_objective - vals[0]).abs() < 1e-5);
        let (_, defect) = rank_one(&sol.blocks[0]);
        assert!(defect < 1e-4);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let f = LinearForm::default().block(0, e(2, 0));
        let p = SdpProblem {
            block_sizes: vec![2],
            nonneg_count: 0,
            free_count: 0,
            objective: LinearForm::default(),
            constraints: vec![Constraint { form: f.clone(), rhs: 1.0 }, Constraint { form: f, rhs: 2.0 }],
        };
        assert_eq!(solve(&p, &SdpOptions::default(), None).unwrap().status, SdpStatus::Infeasible);
    }

    /// Inequalities via slacks and a free variable: maximize `t` with
    /// `X₀₀ − t ≥ 0.5`, `Tr X ≤ 2`.
    #[test]
    fn slack_and_free_variables() {
        let p = SdpProblem {
            block_sizes: vec![2],
            nonneg_count: 2,
            free_count: 1,
            objective: LinearForm::default().free(0, -1.0),
            constraints: vec![
                Constraint { form: LinearForm::default().block(0, e(2, 0)).free(0, -1.0).nonneg(0, -1.0), rhs: 0.5 },
                Constraint { form: LinearForm::default().block(0, CMat::identity(2, 2)).nonneg(1, 1.0), rhs: 2.0 },
            ],
        };
        let sol = solve(&p, &SdpOptions::default(), None).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.free[0] - 1.5).abs() < 1e-4, "{}", sol.free[0]);
        let warm = solve(&p, &SdpOptions::default(), Some(&sol)).unwrap();
        assert!(warm.iterations <= sol.iterations);
    }

    #[test]
    fn embedding_spectrum_doubles() {
        let h = CMat::from_fn(3, 3, |i, j| {
            let z = C64::new((i + j) as f64, i as f64 - j as f64);
            if i == j {
                C64::new(z.re, 0.0)
            } else {
                z
            }
        });
        let h = (&h + h.adjoint()).scale(0.5);
        let r = hermitian_to_real_embedding(&h);
        let mut re: Vec<f64> = SymmetricEigen::new(r).eigenvalues.iter().cloned().collect();
        re.sort_by(f64::total_cmp);
        let (vals, _) = herm_eig(&h);
        for (k, v) in vals.iter().enumerate() {
            assert!((re[2 * k] - v).abs() < 1e-10 && (re[2 * k + 1] - v).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_one_recovers_vector() {
        let z = CVec::from_vec(vec![C64::new(0.3, 0.4), C64::new(2.0, -1.0), C64::new(0.0, 1.0)]);
        let (r, defect) = rank_one(&outer(&z));
        assert!(defect < 1e-12);
        let phase = z[1] / z[1].norm();
        assert!(r[1].im.abs() < 1e-12 && r[1].re > 0.0);
        assert!((r - z * phase.conj()).norm() < 1e-10);
    }

    #[test]
    fn randomization_samples_best() {
        let z = outer(&CVec::from_element(2, C64::new(1.0, 0.0)));
        let mut rng = trial_rng(1, 0);
        let (v, s) = gaussian_randomization(&z, 20, &mut rng, |v| -v.norm()).unwrap();
        assert!((v.norm() + s).abs() < 1e-12);
        assert!(lambda_max(&z) > 0.0);
    }

    #[test]
    fn dump_round_trip() {
        let p = SdpProblem {
            block_sizes: vec![2, 1],
            nonneg_count: 1,
            free_count: 1,
            objective: LinearForm::default().free(0, -1.0),
            constraints: vec![Constraint {
                form: LinearForm::default()
                    .block(0, CMat::from_fn(2, 2, |i, j| C64::new(0.1 + i as f64, 0.7 * j as f64 - 0.2)))
                    .block(1, e(1, 0))
                    .nonneg(0, 1.0 / 3.0),
                rhs: 1e-7,
            }],
        };
        let text = dump(&p);
        assert!(text.starts_with("sdp v1\n"));
        assert_eq!(load(&text).unwrap(), p);
        assert!(load("sdp v2\n").is_err());
    }
}
