//! Concrete problem instances and data plumbing: a CSR design matrix with
//! labels, libsvm-format ingestion and serialization, the nonconvex tanh
//! classification loss, synthetic test problems with known KL structure,
//! spectral-norm/Lipschitz estimation, and the without-replacement
//! minibatch sampler.
//!
//! The design matrix type is immutable after construction and cheap to
//! share across threads behind an `Arc`; everything downstream (losses,
//! samplers, solvers) borrows it read-only.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::composite::{Batch, CompositeProblem, SmoothPart};
use crate::error::{Error, Result};
use crate::prox::ProxOracle;
use crate::vecmath::dot;

/// A sparse design matrix A ∈ ℝ^{N×d} in compressed-sparse-row form,
/// together with the binary labels b ∈ {−1, +1}^N.
///
/// Invariants, enforced at construction: row offsets are nondecreasing and
/// bracket the storage arrays exactly, column indices are strictly
/// increasing within each row and lie in [0, d), all values are finite,
/// and every label is exactly ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesign {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
}

impl SparseDesign {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidParameter(format!(
                "row_offsets has length {}, need n_rows + 1 = {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidParameter(
                "row_offsets must start at 0 and end at the storage length".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "column index array ({}) and value array ({}) lengths differ",
                col_indices.len(),
                values.len()
            )));
        }
        if labels.len() != n_rows {
            return Err(Error::InvalidParameter(format!(
                "got {} labels for {} rows",
                labels.len(),
                n_rows
            )));
        }
        for w in row_offsets.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidParameter("row_offsets must be nondecreasing".into()));
            }
        }
        for i in 0..n_rows {
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for (j, &c) in cols.iter().enumerate() {
                if c >= n_cols {
                    return Err(Error::InvalidParameter(format!(
                        "column index {c} out of range in row {i} (d = {n_cols})"
                    )));
                }
                if j > 0 && c <= cols[j - 1] {
                    return Err(Error::InvalidParameter(format!(
                        "column indices must be strictly increasing within row {i}"
                    )));
                }
            }
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("matrix values must be finite".into()));
        }
        if !labels.iter().all(|&b| b == 1.0 || b == -1.0) {
            return Err(Error::InvalidParameter("labels must be exactly +1 or -1".into()));
        }
        Ok(SparseDesign { n_rows, n_cols, row_offsets, col_indices, values, labels })
    }

    /// Builds a design from dense rows, dropping exact zeros. Handy for
    /// small test matrices and for spectral estimates of dense operators.
    pub fn from_dense_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::InvalidParameter("dense rows must share one length".into()));
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        SparseDesign::new(rows.len(), n_cols, offsets, cols, vals, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// The i-th row as parallel (column indices, values) slices.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    /// a_iᵀ x.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// A·x ∈ ℝ^N.
    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "mat_vec dimension mismatch");
        (0..self.n_rows).map(|i| self.row_dot(i, x)).collect()
    }

    /// Aᵀ·y ∈ ℝ^d.
    pub fn t_mat_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n_rows, "t_mat_vec dimension mismatch");
        let mut out = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += y[i] * v;
            }
        }
        out
    }
}

/// Result of [`parse_libsvm`]: the design plus how many `0` labels were
/// mapped to −1 (callers that care about {0,1}-labeled files can warn).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLibsvm {
    pub design: SparseDesign,
    pub zero_labels_mapped: usize,
}

fn parse_err(line: usize, msg: String) -> Error {
    Error::Parse { line, msg }
}

/// Parses libsvm-format text: one sample per line, `label idx:val idx:val …`
/// with 1-based, strictly increasing feature indices. Lines may start with
/// whitespace, end with LF or CRLF, and carry no features at all
/// (label-only samples); blank lines are skipped. Labels must be +1, −1,
/// or 0, the last mapped to −1 and counted in the result.
///
/// The column dimension is the largest index seen unless `dim_override`
/// fixes it (required when several files must agree on d); an index above
/// the override is a parse error. All errors carry 1-based line numbers.
pub fn parse_libsvm<R: BufRead>(source: R, dim_override: Option<usize>) -> Result<ParsedLibsvm> {
    let mut row_offsets = vec![0usize];
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut zero_labels_mapped = 0usize;
    let mut max_index = 0usize;

    for (i, line) in source.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label_token) = tokens.next() else { continue };
        let raw: f64 = label_token
            .parse()
            .map_err(|_| parse_err(lineno, format!("cannot parse label `{label_token}`")))?;
        let label = if raw == 1.0 {
            1.0
        } else if raw == -1.0 {
            -1.0
        } else if raw == 0.0 {
            zero_labels_mapped += 1;
            -1.0
        } else {
            return Err(parse_err(lineno, format!("label must be +1, -1, or 0, got `{label_token}`")));
        };

        let mut prev = 0usize; // last accepted index, 1-based
        for token in tokens {
            let Some((idx_str, val_str)) = token.split_once(':') else {
                return Err(parse_err(lineno, format!("expected an index:value pair, got `{token}`")));
            };
            let idx: usize = idx_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("cannot parse feature index `{idx_str}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based; index 0 is invalid".into()));
            }
            if idx <= prev {
                return Err(parse_err(
                    lineno,
                    format!("feature indices must be strictly increasing (index {idx} after {prev})"),
                ));
            }
            if let Some(d) = dim_override {
                if idx > d {
                    return Err(parse_err(
                        lineno,
                        format!("feature index {idx} exceeds the declared dimension {d}"),
                    ));
                }
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("cannot parse feature value `{val_str}`")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("feature value `{val_str}` is not finite")));
            }
            col_indices.push(idx - 1);
            values.push(val);
            prev = idx;
        }
        max_index = max_index.max(prev);
        labels.push(label);
        row_offsets.push(col_indices.len());
    }

    let n_cols = dim_override.unwrap_or(max_index);
    let n_rows = labels.len();
    let design = SparseDesign::new(n_rows, n_cols, row_offsets, col_indices, values, labels)?;
    Ok(ParsedLibsvm { design, zero_labels_mapped })
}

/// Serializes a design in libsvm format: labels as `+1`/`-1`, indices
/// 1-based, values printed in the shortest form that reparses to the same
/// float, LF line endings. Output of this function reparses to an
/// identical design, and re-serializing that reproduces the bytes.
pub fn write_libsvm<W: Write>(design: &SparseDesign, mut sink: W) -> Result<()> {
    for i in 0..design.n_rows() {
        sink.write_all(if design.labels[i] > 0.0 { b"+1" } else { b"-1" })?;
        let (cols, vals) = design.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            write!(sink, " {}:{}", c + 1, v)?;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

fn tanh_value_unchecked(design: &SparseDesign, x: &[f64]) -> f64 {
    let n = design.n_rows() as f64;
    let mut acc = 0.0;
    for i in 0..design.n_rows() {
        acc += 1.0 - (design.labels[i] * design.row_dot(i, x)).tanh();
    }
    acc / n
}

fn tanh_grad_unchecked(design: &SparseDesign, x: &[f64], batch: &[usize], out: &mut [f64]) {
    out.fill(0.0);
    let scale = 1.0 / batch.len() as f64;
    for &i in batch {
        let u = design.labels[i] * design.row_dot(i, x);
        let t = u.tanh();
        let w = scale * design.labels[i] * (1.0 - t * t);
        let (cols, vals) = design.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            out[c] -= w * v;
        }
    }
}

/// The robust classification loss f(x) = (1/N) Σ_i (1 − tanh(b_i·a_iᵀx)).
pub fn tanh_loss_value(design: &SparseDesign, x: &[f64]) -> Result<f64> {
    if design.n_rows() == 0 {
        return Err(Error::Precondition("loss needs at least one sample".into()));
    }
    if x.len() != design.n_cols() {
        return Err(Error::DimensionMismatch { expected: design.n_cols(), got: x.len() });
    }
    Ok(tanh_value_unchecked(design, x))
}

/// Minibatch gradient of the tanh loss: (1/|B|) Σ_{i∈B} −b_i·(1 −
/// tanh²(b_i·a_iᵀx))·a_i. The batch must be nonempty with indices in
/// [0, N).
pub fn tanh_loss_grad(design: &SparseDesign, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if x.len() != design.n_cols() {
        return Err(Error::DimensionMismatch { expected: design.n_cols(), got: x.len() });
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= design.n_rows()) {
        return Err(Error::Precondition(format!(
            "batch index {bad} out of range (N = {})",
            design.n_rows()
        )));
    }
    let mut out = vec![0.0; x.len()];
    tanh_grad_unchecked(design, x, batch, &mut out);
    Ok(out)
}

/// Smooth part of the tanh classification objective over a shared design.
pub struct TanhLoss {
    design: Arc<SparseDesign>,
}

impl TanhLoss {
    pub fn new(design: Arc<SparseDesign>) -> Result<Self> {
        if design.n_rows() == 0 || design.n_cols() == 0 {
            return Err(Error::InvalidParameter(
                "tanh loss needs a nonempty design (N >= 1, d >= 1)".into(),
            ));
        }
        Ok(TanhLoss { design })
    }

    pub fn design(&self) -> &Arc<SparseDesign> {
        &self.design
    }
}

impl SmoothPart for TanhLoss {
    fn dim(&self) -> usize {
        self.design.n_cols()
    }

    fn num_terms(&self) -> usize {
        self.design.n_rows()
    }

    fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.design.n_cols());
        tanh_value_unchecked(&self.design, x)
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.design.n_cols());
        let full: Vec<usize> = (0..self.design.n_rows()).collect();
        tanh_grad_unchecked(&self.design, x, &full, out);
    }

    fn stochastic_grad_into(
        &self,
        x: &[f64],
        batch: Batch<'_>,
        _rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        match batch {
            Batch::Full => {
                self.grad_into(x, out);
                Ok(())
            }
            Batch::Indices(idx) => {
                if idx.is_empty() {
                    return Err(Error::EmptyBatch);
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= self.design.n_rows()) {
                    return Err(Error::Precondition(format!(
                        "batch index {bad} out of range (N = {})",
                        self.design.n_rows()
                    )));
                }
                tanh_grad_unchecked(&self.design, x, idx, out);
                Ok(())
            }
        }
    }
}

/// Least-squares smooth part written as a finite sum: with dense rows a_i
/// and targets b_i, f_i(x) = (N/2)(a_iᵀx − b_i)², so that f = (1/N) Σ f_i
/// = ½‖Ax − b‖². Minibatch gradients average ∇f_i over the batch.
pub struct QuadraticLoss {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl QuadraticLoss {
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParameter("need at least one row and one column".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("all rows must share one length".into()));
        }
        if b.len() != rows.len() {
            return Err(Error::InvalidParameter(format!(
                "got {} targets for {} rows",
                b.len(),
                rows.len()
            )));
        }
        if rows.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix and targets must be finite".into()));
        }
        Ok(QuadraticLoss { rows, b })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn residual(&self, i: usize, x: &[f64]) -> f64 {
        dot(&self.rows[i], x) - self.b[i]
    }
}

impl SmoothPart for QuadraticLoss {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn num_terms(&self) -> usize {
        self.rows.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * (0..self.rows.len()).map(|i| self.residual(i, x).powi(2)).sum::<f64>()
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.rows.len() {
            let r = self.residual(i, x);
            for (o, &a) in out.iter_mut().zip(&self.rows[i]) {
                *o += r * a;
            }
        }
    }

    fn stochastic_grad_into(
        &self,
        x: &[f64],
        batch: Batch<'_>,
        _rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        match batch {
            Batch::Full => {
                self.grad_into(x, out);
                Ok(())
            }
            Batch::Indices(idx) => {
                if idx.is_empty() {
                    return Err(Error::EmptyBatch);
                }
                if let Some(&bad) = idx.iter().find(|&&i| i >= self.rows.len()) {
                    return Err(Error::Precondition(format!(
                        "batch index {bad} out of range (N = {})",
                        self.rows.len()
                    )));
                }
                out.fill(0.0);
                let scale = self.rows.len() as f64 / idx.len() as f64;
                for &i in idx {
                    let r = scale * self.residual(i, x);
                    for (o, &a) in out.iter_mut().zip(&self.rows[i]) {
                        *o += r * a;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Separable power objective f(x) = (1/p) Σ_i |x_i|^p with p ≥ 2 — a
/// smooth test problem whose only stationary point is the origin and whose
/// KL exponent there is 1 − 1/p.
pub struct PowerAbs {
    p: f64,
    dim: usize,
}

impl PowerAbs {
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        if !p.is_finite() || p < 2.0 {
            return Err(Error::InvalidParameter(format!("power p = {p} must be finite and >= 2")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(PowerAbs { p, dim })
    }
}

impl SmoothPart for PowerAbs {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>() / self.p
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        if self.p == 2.0 {
            out.copy_from_slice(x);
        } else {
            for (o, &v) in out.iter_mut().zip(x) {
                *o = v * v.abs().powf(self.p - 2.0);
            }
        }
    }
}

/// Wraps a smooth part with an additive Gaussian oracle: minibatch
/// gradient queries return the base estimate plus σ·ζ with ζ ~ N(0, I_d).
/// Full-batch queries and the deterministic value/gradient stay exact, so
/// residual and merit evaluations are unaffected; only the optimizer's
/// stochastic queries see noise. A base without finite-sum structure is
/// served its full gradient (plus noise) on index batches.
pub struct GaussianNoise {
    base: Box<dyn SmoothPart>,
    sigma: f64,
}

impl GaussianNoise {
    pub fn new(base: Box<dyn SmoothPart>, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be finite and >= 0")));
        }
        Ok(GaussianNoise { base, sigma })
    }
}

impl SmoothPart for GaussianNoise {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn num_terms(&self) -> usize {
        self.base.num_terms()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x)
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.grad_into(x, out);
    }

    fn stochastic_grad_into(
        &self,
        x: &[f64],
        batch: Batch<'_>,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<()> {
        match batch {
            Batch::Full => {
                self.base.grad_into(x, out);
                Ok(())
            }
            Batch::Indices(idx) => {
                if idx.is_empty() {
                    return Err(Error::EmptyBatch);
                }
                if self.base.num_terms() == 1 {
                    self.base.grad_into(x, out);
                } else {
                    self.base.stochastic_grad_into(x, batch, rng, out)?;
                }
                for o in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *o += self.sigma * z;
                }
                Ok(())
            }
        }
    }
}

/// A spectral-norm estimate with its convergence status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// Estimated ‖A‖₂² (largest eigenvalue of AᵀA).
    pub value: f64,
    /// Whether the relative-change stopping rule fired before `max_iter`.
    pub converged: bool,
    /// Power iterations performed.
    pub iters: u64,
}

/// Estimates ‖A‖₂² by power iteration on AᵀA, stopping when the Rayleigh
/// quotient's relative change drops below `tol`. The start vector comes
/// from an internally seeded generator, so the estimate is deterministic
/// for a given design. A zero matrix short-circuits to 0 (converged).
pub fn spectral_norm_sq(design: &SparseDesign, tol: f64, max_iter: u64) -> Result<SpectralEstimate> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!("tol = {tol} must be a positive finite number")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    if design.values.iter().all(|&v| v == 0.0) {
        return Ok(SpectralEstimate { value: 0.0, converged: true, iters: 0 });
    }

    let d = design.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    normalize_or_e1(&mut v);

    let mut prev: Option<f64> = None;
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let av = design.mat_vec(&v);
        let w = design.t_mat_vec(&av);
        lambda = dot(&v, &w);
        let nw = crate::vecmath::norm2(&w);
        if nw == 0.0 {
            // v landed in the null space of a nonzero matrix; restart.
            v = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            normalize_or_e1(&mut v);
            prev = None;
            continue;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if let Some(p) = prev {
            if (lambda - p).abs() <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
                return Ok(SpectralEstimate { value: lambda, converged: true, iters: it });
            }
        }
        prev = Some(lambda);
    }
    Ok(SpectralEstimate { value: lambda, converged: false, iters: max_iter })
}

fn normalize_or_e1(v: &mut [f64]) {
    let n = crate::vecmath::norm2(v);
    if n == 0.0 {
        v.fill(0.0);
        v[0] = 1.0;
    } else {
        for vi in v.iter_mut() {
            *vi /= n;
        }
    }
}

/// Lipschitz estimate L = 4‖A‖²/(5N) for the tanh classification loss,
/// with the spectral factor computed at tolerance 1e−8 and at most 5000
/// power iterations. The convergence flag of the underlying spectral
/// estimate is passed through.
pub fn lipschitz_estimate(design: &SparseDesign) -> Result<SpectralEstimate> {
    if design.n_rows() == 0 {
        return Err(Error::InvalidParameter("Lipschitz estimate needs a nonempty design".into()));
    }
    let est = spectral_norm_sq(design, 1e-8, 5000)?;
    Ok(SpectralEstimate {
        value: 4.0 * est.value / (5.0 * design.n_rows() as f64),
        converged: est.converged,
        iters: est.iters,
    })
}

/// Generates a synthetic sparse binary classification instance:
/// per-coordinate Bernoulli(density) sparsity with standard normal values,
/// labels from a planted unit-norm separator with a 10% flip rate.
///
/// The draw order is fixed so results reproduce across versions: first d
/// standard normals for the separator (then normalized), then per row and
/// per coordinate one uniform for inclusion followed — only if included —
/// by one normal for the value, then one uniform per row for the label
/// flip. Ties at a_iᵀw = 0 get label +1 before flipping.
pub fn gen_synthetic_classification(
    n: usize,
    d: usize,
    density: f64,
    seed: u64,
) -> Result<SparseDesign> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("need N >= 1 and d >= 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density = {density} must lie in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    normalize_or_e1(&mut w);

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row_start = vals.len();
        let mut score = 0.0;
        for j in 0..d {
            if rng.random::<f64>() < density {
                let v: f64 = rng.sample(StandardNormal);
                cols.push(j);
                vals.push(v);
                score += v * w[j];
            }
        }
        let _ = row_start;
        let mut label = if score >= 0.0 { 1.0 } else { -1.0 };
        if rng.random::<f64>() < 0.1 {
            label = -label;
        }
        labels.push(label);
        offsets.push(vals.len());
    }
    SparseDesign::new(n, d, offsets, cols, vals, labels)
}

/// Recipe for a synthetic composite test problem, with an optional known
/// KL exponent carried as metadata (never asserted, only compared against
/// empirical fits).
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub known_theta: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum SyntheticKind {
    /// ½‖Ax − b‖² + ν‖x‖₁ with dense rows.
    QuadraticL1 { rows: Vec<Vec<f64>>, b: Vec<f64>, nu: f64 },
    /// (1/p) Σ |x_i|^p, unregularized.
    PowerAbs { p: f64, dim: usize },
    /// Generated tanh classification instance with ν = 1/N.
    TanhClassification { n: usize, d: usize, density: f64, seed: u64 },
}

impl SyntheticSpec {
    pub fn quadratic_l1(rows: Vec<Vec<f64>>, b: Vec<f64>, nu: f64) -> Self {
        SyntheticSpec { kind: SyntheticKind::QuadraticL1 { rows, b, nu }, known_theta: Some(0.5) }
    }

    pub fn power_abs(p: f64, dim: usize) -> Self {
        SyntheticSpec { kind: SyntheticKind::PowerAbs { p, dim }, known_theta: Some(1.0 - 1.0 / p) }
    }

    pub fn tanh_classification(n: usize, d: usize, density: f64, seed: u64) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::TanhClassification { n, d, density, seed },
            known_theta: None,
        }
    }
}

/// A wired-up problem plus the metadata solvers and diagnostics want.
pub struct BuiltProblem {
    pub problem: CompositeProblem,
    /// KL exponent when analytically available; metadata only.
    pub known_theta: Option<f64>,
    /// Lipschitz constant (or estimate) of ∇f when available.
    pub lipschitz: Option<f64>,
    /// The underlying design for data-backed problems.
    pub design: Option<Arc<SparseDesign>>,
}

/// Builds the composite problem a [`SyntheticSpec`] describes, wiring
/// oracles, prox, lower bound, and metadata.
pub fn make_problem(spec: &SyntheticSpec) -> Result<BuiltProblem> {
    match &spec.kind {
        SyntheticKind::QuadraticL1 { rows, b, nu } => {
            let smooth = QuadraticLoss::new(rows.clone(), b.clone())?;
            let reg = if *nu == 0.0 { ProxOracle::zero() } else { ProxOracle::l1(*nu)? };
            let operator = SparseDesign::from_dense_rows(rows, vec![1.0; rows.len()])?;
            let est = spectral_norm_sq(&operator, 1e-10, 10_000)?;
            let mut problem = CompositeProblem::new(Box::new(smooth), reg);
            problem.lower_bound_hint = Some(0.0);
            Ok(BuiltProblem {
                problem,
                known_theta: spec.known_theta,
                lipschitz: Some(est.value),
                design: None,
            })
        }
        SyntheticKind::PowerAbs { p, dim } => {
            let smooth = PowerAbs::new(*p, *dim)?;
            let mut problem = CompositeProblem::new(Box::new(smooth), ProxOracle::zero());
            problem.lower_bound_hint = Some(0.0);
            Ok(BuiltProblem {
                problem,
                known_theta: spec.known_theta,
                lipschitz: if *p == 2.0 { Some(1.0) } else { None },
                design: None,
            })
        }
        SyntheticKind::TanhClassification { n, d, density, seed } => {
            let design = Arc::new(gen_synthetic_classification(*n, *d, *density, *seed)?);
            let nu = 1.0 / *n as f64;
            make_problem_from_design(design, nu, 0.0)
        }
    }
}

/// Builds the tanh classification problem over a caller-supplied design
/// with ℓ1 weight `nu1` and optional ridge weight `nu2` (elastic net when
/// positive). The Lipschitz estimate 4‖A‖²/(5N) is attached.
pub fn make_problem_from_design(
    design: Arc<SparseDesign>,
    nu1: f64,
    nu2: f64,
) -> Result<BuiltProblem> {
    let smooth = TanhLoss::new(Arc::clone(&design))?;
    let reg = if nu2 == 0.0 {
        if nu1 == 0.0 { ProxOracle::zero() } else { ProxOracle::l1(nu1)? }
    } else {
        ProxOracle::elastic_net(nu1, nu2)?
    };
    let est = lipschitz_estimate(&design)?;
    let mut problem = CompositeProblem::new(Box::new(smooth), reg);
    problem.lower_bound_hint = Some(0.0);
    Ok(BuiltProblem {
        problem,
        known_theta: None,
        lipschitz: Some(est.value),
        design: Some(design),
    })
}

/// Without-replacement minibatch sampler: each epoch is a fresh seeded
/// permutation of [0, N) served in `batch_size` chunks (the last chunk of
/// an epoch may be short when N is not a multiple). Batches within one
/// epoch are pairwise disjoint and cover every index exactly once.
///
/// The sampler owns its generator — stream 1 of a ChaCha8 keyed by `seed`
/// — so sampling is reproducible and independent of any other randomness
/// in a run.
pub struct MinibatchSampler {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    pos: usize,
}

impl MinibatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("sampler needs N >= 1".into()));
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidParameter(format!(
                "batch size {batch_size} must lie in [1, {n}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(MinibatchSampler { n, batch_size, rng, perm: (0..n).collect(), pos: n })
    }

    /// The next index batch; reshuffles when an epoch is exhausted.
    pub fn next_batch(&mut self) -> &[usize] {
        if self.pos >= self.n {
            self.perm.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.n);
        let batch = &self.perm[self.pos..end];
        self.pos = end;
        batch
    }
}
