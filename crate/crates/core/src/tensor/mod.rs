//! Complex tensor trains and the contraction/compression algebra.
//!
//! A [`TensorTrain`] is a chain of 3-way cores `(left bond, local, right bond)`
//! stored dense and row-major. Every operation is pure: it consumes a
//! reference and returns a new train.

mod hadamard;
pub mod io;
mod operator;

pub use operator::{LocalIndex, OpCore, TtOperator};

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::grids::AxisKind;
use crate::linalg;
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Tags a core's local index with the grid axis it runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisLabel {
    pub kind: AxisKind,
    pub asset: usize,
}

/// One 3-way core with shape `(left, site, right)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    site: usize,
    right: usize,
    data: Vec<C64>,
}

impl Core {
    pub fn new(left: usize, site: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if left == 0 || site == 0 || right == 0 {
            return Err(Error::Structure(format!(
                "core dimensions must be positive, got ({left}, {site}, {right})"
            )));
        }
        if data.len() != left * site * right {
            return Err(Error::Structure(format!(
                "core ({left}, {site}, {right}) needs {} entries, got {}",
                left * site * right,
                data.len()
            )));
        }
        Ok(Self { left, site, right, data })
    }

    pub fn from_fn(
        left: usize,
        site: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let mut data = Vec::with_capacity(left * site * right);
        for a in 0..left {
            for s in 0..site {
                for b in 0..right {
                    data.push(f(a, s, b));
                }
            }
        }
        Self { left, site, right, data }
    }

    /// Bond-preserving core with `I[a, s, b] = δ_ab` for every `s`.
    pub fn identity(bond: usize, site: usize) -> Self {
        Self::from_fn(bond, site, bond, |a, _, b| if a == b { ONE } else { ZERO })
    }

    /// Bond-1 core holding `values` along its local index.
    pub fn from_values(values: &[C64]) -> Self {
        Self { left: 1, site: values.len(), right: 1, data: values.to_vec() }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.site, self.right)
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, a: usize, s: usize, b: usize) -> C64 {
        self.data[(a * self.site + s) * self.right + b]
    }

    fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `Σ_s core[:, s, :]` as a row-major `left x right` matrix.
    fn summed(&self) -> Vec<C64> {
        let mut m = vec![ZERO; self.left * self.right];
        for a in 0..self.left {
            for s in 0..self.site {
                let row = &self.data[(a * self.site + s) * self.right..][..self.right];
                for (acc, x) in m[a * self.right..][..self.right].iter_mut().zip(row) {
                    *acc += x;
                }
            }
        }
        m
    }
}

/// Result of a reduction that may consume every core.
#[derive(Clone, Debug)]
pub enum Reduced {
    Train(TensorTrain),
    Scalar(C64),
}

impl Reduced {
    pub fn into_train(self) -> Result<TensorTrain> {
        match self {
            Reduced::Train(t) => Ok(t),
            Reduced::Scalar(_) => Err(Error::Structure("reduction left no cores".into())),
        }
    }

    pub fn into_scalar(self) -> Result<C64> {
        match self {
            Reduced::Scalar(z) => Ok(z),
            Reduced::Train(_) => Err(Error::Structure("reduction left uncontracted cores".into())),
        }
    }
}

/// Summary of an SVD recompression.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TruncationReport {
    pub bonds_before: Vec<usize>,
    pub bonds_after: Vec<usize>,
    /// Upper bound on `‖F − F'‖²_F / ‖F‖²_F`, summed over bonds.
    pub discarded_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
    labels: Option<Vec<AxisLabel>>,
}

impl TensorTrain {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        validate_chain(&cores)?;
        Ok(Self { cores, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<AxisLabel>) -> Result<Self> {
        if labels.len() != self.cores.len() {
            return Err(Error::Structure(format!(
                "{} labels for {} cores",
                labels.len(),
                self.cores.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Bond-1 train whose every entry is `value`.
    pub fn constant(dims: &[usize], value: C64) -> Result<Self> {
        let mut cores: Vec<Core> = dims.iter().map(|&n| Core::from_values(&vec![ONE; n])).collect();
        if let Some(first) = cores.first_mut() {
            first.data.iter_mut().for_each(|x| *x = value);
        }
        Self::new(cores)
    }

    /// Rank-1 train `Π_i factors[i][s_i]`.
    pub fn product(factors: &[Vec<C64>]) -> Result<Self> {
        Self::new(factors.iter().map(|f| Core::from_values(f)).collect())
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn labels(&self) -> Option<&[AxisLabel]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(Core::site).collect()
    }

    /// Internal bond dimensions `χ_1 .. χ_{n-1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores.iter().skip(1).map(Core::left).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Total number of stored complex entries.
    pub fn num_entries(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub fn evaluate(&self, idx: &[usize]) -> Result<C64> {
        self.evaluate_with_flops(idx).map(|(v, _)| v)
    }

    /// Evaluation plus the number of complex multiply-adds performed.
    pub fn evaluate_with_flops(&self, idx: &[usize]) -> Result<(C64, u64)> {
        if idx.len() != self.cores.len() {
            return Err(Error::Structure(format!(
                "multi-index of length {} for {} cores",
                idx.len(),
                self.cores.len()
            )));
        }
        let mut v = vec![ONE];
        let mut flops = 0u64;
        for (i, (core, &s)) in self.cores.iter().zip(idx).enumerate() {
            if s >= core.site {
                return Err(Error::IndexOutOfRange { core: i, index: s, dim: core.site });
            }
            v = contract_slice(&v, core, s);
            flops += (core.left * core.right) as u64;
        }
        Ok((v[0], flops))
    }

    /// Dense row-major expansion (last index fastest). Intended for small
    /// trains; refuses more than 2^26 entries.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let total: usize = self.dims().iter().product();
        if total > 1 << 26 {
            return Err(Error::Structure(format!("refusing to densify {total} entries")));
        }
        // rows: multi-index prefix, cols: current bond
        let mut acc = vec![ONE];
        let mut rows = 1usize;
        let mut bond = 1usize;
        for core in &self.cores {
            let cols = core.site * core.right;
            let next = linalg::matmul(&acc, rows, bond, &core.data, cols);
            rows *= core.site;
            bond = core.right;
            acc = next;
        }
        Ok(acc)
    }

    /// Squared Frobenius norm, by contracting the train with its conjugate.
    pub fn norm_sq(&self) -> f64 {
        // env[a, a'] over the conjugate pair
        let mut env = vec![ONE];
        let mut bond = 1usize;
        for core in &self.cores {
            let (l, n, r) = core.shape();
            let mut next = vec![ZERO; r * r];
            for s in 0..n {
                // t = env * core_s  (l x r)
                let mut t = vec![ZERO; bond * r];
                for a in 0..bond {
                    for ap in 0..l {
                        let e = env[a * bond + ap];
                        if e == ZERO {
                            continue;
                        }
                        let row = &core.data[(ap * n + s) * r..][..r];
                        for (x, y) in t[a * r..][..r].iter_mut().zip(row) {
                            *x += e * y;
                        }
                    }
                }
                // next[b, b'] += Σ_a conj(core[a,s,b]) t[a, b']
                for a in 0..l {
                    let row = &core.data[(a * n + s) * r..][..r];
                    for b in 0..r {
                        let cb = row[b].conj();
                        if cb == ZERO {
                            continue;
                        }
                        for (x, y) in next[b * r..][..r].iter_mut().zip(&t[a * r..][..r]) {
                            *x += cb * y;
                        }
                    }
                }
            }
            env = next;
            bond = r;
        }
        env[0].re
    }

    fn check_finite(&self, context: &str) -> Result<()> {
        if self.cores.iter().all(Core::is_finite) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    /// Left-to-right QR canonicalization followed by a right-to-left SVD
    /// sweep that discards trailing singular values.
    ///
    /// The squared discarded weight is bounded by `eps · ‖F‖²` in total,
    /// split evenly across the bonds.
    pub fn svd_truncate(&self, eps: f64) -> Result<TensorTrain> {
        self.svd_truncate_with_report(eps).map(|(t, _)| t)
    }

    pub fn svd_truncate_with_report(&self, eps: f64) -> Result<(TensorTrain, TruncationReport)> {
        if !(eps >= 0.0) {
            return Err(Error::Domain(format!("SVD tolerance must be non-negative, got {eps}")));
        }
        self.check_finite("svd_truncate input")?;
        let bonds_before = self.bond_dims();
        let n = self.cores.len();
        let mut cores = self.cores.clone();

        for i in 0..n.saturating_sub(1) {
            let (l, s, r) = cores[i].shape();
            let (q, k, rmat) = linalg::qr(&cores[i].data, l * s, r);
            cores[i] = Core { left: l, site: s, right: k, data: q };
            let next = &cores[i + 1];
            let (_, s2, r2) = next.shape();
            let data = linalg::matmul(&rmat, k, r, &next.data, s2 * r2);
            cores[i + 1] = Core { left: k, site: s2, right: r2, data };
        }

        let total_sq: f64 = cores[n - 1].data.iter().map(|z| z.norm_sqr()).sum();
        let per_bond = if n > 1 { eps * total_sq / (n - 1) as f64 } else { 0.0 };
        let mut discarded = 0.0;

        for i in (1..n).rev() {
            let (l, s, r) = cores[i].shape();
            let svd = linalg::svd(&cores[i].data, l, s * r)?;
            let q = svd.s.len();
            let keep = linalg::truncation_rank(&svd.s, per_bond);
            discarded += svd.s[keep..].iter().map(|x| x * x).sum::<f64>();

            let vh: Vec<C64> = svd.vh[..keep * s * r].to_vec();
            cores[i] = Core { left: keep, site: s, right: r, data: vh };

            let mut us = vec![ZERO; l * keep];
            for a in 0..l {
                for j in 0..keep {
                    us[a * keep + j] = svd.u[a * q + j] * svd.s[j];
                }
            }
            let prev = &cores[i - 1];
            let (pl, ps, _) = prev.shape();
            let data = linalg::matmul(&prev.data, pl * ps, l, &us, keep);
            cores[i - 1] = Core { left: pl, site: ps, right: keep, data };
        }

        let out = TensorTrain { cores, labels: self.labels.clone() };
        out.check_finite("svd_truncate output")?;
        let report = TruncationReport {
            bonds_before,
            bonds_after: out.bond_dims(),
            discarded_weight: if total_sq > 0.0 { discarded / total_sq } else { 0.0 },
        };
        Ok((out, report))
    }

    /// Entry-wise (Hadamard) product. Bond `i` of the result is the product
    /// of the operands' bonds `i`.
    pub fn elementwise_multiply(&self, other: &TensorTrain) -> Result<TensorTrain> {
        self.check_same_dims(other)?;
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let (la, n, ra) = a.shape();
                let (lb, _, rb) = b.shape();
                Core::from_fn(la * lb, n, ra * rb, |ab, s, cd| {
                    let (i, j) = (ab / lb, ab % lb);
                    let (k, l) = (cd / rb, cd % rb);
                    a.get(i, s, k) * b.get(j, s, l)
                })
            })
            .collect();
        Ok(TensorTrain { cores, labels: self.labels.clone() })
    }

    fn check_same_dims(&self, other: &TensorTrain) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Structure(format!(
                "local dimensions differ: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    /// Contracts the listed cores with the all-ones vector. Each resulting
    /// bond matrix is absorbed into the nearest kept core to its right, or
    /// to its left for trailing positions. Summing every core yields
    /// [`Reduced::Scalar`].
    pub fn sum_over_axes(&self, axes: &[usize]) -> Result<Reduced> {
        let n = self.cores.len();
        let mut summed = vec![false; n];
        for &a in axes {
            if a >= n {
                return Err(Error::Structure(format!("axis {a} out of range for {n} cores")));
            }
            summed[a] = true;
        }
        let mut out: Vec<Core> = Vec::new();
        let mut labels = Vec::new();
        // pending: product of summed matrices since the last kept core
        let mut pending: Option<(Vec<C64>, usize, usize)> = None;
        for (i, core) in self.cores.iter().enumerate() {
            if summed[i] {
                let m = core.summed();
                pending = Some(match pending.take() {
                    None => (m, core.left, core.right),
                    Some((p, pl, pr)) => (linalg::matmul(&p, pl, pr, &m, core.right), pl, core.right),
                });
            } else {
                let mut c = core.clone();
                if let Some((p, pl, pr)) = pending.take() {
                    let data = linalg::matmul(&p, pl, pr, &c.data, c.site * c.right);
                    c = Core { left: pl, site: c.site, right: c.right, data };
                }
                out.push(c);
                if let Some(l) = &self.labels {
                    labels.push(l[i]);
                }
            }
        }
        match (out.last_mut(), pending) {
            (None, Some((p, _, _))) => return Ok(Reduced::Scalar(p[0])),
            (None, None) => return Err(Error::Structure("empty train".into())),
            (Some(last), Some((p, pl, pr))) => {
                let (l, s, _) = last.shape();
                let data = linalg::matmul(&last.data, l * s, pl, &p, pr);
                *last = Core { left: l, site: s, right: pr, data };
            }
            (Some(_), None) => {}
        }
        let mut t = TensorTrain::new(out)?;
        if self.labels.is_some() {
            t.labels = Some(labels);
        }
        Ok(Reduced::Train(t))
    }

    /// Contracts cores `i` and `i+1` into one core with fused local index
    /// `s_i * N_{i+1} + s_{i+1}`.
    pub fn merge_adjacent_cores(&self, i: usize) -> Result<TensorTrain> {
        if i + 1 >= self.cores.len() {
            return Err(Error::Structure(format!(
                "cannot merge cores {i} and {} of a {}-core train",
                i + 1,
                self.cores.len()
            )));
        }
        let merged = merge_pair(&self.cores[i], &self.cores[i + 1]);
        let mut cores = self.cores.clone();
        cores.splice(i..=i + 1, std::iter::once(merged));
        Ok(TensorTrain { cores, labels: None })
    }

    /// Merges cores `(0,1), (2,3), ...` into 4-way operator cores keeping the
    /// two local indices separate.
    pub fn pair_into_operator(&self) -> Result<TtOperator> {
        if self.cores.len() % 2 != 0 || self.cores.is_empty() {
            return Err(Error::Structure(format!(
                "pairwise merge needs an even number of cores, got {}",
                self.cores.len()
            )));
        }
        let cores = self
            .cores
            .chunks(2)
            .map(|pair| {
                let merged = merge_pair(&pair[0], &pair[1]);
                OpCore::new(merged, pair[0].site, pair[1].site)
            })
            .collect::<Result<Vec<_>>>()?;
        TtOperator::new(cores)
    }

    /// Inserts identity cores. Each entry is `(gap, local_dim)` where gap `g`
    /// means "before original core `g`" (`g == len()` appends). Several
    /// inserts at one gap keep their listed order.
    pub fn insert_identity_cores(&self, inserts: &[(usize, usize)]) -> Result<TensorTrain> {
        let n = self.cores.len();
        for &(g, dim) in inserts {
            if g > n || dim == 0 {
                return Err(Error::Structure(format!("invalid identity insert ({g}, {dim})")));
            }
        }
        let bond_at = |g: usize| if g == 0 { 1 } else { self.cores[g - 1].right };
        let mut cores = Vec::with_capacity(n + inserts.len());
        for g in 0..=n {
            for &(_, dim) in inserts.iter().filter(|(gap, _)| *gap == g) {
                cores.push(Core::identity(bond_at(g), dim));
            }
            if g < n {
                cores.push(self.cores[g].clone());
            }
        }
        TensorTrain::new(cores)
    }

    /// Replaces core `i` by `new[:, s, :] = Σ_s' m[s, s'] old[:, s', :]`.
    pub fn apply_matrix_to_core(&self, i: usize, m: MatRef<'_, f64>) -> Result<TensorTrain> {
        let core = self
            .cores
            .get(i)
            .ok_or_else(|| Error::Structure(format!("no core at position {i}")))?;
        let (l, n, r) = core.shape();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Structure(format!(
                "matrix is {}x{} but core {i} has local dimension {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        let new = Core::from_fn(l, n, r, |a, s, b| {
            (0..n).map(|sp| core.get(a, sp, b) * m[(s, sp)]).sum()
        });
        let mut cores = self.cores.clone();
        cores[i] = new;
        Ok(TensorTrain { cores, labels: self.labels.clone() })
    }

    /// Fused Hadamard product, axis summation and exact-ish recompression.
    ///
    /// Equivalent to `self.elementwise_multiply(other)?.sum_over_axes(summed)`
    /// up to the relative squared `cutoff` applied while sweeping left to
    /// right, but never materializes the product cores. Fails with
    /// [`Error::BondCap`] if a product bond exceeds `bond_cap`.
    pub fn hadamard_sum_compress(
        &self,
        other: &TensorTrain,
        summed: &[usize],
        cutoff: f64,
        bond_cap: usize,
    ) -> Result<Reduced> {
        self.check_same_dims(other)?;
        hadamard::zip_product(self, other, summed, cutoff, bond_cap)
    }
}

fn validate_chain(cores: &[Core]) -> Result<()> {
    if cores.is_empty() {
        return Err(Error::Structure("a tensor train needs at least one core".into()));
    }
    if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
        return Err(Error::Structure("boundary bonds must be 1".into()));
    }
    for (i, w) in cores.windows(2).enumerate() {
        if w[0].right != w[1].left {
            return Err(Error::Structure(format!(
                "bond mismatch between cores {i} and {}: {} vs {}",
                i + 1,
                w[0].right,
                w[1].left
            )));
        }
    }
    Ok(())
}

/// `v (1 x left) · core[:, s, :]`.
pub(crate) fn contract_slice(v: &[C64], core: &Core, s: usize) -> Vec<C64> {
    let (l, n, r) = core.shape();
    let mut out = vec![ZERO; r];
    for (a, &va) in v.iter().enumerate().take(l) {
        let row = &core.data[(a * n + s) * r..][..r];
        for (o, x) in out.iter_mut().zip(row) {
            *o += va * x;
        }
    }
    out
}

fn merge_pair(a: &Core, b: &Core) -> Core {
    let (la, na, ra) = a.shape();
    let (_, nb, rb) = b.shape();
    let data = linalg::matmul(&a.data, la * na, ra, &b.data, nb * rb);
    // (la, na, nb, rb) row-major is exactly (la, na*nb, rb)
    Core { left: la, site: na * nb, right: rb, data }
}

#[cfg(test)]
mod tests;
