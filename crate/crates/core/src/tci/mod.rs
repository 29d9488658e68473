//! Tensor cross interpolation: learns a [`TensorTrain`] from adaptively
//! chosen entries of a black-box tensor.
//!
//! Each bond is updated from the 2-site unfolding restricted to the pivot
//! sets of its neighbours. Sweeps alternate direction; the error estimate is
//! the largest residual left by the pivot search, normalized by the largest
//! sampled magnitude.

mod prrlu;

use std::cell::Cell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::linalg;
use crate::tensor::{Core, TensorTrain};
use crate::{Error, Result, C64};

/// Constant in the sample-count bound `C · d · χ² · N_max`.
pub const SAMPLE_BUDGET_CONSTANT: u64 = 16;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TciConfig {
    pub tol: f64,
    pub max_bond: usize,
    pub max_sweeps: usize,
    /// Defaults to the grid midpoint.
    pub initial_pivot: Option<Vec<usize>>,
    /// Unfoldings with more entries than this use rook pivoting on demand
    /// instead of evaluating every entry.
    pub full_search_limit: usize,
    pub rook_iterations: usize,
    pub execution: Execution,
}

impl Default for TciConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_bond: 256,
            max_sweeps: 20,
            initial_pivot: None,
            full_search_limit: 250_000,
            rook_iterations: 8,
            execution: Execution::default(),
        }
    }
}

impl TciConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("TCI tolerance must be positive, got {}", self.tol)));
        }
        if self.max_bond == 0 || self.max_sweeps == 0 {
            return Err(Error::Config("max_bond and max_sweeps must be at least 1".into()));
        }
        if let Some(p) = &self.initial_pivot {
            if p.len() != dims.len() || p.iter().zip(dims).any(|(i, n)| i >= n) {
                return Err(Error::Config(format!(
                    "initial pivot {p:?} does not fit dimensions {dims:?}"
                )));
            }
        }
        Ok(())
    }
}

type EvalFn<'a> = dyn Fn(&[usize]) -> C64 + Sync + Send + 'a;

/// A tensor given by a pure function of its multi-index, with an evaluation
/// counter and an optional memo table.
pub struct BlackBoxTensor<'a> {
    dims: Vec<usize>,
    f: Box<EvalFn<'a>>,
    evaluations: AtomicU64,
    cache: Option<Mutex<HashMap<u128, C64>>>,
}

impl<'a> BlackBoxTensor<'a> {
    pub fn new(dims: Vec<usize>, f: impl Fn(&[usize]) -> C64 + Sync + Send + 'a) -> Self {
        let addressable = dims
            .iter()
            .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
            .is_some();
        Self {
            dims,
            f: Box::new(f),
            evaluations: AtomicU64::new(0),
            cache: addressable.then(|| Mutex::new(HashMap::new())),
        }
    }

    /// Drops the memo table; every request calls the function again.
    pub fn without_cache(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of distinct function calls made so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn eval(&self, idx: &[usize]) -> Result<C64> {
        let v = self.eval_batch(1, |_, buf| buf.extend_from_slice(idx), Execution::Sequential)?;
        Ok(v[0])
    }

    fn key(&self, idx: &[usize]) -> u128 {
        idx.iter().zip(&self.dims).fold(0u128, |acc, (&i, &n)| acc * n as u128 + i as u128)
    }

    fn call(&self, idx: &[usize]) -> Result<C64> {
        let v = (self.f)(idx);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample { index: idx.to_vec() })
        }
    }

    /// Evaluates `count` entries; `index(k, buf)` writes the k-th multi-index
    /// into an empty buffer.
    pub(crate) fn eval_batch<G>(&self, count: usize, index: G, exec: Execution) -> Result<Vec<C64>>
    where
        G: Fn(usize, &mut Vec<usize>) + Sync + Send,
    {
        let build = |k: usize| {
            let mut buf = Vec::with_capacity(self.dims.len());
            index(k, &mut buf);
            buf
        };
        let Some(cache) = &self.cache else {
            self.evaluations.fetch_add(count as u64, Ordering::Relaxed);
            return exec.map_collect(count, |k| self.call(&build(k))).into_iter().collect();
        };

        let keys: Vec<u128> = exec.map_collect(count, |k| self.key(&build(k)));
        let mut out = vec![C64::new(0.0, 0.0); count];
        let mut misses = Vec::new();
        {
            let table = cache.lock().expect("cache lock poisoned");
            for (k, key) in keys.iter().enumerate() {
                match table.get(key) {
                    Some(v) => out[k] = *v,
                    None => misses.push(k),
                }
            }
        }
        let computed: Vec<C64> = exec
            .map_collect(misses.len(), |m| self.call(&build(misses[m])))
            .into_iter()
            .collect::<Result<_>>()?;
        let mut table = cache.lock().expect("cache lock poisoned");
        let mut fresh = 0;
        for (&k, v) in misses.iter().zip(computed) {
            out[k] = v;
            if table.insert(keys[k], v).is_none() {
                fresh += 1;
            }
        }
        self.evaluations.fetch_add(fresh, Ordering::Relaxed);
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TciDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    /// Normalized error estimate after each sweep.
    pub error_trace: Vec<f64>,
    pub final_error: f64,
    pub bond_dims: Vec<usize>,
    pub evaluations: u64,
    pub max_abs_sample: f64,
    pub num_sites: usize,
    pub max_local_dim: usize,
    /// Bond updates that used rook rather than full pivot search.
    pub rook_updates: usize,
    pub max_pivot_condition: f64,
    pub warnings: Vec<String>,
    /// Final `(left, right)` pivot multi-indices of every bond.
    #[serde(skip)]
    pub pivot_sets: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>)>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleBudget {
    pub evaluations: u64,
    pub bound: u64,
    pub within_bound: bool,
}

/// Compares the recorded evaluation count with `C · d · χ² · N_max`.
pub fn sample_budget(diag: &TciDiagnostics) -> SampleBudget {
    let chi = diag.bond_dims.iter().copied().max().unwrap_or(1) as u64;
    let bound =
        SAMPLE_BUDGET_CONSTANT * diag.num_sites as u64 * chi * chi * diag.max_local_dim as u64;
    SampleBudget { evaluations: diag.evaluations, bound, within_bound: diag.evaluations <= bound }
}

pub fn tci_learn(f: &BlackBoxTensor<'_>, cfg: &TciConfig) -> Result<(TensorTrain, TciDiagnostics)> {
    let dims = f.dims().to_vec();
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Structure(format!("invalid black-box dimensions {dims:?}")));
    }
    cfg.validate(&dims)?;
    let n = dims.len();
    let start_evals = f.evaluations();
    let mut diag = TciDiagnostics {
        num_sites: n,
        max_local_dim: dims.iter().copied().max().unwrap_or(1),
        ..Default::default()
    };

    if n == 1 {
        let values = f.eval_batch(dims[0], |k, b| b.push(k), cfg.execution)?;
        diag.max_abs_sample = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        diag.converged = true;
        diag.evaluations = f.evaluations() - start_evals;
        return Ok((TensorTrain::new(vec![Core::from_values(&values)])?, diag));
    }

    let pivot = cfg.initial_pivot.clone().unwrap_or_else(|| dims.iter().map(|d| d / 2).collect());
    let mut st = Sweeper {
        f,
        cfg,
        dims: &dims,
        i_sets: (0..=n).map(|l| vec![pivot[..l].to_vec()]).collect(),
        j_sets: (0..=n).map(|l| vec![pivot[l..].to_vec()]).collect(),
        max_abs: f.eval(&pivot)?.norm(),
        rook_updates: 0,
    };

    // a sweep counts towards convergence only if it is below tolerance and
    // did not grow the largest bond; early sweeps see tiny pivot sets and
    // underestimate the error
    let mut below = 0;
    let mut chi = 1;
    for sweep in 0..cfg.max_sweeps {
        let bonds: Vec<usize> =
            if sweep % 2 == 0 { (0..n - 1).collect() } else { (0..n - 1).rev().collect() };
        let mut err = 0.0f64;
        for b in bonds {
            err = err.max(st.update_bond(b)?);
        }
        let normalized = if st.max_abs > 0.0 { err / st.max_abs } else { 0.0 };
        diag.error_trace.push(normalized);
        diag.sweeps = sweep + 1;
        if st.max_abs == 0.0 {
            break;
        }
        let new_chi = (1..n).map(|l| st.i_sets[l].len()).max().unwrap_or(1);
        let stable = new_chi <= chi;
        chi = new_chi;
        below = if normalized <= cfg.tol && stable { below + 1 } else { 0 };
        if below >= 2 {
            diag.converged = true;
            break;
        }
    }
    diag.final_error = diag.error_trace.last().copied().unwrap_or(0.0);
    diag.rook_updates = st.rook_updates;

    if st.max_abs == 0.0 {
        let msg = "all sampled entries are zero; returning the zero tensor".to_string();
        log::warn!("{msg}");
        diag.warnings.push(msg);
        diag.converged = true;
        diag.bond_dims = vec![1; n - 1];
        diag.evaluations = f.evaluations() - start_evals;
        return Ok((TensorTrain::constant(&dims, C64::new(0.0, 0.0))?, diag));
    }

    let last_forward = (diag.sweeps - 1) % 2 == 0;
    st.renest(last_forward)?;
    let (tt, max_cond) = st.assemble()?;
    diag.max_pivot_condition = max_cond;
    if max_cond > 1e12 {
        let msg = format!("pivot matrix condition number {max_cond:.3e} exceeds 1e12");
        log::warn!("{msg}");
        diag.warnings.push(msg);
    }
    if !diag.converged {
        log::warn!(
            "cross interpolation reached {} sweeps with error estimate {:.3e}",
            diag.sweeps,
            diag.final_error
        );
    }
    diag.max_abs_sample = st.max_abs;
    diag.bond_dims = tt.bond_dims();
    diag.pivot_sets = (1..n).map(|l| (st.i_sets[l].clone(), st.j_sets[l].clone())).collect();
    diag.evaluations = f.evaluations() - start_evals;
    Ok((tt, diag))
}

struct Sweeper<'s, 'a> {
    f: &'s BlackBoxTensor<'a>,
    cfg: &'s TciConfig,
    dims: &'s [usize],
    /// `i_sets[l]`: left multi-indices of length `l`.
    i_sets: Vec<Vec<Vec<usize>>>,
    /// `j_sets[l]`: right multi-indices covering sites `l..n`.
    j_sets: Vec<Vec<Vec<usize>>>,
    max_abs: f64,
    rook_updates: usize,
}

impl Sweeper<'_, '_> {
    /// Re-selects the pivots of bond `b` (between sites `b` and `b+1`) and
    /// returns the residual magnitude left by the search.
    fn update_bond(&mut self, b: usize) -> Result<f64> {
        let left = &self.i_sets[b];
        let right = &self.j_sets[b + 2];
        let (n1, n2) = (self.dims[b], self.dims[b + 1]);
        let (nl, nr) = (left.len(), right.len());
        let (m, n) = (nl * n1, n2 * nr);
        let max_rank = self.cfg.max_bond.min(m).min(n);
        let exec = self.cfg.execution;
        let entry = |r: usize, c: usize, buf: &mut Vec<usize>| {
            buf.extend_from_slice(&left[r / n1]);
            buf.push(r % n1);
            buf.push(c / nr);
            buf.extend_from_slice(&right[c % nr]);
        };

        let pivots = if m * n <= self.cfg.full_search_limit {
            let pi = self.f.eval_batch(m * n, |k, buf| entry(k / n, k % n, buf), exec)?;
            self.max_abs = pi.iter().map(|v| v.norm()).fold(self.max_abs, f64::max);
            prrlu::full(&pi, m, n, self.cfg.tol * self.max_abs, max_rank)
        } else {
            self.rook_updates += 1;
            let seen = Cell::new(self.max_abs);
            let mut failure = None;
            let f = self.f;
            let mut fetch = |count: usize, g: &(dyn Fn(usize, &mut Vec<usize>) + Sync)| {
                match f.eval_batch(count, g, exec) {
                    Ok(v) => {
                        seen.set(v.iter().map(|x| x.norm()).fold(seen.get(), f64::max));
                        v
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        vec![C64::new(0.0, 0.0); count]
                    }
                }
            };
            let start = self.rook_start(b);
            let tol = self.cfg.tol;
            let threshold = || tol * seen.get();
            let fetch = std::cell::RefCell::new(&mut fetch);
            let p = prrlu::rook(
                n,
                &mut |r| (fetch.borrow_mut())(n, &|c, buf| entry(r, c, buf)),
                &mut |c| (fetch.borrow_mut())(m, &|r, buf| entry(r, c, buf)),
                &threshold,
                max_rank,
                start,
                self.cfg.rook_iterations,
            );
            drop(fetch);
            if let Some(e) = failure {
                return Err(e);
            }
            self.max_abs = seen.get();
            p
        };

        if pivots.rows.is_empty() {
            return Ok(pivots.error);
        }
        let mut new_i: Vec<Vec<usize>> = pivots
            .rows
            .iter()
            .map(|&r| {
                let mut v = left[r / n1].clone();
                v.push(r % n1);
                v
            })
            .collect();
        let mut new_j: Vec<Vec<usize>> = pivots
            .cols
            .iter()
            .map(|&c| {
                let mut v = vec![c / nr];
                v.extend_from_slice(&right[c % nr]);
                v
            })
            .collect();
        new_i.sort();
        new_j.sort();
        self.i_sets[b + 1] = new_i;
        self.j_sets[b + 1] = new_j;
        Ok(pivots.error)
    }

    /// Unfolding column of the current first right pivot of bond `b`, if it
    /// is still addressable.
    fn rook_start(&self, b: usize) -> usize {
        let right = &self.j_sets[b + 2];
        let cur = &self.j_sets[b + 1][0];
        match right.binary_search(&cur[1..].to_vec()) {
            Ok(j) => cur[0] * right.len() + j,
            Err(_) => 0,
        }
    }

    /// Re-selects the pivot sets on one side so that both sides are nested
    /// (`I_{l+1} ⊂ I_l × S_l`, `J_l ⊂ S_l × J_{l+1}`), which makes the
    /// assembled train interpolate every pivot entry. After a forward sweep
    /// the left sets are already nested and the right sets are rebuilt from
    /// the last site backwards; after a backward sweep the roles swap.
    fn renest(&mut self, left_nested: bool) -> Result<()> {
        let n = self.dims.len();
        let exec = self.cfg.execution;
        let bonds: Vec<usize> =
            if left_nested { (0..n - 1).rev().collect() } else { (0..n - 1).collect() };
        for b in bonds {
            let rows = &self.i_sets[b + 1];
            let cols = &self.j_sets[b + 1];
            let chi = rows.len();
            if left_nested {
                // candidates S_{b+1} × J_{b+2}
                let right = &self.j_sets[b + 2];
                let (ns, nr) = (self.dims[b + 1], right.len());
                let m = self.f.eval_batch(
                    chi * ns * nr,
                    |k, buf| {
                        let c = k % (ns * nr);
                        buf.extend_from_slice(&rows[k / (ns * nr)]);
                        buf.push(c / nr);
                        buf.extend_from_slice(&right[c % nr]);
                    },
                    exec,
                )?;
                let p = prrlu::full(&m, chi, ns * nr, 0.0, chi);
                if p.cols.len() == chi {
                    let mut new_j: Vec<Vec<usize>> = p
                        .cols
                        .iter()
                        .map(|&c| {
                            let mut v = vec![c / nr];
                            v.extend_from_slice(&right[c % nr]);
                            v
                        })
                        .collect();
                    new_j.sort();
                    self.j_sets[b + 1] = new_j;
                }
            } else {
                // candidates I_b × S_b
                let left = &self.i_sets[b];
                let (nl, ns) = (left.len(), self.dims[b]);
                let chi_c = cols.len();
                let m = self.f.eval_batch(
                    nl * ns * chi_c,
                    |k, buf| {
                        let r = k / chi_c;
                        buf.extend_from_slice(&left[r / ns]);
                        buf.push(r % ns);
                        buf.extend_from_slice(&cols[k % chi_c]);
                    },
                    exec,
                )?;
                let p = prrlu::full(&m, nl * ns, chi_c, 0.0, chi_c);
                if p.rows.len() == chi_c {
                    let mut new_i: Vec<Vec<usize>> = p
                        .rows
                        .iter()
                        .map(|&r| {
                            let mut v = left[r / ns].clone();
                            v.push(r % ns);
                            v
                        })
                        .collect();
                    new_i.sort();
                    self.i_sets[b + 1] = new_i;
                }
            }
        }
        Ok(())
    }

    /// Builds the cores `T_l P_l^{-1}` from the final pivot sets.
    fn assemble(&mut self) -> Result<(TensorTrain, f64)> {
        let n = self.dims.len();
        let exec = self.cfg.execution;
        let mut cores = Vec::with_capacity(n);
        let mut max_cond = 1.0f64;
        for l in 0..n {
            let left = &self.i_sets[l];
            let right = &self.j_sets[l + 1];
            let (nl, ns, nr) = (left.len(), self.dims[l], right.len());
            let t = self.f.eval_batch(
                nl * ns * nr,
                |k, buf| {
                    buf.extend_from_slice(&left[k / (ns * nr)]);
                    buf.push((k / nr) % ns);
                    buf.extend_from_slice(&right[k % nr]);
                },
                exec,
            )?;
            self.max_abs = t.iter().map(|v| v.norm()).fold(self.max_abs, f64::max);
            let data = if l + 1 < n {
                let rows = &self.i_sets[l + 1];
                let chi = rows.len();
                let p = self.f.eval_batch(
                    chi * chi,
                    |k, buf| {
                        buf.extend_from_slice(&rows[k / chi]);
                        buf.extend_from_slice(&right[k % chi]);
                    },
                    exec,
                )?;
                max_cond = max_cond.max(linalg::condition_number(&p, chi));
                linalg::right_solve(&t, nl * ns, &p, chi)
            } else {
                t
            };
            cores.push(Core::new(nl, ns, nr, data)?);
        }
        let tt = TensorTrain::new(cores)?;
        if tt.cores().iter().any(|c| c.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(Error::NonFinite("cross interpolation cores (singular pivot matrix)".into()));
        }
        Ok((tt, max_cond))
    }
}
