use faer::MatRef;

use super::{contract_slice, Core, TensorTrain};
use crate::{Error, Result, C64};

/// A pair `(k, l)` addressing the two local indices of an operator core.
pub type LocalIndex = (usize, usize);

/// 4-way core `(left, n1, n2, right)` stored as a 3-way core with fused
/// local index `k * n2 + l`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCore {
    inner: Core,
    n1: usize,
    n2: usize,
}

impl OpCore {
    pub fn new(inner: Core, n1: usize, n2: usize) -> Result<Self> {
        if n1 * n2 != inner.site() {
            return Err(Error::Structure(format!(
                "local shape {n1}x{n2} does not match fused dimension {}",
                inner.site()
            )));
        }
        Ok(Self { inner, n1, n2 })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.inner.left(), self.n1, self.n2, self.inner.right())
    }

    pub fn local_shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn fused(&self) -> &Core {
        &self.inner
    }

    pub fn get(&self, a: usize, k: usize, l: usize, b: usize) -> C64 {
        self.inner.get(a, k * self.n2 + l, b)
    }
}

/// Operator-form tensor train: every core carries two local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TtOperator {
    cores: Vec<OpCore>,
}

impl TtOperator {
    pub fn new(cores: Vec<OpCore>) -> Result<Self> {
        let fused: Vec<Core> = cores.iter().map(|c| c.inner.clone()).collect();
        TensorTrain::new(fused)?;
        Ok(Self { cores })
    }

    /// Reinterprets a train whose local dimensions factor as `shapes[i]`.
    pub fn from_train(train: &TensorTrain, shapes: &[(usize, usize)]) -> Result<Self> {
        if shapes.len() != train.len() {
            return Err(Error::Structure(format!(
                "{} local shapes for {} cores",
                shapes.len(),
                train.len()
            )));
        }
        let cores = train
            .cores()
            .iter()
            .zip(shapes)
            .map(|(c, &(n1, n2))| OpCore::new(c.clone(), n1, n2))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cores })
    }

    /// The same tensor viewed as a plain train over fused local indices.
    pub fn to_train(&self) -> TensorTrain {
        TensorTrain { cores: self.cores.iter().map(|c| c.inner.clone()).collect(), labels: None }
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn local_shapes(&self) -> Vec<(usize, usize)> {
        self.cores.iter().map(OpCore::local_shape).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.cores.iter().skip(1).map(|c| c.inner.left()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn num_entries(&self) -> usize {
        self.cores.iter().map(|c| c.inner.data().len()).sum()
    }

    pub fn evaluate(&self, idx: &[LocalIndex]) -> Result<C64> {
        self.evaluate_with_flops(idx).map(|(v, _)| v)
    }

    /// Contracts one `(left, right)` slice per core; the count of complex
    /// multiply-adds is `Σ χ_{i-1} χ_i`, independent of the local sizes.
    pub fn evaluate_with_flops(&self, idx: &[LocalIndex]) -> Result<(C64, u64)> {
        if idx.len() != self.cores.len() {
            return Err(Error::Structure(format!(
                "{} index pairs for {} cores",
                idx.len(),
                self.cores.len()
            )));
        }
        let mut v = vec![C64::new(1.0, 0.0)];
        let mut flops = 0u64;
        for (i, (core, &(k, l))) in self.cores.iter().zip(idx).enumerate() {
            if k >= core.n1 {
                return Err(Error::IndexOutOfRange { core: i, index: k, dim: core.n1 });
            }
            if l >= core.n2 {
                return Err(Error::IndexOutOfRange { core: i, index: l, dim: core.n2 });
            }
            v = contract_slice(&v, &core.inner, k * core.n2 + l);
            flops += (core.inner.left() * core.inner.right()) as u64;
        }
        Ok((v[0], flops))
    }

    /// Applies `m` along the first (`second == false`) or second local index
    /// of core `i`.
    pub fn apply_matrix(&self, i: usize, second: bool, m: MatRef<'_, f64>) -> Result<TtOperator> {
        let core = self
            .cores
            .get(i)
            .ok_or_else(|| Error::Structure(format!("no operator core at position {i}")))?;
        let (l, n1, n2, r) = core.shape();
        let n = if second { n2 } else { n1 };
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Structure(format!(
                "matrix is {}x{} but local dimension is {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        let inner = Core::from_fn(l, n1 * n2, r, |a, kl, b| {
            let (k, ll) = (kl / n2, kl % n2);
            if second {
                (0..n2).map(|q| m[(ll, q)] * core.get(a, k, q, b)).sum()
            } else {
                (0..n1).map(|q| m[(k, q)] * core.get(a, q, ll, b)).sum()
            }
        });
        let mut cores = self.cores.clone();
        cores[i] = OpCore { inner, n1, n2 };
        Ok(TtOperator { cores })
    }

    pub fn scale(&self, factor: C64) -> TtOperator {
        let mut cores = self.cores.clone();
        let first = &mut cores[0].inner;
        first.data.iter_mut().for_each(|x| *x *= factor);
        TtOperator { cores }
    }

    pub fn svd_truncate(&self, eps: f64) -> Result<TtOperator> {
        let t = self.to_train().svd_truncate(eps)?;
        TtOperator::from_train(&t, &self.local_shapes())
    }
}
