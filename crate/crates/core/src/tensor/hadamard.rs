//! Zip-up Hadamard product with on-the-fly summation and compression.
//!
//! A left environment `R[o, a, b]` links the output bond `o` built so far to
//! the open bonds `a`, `b` of the two operands. Summed sites fold into `R`;
//! kept sites are split off by an SVD so that the full product bond
//! `χ_a · χ_b` only ever exists inside one local matrix.

use super::{Core, Reduced, TensorTrain};
use crate::{linalg, Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest local matrix (in complex entries) the kernel will form.
pub const MAX_LOCAL_ENTRIES: usize = 1 << 25;

pub(super) fn zip_product(
    a: &TensorTrain,
    b: &TensorTrain,
    summed: &[usize],
    cutoff: f64,
    bond_cap: usize,
) -> Result<Reduced> {
    let n = a.len();
    let mut is_summed = vec![false; n];
    for &s in summed {
        if s >= n {
            return Err(Error::Structure(format!("axis {s} out of range for {n} cores")));
        }
        is_summed[s] = true;
    }

    // env laid out as (o, a, b) row-major
    let mut env = vec![C64::new(1.0, 0.0)];
    let (mut o, mut ra, mut rb) = (1usize, 1usize, 1usize);
    let mut out: Vec<Core> = Vec::new();
    let mut labels = Vec::new();

    for i in 0..n {
        let ca = &a.cores()[i];
        let cb = &b.cores()[i];
        let (_, ns, ra2) = ca.shape();
        let rb2 = cb.right();
        let product = ra2 * rb2;
        if product > bond_cap {
            return Err(Error::BondCap { position: i, bond: product, cap: bond_cap });
        }
        let entries = (o * ns).saturating_mul(product).max(o * rb * ns * ra2);
        if entries > MAX_LOCAL_ENTRIES {
            return Err(Error::MemoryLimit { position: i, entries, limit: MAX_LOCAL_ENTRIES });
        }

        // x[o, b, s, a'] = Σ_a env[o, a, b] A[a, s, a']
        let mut x = vec![ZERO; o * rb * ns * ra2];
        for oi in 0..o {
            for ai in 0..ra {
                let arow = &ca.data()[ai * ns * ra2..][..ns * ra2];
                for bi in 0..rb {
                    let e = env[(oi * ra + ai) * rb + bi];
                    if e == ZERO {
                        continue;
                    }
                    let dst = &mut x[(oi * rb + bi) * ns * ra2..][..ns * ra2];
                    for (d, v) in dst.iter_mut().zip(arow) {
                        *d += e * v;
                    }
                }
            }
        }

        // t[o, s, a', b'] = Σ_b x[o, b, s, a'] B[b, s, b']
        let mut t = vec![ZERO; o * ns * ra2 * rb2];
        for oi in 0..o {
            for bi in 0..rb {
                for s in 0..ns {
                    let brow = &cb.data()[(bi * ns + s) * rb2..][..rb2];
                    let xrow = &x[((oi * rb + bi) * ns + s) * ra2..][..ra2];
                    let dst = &mut t[(oi * ns + s) * ra2 * rb2..][..ra2 * rb2];
                    for (ai, &xv) in xrow.iter().enumerate() {
                        if xv == ZERO {
                            continue;
                        }
                        for (d, bv) in dst[ai * rb2..][..rb2].iter_mut().zip(brow) {
                            *d += xv * bv;
                        }
                    }
                }
            }
        }

        if is_summed[i] {
            let mut next = vec![ZERO; o * product];
            for oi in 0..o {
                for s in 0..ns {
                    let src = &t[(oi * ns + s) * product..][..product];
                    for (d, v) in next[oi * product..][..product].iter_mut().zip(src) {
                        *d += v;
                    }
                }
            }
            env = next;
        } else {
            let rows = o * ns;
            let svd = linalg::svd(&t, rows, product)?;
            let q = svd.s.len();
            let total: f64 = svd.s.iter().map(|s| s * s).sum();
            let keep = linalg::truncation_rank(&svd.s, cutoff * total);
            let mut u = Vec::with_capacity(rows * keep);
            for r in 0..rows {
                u.extend_from_slice(&svd.u[r * q..r * q + keep]);
            }
            out.push(Core::new(o, ns, keep, u)?);
            if let Some(l) = a.labels() {
                labels.push(l[i]);
            }
            let mut next = svd.vh[..keep * product].to_vec();
            for (k, row) in next.chunks_mut(product).enumerate() {
                row.iter_mut().for_each(|v| *v *= svd.s[k]);
            }
            env = next;
            o = keep;
        }
        ra = ra2;
        rb = rb2;
    }

    // env is now (o, 1, 1)
    let Some(last) = out.last_mut() else {
        return Ok(Reduced::Scalar(env[0]));
    };
    let (l, s, r) = last.shape();
    let data = linalg::matmul(last.data(), l * s, r, &env, 1);
    *last = Core::new(l, s, 1, data)?;
    let mut train = TensorTrain::new(out)?;
    if a.labels().is_some() {
        train = train.with_labels(labels)?;
    }
    Ok(Reduced::Train(train))
}
