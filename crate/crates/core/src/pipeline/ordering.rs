use serde::{Deserialize, Serialize};

use crate::grids::AxisKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `z_1, σ_1, S_1, …, z_d, σ_d, S_d`.
    #[default]
    Interleaved,
    /// `z_1 … z_d, σ_1 … σ_d, S_1 … S_d`.
    Separated,
}

/// The axis carried by one core of the full integrand train.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSlot {
    pub kind: AxisKind,
    /// Position of the asset in the (possibly reordered) chain.
    pub asset: usize,
}

pub fn interleave_ordering(d: usize, layout: Layout) -> Vec<CoreSlot> {
    let kinds = [AxisKind::Frequency, AxisKind::Volatility, AxisKind::Spot];
    match layout {
        Layout::Interleaved => (0..d)
            .flat_map(|asset| kinds.iter().map(move |&kind| CoreSlot { kind, asset }))
            .collect(),
        Layout::Separated => kinds
            .iter()
            .flat_map(|&kind| (0..d).map(move |asset| CoreSlot { kind, asset }))
            .collect(),
    }
}

/// Asset permutation that places strongly correlated pairs next to each
/// other: a greedy chain seeded with the most correlated pair and extended
/// at whichever end gains more `|ρ|`. Falls back to the identity when the
/// chain does not beat it.
pub fn reorder_assets(correlation: &[f64], d: usize) -> Vec<usize> {
    let identity: Vec<usize> = (0..d).collect();
    if d <= 2 {
        return identity;
    }
    let rho = |i: usize, j: usize| correlation[i * d + j].abs();

    let mut seed = (0, 1);
    for i in 0..d {
        for j in i + 1..d {
            if rho(i, j) > rho(seed.0, seed.1) {
                seed = (i, j);
            }
        }
    }
    let mut chain = vec![seed.0, seed.1];
    let mut used = vec![false; d];
    used[seed.0] = true;
    used[seed.1] = true;
    while chain.len() < d {
        let best_from = |end: usize| {
            (0..d)
                .filter(|&k| !used[k])
                .fold(None, |best: Option<(usize, f64)>, k| match best {
                    Some((_, v)) if v >= rho(end, k) => best,
                    _ => Some((k, rho(end, k))),
                })
                .expect("an unused asset remains")
        };
        let (right, rv) = best_from(*chain.last().unwrap());
        let (left, lv) = best_from(chain[0]);
        if rv >= lv {
            chain.push(right);
            used[right] = true;
        } else {
            chain.insert(0, left);
            used[left] = true;
        }
    }

    let score = |order: &[usize]| order.windows(2).map(|w| rho(w[0], w[1])).sum::<f64>();
    if score(&chain) > score(&identity) {
        chain
    } else {
        identity
    }
}
