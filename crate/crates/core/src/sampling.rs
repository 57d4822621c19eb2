// Deterministic low-discrepancy sampling: a Halton sequence with a seeded
// Cranley-Patterson shift, plus regular grids for sup estimates.

use alloc::vec::Vec;

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    acc
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    /// Seed 0 gives the plain Halton sequence.
    pub(crate) fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sampling supports at most 24 dimensions"
        );
        let mut state = seed;
        let shift = (0..dim)
            .map(|_| {
                if seed == 0 {
                    0.0
                } else {
                    (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64
                }
            })
            .collect();
        Self { shift, next: 1 }
    }

    /// Next point of the open unit cube.
    pub(crate) fn next_point(&mut self) -> Vec<f64> {
        let index = self.next;
        self.next += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(shift, base)| {
                let t = radical_inverse(index, base) + shift;
                let t = if t >= 1.0 { t - 1.0 } else { t };
                // keep strictly inside (0, 1)
                t.clamp(f64::EPSILON, 1.0 - f64::EPSILON)
            })
            .collect()
    }
}

/// `n` equispaced nodes on `[lo, hi]`, endpoints included.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || lo == hi {
        return alloc::vec![lo];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Visit every node of the tensor grid spanned by `axes`.
pub(crate) fn for_each_grid_node(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64])) {
    if axes.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut idx = alloc::vec![0usize; axes.len()];
    let mut node: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&node);
        let mut d = 0;
        loop {
            if d == axes.len() {
                return;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                node[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            node[d] = axes[d][0];
            d += 1;
        }
    }
}
