//! Small dense tensor kernels shared by the exact evaluators.
//!
//! All reductions run in a fixed order per output element, so results do not
//! depend on how rayon splits the work.

use rayon::prelude::*;

const PAR_THRESHOLD: usize = 1 << 14;

/// `out = scale * rows[0] (x) rows[1] (x) ...`, row-major.
pub fn outer_product(rows: &[&[f64]], scale: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), rows.iter().map(|r| r.len()).product::<usize>());
    out[0] = scale;
    let mut len = 1;
    for row in rows {
        let rl = row.len();
        for i in (0..len).rev() {
            let v = out[i];
            for j in (0..rl).rev() {
                out[i * rl + j] = v * row[j];
            }
        }
        len *= rl;
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A row-major matrix borrowed from a larger table.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
}

/// Multilinear contraction `Y[j_1..j_k] = sum_n X[n_1..n_k] prod_a M_a[j_a][n_a]`.
///
/// Each step contracts the leading mode and moves the new index to the back,
/// so after `k` steps the axes are back in their original order.
pub fn contract(tensor: &[f64], dims: &[usize], mats: &[MatRef<'_>]) -> Vec<f64> {
    debug_assert_eq!(dims.len(), mats.len());
    debug_assert_eq!(tensor.len(), dims.iter().product::<usize>());
    let mut cur = tensor.to_vec();
    let mut cur_dims: Vec<usize> = dims.to_vec();
    for m in mats {
        let d = cur_dims[0];
        debug_assert_eq!(m.cols, d);
        let rest = cur.len() / d.max(1);
        let g = m.rows;
        let mut xt = vec![0.0; rest * d];
        for i in 0..d {
            let src = &cur[i * rest..(i + 1) * rest];
            for (r, &v) in src.iter().enumerate() {
                xt[r * d + i] = v;
            }
        }
        let mut out = vec![0.0; rest * g];
        let fill = |(r, orow): (usize, &mut [f64])| {
            let x = &xt[r * d..(r + 1) * d];
            for (j, o) in orow.iter_mut().enumerate() {
                *o = dot(x, &m.data[j * d..(j + 1) * d]);
            }
        };
        if rest * g * d >= PAR_THRESHOLD {
            out.par_chunks_mut(g.max(1)).enumerate().for_each(fill);
        } else {
            out.chunks_mut(g.max(1)).enumerate().for_each(fill);
        }
        cur = out;
        cur_dims.remove(0);
        cur_dims.push(g);
    }
    cur
}
