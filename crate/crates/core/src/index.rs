//! Index conventions.
//!
//! Every tensor in the crate uses one linearization: the first mode varies
//! fastest, so the (0-based) multi-index `(i_0, .., i_{N-1})` lives at
//! `i_0 + i_1*I_0 + i_2*I_0*I_1 + ...`. Documentation elsewhere may quote
//! 1-based formulas; all code is 0-based and goes through this module.

/// Column-major strides for `shape` (first mode fastest).
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &e in shape {
        out.push(acc);
        acc *= e;
    }
    out
}

/// Number of elements of a tensor with this shape.
pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Linear position of a 0-based multi-index. Caller guarantees bounds.
pub fn linear_index(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    let mut pos = 0;
    let mut stride = 1;
    for (&i, &e) in idx.iter().zip(shape) {
        pos += i * stride;
        stride *= e;
    }
    pos
}

/// Inverse of [`linear_index`].
pub fn multi_index(shape: &[usize], mut pos: usize) -> Vec<usize> {
    let mut idx = Vec::with_capacity(shape.len());
    for &e in shape {
        idx.push(pos % e);
        pos /= e;
    }
    idx
}

/// Advances `idx` to the next multi-index in canonical order.
/// Returns `false` after wrapping past the last element.
pub fn increment(shape: &[usize], idx: &mut [usize]) -> bool {
    for (i, &e) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < e {
            return true;
        }
        *i = 0;
    }
    false
}

/// Converts a 1-based multi-index (as written in mathematical notation) to 0-based.
pub fn from_one_based(idx: &[usize]) -> Option<Vec<usize>> {
    idx.iter().map(|&i| i.checked_sub(1)).collect()
}

/// Column of the mode-`n` unfolding that holds multi-index `idx`
/// (lower modes vary fastest, mode `n` skipped).
pub fn unfolding_column(shape: &[usize], n: usize, idx: &[usize]) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for (k, (&i, &e)) in idx.iter().zip(shape).enumerate() {
        if k == n {
            continue;
        }
        col += i * stride;
        stride *= e;
    }
    col
}
