//! Dense f64 vector helpers shared by selection and the centroid model.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add_assign(acc: &mut [f64], x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += v;
    }
}

/// `acc += alpha * x`
pub fn axpy(acc: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}

pub fn scale(a: &mut [f64], alpha: f64) {
    for v in a {
        *v *= alpha;
    }
}

/// Average of per-group averages. Returns `None` when there are no groups or
/// some group is empty.
pub fn two_stage_mean<'a, G, I>(dim: usize, groups: G) -> Option<Vec<f64>>
where
    G: IntoIterator<Item = I>,
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut total = vec![0.0; dim];
    let mut n_groups = 0usize;
    for group in groups {
        let mut inner = vec![0.0; dim];
        let mut n = 0usize;
        for row in group {
            add_assign(&mut inner, row);
            n += 1;
        }
        if n == 0 {
            return None;
        }
        axpy(&mut total, 1.0 / n as f64, &inner);
        n_groups += 1;
    }
    if n_groups == 0 {
        return None;
    }
    scale(&mut total, 1.0 / n_groups as f64);
    Some(total)
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}
