#![allow(dead_code)]

use progress_crl::numeric::Objective;

/// Central differences of `obj` at `params` with step `h`.
pub fn finite_difference<O: Objective + ?Sized>(obj: &O, params: &[f64], h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let x = p[k];
            p[k] = x + h;
            let up = obj.value(&p).unwrap();
            p[k] = x - h;
            let down = obj.value(&p).unwrap();
            p[k] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max |a - n| / max(|a|, |n|, floor)` over coordinates.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Relative error of an analytic gradient against central differences.
pub fn gradient_check<O: Objective + ?Sized>(obj: &O, params: &[f64]) -> f64 {
    let (_, g) = obj.value_and_grad(params).unwrap();
    let n = finite_difference(obj, params, 1e-5);
    max_rel_err(&g, &n, 1e-6)
}
