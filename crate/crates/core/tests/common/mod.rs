#![allow(dead_code)]

pub mod reference;

/// Independent Laplace(0, b) sampler: difference of two unit exponentials.
pub fn laplace<R: rand::Rng>(r: &mut R, b: f64) -> f64 {
    let e1 = -(1.0 - r.random::<f64>()).ln();
    let e2 = -(1.0 - r.random::<f64>()).ln();
    b * (e1 - e2)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
