use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::Micros;

/// Poisson arrival instants in `[0, duration)` for one stream.
pub fn generate_arrivals<R: Rng + ?Sized>(rate_pps: f64, duration_us: Micros, rng: &mut R) -> Vec<Micros> {
    if !(rate_pps > 0.0) {
        return Vec::new();
    }
    let Ok(exp) = Exp::new(rate_pps / 1e6) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut t = 0.0f64;
    loop {
        t += exp.sample(rng);
        let at = t.floor();
        if at >= duration_us as f64 {
            break;
        }
        out.push(at as Micros);
    }
    out
}
