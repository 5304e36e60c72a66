//! Recomputes the pinned tuning constants in `rfreg::config`.

use rfreg::quadrature::normal_cdf;
use rfreg::rho::{tune_for_breakdown, tune_for_efficiency, Family, LossFunction};

fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn main() -> rfreg::Result<()> {
    let qn_d = 1.0 / (std::f64::consts::SQRT_2 * normal_quantile(0.625));
    let c0 = tune_for_breakdown(0.5)?;
    let c1 = tune_for_efficiency(Family::TukeyBisquare, 0.95)?;
    let huber_k = tune_for_efficiency(Family::Huber, 0.95)?;
    let c_tau = tune_for_efficiency(Family::TukeyBisquare, 0.80)?;
    let b_tau = LossFunction::tukey(c_tau).gaussian_mean_rho();

    let rows = [
        ("QN_D", qn_d, rfreg::config::QN_D),
        ("C0", c0, rfreg::config::C0),
        ("C1", c1, rfreg::config::C1),
        ("HUBER_K", huber_k, rfreg::config::HUBER_K),
        ("C_TAU", c_tau, rfreg::config::C_TAU),
        ("B_TAU", b_tau, rfreg::config::B_TAU),
    ];
    println!("{:<8} {:>14} {:>14}", "name", "derived", "pinned");
    for (name, derived, pinned) in rows {
        println!("{name:<8} {derived:>14.8} {pinned:>14.8}");
    }
    Ok(())
}
