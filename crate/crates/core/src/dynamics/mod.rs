//! Time integration: the damped-driven KdV SPDE in field coordinates, the
//! unperturbed KdV/Airy flows, ensembles, and a generic SDE step.

mod noise;
mod sde;
mod spde;

pub use noise::{NoiseProfile, NoiseSpec};
pub use sde::{sde_step, PairLinear};
pub use spde::{
    exp_moment, kdv_ensemble, kdv_flow, kdv_spde_path, kdv_spde_trajectory, sobolev_moment,
    KdvStepper, SpdeConfig,
};

/// `true` when the final value of `series` is at most twice its running median
/// (the median over all entries up to and including the last).
pub fn no_growth_trend(series: &[f64]) -> bool {
    let Some(&last) = series.last() else {
        return true;
    };
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    last <= 2.0 * median
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_trend_detection() {
        assert!(no_growth_trend(&[1.0, 1.1, 0.9, 1.2]));
        assert!(!no_growth_trend(&[1.0, 1.0, 1.0, 5.0]));
        assert!(no_growth_trend(&[]));
    }
}
