use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::types::TickSeries;

/// Observation times drawn from a Poisson process with mean waiting time
/// `lambda` seconds over a session of `session_seconds`, snapped to the
/// nearest of the `N + 1` grid points. Repeated snaps keep one tick.
pub fn poisson_times<R: Rng + ?Sized>(grid_n: usize, session_seconds: f64, lambda: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 1, got {lambda}")));
    }
    let exp = Exp::new(1.0 / lambda).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let per_second = grid_n as f64 / session_seconds;
    let mut idx = Vec::new();
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t > session_seconds {
            break;
        }
        let j = ((t * per_second).round() as usize).min(grid_n);
        if idx.last() != Some(&j) {
            idx.push(j);
        }
    }
    Ok(idx)
}

/// Samples one column of a grid path at Poisson times.
pub fn poisson_sample<R: Rng + ?Sized>(
    asset_id: &str,
    path: &[f64],
    session_seconds: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<TickSeries> {
    let n = path.len() - 1;
    let idx = poisson_times(n, session_seconds, lambda, rng)?;
    if idx.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{asset_id}: Poisson sampling produced {} tick(s)",
            idx.len()
        )));
    }
    let times = idx.iter().map(|&j| j as f64 / n as f64).collect();
    let prices = idx.iter().map(|&j| path[j]).collect();
    TickSeries::new(asset_id, times, prices)
}
