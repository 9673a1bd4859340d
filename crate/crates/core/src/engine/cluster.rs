use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{EventLog, HawkesModel, Method, PathResult};
use crate::error::{Error, Result};

const MAX_GENERATIONS: usize = 1_000_000;
const MAX_EVENTS: usize = 50_000_000;

/// Simulates one path through the immigration–birth representation.
///
/// Immigrants arrive as a Poisson(μ) process on `(0, horizon]`; every event
/// has Poisson(‖φ‖₁) children at delays drawn from `φ / ‖φ‖₁`. Children past
/// the horizon are discarded along with their descendants. Independent of
/// the thinning code path and used to cross-check it.
pub fn simulate_cluster<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    rng: &mut R,
) -> Result<PathResult> {
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon {horizon} must be positive")));
    }
    let mean_immigrants = model.mu * horizon;
    let immigrants = if mean_immigrants > 0.0 {
        Poisson::new(mean_immigrants)
            .map_err(|e| Error::numerical(e.to_string(), mean_immigrants))?
            .sample(rng) as usize
    } else {
        0
    };
    let mut generation: Vec<f64> = (0..immigrants)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    let mut times = generation.clone();

    let l1 = model.l1();
    let offspring = if l1 > 0.0 {
        Some(Poisson::new(l1).map_err(|e| Error::numerical(e.to_string(), l1))?)
    } else {
        None
    };
    let mut depth = 0;
    while let Some(offspring) = offspring.as_ref() {
        if generation.is_empty() {
            break;
        }
        depth += 1;
        if depth > MAX_GENERATIONS || times.len() > MAX_EVENTS {
            return Err(Error::numerical(
                format!("offspring recursion exceeded {depth} generations / {} events", times.len()),
                l1,
            ));
        }
        let mut next = Vec::new();
        for &parent in &generation {
            let kids = offspring.sample(rng) as usize;
            for _ in 0..kids {
                let child = parent + model.kernel.sample_delay(rng);
                if child <= horizon {
                    next.push(child);
                }
            }
        }
        times.extend_from_slice(&next);
        generation = next;
    }
    times.sort_by(f64::total_cmp);

    let mut log = EventLog::new(horizon);
    for t in times {
        let mark = model.marks.sample(rng);
        log.push(t, mark);
    }
    Ok(PathResult::from_log(log, model, Method::Cluster))
}
