use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{EventLog, Excitation, HawkesModel, Method, PathResult};
use crate::error::{Error, Result};

/// Relative slack before an intensity above the envelope counts as a breach.
pub(crate) const ENVELOPE_SLACK: f64 = 1e-12;

/// Simulates one path on `(0, horizon]` by Ogata thinning.
///
/// Candidates are the points of the driving Poisson measure below the
/// envelope `μ + Σ_i sup_{v ≥ s−t_i} φ(v)`, refreshed after every candidate.
/// A candidate `(s, θ)` is a jump iff `θ ≤ λ_s`; its mark is drawn from `ν`.
pub fn simulate_thinning<R: Rng + ?Sized>(
    model: &HawkesModel,
    horizon: f64,
    rng: &mut R,
) -> Result<PathResult> {
    if !(horizon > 0.0) {
        return Err(Error::Config(format!("horizon {horizon} must be positive")));
    }
    let mu = model.mu;
    let mut excitation = Excitation::new(&model.kernel);
    let mut log = EventLog::new(horizon);
    let mut s = 0.0;
    loop {
        let bound = mu + excitation.envelope(s);
        if bound <= 0.0 {
            break;
        }
        let gap: f64 = Exp1.sample(rng);
        s += gap / bound;
        if s > horizon {
            break;
        }
        let intensity = mu + excitation.intensity(s);
        if intensity > bound * (1.0 + ENVELOPE_SLACK) {
            return Err(Error::EnvelopeBreach {
                time: s,
                intensity,
                envelope: bound,
            });
        }
        let theta = rng.random::<f64>() * bound;
        if theta <= intensity {
            let mark = model.marks.sample(rng);
            log.push(s, mark);
            excitation.push(s);
        }
    }
    Ok(PathResult::from_log(log, model, Method::Thinning))
}
