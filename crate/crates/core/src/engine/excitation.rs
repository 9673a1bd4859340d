use crate::kernel::Kernel;

/// Running excitation `Σ_{t_i} φ(t − t_i)` of one path.
///
/// Times passed to [`Excitation::intensity`] and [`Excitation::envelope`]
/// must be non-decreasing and not earlier than the last pushed event.
#[derive(Debug, Clone)]
pub(crate) enum Excitation<'k> {
    Zero,
    /// Markovian state: `level` is the excitation just after time `at`.
    Exponential { alpha: f64, beta: f64, level: f64, at: f64 },
    General {
        kernel: &'k Kernel,
        times: Vec<f64>,
        /// Events before this index are past the kernel support.
        first_live: usize,
    },
}

impl<'k> Excitation<'k> {
    pub(crate) fn new(kernel: &'k Kernel) -> Self {
        match kernel {
            Kernel::Zero => Excitation::Zero,
            Kernel::Exponential { alpha, beta } => Excitation::Exponential {
                alpha: *alpha,
                beta: *beta,
                level: 0.0,
                at: 0.0,
            },
            _ => Self::general(kernel),
        }
    }

    /// Sum-over-history evaluation, valid for any kernel.
    pub(crate) fn general(kernel: &'k Kernel) -> Self {
        Excitation::General {
            kernel,
            times: Vec::new(),
            first_live: 0,
        }
    }

    /// Left limit of the excitation at `t` (events strictly before `t`).
    pub(crate) fn intensity(&self, t: f64) -> f64 {
        match self {
            Excitation::Zero => 0.0,
            Excitation::Exponential { beta, level, at, .. } => level * (-beta * (t - at)).exp(),
            Excitation::General {
                kernel,
                times,
                first_live,
            } => times[*first_live..]
                .iter()
                .filter(|&&s| s < t)
                .map(|&s| kernel.value(t - s))
                .sum(),
        }
    }

    /// Bound on the excitation over `[t, next event)`, counting events at `t`.
    pub(crate) fn envelope(&mut self, t: f64) -> f64 {
        match self {
            Excitation::Zero => 0.0,
            Excitation::Exponential { beta, level, at, .. } => *level * (-*beta * (t - *at)).exp(),
            Excitation::General {
                kernel,
                times,
                first_live,
            } => {
                if let Some(support) = kernel.support() {
                    while *first_live < times.len() && t - times[*first_live] > support {
                        *first_live += 1;
                    }
                }
                times[*first_live..]
                    .iter()
                    .map(|&s| kernel.tail_majorant(t - s))
                    .sum()
            }
        }
    }

    pub(crate) fn push(&mut self, t: f64) {
        match self {
            Excitation::Zero => {}
            Excitation::Exponential {
                alpha,
                beta,
                level,
                at,
            } => {
                *level = *level * (-*beta * (t - *at)).exp() + *alpha;
                *at = t;
            }
            Excitation::General { times, .. } => times.push(t),
        }
    }
}
