//! The per-hop rewrite channel and its analytic oracle.
//!
//! Each assertion takes one Markov step per hop over three states:
//!
//! ```text
//!              a            b          1-a-b
//! Exact   -> Exact,     -> Mutated, -> Dropped
//! Mutated ->            -> Mutated (a+b), -> Dropped (1-a-b)
//! Dropped -> Dropped (absorbing)
//! ```
//!
//! `a` is the probability the hop preserves an exact assertion, `b` the
//! probability the key survives but the value is perturbed. Closed forms:
//! exactness after k hops is `a^k`, survival (grounding) is `(a+b)^k`.

use rand::Rng;

use super::{Assertion, AssertionState, SimError};

/// Validated channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewriteChannel {
    preserve: f64,
    perturb: f64,
}

impl RewriteChannel {
    pub fn new(preserve: f64, perturb: f64) -> Result<Self, SimError> {
        let ok = preserve.is_finite()
            && perturb.is_finite()
            && preserve >= 0.0
            && perturb >= 0.0
            && preserve + perturb <= 1.0;
        if !ok {
            return Err(SimError::InvalidChannel {
                a: preserve,
                b: perturb,
            });
        }
        Ok(Self { preserve, perturb })
    }

    /// Probability an exact assertion stays exact for one hop (`a`).
    pub fn preserve_probability(&self) -> f64 {
        self.preserve
    }

    /// Probability the key survives with a perturbed value (`b`).
    pub fn perturb_probability(&self) -> f64 {
        self.perturb
    }
}

impl Default for RewriteChannel {
    /// Calibrated so the aggregate score falls below 0.3 by hop 5.
    fn default() -> Self {
        Self {
            preserve: 0.6,
            perturb: 0.2,
        }
    }
}

/// Apply one channel step to every assertion, in order.
///
/// Exactly one uniform draw is consumed per assertion — including dropped
/// ones — so the stream position after a call depends only on the assertion
/// count, which keeps trials reproducible under any state mix.
pub fn apply_channel(
    channel: &RewriteChannel,
    assertions: &mut [Assertion],
    rng: &mut impl Rng,
) {
    let a = channel.preserve;
    let b = channel.perturb;
    for assertion in assertions {
        let draw: f64 = rng.gen();
        assertion.state = match assertion.state {
            AssertionState::Exact => {
                if draw < a {
                    AssertionState::Exact
                } else if draw < a + b {
                    assertion.value = format!("~{}", assertion.value);
                    AssertionState::Mutated
                } else {
                    AssertionState::Dropped
                }
            }
            AssertionState::Mutated => {
                if draw < a + b {
                    AssertionState::Mutated
                } else {
                    AssertionState::Dropped
                }
            }
            AssertionState::Dropped => AssertionState::Dropped,
        };
    }
}

type Matrix3 = [[f64; 3]; 3];

fn multiply(x: &Matrix3, y: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    out
}

/// Expected `(grounding, exactness)` after `hops` channel steps, computed by
/// k-fold multiplication of the 3x3 transition matrix. Matches the closed
/// forms `(a+b)^k` and `a^k`.
pub fn expected_scores(channel: &RewriteChannel, hops: u32) -> (f64, f64) {
    let a = channel.preserve;
    let b = channel.perturb;
    let step: Matrix3 = [
        [a, b, 1.0 - a - b],
        [0.0, a + b, 1.0 - a - b],
        [0.0, 0.0, 1.0],
    ];
    let mut power: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..hops {
        power = multiply(&power, &step);
    }
    // Row for the Exact start state.
    let exact = power[0][0];
    let grounding = power[0][0] + power[0][1];
    (grounding, exact)
}
