//! Per-edge routing fees.
//!
//! A node forwarding a payment over its outgoing channel edge charges a fee
//! that depends on the payment amount and, optionally, on how the payment
//! shifts the channel's balance. Fees are pure functions of the pre-payment
//! capacities, the amount and the policy parameters, so a fee quoted during
//! path search is exactly the fee collected when the route is applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amount::{Amount, FeeRate};

/// Fee demanded by a forwarder for relaying one payment over one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeePolicy {
    /// A constant fee per forwarded payment.
    Flat { fee: Amount },
    /// `ceil(rate * amount)`, independent of channel state.
    Proportional { rate: FeeRate },
    /// Proportional fee scaled by the imbalance factor
    /// `lambda = (cap_forward + cap_reverse) / (2 * cap_forward)`.
    ///
    /// Payments that push a channel toward balance see `lambda < 1` and get a
    /// discount; payments that deplete an already-weak direction pay a
    /// premium; a balanced channel charges the plain proportional fee.
    ProportionalImbalance { rate: FeeRate },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeeError {
    #[error("imbalance fee undefined for zero forward capacity")]
    ZeroForwardCapacity,
}

impl FeePolicy {
    pub fn flat(fee: Amount) -> Self {
        FeePolicy::Flat { fee }
    }

    pub fn proportional(rate: FeeRate) -> Self {
        FeePolicy::Proportional { rate }
    }

    pub fn proportional_imbalance(rate: FeeRate) -> Self {
        FeePolicy::ProportionalImbalance { rate }
    }

    /// The fee for routing `amount` over a directed edge whose current
    /// capacity is `cap_forward`, with `cap_reverse` in the opposite
    /// direction. Exact rational arithmetic, ceiling to ticks.
    pub fn edge_fee(
        &self,
        cap_forward: Amount,
        cap_reverse: Amount,
        amount: Amount,
    ) -> Result<Amount, FeeError> {
        match *self {
            FeePolicy::Flat { fee } => Ok(fee),
            FeePolicy::Proportional { rate } => Ok(rate.apply_ceil(amount)),
            FeePolicy::ProportionalImbalance { rate } => {
                if cap_forward.is_zero() {
                    return Err(FeeError::ZeroForwardCapacity);
                }
                let total = cap_forward + cap_reverse;
                let double_forward = cap_forward
                    .checked_add(cap_forward)
                    .expect("capacity overflow");
                Ok(rate.apply_scaled_ceil(amount, total.ticks(), double_forward.ticks()))
            }
        }
    }
}
