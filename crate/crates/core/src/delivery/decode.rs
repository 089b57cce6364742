use std::ops::Range;

use serde::Serialize;

use crate::delivery::{delivery_plan, DeliverySchedule};
use crate::error::{Error, Result};
use crate::model::RequestVector;
use crate::placement::{Library, PlacementState};

/// What one user did with the broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserDecode {
    /// Zero-based, gain order.
    pub user: usize,
    /// Zero-based requested file.
    pub file: usize,
    pub from_cache: usize,
    pub recovered_bits: usize,
    /// Symbols of messages addressed to this user.
    pub consumed: Vec<String>,
    /// Messages decoded on the way to its own layer but not addressed to it.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeReport {
    pub users: Vec<UserDecode>,
    pub messages_sent: usize,
    pub bits_sent: usize,
}

fn ranges(bits: impl Iterator<Item = usize>) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::new();
    for b in bits {
        match out.last_mut() {
            Some(r) if r.end == b => r.end = b + 1,
            _ => out.push(b..b + 1),
        }
    }
    out
}

/// Replays `schedule` over `placement`: a message for group `j` reaches
/// every user `i ≥ j`; each user XORs out the constituents it caches and
/// must end up with its requested file bit for bit.
pub fn simulate_decode(
    schedule: &DeliverySchedule,
    placement: &PlacementState,
    library: &Library,
    requests: &RequestVector,
) -> Result<DecodeReport> {
    let plan = delivery_plan(schedule, placement, library, requests)?;
    let params = placement.params();
    let bits = placement.file_bits();

    let mut report = DecodeReport {
        users: Vec::with_capacity(params.users),
        messages_sent: plan.iter().map(|g| g.messages.len()).sum(),
        bits_sent: plan.iter().flat_map(|g| &g.messages).map(|m| m.len()).sum(),
    };

    for user in 0..params.users {
        let file = requests.file_of(user);
        let truth = library.file(file);
        // Reconstructed file: Some(bit) where known.
        let mut known: Vec<Option<bool>> = placement
            .cache_mask(user, file)
            .iter()
            .zip(truth)
            .map(|(&held, &v)| held.then_some(v))
            .collect();
        let from_cache = known.iter().filter(|b| b.is_some()).count();
        let mut consumed = Vec::new();
        let mut discarded = 0;

        for group in plan.iter().filter(|g| g.group >= 1 && g.group - 1 <= user) {
            for msg in &group.messages {
                if !msg.target.contains(user) {
                    discarded += 1;
                    continue;
                }
                let mut acc = msg.payload.clone();
                let mut usable = true;
                for c in msg.constituents.iter().filter(|c| c.user != user) {
                    // Side information must come from this user's own cache.
                    let cache = placement.cache_mask(user, c.file);
                    if c.bits.iter().any(|&b| !cache[b]) {
                        usable = false;
                        break;
                    }
                    let data = library.file(c.file);
                    for (slot, &b) in acc.iter_mut().zip(&c.bits) {
                        *slot ^= data[b];
                    }
                }
                if !usable {
                    continue;
                }
                if let Some(own) = msg.constituents.iter().find(|c| c.user == user) {
                    for (&b, &v) in own.bits.iter().zip(&acc) {
                        known[b] = Some(v);
                    }
                }
                consumed.push(msg.symbol());
            }
        }

        let bad = ranges((0..bits).filter(|&b| known[b] != Some(truth[b])));
        if !bad.is_empty() {
            return Err(Error::DecodeFailure {
                user: user + 1,
                missing: bad,
            });
        }
        report.users.push(UserDecode {
            user,
            file,
            from_cache,
            recovered_bits: bits - from_cache,
            consumed,
            discarded,
        });
    }
    Ok(report)
}
