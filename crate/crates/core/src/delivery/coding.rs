use std::fmt;

use crate::delivery::{build_groups, DeliverySchedule};
use crate::error::{Error, Result};
use crate::model::{file_label, RequestVector, UserSet};
use crate::placement::{Library, PlacementState};

/// One term of a coded message: the bits of `file` wanted by `user` and held
/// by exactly `holders`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constituent {
    pub user: usize,
    pub file: usize,
    pub holders: UserSet,
    pub bits: Vec<usize>,
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", file_label(self.file), self.holders)
    }
}

/// XOR of the constituents, zero-padded at the tail to the longest one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedMessage {
    pub target: UserSet,
    pub payload: Vec<bool>,
    /// Nonempty constituents only.
    pub constituents: Vec<Constituent>,
}

impl CodedMessage {
    pub fn len(&self) -> usize {
        self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    /// Symbolic form such as `A{2,3}^B{1,3}^C{1,2}`.
    pub fn symbol(&self) -> String {
        self.constituents
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("^")
    }
}

/// The coded message for multicast set `target`: for every member `k`, the
/// bits of its requested file held by exactly `target \ {k}`.
pub fn coded_message(
    placement: &PlacementState,
    library: &Library,
    requests: &RequestVector,
    target: UserSet,
) -> Result<CodedMessage> {
    let params = placement.params();
    if requests.as_slice().len() != params.users {
        return Err(Error::LengthMismatch {
            expected: params.users,
            found: requests.as_slice().len(),
        });
    }
    if library.len() < params.files {
        return Err(Error::LengthMismatch {
            expected: params.files,
            found: library.len(),
        });
    }
    let constituents: Vec<Constituent> = target
        .iter()
        .map(|user| {
            let file = requests.file_of(user);
            let holders = target.without(user);
            Constituent {
                user,
                file,
                holders,
                bits: placement.class_bits(file, holders),
            }
        })
        .filter(|c| !c.bits.is_empty())
        .collect();

    let len = constituents.iter().map(|c| c.bits.len()).max().unwrap_or(0);
    let mut payload = vec![false; len];
    for c in &constituents {
        let data = library.file(c.file);
        for (slot, &bit) in payload.iter_mut().zip(&c.bits) {
            *slot ^= data[bit];
        }
    }
    Ok(CodedMessage {
        target,
        payload,
        constituents,
    })
}

/// Messages of one schedule entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedGroup {
    /// One-based group index (weakest member of every set).
    pub group: usize,
    pub messages: Vec<CodedMessage>,
}

/// Bit-level messages for every entry of `schedule`, skipping sets whose
/// message would be empty. Entries without explicit sets use the full group
/// for the placement's mode.
pub fn delivery_plan(
    schedule: &DeliverySchedule,
    placement: &PlacementState,
    library: &Library,
    requests: &RequestVector,
) -> Result<Vec<PlannedGroup>> {
    let groups = build_groups(placement.params(), placement.mode())?;
    schedule
        .entries
        .iter()
        .map(|entry| {
            let sets: Vec<UserSet> = if entry.sets.is_empty() {
                groups
                    .get(entry.group.wrapping_sub(1))
                    .map(|g| g.iter().map(|s| s.members).collect())
                    .unwrap_or_default()
            } else {
                entry.sets.clone()
            };
            let mut messages = Vec::with_capacity(sets.len());
            for set in sets {
                let msg = coded_message(placement, library, requests, set)?;
                if !msg.is_empty() {
                    messages.push(msg);
                }
            }
            Ok(PlannedGroup {
                group: entry.group,
                messages,
            })
        })
        .collect()
}
