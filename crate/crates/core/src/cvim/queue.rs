use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::VehicleId;

use super::{CvimDataPackage, PackageId};

/// Marks packages that jump ahead of ordinary traffic.
#[derive(Clone)]
pub struct PriorityPredicate(Arc<dyn Fn(&CvimDataPackage) -> bool + Send + Sync>);

impl PriorityPredicate {
    pub fn new(f: impl Fn(&CvimDataPackage) -> bool + Send + Sync + 'static) -> Self {
        PriorityPredicate(Arc::new(f))
    }

    /// High priority when the package carries any of the listed channels.
    pub fn channel_allowlist(channels: BTreeSet<u16>) -> Self {
        Self::new(move |p| p.records.iter().any(|r| channels.contains(&r.channel_id)))
    }

    fn is_high(&self, package: &CvimDataPackage) -> bool {
        (self.0)(package)
    }
}

impl fmt::Debug for PriorityPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PriorityPredicate(..)")
    }
}

/// Outcome of one transmission opportunity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transmission {
    pub sent: Vec<PackageId>,
    pub sent_bits: u64,
    /// Capacity left unused this tick; it does not carry over.
    pub remaining_bits: u64,
}

/// Per-vehicle backlog of packages awaiting uplink capacity.
#[derive(Debug)]
pub struct TransmitQueue {
    pub vehicle_id: VehicleId,
    high: VecDeque<CvimDataPackage>,
    normal: VecDeque<CvimDataPackage>,
    priority: Option<PriorityPredicate>,
    queued_bytes: u64,
    enqueued: u64,
    sent: u64,
}

impl TransmitQueue {
    pub fn new(vehicle_id: VehicleId, priority: Option<PriorityPredicate>) -> Self {
        TransmitQueue {
            vehicle_id,
            high: VecDeque::new(),
            normal: VecDeque::new(),
            priority,
            queued_bytes: 0,
            enqueued: 0,
            sent: 0,
        }
    }

    pub fn push(&mut self, package: CvimDataPackage) {
        self.queued_bytes += package.payload_bytes;
        self.enqueued += 1;
        if self.priority.as_ref().is_some_and(|p| p.is_high(&package)) {
            self.high.push_back(package);
        } else {
            self.normal.push_back(package);
        }
    }

    pub fn len(&self) -> usize {
        self.high.len() + self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bytes
    }

    /// Packages ever enqueued.
    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    /// Packages ever transmitted.
    pub fn sent(&self) -> u64 {
        self.sent
    }

    /// Pending packages in transmission order.
    pub fn pending(&self) -> impl Iterator<Item = &CvimDataPackage> {
        self.high.iter().chain(self.normal.iter())
    }

    fn front_mut(&mut self) -> Option<&mut VecDeque<CvimDataPackage>> {
        if !self.high.is_empty() {
            Some(&mut self.high)
        } else if !self.normal.is_empty() {
            Some(&mut self.normal)
        } else {
            None
        }
    }

    /// Send whole packages, priority class first and FIFO within a class,
    /// until the next one no longer fits in the remaining capacity.
    pub fn try_transmit(&mut self, capacity_bits: u64) -> Transmission {
        let mut out = Transmission {
            remaining_bits: capacity_bits,
            ..Transmission::default()
        };
        while let Some(class) = self.front_mut() {
            let bits = 8 * class.front().expect("non-empty class").payload_bytes;
            if bits > out.remaining_bits {
                break;
            }
            let package = class.pop_front().expect("non-empty class");
            self.queued_bytes -= package.payload_bytes;
            self.sent += 1;
            out.remaining_bits -= bits;
            out.sent_bits += bits;
            out.sent.push(package.package_id);
        }
        out
    }
}
