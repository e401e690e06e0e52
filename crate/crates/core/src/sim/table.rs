use alloc::string::String;
use alloc::vec::Vec;

use crate::compiler::{FlowRule, PacketHeader};

use super::FlowId;

#[derive(Clone, Debug, PartialEq, Eq)]
struct Entry {
    seq: u64,
    owner: FlowId,
    rule: FlowRule,
}

/// A switch's flow table, kept sorted by (priority desc, install order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchState {
    pub id: String,
    pub capacity: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableFull;

impl SwitchState {
    pub fn new(id: impl Into<String>, capacity: usize) -> Self {
        SwitchState { id: id.into(), capacity, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn free(&self) -> usize {
        self.capacity - self.entries.len()
    }

    pub(crate) fn install(&mut self, rule: FlowRule, owner: FlowId, seq: u64) -> Result<(), TableFull> {
        if self.entries.len() >= self.capacity {
            return Err(TableFull);
        }
        let at = self.entries.partition_point(|e| e.rule.priority >= rule.priority);
        self.entries.insert(at, Entry { seq, owner, rule });
        Ok(())
    }

    /// Drops every rule owned by `flow`, returning them in table order.
    pub(crate) fn remove_flow(&mut self, flow: FlowId) -> Vec<FlowRule> {
        let mut removed = Vec::new();
        self.entries.retain(|e| {
            if e.owner == flow {
                removed.push(e.rule.clone());
                false
            } else {
                true
            }
        });
        removed
    }

    /// Highest-priority match, earliest installed among equals.
    pub fn lookup(&self, packet: &PacketHeader, in_port: u32) -> Option<&FlowRule> {
        self.entries.iter().find(|e| e.rule.match_fields.matches(packet, in_port)).map(|e| &e.rule)
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.entries.iter().map(|e| &e.rule)
    }

    #[cfg(test)]
    fn seqs(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.seq).collect()
    }
}
