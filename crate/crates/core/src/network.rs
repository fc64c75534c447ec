//! The credit network: a directed multigraph of equal-sized loans.
//!
//! A link `lender -> borrower` is an asset of the lender and a liability of
//! the borrower, so every agent's balance sheet is just the pair of its
//! in-degree (`ell`) and out-degree (`b`). Parallel links between the same
//! ordered pair are allowed; self-loops are not.
//!
//! Links live in a slot table addressed by generational [`LinkId`]s. A dense
//! array of live slots gives O(1) uniform sampling over the link multiset,
//! and per-agent adjacency lists give O(degree) removal of an agent's links.

use thiserror::Error;

/// Liability and asset counts of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct BalanceSheet {
    /// Incoming loans.
    pub ell: usize,
    /// Outgoing loans.
    pub b: usize,
}

/// Stable handle to a link, valid until the link is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LinkId {
    slot: u32,
    generation: u32,
}

/// Elementary transitions of the network dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Borrow { borrower: usize, lender: usize },
    Mature(LinkId),
    Disclose(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("a credit network needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent {agent} out of range for a network of {n_agents} agents")]
    AgentOutOfRange { agent: usize, n_agents: usize },
    #[error("agent {0} cannot lend to itself")]
    SelfLoop(usize),
    #[error("unknown or already removed link {0:?}")]
    UnknownLink(LinkId),
}

/// What a default removed from the defaulting agent's balance sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DefaultReport {
    pub removed_assets: usize,
    pub removed_liabilities: usize,
}

#[derive(Debug, Clone, Copy)]
struct LinkEntry {
    lender: u32,
    borrower: u32,
    active_pos: u32,
    out_pos: u32,
    in_pos: u32,
}

#[derive(Debug, Clone)]
struct Slot {
    generation: u32,
    entry: Option<LinkEntry>,
}

#[derive(Debug, Clone)]
pub struct CreditNetwork {
    n_agents: usize,
    outgoing: Vec<Vec<u32>>,
    incoming: Vec<Vec<u32>>,
    slots: Vec<Slot>,
    free: Vec<u32>,
    active: Vec<u32>,
}

impl CreditNetwork {
    /// An empty network of `n_agents` agents.
    pub fn new(n_agents: usize) -> Result<Self, NetworkError> {
        if n_agents < 2 {
            return Err(NetworkError::TooFewAgents(n_agents));
        }
        assert!(n_agents <= u32::MAX as usize, "agent index must fit in u32");
        Ok(CreditNetwork {
            n_agents,
            outgoing: vec![Vec::new(); n_agents],
            incoming: vec![Vec::new(); n_agents],
            slots: Vec::new(),
            free: Vec::new(),
            active: Vec::new(),
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Total number of live links `E`.
    pub fn link_count(&self) -> usize {
        self.active.len()
    }

    pub fn sheet(&self, agent: usize) -> BalanceSheet {
        BalanceSheet {
            ell: self.incoming[agent].len(),
            b: self.outgoing[agent].len(),
        }
    }

    pub fn sheets(&self) -> impl ExactSizeIterator<Item = BalanceSheet> + '_ {
        (0..self.n_agents).map(|i| self.sheet(i))
    }

    /// Average connectivity `rho = E / N`, equal to both the mean in-degree
    /// and the mean out-degree.
    pub fn connectivity(&self) -> f64 {
        self.link_count() as f64 / self.n_agents as f64
    }

    fn check_agent(&self, agent: usize) -> Result<(), NetworkError> {
        if agent >= self.n_agents {
            return Err(NetworkError::AgentOutOfRange {
                agent,
                n_agents: self.n_agents,
            });
        }
        Ok(())
    }

    /// Records a loan from `lender` to `borrower`.
    pub fn add_loan(&mut self, lender: usize, borrower: usize) -> Result<LinkId, NetworkError> {
        self.check_agent(lender)?;
        self.check_agent(borrower)?;
        if lender == borrower {
            return Err(NetworkError::SelfLoop(lender));
        }
        let entry = LinkEntry {
            lender: lender as u32,
            borrower: borrower as u32,
            active_pos: self.active.len() as u32,
            out_pos: self.outgoing[lender].len() as u32,
            in_pos: self.incoming[borrower].len() as u32,
        };
        let slot = match self.free.pop() {
            Some(slot) => {
                self.slots[slot as usize].entry = Some(entry);
                slot
            }
            None => {
                let slot = u32::try_from(self.slots.len()).expect("link table overflow");
                self.slots.push(Slot {
                    generation: 0,
                    entry: Some(entry),
                });
                slot
            }
        };
        self.active.push(slot);
        self.outgoing[lender].push(slot);
        self.incoming[borrower].push(slot);
        Ok(LinkId {
            slot,
            generation: self.slots[slot as usize].generation,
        })
    }

    /// Endpoints `(lender, borrower)` of a live link.
    pub fn endpoints(&self, link: LinkId) -> Option<(usize, usize)> {
        let slot = self.slots.get(link.slot as usize)?;
        if slot.generation != link.generation {
            return None;
        }
        slot.entry
            .map(|e| (e.lender as usize, e.borrower as usize))
    }

    /// Number of live links from `lender` to `borrower`.
    pub fn multiplicity(&self, lender: usize, borrower: usize) -> usize {
        self.outgoing[lender]
            .iter()
            .filter(|&&s| self.entry(s).borrower as usize == borrower)
            .count()
    }

    /// The `index`-th live link in internal order, for uniform sampling.
    pub fn link_at(&self, index: usize) -> LinkId {
        let slot = self.active[index];
        LinkId {
            slot,
            generation: self.slots[slot as usize].generation,
        }
    }

    /// Handles of every live link.
    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.active.len()).map(|i| self.link_at(i))
    }

    /// Settles a loan: removes the link and updates both balance sheets.
    pub fn mature_loan(&mut self, link: LinkId) -> Result<(usize, usize), NetworkError> {
        let (lender, borrower) = self.endpoints(link).ok_or(NetworkError::UnknownLink(link))?;
        self.remove_slot(link.slot);
        Ok((lender, borrower))
    }

    /// Replaces agent `i` by a fresh agent without links.
    ///
    /// Each former borrower of `i` loses one liability and each former lender
    /// loses one asset per removed link. Counterparties are not re-examined.
    pub fn default_agent(&mut self, i: usize) -> Result<DefaultReport, NetworkError> {
        self.check_agent(i)?;
        let report = DefaultReport {
            removed_assets: self.outgoing[i].len(),
            removed_liabilities: self.incoming[i].len(),
        };
        while let Some(&slot) = self.outgoing[i].last() {
            self.remove_slot(slot);
        }
        while let Some(&slot) = self.incoming[i].last() {
            self.remove_slot(slot);
        }
        Ok(report)
    }

    fn entry(&self, slot: u32) -> &LinkEntry {
        self.slots[slot as usize]
            .entry
            .as_ref()
            .expect("adjacency lists only hold live slots")
    }

    fn entry_mut(&mut self, slot: u32) -> &mut LinkEntry {
        self.slots[slot as usize]
            .entry
            .as_mut()
            .expect("adjacency lists only hold live slots")
    }

    fn remove_slot(&mut self, slot: u32) {
        let record = &mut self.slots[slot as usize];
        let entry = record.entry.take().expect("removing a live slot");
        record.generation = record.generation.wrapping_add(1);
        self.free.push(slot);

        let pos = entry.active_pos as usize;
        self.active.swap_remove(pos);
        if let Some(&moved) = self.active.get(pos) {
            self.entry_mut(moved).active_pos = pos as u32;
        }

        let pos = entry.out_pos as usize;
        let list = &mut self.outgoing[entry.lender as usize];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.entry_mut(moved).out_pos = pos as u32;
        }

        let pos = entry.in_pos as usize;
        let list = &mut self.incoming[entry.borrower as usize];
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            self.entry_mut(moved).in_pos = pos as u32;
        }
    }

    /// Full consistency audit of the cached structure, O(N + E).
    ///
    /// Checks that sum of liabilities = sum of assets = link count, that no
    /// link is a self-loop, and that every back-pointer is coherent.
    pub fn check_invariants(&self) -> Result<(), String> {
        let total_ell: usize = self.incoming.iter().map(Vec::len).sum();
        let total_b: usize = self.outgoing.iter().map(Vec::len).sum();
        if total_ell != self.link_count() || total_b != self.link_count() {
            return Err(format!(
                "sum ell = {total_ell}, sum b = {total_b}, links = {}",
                self.link_count()
            ));
        }
        for (pos, &slot) in self.active.iter().enumerate() {
            let e = self.slots[slot as usize]
                .entry
                .as_ref()
                .ok_or_else(|| format!("dead slot {slot} in active list"))?;
            if e.lender == e.borrower {
                return Err(format!("self-loop at agent {}", e.lender));
            }
            if e.active_pos as usize != pos
                || self.outgoing[e.lender as usize].get(e.out_pos as usize) != Some(&slot)
                || self.incoming[e.borrower as usize].get(e.in_pos as usize) != Some(&slot)
            {
                return Err(format!("stale back-pointer for slot {slot}"));
            }
        }
        Ok(())
    }

    /// Histogram of in-degrees: entry `k` counts agents with `ell = k`.
    pub fn in_degree_histogram(&self) -> Vec<usize> {
        degree_histogram(self.incoming.iter().map(Vec::len))
    }

    /// Histogram of out-degrees: entry `k` counts agents with `b = k`.
    pub fn out_degree_histogram(&self) -> Vec<usize> {
        degree_histogram(self.outgoing.iter().map(Vec::len))
    }
}

fn degree_histogram(degrees: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut hist = Vec::new();
    for d in degrees {
        if d >= hist.len() {
            hist.resize(d + 1, 0);
        }
        hist[d] += 1;
    }
    hist
}
