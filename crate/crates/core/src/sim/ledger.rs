//! Per-node energy accounts kept in integer attojoules so that conservation
//! holds exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Attojoules per joule.
pub const AJ_PER_J: f64 = 1e18;

/// Rounds a joule amount to whole attojoules.
pub fn to_attojoules(joules: f64) -> i128 {
    (joules * AJ_PER_J).round() as i128
}

pub fn to_joules(aj: i128) -> f64 {
    aj as f64 / AJ_PER_J
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Sensor,
    Hub,
    Cloud,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Sensor => "sensor",
            NodeRole::Hub => "hub",
            NodeRole::Cloud => "cloud",
        }
    }
}

/// Number and sum of the charges made under one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChargeTotal {
    pub count: u64,
    pub attojoules: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refusal {
    /// Zero-based index of the request that was refused.
    pub request: u64,
    pub label: String,
    pub requested_attojoules: i128,
    pub remaining_attojoules: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub role: NodeRole,
    pub initial_attojoules: i128,
    pub remaining_attojoules: i128,
    /// Charges aggregated by event label.
    pub charges: BTreeMap<String, ChargeTotal>,
    pub refusal: Option<Refusal>,
    /// Budget-less ledgers (the cloud) never refuse.
    pub unbounded: bool,
}

impl EnergyLedger {
    pub fn new(role: NodeRole, initial_joules: f64) -> Self {
        let initial = to_attojoules(initial_joules);
        Self {
            role,
            initial_attojoules: initial,
            remaining_attojoules: initial,
            charges: BTreeMap::new(),
            refusal: None,
            unbounded: false,
        }
    }

    pub fn unbounded(role: NodeRole, nominal_joules: f64) -> Self {
        Self { unbounded: true, ..Self::new(role, nominal_joules) }
    }

    /// Debits `aj` attojoules, or records a refusal and leaves the balance
    /// untouched when that would overdraw.
    pub fn charge(&mut self, request: u64, label: &str, aj: i128) -> bool {
        if !self.unbounded && aj > self.remaining_attojoules {
            self.refusal = Some(Refusal {
                request,
                label: label.to_string(),
                requested_attojoules: aj,
                remaining_attojoules: self.remaining_attojoules,
            });
            return false;
        }
        self.remaining_attojoules -= aj;
        let entry = self.charges.entry(label.to_string()).or_default();
        entry.count += 1;
        entry.attojoules += aj;
        true
    }

    pub fn spent_attojoules(&self) -> i128 {
        self.charges.values().map(|c| c.attojoules).sum()
    }

    /// `initial = remaining + Σ charges`.
    pub fn is_conserved(&self) -> bool {
        self.initial_attojoules == self.remaining_attojoules + self.spent_attojoules()
    }

    pub fn initial_joules(&self) -> f64 {
        to_joules(self.initial_attojoules)
    }

    pub fn remaining_joules(&self) -> f64 {
        to_joules(self.remaining_attojoules)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_overdraw() {
        let mut l = EnergyLedger::new(NodeRole::Sensor, 1e-15);
        assert_eq!(l.initial_attojoules, 1000);
        assert!(l.charge(0, "a", 600));
        assert!(!l.charge(1, "a", 600));
        assert!(l.charge(1, "b", 400));
        assert_eq!(l.remaining_attojoules, 0);
        assert_eq!(l.refusal.as_ref().unwrap().request, 1);
        assert!(l.is_conserved());
        assert_eq!(l.charges["a"], ChargeTotal { count: 1, attojoules: 600 });
    }

    #[test]
    fn zero_budget_refuses_everything() {
        let mut l = EnergyLedger::new(NodeRole::Hub, 0.0);
        assert!(!l.charge(0, "x", 1));
        assert!(l.charge(0, "free", 0));
    }

    #[test]
    fn unbounded_never_refuses() {
        let mut l = EnergyLedger::unbounded(NodeRole::Cloud, 1.0);
        assert!(l.charge(0, "x", to_attojoules(5.0)));
        assert!(l.remaining_attojoules < 0);
        assert!(l.is_conserved());
    }

    #[test]
    fn integer_ledger_does_not_drift() {
        // 10^6 identical charges: the float running sum drifts, the integer
        // ledger is exact.
        let charge = 0.1 + 1e-9;
        let mut float_sum = 0.0f64;
        let mut l = EnergyLedger::unbounded(NodeRole::Cloud, 0.0);
        let aj = to_attojoules(charge);
        for i in 0..1_000_000u64 {
            float_sum += charge;
            l.charge(i, "c", aj);
        }
        let exact = 1_000_000.0 * charge;
        assert_ne!(float_sum, exact);
        assert!(((float_sum - exact) / exact).abs() < 1e-9);
        assert_eq!(l.spent_attojoules(), 1_000_000 * aj);
    }
}
