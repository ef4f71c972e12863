//! Quality-of-data bounds: the `K(θ, σ, ν)` vector, container identity and
//! the per-dimension evaluation rules that decide when a container's pending
//! updates must be shipped.
//!
//! A dimension set to zero is inactive. A vector with every dimension
//! inactive means "replicate immediately", which is also what an unmodified
//! asynchronous replicator does for each edit it sees.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::update::Update;

/// A data container, written `table:columnFamily`.
///
/// Ordering and equality follow the canonical text form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContainerId {
    canonical: Arc<str>,
}

impl ContainerId {
    pub fn new(table: &str, column_family: &str) -> Result<Self> {
        format!("{table}:{column_family}").parse()
    }

    pub fn table(&self) -> &str {
        let sep = self.canonical.find(':').expect("validated on construction");
        &self.canonical[..sep]
    }

    pub fn column_family(&self) -> &str {
        let sep = self.canonical.find(':').expect("validated on construction");
        &self.canonical[sep + 1..]
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }
}

impl FromStr for ContainerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(table), Some(family), None) if !table.is_empty() && !family.is_empty() => {
                Ok(ContainerId { canonical: Arc::from(s) })
            }
            _ => Err(Error::InvalidContainerId(s.to_owned())),
        }
    }
}

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl fmt::Debug for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContainerId({})", self.canonical)
    }
}

/// The three-dimensional divergence bound attached to a container.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VectorK {
    theta_ms: u64,
    sigma: u64,
    nu: f64,
}

impl VectorK {
    /// Fails when `nu` is negative or not finite.
    pub fn new(theta_ms: u64, sigma: u64, nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::Scenario(format!("nu bound must be a non-negative number, got {nu}")));
        }
        Ok(VectorK { theta_ms, sigma, nu })
    }

    pub const fn immediate() -> Self {
        VectorK { theta_ms: 0, sigma: 0, nu: 0.0 }
    }

    pub const fn with_sigma(sigma: u64) -> Self {
        VectorK { theta_ms: 0, sigma, nu: 0.0 }
    }

    pub const fn with_theta(theta_ms: u64) -> Self {
        VectorK { theta_ms, sigma: 0, nu: 0.0 }
    }

    pub fn theta_ms(&self) -> u64 {
        self.theta_ms
    }

    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_immediate(&self) -> bool {
        self.theta_ms == 0 && self.sigma == 0 && self.nu == 0.0
    }
}

/// Live counters tracked against a container's [`VectorK`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContainerState {
    /// Arrivals since the last shipment of this container.
    pub actual_sigma: u64,
    pub last_flush_time: u64,
    /// Last numeric value shipped per key; the reference point for ν.
    pub last_replicated_value: HashMap<Arc<str>, f64>,
    pub pending_bytes: u64,
}

impl ContainerState {
    /// Resets the counters after `shipped` left in a batch created at `now`.
    pub fn record_shipment<'a>(&mut self, now: u64, shipped: impl IntoIterator<Item = &'a Update>) {
        self.actual_sigma = 0;
        self.last_flush_time = self.last_flush_time.max(now);
        for update in shipped {
            self.pending_bytes = self.pending_bytes.saturating_sub(update.size_bytes);
            if let Some(v) = update.numeric_value {
                self.last_replicated_value.insert(update.key.clone(), v);
            }
        }
    }
}

/// The dimension (or rule) that made a container due for shipment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trip {
    /// The container's vector is all-inactive.
    Immediate,
    Sigma,
    Theta,
    Nu,
}

/// Counts one arrival against σ. Returns `true` when the container must
/// replicate, resetting the counter in the same step it reaches the bound.
/// An inactive σ (zero) replicates without touching the counter.
pub fn evaluate_sigma(state: &mut ContainerState, bound: &VectorK) -> bool {
    if bound.sigma == 0 {
        return true;
    }
    state.actual_sigma += 1;
    if state.actual_sigma >= bound.sigma {
        state.actual_sigma = 0;
        true
    } else {
        false
    }
}

/// True when θ is active, something is pending and at least θ has elapsed
/// since the last shipment.
pub fn evaluate_theta(state: &ContainerState, bound: &VectorK, now: u64, pending: usize) -> bool {
    bound.theta_ms > 0 && pending > 0 && now.saturating_sub(state.last_flush_time) >= bound.theta_ms
}

/// True when ν is active and the update's numeric value has drifted at least
/// ν away from the last value shipped for the same key.
pub fn evaluate_nu(state: &ContainerState, bound: &VectorK, update: &Update) -> bool {
    if bound.nu <= 0.0 {
        return false;
    }
    let (Some(new), Some(old)) = (update.numeric_value, state.last_replicated_value.get(&update.key)) else {
        return false;
    };
    (new - old).abs() >= bound.nu
}

/// Evaluates every active dimension for one arrival (the arriving update
/// counts as pending for θ). σ is counted exactly once whatever the other
/// dimensions say.
pub fn check_arrival(state: &mut ContainerState, bound: &VectorK, update: &Update, now: u64) -> Option<Trip> {
    if bound.is_immediate() {
        return Some(Trip::Immediate);
    }
    let sigma = bound.sigma > 0 && evaluate_sigma(state, bound);
    let nu = evaluate_nu(state, bound, update);
    let theta = evaluate_theta(state, bound, now, 1);
    if sigma {
        Some(Trip::Sigma)
    } else if nu {
        Some(Trip::Nu)
    } else if theta {
        Some(Trip::Theta)
    } else {
        None
    }
}

/// Logical OR of the active dimensions for one arrival.
pub fn should_replicate(state: &mut ContainerState, bound: &VectorK, update: &Update, now: u64) -> bool {
    check_arrival(state, bound, update, now).is_some()
}

/// Converts a σ bound given as a percentage of the scenario's total updates
/// into an absolute count, never below one.
pub fn resolve_sigma_percentage(percent: f64, total_updates: u64) -> Result<u64> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidSigmaPercent(percent));
    }
    if total_updates == 0 {
        return Err(Error::EmptyWorkload);
    }
    let count = (percent / 100.0 * total_updates as f64).round() as u64;
    Ok(count.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::update::ClusterId;
    use proptest::prelude::*;

    fn cid() -> ContainerId {
        "t:cf".parse().unwrap()
    }

    fn numeric(key: &str, v: f64) -> Update {
        Update::new(cid(), key, v.to_string(), 0, ClusterId(1), 1, None)
    }

    #[test]
    fn container_id_parsing() {
        let c: ContainerId = "usertable:family".parse().unwrap();
        assert_eq!(c.table(), "usertable");
        assert_eq!(c.column_family(), "family");
        assert_eq!(c.to_string(), "usertable:family");
        for bad in ["", ":", "t:", ":cf", "t", "a:b:c"] {
            assert!(bad.parse::<ContainerId>().is_err(), "{bad}");
        }
        assert_eq!(ContainerId::new("a", "b").unwrap(), "a:b".parse().unwrap());
    }

    #[test]
    fn container_order_is_canonical_string_order() {
        let a: ContainerId = "a:z".parse().unwrap();
        let b: ContainerId = "a0:b".parse().unwrap();
        assert_eq!(a.cmp(&b), "a:z".cmp("a0:b"));
    }

    #[test]
    fn vector_rejects_negative_nu() {
        assert!(VectorK::new(0, 0, -1.0).is_err());
        assert!(VectorK::new(0, 0, f64::NAN).is_err());
        assert!(VectorK::new(0, 0, 0.0).unwrap().is_immediate());
    }

    #[test]
    fn sigma_third_arrival_fires_and_resets() {
        let mut s = ContainerState { actual_sigma: 2, ..Default::default() };
        assert!(evaluate_sigma(&mut s, &VectorK::with_sigma(3)));
        assert_eq!(s.actual_sigma, 0);
    }

    #[test]
    fn sigma_inactive_replicates_without_touching_state() {
        let mut s = ContainerState { actual_sigma: 17, ..Default::default() };
        assert!(evaluate_sigma(&mut s, &VectorK::immediate()));
        assert_eq!(s.actual_sigma, 17);
    }

    #[test]
    fn sigma_first_arrival_holds() {
        let mut s = ContainerState::default();
        assert!(!evaluate_sigma(&mut s, &VectorK::with_sigma(3)));
        assert_eq!(s.actual_sigma, 1);
    }

    #[test]
    fn theta_examples() {
        let s = ContainerState::default();
        let k = VectorK::with_theta(1000);
        assert!(evaluate_theta(&s, &k, 1200, 4));
        let s500 = ContainerState { last_flush_time: 700, ..Default::default() };
        assert!(!evaluate_theta(&s500, &k, 1200, 4));
        assert!(!evaluate_theta(&s, &VectorK::immediate(), 1_000_000, 4));
        assert!(!evaluate_theta(&s, &k, 5000, 0));
    }

    #[test]
    fn theta_boundary_is_inclusive() {
        let s = ContainerState { last_flush_time: 100, ..Default::default() };
        let k = VectorK::with_theta(1000);
        assert!(!evaluate_theta(&s, &k, 1099, 1));
        assert!(evaluate_theta(&s, &k, 1100, 1));
    }

    #[test]
    fn nu_examples() {
        let k = VectorK::new(0, 0, 10.0).unwrap();
        let mut s = ContainerState::default();
        assert!(!evaluate_nu(&s, &k, &numeric("x", 111.0)));
        s.last_replicated_value.insert(Arc::from("x"), 100.0);
        assert!(evaluate_nu(&s, &k, &numeric("x", 111.0)));
        assert!(!evaluate_nu(&s, &k, &numeric("x", 105.0)));
        assert!(evaluate_nu(&s, &k, &numeric("x", 90.0)));
        let opaque = Update::new(cid(), "x", vec![1u8, 2, 3], 0, ClusterId(1), 9, None);
        assert!(!evaluate_nu(&s, &k, &opaque));
    }

    #[test]
    fn should_replicate_examples() {
        let u = numeric("x", 1.0);
        // σ trips while θ is far from elapsed.
        let k = VectorK::new(1000, 3, 0.0).unwrap();
        let mut s = ContainerState { actual_sigma: 2, last_flush_time: 0, ..Default::default() };
        assert!(should_replicate(&mut s, &k, &u, 10));
        // All inactive.
        let mut s = ContainerState::default();
        assert!(should_replicate(&mut s, &VectorK::immediate(), &u, 0));
        // σ at 1 of 3, θ at 500 of 1000, no ν history.
        let k = VectorK::new(1000, 3, 5.0).unwrap();
        let mut s = ContainerState { actual_sigma: 0, last_flush_time: 0, ..Default::default() };
        assert!(!should_replicate(&mut s, &k, &u, 500));
        assert_eq!(s.actual_sigma, 1);
    }

    #[test]
    fn inactive_sigma_does_not_force_replication_when_theta_active() {
        let mut s = ContainerState::default();
        let k = VectorK::with_theta(1000);
        assert_eq!(check_arrival(&mut s, &k, &numeric("x", 1.0), 10), None);
        assert_eq!(check_arrival(&mut s, &k, &numeric("x", 1.0), 1000), Some(Trip::Theta));
    }

    #[test]
    fn sigma_counts_even_when_nu_trips() {
        let k = VectorK::new(0, 5, 1.0).unwrap();
        let mut s = ContainerState::default();
        s.last_replicated_value.insert(Arc::from("x"), 0.0);
        assert_eq!(check_arrival(&mut s, &k, &numeric("x", 50.0), 0), Some(Trip::Nu));
        assert_eq!(s.actual_sigma, 1);
    }

    #[test]
    fn record_shipment_resets_and_remembers_values() {
        let mut s = ContainerState { actual_sigma: 2, last_flush_time: 50, ..Default::default() };
        let u = numeric("x", 42.0);
        s.pending_bytes = u.size_bytes;
        s.record_shipment(40, [&u]);
        assert_eq!(s.actual_sigma, 0);
        assert_eq!(s.last_flush_time, 50);
        assert_eq!(s.pending_bytes, 0);
        assert_eq!(s.last_replicated_value.get("x"), Some(&42.0));
    }

    #[test]
    fn sigma_percentages() {
        assert_eq!(resolve_sigma_percentage(0.5, 5_000_000).unwrap(), 25_000);
        assert_eq!(resolve_sigma_percentage(2.0, 50_000).unwrap(), 1_000);
        assert_eq!(resolve_sigma_percentage(0.001, 100).unwrap(), 1);
        assert!(resolve_sigma_percentage(0.0, 100).is_err());
        assert!(resolve_sigma_percentage(100.5, 100).is_err());
        assert!(resolve_sigma_percentage(-1.0, 100).is_err());
        assert!(resolve_sigma_percentage(1.0, 0).is_err());
        assert_eq!(resolve_sigma_percentage(100.0, 7).unwrap(), 7);
    }

    proptest! {
        #[test]
        fn sigma_fires_on_multiples_of_bound(bound in 1u64..200, arrivals in 0u64..2_000) {
            let k = VectorK::with_sigma(bound);
            let mut s = ContainerState::default();
            for i in 1..=arrivals {
                let fired = evaluate_sigma(&mut s, &k);
                prop_assert_eq!(fired, i % bound == 0);
                prop_assert_eq!(s.actual_sigma, i % bound);
                prop_assert!(s.actual_sigma < bound);
            }
        }

        #[test]
        fn nu_is_monotone_in_divergence(nu in 0.01f64..1e6, d in 0.0f64..2e6, shrink in 0.0f64..1.0) {
            let k = VectorK::new(0, 0, nu).unwrap();
            let mut s = ContainerState::default();
            s.last_replicated_value.insert(Arc::from("x"), 0.0);
            if !evaluate_nu(&s, &k, &numeric("x", d)) {
                prop_assert!(!evaluate_nu(&s, &k, &numeric("x", d * shrink)));
            }
        }

        #[test]
        fn theta_flips_exactly_at_bound(theta in 1u64..100_000, flush in 0u64..1_000_000) {
            let k = VectorK::with_theta(theta);
            let s = ContainerState { last_flush_time: flush, ..Default::default() };
            prop_assert!(!evaluate_theta(&s, &k, flush + theta - 1, 1));
            prop_assert!(evaluate_theta(&s, &k, flush + theta, 1));
        }

        #[test]
        fn immediate_vector_always_replicates(ts in 0u64..1_000_000, n in 1usize..50) {
            let mut s = ContainerState::default();
            for _ in 0..n {
                prop_assert!(should_replicate(&mut s, &VectorK::immediate(), &numeric("x", 1.0), ts));
            }
        }
    }
}
