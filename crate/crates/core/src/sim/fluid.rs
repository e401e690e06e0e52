//! Max-min fair rates by progressive filling.
//!
//! All unfrozen flows rise together. Each round the water level advances by
//! the smallest of: every resource's remaining capacity split over its
//! unfrozen flows, and every flow's distance to its own cap. Flows that hit
//! their cap, or sit on a resource that just filled, freeze.

use alloc::vec;
use alloc::vec::Vec;

/// One flow for the solver: the resources it crosses and its rate cap
/// (demand and meters already folded in).
#[derive(Clone, Debug, PartialEq)]
pub struct FluidFlow {
    pub resources: Vec<usize>,
    pub cap: f64,
}

const EPS: f64 = 1e-9;

#[derive(Clone, Copy)]
enum Bound {
    Resource(usize),
    Flow(usize),
}

/// Returns one rate per flow, in input order.
pub fn max_min(capacities: &[f64], flows: &[FluidFlow]) -> Vec<f64> {
    let mut rate = vec![0.0; flows.len()];
    let mut remaining = capacities.to_vec();
    let mut frozen: Vec<bool> = flows.iter().map(|f| f.cap <= 0.0).collect();

    while frozen.iter().any(|&x| !x) {
        let mut users = vec![0usize; capacities.len()];
        for (f, flow) in flows.iter().enumerate() {
            if !frozen[f] {
                for &r in &flow.resources {
                    users[r] += 1;
                }
            }
        }
        let mut step = f64::INFINITY;
        let mut bound = None;
        for (r, &n) in users.iter().enumerate() {
            if n > 0 && remaining[r] / (n as f64) < step {
                step = remaining[r] / n as f64;
                bound = Some(Bound::Resource(r));
            }
        }
        for (f, flow) in flows.iter().enumerate() {
            if !frozen[f] && flow.cap - rate[f] < step {
                step = flow.cap - rate[f];
                bound = Some(Bound::Flow(f));
            }
        }
        let Some(bound) = bound else {
            // Only unconstrained flows left; nothing bounds them.
            break;
        };
        let step = step.max(0.0);
        for (f, flow) in flows.iter().enumerate() {
            if !frozen[f] {
                rate[f] += step;
                for &r in &flow.resources {
                    remaining[r] -= step;
                }
            }
        }
        // The binding element is exact by construction; others within
        // rounding of their limit freeze with it.
        match bound {
            Bound::Resource(r) => remaining[r] = 0.0,
            Bound::Flow(f) => rate[f] = flows[f].cap,
        }
        let full: Vec<bool> = remaining.iter().zip(capacities).map(|(rem, cap)| *rem <= EPS * cap).collect();
        for (f, flow) in flows.iter().enumerate() {
            if frozen[f] {
                continue;
            }
            if flow.cap - rate[f] <= EPS * flow.cap {
                rate[f] = flow.cap;
                frozen[f] = true;
            } else if flow.resources.iter().any(|&r| full[r]) {
                frozen[f] = true;
            }
        }
    }
    rate
}
