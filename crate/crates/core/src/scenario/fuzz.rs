//! Seeded event schedules layered on a base scenario.
//!
//! Even seeds fuzz the migration method (data failures, control-channel
//! outages, explicit migrations); odd seeds fuzz the cluster method (data
//! failures and reclusterings). Every outage ends early enough that the
//! network has settled before probe traffic starts.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::config::{EventSpec, Method, ScenarioConfig};
use crate::kernel::RngStreams;

const WINDOW_US: (u64, u64) = (1_000_000, 10_000_000);

pub fn fuzz_schedule(base: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut rng = RngStreams::new(seed).stream("fuzz");
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.name = format!("{}-{seed}", base.name);
    cfg.events.clear();
    cfg.method = if seed.is_multiple_of(2) {
        Method::Migration
    } else {
        Method::Cluster
    };
    let at = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(WINDOW_US.0..=WINDOW_US.1);

    let links: Vec<[u32; 2]> = base.topology.links.iter().map(|l| [l.a, l.b]).collect();
    let failures = rng.random_range(1..=3usize).min(links.len());
    let chosen: Vec<[u32; 2]> = links.choose_multiple(&mut rng, failures).copied().collect();
    for link in chosen {
        let down = at(&mut rng);
        cfg.events.push(EventSpec::LinkDown { at_us: down, link });
        if rng.random_bool(0.5) {
            let up = down + rng.random_range(500_000..=3_000_000);
            cfg.events.push(EventSpec::LinkUp { at_us: up, link });
        }
    }

    match cfg.method {
        Method::Migration => {
            if rng.random_bool(0.3) {
                let down = at(&mut rng);
                cfg.events.push(EventSpec::ControllerDown { at_us: down });
                cfg.events.push(EventSpec::ControllerUp {
                    at_us: down + rng.random_range(1_000_000..=4_000_000),
                });
            }
            for _ in 0..rng.random_range(0..=2) {
                let node = *base.topology.nodes.choose(&mut rng).expect("nodes");
                let down = at(&mut rng);
                cfg.events
                    .push(EventSpec::ControlLinkDown { at_us: down, node });
                cfg.events.push(EventSpec::ControlLinkUp {
                    at_us: down + rng.random_range(1_000_000..=4_000_000),
                    node,
                });
            }
            for _ in 0..rng.random_range(0..=2) {
                let node = *base.topology.nodes.choose(&mut rng).expect("nodes");
                cfg.events.push(EventSpec::Migrate {
                    at_us: at(&mut rng),
                    node,
                });
            }
        }
        _ => {
            for _ in 0..rng.random_range(1..=2) {
                cfg.events.push(EventSpec::Recluster {
                    at_us: at(&mut rng),
                });
            }
        }
    }
    cfg.events.sort_by_key(|e| e.at());
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn schedules_validate_and_repeat() {
        let base = builtin::grid12_fuzz();
        for seed in 0..50 {
            let a = fuzz_schedule(&base, seed);
            a.validate().unwrap();
            assert_eq!(a, fuzz_schedule(&base, seed));
            assert!(a.events.iter().all(|e| e.at().as_micros() <= 14_000_000));
        }
    }
}
