use hsdn_core::kernel::NodeId;
use hsdn_core::scenario::fuzz::fuzz_schedule;
use hsdn_core::scenario::output::render_run;
use hsdn_core::scenario::{builtin, inject, run_trial, run_trials, EventSpec, Method};
use hsdn_core::sim::World;
use hsdn_core::time::SimTime;

#[test]
fn every_builtin_and_method_conserves_packets() {
    for name in builtin::NAMES {
        let mut cfg = builtin::get(name).unwrap();
        cfg.knobs.trials = 2;
        for m in Method::ALL {
            cfg.method = m;
            let s = run_trials(&cfg, 11);
            let r = &s.report;
            assert!(
                r.conserved(),
                "{name}/{m}: {} != {}+{}+{}",
                r.generated,
                r.delivered,
                r.dropped,
                r.in_flight
            );
            assert!(r.generated > 0, "{name}/{m} generated nothing");
            assert_eq!(r.anomalies, 0, "{name}/{m}: {:?}", s.anomalies.first());
        }
    }
}

#[test]
fn rendered_outputs_repeat_for_a_seed() {
    let mut cfg = builtin::prototype();
    cfg.knobs.trials = 3;
    cfg.method = Method::Migration;
    let a = render_run(&cfg, &run_trials(&cfg, 5));
    let b = render_run(&cfg, &run_trials(&cfg, 5));
    assert_eq!(a, b);
    let c = render_run(&cfg, &run_trials(&cfg, 6));
    assert_ne!(a["trace.jsonl"], c["trace.jsonl"]);
}

#[test]
fn only_first_trial_is_traced() {
    let cfg = builtin::line6();
    assert!(!run_trial(&cfg, 1, 0).trace.is_empty());
    assert!(run_trial(&cfg, 1, 1).trace.is_empty());
}

#[test]
fn injected_probe_shows_up_in_records() {
    let cfg = builtin::line6();
    let before = World::new(&cfg, 3, 0).run().report.generated;
    let mut w = World::new(&cfg, 3, 0);
    w.inject(NodeId(1), NodeId(6), SimTime(2_000_000));
    assert_eq!(w.run().report.generated, before + 1);
}

#[test]
fn inject_rejects_invalid_events() {
    let mut cfg = builtin::line6();
    let n = cfg.events.len();
    assert!(inject(
        &mut cfg,
        EventSpec::LinkDown {
            at_us: 1,
            link: [1, 99]
        }
    )
    .is_err());
    assert_eq!(cfg.events.len(), n);
    inject(
        &mut cfg,
        EventSpec::LinkDown {
            at_us: 1,
            link: [1, 2],
        },
    )
    .unwrap();
    assert_eq!(
        cfg.events[0],
        EventSpec::LinkDown {
            at_us: 1,
            link: [1, 2]
        }
    );
}

#[test]
fn fuzz_sample_has_no_anomalies() {
    let base = builtin::grid12_fuzz();
    for seed in 0..40 {
        let cfg = fuzz_schedule(&base, seed);
        let s = run_trials(&cfg, seed);
        assert!(s.report.conserved(), "seed {seed}");
        assert_eq!(
            s.report.anomalies,
            0,
            "seed {seed}: {:?}",
            s.anomalies.first()
        );
    }
}
