use poolbench::params_report;
use poolbench::report::{read_run, write_run, ParamsFile};
use poolbench_core::train::{Abort, EpochMetrics, ParamSnapshot, RunReport};
use poolbench_core::Method;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e300..1e300f64, -1.0..1.0f64, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE), Just(5e-324)]
}

fn metrics() -> impl Strategy<Value = Vec<EpochMetrics>> {
    prop::collection::vec((finite(), 0.0..=1.0f64, finite(), 0.0..=1.0f64), 0..5).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (tl, ta, sl, sa))| EpochMetrics {
                epoch: i + 1,
                train_loss: tl,
                train_acc: ta,
                test_loss: sl,
                test_acc: sa,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn run_files_round_trip_bit_exactly(
        method in prop::sample::select(Method::ALL.to_vec()),
        seed in any::<u64>(),
        epochs in metrics(),
        values in prop::collection::vec(finite(), 1..9),
        aborted in prop::option::of((1usize..10, 1usize..100)),
    ) {
        let report = RunReport {
            method,
            seed,
            epochs,
            snapshots: vec![ParamSnapshot { block: 1, name: "tau".into(), initial: values.iter().map(|v| v / 3.0).collect(), values }],
            aborted: aborted.map(|(epoch, step)| Abort { epoch, step, reason: "non-finite loss".into() }),
        };
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &report).unwrap();
        let back = read_run(dir.path(), method, seed).unwrap();
        prop_assert_eq!(back.epochs.len(), report.epochs.len());
        for (a, b) in back.epochs.iter().zip(&report.epochs) {
            prop_assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
            prop_assert_eq!(a.test_acc.to_bits(), b.test_acc.to_bits());
        }
        for (a, b) in back.snapshots[0].values.iter().zip(&report.snapshots[0].values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back, report);
    }

    #[test]
    fn percentile_rows_are_nondecreasing(tau in prop::collection::vec(-10.0..10.0f64, 1..40), seed in 1u64..5) {
        let report = RunReport {
            method: Method::Smp,
            seed,
            epochs: vec![],
            snapshots: vec![ParamSnapshot { block: 0, name: "tau".into(), initial: tau.clone(), values: tau }],
            aborted: None,
        };
        let rep = params_report::build(&[ParamsFile::from_report(&report)]).unwrap();
        for r in &rep.percentiles {
            prop_assert!(r.p5 <= r.p25 && r.p25 <= r.p50 && r.p50 <= r.p75 && r.p75 <= r.p95);
        }
    }
}
