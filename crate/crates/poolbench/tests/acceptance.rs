//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the verdicts always reach the console.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use poolbench::config::ExperimentConfig;
use poolbench::gradcheck::check_method;
use poolbench::params_report;
use poolbench::report::ParamsFile;
use poolbench::sweep::{net_for, run_sweep};
use poolbench_core::data::{generate, SyntheticConfig};
use poolbench_core::gradcheck::{relative_error, FdConfig};
use poolbench_core::pool::grads::grad_smp;
use poolbench_core::pool::ops::{f_ap, f_lnp, f_lnp_exponent, f_lse, f_op, f_smp};
use poolbench_core::train::{train_with_observer, OptimConfig, RunReport};
use poolbench_core::Method;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pilot-calibrated bands for the toy comparison, in accuracy units.
const BAND_ALL: f64 = 0.10;
const BAND_MP_AP_OP: f64 = 0.03;
const WINDOWS: usize = 10_000;

enum Verdict {
    Pass(String),
    Warn(String),
    Fail(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn window(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..4).map(|_| rng.random_range(lo..hi)).collect()
}

fn top_gap(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    (s[s.len() - 1] - s[s.len() - 2]).min(s[1] - s[0])
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let mut worst: (f64, Method) = (0.0, Method::Mp);
    let mut failed = Vec::new();
    for method in Method::ALL {
        let row = check_method(method, 1000, 1e-5, 1).expect("gradient check");
        if !row.passed || row.checked < 1000 {
            failed.push(method.name());
        }
        if row.worst_error > worst.0 {
            worst = (row.worst_error, method);
        }
    }
    let elapsed = start.elapsed();
    check(
        failed.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "12 methods x 1000 points, worst relative error {:.2e} ({}), failures {:?}, {:.1}s",
            worst.0,
            worst.1,
            failed,
            elapsed.as_secs_f64()
        ),
    )
}

fn limits() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut smp0_exact = true;
    let mut smp_inf: f64 = 0.0;
    let mut lnp1: f64 = 0.0;
    let mut lse: f64 = 0.0;
    let mut op_exact = true;
    let mut drawn = 0;
    while drawn < WINDOWS {
        let x = window(&mut rng, -5.0, 5.0);
        smp0_exact &= f_smp(&x, 0.0).unwrap() == f_ap(&x).unwrap();
        lse = lse.max((f_lse(&x, 1e3).unwrap() - max_of(&x)).abs());
        op_exact &= f_op(&x, &[0.0, 0.0, 0.0, 1.0]).unwrap() == max_of(&x);
        op_exact &= f_op(&x, &[1.0, 0.0, 0.0, 0.0]).unwrap() == min_of(&x);
        let nonneg: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let ap = f_ap(&nonneg).unwrap();
        lnp1 = lnp1.max((f_lnp_exponent(&nonneg, 1.0).unwrap() - ap).abs());
        lnp1 = lnp1.max((f_lnp(&nonneg, -40.0).unwrap() - ap).abs());
        // the tau -> inf limit is approached at rate gap * exp(-tau * gap), so
        // windows with a near-tie at the top or bottom are redrawn
        if top_gap(&x) >= 1e-3 {
            smp_inf = smp_inf.max((f_smp(&x, 1e4).unwrap() - max_of(&x)).abs());
            smp_inf = smp_inf.max((f_smp(&x, -1e4).unwrap() - min_of(&x)).abs());
            drawn += 1;
        }
    }
    let ok = smp0_exact && smp_inf < 1e-6 && lnp1 < 1e-12 && lse < 1e-2 && op_exact;
    check(
        ok,
        format!(
            "{WINDOWS} windows: SMP(0)==AP {smp0_exact}, |SMP(+-1e4)-max/min| {smp_inf:.1e}, \
             |LNP(p=1)-AP| {lnp1:.1e}, |LSE(1e3)-max| {lse:.1e}, OP one-hot exact {op_exact}"
        ),
    )
}

fn identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fd = FdConfig::default();
    let mut shift: f64 = 0.0;
    let mut variance_ok = true;
    let mut fd_err: f64 = 0.0;
    for _ in 0..WINDOWS {
        let x = window(&mut rng, -5.0, 5.0);
        let tau = rng.random_range(-5.0..5.0);
        let c = rng.random_range(-5.0..5.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        shift = shift.max((f_smp(&shifted, tau).unwrap() - f_smp(&x, tau).unwrap() - c).abs());

        let d_tau = grad_smp(&x, tau).unwrap().d_params[0];
        let y = f_smp(&x, tau).unwrap();
        let m = x.iter().map(|v| tau * v).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = x.iter().map(|v| (tau * v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let var: f64 = x.iter().zip(&e).map(|(v, w)| w / s * (v - y) * (v - y)).sum();
        variance_ok &= d_tau >= 0.0 && (d_tau - var).abs() <= 1e-10 * (1.0 + var);
        let h = fd.step;
        let numeric = (f_smp(&x, tau + h).unwrap() - f_smp(&x, tau - h).unwrap()) / (2.0 * h);
        fd_err = fd_err.max(relative_error(d_tau, numeric, fd.floor));
    }
    let mut stable = true;
    let mut naive_overflows = false;
    for _ in 0..1000 {
        let x = window(&mut rng, -1e4, 1e4);
        let tau = rng.random_range(-1e4..1e4);
        let y = f_smp(&x, tau).unwrap();
        let g = grad_smp(&x, tau).unwrap();
        stable &= y.is_finite() && g.d_input.iter().all(|v| v.is_finite()) && g.d_params[0].is_finite();
        naive_overflows |= x.iter().any(|v| !(tau * v).exp().is_finite());
    }
    check(
        shift < 1e-12 && variance_ok && fd_err < 1e-6 && stable && naive_overflows,
        format!(
            "shift error {shift:.1e}, d_tau is the softmax variance {variance_ok}, FD error {fd_err:.1e}, \
             finite at |x|,|tau| <= 1e4 {stable} (naive exp overflows {naive_overflows})"
        ),
    )
}

fn ordinal_projection() -> Verdict {
    let data = generate(&SyntheticConfig::default()).unwrap();
    let net = net_for(Method::Op, &data, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut negative = false;
    let mut steps = 0;
    let report = train_with_observer(&net, &data, &OptimConfig::default(), |_, params| {
        steps += 1;
        for e in params.entries().iter().filter(|e| e.simplex) {
            negative |= e.values.iter().any(|&v| v < 0.0);
            worst = worst.max((e.values.iter().sum::<f64>() - 1.0).abs());
        }
    })
    .unwrap();
    check(
        !negative && worst < 1e-12 && !report.diverged() && report.epochs.len() == 10,
        format!("{steps} steps over 10 epochs, max |sum w - 1| {worst:.1e}, negative weight seen {negative}"),
    )
}

fn mean_test(reports: &[RunReport], method: Method) -> Option<f64> {
    let accs: Vec<f64> = reports
        .iter()
        .filter(|r| r.method == method && !r.diverged())
        .filter_map(|r| r.final_metrics().map(|m| m.test_acc))
        .collect();
    poolbench_core::stats::mean(&accs)
}

fn comparison(reports: &[RunReport], elapsed: Duration) -> Verdict {
    let means: Vec<(Method, f64)> =
        Method::COMPARED.iter().filter_map(|&m| mean_test(reports, m).map(|a| (m, a))).collect();
    let spread = |ms: &[f64]| max_of(ms) - min_of(ms);
    let all: Vec<f64> = means.iter().map(|(_, a)| *a).collect();
    let core: Vec<f64> =
        means.iter().filter(|(m, _)| matches!(m, Method::Mp | Method::Ap | Method::Op)).map(|(_, a)| *a).collect();
    let diverged = reports.iter().filter(|r| r.diverged()).count();
    let table = means.iter().map(|(m, a)| format!("{m} {:.2}", 100.0 * a)).collect::<Vec<_>>().join(", ");
    check(
        reports.len() == 40
            && core.len() == 3
            && spread(&all) <= BAND_ALL
            && spread(&core) <= BAND_MP_AP_OP
            && elapsed < Duration::from_secs(30 * 60),
        format!(
            "test accuracy band {:.2}pp (limit {}), MP/AP/OP {:.2}pp (limit {}), {diverged} diverged, {:.0}s [{table}]",
            100.0 * spread(&all),
            100.0 * BAND_ALL,
            100.0 * spread(&core),
            100.0 * BAND_MP_AP_OP,
            elapsed.as_secs_f64()
        ),
    )
}

fn drift(reports: &[RunReport]) -> Verdict {
    let files: Vec<ParamsFile> =
        reports.iter().filter(|r| matches!(r.method, Method::Smp | Method::Op)).map(ParamsFile::from_report).collect();
    let report = params_report::build(&files).unwrap();
    let tau_rows = report.percentiles.iter().filter(|r| r.param == "tau").count();
    let ordered =
        report.percentiles.iter().all(|r| r.p5 <= r.p25 && r.p25 <= r.p50 && r.p50 <= r.p75 && r.p75 <= r.p95);
    if tau_rows == 0 || report.ordinal.is_empty() || !ordered {
        return Verdict::Fail(format!("incomplete tables: {tau_rows} tau rows, {} OP weights", report.ordinal.len()));
    }
    let d = report.dominance.expect("OP runs present");
    let detail = format!(
        "{tau_rows} tau percentile rows, {} OP weights; w4 strictly largest in block {} for {}/{} seeds",
        report.ordinal.len(),
        d.block,
        d.seeds_dominant,
        d.seeds_total
    );
    if d.passed() {
        Verdict::Pass(detail)
    } else {
        Verdict::Warn(detail)
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, threads) in dirs.iter().zip(["1", "3"]) {
        let status = Command::new(env!("CARGO_BIN_EXE_poolbench"))
            .args(["sweep", "--methods", "OP,SMP,LNP", "--seeds", "1,2", "--epochs", "2", "--out"])
            .arg(dir.path())
            .env("POOLBENCH_THREADS", threads)
            .output()
            .unwrap();
        if !status.status.success() {
            return Verdict::Fail(format!("sweep exited with {}", status.status));
        }
        let status = Command::new(env!("CARGO_BIN_EXE_poolbench"))
            .args(["params-report", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        if !status.status.success() {
            return Verdict::Fail(format!("params-report exited with {}", status.status));
        }
    }
    let (a, b) = (read_all(dirs[0].path()), read_all(dirs[1].path()));
    check(a == b && a.len() == 15, format!("{} report files from two invocations, byte-identical {}", a.len(), a == b))
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; nothing to list here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let mut report = |n: usize, name: &str, v: Verdict| {
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Warn(d) => ("WARN", d),
            Verdict::Fail(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {n} ({name}): {detail}");
    };
    report(1, "gradient conformance", gradients());
    report(2, "limit equivalences", limits());
    report(3, "smooth-maximum identities", identities());
    report(4, "ordinal projection", ordinal_projection());

    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let reports = run_sweep(&cfg).expect("sweep");
    let elapsed = start.elapsed();
    report(5, "toy-scale comparison", comparison(&reports, elapsed));
    report(6, "parameter drift", drift(&reports));
    report(7, "determinism", determinism());

    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
