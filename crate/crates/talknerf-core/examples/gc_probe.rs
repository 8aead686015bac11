use talknerf_core::diffcore::GradCheckSettings;
use talknerf_core::verify::run_gradchecks;
use std::time::Instant;

fn main() {
    let settings = GradCheckSettings { n_samples: 220, eps: 1e-5, tol: 1e-4, seed: 0 };
    let t0 = Instant::now();
    for rep in run_gradchecks(None, &settings) {
        println!(
            "{:18} n={:4} max_rel_err={:.3e} failures={} {}",
            rep.op_name, rep.n_checked, rep.max_rel_err, rep.failures.len(),
            if rep.passed(1e-4) { "PASS" } else { "FAIL" }
        );
    }
    println!("total: {:.1}s", t0.elapsed().as_secs_f64());
}
