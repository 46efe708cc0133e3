use nscov::covariance::*;
use nscov::field::*;
use nscov::gp::*;
use std::time::Instant;

fn main() {
    for &n in &[900usize, 2500] {
        let locs = perturbed_grid_locations(n, RngSeed(1)).unwrap();
        let p = LocalParams::isotropic(1.5, 0.09, 1.1).unwrap();
        let pf = ParamField::new(
            vec![Location::new(0.25, 0.25), Location::new(0.75, 0.75)],
            vec![p, LocalParams::isotropic(0.8, 0.02, 0.4).unwrap()],
            0.05,
        ).unwrap();
        let t0 = Instant::now();
        let cov = build_cov_matrix(&locs, &pf);
        let t1 = Instant::now();
        let chol = cholesky_jittered(&cov).unwrap();
        let t2 = Instant::now();
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let ll = log_likelihood_with_cov(&vals, &cov).unwrap();
        let t3 = Instant::now();
        println!("n={n}: build={:.3}s chol={:.3}s loglik_total={:.3}s jitter={} ll={:.3}",
            (t1-t0).as_secs_f64(), (t2-t1).as_secs_f64(), (t3-t2).as_secs_f64(),
            chol.applied_jitter(), ll.loglik);
    }
}
