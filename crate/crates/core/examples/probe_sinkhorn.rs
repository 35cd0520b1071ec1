// temporary probe run as an example
use lvebm::metrics::sinkhorn_detailed;
use lvebm::rng::{fill_standard_normal, stream_rng};

fn main() {
    let mut rng = stream_rng(11, 0);
    for &n in &[1000usize] {
        let mut a = vec![0.0; n * 2];
        let mut b = vec![0.0; n * 2];
        fill_standard_normal(&mut rng, &mut a);
        fill_standard_normal(&mut rng, &mut b);
        for chunk in b.chunks_exact_mut(2) { chunk[0] += 2.0; }
        for &(eps, iters) in &[(0.05, 200usize), (0.05, 1000), (0.01, 500), (0.01, 1500), (0.01, 3000), (0.01, 6000)] {
            let t = std::time::Instant::now();
            let r = sinkhorn_detailed(&a, &b, 2, eps, iters).unwrap();
            println!("n={n} eps={eps} iters={iters}: cost={:.4} marg_err={:.2e}  ({:?})", r.cost, r.marginal_error, t.elapsed());
        }
    }
}
