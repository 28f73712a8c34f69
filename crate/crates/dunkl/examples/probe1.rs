use dunkl::heat::{HeatKernelEvaluator, ProductRank1System};
use dunkl::rootsystem::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let ev = HeatKernelEvaluator::with_defaults(ProductRank1System::new(&[1e-8]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut shown = 0;
    for i in 0..1000 {
        let x = rng.gen_range(-4.0..4.0);
        let y = rng.gen_range(-4.0..4.0);
        let t = rng.gen_range(0.1..10.0);
        let h = ev.heat_kernel(&Vector::scalar(x), &Vector::scalar(y), t).unwrap();
        let gauss = (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-(x - y) * (x - y) / (4.0 * t)).exp();
        let rel = (h - gauss).abs() / gauss;
        if rel > 1e-6 && shown < 12 {
            println!("i={i} x={x:+.4} y={y:+.4} t={t:.4}  h={h:.6e} gauss={gauss:.6e} rel={rel:.3e}");
            shown += 1;
        }
    }
}
