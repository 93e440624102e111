use std::time::Instant;
use fogran::config::ScenarioConfig;
use fogran::schedulers::Scheme;
use fogran::sim::{monte_carlo};

fn main() {
    let cfg = ScenarioConfig {
        redraw_positions_per_slot: true,
        ..Default::default()
    };
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(30);
    let schemes: Vec<Scheme> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        Scheme::ALL.to_vec()
    };
    let t0 = Instant::now();
    let out = monte_carlo(&cfg, &schemes, n, 1, false);
    for (agg, eps) in &out {
        let mx = eps.iter().filter(|e| !e.stalled).map(|e| e.overall).fold(0.0f64, f64::max);
        println!("{:<24} mean {:>14.3}  std {:>14.3}  max {:>14.3}  stalls {}  slots {:>7.1}",
                 agg.scheme.as_str(), agg.mean, agg.std_dev, mx, agg.stalled, agg.mean_slots);
    }
    // paired comparison of the first two schemes
    if out.len() >= 2 {
        let a = &out[0].1; let b = &out[1].1;
        let diffs: Vec<f64> = a.iter().zip(b).filter(|(x, y)| !x.stalled && !y.stalled)
            .map(|(x, y)| y.overall - x.overall).collect();
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64).sqrt();
        let half = 1.96 * sd / (diffs.len() as f64).sqrt();
        println!("paired diff ({} - {}): mean {:.3} ci [{:.3}, {:.3}] n={}",
                 out[1].0.scheme, out[0].0.scheme, m, m - half, m + half, diffs.len());
    }
    println!("wall: {:.1?}", t0.elapsed());
}
