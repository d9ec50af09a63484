//! Compares Gibbs samples of a small Ising grid with exact enumeration.

use semigraph::samplers::{ising_exact_distribution, sample_ising, state_index, EdgeSigns, GibbsConfig, IsingSpec};

fn main() -> semigraph::Result<()> {
    let spec = IsingSpec { rows: 2, cols: 2, mu: 0.5, signs: EdgeSigns::Positive };
    let exact = ising_exact_distribution(&spec)?;
    let n = 40_000;
    let data = sample_ising(&spec, n, &GibbsConfig::with_seed(2))?;
    let mut freq = vec![0.0; exact.len()];
    for i in 0..n {
        freq[state_index(data.row(i))] += 1.0 / n as f64;
    }
    for (s, (p, f)) in exact.iter().zip(&freq).enumerate() {
        println!("state {s:04b}: exact {p:.4}  sampled {f:.4}");
    }
    let tv: f64 = 0.5 * exact.iter().zip(&freq).map(|(p, f)| (p - f).abs()).sum::<f64>();
    println!("total variation {tv:.4}");
    Ok(())
}
