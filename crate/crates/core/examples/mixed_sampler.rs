//! Draws from the two-layer binary/Gaussian model and reports moments.

use semigraph::samplers::{sample_mixed, EdgeSigns, GibbsConfig, MixedSpec};

fn main() -> semigraph::Result<()> {
    let spec = MixedSpec { rows: 2, cols: 3, mu: 0.2, signs: EdgeSigns::Random { seed: 3 } };
    let data = sample_mixed(&spec, 5_000, &GibbsConfig::with_seed(8))?;
    let m = spec.layer_size();
    println!("d = {}, {} true edges", spec.d(), spec.truth_edges().len());
    for k in 0..spec.d() {
        let col = data.column(k);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        let kind = if k < m { "binary" } else { "gaussian" };
        println!("x{k:<2} {kind:<8} mean {mean:+.3}  variance {var:.3}");
    }
    Ok(())
}
