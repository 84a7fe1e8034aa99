//! Projection of raw samples onto a union of safe balls.

use safe_cmaes::mathkit::{NormalSource, RngStream};
use safe_cmaes::safe::{project, Anchor, SafeRegion};

fn main() -> safe_cmaes::Result<()> {
    let region = SafeRegion {
        anchors: vec![
            Anchor { center: vec![-1.0, 0.0], radius: 0.5 },
            Anchor { center: vec![1.5, 1.0], radius: 1.0 },
        ],
    };
    let mut rng = RngStream::new(8);
    for _ in 0..6 {
        let z: Vec<f64> = rng.standard_normal(2).iter().map(|v| 2.0 * v).collect();
        let p = project(&z, &region)?;
        println!(
            "raw ({:+.3}, {:+.3}) -> ({:+.3}, {:+.3})  anchor {}  xi {:.3}",
            z[0], z[1], p.z[0], p.z[1], p.anchor, p.xi
        );
    }
    Ok(())
}
