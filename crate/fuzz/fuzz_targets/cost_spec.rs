//! Cost specifications: parsing must never panic, and every accepted
//! spec must either build a finite cost table on a small grid or report
//! a structured error.

#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;

use bridgelab::formats::{build_cost, parse_cost_spec};
use bridgelab::FiniteMetricSpace;

fn grids() -> &'static (FiniteMetricSpace, FiniteMetricSpace) {
    static GRIDS: OnceLock<(FiniteMetricSpace, FiniteMetricSpace)> = OnceLock::new();
    GRIDS.get_or_init(|| {
        let x = FiniteMetricSpace::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        let y = FiniteMetricSpace::from_points(&[vec![0.0], vec![0.5], vec![1.0]])
            .unwrap();
        (x, y)
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = parse_cost_spec(text) else {
        return;
    };
    let (x, y) = grids();
    if let Ok(cost) = build_cost(&spec, x, y, None) {
        assert!(cost.sup_norm().is_finite());
        assert!(cost.sup_norm() >= 0.0);
        assert!(cost.lip().value.is_finite());
        assert!(cost.lip().value >= 0.0);
    }
});
