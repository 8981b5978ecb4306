//! Every differentiable primitive against central differences, over 100
//! random seeds and small random shapes.

use spanrel_testkit::grad::{primitive_error, PRIMITIVES};

#[test]
fn primitives_match_central_differences() {
    for p in PRIMITIVES {
        let err = primitive_error(p, 100);
        assert!(err < 1e-6, "{}: relative error {err}", p.name);
    }
}
