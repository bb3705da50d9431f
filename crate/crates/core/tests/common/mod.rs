#![allow(dead_code)]

use symspace::{Class, Space};

pub fn space(n: usize, class: Class) -> Space {
    Space::from_class(n, class, 1e-9).expect("space")
}

/// One space per family and signature type, `n = 2`.
pub fn spaces() -> Vec<Space> {
    vec![
        space(2, Class::Hyperbolic { k: 1.0 }),
        space(2, Class::Elliptic { k: 1.0, p: 2 }),
        space(2, Class::Elliptic { k: 2.0, p: 1 }),
        space(2, Class::Nilpotent { r: 1, p: 1, m: 2 }),
        space(2, Class::Nilpotent { r: 2, p: 1, m: 1 }),
        space(2, Class::Nilpotent { r: 3, p: 3, m: 0 }),
    ]
}
