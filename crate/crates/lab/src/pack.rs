//! Built-in scenarios, addressed as `accept/<name>`.

pub const ALL: &[(&str, &str)] = &[
    ("accept/burago-plateau", include_str!("../scenarios/accept/burago-plateau.json")),
    ("accept/certify-conformal", include_str!("../scenarios/accept/certify-conformal.json")),
    ("accept/certify-flat", include_str!("../scenarios/accept/certify-flat.json")),
    ("accept/certify-product", include_str!("../scenarios/accept/certify-product.json")),
    ("accept/conformal-cone", include_str!("../scenarios/accept/conformal-cone.json")),
    ("accept/e1-vicious", include_str!("../scenarios/accept/e1-vicious.json")),
    ("accept/flat-cone", include_str!("../scenarios/accept/flat-cone.json")),
    ("accept/flow-conformal", include_str!("../scenarios/accept/flow-conformal.json")),
    ("accept/frak-conformal", include_str!("../scenarios/accept/frak-conformal.json")),
    ("accept/frak-flat", include_str!("../scenarios/accept/frak-flat.json")),
    ("accept/lipschitz-conformal", include_str!("../scenarios/accept/lipschitz-conformal.json")),
    ("accept/lipschitz-flat", include_str!("../scenarios/accept/lipschitz-flat.json")),
    ("accept/minkowski-timesep", include_str!("../scenarios/accept/minkowski-timesep.json")),
    ("accept/p01a-conformal", include_str!("../scenarios/accept/p01a-conformal.json")),
    ("accept/p01a-flat", include_str!("../scenarios/accept/p01a-flat.json")),
    ("accept/perturb-flat", include_str!("../scenarios/accept/perturb-flat.json")),
    ("accept/product-slope", include_str!("../scenarios/accept/product-slope.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
