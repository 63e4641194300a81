//! Static experiment catalog.

use serde::Serialize;

use crate::config::ExperimentName;

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: ExperimentName,
    pub description: &'static str,
    /// Subject area the experiment exercises.
    pub topic: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    /// Declared pass criteria, human readable.
    pub checks: &'static [&'static str],
}

const SYMBOL_KEYS: [&str; 3] = ["symbol.eps", "symbol.modes", "symbol.speeds"];

static CATALOG: [CatalogEntry; 9] = [
    CatalogEntry {
        name: ExperimentName::Isometry,
        description: "FBI transform norm preservation and inversion on random band-limited inputs",
        topic: "phase-space transform",
        required: &["scale.big_r"],
        optional: &["run.samples", "grid.half_width", "grid.points"],
        checks: &["max |norm ratio - 1| <= 1e-6", "max reconstruction error <= 1e-6"],
    },
    CatalogEntry {
        name: ExperimentName::Flow,
        description: "Bicharacteristic closed forms, Richardson order, bi-Lipschitz envelope and symplecticity",
        topic: "Hamiltonian flow",
        required: &[],
        optional: &["scale.big_r", SYMBOL_KEYS[0], SYMBOL_KEYS[1], SYMBOL_KEYS[2], "run.samples", "run.steps"],
        checks: &[
            "closed-form error <= 1e-10",
            "Richardson ratios in [12, 20]",
            "zero envelope violations",
            "max |det - 1| <= 1e-6",
        ],
    },
    CatalogEntry {
        name: ExperimentName::Localization,
        description: "Position, frequency and time-frequency tails of evolved coherent packets",
        topic: "wave packet localization",
        required: &["scale.big_r"],
        optional: &[
            "scale.delta",
            SYMBOL_KEYS[0],
            SYMBOL_KEYS[1],
            SYMBOL_KEYS[2],
            "grid.half_width",
            "grid.points",
            "run.times",
        ],
        checks: &["all tail fractions <= 1e-4", "time-frequency peak within one bin of -p"],
    },
    CatalogEntry {
        name: ExperimentName::Decompose,
        description: "Wave packet decomposition of localized random data and its remainder",
        topic: "wave packet decomposition",
        required: &["scale.big_r"],
        optional: &[
            "scale.nu",
            "scale.delta",
            "scale.delta0",
            SYMBOL_KEYS[0],
            SYMBOL_KEYS[1],
            "grid.half_width",
            "grid.points",
            "run.samples",
            "run.times",
        ],
        checks: &["remainder L2 <= 1e-3 of the data at every time"],
    },
    CatalogEntry {
        name: ExperimentName::Dispersive,
        description: "Sup-norm decay fit of an evolved Gaussian against log(1 + t)",
        topic: "dispersive decay",
        required: &[],
        optional: &[
            "symbol.kind",
            SYMBOL_KEYS[0],
            SYMBOL_KEYS[1],
            SYMBOL_KEYS[2],
            "symbol.cutoff",
            "grid.half_width",
            "grid.points",
            "run.times",
            "run.width",
        ],
        checks: &["free slope within 0.05 of expected", "perturbed slope within 0.1 of expected"],
    },
    CatalogEntry {
        name: ExperimentName::Bilinear,
        description: "Cube-localized bilinear norm sweep over scale R and transversality nu",
        topic: "bilinear estimate",
        required: &["scale.big_r", "scale.nu"],
        optional: &["symbol.speeds", "run.width", "run.p"],
        checks: &["nu-exponent within 0.15 of -1/2 at every R", "R-exponent <= 0.1 at every nu"],
    },
    CatalogEntry {
        name: ExperimentName::Conservation,
        description: "Quadrilinear integrals of momentum-conserving versus violating packet quadruples",
        topic: "conservation-law interactions",
        required: &["scale.big_r"],
        optional: &["scale.delta", "symbol.cutoff", "grid.half_width", "grid.points", "run.samples"],
        checks: &["median conserving / median violating >= 1e3"],
    },
    CatalogEntry {
        name: ExperimentName::Tubes,
        description: "Tube incidences, pigeonhole buckets, focusing relation and double-end counts",
        topic: "tube incidence geometry",
        required: &["scale.big_r"],
        optional: &["scale.nu", "scale.delta"],
        checks: &[
            "shell tubes per (q, q') <= 2 for the transverse pair",
            "time extent along T2 within a factor 2 of R^(1/2+delta)/nu",
            "focusing counts within the neighbourhood bound",
        ],
    },
    CatalogEntry {
        name: ExperimentName::Budget,
        description: "Exact rational loss exponents for Hoelder regularity s",
        topic: "derivative loss budget",
        required: &["symbol.s"],
        optional: &["grid.dim", "run.q"],
        checks: &["sigma, kappa0, kappa1, kappa equal their closed forms exactly"],
    },
];

/// Entries in stable order.
pub fn catalog() -> &'static [CatalogEntry] {
    &CATALOG
}

pub fn entry(name: ExperimentName) -> &'static CatalogEntry {
    CATALOG.iter().find(|e| e.name == name).expect("every experiment has a catalog entry")
}

/// Machine-readable catalog as printed by `list --json`.
pub fn catalog_json() -> serde_json::Value {
    serde_json::json!({ "experiments": CATALOG })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_entries_in_declaration_order() {
        let names: Vec<_> = catalog().iter().map(|e| e.name).collect();
        assert_eq!(names, ExperimentName::ALL);
        for e in catalog() {
            for k in e.required {
                assert!(!e.optional.contains(k));
            }
        }
    }
}
