//! Catalog of certified momentum switches.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::{parse_graph_file, ScatterGraph};
use crate::momentum::Momentum;
use crate::scatter::verify_switch;

pub const DEFAULT_SWITCH: &str = "pi4-pi2-switch";

/// Tolerance a switch must meet before it is handed out.
pub const CERTIFICATION_TOLERANCE: f64 = 1e-10;

const CATALOG: &[(&str, &str)] = &[(DEFAULT_SWITCH, include_str!("../data/switches/pi4-pi2.toml"))];

const ALIASES: &[(&str, &str)] = &[("childs-switch", DEFAULT_SWITCH)];

pub fn catalog_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).chain(ALIASES.iter().map(|(a, _)| *a)).collect()
}

/// The raw catalog graph, without certification.
pub fn catalog_switch(name: &str) -> Result<ScatterGraph> {
    let canonical = ALIASES.iter().find(|(a, _)| *a == name).map(|(_, n)| *n).unwrap_or(name);
    let (_, text) = CATALOG
        .iter()
        .find(|(n, _)| *n == canonical)
        .ok_or_else(|| Error::UnknownSwitch(name.to_string()))?;
    parse_graph_file(text)
}

/// Where a switch comes from.
#[derive(Debug, Clone)]
pub enum SwitchSource<'a> {
    Catalog(&'a str),
    Graph(ScatterGraph),
    /// Text in the graph file format.
    File(&'a str),
}

/// Resolve a switch and certify it at |k| = pi/4 (1 <-> 3) and pi/2 (2 <-> 3).
pub fn build_momentum_switch(source: SwitchSource<'_>) -> Result<ScatterGraph> {
    let graph = match source {
        SwitchSource::Catalog(name) => catalog_switch(name)?,
        SwitchSource::Graph(g) => g,
        SwitchSource::File(text) => parse_graph_file(text)?,
    };
    if graph.terminals().len() != 3 {
        return Err(Error::Graph(format!(
            "a momentum switch needs 3 terminals, got {}",
            graph.terminals().len()
        )));
    }
    let report = verify_switch(
        &graph,
        Momentum::new(PI / 4.0),
        Momentum::new(PI / 2.0),
        CERTIFICATION_TOLERANCE,
    )?;
    if !report.passed {
        return Err(Error::SwitchVerification(format!(
            "|S31(pi/4)| = {:.12}, |S32(pi/2)| = {:.12}, |S21| = {:.3e} / {:.3e}",
            report.s31_low, report.s32_high, report.s21_low, report.s21_high
        )));
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_entries_certify() {
        for name in catalog_names() {
            let g = build_momentum_switch(SwitchSource::Catalog(name)).unwrap();
            assert_eq!(g.terminals().len(), 3);
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(catalog_switch("nope"), Err(Error::UnknownSwitch(_))));
    }

    #[test]
    fn arity_and_certification_errors() {
        let two = ScatterGraph::new(3, [(0, 1), (1, 2)], vec![0, 2]).unwrap();
        assert!(matches!(build_momentum_switch(SwitchSource::Graph(two)), Err(Error::Graph(_))));
        let star = ScatterGraph::new(1, [], vec![0, 0, 0]).unwrap();
        assert!(matches!(
            build_momentum_switch(SwitchSource::Graph(star)),
            Err(Error::SwitchVerification(_))
        ));
    }
}
