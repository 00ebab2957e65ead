//! Linear-elastic planar truss: a plain-text geometry format, bar-element
//! stiffness assembly and a precomputed influence vector so the limit state
//! costs a dot product inside Monte Carlo pools.
//!
//! Geometry grammar (whitespace-separated, `#` comments, SI units):
//!
//! ```text
//! NODES
//! <id> <x [m]> <y [m]>
//! BARS
//! <id> <node_i> <node_j> <area [m^2]> <modulus [Pa]>
//! SUPPORTS
//! <node> <x|y|xy>
//! LOADS
//! <node> <node> ...        # ordered list of downward point-load nodes
//! OUTPUT
//! <node> <y>               # displacement dof reported by the solver
//! ```

use crate::linalg::lu_solve;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrussError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("geometry is not statically solvable (singular stiffness after constraints)")]
    Singular,
    #[error("load vector has {got} entries, geometry defines {expected} load nodes")]
    LoadCount { expected: usize, got: usize },
}

fn parse_err(line: usize, message: impl Into<String>) -> TrussError {
    TrussError::Parse { line, message: message.into() }
}

#[derive(Debug, Clone)]
pub struct Bar {
    pub node_i: usize,
    pub node_j: usize,
    pub area: f64,
    pub modulus: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Support {
    pub node: usize,
    pub fix_x: bool,
    pub fix_y: bool,
}

/// Parsed truss geometry. Node ids are remapped to dense indices.
#[derive(Debug, Clone)]
pub struct TrussGeometry {
    pub nodes: Vec<(f64, f64)>,
    pub bars: Vec<Bar>,
    pub supports: Vec<Support>,
    /// Nodes receiving downward point loads, in load-vector order.
    pub load_nodes: Vec<usize>,
    /// Node whose vertical displacement is the response.
    pub output_node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Nodes,
    Bars,
    Supports,
    Loads,
    Output,
}

impl TrussGeometry {
    /// Parses the sectioned text format with line-numbered diagnostics.
    pub fn parse(text: &str) -> Result<Self, TrussError> {
        let mut section = Section::None;
        let mut raw_nodes: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        let mut raw_bars: Vec<(usize, u64, u64, f64, f64)> = Vec::new();
        let mut raw_supports: Vec<(usize, u64, String)> = Vec::new();
        let mut raw_loads: Vec<(usize, u64)> = Vec::new();
        let mut raw_output: Option<(usize, u64, String)> = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "NODES" => {
                    section = Section::Nodes;
                    continue;
                }
                "BARS" => {
                    section = Section::Bars;
                    continue;
                }
                "SUPPORTS" => {
                    section = Section::Supports;
                    continue;
                }
                "LOADS" => {
                    section = Section::Loads;
                    continue;
                }
                "OUTPUT" => {
                    section = Section::Output;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str, what: &str| -> Result<f64, TrussError> {
                s.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("invalid {what} `{s}`")))
            };
            let id = |s: &str, what: &str| -> Result<u64, TrussError> {
                s.parse::<u64>()
                    .map_err(|_| parse_err(line_no, format!("invalid {what} `{s}`")))
            };
            match section {
                Section::None => {
                    return Err(parse_err(line_no, "data before any section header"));
                }
                Section::Nodes => {
                    if fields.len() != 3 {
                        return Err(parse_err(line_no, "expected `<id> <x> <y>`"));
                    }
                    let node_id = id(fields[0], "node id")?;
                    let x = num(fields[1], "x coordinate")?;
                    let y = num(fields[2], "y coordinate")?;
                    if !x.is_finite() || !y.is_finite() {
                        return Err(parse_err(line_no, "non-finite coordinate"));
                    }
                    if raw_nodes.insert(node_id, (x, y)).is_some() {
                        return Err(parse_err(line_no, format!("duplicate node id {node_id}")));
                    }
                }
                Section::Bars => {
                    if fields.len() != 5 {
                        return Err(parse_err(
                            line_no,
                            "expected `<id> <node_i> <node_j> <area> <modulus>`",
                        ));
                    }
                    let i = id(fields[1], "node id")?;
                    let j = id(fields[2], "node id")?;
                    let area = num(fields[3], "area")?;
                    let modulus = num(fields[4], "modulus")?;
                    if !(area > 0.0 && area.is_finite()) {
                        return Err(parse_err(line_no, format!("area must be positive, got {area}")));
                    }
                    if !(modulus > 0.0 && modulus.is_finite()) {
                        return Err(parse_err(
                            line_no,
                            format!("modulus must be positive, got {modulus}"),
                        ));
                    }
                    if i == j {
                        return Err(parse_err(line_no, "bar connects a node to itself"));
                    }
                    raw_bars.push((line_no, i, j, area, modulus));
                }
                Section::Supports => {
                    if fields.len() != 2 {
                        return Err(parse_err(line_no, "expected `<node> <x|y|xy>`"));
                    }
                    raw_supports.push((line_no, id(fields[0], "node id")?, fields[1].to_string()));
                }
                Section::Loads => {
                    for f in &fields {
                        raw_loads.push((line_no, id(f, "node id")?));
                    }
                }
                Section::Output => {
                    if fields.len() != 2 {
                        return Err(parse_err(line_no, "expected `<node> <x|y>`"));
                    }
                    if raw_output.is_some() {
                        return Err(parse_err(line_no, "multiple OUTPUT entries"));
                    }
                    raw_output = Some((line_no, id(fields[0], "node id")?, fields[1].to_string()));
                }
            }
        }

        if raw_nodes.len() < 2 {
            return Err(parse_err(0, "need at least two nodes"));
        }
        let index: BTreeMap<u64, usize> =
            raw_nodes.keys().enumerate().map(|(i, &k)| (k, i)).collect();
        let nodes: Vec<(f64, f64)> = raw_nodes.values().copied().collect();
        let look = |line: usize, node: u64| -> Result<usize, TrussError> {
            index
                .get(&node)
                .copied()
                .ok_or_else(|| parse_err(line, format!("unknown node id {node}")))
        };

        let mut bars = Vec::with_capacity(raw_bars.len());
        for (line, i, j, area, modulus) in raw_bars {
            let a = look(line, i)?;
            let b = look(line, j)?;
            let (xa, ya) = nodes[a];
            let (xb, yb) = nodes[b];
            if ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt() < 1e-12 {
                return Err(parse_err(line, "zero-length bar"));
            }
            bars.push(Bar { node_i: a, node_j: b, area, modulus });
        }
        if bars.is_empty() {
            return Err(parse_err(0, "no bars defined"));
        }

        let mut supports = Vec::with_capacity(raw_supports.len());
        for (line, node, kind) in raw_supports {
            let node = look(line, node)?;
            let (fix_x, fix_y) = match kind.as_str() {
                "x" => (true, false),
                "y" => (false, true),
                "xy" | "yx" => (true, true),
                other => {
                    return Err(parse_err(line, format!("unknown support kind `{other}`")))
                }
            };
            supports.push(Support { node, fix_x, fix_y });
        }
        if supports.is_empty() {
            return Err(parse_err(0, "no supports defined"));
        }

        let mut load_nodes = Vec::with_capacity(raw_loads.len());
        for (line, node) in raw_loads {
            load_nodes.push(look(line, node)?);
        }
        if load_nodes.is_empty() {
            return Err(parse_err(0, "no load nodes defined"));
        }

        let (line, node, dof) = raw_output.ok_or_else(|| parse_err(0, "missing OUTPUT section"))?;
        if dof != "y" && dof != "x" {
            return Err(parse_err(line, format!("output dof must be x or y, got `{dof}`")));
        }
        let output_node = look(line, node)?;

        Ok(Self { nodes, bars, supports, load_nodes, output_node })
    }
}

/// Assembled and factorization-checked truss with the unit-load influence
/// vector of the output displacement.
#[derive(Debug, Clone)]
pub struct TrussModel {
    pub geometry: TrussGeometry,
    /// Downward output displacement (m) per unit (1 N) downward load on each
    /// load node.
    pub influence: Vec<f64>,
}

impl TrussModel {
    pub fn new(geometry: TrussGeometry) -> Result<Self, TrussError> {
        let n_nodes = geometry.nodes.len();
        let ndof = 2 * n_nodes;
        let mut fixed = vec![false; ndof];
        for s in &geometry.supports {
            if s.fix_x {
                fixed[2 * s.node] = true;
            }
            if s.fix_y {
                fixed[2 * s.node + 1] = true;
            }
        }
        let free: Vec<usize> = (0..ndof).filter(|&d| !fixed[d]).collect();
        let pos: BTreeMap<usize, usize> = free.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let n = free.len();
        if n == 0 {
            return Err(TrussError::Singular);
        }

        let mut k_red = vec![0.0; n * n];
        for bar in &geometry.bars {
            let (xi, yi) = geometry.nodes[bar.node_i];
            let (xj, yj) = geometry.nodes[bar.node_j];
            let (dx, dy) = (xj - xi, yj - yi);
            let len = (dx * dx + dy * dy).sqrt();
            let (c, s) = (dx / len, dy / len);
            let k = bar.modulus * bar.area / len;
            let dofs = [2 * bar.node_i, 2 * bar.node_i + 1, 2 * bar.node_j, 2 * bar.node_j + 1];
            let pattern = [c * c, c * s, s * s];
            // 4x4 bar stiffness: k * [B, -B; -B, B] with B = [cc, cs; cs, ss]
            let local = |a: usize, b: usize| -> f64 {
                let sign = if (a < 2) == (b < 2) { 1.0 } else { -1.0 };
                let entry = match (a % 2, b % 2) {
                    (0, 0) => pattern[0],
                    (1, 1) => pattern[2],
                    _ => pattern[1],
                };
                sign * k * entry
            };
            for a in 0..4 {
                let Some(&ra) = pos.get(&dofs[a]) else { continue };
                for b in 0..4 {
                    let Some(&rb) = pos.get(&dofs[b]) else { continue };
                    k_red[ra * n + rb] += local(a, b);
                }
            }
        }

        // one reduced solve per load node gives the influence coefficients
        let mut influence = Vec::with_capacity(geometry.load_nodes.len());
        let out_dof = 2 * geometry.output_node + 1;
        let out_pos = pos.get(&out_dof).copied().ok_or(TrussError::Singular)?;
        for &ln in &geometry.load_nodes {
            let mut rhs = vec![0.0; n];
            let dof = 2 * ln + 1;
            let Some(&rp) = pos.get(&dof) else {
                return Err(TrussError::Singular);
            };
            rhs[rp] = -1.0; // downward unit load
            let u = lu_solve(k_red.clone(), rhs, n).ok_or(TrussError::Singular)?;
            influence.push(-u[out_pos]); // downward deflection positive
        }
        Ok(Self { geometry, influence })
    }

    /// Output displacement (m, downward positive) under downward point loads
    /// in N, ordered per the geometry's load-node list. Exactly linear.
    pub fn solve(&self, loads: &[f64]) -> Result<f64, TrussError> {
        if loads.len() != self.influence.len() {
            return Err(TrussError::LoadCount {
                expected: self.influence.len(),
                got: loads.len(),
            });
        }
        Ok(self.influence.iter().zip(loads).map(|(a, p)| a * p).sum())
    }
}
