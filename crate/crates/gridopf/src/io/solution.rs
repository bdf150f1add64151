//! Base-case and per-contingency solution files.
//!
//! Base file layout (one row per element, instance order):
//!
//! ```text
//! BUS
//! <id> <v> <theta> <b>
//! GENERATOR
//! <id> <p> <q>
//! ```
//!
//! The contingency file repeats, per contingency in instance order:
//!
//! ```text
//! CONTINGENCY <label>
//! DELTA <delta>
//! BUS ...
//! GENERATOR ...
//! ```
//!
//! Offline elements are reported with zero power. Floats use 17 significant
//! digits, so writing and re-reading is bit-exact and byte-deterministic.

use thiserror::Error;

use crate::acpf::{BaseState, OperatingPoint};
use crate::model::Network;

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("format error: {0}")]
    Format(String),
    #[error("writer refused: {0}")]
    Refused(String),
}

/// One contingency's share of the solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyBlock {
    pub label: String,
    pub delta: f64,
    pub point: OperatingPoint,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_finite(point: &OperatingPoint, what: &str) -> Result<(), SolutionError> {
    let all = point
        .v
        .iter()
        .chain(&point.theta)
        .chain(&point.b)
        .chain(&point.p_g)
        .chain(&point.q_g);
    for value in all {
        if !value.is_finite() {
            return Err(SolutionError::Refused(format!(
                "{what} contains a non-finite value"
            )));
        }
    }
    Ok(())
}

fn write_point_sections(net: &Network, point: &OperatingPoint, out: &mut String) {
    out.push_str("BUS\n");
    for (i, bus) in net.buses().iter().enumerate() {
        out.push_str(&format!(
            "{} {} {} {}\n",
            bus.id,
            fmt_f(point.v[i]),
            fmt_f(point.theta[i]),
            fmt_f(point.b[i])
        ));
    }
    out.push_str("GENERATOR\n");
    for (i, gen) in net.generators().iter().enumerate() {
        out.push_str(&format!(
            "{} {} {}\n",
            gen.id,
            fmt_f(point.p_g[i]),
            fmt_f(point.q_g[i])
        ));
    }
}

/// Serialize a base-case state. Refuses states whose reference angle is not
/// exactly zero or that contain non-finite values.
pub fn write_base_solution(net: &Network, state: &BaseState) -> Result<String, SolutionError> {
    if !state.dims_match(net) {
        return Err(SolutionError::Refused(
            "state dimensions do not match the network".into(),
        ));
    }
    if state.theta[net.ref_bus_index()] != 0.0 {
        return Err(SolutionError::Refused(format!(
            "reference bus angle must be zero, got {}",
            state.theta[net.ref_bus_index()]
        )));
    }
    check_finite(state, "base state")?;
    let mut out = String::new();
    write_point_sections(net, state, &mut out);
    Ok(out)
}

/// Serialize per-contingency states, one block per contingency in instance
/// order. The block labels must match the network's contingency list.
pub fn write_contingency_solutions(
    net: &Network,
    blocks: &[ContingencyBlock],
) -> Result<String, SolutionError> {
    if blocks.len() != net.contingencies().len() {
        return Err(SolutionError::Refused(format!(
            "expected {} contingency blocks, got {}",
            net.contingencies().len(),
            blocks.len()
        )));
    }
    let mut out = String::new();
    for (k, block) in net.contingencies().iter().zip(blocks) {
        if block.label != k.id {
            return Err(SolutionError::Refused(format!(
                "block {:?} out of instance order (expected {:?})",
                block.label, k.id
            )));
        }
        if !block.point.dims_match(net) {
            return Err(SolutionError::Refused(format!(
                "contingency {:?}: state dimensions do not match the network",
                k.id
            )));
        }
        if !block.delta.is_finite() {
            return Err(SolutionError::Refused(format!(
                "contingency {:?}: delta is not finite",
                k.id
            )));
        }
        check_finite(&block.point, &format!("contingency {:?}", k.id))?;
        out.push_str(&format!("CONTINGENCY {}\n", k.id));
        out.push_str(&format!("DELTA {}\n", fmt_f(block.delta)));
        write_point_sections(net, &block.point, &mut out);
    }
    Ok(out)
}

struct LineReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (n, line) in self.lines.by_ref() {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Some((n + 1, trimmed));
            }
        }
        None
    }

    fn peek_content(&mut self) -> Option<(usize, &'a str)> {
        loop {
            match self.lines.peek() {
                None => return None,
                Some(&(n, line)) => {
                    let trimmed = line.trim();
                    if trimmed.is_empty() {
                        self.lines.next();
                    } else {
                        return Some((n + 1, trimmed));
                    }
                }
            }
        }
    }
}

fn parse_f(token: &str, line_no: usize) -> Result<f64, SolutionError> {
    token
        .parse::<f64>()
        .map_err(|_| SolutionError::Format(format!("line {line_no}: bad number {token:?}")))
}

fn parse_id(token: &str, line_no: usize) -> Result<usize, SolutionError> {
    token
        .parse::<usize>()
        .map_err(|_| SolutionError::Format(format!("line {line_no}: bad id {token:?}")))
}

/// Read the BUS and GENERATOR sections into an operating point, requiring
/// every network element exactly once.
fn read_point_sections(net: &Network, reader: &mut LineReader) -> Result<OperatingPoint, SolutionError> {
    match reader.next_content() {
        Some((_, "BUS")) => {}
        other => {
            return Err(SolutionError::Format(format!(
                "expected BUS section, found {other:?}"
            )))
        }
    }
    let n = net.buses().len();
    let g = net.generators().len();
    let mut v = vec![None; n];
    let mut theta = vec![None; n];
    let mut b = vec![None; n];
    while let Some((line_no, line)) = reader.peek_content() {
        if line == "GENERATOR" {
            break;
        }
        reader.next_content();
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 4 {
            return Err(SolutionError::Format(format!(
                "line {line_no}: bus row needs 4 fields, got {}",
                tok.len()
            )));
        }
        let id = parse_id(tok[0], line_no)?;
        let idx = net
            .bus_index(id)
            .map_err(|_| SolutionError::Format(format!("line {line_no}: unknown bus {id}")))?;
        if v[idx].is_some() {
            return Err(SolutionError::Format(format!(
                "line {line_no}: duplicate bus {id}"
            )));
        }
        v[idx] = Some(parse_f(tok[1], line_no)?);
        theta[idx] = Some(parse_f(tok[2], line_no)?);
        b[idx] = Some(parse_f(tok[3], line_no)?);
    }

    match reader.next_content() {
        Some((_, "GENERATOR")) => {}
        other => {
            return Err(SolutionError::Format(format!(
                "expected GENERATOR section, found {other:?}"
            )))
        }
    }
    let mut p_g = vec![None; g];
    let mut q_g = vec![None; g];
    while let Some((line_no, line)) = reader.peek_content() {
        if line.starts_with("CONTINGENCY") {
            break;
        }
        reader.next_content();
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != 3 {
            return Err(SolutionError::Format(format!(
                "line {line_no}: generator row needs 3 fields, got {}",
                tok.len()
            )));
        }
        let id = parse_id(tok[0], line_no)?;
        let idx = net.gen_index(id).map_err(|_| {
            SolutionError::Format(format!("line {line_no}: unknown generator {id}"))
        })?;
        if p_g[idx].is_some() {
            return Err(SolutionError::Format(format!(
                "line {line_no}: duplicate generator {id}"
            )));
        }
        p_g[idx] = Some(parse_f(tok[1], line_no)?);
        q_g[idx] = Some(parse_f(tok[2], line_no)?);
    }

    let unwrap_all = |xs: Vec<Option<f64>>, kind: &str, ids: Vec<usize>| {
        xs.into_iter()
            .zip(ids)
            .map(|(x, id)| x.ok_or_else(|| SolutionError::Format(format!("missing {kind} {id}"))))
            .collect::<Result<Vec<f64>, _>>()
    };
    let bus_ids: Vec<usize> = net.buses().iter().map(|b| b.id).collect();
    let gen_ids: Vec<usize> = net.generators().iter().map(|g| g.id).collect();
    Ok(OperatingPoint {
        v: unwrap_all(v, "bus", bus_ids.clone())?,
        theta: unwrap_all(theta, "bus", bus_ids.clone())?,
        b: unwrap_all(b, "bus", bus_ids)?,
        p_g: unwrap_all(p_g, "generator", gen_ids.clone())?,
        q_g: unwrap_all(q_g, "generator", gen_ids)?,
    })
}

/// Parse a base solution file.
pub fn read_base_solution(net: &Network, text: &str) -> Result<BaseState, SolutionError> {
    let mut reader = LineReader::new(text);
    let state = read_point_sections(net, &mut reader)?;
    if let Some((line_no, line)) = reader.next_content() {
        return Err(SolutionError::Format(format!(
            "line {line_no}: unexpected trailing content {line:?}"
        )));
    }
    Ok(state)
}

/// Parse whatever contingency blocks the file contains, in file order.
/// Labels must be known and unique; each block must be internally complete.
pub fn scan_contingency_solutions(
    net: &Network,
    text: &str,
) -> Result<Vec<ContingencyBlock>, SolutionError> {
    let mut reader = LineReader::new(text);
    let mut blocks: Vec<ContingencyBlock> = Vec::new();
    while let Some((line_no, line)) = reader.next_content() {
        let label = match line.strip_prefix("CONTINGENCY") {
            Some(rest) => rest.trim().to_string(),
            None => {
                return Err(SolutionError::Format(format!(
                    "line {line_no}: expected CONTINGENCY header, got {line:?}"
                )))
            }
        };
        net.contingency(&label).map_err(|_| {
            SolutionError::Format(format!("line {line_no}: unknown contingency {label:?}"))
        })?;
        if blocks.iter().any(|b| b.label == label) {
            return Err(SolutionError::Format(format!(
                "line {line_no}: duplicate contingency {label:?}"
            )));
        }
        let delta = match reader.next_content() {
            Some((n, l)) => {
                let tok: Vec<&str> = l.split_whitespace().collect();
                if tok.len() != 2 || tok[0] != "DELTA" {
                    return Err(SolutionError::Format(format!(
                        "line {n}: expected DELTA row, got {l:?}"
                    )));
                }
                parse_f(tok[1], n)?
            }
            None => {
                return Err(SolutionError::Format(format!(
                    "contingency {label:?}: missing DELTA row"
                )))
            }
        };
        let point = read_point_sections(net, &mut reader)?;
        blocks.push(ContingencyBlock {
            label,
            delta,
            point,
        });
    }
    Ok(blocks)
}

/// Parse the contingency solution file, requiring one block per network
/// contingency in instance order.
pub fn read_contingency_solutions(
    net: &Network,
    text: &str,
) -> Result<Vec<ContingencyBlock>, SolutionError> {
    let blocks = scan_contingency_solutions(net, text)?;
    if blocks.len() != net.contingencies().len() {
        let have: Vec<&str> = blocks.iter().map(|b| b.label.as_str()).collect();
        let missing: Vec<&str> = net
            .contingencies()
            .iter()
            .map(|k| k.id.as_str())
            .filter(|id| !have.contains(id))
            .collect();
        return Err(SolutionError::Format(format!(
            "missing contingency blocks: {missing:?}"
        )));
    }
    for (block, k) in blocks.iter().zip(net.contingencies()) {
        if block.label != k.id {
            return Err(SolutionError::Format(format!(
                "block {:?} out of instance order (expected {:?})",
                block.label, k.id
            )));
        }
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn arbitrary_state(net: &Network, seed: u64) -> OperatingPoint {
        let mut rng = samples::SampleRng::new(seed);
        let n = net.buses().len();
        let g = net.generators().len();
        let mut point = OperatingPoint {
            v: (0..n).map(|_| rng.range(0.9, 1.1)).collect(),
            theta: (0..n).map(|_| rng.range(-0.5, 0.5)).collect(),
            b: (0..n).map(|_| rng.range(-0.1, 0.3)).collect(),
            p_g: (0..g).map(|_| rng.range(0.0, 1.0)).collect(),
            q_g: (0..g).map(|_| rng.range(-0.5, 0.5)).collect(),
        };
        point.theta[net.ref_bus_index()] = 0.0;
        point
    }

    #[test]
    fn base_solution_round_trips_bit_exact() {
        let net = samples::five_bus();
        for seed in 0..20 {
            let state = arbitrary_state(&net, seed);
            let text = write_base_solution(&net, &state).unwrap();
            let back = read_base_solution(&net, &text).unwrap();
            assert_eq!(state, back, "seed {seed}");
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let net = samples::five_bus();
        let state = arbitrary_state(&net, 3);
        assert_eq!(
            write_base_solution(&net, &state).unwrap(),
            write_base_solution(&net, &state).unwrap()
        );
    }

    #[test]
    fn writer_refuses_nonzero_reference_angle() {
        let net = samples::two_bus();
        let mut state = arbitrary_state(&net, 0);
        state.theta[0] = 0.01;
        assert!(matches!(
            write_base_solution(&net, &state),
            Err(SolutionError::Refused(_))
        ));
    }

    #[test]
    fn unknown_generator_row_rejected() {
        let net = samples::two_bus();
        let state = arbitrary_state(&net, 1);
        let text = write_base_solution(&net, &state).unwrap();
        let bad = text.replace("GENERATOR\n1 ", "GENERATOR\n7 ");
        let err = read_base_solution(&net, &bad).unwrap_err();
        assert!(err.to_string().contains("unknown generator 7"), "{err}");
    }

    #[test]
    fn missing_bus_row_rejected() {
        let net = samples::five_bus();
        let state = arbitrary_state(&net, 2);
        let text = write_base_solution(&net, &state).unwrap();
        let bad: String = text
            .lines()
            .filter(|l| !l.starts_with("3 "))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = read_base_solution(&net, &bad).unwrap_err();
        assert!(err.to_string().contains("missing bus 3"), "{err}");
    }

    #[test]
    fn contingency_solutions_round_trip() {
        let net = samples::three_gen_ring();
        let blocks: Vec<ContingencyBlock> = net
            .contingencies()
            .iter()
            .enumerate()
            .map(|(i, k)| ContingencyBlock {
                label: k.id.clone(),
                delta: 0.01 * i as f64,
                point: arbitrary_state(&net, 100 + i as u64),
            })
            .collect();
        let text = write_contingency_solutions(&net, &blocks).unwrap();
        let back = read_contingency_solutions(&net, &text).unwrap();
        assert_eq!(blocks, back);
    }

    #[test]
    fn missing_block_is_a_format_error() {
        let net = samples::three_gen_ring();
        let blocks: Vec<ContingencyBlock> = net
            .contingencies()
            .iter()
            .map(|k| ContingencyBlock {
                label: k.id.clone(),
                delta: 0.0,
                point: arbitrary_state(&net, 7),
            })
            .collect();
        let text = write_contingency_solutions(&net, &blocks).unwrap();
        // Drop the last block.
        let cut = text.rfind("CONTINGENCY").unwrap();
        let err = read_contingency_solutions(&net, &text[..cut]).unwrap_err();
        assert!(err.to_string().contains("missing contingency"), "{err}");
        // The lenient scanner still returns the remaining blocks.
        let partial = scan_contingency_solutions(&net, &text[..cut]).unwrap();
        assert_eq!(partial.len(), net.contingencies().len() - 1);
    }

    #[test]
    fn empty_contingency_list_gives_empty_file() {
        let net = samples::two_bus();
        let text = write_contingency_solutions(&net, &[]).unwrap();
        assert!(text.is_empty());
        assert!(read_contingency_solutions(&net, &text).unwrap().is_empty());
    }

    #[test]
    fn writer_refuses_out_of_order_blocks() {
        let net = samples::two_bus_double_circuit();
        let mk = |label: &str| ContingencyBlock {
            label: label.into(),
            delta: 0.0,
            point: arbitrary_state(&net, 9),
        };
        let err = write_contingency_solutions(&net, &[mk("E2"), mk("E1")]).unwrap_err();
        assert!(matches!(err, SolutionError::Refused(_)));
    }
}
