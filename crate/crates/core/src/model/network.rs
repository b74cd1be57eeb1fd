use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Line;
use crate::optim::lu::DenseLu;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("network is disconnected; isolated buses: {0:?}")]
    Disconnected(Vec<usize>),
    #[error("slack bus {0} out of range")]
    BadSlack(usize),
    #[error("line {0} has non-positive reactance")]
    BadReactance(String),
    #[error("susceptance matrix is singular")]
    Singular,
}

/// Line flow per MW injected at a bus and withdrawn at the slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftFactors {
    pub slack: usize,
    /// `sf[line][bus]`
    pub sf: Vec<Vec<f64>>,
}

impl ShiftFactors {
    pub fn get(&self, line: usize, bus: usize) -> f64 {
        self.sf[line][bus]
    }

    pub fn lines(&self) -> usize {
        self.sf.len()
    }

    pub fn buses(&self) -> usize {
        self.sf.first().map_or(0, Vec::len)
    }

    /// Flows induced by nodal injections (positive = injection).
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        self.sf
            .iter()
            .map(|row| row.iter().zip(injection).map(|(s, p)| s * p).sum())
            .collect()
    }
}

fn isolated(lines: &[Line], buses: usize, slack: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); buses];
    for l in lines {
        adj[l.from_bus].push(l.to_bus);
        adj[l.to_bus].push(l.from_bus);
    }
    let mut seen = vec![false; buses];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(b) = queue.pop_front() {
        for &nb in &adj[b] {
            if !seen[nb] {
                seen[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    (0..buses).filter(|&b| !seen[b]).collect()
}

/// DC shift factors from the reduced susceptance matrix. Isolated buses are
/// reported 1-based.
pub fn compute_shift_factors(lines: &[Line], buses: usize, slack: usize) -> Result<ShiftFactors, NetworkError> {
    if slack >= buses {
        return Err(NetworkError::BadSlack(slack));
    }
    if let Some(l) = lines.iter().find(|l| !(l.reactance > 0.0)) {
        return Err(NetworkError::BadReactance(l.id.clone()));
    }
    let iso = isolated(lines, buses, slack);
    if !iso.is_empty() {
        return Err(NetworkError::Disconnected(iso.into_iter().map(|b| b + 1).collect()));
    }
    // reduced index: bus -> row, slack removed
    let red: Vec<Option<usize>> = (0..buses)
        .scan(0usize, |k, b| {
            Some(if b == slack {
                None
            } else {
                *k += 1;
                Some(*k - 1)
            })
        })
        .collect();
    let n = buses - 1;
    let mut sf = vec![vec![0.0; buses]; lines.len()];
    if n == 0 {
        return Ok(ShiftFactors { slack, sf });
    }
    let mut bmat = vec![0.0; n * n];
    for l in lines {
        let y = 1.0 / l.reactance;
        let (f, t) = (red[l.from_bus], red[l.to_bus]);
        if let Some(f) = f {
            bmat[f * n + f] += y;
        }
        if let Some(t) = t {
            bmat[t * n + t] += y;
        }
        if let (Some(f), Some(t)) = (f, t) {
            bmat[f * n + t] -= y;
            bmat[t * n + f] -= y;
        }
    }
    let lu = DenseLu::factor(n, bmat).map_err(|_| NetworkError::Singular)?;
    for b in 0..buses {
        let Some(k) = red[b] else { continue };
        let mut theta = vec![0.0; n];
        theta[k] = 1.0;
        lu.solve(&mut theta);
        let angle = |bus: usize| red[bus].map_or(0.0, |r| theta[r]);
        for (li, l) in lines.iter().enumerate() {
            sf[li][b] = (angle(l.from_bus) - angle(l.to_bus)) / l.reactance;
        }
    }
    Ok(ShiftFactors { slack, sf })
}
