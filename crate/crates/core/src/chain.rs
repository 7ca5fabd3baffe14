//! Sequential assembly of networks that act on a state vector.
//!
//! A [`Chain`] holds a network mapping the original input to a state. Each
//! stage runs a sub-network on some state coordinates while other
//! coordinates are carried through identity channels; the stage's first
//! layer absorbs the previous stage's affine output.

use crate::error::{invalid, Result};
use crate::network::{parallel, AffineLayer, ReluNetwork, Wiring};

/// One output row of an affine map: sparse `(coordinate, coefficient)`
/// terms plus a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Row {
    pub fn coord(i: usize) -> Self {
        Self {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }
}

pub fn affine_layer(input_dim: usize, rows: &[Row]) -> Result<AffineLayer> {
    if rows.is_empty() {
        return invalid("affine map needs at least one row");
    }
    let mut l = AffineLayer::zeros(rows.len(), input_dim);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in &row.terms {
            if c >= input_dim {
                return invalid(format!("row references coordinate {c} >= {input_dim}"));
            }
            l.add_w(r, c, v);
        }
        l.set_b(r, row.constant);
    }
    Ok(l)
}

#[derive(Clone, Debug)]
pub struct Chain {
    input_dim: usize,
    net: Option<ReluNetwork>,
    pending: Option<AffineLayer>,
}

impl Chain {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            net: None,
            pending: None,
        }
    }

    /// Current state dimension.
    pub fn dim(&self) -> usize {
        match (&self.pending, &self.net) {
            (Some(p), _) => p.rows(),
            (None, Some(n)) => n.output_dim(),
            (None, None) => self.input_dim,
        }
    }

    /// Replaces the state by an affine function of it.
    pub fn linear(mut self, rows: &[Row]) -> Result<Self> {
        let l = affine_layer(self.dim(), rows)?;
        self.pending = Some(match self.pending.take() {
            Some(p) => l.after(&p),
            None => l,
        });
        Ok(self)
    }

    /// Keeps only the listed coordinates, in the given order.
    pub fn select(self, coords: &[usize]) -> Result<Self> {
        let rows: Vec<Row> = coords.iter().map(|&c| Row::coord(c)).collect();
        self.linear(&rows)
    }

    /// Runs `sub` on `inputs` and carries `carry`; the new state is the
    /// sub-network output followed by the carried coordinates.
    pub fn stage(self, sub: &ReluNetwork, inputs: &[usize], carry: &[usize]) -> Result<Self> {
        let wiring = Wiring {
            inputs: vec![inputs.to_vec()],
            pass_through: carry.to_vec(),
        };
        let p = parallel(self.dim(), &[sub], &wiring)?;
        self.push(p)
    }

    /// Runs several sub-networks side by side (padded to a common depth).
    pub fn stage_many(self, subs: &[&ReluNetwork], inputs: &[Vec<usize>], carry: &[usize]) -> Result<Self> {
        let wiring = Wiring {
            inputs: inputs.to_vec(),
            pass_through: carry.to_vec(),
        };
        let p = parallel(self.dim(), subs, &wiring)?;
        self.push(p)
    }

    /// Appends a network acting on the whole state.
    pub fn push(mut self, next: ReluNetwork) -> Result<Self> {
        let next = match self.pending.take() {
            Some(p) => next.map_input(&p)?,
            None => next,
        };
        self.net = Some(match self.net.take() {
            Some(n) => n.then_absorb(&next)?,
            None => next,
        });
        Ok(self)
    }

    pub fn finish(self) -> Result<ReluNetwork> {
        match (self.net, self.pending) {
            (Some(n), Some(p)) => n.map_output(&p),
            (Some(n), None) => Ok(n),
            (None, Some(p)) => ReluNetwork::new(vec![p]),
            (None, None) => ReluNetwork::new(vec![affine_layer(
                self.input_dim,
                &(0..self.input_dim).map(Row::coord).collect::<Vec<_>>(),
            )?]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::p1;

    #[test]
    fn linear_only_chain() {
        let c = Chain::new(2)
            .linear(&[Row::new(vec![(0, 2.0), (1, 1.0)], 1.0)])
            .unwrap()
            .finish()
            .unwrap();
        assert_eq!(c.depth(), 1);
        assert_eq!(c.eval_point(&[1.0, 2.0]), vec![5.0]);
    }

    #[test]
    fn stage_with_carry() {
        let c = Chain::new(2)
            .stage(&p1(), &[1], &[0])
            .unwrap()
            .linear(&[Row::new(vec![(0, 1.0), (1, -1.0)], 0.5)])
            .unwrap()
            .finish()
            .unwrap();
        assert_eq!(c.eval_point(&[1.0, 4.0]), vec![3.5]);
    }
}
