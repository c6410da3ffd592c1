//! Pointwise index contraction between tensor fields.
//!
//! A spec such as `"uaij,ab,bvj->uvi"` names every slot of every operand
//! with a letter. Letters missing from the output are summed. The spec is
//! compiled once into a flat table of component offsets, then applied at
//! every grid point.

use super::field::{Field, Slot};
use crate::error::{Result, SrfError};

#[derive(Debug, Clone)]
pub struct Contraction {
    nops: usize,
    out_rank: usize,
    ranks: Vec<usize>,
    /// Flattened rows of `[out, op_0, .., op_{nops-1}]` offsets.
    table: Vec<u32>,
}

fn letters_of(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .map(|b| {
            if b.is_ascii_lowercase() || b.is_ascii_uppercase() {
                Ok(b)
            } else {
                Err(SrfError::Shape(format!("bad index letter {:?}", b as char)))
            }
        })
        .collect()
}

impl Contraction {
    pub fn new(spec: &str, n: usize) -> Result<Contraction> {
        let (lhs, rhs) = spec
            .split_once("->")
            .ok_or_else(|| SrfError::Shape(format!("contraction spec {spec:?} lacks '->'")))?;
        let inputs: Vec<Vec<u8>> = lhs.split(',').map(letters_of).collect::<Result<_>>()?;
        let output = letters_of(rhs)?;

        let mut alphabet: Vec<u8> = Vec::new();
        for op in &inputs {
            for &c in op {
                if !alphabet.contains(&c) {
                    alphabet.push(c);
                }
            }
        }
        for (k, &c) in output.iter().enumerate() {
            if !alphabet.contains(&c) {
                return Err(SrfError::Shape(format!("output letter {:?} not in inputs", c as char)));
            }
            if output[..k].contains(&c) {
                return Err(SrfError::Shape(format!("output letter {:?} repeated", c as char)));
            }
        }

        let slot_of = |word: &[u8], letter: u8| -> Vec<usize> {
            word.iter()
                .enumerate()
                .filter(|(_, &c)| c == letter)
                .map(|(i, _)| n.pow((word.len() - 1 - i) as u32))
                .collect()
        };
        // For each letter, the stride it contributes to every operand and to the output.
        let mut strides: Vec<Vec<usize>> = Vec::with_capacity(alphabet.len());
        for &c in &alphabet {
            let mut row = vec![slot_of(&output, c).iter().sum()];
            for op in &inputs {
                row.push(slot_of(op, c).iter().sum());
            }
            strides.push(row);
        }

        let nops = inputs.len();
        let nl = alphabet.len();
        let total = n.pow(nl as u32);
        let mut table = Vec::with_capacity(total * (nops + 1));
        let mut digits = vec![0usize; nl];
        for _ in 0..total {
            for k in 0..=nops {
                let off: usize = (0..nl).map(|l| digits[l] * strides[l][k]).sum();
                table.push(off as u32);
            }
            for l in (0..nl).rev() {
                digits[l] += 1;
                if digits[l] < n {
                    break;
                }
                digits[l] = 0;
            }
        }
        Ok(Contraction { nops, out_rank: output.len(), ranks: inputs.iter().map(Vec::len).collect(), table })
    }

    /// Applies the contraction at every point.
    pub fn apply(&self, ops: &[&Field], out_slots: &[Slot]) -> Result<Field> {
        if ops.len() != self.nops {
            return Err(SrfError::Shape(format!("expected {} operands, got {}", self.nops, ops.len())));
        }
        if out_slots.len() != self.out_rank {
            return Err(SrfError::Shape("output slot count does not match spec".into()));
        }
        let grid = ops[0].grid();
        for (k, op) in ops.iter().enumerate() {
            if op.rank() != self.ranks[k] {
                return Err(SrfError::Shape(format!(
                    "operand {k} has rank {}, spec expects {}",
                    op.rank(),
                    self.ranks[k]
                )));
            }
            if !op.grid().same_as(grid) {
                return Err(SrfError::Shape(format!("operand {k} lives on another grid")));
            }
        }
        let mut out = Field::zeros(grid, out_slots);
        let onc = out.ncomp();
        let stride = self.nops + 1;
        let npts = grid.npts();
        let out_data = out.data_mut();
        match self.nops {
            1 => {
                let a = ops[0];
                for p in 0..npts {
                    let (pa, po) = (a.at(p), &mut out_data[p * onc..(p + 1) * onc]);
                    for row in self.table.chunks_exact(stride) {
                        po[row[0] as usize] += pa[row[1] as usize];
                    }
                }
            }
            2 => {
                let (a, b) = (ops[0], ops[1]);
                for p in 0..npts {
                    let (pa, pb) = (a.at(p), b.at(p));
                    let po = &mut out_data[p * onc..(p + 1) * onc];
                    for row in self.table.chunks_exact(stride) {
                        po[row[0] as usize] += pa[row[1] as usize] * pb[row[2] as usize];
                    }
                }
            }
            _ => {
                for p in 0..npts {
                    let slices: Vec<&[f64]> = ops.iter().map(|o| o.at(p)).collect();
                    let po = &mut out_data[p * onc..(p + 1) * onc];
                    for row in self.table.chunks_exact(stride) {
                        let mut prod = 1.0;
                        for (s, &off) in slices.iter().zip(&row[1..]) {
                            prod *= s[off as usize];
                        }
                        po[row[0] as usize] += prod;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Compiles and applies a contraction.
///
/// # Panics
/// On a malformed spec or operands whose ranks or grids do not match it.
pub fn einsum(spec: &str, ops: &[&Field], out_slots: &[Slot]) -> Field {
    let n = ops[0].dim();
    Contraction::new(spec, n)
        .and_then(|c| c.apply(ops, out_slots))
        .unwrap_or_else(|e| panic!("einsum {spec:?}: {e}"))
}

/// Letter used for the k-th generated index when building specs programmatically.
pub fn idx(k: usize) -> char {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    LETTERS[k] as char
}
