//! Named parameter blocks backed by one flat 64-bit float vector.
//!
//! The flat layout is what the optimizer and the checkpoint blob operate on;
//! the block manifest (name, shape, offset) is what graphs use to create
//! parameter leaves.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl BlockSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    blocks: Vec<BlockSpec>,
    data: Vec<f64>,
}

impl ParamSet {
    /// Lays out blocks in declaration order and fills each one through
    /// `init(name, rows, cols)`.
    pub fn build(
        shapes: &[(String, usize, usize)],
        mut init: impl FnMut(&str, usize, usize) -> Vec<f64>,
    ) -> Self {
        let mut blocks = Vec::with_capacity(shapes.len());
        let mut data = Vec::new();
        for (name, rows, cols) in shapes {
            let values = init(name, *rows, *cols);
            assert_eq!(values.len(), rows * cols, "init shape mismatch for {name}");
            blocks.push(BlockSpec {
                name: name.clone(),
                rows: *rows,
                cols: *cols,
                offset: data.len(),
            });
            data.extend(values);
        }
        Self { blocks, data }
    }

    pub fn from_parts(blocks: Vec<BlockSpec>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = blocks.iter().map(|b| b.len()).sum();
        if expected != data.len() {
            return Err(Error::Data(format!(
                "parameter blob length {} does not match manifest total {expected}",
                data.len()
            )));
        }
        let mut offset = 0usize;
        for b in &blocks {
            if b.offset != offset {
                return Err(Error::Data(format!("non-contiguous block manifest at {}", b.name)));
            }
            offset += b.len();
        }
        Ok(Self { blocks, data })
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn spec(&self, name: &str) -> &BlockSpec {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .unwrap_or_else(|| panic!("unknown parameter block {name}"))
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        let b = self.spec(name);
        &self.data[b.offset..b.offset + b.len()]
    }

    pub fn slice_mut(&mut self, name: &str) -> &mut [f64] {
        let b = self.spec(name).clone();
        &mut self.data[b.offset..b.offset + b.len()]
    }

    /// Creates a parameter leaf for one block on a graph.
    pub fn leaf(&self, g: &mut Graph, name: &str) -> Var {
        let b = self.spec(name);
        g.param(b.offset, b.rows, b.cols, &self.data[b.offset..b.offset + b.len()])
    }

    /// Offset of the first block whose name starts with `prefix`, plus the
    /// total length of that contiguous prefixed range. Used to address the
    /// flow sub-range when the encoder is frozen.
    pub fn prefixed_range(&self, prefix: &str) -> (usize, usize) {
        let mut start = None;
        let mut end = 0usize;
        for b in &self.blocks {
            if b.name.starts_with(prefix) {
                if start.is_none() {
                    start = Some(b.offset);
                }
                end = b.offset + b.len();
            } else if start.is_some() {
                break;
            }
        }
        let s = start.unwrap_or(0);
        (s, end.saturating_sub(s))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_slicing() {
        let shapes = vec![
            ("enc.w".to_string(), 2, 3),
            ("enc.b".to_string(), 2, 1),
            ("flow.w".to_string(), 1, 2),
        ];
        let set = ParamSet::build(&shapes, |name, r, c| {
            let fill = if name.ends_with(".b") { 0.0 } else { 1.0 };
            vec![fill; r * c]
        });
        assert_eq!(set.len(), 10);
        assert_eq!(set.slice("enc.b"), &[0.0, 0.0]);
        assert_eq!(set.spec("flow.w").offset, 8);
        assert_eq!(set.prefixed_range("enc."), (0, 8));
        assert_eq!(set.prefixed_range("flow."), (8, 2));
    }

    #[test]
    fn from_parts_validates() {
        let blocks = vec![BlockSpec { name: "a".into(), rows: 2, cols: 2, offset: 0 }];
        assert!(ParamSet::from_parts(blocks.clone(), vec![0.0; 4]).is_ok());
        assert!(ParamSet::from_parts(blocks, vec![0.0; 3]).is_err());
    }
}
