use crate::data::GridShape;
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Grid};

/// How unobserved pixels are filled before encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparseFill {
    #[default]
    Zero,
    /// Copy the closest observed pixel (squared Euclidean distance, first in
    /// row-major order on ties).
    Nearest,
}

impl std::str::FromStr for SparseFill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(SparseFill::Zero),
            "nearest" => Ok(SparseFill::Nearest),
            _ => Err(Error::Argument(format!("unknown sparse fill `{s}`"))),
        }
    }
}

pub fn fill_sparse(shape: &GridShape, fill: SparseFill) -> BinaryMask {
    match fill {
        SparseFill::Zero => shape.zero_filled(),
        SparseFill::Nearest => {
            let observed = shape.sparsity.ones();
            if observed.is_empty() {
                return shape.zero_filled();
            }
            let (h, w) = shape.grid.dims();
            Grid::from_fn(h, w, |r, c| {
                if *shape.sparsity.get(r, c) {
                    return *shape.grid.get(r, c);
                }
                let &(nr, nc) = observed
                    .iter()
                    .min_by_key(|&&(orow, ocol)| {
                        let dr = orow as isize - r as isize;
                        let dc = ocol as isize - c as isize;
                        dr * dr + dc * dc
                    })
                    .expect("nonempty");
                *shape.grid.get(nr, nc)
            })
        }
    }
}
