//! Field file format.
//!
//! Line 1 is a JSON header `{n_per_side, half_width, mask_radius, kind}`;
//! every following line holds one node, row-major, as comma-separated values
//! with 17 significant digits (`x` for scalars, `x,y` for vectors,
//! `xx,xy,yy` for symmetric matrices). Non-finite entries are written `NaN`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Grid2D, ScalarField, SymMatField, VectorField};
use crate::error::{Error, Result};
use crate::mat2::SymMat2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Scalar,
    Vector,
    Symmat,
}

impl FieldKind {
    fn width(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => 2,
            FieldKind::Symmat => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n_per_side: usize,
    pub half_width: f64,
    pub mask_radius: f64,
    pub kind: FieldKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField),
    Vector(VectorField),
    SymMat(SymMatField),
}

impl AnyField {
    pub fn kind(&self) -> FieldKind {
        match self {
            AnyField::Scalar(_) => FieldKind::Scalar,
            AnyField::Vector(_) => FieldKind::Vector,
            AnyField::SymMat(_) => FieldKind::Symmat,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        match self {
            AnyField::Scalar(f) => f.grid(),
            AnyField::Vector(f) => f.grid(),
            AnyField::SymMat(f) => f.grid(),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            AnyField::Scalar(f) => Ok(f),
            other => Err(Error::format(1, format!("expected a scalar field, found {:?}", other.kind()))),
        }
    }

    pub fn into_vector(self) -> Result<VectorField> {
        match self {
            AnyField::Vector(f) => Ok(f),
            other => Err(Error::format(1, format!("expected a vector field, found {:?}", other.kind()))),
        }
    }

    pub fn into_symmat(self) -> Result<SymMatField> {
        match self {
            AnyField::SymMat(f) => Ok(f),
            other => Err(Error::format(1, format!("expected a symmat field, found {:?}", other.kind()))),
        }
    }

    fn header(&self) -> FieldHeader {
        let g = self.grid();
        FieldHeader {
            n_per_side: g.n(),
            half_width: g.half_width(),
            mask_radius: g.mask_radius(),
            kind: self.kind(),
        }
    }

    /// Serialises to the field file format.
    pub fn to_text(&self) -> String {
        let header = serde_json::to_string(&self.header()).expect("header serialises");
        let mut out = String::with_capacity(header.len() + self.grid().len() * 26 * self.kind().width());
        out.push_str(&header);
        out.push('\n');
        let mut put = |vals: &[f64]| {
            for (c, v) in vals.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("write to string");
            }
            out.push('\n');
        };
        match self {
            AnyField::Scalar(f) => f.values().iter().for_each(|v| put(&[*v])),
            AnyField::Vector(f) => f.values().iter().for_each(|v| put(v)),
            AnyField::SymMat(f) => f.values().iter().for_each(|m| put(&[m.xx, m.xy, m.yy])),
        }
        out
    }

    pub fn parse(text: &str) -> Result<AnyField> {
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| Error::format(1, "empty file"))?;
        let header: FieldHeader =
            serde_json::from_str(head).map_err(|e| Error::format(1, format!("bad header: {e}")))?;
        let grid = Grid2D::new(header.n_per_side, header.half_width, header.mask_radius)
            .map_err(|e| Error::format(1, e.to_string()))?;
        let width = header.kind.width();
        let mut flat = Vec::with_capacity(grid.len() * width);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.is_empty() {
                continue;
            }
            let before = flat.len();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(lineno, format!("not a number: {tok:?}")))?;
                flat.push(v);
            }
            if flat.len() - before != width {
                return Err(Error::format(
                    lineno,
                    format!("expected {width} values, found {}", flat.len() - before),
                ));
            }
            rows += 1;
        }
        if rows != grid.len() {
            return Err(Error::format(
                rows + 2,
                format!("expected {} node rows, found {rows}", grid.len()),
            ));
        }
        let field = match header.kind {
            FieldKind::Scalar => {
                let f = ScalarField::new(grid, flat)?;
                f.validate()?;
                AnyField::Scalar(f)
            }
            FieldKind::Vector => {
                let f = VectorField::new(grid, flat.chunks(2).map(|c| [c[0], c[1]]).collect())?;
                f.validate()?;
                AnyField::Vector(f)
            }
            FieldKind::Symmat => {
                let f = SymMatField::new(
                    grid,
                    flat.chunks(3).map(|c| SymMat2::new(c[0], c[1], c[2])).collect(),
                )?;
                f.validate()?;
                AnyField::SymMat(f)
            }
        };
        Ok(field)
    }
}

impl From<ScalarField> for AnyField {
    fn from(f: ScalarField) -> Self {
        AnyField::Scalar(f)
    }
}

impl From<VectorField> for AnyField {
    fn from(f: VectorField) -> Self {
        AnyField::Vector(f)
    }
}

impl From<SymMatField> for AnyField {
    fn from(f: SymMatField) -> Self {
        AnyField::SymMat(f)
    }
}

pub fn write_field(path: impl AsRef<Path>, field: &AnyField) -> Result<()> {
    std::fs::write(path, field.to_text())?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<AnyField> {
    AnyField::parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid2D::unit_disk(17).unwrap();
        let text = AnyField::from(ScalarField::zeros(g)).to_text();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            r#"{"n_per_side":17,"half_width":1.0,"mask_radius":1.0,"kind":"scalar"}"#
        );
        assert_eq!(text.lines().count(), 1 + 17 * 17);
    }

    #[test]
    fn symmat_round_trip_with_nan_exterior() {
        let g = Grid2D::new(17, 1.0, 0.6).unwrap();
        let f = SymMatField::from_fn(g, |x| {
            if x[0].hypot(x[1]) > 0.7 {
                SymMat2::new(f64::NAN, 0.0, 0.0)
            } else {
                SymMat2::new(x[0] / 3.0, std::f64::consts::PI * x[1], 1e-300)
            }
        });
        let back = AnyField::parse(&AnyField::from(f.clone()).to_text()).unwrap().into_symmat().unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!(a == b || (a.xx.is_nan() && b.xx.is_nan()));
        }
    }

    #[test]
    fn rejects_malformed_payloads() {
        let g = Grid2D::unit_disk(17).unwrap();
        let text = AnyField::from(ScalarField::zeros(g)).to_text();
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(AnyField::parse(&truncated), Err(Error::Format { .. })));
        let bad = text.replacen("0.0000000000000000e0", "zero", 1);
        assert!(matches!(AnyField::parse(&bad), Err(Error::Format { line: 2, .. })));
        let bad_header = text.replacen("\"mask_radius\":1.0", "\"mask_radius\":2.0", 1);
        assert!(matches!(AnyField::parse(&bad_header), Err(Error::Format { line: 1, .. })));
        let unmasked_nan = text.replacen("0.0000000000000000e0", "NaN", 17 * 8 + 9);
        assert!(AnyField::parse(&unmasked_nan).is_err());
    }
}
