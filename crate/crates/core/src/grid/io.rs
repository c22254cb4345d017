//! Field files: four header lines `dim=`, `n=`, `L=`, `kind=`, each ended by
//! `\n`, one empty line, then the samples as little-endian `f64`, nodes in
//! row-major order with components fastest.

use std::fs;
use std::path::Path;

use super::{Field, Grid, Kind};
use crate::error::{Error, Result};

const KEYS: [&str; 4] = ["dim", "n", "L", "kind"];

pub fn write_field<K: Kind>(path: impl AsRef<Path>, field: &Field<K>) -> Result<()> {
    let g = field.grid();
    let mut bytes = format!(
        "dim={}\nn={}\nL={:?}\nkind={}\n\n",
        g.dim(),
        g.n(),
        g.len(),
        K::NAME
    )
    .into_bytes();
    bytes.reserve(field.data().len() * 8);
    for x in field.data() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_field<K: Kind>(path: impl AsRef<Path>) -> Result<Field<K>> {
    let bytes = fs::read(path)?;
    parse(&bytes)
}

fn parse<K: Kind>(bytes: &[u8]) -> Result<Field<K>> {
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::MalformedHeader("missing blank line after header".into()))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::MalformedHeader("header is not text".into()))?;
    let lines: Vec<&str> = text.split('\n').collect();
    if lines.len() != KEYS.len() {
        return Err(Error::MalformedHeader(format!(
            "expected {} header lines, found {}",
            KEYS.len(),
            lines.len()
        )));
    }
    let mut values = [""; 4];
    for (i, (line, key)) in lines.iter().zip(KEYS).enumerate() {
        values[i] = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| Error::MalformedHeader(format!("expected `{key}=`, found `{line}`")))?;
    }
    let bad = |what: &str, v: &str| Error::MalformedHeader(format!("bad {what} `{v}`"));
    let dim: usize = values[0].parse().map_err(|_| bad("dim", values[0]))?;
    let n: usize = values[1].parse().map_err(|_| bad("n", values[1]))?;
    let len: f64 = values[2].parse().map_err(|_| bad("L", values[2]))?;
    let kind = values[3];
    if !["scalar", "vector", "tensor"].contains(&kind) {
        return Err(bad("kind", kind));
    }
    let grid = Grid::new(dim, n, len).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    if kind != K::NAME {
        return Err(Error::DimensionMismatch {
            expected: K::NAME.into(),
            found: kind.into(),
        });
    }
    let payload = &bytes[end + 2..];
    let expected = grid.num_nodes() * K::components(dim);
    if payload.len() < expected * 8 {
        return Err(Error::Truncated {
            expected,
            found: payload.len() / 8,
        });
    }
    if payload.len() > expected * 8 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} payload bytes", expected * 8),
            found: format!("{} payload bytes", payload.len()),
        });
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Field::from_data(&grid, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ScalarField, VectorField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(3, 8, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..g.num_nodes() * 3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let v = VectorField::from_data(&g, data);
        let path = dir.path().join("v.field");
        write_field(&path, &v).unwrap();
        let back: VectorField = read_field(&path).unwrap();
        assert_eq!(back.grid(), v.grid());
        assert!(back.data().iter().zip(v.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 8, 1.0).unwrap();
        let path = dir.path().join("s.field");
        write_field(&path, &ScalarField::zeros(&g)).unwrap();
        let bytes = fs::read(&path).unwrap();
        let head = b"dim=2\nn=8\nL=1.0\nkind=scalar\n\n";
        assert_eq!(&bytes[..head.len()], head);
        assert_eq!(bytes.len(), head.len() + 64 * 8);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut bytes = b"dim=2\nn=12\nL=1.0\nkind=scalar\n\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(144 * 8));
        assert!(matches!(parse::<crate::grid::Scalar>(&bytes), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn rejects_short_payload() {
        let mut bytes = b"dim=2\nn=8\nL=1.0\nkind=vector\n\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(127 * 8));
        assert!(matches!(
            parse::<crate::grid::Vector>(&bytes),
            Err(Error::Truncated { expected: 128, found: 127 })
        ));
    }

    #[test]
    fn rejects_wrong_kind() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 8, 1.0).unwrap();
        let path = dir.path().join("v.field");
        write_field(&path, &VectorField::zeros(&g)).unwrap();
        assert!(matches!(
            read_field::<crate::grid::Tensor>(&path),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
