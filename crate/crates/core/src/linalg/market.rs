//! MatrixMarket coordinate dump for debugging.

use std::io::{self, Write};

use num_traits::Float;

use super::sparse::SparseMatrix;

pub fn write_matrix_market<T: Float + std::fmt::LowerExp, W: Write>(
    a: &SparseMatrix<T>,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        for (j, v) in a.row(i) {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_one_based_entries() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 2.5], vec![1.0, 0.0]]);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "2 2 2");
        assert!(lines[2].starts_with("1 2 2.5"));
        assert!(lines[3].starts_with("2 1 1.0"));
    }
}
