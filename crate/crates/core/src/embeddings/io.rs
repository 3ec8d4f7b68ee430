//! Text vector files: first line `|V| d`, then one `token v1 … vd` line per
//! type. Floats are written with Rust's shortest round-trip formatting, so
//! save/load is exact.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::Array2;

use super::vocab::{VocabEntry, Vocabulary};
use super::EmbeddingTable;
use crate::error::{Error, Result};

/// Write the published (input) vectors.
pub fn save_vectors<W: Write>(table: &EmbeddingTable, w: &mut W) -> Result<()> {
    write_matrix(table, &table.input, w, false)
}

/// Write input vectors followed by the context vectors, for resumable state.
pub fn save_state<W: Write>(table: &EmbeddingTable, w: &mut W) -> Result<()> {
    write_matrix(table, &table.input, w, true)?;
    for (id, entry) in table.vocab().entries().iter().enumerate() {
        write_row(w, &entry.token, table.output.row(id).as_slice().unwrap())?;
    }
    Ok(())
}

fn write_matrix<W: Write>(
    table: &EmbeddingTable,
    matrix: &Array2<f64>,
    w: &mut W,
    state: bool,
) -> Result<()> {
    let header = if state {
        format!("{} {} state\n", table.len(), table.dim())
    } else {
        format!("{} {}\n", table.len(), table.dim())
    };
    w.write_all(header.as_bytes())
        .map_err(|e| Error::Format(format!("write failed: {e}")))?;
    for (id, entry) in table.vocab().entries().iter().enumerate() {
        write_row(w, &entry.token, matrix.row(id).as_slice().unwrap())?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, token: &str, row: &[f64]) -> Result<()> {
    let mut line = String::with_capacity(row.len() * 12 + token.len());
    line.push_str(token);
    for v in row {
        line.push(' ');
        line.push_str(&format!("{v}"));
    }
    line.push('\n');
    w.write_all(line.as_bytes())
        .map_err(|e| Error::Format(format!("write failed: {e}")))
}

/// Read a published-vector file. The reconstructed vocabulary carries the
/// file order; frequencies are not stored in the format and read back as 0.
/// Context vectors come back zeroed.
pub fn load_vectors<R: Read>(reader: R) -> Result<EmbeddingTable> {
    let (vocab, input, rest, dim) = read_block(reader)?;
    if rest {
        // State files carry a second block.
        return Err(Error::Format(
            "file is a training-state dump; use load_state".into(),
        ));
    }
    let output = Array2::zeros((vocab.len(), dim));
    EmbeddingTable::new(vocab, input, output)
}

/// Read a full training-state dump written by [`save_state`].
pub fn load_state<R: Read>(reader: R) -> Result<EmbeddingTable> {
    let mut reader = BufReader::new(reader);
    let (n, dim, state) = read_header(&mut reader)?;
    if !state {
        return Err(Error::Format("not a training-state dump".into()));
    }
    let (tokens_in, input) = read_rows(&mut reader, n, dim, "input")?;
    let (tokens_out, output) = read_rows(&mut reader, n, dim, "output")?;
    if tokens_in != tokens_out {
        return Err(Error::Format(
            "state dump input/output token order mismatch".into(),
        ));
    }
    let vocab = Vocabulary::from_entries(
        tokens_in
            .into_iter()
            .map(|token| VocabEntry { token, count: 0 })
            .collect(),
    );
    EmbeddingTable::new(vocab, input, output)
}

fn read_block<R: Read>(reader: R) -> Result<(Vocabulary, Array2<f64>, bool, usize)> {
    let mut reader = BufReader::new(reader);
    let (n, dim, state) = read_header(&mut reader)?;
    let (tokens, matrix) = read_rows(&mut reader, n, dim, "vector")?;
    let vocab = Vocabulary::from_entries(
        tokens
            .into_iter()
            .map(|token| VocabEntry { token, count: 0 })
            .collect(),
    );
    Ok((vocab, matrix, state, dim))
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<(usize, usize, bool)> {
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::Format(format!("read failed: {e}")))?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    let state = fields.len() == 3 && fields[2] == "state";
    if !(fields.len() == 2 || state) {
        return Err(Error::Format(format!(
            "bad vector file header `{}`",
            line.trim_end()
        )));
    }
    let n = fields[0]
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("bad row count `{}`", fields[0])))?;
    let dim = fields[1]
        .parse::<usize>()
        .map_err(|_| Error::Format(format!("bad dimension `{}`", fields[1])))?;
    Ok((n, dim, state))
}

fn read_rows<R: BufRead>(
    reader: &mut R,
    n: usize,
    dim: usize,
    what: &str,
) -> Result<(Vec<String>, Array2<f64>)> {
    let mut tokens = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    let mut line = String::new();
    for row in 0..n {
        line.clear();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::Format(format!("read failed: {e}")))?;
        if read == 0 {
            return Err(Error::Format(format!(
                "vector file ended after {row} {what} rows, header promised {n}"
            )));
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::Format(format!("empty {what} row {row}")))?;
        tokens.push(token.to_string());
        let mut count = 0;
        for field in fields {
            let v = field
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("bad float `{field}` in row {row}")))?;
            values.push(v);
            count += 1;
        }
        if count != dim {
            return Err(Error::Format(format!(
                "row {row} has {count} components, header promised {dim}"
            )));
        }
    }
    let matrix = Array2::from_shape_vec((n, dim), values).expect("shape");
    Ok((tokens, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::build_vocab;
    use ndarray::array;

    fn table_2x3() -> EmbeddingTable {
        let vocab = build_vocab(["alpha", "alpha", "beta"], 1);
        let input = array![[1.0, -2.5, 0.125], [0.3333333333333333, 4.0, -1.0]];
        let output = array![[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]];
        EmbeddingTable::new(vocab, input, output).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let table = table_2x3();
        let mut buf = Vec::new();
        save_vectors(&table, &mut buf).unwrap();
        let loaded = load_vectors(buf.as_slice()).unwrap();
        assert_eq!(loaded.input, table.input);
        assert_eq!(loaded.vocab().entry(0).token, "alpha");
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let text = "2 3\nalpha 1 2 3\n";
        assert!(load_vectors(text.as_bytes()).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let text = "1 3\nalpha 1 2\n";
        assert!(load_vectors(text.as_bytes()).is_err());
    }

    #[test]
    fn hand_written_file_parses_to_expected_matrix() {
        let text = "2 3\nkey 0.5 -1 2\nlock 3 4.25 -0.75\n";
        let table = load_vectors(text.as_bytes()).unwrap();
        assert_eq!(table.input, array![[0.5, -1.0, 2.0], [3.0, 4.25, -0.75]]);
        assert_eq!(table.vector("key").unwrap()[2], 2.0);
    }

    #[test]
    fn state_round_trip_keeps_output_vectors() {
        let table = table_2x3();
        let mut buf = Vec::new();
        save_state(&table, &mut buf).unwrap();
        let loaded = load_state(buf.as_slice()).unwrap();
        assert_eq!(loaded.input, table.input);
        assert_eq!(loaded.output, table.output);
    }
}
