//! Per-slot record dumps.

use std::io::{self, Write};

use okd_core::montecarlo::SlotRecord;

pub const RECORD_HEADER: &str = "q_A,k_B,k_Eu,k_Ev";

/// Writes one CSV row per slot. Returns the number of rows written.
pub fn write_records<W, I>(out: W, records: I) -> io::Result<u64>
where
    W: Write,
    I: IntoIterator<Item = SlotRecord>,
{
    let mut w = io::BufWriter::new(out);
    writeln!(w, "{RECORD_HEADER}")?;
    let mut n = 0;
    for r in records {
        writeln!(w, "{},{},{},{}", r.q_a, r.k_b, r.k_eu, r.k_ev)?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}
