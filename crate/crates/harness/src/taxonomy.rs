//! Taxonomy registry file IO.

use std::path::Path;

use tracelab_core::taxonomy::{validate, TaxonomyEntry};

use crate::error::Result;
use crate::io;

pub const TAXONOMY_FILE: &str = "taxonomy.json";

pub fn write(path: &Path, entries: &[TaxonomyEntry]) -> Result<()> {
    io::write_json(path, entries)
}

/// Reads and validates a registry file.
pub fn read(path: &Path) -> Result<Vec<TaxonomyEntry>> {
    let entries: Vec<TaxonomyEntry> = io::read_json(path)?;
    validate(&entries)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TAXONOMY_FILE);
        let entries = tracelab_core::taxonomy::registry();
        write(&path, &entries).unwrap();
        assert_eq!(read(&path).unwrap(), entries);
    }
}
