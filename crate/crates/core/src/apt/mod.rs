//! Atom-probe ingest: EPOS event records and mass-spectrum range tables.

mod elements;
pub mod epos;
pub mod ranging;

pub use elements::{is_element_symbol, nominal_mass};
pub use epos::{parse_epos, read_epos, write_epos, write_epos_file, IonEvent, EPOS_RECORD_LEN};
pub use ranging::{assign_all, assign_species, parse_range_file, RangeTable, SpeciesRange};
