//! File formats, controller registry and run orchestration for the 26-area
//! load-frequency control benchmark. The `lfcbench` binary is a thin layer
//! over this crate.

pub mod config;
pub mod output;
pub mod plot;
pub mod registry;
pub mod report;
pub mod run;
pub mod scenario_io;

/// Process exit codes of the `lfcbench` binary.
pub mod exit {
    pub const OK: u8 = 0;
    pub const GENERIC: u8 = 1;
    /// Malformed command line.
    pub const USAGE: u8 = 2;
    /// Invalid configuration or model setup.
    pub const CONFIG: u8 = 3;
    /// File missing, unreadable or unwritable.
    pub const IO: u8 = 4;
    pub const UNKNOWN_CONTROLLER: u8 = 5;
    /// Controller cannot drive the selected plant variant.
    pub const INCOMPATIBLE: u8 = 6;
    /// More steps requested than the scenario covers.
    pub const TOO_MANY_STEPS: u8 = 7;
    /// Input file violates its schema.
    pub const SCHEMA: u8 = 8;
    /// The simulation itself failed.
    pub const RUNTIME: u8 = 9;
}

/// Edge list of the embedded topology as CSV.
pub fn topology_csv(topo: &lfcbench_core::topology::Topology) -> String {
    let mut out = String::from("a,b,distance_km,gain,coefficient\n");
    for l in topo.lines() {
        let coefficient = l.k / l.d;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            l.a.iso_code(),
            l.b.iso_code(),
            output::fmt_f64(l.d),
            output::fmt_f64(l.k),
            output::fmt_f64(coefficient)
        ));
    }
    out
}
