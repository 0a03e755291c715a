//! Prints the van der Pol limit cycle as `t,y1,y2` CSV, usable as a `cycle_file`.
//!
//! cargo run --example van_der_pol_cycle -- 1.0 256 > cycle.csv

use gfloquet_cli::builtins::builtin_cycle;
use gfloquet_cli::config::FieldSpec;

fn main() {
    let mut args = std::env::args().skip(1);
    let mu: f64 = args.next().map_or(1.0, |a| a.parse().expect("mu must be a number"));
    let intervals: usize = args.next().map_or(256, |a| a.parse().expect("intervals must be an integer"));
    let (period, samples) = match builtin_cycle(&FieldSpec::VanDerPol { mu }, intervals) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    println!("t,y1,y2");
    let h = period / intervals as f64;
    for (j, y) in samples.iter().enumerate() {
        println!("{},{},{}", j as f64 * h, y[0], y[1]);
    }
}
