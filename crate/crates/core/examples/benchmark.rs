//! Runs the re-timing accuracy suite and prints the per-duration MAE table.
//!
//! `cargo run --release -p retime-core --example benchmark -- [cases] [seed]`

use retime_core::{run_suite, Method, SuiteConfig};

fn main() -> retime_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let cases = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let config = SuiteConfig { cases_per_duration: cases, seed, ..SuiteConfig::default() };
    let report = run_suite::<f64>(&config)?;
    println!("{:<16}{:>10}{:>10}{:>10}", "method", "20 s", "60 s", "180 s");
    for method in Method::ALL {
        print!("{:<16}", method.as_str());
        for &d in &config.durations_seconds {
            print!("{:>10.3}", report.mean_mae(method, d).unwrap_or(f64::NAN));
        }
        println!();
    }
    println!();
    for method in Method::ALL {
        print!("{:<16}", format!("{method} viol."));
        for &d in &config.durations_seconds {
            let s = report.summary(method, d).expect("summary");
            print!("{:>10.3}", s.duration_violation_rate);
        }
        println!();
    }
    Ok(())
}
