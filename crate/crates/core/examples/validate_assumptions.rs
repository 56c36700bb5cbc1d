//! Fits the structural constants of a bulk/surface potential pair and prints
//! the report as JSON.
//!
//! cargo run --release --example validate_assumptions -- [theta] [theta_surf]

use bsch::potentials::validate_assumptions;
use bsch::Potential;

fn main() -> bsch::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<f64>().expect("numeric argument"));
    let theta = args.next().unwrap_or(1.0);
    let theta_surf = args.next().unwrap_or(theta);
    let bulk = Potential::logarithmic(theta, 2.0)?;
    let surf = Potential::logarithmic(theta_surf, 2.0)?;
    let rep = validate_assumptions(&bulk, &surf, 2000)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&rep).expect("report serializes")
    );
    println!("all pass: {}", rep.all_pass());
    Ok(())
}
