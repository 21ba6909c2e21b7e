use std::time::Instant;

use stance_core::dataset::validate_stats;

use crate::args::ValidateArgs;
use crate::data::{DataFiles, Dataset};
use crate::CliError;

pub fn cmd_validate(args: &ValidateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let files = DataFiles::from_args(&args.data)?;
    let dataset = Dataset::load(&files)?;
    let result = validate_stats(&dataset.all());
    tracing::info!(elapsed_ms = started.elapsed().as_millis() as u64, "validated");
    match result {
        Ok(stats) => {
            println!("{stats}");
            Ok(())
        }
        Err((stats, mismatches)) => {
            println!("{stats}");
            println!();
            println!("{} mismatch(es) against the published statistics:", mismatches.len());
            for m in &mismatches {
                println!("  {m}");
            }
            Err(CliError::Mismatch)
        }
    }
}
