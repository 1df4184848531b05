//! Campaign runner and summary statistics behind the `sofcma` binary.

pub mod campaign;
pub mod stats;

pub use campaign::{run_campaign, write_campaign, Campaign, CampaignSpec, Format, RunRow, Timing};
pub use stats::Summary;
