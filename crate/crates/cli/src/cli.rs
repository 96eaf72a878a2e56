use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rust_decimal::Decimal;

use facmon_core::domain::{Condition, LifecycleEvent, Role};
use facmon_core::monitoring::FindingStatus;
use facmon_core::reporting::Dataset;

fn domain<T: FromStr<Err = facmon_core::Error>>(raw: &str) -> Result<T, String> {
    raw.parse().map_err(|e: facmon_core::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "facmon", version, about = "Campus facilities monitoring: items, findings and reports")]
pub struct Cli {
    /// Data directory for embedded mode and `serve` [default: data].
    #[arg(long, global = true, env = "DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Output format: table, json or csv.
    #[arg(short, long, global = true, default_value = "table")]
    pub output: String,
    /// Base URL of a running server; switches to remote mode.
    #[arg(long, global = true, env = "FACMON_REMOTE")]
    pub remote: Option<String>,
    /// Session token for remote mode.
    #[arg(long, global = true, env = "FACMON_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Username for remote mode.
    #[arg(long, global = true, env = "FACMON_USER")]
    pub user: Option<String>,
    /// Password for remote mode.
    #[arg(long, global = true, env = "FACMON_PASSWORD", hide_env_values = true)]
    pub password: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Insert the default categories and demo reference data.
    Seed,
    #[command(subcommand)]
    User(UserCommand),
    #[command(subcommand)]
    Import(ImportCommand),
    /// Write a dataset as CSV (`-` for stdout).
    Export {
        #[arg(value_parser = domain::<Dataset>)]
        dataset: Dataset,
        path: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
    #[command(subcommand)]
    Report(ReportCommand),
    #[command(subcommand)]
    Item(ItemCommand),
    #[command(subcommand)]
    Finding(FindingCommand),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML configuration file; environment variables override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind_addr: Option<String>,
    #[arg(long)]
    pub session_ttl_hours: Option<u32>,
    #[arg(long)]
    pub max_upload_bytes: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    Add {
        username: String,
        #[arg(long, value_parser = domain::<Role>)]
        role: Role,
        #[arg(long)]
        work_unit: Option<String>,
        /// Assigned room as CAMPUS/ROOM; repeatable.
        #[arg(long = "location")]
        locations: Vec<String>,
        #[arg(long, env = "FACMON_NEW_PASSWORD", hide_env_values = true, conflicts_with = "password_stdin")]
        new_password: Option<String>,
        /// Read the new password from the first line of stdin.
        #[arg(long)]
        password_stdin: bool,
    },
    List,
    Deactivate { username: String },
    Activate { username: String },
}

#[derive(Debug, Subcommand)]
pub enum ImportCommand {
    /// Register every row of an item CSV, or none of them.
    Items { path: PathBuf },
}

#[derive(Debug, Default, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub campus: Option<String>,
    /// Room code.
    #[arg(long)]
    pub location: Option<String>,
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long, value_parser = domain::<Condition>)]
    pub condition: Option<Condition>,
    #[arg(long, value_parser = domain::<FindingStatus>)]
    pub status: Option<FindingStatus>,
    #[arg(long)]
    pub reporter: Option<String>,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    Summary {
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
    ByCondition {
        #[arg(value_parser = domain::<Condition>)]
        condition: Condition,
    },
    /// Items and open findings in one room (CAMPUS/ROOM).
    ByLocation { location: String },
    Warranty {
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
    MaintenanceDue {
        #[arg(long)]
        as_of: Option<NaiveDate>,
    },
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Generated from campus and category when omitted.
    #[arg(long)]
    pub barcode: Option<String>,
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value = "")]
    pub specification: String,
    #[arg(long)]
    pub category: String,
    #[arg(long = "type")]
    pub type_code: String,
    #[arg(long)]
    pub brand: String,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub purchase_date: NaiveDate,
    #[arg(long)]
    pub warranty_end: Option<NaiveDate>,
    #[arg(long)]
    pub maintenance_days: Option<u32>,
    /// Room as CAMPUS/ROOM.
    #[arg(long)]
    pub location: String,
    #[arg(long, default_value = "")]
    pub custodian: String,
}

#[derive(Debug, Subcommand)]
pub enum ItemCommand {
    Register(Box<RegisterArgs>),
    Get { barcode: String },
    List {
        #[command(flatten)]
        filter: FilterArgs,
        /// Free-text match on barcode, name, specification or custodian.
        #[arg(long)]
        text: Option<String>,
    },
    Transfer {
        barcode: String,
        /// Target room as CAMPUS/ROOM.
        to: String,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        note: Option<String>,
    },
    Status {
        barcode: String,
        #[arg(value_parser = domain::<LifecycleEvent>)]
        event: LifecycleEvent,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        note: Option<String>,
    },
    /// Open a repair on a damaged item.
    Repair {
        barcode: String,
        #[arg(long)]
        description: String,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    CompleteRepair {
        id: String,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        cost: Option<Decimal>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FindingCommand {
    Submit {
        #[arg(long)]
        barcode: Option<String>,
        #[arg(long)]
        object_name: Option<String>,
        #[arg(long)]
        description: Option<String>,
        #[arg(long)]
        date: NaiveDate,
        /// Room as CAMPUS/ROOM; defaults to the item's room.
        #[arg(long)]
        location: Option<String>,
        #[arg(long)]
        finding: String,
        #[arg(long, default_value = "")]
        recommendation: String,
    },
    FollowUp { id: String, note: String },
    Resolve {
        id: String,
        #[arg(long)]
        date: NaiveDate,
    },
    List {
        #[command(flatten)]
        filter: FilterArgs,
    },
}
