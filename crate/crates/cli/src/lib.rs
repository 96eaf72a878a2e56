//! The `facmon` operator command line.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Value};

use facmon_api::Config;
use facmon_core::auth::NewUser;
use facmon_core::monitoring::{FindingInput, RecordFilter};
use facmon_core::registry::{ItemFilter, ItemReceipt};

pub mod cli;
pub mod error;
pub mod ops;
pub mod output;

use cli::{Cli, Command, FilterArgs, FindingCommand, ImportCommand, ItemCommand, ReportCommand, ServeArgs, UserCommand};
use error::{CliError, EXIT_USAGE};
use ops::{parse_location, ExportArgs, ModeRegistry, Ops, Target};
use output::FormatterRegistry;

/// What a command produced: structured data for the formatter, or a line
/// of text printed as-is.
enum Emit {
    Data(Value),
    Text(String),
}

fn item_filter(f: &FilterArgs, text: Option<String>) -> ItemFilter {
    ItemFilter {
        campus: f.campus.clone(),
        location: f.location.clone(),
        category: f.category.clone(),
        condition: f.condition,
        text,
    }
}

fn record_filter(f: &FilterArgs) -> RecordFilter {
    RecordFilter {
        status: f.status,
        location: f.location.clone(),
        condition_of_item: f.condition,
        from: f.from,
        to: f.to,
        reporter: f.reporter.clone(),
    }
}

fn serve(args: ServeArgs, data_dir: Option<PathBuf>) -> Result<Emit, CliError> {
    let mut config = Config::load(args.config.as_deref())?;
    if let Some(dir) = data_dir {
        config.data_dir = dir;
    }
    if let Some(addr) = args.bind_addr {
        config.bind_addr = addr;
    }
    if let Some(ttl) = args.session_ttl_hours {
        config.session_ttl_hours = ttl;
    }
    if let Some(max) = args.max_upload_bytes {
        config.max_upload_bytes = max;
    }
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .try_init();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(facmon_api::serve(config, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(Emit::Text("stopped".into()))
}

fn read_password(given: Option<String>, from_stdin: bool) -> Result<String, CliError> {
    if from_stdin {
        let mut line = String::new();
        std::io::stdin().lock().read_line(&mut line)?;
        return Ok(line.trim_end_matches(['\r', '\n']).to_string());
    }
    given.ok_or_else(|| CliError::usage("a password is required: --new-password, FACMON_NEW_PASSWORD or --password-stdin"))
}

fn execute(ops: &dyn Ops, command: Command) -> Result<Emit, CliError> {
    let data = |v: Value| Ok(Emit::Data(v));
    match command {
        Command::Serve(_) => unreachable!("handled before connecting"),
        Command::Seed => {
            let seeded = ops.seed()?;
            Ok(Emit::Text(format!(
                "{} categories, {} demo references",
                seeded["categories"], seeded["demo_references"]
            )))
        }
        Command::User(cmd) => match cmd {
            UserCommand::Add {
                username,
                role,
                work_unit,
                locations,
                new_password,
                password_stdin,
            } => {
                let locations = locations.iter().map(|l| parse_location(l)).collect::<Result<_, _>>()?;
                let user = NewUser {
                    username,
                    password: read_password(new_password, password_stdin)?,
                    role,
                    work_unit_name: work_unit,
                    locations,
                };
                data(ops.add_user(user)?)
            }
            UserCommand::List => data(ops.list_users()?),
            UserCommand::Deactivate { username } => data(ops.set_user_active(&username, false)?),
            UserCommand::Activate { username } => data(ops.set_user_active(&username, true)?),
        },
        Command::Import(ImportCommand::Items { path }) => {
            let bytes = std::fs::read(&path)
                .map_err(|e| CliError::new("IO_ERROR", format!("{}: {e}", path.display())))?;
            let result = ops.import_items(bytes)?;
            Ok(Emit::Text(format!("{} items imported", result["imported"])))
        }
        Command::Export {
            dataset,
            path,
            filter,
            as_of,
        } => {
            let args = ExportArgs {
                items: item_filter(&filter, None),
                records: record_filter(&filter),
                from: filter.from,
                to: filter.to,
                as_of,
            };
            let bytes = ops.export(dataset, &args)?;
            if path.as_os_str() == "-" {
                return Ok(Emit::Text(String::from_utf8_lossy(&bytes).trim_end().to_string()));
            }
            std::fs::write(&path, &bytes)
                .map_err(|e| CliError::new("IO_ERROR", format!("{}: {e}", path.display())))?;
            let rows = bytes.iter().filter(|b| **b == b'\n').count().saturating_sub(1);
            Ok(Emit::Text(format!("{rows} {dataset} rows written to {}", path.display())))
        }
        Command::Report(cmd) => match cmd {
            ReportCommand::Summary { from, to, as_of } => data(ops.summary(from, to, as_of)?),
            ReportCommand::ByCondition { condition } => data(ops.by_condition(condition)?),
            ReportCommand::ByLocation { location } => data(ops.by_location(&parse_location(&location)?)?),
            ReportCommand::Warranty { as_of } => data(ops.warranty(as_of)?),
            ReportCommand::MaintenanceDue { as_of } => data(ops.maintenance_due(as_of)?),
        },
        Command::Item(cmd) => match cmd {
            ItemCommand::Register(args) => {
                let location = parse_location(&args.location)?;
                let barcode = match args.barcode {
                    Some(b) => b,
                    None => ops.next_barcode(&location.campus_code, &args.category)?,
                };
                data(ops.register_item(ItemReceipt {
                    barcode,
                    name: args.name,
                    specification: args.specification,
                    category_code: args.category,
                    type_code: args.type_code,
                    brand_code: args.brand,
                    source_code: args.source,
                    purchase_date: args.purchase_date,
                    warranty_end_date: args.warranty_end,
                    maintenance_interval_days: args.maintenance_days,
                    campus_code: location.campus_code,
                    location_code: location.location_code,
                    custodian: args.custodian,
                })?)
            }
            ItemCommand::Get { barcode } => data(ops.get_item(&barcode)?),
            ItemCommand::List { filter, text } => data(ops.list_items(&item_filter(&filter, text))?),
            ItemCommand::Transfer { barcode, to, date, note } => {
                data(ops.transfer(&barcode, &parse_location(&to)?, date, note)?)
            }
            ItemCommand::Status {
                barcode,
                event,
                date,
                note,
            } => data(ops.change_status(&barcode, event, date, note)?),
            ItemCommand::Repair {
                barcode,
                description,
                date,
            } => data(ops.open_repair(&barcode, date, &description)?),
            ItemCommand::CompleteRepair { id, date, cost } => data(ops.complete_repair(&id, date, cost)?),
        },
        Command::Finding(cmd) => match cmd {
            FindingCommand::Submit {
                barcode,
                object_name,
                description,
                date,
                location,
                finding,
                recommendation,
            } => {
                let location = location.as_deref().map(parse_location).transpose()?;
                data(ops.submit_finding(FindingInput {
                    barcode,
                    object_name,
                    object_description: description,
                    date,
                    location,
                    finding,
                    recommendation,
                })?)
            }
            FindingCommand::FollowUp { id, note } => data(ops.follow_up(&id, &note)?),
            FindingCommand::Resolve { id, date } => data(ops.resolve(&id, date)?),
            FindingCommand::List { filter } => data(ops.list_findings(&record_filter(&filter))?),
        },
    }
}

fn dispatch(cli: Cli) -> Result<Emit, CliError> {
    let target = Target {
        data_dir: cli.data_dir.clone().unwrap_or_else(|| PathBuf::from("data")),
        remote: cli.remote.clone(),
        token: cli.token.clone(),
        username: cli.user.clone(),
        password: cli.password.clone(),
    };
    if let Command::Serve(args) = cli.command {
        return serve(args, cli.data_dir);
    }
    let mode = if target.remote.is_some() { "remote" } else { "embedded" };
    let ops = ModeRegistry::default().connect(mode, &target)?;
    execute(ops.as_ref(), cli.command)
}

/// Runs one command line; returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let formatters = FormatterRegistry::default();
    let formatter = match formatters.get(&cli.output) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            return e.exit;
        }
    };
    let json_out = formatter.name() == "json";
    match dispatch(cli) {
        Ok(Emit::Data(value)) => match formatter.render(&value) {
            Ok(text) => {
                let _ = stdout.write_all(text.as_bytes());
                0
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                e.exit
            }
        },
        Ok(Emit::Text(text)) => {
            let line = if json_out { json!({ "message": text }).to_string() } else { text };
            let _ = writeln!(stdout, "{line}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit
        }
    }
}
